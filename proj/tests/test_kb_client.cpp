#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "ktg/kb_client.hpp"
#include "ktg/kb_wikidata.hpp"

using namespace ktg;
namespace fs = std::filesystem;

namespace {

std::string fixture_dir() { return std::string(KTG_FIXTURES) + "/kb"; }

struct TempDir {
  fs::path path;
  TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Counts backend hits to prove the cache short-circuits.
struct CountingBackend : KbBackend {
  FixtureBackend inner{fixture_dir()};
  int hits = 0;
  std::optional<AuxRecord> fetch(const std::string& id) override {
    ++hits;
    return inner.fetch(id);
  }
  AuxSource source_kind() const override { return AuxSource::Fixture; }
};

}  // namespace

TEST_CASE("fixture backend serves tokenized descriptions and domains") {
  FixtureBackend backend(fixture_dir());
  KbClient client(backend, "");
  auto k = client.enrich_entity("Q36159");
  REQUIRE(k.description == std::vector<std::string>{"american", "basketball", "player"});
  REQUIRE(k.domain == std::vector<std::string>{"human"});
  REQUIRE(k.source == AuxSource::Fixture);
}

TEST_CASE("relation hierarchy splits on slashes with root first") {
  FixtureBackend backend(fixture_dir());
  KbClient client(backend, "");
  REQUIRE(client.enrich_relation("place_of_death") ==
          std::vector<std::string>{"root", "people", "deceased_person", "place_of_death"});
  // empty hierarchy falls back to [root, id]
  REQUIRE(client.enrich_relation("ALICE_SMITH") ==
          std::vector<std::string>{"root", "ALICE_SMITH"});
}

TEST_CASE("unknown and invalid identifiers raise NotFoundError") {
  FixtureBackend backend(fixture_dir());
  KbClient client(backend, "");
  REQUIRE_THROWS_AS(client.enrich_entity("NOPE"), NotFoundError);
  REQUIRE_THROWS_AS(client.enrich_entity(""), NotFoundError);
  REQUIRE_THROWS_AS(client.enrich_entity("a/b"), NotFoundError);
}

TEST_CASE("cache hit is byte-identical on rewrite and reported as cache source") {
  TempDir cache("ktg_kb_cache_test");
  CountingBackend backend;
  KbClient client(backend, cache.path.string());

  auto first = client.enrich_entity("Q36159");
  REQUIRE(first.source == AuxSource::Fixture);
  REQUIRE(backend.hits == 1);
  auto cached_file = cache.path / "Q36159.json";
  REQUIRE(fs::exists(cached_file));
  std::string bytes = slurp(cached_file);

  auto second = client.enrich_entity("Q36159");
  REQUIRE(second.source == AuxSource::Cache);
  REQUIRE(second.description == first.description);
  REQUIRE(second.domain == first.domain);
  REQUIRE(backend.hits == 1);  // no second fetch
  REQUIRE(slurp(cached_file) == bytes);
  REQUIRE(fs::directory_iterator(cache.path) != fs::directory_iterator{});
}

TEST_CASE("failing backend still serves cached entries but nothing else") {
  TempDir cache("ktg_kb_failing_test");
  {
    FixtureBackend warm(fixture_dir());
    KbClient client(warm, cache.path.string());
    client.enrich_entity("Q36159");
  }
  FailingBackend offline;
  KbClient client(offline, cache.path.string());
  auto k = client.enrich_entity("Q36159");
  REQUIRE(k.source == AuxSource::Cache);
  REQUIRE(k.description == std::vector<std::string>{"american", "basketball", "player"});
  REQUIRE_THROWS_AS(client.enrich_entity("Q1"), TransportError);
}

TEST_CASE("cache filenames are sanitized for unusual identifiers") {
  TempDir cache("ktg_kb_sanitize_test");
  FixtureBackend backend(fixture_dir());
  KbClient client(backend, cache.path.string());
  REQUIRE_THROWS_AS(client.enrich_entity("weird id"), NotFoundError);  // space, not found
  for (const auto& entry : fs::directory_iterator(cache.path))
    REQUIRE(entry.path().filename().string().find(' ') == std::string::npos);
}

TEST_CASE("wikidata backend validates identifier shape without touching the network") {
  WikidataBackend backend;
  REQUIRE(backend.id_valid("Q42"));
  REQUIRE(backend.id_valid("P19"));
  REQUIRE_FALSE(backend.id_valid("X42"));
  REQUIRE_FALSE(backend.id_valid("Q"));
  REQUIRE_FALSE(backend.id_valid("Q42b"));
  REQUIRE_FALSE(backend.id_valid(""));
}
