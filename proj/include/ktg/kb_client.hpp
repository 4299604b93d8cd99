#pragma once

// Auxiliary-knowledge client: entity description/domain and relation
// hierarchy, fetched from Wikidata or a local fixture store, with an
// inspectable one-file-per-id JSON cache.

#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ktg/data.hpp"

namespace ktg {

struct NotFoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class AuxSource { Live, Cache, Fixture };

struct AuxKnowledge {
  std::vector<std::string> description;
  std::vector<std::string> domain;
  AuxSource source = AuxSource::Live;
};

// Raw backend record before tokenization.
struct AuxRecord {
  std::string description;
  std::string domain;
  std::string hierarchy;  // slash-separated, e.g. "root/people/place_of_death"
};

class KbBackend {
 public:
  virtual ~KbBackend() = default;
  virtual std::optional<AuxRecord> fetch(const std::string& id) = 0;
  virtual bool id_valid(const std::string& id) const {
    return !id.empty() && id.find('/') == std::string::npos;
  }
  virtual AuxSource source_kind() const = 0;
};

// Directory of <id>.json files: {"description": "...", "domain": "...",
// "hierarchy": "root/..."} — all fields optional.
class FixtureBackend : public KbBackend {
 public:
  explicit FixtureBackend(std::string dir) : dir_(std::move(dir)) {}

  std::optional<AuxRecord> fetch(const std::string& id) override {
    std::filesystem::path p = std::filesystem::path(dir_) / (id + ".json");
    std::ifstream in(p);
    if (!in) return std::nullopt;
    nlohmann::json j = nlohmann::json::parse(in, nullptr, true, true);
    AuxRecord rec;
    rec.description = j.value("description", "");
    rec.domain = j.value("domain", "");
    rec.hierarchy = j.value("hierarchy", "");
    return rec;
  }

  AuxSource source_kind() const override { return AuxSource::Fixture; }

 private:
  std::string dir_;
};

// Always fails with a transport error; used to prove hermeticity.
class FailingBackend : public KbBackend {
 public:
  std::optional<AuxRecord> fetch(const std::string& id) override {
    throw TransportError("no transport available for id " + id);
  }
  AuxSource source_kind() const override { return AuxSource::Live; }
};

class KbClient {
 public:
  KbClient(KbBackend& backend, std::string cache_dir)
      : backend_(backend), cache_dir_(std::move(cache_dir)) {
    if (!cache_dir_.empty()) std::filesystem::create_directories(cache_dir_);
  }

  AuxKnowledge enrich_entity(const std::string& id) {
    AuxRecord rec;
    AuxSource src;
    lookup(id, rec, src);
    AuxKnowledge k;
    k.description = tokenize(rec.description);
    k.domain = tokenize(rec.domain);
    k.source = src;
    return k;
  }

  // Slash-separated hierarchy split into segments, first segment "root".
  // Relations with no recorded hierarchy fall back to [root, <id>].
  std::vector<std::string> enrich_relation(const std::string& id) {
    AuxRecord rec;
    AuxSource src;
    lookup(id, rec, src);
    std::vector<std::string> segs;
    std::string cur;
    for (char c : rec.hierarchy) {
      if (c == '/') {
        if (!cur.empty()) segs.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) segs.push_back(cur);
    if (segs.empty()) segs = {"root", id};
    if (segs.front() != "root") segs.insert(segs.begin(), "root");
    return segs;
  }

 private:
  void lookup(const std::string& id, AuxRecord& rec, AuxSource& src) {
    if (!backend_.id_valid(id)) throw NotFoundError("invalid KB identifier: " + id);
    if (read_cache(id, rec)) {
      src = AuxSource::Cache;
      return;
    }
    auto fetched = backend_.fetch(id);
    if (!fetched) throw NotFoundError("unknown KB identifier: " + id);
    rec = *fetched;
    write_cache(id, rec);
    src = backend_.source_kind();
  }

  std::filesystem::path cache_path(const std::string& id) const {
    std::string safe;
    for (char c : id) safe += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
                               c == '-' || c == '.')
                                  ? c
                                  : '~';
    return std::filesystem::path(cache_dir_) / (safe + ".json");
  }

  bool read_cache(const std::string& id, AuxRecord& rec) const {
    if (cache_dir_.empty()) return false;
    std::ifstream in(cache_path(id));
    if (!in) return false;
    nlohmann::json j = nlohmann::json::parse(in);
    rec.description = j.value("description", "");
    rec.domain = j.value("domain", "");
    rec.hierarchy = j.value("hierarchy", "");
    return true;
  }

  // write-to-temp-then-rename so concurrent writers cannot corrupt entries
  void write_cache(const std::string& id, const AuxRecord& rec) const {
    if (cache_dir_.empty()) return;
    nlohmann::json j = {{"description", rec.description},
                        {"domain", rec.domain},
                        {"hierarchy", rec.hierarchy}};
    auto final_path = cache_path(id);
    auto tmp = final_path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp);
      out << j.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, final_path);
  }

  KbBackend& backend_;
  std::string cache_dir_;
};

}  // namespace ktg
