#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <random>

#include "ktg/data.hpp"

using namespace ktg;

namespace {

QAExample make_example(std::vector<std::string> labels, std::vector<std::string> rel_ids,
                       std::vector<std::string> question) {
  QAExample ex;
  for (auto& l : labels) ex.facts.entities.push_back({l + "_id", l, {}, {}});
  for (auto& r : rel_ids) ex.facts.relations.push_back({r, {r}, {"root", r}});
  ex.facts.answer_index = int(labels.size()) - 1;
  ex.question = std::move(question);
  ex.word_types = label_word_types(ex.question, ex.facts);
  return ex;
}

std::string fixture(const std::string& name) {
  return std::string(KTG_FIXTURES) + "/" + name;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits punctuation and possessives") {
  auto toks = tokenize("Where was LeBron James's high school located in?");
  std::vector<std::string> want = {"where", "was",    "lebron", "james", "'s",
                                   "high",  "school", "located", "in",   "?"};
  REQUIRE(toks == want);
  REQUIRE(tokenize("st. vincent-st. mary high school") ==
          std::vector<std::string>{"st.", "vincent-st.", "mary", "high", "school"});
  REQUIRE(tokenize("a,b;c:(d) \"e\"") ==
          std::vector<std::string>{"a", ",", "b", ";", "c", ":", "(", "d", ")", "\"", "e", "\""});
}

TEST_CASE("word types for a multi-entity question with multiword matches") {
  FactPath facts;
  facts.entities = {
      {"Q36159", "lebron james", {"american", "basketball", "player"}, {"human"}},
      {"Q7588023", "st. vincent-st. mary high school", {}, {}},
      {"Q1397", "ohio", {}, {}}};
  facts.relations = {
      {"educated_at", {"educated", "at"}, {"root", "people", "person", "educated_at"}},
      {"located_in", {"located", "in"}, {"root", "location", "located_in"}}};
  facts.answer_index = 2;
  std::vector<std::string> q = {"where", "was",    "lebron",  "james", "'s",
                                "high",  "school", "located", "in",    "?"};
  auto types = label_word_types(q, facts);
  std::vector<WordType> want = {WordType::Interrogative, WordType::Ordinary, WordType::Entity,
                                WordType::Entity,        WordType::Ordinary, WordType::Entity,
                                WordType::Entity,        WordType::Relation, WordType::Relation,
                                WordType::Ordinary};
  REQUIRE(types == want);
}

TEST_CASE("word typing prefers entities on ties and requires position-0 interrogatives") {
  FactPath facts;
  facts.entities = {{"e1", "apple", {}, {}}, {"e2", "fruit", {}, {}}};
  facts.relations = {{"r1", {"apple"}, {"root", "r1"}}};  // same surface as the entity
  facts.answer_index = 1;
  auto types = label_word_types({"what", "is", "apple", "?"}, facts);
  REQUIRE(types[2] == WordType::Entity);

  // "where" mid-question is not interrogative; a non-lexicon first token is ordinary
  auto t2 = label_word_types({"tell", "me", "where", "apple", "is"}, facts);
  REQUIRE(t2[0] == WordType::Ordinary);
  REQUIRE(t2[2] == WordType::Ordinary);
}

TEST_CASE("fact path validation rejects malformed paths") {
  FactPath p;
  p.entities = {{"a", "a", {}, {}}};
  REQUIRE_THROWS_AS(p.validate(), ValidationError);
  p.entities.push_back({"b", "b", {}, {}});
  p.relations = {{"r", {"r"}, {"root"}}, {"r2", {"r2"}, {"root"}}};
  p.answer_index = 1;
  REQUIRE_THROWS_AS(p.validate(), ValidationError);
  p.relations.pop_back();
  REQUIRE_NOTHROW(p.validate());
  p.answer_index = 0;
  REQUIRE_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("vocab reserves sentinels and orders by frequency then lexicographically") {
  auto ex = make_example({"alice", "paris"}, {"born_in"},
                         {"where", "was", "alice", "born_in", "?"});
  auto ex2 = make_example({"alice", "rome"}, {"born_in"},
                          {"where", "was", "alice", "born_in", "?"});
  Vocab v = build_vocab({ex, ex2});
  REQUIRE(v.decode(Vocab::kPad) == Vocab::kPadTok);
  REQUIRE(v.decode(Vocab::kUnk) == Vocab::kUnkTok);
  REQUIRE(v.decode(Vocab::kEos) == Vocab::kEosTok);
  REQUIRE(v.has(Vocab::kEmptyTok));
  // every interrogative is present even if unseen in the corpus
  for (const auto& w : default_interrogatives()) REQUIRE(v.has(w));
  // frequency ordering: "alice" (freq 4: question x2 + label x2) precedes "rome" (freq 1)
  REQUIRE(v.encode("alice") < v.encode("rome"));
  // ties broken lexicographically: paris and rome both occur once
  REQUIRE(v.encode("paris") < v.encode("rome"));
  REQUIRE(v.encode("nonexistent") == Vocab::kUnk);

  Vocab v2 = build_vocab({ex, ex2});
  REQUIRE(v.to_token == v2.to_token);  // deterministic

  Vocab pruned = build_vocab({ex, ex2}, 2);
  REQUIRE_FALSE(pruned.has("rome"));
  REQUIRE(pruned.has("alice"));
}

TEST_CASE("path linearization interleaves entities and relations") {
  auto ex = make_example({"a", "b", "c"}, {"r1", "r2"}, {"who", "is", "a", "?"});
  auto lin = linearize_path(ex.facts);
  REQUIRE(lin.size() == 5);
  for (size_t i = 0; i < lin.size(); ++i) {
    REQUIRE(lin[i].is_entity == (i % 2 == 0));
    REQUIRE(lin[i].index == int(i / 2));
  }
}

TEST_CASE("dataset loading labels types, appends EOS, and reports bad lines") {
  auto data = load_dataset(fixture("table1.jsonl"));
  REQUIRE(data.size() == 1);
  const auto& ex = data[0];
  REQUIRE(ex.question.back() == Vocab::kEosTok);
  REQUIRE(ex.word_types.back() == WordType::Ordinary);
  REQUIRE(ex.question.size() == 11);
  REQUIRE(ex.word_types[0] == WordType::Interrogative);
  REQUIRE(ex.word_types[7] == WordType::Relation);
  REQUIRE(ex.facts.answer_index == 2);

  REQUIRE_THROWS_WITH(load_dataset(fixture("bad.jsonl")),
                      Catch::Matchers::ContainsSubstring("line 2"));
  REQUIRE_THROWS_AS(load_dataset(fixture("does_not_exist.jsonl")), ValidationError);
}

TEST_CASE("missing hierarchy defaults to root plus joined surface") {
  auto data = load_dataset(fixture("toy_raw.jsonl"));
  REQUIRE(data.size() == 20);
  const auto& r = data[0].facts.relations[0];
  REQUIRE(r.hierarchy_path == std::vector<std::string>{"root", "born_in"});
}

TEST_CASE("save and reload round-trips the corpus") {
  auto data = load_dataset(fixture("toy.jsonl"));
  std::string tmp = "test_data_roundtrip.jsonl";
  save_dataset(data, tmp);
  auto again = load_dataset(tmp);
  REQUIRE(again.size() == data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    REQUIRE(again[i].question == data[i].question);
    REQUIRE(again[i].word_types == data[i].word_types);
    REQUIRE(again[i].facts.entities.size() == data[i].facts.entities.size());
    for (size_t k = 0; k < data[i].facts.entities.size(); ++k) {
      REQUIRE(again[i].facts.entities[k].label == data[i].facts.entities[k].label);
      REQUIRE(again[i].facts.entities[k].description == data[i].facts.entities[k].description);
    }
    for (size_t k = 0; k < data[i].facts.relations.size(); ++k)
      REQUIRE(again[i].facts.relations[k].hierarchy_path ==
              data[i].facts.relations[k].hierarchy_path);
  }
  std::remove(tmp.c_str());
}

TEST_CASE("seeded split is deterministic, disjoint, and 70/10/20 sized") {
  auto data = load_dataset(fixture("toy.jsonl"));
  auto sp = split_dataset(data, 42);
  REQUIRE(sp.train.size() == 14);
  REQUIRE(sp.valid.size() == 2);
  REQUIRE(sp.test.size() == 4);
  auto sp2 = split_dataset(data, 42);
  for (size_t i = 0; i < sp.train.size(); ++i)
    REQUIRE(sp.train[i].question == sp2.train[i].question);
  auto sp3 = split_dataset(data, 7);
  bool same = true;
  for (size_t i = 0; i < sp.train.size() && same; ++i)
    same = sp.train[i].question == sp3.train[i].question;
  REQUIRE_FALSE(same);
}

TEST_CASE("detokenize attaches punctuation and drops EOS") {
  REQUIRE(detokenize({"where", "was", "alice", "born", "?", Vocab::kEosTok}) ==
          "where was alice born?");
  REQUIRE(detokenize({"lebron", "'s", "school"}) == "lebron's school");
  // tokenize(detokenize(t)) == t for punctuation-bearing questions
  std::vector<std::string> q = {"who", "is", "the", "spouse", "of", "alice_smith", "?"};
  REQUIRE(tokenize(detokenize(q)) == q);
}
