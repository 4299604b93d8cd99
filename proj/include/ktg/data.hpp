#pragma once

// Corpus data model: fact paths over KB entities/relations, question/answer
// examples, word-type labeling, vocabulary, JSONL ingestion.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace ktg {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Entity {
  std::string id;
  std::string label;                     // single token, underscores allowed
  std::vector<std::string> description;  // may be empty
  std::vector<std::string> domain;       // may be empty
};

struct Relation {
  std::string id;
  std::vector<std::string> surface;
  std::vector<std::string> hierarchy_path;  // most generic first, >= 1 segment
};

struct FactPath {
  std::vector<Entity> entities;    // n >= 2
  std::vector<Relation> relations; // n - 1
  int answer_index = 0;            // always n - 1

  int n() const { return int(entities.size()); }
  const Entity& answer() const { return entities[size_t(answer_index)]; }

  void validate() const {
    if (entities.size() < 2)
      throw ValidationError("fact path needs at least 2 entities");
    if (entities.size() != relations.size() + 1)
      throw ValidationError("fact path: |entities| != |relations| + 1");
    if (answer_index != int(entities.size()) - 1)
      throw ValidationError("fact path: answer must be the terminal entity");
    for (const auto& e : entities)
      if (e.label.empty()) throw ValidationError("entity label must be non-empty");
    for (const auto& r : relations)
      if (r.hierarchy_path.empty())
        throw ValidationError("relation hierarchy needs >= 1 segment");
  }
};

enum class WordType { Interrogative, Entity, Relation, Ordinary };

inline const char* word_type_name(WordType t) {
  switch (t) {
    case WordType::Interrogative: return "interrogative";
    case WordType::Entity: return "entity";
    case WordType::Relation: return "relation";
    case WordType::Ordinary: return "ordinary";
  }
  return "?";
}

struct QAExample {
  FactPath facts;
  std::vector<std::string> question;  // ends with EOS after preprocessing
  std::vector<WordType> word_types;   // aligned with question
};

// ---- tokenization -------------------------------------------------------

inline const std::set<std::string>& default_interrogatives() {
  static const std::set<std::string> lex = {"who",   "what", "when", "where", "which",
                                            "why",   "how",  "whom", "whose"};
  return lex;
}

// Lowercase, separate sentence punctuation and possessive 's into their own
// tokens. Periods, hyphens and underscores inside tokens are preserved.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::string s;
  s.reserve(text.size());
  for (char c : text) s.push_back(char(std::tolower(static_cast<unsigned char>(c))));
  std::string spaced;
  for (size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '?' || c == '!' || c == ',' || c == ';' || c == ':' || c == '(' || c == ')' ||
        c == '"') {
      spaced += ' ';
      spaced += c;
      spaced += ' ';
    } else if (c == '\'' && i + 1 < s.size() && s[i + 1] == 's') {
      spaced += " 's";
      ++i;
    } else {
      spaced += c;
    }
  }
  std::vector<std::string> toks;
  std::istringstream in(spaced);
  std::string t;
  while (in >> t) toks.push_back(t);
  return toks;
}

// ---- word-type labeling -------------------------------------------------

namespace detail {
// True when `span` equals a contiguous subsequence of `surface`.
inline bool contiguous_match(const std::vector<std::string>& question, size_t pos, size_t len,
                             const std::vector<std::string>& surface) {
  if (len == 0 || len > surface.size()) return false;
  for (size_t start = 0; start + len <= surface.size(); ++start) {
    bool ok = true;
    for (size_t k = 0; k < len; ++k)
      if (surface[start + k] != question[pos + k]) {
        ok = false;
        break;
      }
    if (ok) return true;
  }
  return false;
}
}  // namespace detail

// Position 0 is INTERROGATIVE iff in the lexicon; remaining tokens labeled by
// longest contiguous match against entity labels, then relation surfaces
// (entity wins ties), else ORDINARY.
inline std::vector<WordType> label_word_types(const std::vector<std::string>& question,
                                              const FactPath& facts,
                                              const std::set<std::string>& interrogatives =
                                                  default_interrogatives()) {
  if (question.empty()) throw ValidationError("label_word_types: empty question");
  std::vector<std::vector<std::string>> entity_surfaces;
  for (const auto& e : facts.entities) entity_surfaces.push_back(tokenize(e.label));
  std::vector<std::vector<std::string>> relation_surfaces;
  for (const auto& r : facts.relations) relation_surfaces.push_back(r.surface);

  std::vector<WordType> out(question.size(), WordType::Ordinary);
  size_t pos = 0;
  if (interrogatives.count(question[0])) {
    out[0] = WordType::Interrogative;
    pos = 1;
  }
  while (pos < question.size()) {
    size_t best_len = 0;
    WordType best_type = WordType::Ordinary;
    size_t max_len = question.size() - pos;
    for (size_t len = max_len; len >= 1; --len) {
      bool ent = false, rel = false;
      for (const auto& sf : entity_surfaces)
        if (detail::contiguous_match(question, pos, len, sf)) {
          ent = true;
          break;
        }
      if (!ent)
        for (const auto& sf : relation_surfaces)
          if (detail::contiguous_match(question, pos, len, sf)) {
            rel = true;
            break;
          }
      if (ent || rel) {
        best_len = len;
        best_type = ent ? WordType::Entity : WordType::Relation;
        break;
      }
    }
    if (best_len == 0) {
      out[pos] = WordType::Ordinary;
      ++pos;
    } else {
      for (size_t k = 0; k < best_len; ++k) out[pos + k] = best_type;
      pos += best_len;
    }
  }
  return out;
}

// ---- vocabulary ---------------------------------------------------------

struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kEos = 2;
  static constexpr const char* kPadTok = "<pad>";
  static constexpr const char* kUnkTok = "<unk>";
  static constexpr const char* kEosTok = "<eos>";
  static constexpr const char* kEmptyTok = "<empty>";

  std::map<std::string, int> to_index;
  std::vector<std::string> to_token;
  std::set<std::string> interrogatives;

  int size() const { return int(to_token.size()); }
  bool has(const std::string& tok) const { return to_index.count(tok) != 0; }
  int encode(const std::string& tok) const {
    auto it = to_index.find(tok);
    return it == to_index.end() ? kUnk : it->second;
  }
  const std::string& decode(int idx) const {
    if (idx < 0 || idx >= size()) throw std::out_of_range("vocab index");
    return to_token[size_t(idx)];
  }
  int empty_index() const { return encode(kEmptyTok); }

  std::vector<int> interrogative_indices() const {
    std::vector<int> out;
    for (const auto& w : interrogatives)
      if (has(w)) out.push_back(encode(w));
    return out;
  }
};

namespace detail {
inline void count_tokens(const std::vector<std::string>& toks,
                         std::map<std::string, long>& freq) {
  for (const auto& t : toks) ++freq[t];
}
}  // namespace detail

inline Vocab build_vocab(const std::vector<QAExample>& examples, long min_freq = 1,
                         const std::set<std::string>& interrogatives =
                             default_interrogatives()) {
  if (min_freq < 1) throw ValidationError("build_vocab: min_freq must be >= 1");
  if (examples.empty()) throw ValidationError("build_vocab: empty corpus");
  std::map<std::string, long> freq;
  for (const auto& ex : examples) {
    detail::count_tokens(ex.question, freq);
    for (const auto& e : ex.facts.entities) {
      detail::count_tokens(tokenize(e.label), freq);
      detail::count_tokens(e.description, freq);
      detail::count_tokens(e.domain, freq);
    }
    for (const auto& r : ex.facts.relations) {
      detail::count_tokens(r.surface, freq);
      detail::count_tokens(r.hierarchy_path, freq);
    }
  }
  std::set<std::string> keep;
  for (const auto& [tok, f] : freq)
    if (f >= min_freq) keep.insert(tok);
  for (const auto& w : interrogatives) keep.insert(w);
  keep.insert(Vocab::kEmptyTok);
  keep.erase(Vocab::kPadTok);
  keep.erase(Vocab::kUnkTok);
  keep.erase(Vocab::kEosTok);

  std::vector<std::string> ordered(keep.begin(), keep.end());
  std::sort(ordered.begin(), ordered.end(), [&](const std::string& a, const std::string& b) {
    long fa = freq.count(a) ? freq.at(a) : 0;
    long fb = freq.count(b) ? freq.at(b) : 0;
    if (fa != fb) return fa > fb;
    return a < b;
  });

  Vocab v;
  v.interrogatives = interrogatives;
  v.to_token = {Vocab::kPadTok, Vocab::kUnkTok, Vocab::kEosTok};
  for (auto& t : ordered) v.to_token.push_back(t);
  for (int i = 0; i < int(v.to_token.size()); ++i) v.to_index[v.to_token[size_t(i)]] = i;
  return v;
}

// ---- path linearization -------------------------------------------------

struct PathElement {
  bool is_entity = false;
  int index = 0;  // into facts.entities or facts.relations
};

// (e_1, r_1, e_2, ..., r_{n-1}, e_n): entities at even 0-based positions.
inline std::vector<PathElement> linearize_path(const FactPath& facts) {
  facts.validate();
  std::vector<PathElement> out;
  for (int i = 0; i < facts.n(); ++i) {
    out.push_back({true, i});
    if (i + 1 < facts.n()) out.push_back({false, i});
  }
  return out;
}

// ---- JSONL ingestion ----------------------------------------------------

inline QAExample example_from_json(const nlohmann::json& j) {
  QAExample ex;
  for (const auto& je : j.at("entities")) {
    Entity e;
    e.id = je.value("id", "");
    e.label = je.at("label").get<std::string>();
    if (je.contains("description"))
      for (const auto& t : je.at("description")) e.description.push_back(t.get<std::string>());
    if (je.contains("domain"))
      for (const auto& t : je.at("domain")) e.domain.push_back(t.get<std::string>());
    ex.facts.entities.push_back(std::move(e));
  }
  for (const auto& jr : j.at("relations")) {
    Relation r;
    r.id = jr.value("id", "");
    for (const auto& t : jr.at("surface")) r.surface.push_back(t.get<std::string>());
    if (jr.contains("hierarchy"))
      for (const auto& t : jr.at("hierarchy")) r.hierarchy_path.push_back(t.get<std::string>());
    if (r.hierarchy_path.empty()) {
      r.hierarchy_path.push_back("root");
      std::string joined;
      for (size_t k = 0; k < r.surface.size(); ++k)
        joined += (k ? "_" : "") + r.surface[k];
      r.hierarchy_path.push_back(joined.empty() ? r.id : joined);
    }
    ex.facts.relations.push_back(std::move(r));
  }
  ex.facts.answer_index = int(ex.facts.entities.size()) - 1;
  for (const auto& t : j.at("question")) ex.question.push_back(t.get<std::string>());
  ex.facts.validate();
  if (ex.question.empty()) throw ValidationError("question must be non-empty");
  return ex;
}

inline nlohmann::json example_to_json(const QAExample& ex) {
  nlohmann::json j;
  j["entities"] = nlohmann::json::array();
  for (const auto& e : ex.facts.entities)
    j["entities"].push_back({{"id", e.id},
                             {"label", e.label},
                             {"description", e.description},
                             {"domain", e.domain}});
  j["relations"] = nlohmann::json::array();
  for (const auto& r : ex.facts.relations)
    j["relations"].push_back(
        {{"id", r.id}, {"surface", r.surface}, {"hierarchy", r.hierarchy_path}});
  j["question"] = ex.question;
  return j;
}

// Loads a JSONL dataset; computes word-type labels and appends the EOS
// sentinel to every question.
inline std::vector<QAExample> load_dataset(const std::string& path,
                                           const std::set<std::string>& interrogatives =
                                               default_interrogatives()) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file: " + path);
  std::vector<QAExample> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("parse error at line " + std::to_string(lineno) + ": " + e.what());
    }
    try {
      QAExample ex = example_from_json(j);
      ex.word_types = label_word_types(ex.question, ex.facts, interrogatives);
      ex.question.push_back(Vocab::kEosTok);
      ex.word_types.push_back(WordType::Ordinary);
      out.push_back(std::move(ex));
    } catch (const std::exception& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void save_dataset(const std::vector<QAExample>& examples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& ex : examples) {
    QAExample copy = ex;
    if (!copy.question.empty() && copy.question.back() == Vocab::kEosTok)
      copy.question.pop_back();
    out << example_to_json(copy).dump() << "\n";
  }
}

// Seeded 70/10/20 split, order within each part follows the shuffle.
struct DatasetSplit {
  std::vector<QAExample> train, valid, test;
};

inline DatasetSplit split_dataset(const std::vector<QAExample>& examples, uint64_t seed) {
  std::vector<size_t> idx(examples.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  size_t n = examples.size();
  size_t n_train = n * 7 / 10;
  size_t n_valid = n / 10;
  DatasetSplit sp;
  for (size_t i = 0; i < n; ++i) {
    const QAExample& ex = examples[idx[i]];
    if (i < n_train)
      sp.train.push_back(ex);
    else if (i < n_train + n_valid)
      sp.valid.push_back(ex);
    else
      sp.test.push_back(ex);
  }
  return sp;
}

// Join tokens with spaces, attaching sentence punctuation and 's to the
// preceding token.
inline std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (t == Vocab::kEosTok) continue;
    bool attach = t == "?" || t == "!" || t == "," || t == ";" || t == ":" || t == "." ||
                  t == "'s";
    if (!out.empty() && !attach) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace ktg
