#pragma once

// Sequence-level rewards for reinforcement fine-tuning: DPTS (normalized
// subset-tree kernel over dependency parses) plus BLEU, ROUGE-L and QSS
// alternatives behind one interface.

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ktg/data.hpp"
#include "ktg/metrics.hpp"

namespace ktg {

struct ParserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DepNode {
  std::string token;
  std::string deprel;
  int parent = -1;  // -1 for the root
};

struct DepTree {
  std::vector<DepNode> nodes;  // sentence order
  int root = 0;

  void validate() const {
    if (nodes.empty()) throw ParserError("dependency tree has no nodes");
    int roots = 0;
    for (size_t i = 0; i < nodes.size(); ++i) {
      int p = nodes[i].parent;
      if (p == -1) ++roots;
      else if (p < 0 || p >= int(nodes.size())) throw ParserError("parent index out of range");
    }
    if (roots != 1) throw ParserError("dependency tree must have exactly one root");
    if (nodes[size_t(root)].parent != -1) throw ParserError("root index mismatch");
    // acyclicity: every node must reach the root
    for (size_t i = 0; i < nodes.size(); ++i) {
      int cur = int(i), hops = 0;
      while (nodes[size_t(cur)].parent != -1) {
        cur = nodes[size_t(cur)].parent;
        if (++hops > int(nodes.size())) throw ParserError("cycle in parent links");
      }
    }
  }

  std::vector<std::vector<int>> children() const {
    std::vector<std::vector<int>> ch(nodes.size());
    for (size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].parent >= 0) ch[size_t(nodes[i].parent)].push_back(int(i));
    return ch;
  }
};

class DepParser {
 public:
  virtual ~DepParser() = default;
  virtual DepTree parse(const std::vector<std::string>& tokens) const = 0;
};

// Deterministic fallback: each token's parent is its left neighbor, root is
// the first token, all labels "dep".
class ChainParser : public DepParser {
 public:
  DepTree parse(const std::vector<std::string>& tokens) const override {
    if (tokens.empty()) throw ParserError("cannot parse empty sentence");
    DepTree t;
    for (size_t i = 0; i < tokens.size(); ++i)
      t.nodes.push_back({tokens[i], "dep", int(i) - 1});
    t.root = 0;
    return t;
  }
};

// ---- CoNLL-U ------------------------------------------------------------

// Columns ID FORM LEMMA UPOS XPOS FEATS HEAD DEPREL DEPS MISC; unused ones
// dash-filled with "_". HEAD is 1-based, 0 = root.
inline std::string to_conllu(const DepTree& t) {
  std::ostringstream out;
  for (size_t i = 0; i < t.nodes.size(); ++i) {
    const auto& n = t.nodes[i];
    out << (i + 1) << '\t' << n.token << "\t_\t_\t_\t_\t" << (n.parent + 1) << '\t'
        << n.deprel << "\t_\t_\n";
  }
  return out.str();
}

inline DepTree from_conllu(const std::string& block) {
  DepTree t;
  std::istringstream in(block);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::istringstream ls(line);
    std::string col;
    while (std::getline(ls, col, '\t')) cols.push_back(col);
    if (cols.size() < 8) throw ParserError("conllu line needs >= 8 columns: " + line);
    DepNode n;
    n.token = cols[1];
    n.parent = std::stoi(cols[6]) - 1;
    n.deprel = cols[7];
    t.nodes.push_back(n);
  }
  for (size_t i = 0; i < t.nodes.size(); ++i)
    if (t.nodes[i].parent == -1) t.root = int(i);
  t.validate();
  return t;
}

// Pre-parsed trees keyed by the space-joined sentence; stand-in for an
// external pretrained parser.
class ConlluFileParser : public DepParser {
 public:
  explicit ConlluFileParser(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParserError("cannot open conllu file: " + path);
    std::string line, block;
    auto flush = [&] {
      if (block.empty()) return;
      DepTree t = from_conllu(block);
      std::string key;
      for (size_t i = 0; i < t.nodes.size(); ++i) key += (i ? " " : "") + t.nodes[i].token;
      trees_[key] = t;
      block.clear();
    };
    while (std::getline(in, line)) {
      if (line.empty())
        flush();
      else
        block += line + "\n";
    }
    flush();
  }

  DepTree parse(const std::vector<std::string>& tokens) const override {
    std::string key;
    for (size_t i = 0; i < tokens.size(); ++i) key += (i ? " " : "") + tokens[i];
    auto it = trees_.find(key);
    if (it == trees_.end()) throw ParserError("no parse recorded for: " + key);
    return it->second;
  }

 private:
  std::map<std::string, DepTree> trees_;
};

// ---- subset-tree kernel -------------------------------------------------

// Collins-Duffy subset-tree kernel adapted to dependency productions. A
// production is the node's label (optionally lexicalized with the word form)
// plus the ordered labels of its children. Delta(n1, n2) = 0 on differing
// productions, lambda for matching leaves, lambda * prod_k (1 + Delta(child_k))
// for matching internal productions. K = sum over node pairs of Delta.
inline double tree_kernel(const DepTree& t1, const DepTree& t2, double lambda,
                          bool lexicalized = false) {
  if (lambda <= 0.0 || lambda > 1.0) throw std::runtime_error("tree_kernel: lambda in (0,1]");
  t1.validate();
  t2.validate();
  auto ch1 = t1.children(), ch2 = t2.children();
  auto node_key = [&](const DepTree& t, const std::vector<std::vector<int>>& ch, int i) {
    std::string key = t.nodes[size_t(i)].deprel;
    if (lexicalized) key += "|" + t.nodes[size_t(i)].token;
    key += "->";
    for (int c : ch[size_t(i)]) {
      key += t.nodes[size_t(c)].deprel;
      if (lexicalized) key += "|" + t.nodes[size_t(c)].token;
      key += ",";
    }
    return key;
  };
  size_t n2 = t2.nodes.size();
  std::vector<double> memo(t1.nodes.size() * n2, -1.0);
  auto delta = [&](auto&& self, int a, int b) -> double {
    double& m = memo[size_t(a) * n2 + size_t(b)];
    if (m >= 0.0) return m;
    if (node_key(t1, ch1, a) != node_key(t2, ch2, b)) return m = 0.0;
    if (ch1[size_t(a)].empty()) return m = lambda;
    double prod = 1.0;
    for (size_t k = 0; k < ch1[size_t(a)].size(); ++k)
      prod *= 1.0 + self(self, ch1[size_t(a)][k], ch2[size_t(b)][k]);
    return m = lambda * prod;
  };
  double sum = 0.0;
  for (int a = 0; a < int(t1.nodes.size()); ++a)
    for (int b = 0; b < int(t2.nodes.size()); ++b) sum += delta(delta, a, b);
  return sum;
}

// ---- rewards ------------------------------------------------------------

enum class RewardKind { Dpts, Bleu, RougeL, Qss };

inline RewardKind reward_kind_from_string(const std::string& s) {
  if (s == "dpts") return RewardKind::Dpts;
  if (s == "bleu") return RewardKind::Bleu;
  if (s == "rouge_l") return RewardKind::RougeL;
  if (s == "qss") return RewardKind::Qss;
  throw std::runtime_error("unknown reward kind: " + s);
}

struct RewardSpec {
  RewardKind kind = RewardKind::Dpts;
  double lambda = 0.5;  // kernel decay, in (0,1]
  bool lexicalized = false;
  const DepParser* parser = nullptr;  // defaults to the chain parser

  const DepParser& effective_parser() const {
    static const ChainParser chain;
    return parser ? *parser : chain;
  }
};

// Normalized kernel similarity K(T1,T2) / sqrt(K(T1,T1) K(T2,T2)); 0 when
// either self-kernel vanishes.
inline double dpts(const std::vector<std::string>& q1, const std::vector<std::string>& q2,
                   const RewardSpec& spec = {}) {
  if (q1.empty() || q2.empty()) throw std::runtime_error("dpts: empty sentence");
  const DepParser& parser = spec.effective_parser();
  DepTree t1 = parser.parse(q1);
  DepTree t2 = parser.parse(q2);
  double k11 = tree_kernel(t1, t1, spec.lambda, spec.lexicalized);
  double k22 = tree_kernel(t2, t2, spec.lambda, spec.lexicalized);
  if (k11 <= 0.0 || k22 <= 0.0) return 0.0;
  double k12 = tree_kernel(t1, t2, spec.lambda, spec.lexicalized);
  double v = k12 / std::sqrt(k11 * k22);
  return std::min(1.0, std::max(0.0, v));
}

// QSS: distinct n-grams (n = 1..4) shared between hyp and source over
// distinct n-grams in hyp.
inline double qss(const std::vector<std::string>& hyp, const std::vector<std::string>& source) {
  std::set<std::vector<std::string>> hyp_grams, src_grams;
  for (int n = 1; n <= 4; ++n) {
    for (size_t i = 0; i + n <= hyp.size(); ++i)
      hyp_grams.insert({hyp.begin() + long(i), hyp.begin() + long(i + n)});
    for (size_t i = 0; i + n <= source.size(); ++i)
      src_grams.insert({source.begin() + long(i), source.begin() + long(i + n)});
  }
  if (hyp_grams.empty()) return 0.0;
  size_t common = 0;
  for (const auto& gram : hyp_grams)
    if (src_grams.count(gram)) ++common;
  return double(common) / double(hyp_grams.size());
}

// r(Y): dispatch to the configured reward; all kinds lie in [0,1].
inline double reward(const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
                     const std::vector<std::string>& source, const RewardSpec& spec) {
  if (hyp.empty() || ref.empty()) throw std::runtime_error("reward: empty sequence");
  switch (spec.kind) {
    case RewardKind::Dpts: return dpts(hyp, ref, spec);
    case RewardKind::Bleu: return bleu_sentence(hyp, ref);
    case RewardKind::RougeL: return rouge_l(hyp, ref);
    case RewardKind::Qss: return qss(hyp, source);
  }
  throw std::runtime_error("reward: unknown kind");
}

}  // namespace ktg
