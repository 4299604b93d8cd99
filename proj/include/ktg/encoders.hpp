#pragma once

// Knowledge-augmented encoders: entity encoder (label embedding + BiLSTM over
// description/domain), global relation encoder (trie-shared Tree-LSTM over
// hierarchy paths), and the fact-path BiLSTM.

#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ktg/autodiff.hpp"
#include "ktg/data.hpp"

namespace ktg {

using ad::Graph;
using ad::Param;
using ad::ParamStore;
using ad::Var;

struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inverted-scale dropout on recurrent inputs; inactive unless enabled.
struct Dropout {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
  bool enabled = false;

  Var apply(Graph& g, Var x) const {
    if (!enabled || rate <= 0.0 || rng == nullptr) return x;
    std::bernoulli_distribution keep(1.0 - rate);
    std::vector<double> mask(size_t(x.size()));
    for (auto& m : mask) m = keep(*rng) ? 1.0 / (1.0 - rate) : 0.0;
    return ad::cmul_const(x, mask);
  }
};

// ---- LSTM cell ----------------------------------------------------------

struct LstmCellParams {
  Param *Wi, *Wf, *Wo, *Wu;
  Param *bi, *bf, *bo, *bu;
  int in_dim = 0, hidden = 0;

  static LstmCellParams create(ParamStore& ps, const std::string& name, int in_dim,
                               int hidden) {
    LstmCellParams p;
    p.in_dim = in_dim;
    p.hidden = hidden;
    p.Wi = &ps.add(name + ".Wi", hidden, in_dim + hidden);
    p.Wf = &ps.add(name + ".Wf", hidden, in_dim + hidden);
    p.Wo = &ps.add(name + ".Wo", hidden, in_dim + hidden);
    p.Wu = &ps.add(name + ".Wu", hidden, in_dim + hidden);
    p.bi = &ps.add(name + ".bi", hidden);
    p.bf = &ps.add(name + ".bf", hidden);
    p.bo = &ps.add(name + ".bo", hidden);
    p.bu = &ps.add(name + ".bu", hidden);
    return p;
  }
};

struct LstmState {
  Var h, c;
};

inline LstmState lstm_initial(Graph& g, int hidden) {
  return {ad::zeros(g, hidden), ad::zeros(g, hidden)};
}

inline LstmState lstm_step(Graph& g, const LstmCellParams& p, Var x, const LstmState& prev) {
  Var xh = ad::concat({x, prev.h});
  Var i = ad::sigmoid(ad::affine(ad::leaf(g, *p.Wi), xh, ad::leaf(g, *p.bi)));
  Var f = ad::sigmoid(ad::affine(ad::leaf(g, *p.Wf), xh, ad::leaf(g, *p.bf)));
  Var o = ad::sigmoid(ad::affine(ad::leaf(g, *p.Wo), xh, ad::leaf(g, *p.bo)));
  Var u = ad::vtanh(ad::affine(ad::leaf(g, *p.Wu), xh, ad::leaf(g, *p.bu)));
  Var c = ad::add(ad::cmul(f, prev.c), ad::cmul(i, u));
  Var h = ad::cmul(o, ad::vtanh(c));
  return {h, c};
}

// ---- two-layer bidirectional LSTM ---------------------------------------

struct BiLstmParams {
  LstmCellParams fwd1, bwd1, fwd2, bwd2;
  int in_dim = 0, hidden = 0;

  static BiLstmParams create(ParamStore& ps, const std::string& name, int in_dim,
                             int hidden) {
    BiLstmParams p;
    p.in_dim = in_dim;
    p.hidden = hidden;
    p.fwd1 = LstmCellParams::create(ps, name + ".l1.fwd", in_dim, hidden);
    p.bwd1 = LstmCellParams::create(ps, name + ".l1.bwd", in_dim, hidden);
    p.fwd2 = LstmCellParams::create(ps, name + ".l2.fwd", 2 * hidden, hidden);
    p.bwd2 = LstmCellParams::create(ps, name + ".l2.bwd", 2 * hidden, hidden);
    return p;
  }
};

struct BiLstmOutput {
  std::vector<Var> states;  // one 2H vector per position (top layer)
  Var final_state;          // [fwd final ; bwd final] of the top layer, 2H
};

inline BiLstmOutput run_bilstm(Graph& g, const BiLstmParams& p, const std::vector<Var>& inputs,
                               const Dropout& drop = {}) {
  if (inputs.empty()) throw std::runtime_error("run_bilstm: empty input");
  size_t T = inputs.size();
  auto run_layer = [&](const LstmCellParams& fwd, const LstmCellParams& bwd,
                       const std::vector<Var>& xs) {
    std::vector<Var> hf(T), hb(T);
    LstmState sf = lstm_initial(g, p.hidden);
    for (size_t t = 0; t < T; ++t) {
      sf = lstm_step(g, fwd, drop.apply(g, xs[t]), sf);
      hf[t] = sf.h;
    }
    LstmState sb = lstm_initial(g, p.hidden);
    for (size_t t = T; t-- > 0;) {
      sb = lstm_step(g, bwd, drop.apply(g, xs[t]), sb);
      hb[t] = sb.h;
    }
    std::vector<Var> out(T);
    for (size_t t = 0; t < T; ++t) out[t] = ad::concat({hf[t], hb[t]});
    return std::tuple{out, hf[T - 1], hb[0]};
  };
  auto [l1, f1, b1] = run_layer(p.fwd1, p.bwd1, inputs);
  auto [l2, f2, b2] = run_layer(p.fwd2, p.bwd2, l1);
  BiLstmOutput out;
  out.states = l2;
  out.final_state = ad::concat({f2, b2});
  return out;
}

// ---- parameter bundle ---------------------------------------------------

struct EncoderParams {
  Param* word_emb = nullptr;  // |V| x d
  Param* kb_emb = nullptr;    // k x d (E_f)
  BiLstmParams desc_bilstm;
  BiLstmParams domain_bilstm;
  Param *ent_proj = nullptr, *ent_proj_b = nullptr;  // d x 5d
  // Tree-LSTM, arity N
  int tree_arity = 1;
  Param *tWi, *tWf, *tWo, *tWu;
  Param *tbi, *tbf, *tbo, *tbu;
  std::vector<Param*> tUi, tUo, tUu;        // per child slot l
  std::vector<std::vector<Param*>> tUf;     // [k][l]
  Param *rel_proj = nullptr, *rel_proj_b = nullptr;  // d x d
  BiLstmParams fact_bilstm;
  int dim = 0;

  static EncoderParams create(ParamStore& ps, int word_vocab, int kb_vocab, int d,
                              int tree_arity = 1) {
    EncoderParams e;
    e.dim = d;
    e.tree_arity = tree_arity;
    e.word_emb = &ps.add("enc.word_emb", word_vocab, d);
    e.kb_emb = &ps.add("enc.kb_emb", kb_vocab, d);
    e.desc_bilstm = BiLstmParams::create(ps, "enc.desc", d, d);
    e.domain_bilstm = BiLstmParams::create(ps, "enc.domain", d, d);
    e.ent_proj = &ps.add("enc.ent_proj", d, 5 * d);
    e.ent_proj_b = &ps.add("enc.ent_proj_b", d);
    e.tWi = &ps.add("enc.tree.Wi", d, d);
    e.tWf = &ps.add("enc.tree.Wf", d, d);
    e.tWo = &ps.add("enc.tree.Wo", d, d);
    e.tWu = &ps.add("enc.tree.Wu", d, d);
    e.tbi = &ps.add("enc.tree.bi", d);
    e.tbf = &ps.add("enc.tree.bf", d);
    e.tbo = &ps.add("enc.tree.bo", d);
    e.tbu = &ps.add("enc.tree.bu", d);
    for (int l = 0; l < tree_arity; ++l) {
      e.tUi.push_back(&ps.add("enc.tree.Ui." + std::to_string(l), d, d));
      e.tUo.push_back(&ps.add("enc.tree.Uo." + std::to_string(l), d, d));
      e.tUu.push_back(&ps.add("enc.tree.Uu." + std::to_string(l), d, d));
    }
    for (int k = 0; k < tree_arity; ++k) {
      e.tUf.emplace_back();
      for (int l = 0; l < tree_arity; ++l)
        e.tUf.back().push_back(
            &ps.add("enc.tree.Uf." + std::to_string(k) + "." + std::to_string(l), d, d));
    }
    e.rel_proj = &ps.add("enc.rel_proj", d, d);
    e.rel_proj_b = &ps.add("enc.rel_proj_b", d);
    e.fact_bilstm = BiLstmParams::create(ps, "enc.fact", d, d);
    return e;
  }
};

// ---- token sequence encoder ---------------------------------------------

inline std::vector<Var> embed_tokens(Graph& g, const std::vector<std::string>& tokens,
                                     const Vocab& vocab, Param& table) {
  std::vector<std::string> toks = tokens;
  if (toks.empty()) toks.push_back(Vocab::kEmptyTok);
  std::vector<Var> out;
  for (const auto& t : toks) out.push_back(ad::leaf_row(g, table, vocab.encode(t)));
  return out;
}

// Concatenation of the final forward and final backward hidden states of the
// top BiLSTM layer; 2d wide.
inline Var encode_token_sequence(Graph& g, const std::vector<std::string>& tokens,
                                 const Vocab& vocab, Param& emb, const BiLstmParams& p,
                                 const Dropout& drop = {}) {
  auto inputs = embed_tokens(g, tokens, vocab, emb);
  return run_bilstm(g, p, inputs, drop).final_state;
}

// ---- entity encoder -----------------------------------------------------

struct EntityEmbedding {
  Var label_part;        // d
  Var description_part;  // 2d
  Var domain_part;       // 2d
  Var combined;          // d, projection of [l; x; o]
};

inline EntityEmbedding encode_entity(Graph& g, const Entity& entity, const Vocab& word_vocab,
                                     const Vocab& kb_vocab, const EncoderParams& p,
                                     const Dropout& drop = {}) {
  EntityEmbedding out;
  out.label_part = ad::leaf_row(g, *p.kb_emb, kb_vocab.encode(entity.label));
  out.description_part =
      encode_token_sequence(g, entity.description, word_vocab, *p.word_emb, p.desc_bilstm, drop);
  out.domain_part =
      encode_token_sequence(g, entity.domain, word_vocab, *p.word_emb, p.domain_bilstm, drop);
  Var cat = ad::concat({out.label_part, out.description_part, out.domain_part});
  out.combined = ad::affine(ad::leaf(g, *p.ent_proj), cat, ad::leaf(g, *p.ent_proj_b));
  return out;
}

// ---- N-ary Tree-LSTM node -----------------------------------------------

// One Tree-LSTM unit: input embedding plus up to N child (h, c) pairs, with a
// position-specific forget gate per child.
inline LstmState tree_lstm_node(Graph& g, const EncoderParams& p, Var input,
                                std::vector<LstmState> children) {
  int N = p.tree_arity;
  if (int(children.size()) > N)
    throw CapacityError("tree_lstm_node: " + std::to_string(children.size()) +
                        " children exceed arity " + std::to_string(N));
  while (int(children.size()) < N) children.push_back(lstm_initial(g, p.dim));

  auto gate_pre = [&](Param* W, const std::vector<Param*>& U, Param* b) {
    Var acc = ad::affine(ad::leaf(g, *W), input, ad::leaf(g, *b));
    for (int l = 0; l < N; ++l)
      acc = ad::add(acc, ad::matvec(ad::leaf(g, *U[size_t(l)]), children[size_t(l)].h));
    return acc;
  };
  Var i = ad::sigmoid(gate_pre(p.tWi, p.tUi, p.tbi));
  Var o = ad::sigmoid(gate_pre(p.tWo, p.tUo, p.tbo));
  Var u = ad::vtanh(gate_pre(p.tWu, p.tUu, p.tbu));
  Var c = ad::cmul(i, u);
  for (int k = 0; k < N; ++k) {
    Var acc = ad::affine(ad::leaf(g, *p.tWf), input, ad::leaf(g, *p.tbf));
    for (int l = 0; l < N; ++l)
      acc = ad::add(acc, ad::matvec(ad::leaf(g, *p.tUf[size_t(k)][size_t(l)]),
                                    children[size_t(l)].h));
    Var fk = ad::sigmoid(acc);
    c = ad::add(c, ad::cmul(fk, children[size_t(k)].c));
  }
  Var h = ad::cmul(o, ad::vtanh(c));
  return {h, c};
}

// ---- global relation encoder --------------------------------------------

struct RelationEncoding {
  std::map<std::string, Var> by_id;  // projected embedding per relation id
  size_t node_evals = 0;             // distinct trie nodes evaluated
};

// Builds a trie over all hierarchy paths and evaluates one Tree-LSTM unit per
// trie node root-to-leaf; each node's single child state is its trie parent's
// (h, c). Shared prefixes are computed exactly once.
inline RelationEncoding encode_relation_hierarchy(Graph& g,
                                                  const std::vector<Relation>& relations,
                                                  const Vocab& word_vocab,
                                                  const EncoderParams& p,
                                                  const Dropout& drop = {}) {
  struct TrieNode {
    std::string segment;
    std::map<std::string, std::unique_ptr<TrieNode>> children;
    LstmState state;
    bool evaluated = false;
  };
  TrieNode root;
  root.segment = "root";

  for (const auto& r : relations) {
    if (r.hierarchy_path.empty() || r.hierarchy_path.front() != "root")
      throw ValidationError("hierarchy path must start at root: " + r.id);
    TrieNode* cur = &root;
    for (size_t k = 1; k < r.hierarchy_path.size(); ++k) {
      auto& slot = cur->children[r.hierarchy_path[k]];
      if (!slot) {
        slot = std::make_unique<TrieNode>();
        slot->segment = r.hierarchy_path[k];
      }
      cur = slot.get();
    }
  }

  RelationEncoding out;
  // preorder: parent state feeds each child as its sole Tree-LSTM child
  auto evaluate = [&](auto&& self, TrieNode& node, TrieNode* parent) -> void {
    Var seg = drop.apply(
        g, ad::leaf_row(g, *p.word_emb, word_vocab.encode(node.segment)));
    std::vector<LstmState> kids;
    if (parent) kids.push_back(parent->state);
    node.state = tree_lstm_node(g, p, seg, kids);
    node.evaluated = true;
    ++out.node_evals;
    for (auto& [_, child] : node.children) self(self, *child, &node);
  };
  evaluate(evaluate, root, nullptr);

  for (const auto& r : relations) {
    if (out.by_id.count(r.id)) continue;
    TrieNode* cur = &root;
    for (size_t k = 1; k < r.hierarchy_path.size(); ++k)
      cur = cur->children.at(r.hierarchy_path[k]).get();
    Var proj =
        ad::affine(ad::leaf(g, *p.rel_proj), cur->state.h, ad::leaf(g, *p.rel_proj_b));
    out.by_id.emplace(r.id, proj);
  }
  return out;
}

// ---- fact encoder -------------------------------------------------------

struct FactEncoding {
  std::vector<Var> entity_reps;    // n vectors, 2d each
  std::vector<Var> relation_reps;  // n-1 vectors, 2d each
  Var fact_vector;                 // F, 2d
};

inline FactEncoding encode_fact_path(Graph& g, const FactPath& facts,
                                     const std::vector<Var>& entity_embeddings,
                                     const std::map<std::string, Var>& relation_embeddings,
                                     const EncoderParams& p, const Dropout& drop = {}) {
  auto elems = linearize_path(facts);
  std::vector<Var> inputs;
  for (const auto& el : elems) {
    if (el.is_entity)
      inputs.push_back(entity_embeddings[size_t(el.index)]);
    else
      inputs.push_back(relation_embeddings.at(facts.relations[size_t(el.index)].id));
  }
  auto run = run_bilstm(g, p.fact_bilstm, inputs, drop);
  FactEncoding out;
  for (size_t k = 0; k < elems.size(); ++k) {
    if (elems[k].is_entity)
      out.entity_reps.push_back(run.states[k]);
    else
      out.relation_reps.push_back(run.states[k]);
  }
  out.fact_vector = run.final_state;
  return out;
}

}  // namespace ktg
