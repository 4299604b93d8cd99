#pragma once

// Typed decoder primitives: bilinear attention, gated context fusion, copy
// distributions over an extended vocabulary, word-type distribution and the
// type-conditioned mixture.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ktg/autodiff.hpp"
#include "ktg/data.hpp"
#include "ktg/encoders.hpp"

namespace ktg {

// Vocabulary extended with out-of-vocabulary source tokens, merged by surface
// form at scoring time.
struct ExtendedVocab {
  const Vocab* base = nullptr;
  std::vector<std::string> oov;
  std::map<std::string, int> oov_index;

  explicit ExtendedVocab(const Vocab& v) : base(&v) {}

  int size() const { return base->size() + int(oov.size()); }

  int add_source(const std::string& tok) {
    if (base->has(tok)) return base->encode(tok);
    auto it = oov_index.find(tok);
    if (it != oov_index.end()) return base->size() + it->second;
    oov_index[tok] = int(oov.size());
    oov.push_back(tok);
    return size() - 1;
  }

  // UNK for tokens neither in the vocabulary nor among source tokens
  int id_of(const std::string& tok) const {
    if (base->has(tok)) return base->encode(tok);
    auto it = oov_index.find(tok);
    if (it != oov_index.end()) return base->size() + it->second;
    return Vocab::kUnk;
  }

  const std::string& token_of(int id) const {
    if (id < base->size()) return base->decode(id);
    return oov.at(size_t(id - base->size()));
  }
};

struct DecoderParams {
  LstmCellParams cell;                     // input d, hidden d
  Param *W_alpha_e, *W_alpha_r;            // d x 2d, bilinear attention scoring
  Param* W_g;                              // 2d x 4d, context gate
  Param* W_h;                              // d x 3d, fusion
  Param *W_V, *b_V;                        // |V| x d
  Param *W_0, *b_0;                        // 3 x d, word-type projection
  Param* out_emb;                          // |V| x d, output word embeddings
  Param *W_init_h, *W_init_c;              // d x 2d, decoder state from F
  int dim = 0;

  static DecoderParams create(ParamStore& ps, int vocab_size, int d) {
    DecoderParams p;
    p.dim = d;
    p.cell = LstmCellParams::create(ps, "dec.cell", d, d);
    p.W_alpha_e = &ps.add("dec.W_alpha_e", d, 2 * d);
    p.W_alpha_r = &ps.add("dec.W_alpha_r", d, 2 * d);
    p.W_g = &ps.add("dec.W_g", 2 * d, 4 * d);
    p.W_h = &ps.add("dec.W_h", d, 3 * d);
    p.W_V = &ps.add("dec.W_V", vocab_size, d);
    p.b_V = &ps.add("dec.b_V", vocab_size);
    p.W_0 = &ps.add("dec.W_0", 3, d);
    p.b_0 = &ps.add("dec.b_0", 3);
    p.out_emb = &ps.add("dec.out_emb", vocab_size, d);
    p.W_init_h = &ps.add("dec.W_init_h", d, 2 * d);
    p.W_init_c = &ps.add("dec.W_init_c", d, 2 * d);
    return p;
  }
};

// ---- attention ----------------------------------------------------------

struct Attention {
  Var alpha;    // alignment weights over positions
  Var context;  // sum_i alpha_i h_i
};

// softmax over bilinear scores s^T W_alpha h_i
inline Attention attend(Graph& g, Var s, const std::vector<Var>& reps, Param& W_alpha) {
  if (reps.empty()) throw std::runtime_error("attend: no positions");
  std::vector<Var> scores;
  for (const Var& h : reps) scores.push_back(ad::dot(s, ad::matvec(ad::leaf(g, W_alpha), h)));
  Var alpha = ad::softmax(ad::concat(scores));
  Var ctx = ad::mul_scalar(reps[0], ad::pick(alpha, 0));
  for (size_t i = 1; i < reps.size(); ++i)
    ctx = ad::add(ctx, ad::mul_scalar(reps[i], ad::pick(alpha, int(i))));
  return {alpha, ctx};
}

// ---- gated fusion -------------------------------------------------------

struct Fusion {
  Var gate;     // g_t, elementwise in (0,1)
  Var context;  // c_t = g ⊙ c_e + (1-g) ⊙ c_r
  Var u;        // u_t = tanh(W_h [s; c])
};

inline Fusion gate_fuse(Graph& g, Var s, Var c_e, Var c_r, Param& W_g, Param& W_h) {
  if (c_e.size() != c_r.size()) throw std::runtime_error("gate_fuse: context width mismatch");
  Var gate = ad::sigmoid(ad::matvec(ad::leaf(g, W_g), ad::concat({c_e, c_r})));
  std::vector<double> ones(size_t(gate.size()), 1.0);
  Var inv = ad::sub(ad::constant(g, ones), gate);
  Var ctx = ad::add(ad::cmul(gate, c_e), ad::cmul(inv, c_r));
  Var u = ad::vtanh(ad::matvec(ad::leaf(g, W_h), ad::concat({s, ctx})));
  return {gate, ctx, u};
}

// ---- copy distribution --------------------------------------------------

// P(ω) = Σ_{i: ω_i = ω} α_i, over the extended vocabulary.
inline Var copy_distribution(Var alpha, const std::vector<int>& source_ext_ids, int ext_size) {
  return ad::scatter_sum(alpha, source_ext_ids, ext_size);
}

// Value-level variant keyed by surface form.
inline std::map<std::string, double> copy_distribution(const std::vector<double>& alpha,
                                                       const std::vector<std::string>& tokens) {
  if (alpha.size() != tokens.size())
    throw std::runtime_error("copy_distribution: |alpha| != |tokens|");
  std::map<std::string, double> out;
  for (size_t i = 0; i < alpha.size(); ++i) out[tokens[i]] += alpha[i];
  return out;
}

// ---- type distribution and mixture --------------------------------------

inline Var type_distribution(Graph& g, Var s, Param& W_0, Param& b_0) {
  return ad::softmax(ad::affine(ad::leaf(g, W_0), s, ad::leaf(g, b_0)));
}

// mixture(ω) = Σ_i type_probs[i] · component_i(ω), i over (g_e, g_r, g_o)
inline Var mixture_step(Var type_probs, Var p_entity, Var p_relation, Var p_vocab) {
  if (type_probs.size() != 3) throw std::runtime_error("mixture_step: need 3 type probs");
  Var m = ad::mul_scalar(p_entity, ad::pick(type_probs, 0));
  m = ad::add(m, ad::mul_scalar(p_relation, ad::pick(type_probs, 1)));
  m = ad::add(m, ad::mul_scalar(p_vocab, ad::pick(type_probs, 2)));
  return m;
}

// Plain per-step record kept alongside the graph for inspection and tests.
struct TypedStepDistribution {
  bool has_types = false;             // false at the interrogative step
  std::vector<double> type_probs;     // (g_e, g_r, g_o)
  std::vector<double> entity_copy;    // P_E over extended vocabulary
  std::vector<double> relation_copy;  // P_R
  std::vector<double> vocab_gen;      // P_V (zero-padded to extended size)
  std::vector<double> mixture;        // final P(y_t | ·)
};

}  // namespace ktg
