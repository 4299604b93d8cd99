#pragma once

// Full encoder-decoder model over a fact path: builds the knowledge-augmented
// encoding of an example, teacher-forces a gold question, and decodes greedily
// or by sampling.

#include <map>
#include <random>
#include <string>
#include <vector>

#include "ktg/autodiff.hpp"
#include "ktg/data.hpp"
#include "ktg/decoder.hpp"
#include "ktg/encoders.hpp"

namespace ktg {

struct ModelConfig {
  int dim = 300;       // embedding and hidden size
  int tree_arity = 1;  // Tree-LSTM branching factor
  uint64_t init_seed = 1;
  double init_range = 0.08;
};

// KB vocabulary: one entry per entity label (plus UNK row 0).
inline Vocab build_kb_vocab(const std::vector<QAExample>& examples) {
  Vocab v;
  v.to_token = {Vocab::kUnkTok};
  for (const auto& ex : examples)
    for (const auto& e : ex.facts.entities)
      if (!v.to_index.count(e.label) && e.label != Vocab::kUnkTok) {
        v.to_index[e.label] = int(v.to_token.size());
        v.to_token.push_back(e.label);
      }
  v.to_index[Vocab::kUnkTok] = 0;
  return v;
}

struct Model {
  ModelConfig cfg;
  Vocab vocab;
  Vocab kb_vocab;
  ParamStore store;
  EncoderParams enc;
  DecoderParams dec;

  Model(ModelConfig c, Vocab word_vocab, Vocab kb)
      : cfg(c), vocab(std::move(word_vocab)), kb_vocab(std::move(kb)) {
    enc = EncoderParams::create(store, vocab.size(), kb_vocab.size(), cfg.dim, cfg.tree_arity);
    dec = DecoderParams::create(store, vocab.size(), cfg.dim);
  }

  void init_params() {
    std::mt19937_64 rng(cfg.init_seed);
    store.init_uniform(-cfg.init_range, cfg.init_range, rng);
  }

  // KB vocab UNK row for unknown labels; word vocab handles OOV tokens itself
  static Model from_examples(ModelConfig c, const std::vector<QAExample>& examples,
                             long min_freq = 1) {
    Model m(c, build_vocab(examples, min_freq), build_kb_vocab(examples));
    m.init_params();
    return m;
  }
};

// Relation source token for copying: surface joined with underscores.
inline std::string relation_source_token(const Relation& r) {
  std::string out;
  for (size_t k = 0; k < r.surface.size(); ++k) out += (k ? "_" : "") + r.surface[k];
  return out.empty() ? r.id : out;
}

struct ExampleEncoding {
  FactEncoding facts;
  Var answer_embedding;  // combined embedding of e_n, width d
  ExtendedVocab ext;
  std::vector<int> entity_source_ids;    // ext ids aligned with entity_reps
  std::vector<int> relation_source_ids;  // ext ids aligned with relation_reps
  size_t relation_node_evals = 0;

  explicit ExampleEncoding(const Vocab& v) : ext(v) {}
};

inline ExampleEncoding encode_example(Graph& g, const Model& m, const QAExample& ex,
                                      const Dropout& drop = {}) {
  ExampleEncoding out(m.vocab);
  std::vector<Var> entity_embs;
  for (const auto& e : ex.facts.entities) {
    auto emb = encode_entity(g, e, m.vocab, m.kb_vocab, m.enc, drop);
    entity_embs.push_back(emb.combined);
    out.entity_source_ids.push_back(out.ext.add_source(e.label));
  }
  auto rel = encode_relation_hierarchy(g, ex.facts.relations, m.vocab, m.enc, drop);
  out.relation_node_evals = rel.node_evals;
  for (const auto& r : ex.facts.relations)
    out.relation_source_ids.push_back(out.ext.add_source(relation_source_token(r)));
  out.facts = encode_fact_path(g, ex.facts, entity_embs, rel.by_id, m.enc, drop);
  out.answer_embedding =
      encode_entity(g, ex.facts.answer(), m.vocab, m.kb_vocab, m.enc, drop).combined;
  return out;
}

namespace detail {

inline std::vector<double> interrogative_mask(const Vocab& v) {
  std::vector<double> mask(size_t(v.size()), 0.0);
  for (int idx : v.interrogative_indices()) mask[size_t(idx)] = 1.0;
  return mask;
}

struct StepOutput {
  Var dist;           // distribution the token is drawn from (extended size)
  Var type_probs;     // valid for steps >= 2
  bool has_types = false;
  TypedStepDistribution record;
};

// One decoder step given the new state s_t. Step 1 renormalizes P_V over the
// interrogative lexicon; later steps build the type-conditioned mixture.
inline StepOutput decoder_step(Graph& g, const Model& m, const ExampleEncoding& enc, Var s,
                               bool first_step) {
  StepOutput out;
  const DecoderParams& dp = m.dec;
  auto att_e = attend(g, s, enc.facts.entity_reps, *dp.W_alpha_e);
  auto att_r = attend(g, s, enc.facts.relation_reps, *dp.W_alpha_r);
  auto fus = gate_fuse(g, s, att_e.context, att_r.context, *dp.W_g, *dp.W_h);
  Var p_vocab = ad::softmax(ad::affine(ad::leaf(g, *dp.W_V), fus.u, ad::leaf(g, *dp.b_V)));
  int ext_size = enc.ext.size();
  if (first_step) {
    Var restricted = ad::normalize_sum(ad::cmul_const(p_vocab, interrogative_mask(m.vocab)));
    out.dist = ad::pad_to(restricted, ext_size);
    out.record.vocab_gen = out.dist.value();
    out.record.mixture = out.dist.value();
    return out;
  }
  Var p_entity = copy_distribution(att_e.alpha, enc.entity_source_ids, ext_size);
  Var p_relation = copy_distribution(att_r.alpha, enc.relation_source_ids, ext_size);
  Var p_vocab_ext = ad::pad_to(p_vocab, ext_size);
  Var types = type_distribution(g, s, *dp.W_0, *dp.b_0);
  out.dist = mixture_step(types, p_entity, p_relation, p_vocab_ext);
  out.type_probs = types;
  out.has_types = true;
  out.record.has_types = true;
  out.record.type_probs = types.value();
  out.record.entity_copy = p_entity.value();
  out.record.relation_copy = p_relation.value();
  out.record.vocab_gen = p_vocab_ext.value();
  out.record.mixture = out.dist.value();
  return out;
}

inline Var next_input_embedding(Graph& g, const Model& m, const std::string& token) {
  int idx = m.vocab.has(token) ? m.vocab.encode(token) : Vocab::kUnk;
  return ad::leaf_row(g, *m.dec.out_emb, idx);
}

inline LstmState initial_state(Graph& g, const Model& m, const ExampleEncoding& enc) {
  Var h = ad::vtanh(ad::matvec(ad::leaf(g, *m.dec.W_init_h), enc.facts.fact_vector));
  Var c = ad::vtanh(ad::matvec(ad::leaf(g, *m.dec.W_init_c), enc.facts.fact_vector));
  return {h, c};
}

}  // namespace detail

enum class DecodeMode { Greedy, Sample };

struct DecodeResult {
  std::vector<std::string> tokens;  // includes <eos> when emitted
  std::vector<int> ext_ids;
  std::vector<double> step_logprobs;
  std::vector<TypedStepDistribution> steps;
  Var sum_logprob;  // differentiable sum of chosen-token log probabilities

  std::vector<std::string> question() const {
    std::vector<std::string> q = tokens;
    if (!q.empty() && q.back() == Vocab::kEosTok) q.pop_back();
    return q;
  }
};

inline DecodeResult decode(Graph& g, const Model& m, const ExampleEncoding& enc,
                           DecodeMode mode, int max_len, std::mt19937_64* rng = nullptr,
                           const Dropout& drop = {}) {
  if (max_len < 1) throw std::runtime_error("decode: max_len must be >= 1");
  if (mode == DecodeMode::Sample && !rng)
    throw std::runtime_error("decode: sampling requires a seeded generator");
  DecodeResult res;
  LstmState st = detail::initial_state(g, m, enc);
  Var input = enc.answer_embedding;
  for (int t = 1; t <= max_len; ++t) {
    st = lstm_step(g, m.dec.cell, drop.apply(g, input), st);
    auto step = detail::decoder_step(g, m, enc, st.h, t == 1);
    const auto& probs = step.dist.value();
    int chosen;
    if (mode == DecodeMode::Greedy) {
      chosen = 0;
      for (int k = 1; k < int(probs.size()); ++k)
        if (probs[size_t(k)] > probs[size_t(chosen)]) chosen = k;
    } else {
      std::discrete_distribution<int> d(probs.begin(), probs.end());
      chosen = d(*rng);
    }
    Var logp = ad::log_clamped(ad::pick(step.dist, chosen));
    res.sum_logprob = res.sum_logprob.valid() ? ad::add(res.sum_logprob, logp) : logp;
    res.ext_ids.push_back(chosen);
    res.tokens.push_back(enc.ext.token_of(chosen));
    res.step_logprobs.push_back(logp.scalar());
    res.steps.push_back(step.record);
    if (res.tokens.back() == Vocab::kEosTok) break;
    input = detail::next_input_embedding(g, m, res.tokens.back());
  }
  return res;
}

struct TeacherForced {
  ExtendedVocab ext;
  std::vector<Var> mixtures;          // one per step, extended size
  std::vector<Var> type_probs;        // steps >= 2 only (index t-2)
  std::vector<int> gold_ext_ids;      // aligned with mixtures
  std::vector<int> gold_type_index;   // aligned with type_probs; 0=e,1=r,2=o
  std::vector<TypedStepDistribution> steps;

  explicit TeacherForced(const ExtendedVocab& e) : ext(e) {}
};

inline int type_index(WordType t) {
  switch (t) {
    case WordType::Entity: return 0;
    case WordType::Relation: return 1;
    default: return 2;
  }
}

// Run the decoder consuming the gold question (answer embedding first, then
// gold previous tokens); collects per-step mixtures and type distributions.
inline TeacherForced teacher_force(Graph& g, const Model& m, const ExampleEncoding& enc,
                                   const QAExample& ex, const Dropout& drop = {}) {
  if (ex.question.empty()) throw ValidationError("teacher_force: empty question");
  if (ex.question.size() != ex.word_types.size())
    throw ValidationError("teacher_force: question/word_types misaligned");
  TeacherForced out(enc.ext);
  LstmState st = detail::initial_state(g, m, enc);
  Var input = enc.answer_embedding;
  for (size_t t = 0; t < ex.question.size(); ++t) {
    st = lstm_step(g, m.dec.cell, drop.apply(g, input), st);
    auto step = detail::decoder_step(g, m, enc, st.h, t == 0);
    out.mixtures.push_back(step.dist);
    out.gold_ext_ids.push_back(out.ext.id_of(ex.question[t]));
    out.steps.push_back(step.record);
    if (step.has_types) {
      out.type_probs.push_back(step.type_probs);
      out.gold_type_index.push_back(type_index(ex.word_types[t]));
    }
    if (t + 1 < ex.question.size()) input = detail::next_input_embedding(g, m, ex.question[t]);
  }
  return out;
}

}  // namespace ktg
