#pragma once

// Supervised and reinforcement objectives, Adam optimizer, the training loop,
// gradient verification utilities and checkpoint I/O.

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ktg/autodiff.hpp"
#include "ktg/data.hpp"
#include "ktg/model.hpp"
#include "ktg/reward.hpp"

namespace ktg {

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int dim = 300;
  double learning_rate = 2e-5;
  int batch_size = 64;
  double dropout = 0.5;
  double alpha = 1.0;  // weight of L_wl
  double beta = 1.0;   // weight of L_rl
  double tolerance = 1e-6;
  int max_epochs = 50;
  int rl_warmup_epochs = 2;  // supervised-only epochs before SCST kicks in
  int max_decode_len = 30;
  double grad_clip = 5.0;
  double log_eps = 1e-12;
  uint64_t seed = 1;
  double init_range = 0.08;  // uniform parameter initialization half-width
  int tree_arity = 1;
  long min_freq = 1;
  std::string reward = "dpts";
  double reward_lambda = 0.5;
  bool reward_lexicalized = false;

  void validate() const {
    if (learning_rate <= 0) throw ValidationError("learning_rate must be > 0");
    if (alpha < 0 || beta < 0) throw ValidationError("alpha, beta must be >= 0");
    if (tolerance <= 0) throw ValidationError("tolerance must be > 0");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (dropout < 0 || dropout >= 1) throw ValidationError("dropout must be in [0,1)");
    if (init_range <= 0) throw ValidationError("init_range must be > 0");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"dim", c.dim},
       {"learning_rate", c.learning_rate},
       {"batch_size", c.batch_size},
       {"dropout", c.dropout},
       {"alpha", c.alpha},
       {"beta", c.beta},
       {"tolerance", c.tolerance},
       {"max_epochs", c.max_epochs},
       {"rl_warmup_epochs", c.rl_warmup_epochs},
       {"max_decode_len", c.max_decode_len},
       {"grad_clip", c.grad_clip},
       {"seed", c.seed},
       {"init_range", c.init_range},
       {"tree_arity", c.tree_arity},
       {"min_freq", c.min_freq},
       {"reward", c.reward},
       {"reward_lambda", c.reward_lambda},
       {"reward_lexicalized", c.reward_lexicalized}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.dim = j.value("dim", d.dim);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.dropout = j.value("dropout", d.dropout);
  c.alpha = j.value("alpha", d.alpha);
  c.beta = j.value("beta", d.beta);
  c.tolerance = j.value("tolerance", d.tolerance);
  c.max_epochs = j.value("max_epochs", d.max_epochs);
  c.rl_warmup_epochs = j.value("rl_warmup_epochs", d.rl_warmup_epochs);
  c.max_decode_len = j.value("max_decode_len", d.max_decode_len);
  c.grad_clip = j.value("grad_clip", d.grad_clip);
  c.seed = j.value("seed", d.seed);
  c.init_range = j.value("init_range", d.init_range);
  c.tree_arity = j.value("tree_arity", d.tree_arity);
  c.min_freq = j.value("min_freq", d.min_freq);
  c.reward = j.value("reward", d.reward);
  c.reward_lambda = j.value("reward_lambda", d.reward_lambda);
  c.reward_lexicalized = j.value("reward_lexicalized", d.reward_lexicalized);
}

struct LossBreakdown {
  double l_cl = 0, l_wl = 0, l_rl = 0, total = 0;
};

// ---- losses -------------------------------------------------------------

struct SupervisedLossVars {
  Var l_cl, l_wl;
  bool clamped = false;  // some gold probability hit the log clamp
};

// L_cl = sum_t -log P(y_t = gold_t); L_wl over post-interrogative steps.
inline SupervisedLossVars supervised_losses(Graph& g, const TeacherForced& tf,
                                            double log_eps = 1e-12) {
  SupervisedLossVars out;
  std::vector<Var> cl_terms, wl_terms;
  for (size_t t = 0; t < tf.mixtures.size(); ++t)
    cl_terms.push_back(ad::neg(
        ad::log_clamped(ad::pick(tf.mixtures[t], tf.gold_ext_ids[t]), log_eps, &out.clamped)));
  for (size_t t = 0; t < tf.type_probs.size(); ++t)
    wl_terms.push_back(ad::neg(
        ad::log_clamped(ad::pick(tf.type_probs[t], tf.gold_type_index[t]), log_eps,
                        &out.clamped)));
  out.l_cl = ad::vsum(ad::concat(cl_terms));
  out.l_wl = wl_terms.empty() ? ad::zeros(g, 1) : ad::vsum(ad::concat(wl_terms));
  return out;
}

// L_rl = (r(baseline) - r(sample)) * sum_t log P(y_t^s); the reward difference
// is a constant, no gradient flows through it.
inline Var scst_loss(double r_baseline, double r_sample, Var sample_logprob_sum) {
  return ad::scale(sample_logprob_sum, r_baseline - r_sample);
}

inline double scst_loss(double r_baseline, double r_sample, double sample_logprob_sum) {
  return (r_baseline - r_sample) * sample_logprob_sum;
}

// ---- optimizer ----------------------------------------------------------

struct AdamOptimizer {
  double lr;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;

  explicit AdamOptimizer(double learning_rate) : lr(learning_rate) {}

  // grad_scale averages accumulated gradients; clip is a global-norm bound.
  void step(ParamStore& ps, double grad_scale = 1.0, double clip_norm = 0.0) {
    double norm2 = 0;
    for (const auto& p : ps.all())
      for (double gv : p->grad) norm2 += gv * grad_scale * gv * grad_scale;
    double clip_factor = 1.0;
    if (clip_norm > 0.0) {
      double norm = std::sqrt(norm2);
      if (norm > clip_norm) clip_factor = clip_norm / norm;
    }
    ++t;
    double bc1 = 1.0 - std::pow(beta1, double(t));
    double bc2 = 1.0 - std::pow(beta2, double(t));
    for (const auto& p : ps.all()) {
      if (p->adam_m.empty()) {
        p->adam_m.assign(p->value.size(), 0.0);
        p->adam_v.assign(p->value.size(), 0.0);
      }
      for (size_t k = 0; k < p->value.size(); ++k) {
        double gv = p->grad[k] * grad_scale * clip_factor;
        p->adam_m[k] = beta1 * p->adam_m[k] + (1 - beta1) * gv;
        p->adam_v[k] = beta2 * p->adam_v[k] + (1 - beta2) * gv * gv;
        double mhat = p->adam_m[k] / bc1;
        double vhat = p->adam_v[k] / bc2;
        p->value[k] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }
};

// ---- training loop ------------------------------------------------------

struct EpochLog {
  int epoch = 0;
  LossBreakdown train;
  double val_total = 0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  bool converged = false;
};

inline RewardSpec reward_spec_from_config(const TrainConfig& cfg,
                                          const DepParser* parser = nullptr) {
  RewardSpec spec;
  spec.kind = reward_kind_from_string(cfg.reward);
  spec.lambda = cfg.reward_lambda;
  spec.lexicalized = cfg.reward_lexicalized;
  spec.parser = parser;
  return spec;
}

inline std::vector<std::string> source_tokens_for(const QAExample& ex) {
  std::vector<std::string> out;
  for (const auto& el : linearize_path(ex.facts)) {
    if (el.is_entity) {
      const Entity& e = ex.facts.entities[size_t(el.index)];
      out.push_back(e.label);
      for (const auto& t : e.description) out.push_back(t);
      for (const auto& t : e.domain) out.push_back(t);
    } else {
      for (const auto& t : ex.facts.relations[size_t(el.index)].surface) out.push_back(t);
    }
  }
  return out;
}

inline double validation_loss(const Model& m, const std::vector<QAExample>& examples,
                              const TrainConfig& cfg) {
  if (examples.empty()) return 0.0;
  double sum = 0;
  for (const auto& ex : examples) {
    Graph g;
    auto enc = encode_example(g, m, ex);
    auto tf = teacher_force(g, m, enc, ex);
    auto loss = supervised_losses(g, tf, cfg.log_eps);
    sum += loss.l_cl.scalar() + cfg.alpha * loss.l_wl.scalar();
  }
  return sum / double(examples.size());
}

// Teacher-forced argmax accuracy against gold tokens.
inline double token_accuracy(const Model& m, const std::vector<QAExample>& examples) {
  long correct = 0, total = 0;
  for (const auto& ex : examples) {
    Graph g;
    auto enc = encode_example(g, m, ex);
    auto tf = teacher_force(g, m, enc, ex);
    for (size_t t = 0; t < tf.mixtures.size(); ++t) {
      const auto& probs = tf.mixtures[t].value();
      int argmax = 0;
      for (int k = 1; k < int(probs.size()); ++k)
        if (probs[size_t(k)] > probs[size_t(argmax)]) argmax = k;
      if (argmax == tf.gold_ext_ids[t]) ++correct;
      ++total;
    }
  }
  return total == 0 ? 0.0 : double(correct) / double(total);
}

inline void save_checkpoint(const Model& m, const TrainConfig& cfg, const std::string& path);

inline TrainResult train(Model& m, const std::vector<QAExample>& train_set,
                         const std::vector<QAExample>& val_set, const TrainConfig& cfg,
                         const std::string& loss_log_path = "",
                         const DepParser* parser = nullptr,
                         const std::string& diagnostic_checkpoint = "") {
  cfg.validate();
  if (train_set.empty()) throw ValidationError("train: empty training set");
  const std::vector<QAExample>& val = val_set.empty() ? train_set : val_set;
  RewardSpec rspec = reward_spec_from_config(cfg, parser);
  AdamOptimizer opt(cfg.learning_rate);
  std::mt19937_64 rng(cfg.seed);
  Dropout drop{cfg.dropout, &rng, true};

  std::ofstream log;
  if (!loss_log_path.empty()) {
    log.open(loss_log_path);
    log << "epoch,l_cl,l_wl,l_rl,total,val_total\n";
  }

  TrainResult result;
  double prev_val = std::numeric_limits<double>::quiet_NaN();
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    bool rl_active = cfg.beta > 0.0 && epoch > cfg.rl_warmup_epochs;
    LossBreakdown acc;
    size_t i = 0;
    while (i < train_set.size()) {
      size_t batch_end = std::min(train_set.size(), i + size_t(cfg.batch_size));
      m.store.zero_grad();
      size_t batch_n = batch_end - i;
      for (; i < batch_end; ++i) {
        const QAExample& ex = train_set[i];
        Graph g;
        auto enc = encode_example(g, m, ex, drop);
        auto tf = teacher_force(g, m, enc, ex, drop);
        auto sup = supervised_losses(g, tf, cfg.log_eps);
        Var total = ad::add(sup.l_cl, ad::scale(sup.l_wl, cfg.alpha));
        double l_rl = 0;
        if (rl_active) {
          Graph g_greedy;
          auto enc_greedy = encode_example(g_greedy, m, ex);
          auto baseline = decode(g_greedy, m, enc_greedy, DecodeMode::Greedy,
                                 cfg.max_decode_len);
          auto sampled = decode(g, m, enc, DecodeMode::Sample, cfg.max_decode_len, &rng);
          std::vector<std::string> ref = ex.question;
          if (!ref.empty() && ref.back() == Vocab::kEosTok) ref.pop_back();
          auto source = source_tokens_for(ex);
          auto safe_reward = [&](const std::vector<std::string>& hyp) {
            return hyp.empty() ? 0.0 : reward(hyp, ref, source, rspec);
          };
          double r_base = safe_reward(baseline.question());
          double r_samp = safe_reward(sampled.question());
          Var rl = scst_loss(r_base, r_samp, sampled.sum_logprob);
          l_rl = rl.scalar();
          total = ad::add(total, ad::scale(rl, cfg.beta));
        }
        double total_v = total.scalar();
        if (!std::isfinite(total_v)) {
          if (!diagnostic_checkpoint.empty()) save_checkpoint(m, cfg, diagnostic_checkpoint);
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch));
        }
        acc.l_cl += sup.l_cl.scalar();
        acc.l_wl += sup.l_wl.scalar();
        acc.l_rl += l_rl;
        acc.total += total_v;
        g.backward(total);
      }
      opt.step(m.store, 1.0 / double(batch_n), cfg.grad_clip);
    }
    double n = double(train_set.size());
    EpochLog el;
    el.epoch = epoch;
    el.train = {acc.l_cl / n, acc.l_wl / n, acc.l_rl / n, acc.total / n};
    el.val_total = validation_loss(m, val, cfg);
    result.epochs.push_back(el);
    if (log)
      log << epoch << "," << el.train.l_cl << "," << el.train.l_wl << "," << el.train.l_rl
          << "," << el.train.total << "," << el.val_total << "\n";
    if (!std::isnan(prev_val) && std::abs(prev_val - el.val_total) < cfg.tolerance) {
      result.converged = true;
      break;
    }
    prev_val = el.val_total;
  }
  return result;
}

// ---- checkpoint I/O -----------------------------------------------------

inline constexpr const char* kCheckpointFormat = "ktg-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline void save_checkpoint(const Model& m, const TrainConfig& cfg, const std::string& path) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = cfg;
  j["model"] = {{"dim", m.cfg.dim},
                {"tree_arity", m.cfg.tree_arity},
                {"init_seed", m.cfg.init_seed}};
  j["vocab"] = {{"tokens", m.vocab.to_token},
                {"interrogatives",
                 std::vector<std::string>(m.vocab.interrogatives.begin(),
                                          m.vocab.interrogatives.end())}};
  j["kb_vocab"] = m.kb_vocab.to_token;
  nlohmann::json params = nlohmann::json::object();
  for (const auto& p : m.store.all())
    params[p->name] = {{"rows", p->rows}, {"cols", p->cols}, {"value", p->value}};
  j["params"] = std::move(params);
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump();
  }
  std::filesystem::rename(tmp, path);
}

inline Model load_checkpoint(const std::string& path, TrainConfig* out_cfg = nullptr) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("format", "") != kCheckpointFormat)
    throw CheckpointError("not a ktg checkpoint: " + path);
  if (j.value("version", -1) != kCheckpointVersion)
    throw CheckpointError("incompatible checkpoint version " +
                          std::to_string(j.value("version", -1)) + " (code supports " +
                          std::to_string(kCheckpointVersion) + ")");
  TrainConfig cfg = j.at("config").get<TrainConfig>();
  if (out_cfg) *out_cfg = cfg;
  ModelConfig mc;
  mc.dim = j["model"].value("dim", 300);
  mc.tree_arity = j["model"].value("tree_arity", 1);
  mc.init_seed = j["model"].value("init_seed", 1);

  Vocab vocab;
  vocab.to_token = j["vocab"]["tokens"].get<std::vector<std::string>>();
  for (int i = 0; i < int(vocab.to_token.size()); ++i) vocab.to_index[vocab.to_token[size_t(i)]] = i;
  for (const auto& w : j["vocab"]["interrogatives"])
    vocab.interrogatives.insert(w.get<std::string>());
  Vocab kb;
  kb.to_token = j["kb_vocab"].get<std::vector<std::string>>();
  for (int i = 0; i < int(kb.to_token.size()); ++i) kb.to_index[kb.to_token[size_t(i)]] = i;

  Model m(mc, std::move(vocab), std::move(kb));
  for (const auto& p : m.store.all()) {
    if (!j["params"].contains(p->name))
      throw CheckpointError("checkpoint missing parameter " + p->name);
    const auto& jp = j["params"][p->name];
    if (jp.value("rows", -1) != p->rows || jp.value("cols", -1) != p->cols)
      throw CheckpointError("checkpoint shape mismatch for " + p->name);
    p->value = jp["value"].get<std::vector<double>>();
  }
  return m;
}

// ---- gradient verification ----------------------------------------------

enum class GradSubsystem {
  Linear,
  TokenBiLstm,
  TreeLstmNode,
  AttentionFusion,
  MixtureLoss,
  ScstLoss,
  Full,
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
};

// Analytic gradients against central finite differences (step h) for every
// parameter in the store.
inline GradCheckReport finite_diff_check(ParamStore& ps,
                                         const std::function<Var(Graph&)>& build,
                                         double h = 1e-5) {
  GradCheckReport rep;
  std::vector<std::vector<double>> analytic;
  {
    Graph g;
    Var loss = build(g);
    ps.zero_grad();
    g.backward(loss);
    for (const auto& p : ps.all()) analytic.push_back(p->grad);
  }
  auto eval = [&]() {
    Graph g;
    return build(g).scalar();
  };
  size_t pi = 0;
  for (const auto& p : ps.all()) {
    for (size_t k = 0; k < p->value.size(); ++k) {
      double orig = p->value[k];
      p->value[k] = orig + h;
      double lp = eval();
      p->value[k] = orig - h;
      double lm = eval();
      p->value[k] = orig;
      double fd = (lp - lm) / (2 * h);
      double a = analytic[pi][k];
      double denom = std::max({std::abs(a), std::abs(fd), 1e-4});
      double rel = std::abs(a - fd) / denom;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_param = p->name + "[" + std::to_string(k) + "]";
      }
    }
    ++pi;
  }
  return rep;
}

namespace detail {

inline std::vector<double> random_vec(int n, std::mt19937_64& rng, double range = 0.5) {
  std::uniform_real_distribution<double> d(-range, range);
  std::vector<double> v(static_cast<size_t>(n), 0.0);
  for (auto& x : v) x = d(rng);
  return v;
}

inline QAExample tiny_example() {
  QAExample ex;
  Entity e1{"E1", "alice", {"a", "person"}, {"human"}};
  Entity e2{"E2", "paris", {"a", "city"}, {"city"}};
  Relation r{"R1", {"born_in"}, {"root", "people", "born_in"}};
  ex.facts.entities = {e1, e2};
  ex.facts.relations = {r};
  ex.facts.answer_index = 1;
  ex.question = {"where", "was", "alice", "born_in", "?", Vocab::kEosTok};
  ex.word_types = label_word_types(
      {"where", "was", "alice", "born_in", "?"}, ex.facts);
  ex.word_types.push_back(WordType::Ordinary);
  return ex;
}

inline Model tiny_model(int dims, uint64_t seed) {
  ModelConfig mc;
  mc.dim = dims;
  mc.init_seed = seed;
  mc.init_range = 0.4;
  return Model::from_examples(mc, {tiny_example()});
}

}  // namespace detail

inline GradCheckReport gradient_check(GradSubsystem sub, int dims, uint64_t seed) {
  if (dims < 1 || dims > 4) throw std::runtime_error("gradient_check: dims must be in [1,4]");
  std::mt19937_64 rng(seed);
  switch (sub) {
    case GradSubsystem::Linear: {
      ParamStore ps;
      Param& W = ps.add("W", dims, dims + 1);
      Param& b = ps.add("b", dims);
      ps.init_uniform(-0.5, 0.5, rng);
      for (auto& v : b.value) v = 0.1;
      auto x = detail::random_vec(dims + 1, rng);
      return finite_diff_check(ps, [&](Graph& g) {
        Var y = ad::affine(ad::leaf(g, W), ad::constant(g, x), ad::leaf(g, b));
        return ad::dot(y, y);
      });
    }
    case GradSubsystem::TokenBiLstm: {
      ParamStore ps;
      auto bp = BiLstmParams::create(ps, "bilstm", dims, dims);
      ps.init_uniform(-0.5, 0.5, rng);
      std::vector<std::vector<double>> xs;
      for (int t = 0; t < 3; ++t) xs.push_back(detail::random_vec(dims, rng));
      return finite_diff_check(ps, [&](Graph& g) {
        std::vector<Var> inputs;
        for (const auto& x : xs) inputs.push_back(ad::constant(g, x));
        auto out = run_bilstm(g, bp, inputs);
        Var acc = ad::vsum(out.final_state);
        for (const auto& s : out.states) acc = ad::add(acc, ad::vsum(s));
        return acc;
      });
    }
    case GradSubsystem::TreeLstmNode: {
      ParamStore ps;
      auto enc = EncoderParams::create(ps, 4, 4, dims, 2);
      ps.init_uniform(-0.5, 0.5, rng);
      auto x = detail::random_vec(dims, rng);
      auto h1 = detail::random_vec(dims, rng), c1 = detail::random_vec(dims, rng);
      auto h2 = detail::random_vec(dims, rng), c2 = detail::random_vec(dims, rng);
      return finite_diff_check(ps, [&](Graph& g) {
        std::vector<LstmState> kids = {{ad::constant(g, h1), ad::constant(g, c1)},
                                       {ad::constant(g, h2), ad::constant(g, c2)}};
        auto st = tree_lstm_node(g, enc, ad::constant(g, x), kids);
        return ad::add(ad::vsum(st.h), ad::dot(st.c, st.c));
      });
    }
    case GradSubsystem::AttentionFusion: {
      ParamStore ps;
      Param& Wa_e = ps.add("Wa_e", dims, 2 * dims);
      Param& Wa_r = ps.add("Wa_r", dims, 2 * dims);
      Param& Wg = ps.add("Wg", 2 * dims, 4 * dims);
      Param& Wh = ps.add("Wh", dims, 3 * dims);
      ps.init_uniform(-0.5, 0.5, rng);
      auto s = detail::random_vec(dims, rng);
      std::vector<std::vector<double>> ents, rels;
      for (int i = 0; i < 3; ++i) ents.push_back(detail::random_vec(2 * dims, rng));
      for (int i = 0; i < 2; ++i) rels.push_back(detail::random_vec(2 * dims, rng));
      return finite_diff_check(ps, [&](Graph& g) {
        Var sv = ad::constant(g, s);
        std::vector<Var> er, rr;
        for (const auto& v : ents) er.push_back(ad::constant(g, v));
        for (const auto& v : rels) rr.push_back(ad::constant(g, v));
        auto ae = attend(g, sv, er, Wa_e);
        auto ar = attend(g, sv, rr, Wa_r);
        auto fus = gate_fuse(g, sv, ae.context, ar.context, Wg, Wh);
        return ad::add(ad::vsum(fus.u), ad::dot(fus.context, fus.context));
      });
    }
    case GradSubsystem::MixtureLoss: {
      Model m = detail::tiny_model(dims, seed);
      QAExample ex = detail::tiny_example();
      return finite_diff_check(m.store, [&](Graph& g) {
        auto enc = encode_example(g, m, ex);
        auto tf = teacher_force(g, m, enc, ex);
        auto loss = supervised_losses(g, tf);
        return ad::add(loss.l_cl, loss.l_wl);
      });
    }
    case GradSubsystem::ScstLoss: {
      Model m = detail::tiny_model(dims, seed);
      QAExample ex = detail::tiny_example();
      // fixed "sampled" sequence: log-probability recomputed by teacher
      // forcing, scaled by a constant advantage
      QAExample sampled = ex;
      sampled.question = {"where", "alice", "?", Vocab::kEosTok};
      sampled.word_types = {WordType::Interrogative, WordType::Entity, WordType::Ordinary,
                            WordType::Ordinary};
      return finite_diff_check(m.store, [&](Graph& g) {
        auto enc = encode_example(g, m, ex);
        auto tf = teacher_force(g, m, enc, sampled);
        std::vector<Var> logps;
        for (size_t t = 0; t < tf.mixtures.size(); ++t)
          logps.push_back(ad::log_clamped(ad::pick(tf.mixtures[t], tf.gold_ext_ids[t])));
        Var sum_logp = ad::vsum(ad::concat(logps));
        return scst_loss(0.5, 0.8, sum_logp);
      });
    }
    case GradSubsystem::Full: {
      Model m = detail::tiny_model(dims, seed);
      QAExample ex = detail::tiny_example();
      QAExample sampled = ex;
      sampled.question = {"where", "alice", "?", Vocab::kEosTok};
      sampled.word_types = {WordType::Interrogative, WordType::Entity, WordType::Ordinary,
                            WordType::Ordinary};
      return finite_diff_check(m.store, [&](Graph& g) {
        auto enc = encode_example(g, m, ex);
        auto tf = teacher_force(g, m, enc, ex);
        auto sup = supervised_losses(g, tf);
        auto tfs = teacher_force(g, m, enc, sampled);
        std::vector<Var> logps;
        for (size_t t = 0; t < tfs.mixtures.size(); ++t)
          logps.push_back(ad::log_clamped(ad::pick(tfs.mixtures[t], tfs.gold_ext_ids[t])));
        Var sum_logp = ad::vsum(ad::concat(logps));
        Var total = ad::add(sup.l_cl, sup.l_wl);
        return ad::add(total, scst_loss(0.4, 0.9, sum_logp));
      });
    }
  }
  throw std::runtime_error("gradient_check: unknown subsystem");
}

}  // namespace ktg
