#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ktg/encoders.hpp"

using namespace ktg;
using ad::Graph;
using ad::Param;
using ad::ParamStore;
using ad::Var;

namespace {

using Vec = std::vector<double>;

// Plain-double reference implementations, independent of the tape machinery.
Vec rmatvec(const Param& W, const Vec& x) {
  Vec y(size_t(W.rows), 0.0);
  for (int r = 0; r < W.rows; ++r)
    for (int c = 0; c < W.cols; ++c) y[size_t(r)] += W.value[size_t(r * W.cols + c)] * x[size_t(c)];
  return y;
}
Vec vadd(Vec a, const Vec& b) {
  for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}
Vec vmul(Vec a, const Vec& b) {
  for (size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
  return a;
}
Vec vsig(Vec a) {
  for (auto& v : a) v = 1.0 / (1.0 + std::exp(-v));
  return a;
}
Vec vtanh_(Vec a) {
  for (auto& v : a) v = std::tanh(v);
  return a;
}
Vec vcat(const Vec& a, const Vec& b) {
  Vec out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

struct RefState {
  Vec h, c;
};

RefState ref_lstm_step(const LstmCellParams& p, const Vec& x, const RefState& prev) {
  Vec xh = vcat(x, prev.h);
  Vec i = vsig(vadd(rmatvec(*p.Wi, xh), p.bi->value));
  Vec f = vsig(vadd(rmatvec(*p.Wf, xh), p.bf->value));
  Vec o = vsig(vadd(rmatvec(*p.Wo, xh), p.bo->value));
  Vec u = vtanh_(vadd(rmatvec(*p.Wu, xh), p.bu->value));
  Vec c = vadd(vmul(f, prev.c), vmul(i, u));
  Vec h = vmul(o, vtanh_(c));
  return {h, c};
}

// two-layer bidirectional pass mirrored in plain doubles
Vec ref_bilstm_final(const BiLstmParams& p, const std::vector<Vec>& inputs) {
  size_t T = inputs.size();
  auto layer = [&](const LstmCellParams& f, const LstmCellParams& b,
                   const std::vector<Vec>& xs) {
    std::vector<Vec> hf(T), hb(T);
    RefState sf{Vec(size_t(p.hidden), 0.0), Vec(size_t(p.hidden), 0.0)};
    for (size_t t = 0; t < T; ++t) {
      sf = ref_lstm_step(f, xs[t], sf);
      hf[t] = sf.h;
    }
    RefState sb{Vec(size_t(p.hidden), 0.0), Vec(size_t(p.hidden), 0.0)};
    for (size_t t = T; t-- > 0;) {
      sb = ref_lstm_step(b, xs[t], sb);
      hb[t] = sb.h;
    }
    std::vector<Vec> out(T);
    for (size_t t = 0; t < T; ++t) out[t] = vcat(hf[t], hb[t]);
    return std::tuple{out, hf[T - 1], hb[0]};
  };
  auto [l1, f1, b1] = layer(p.fwd1, p.bwd1, inputs);
  auto [l2, f2, b2] = layer(p.fwd2, p.bwd2, l1);
  return vcat(f2, b2);
}

Vocab vocab_of(const std::vector<std::string>& words) {
  Vocab v;
  v.interrogatives = default_interrogatives();
  v.to_token = {Vocab::kPadTok, Vocab::kUnkTok, Vocab::kEosTok, Vocab::kEmptyTok};
  for (const auto& w : words) v.to_token.push_back(w);
  for (int i = 0; i < int(v.to_token.size()); ++i) v.to_index[v.to_token[size_t(i)]] = i;
  return v;
}

void close_to(const std::vector<double>& got, const Vec& want, double tol = 1e-10) {
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < got.size(); ++i)
    REQUIRE(got[i] == Catch::Approx(want[i]).margin(tol));
}

}  // namespace

TEST_CASE("LSTM step matches the six-equation reference at d=1") {
  ParamStore ps;
  auto cell = LstmCellParams::create(ps, "cell", 1, 1);
  std::mt19937_64 rng(2);
  ps.init_uniform(-0.9, 0.9, rng);
  cell.bi->value = {0.1};
  cell.bf->value = {-0.2};
  cell.bo->value = {0.3};
  cell.bu->value = {0.05};

  Graph g;
  LstmState s = lstm_initial(g, 1);
  RefState r{{0.0}, {0.0}};
  for (double x : {0.7, -0.4, 1.2}) {
    s = lstm_step(g, cell, ad::constant(g, {x}), s);
    r = ref_lstm_step(cell, {x}, r);
    REQUIRE(s.h.value()[0] == Catch::Approx(r.h[0]).margin(1e-12));
    REQUIRE(s.c.value()[0] == Catch::Approx(r.c[0]).margin(1e-12));
  }
}

TEST_CASE("two-layer BiLSTM final state matches a plain-double reference") {
  ParamStore ps;
  auto p = BiLstmParams::create(ps, "bi", 2, 2);
  std::mt19937_64 rng(7);
  ps.init_uniform(-0.5, 0.5, rng);

  std::vector<Vec> inputs = {{0.3, -1.0}, {0.8, 0.2}, {-0.4, 0.9}};
  Graph g;
  std::vector<Var> vars;
  for (const auto& x : inputs) vars.push_back(ad::constant(g, x));
  auto out = run_bilstm(g, p, vars);
  REQUIRE(out.states.size() == 3);
  for (const auto& s : out.states) REQUIRE(s.size() == 4);
  close_to(out.final_state.value(), ref_bilstm_final(p, inputs));
}

TEST_CASE("BiLSTM with all-zero parameters collapses to zero") {
  ParamStore ps;
  auto p = BiLstmParams::create(ps, "bi", 1, 1);
  Graph g;
  auto out = run_bilstm(g, p, {ad::constant(g, {1.0}), ad::constant(g, {2.0})});
  for (double v : out.final_state.value()) REQUIRE(v == 0.0);
}

TEST_CASE("token sequence encoder uses the empty sentinel for missing text") {
  Vocab v = vocab_of({"american", "actress"});
  ParamStore ps;
  auto p = BiLstmParams::create(ps, "bi", 3, 3);
  Param& emb = ps.add("emb", v.size(), 3);
  std::mt19937_64 rng(9);
  ps.init_uniform(-0.4, 0.4, rng);

  Graph g;
  Var from_empty = encode_token_sequence(g, {}, v, emb, p);
  Var from_token = encode_token_sequence(g, {Vocab::kEmptyTok}, v, emb, p);
  close_to(from_empty.value(), from_token.value(), 1e-15);
  // unknown words map to <unk>, not a crash
  Var unk = encode_token_sequence(g, {"zzzz"}, v, emb, p);
  REQUIRE(unk.size() == 6);
}

TEST_CASE("tree-LSTM node matches the scalar reference with and without a child") {
  ParamStore ps;
  auto p = EncoderParams::create(ps, 8, 4, 2, 1);
  std::mt19937_64 rng(13);
  ps.init_uniform(-0.6, 0.6, rng);
  for (Param* b : {p.tbi, p.tbf, p.tbo, p.tbu})
    for (auto& v : b->value) v = 0.15;

  Vec x = {0.4, -0.7};
  Vec hc = {0.3, 0.1}, cc = {-0.2, 0.5};

  auto ref_node = [&](const Vec& hchild, const Vec& cchild) {
    Vec i = vsig(vadd(vadd(rmatvec(*p.tWi, x), rmatvec(*p.tUi[0], hchild)), p.tbi->value));
    Vec o = vsig(vadd(vadd(rmatvec(*p.tWo, x), rmatvec(*p.tUo[0], hchild)), p.tbo->value));
    Vec u = vtanh_(vadd(vadd(rmatvec(*p.tWu, x), rmatvec(*p.tUu[0], hchild)), p.tbu->value));
    Vec f = vsig(vadd(vadd(rmatvec(*p.tWf, x), rmatvec(*p.tUf[0][0], hchild)), p.tbf->value));
    Vec c = vadd(vmul(i, u), vmul(f, cchild));
    Vec h = vmul(o, vtanh_(c));
    return RefState{h, c};
  };

  Graph g;
  LstmState child{ad::constant(g, hc), ad::constant(g, cc)};
  LstmState got = tree_lstm_node(g, p, ad::constant(g, x), {child});
  RefState want = ref_node(hc, cc);
  close_to(got.h.value(), want.h);
  close_to(got.c.value(), want.c);

  // no children: padded with a zero state
  LstmState leaf = tree_lstm_node(g, p, ad::constant(g, x), {});
  RefState leaf_want = ref_node({0.0, 0.0}, {0.0, 0.0});
  close_to(leaf.h.value(), leaf_want.h);

  REQUIRE_THROWS_AS(tree_lstm_node(g, p, ad::constant(g, x), {child, child}), CapacityError);
}

TEST_CASE("tree-LSTM with arity 2 is sensitive to child order") {
  ParamStore ps;
  auto p = EncoderParams::create(ps, 8, 4, 2, 2);
  std::mt19937_64 rng(29);
  ps.init_uniform(-0.6, 0.6, rng);
  Graph g;
  LstmState a{ad::constant(g, {0.9, -0.1}), ad::constant(g, {0.2, 0.2})};
  LstmState b{ad::constant(g, {-0.5, 0.4}), ad::constant(g, {0.0, -0.3})};
  Var x = ad::constant(g, {0.3, 0.3});
  auto ab = tree_lstm_node(g, p, x, {a, b});
  auto ba = tree_lstm_node(g, p, x, {b, a});
  bool differs = false;
  for (size_t i = 0; i < ab.h.value().size(); ++i)
    if (std::abs(ab.h.value()[i] - ba.h.value()[i]) > 1e-9) differs = true;
  REQUIRE(differs);
}

TEST_CASE("entity encoder produces d/2d/2d parts and a d-wide projection") {
  Vocab wv = vocab_of({"american", "basketball", "player", "human"});
  Vocab kv = vocab_of({"lebron james"});
  ParamStore ps;
  int d = 3;
  auto p = EncoderParams::create(ps, wv.size(), kv.size(), d, 1);
  std::mt19937_64 rng(31);
  ps.init_uniform(-0.3, 0.3, rng);

  Entity e{"Q36159", "lebron james", {"american", "basketball", "player"}, {"human"}};
  Graph g;
  auto emb = encode_entity(g, e, wv, kv, p);
  REQUIRE(emb.label_part.size() == d);
  REQUIRE(emb.description_part.size() == 2 * d);
  REQUIRE(emb.domain_part.size() == 2 * d);
  REQUIRE(emb.combined.size() == d);
  // projection is exactly ent_proj @ [l; x; o] + b
  Vec cat = vcat(emb.label_part.value(),
                 vcat(emb.description_part.value(), emb.domain_part.value()));
  close_to(emb.combined.value(), vadd(rmatvec(*p.ent_proj, cat), p.ent_proj_b->value));
}

TEST_CASE("relation trie shares prefixes and evaluates each node once") {
  Vocab wv = vocab_of({"root", "people", "born_in", "spouse", "location", "capital_of"});
  ParamStore ps;
  auto p = EncoderParams::create(ps, wv.size(), 4, 2, 1);
  std::mt19937_64 rng(37);
  ps.init_uniform(-0.5, 0.5, rng);

  std::vector<Relation> rels = {
      {"born_in", {"born_in"}, {"root", "people", "born_in"}},
      {"spouse", {"spouse"}, {"root", "people", "spouse"}},
      {"capital_of", {"capital_of"}, {"root", "location", "capital_of"}}};
  Graph g;
  auto enc = encode_relation_hierarchy(g, rels, wv, p);
  // distinct trie nodes: root, people, born_in, spouse, location, capital_of
  REQUIRE(enc.node_evals == 6);
  REQUIRE(enc.by_id.size() == 3);
  for (const auto& [id, var] : enc.by_id) REQUIRE(var.size() == 2);

  // duplicated relation ids and paths do not add evaluations
  Graph g2;
  auto rels2 = rels;
  rels2.push_back(rels[0]);
  auto enc2 = encode_relation_hierarchy(g2, rels2, wv, p);
  REQUIRE(enc2.node_evals == 6);
  REQUIRE(enc2.by_id.size() == 3);

  // sibling leaves sharing the "people" prefix share its computed state:
  // relations with identical paths get identical vectors
  Graph g3;
  std::vector<Relation> twins = {{"r1", {"r1"}, {"root", "people", "born_in"}},
                                 {"r2", {"r2"}, {"root", "people", "born_in"}}};
  auto enc3 = encode_relation_hierarchy(g3, twins, wv, p);
  close_to(enc3.by_id.at("r1").value(), enc3.by_id.at("r2").value(), 1e-15);

  std::vector<Relation> bad = {{"r", {"r"}, {"people", "born_in"}}};
  Graph g4;
  REQUIRE_THROWS_AS(encode_relation_hierarchy(g4, bad, wv, p), ValidationError);
}

TEST_CASE("fact encoder interleaves the path and is order sensitive") {
  Vocab wv = vocab_of({"root", "born_in"});
  ParamStore ps;
  int d = 2;
  auto p = EncoderParams::create(ps, wv.size(), 8, d, 1);
  std::mt19937_64 rng(41);
  ps.init_uniform(-0.5, 0.5, rng);

  FactPath facts;
  facts.entities = {{"a", "alice", {}, {}}, {"b", "bob", {}, {}}, {"c", "carol", {}, {}}};
  facts.relations = {{"r1", {"r1"}, {"root", "r1"}}, {"r2", {"r2"}, {"root", "r2"}}};
  facts.answer_index = 2;

  Graph g;
  std::vector<Var> ents = {ad::constant(g, {0.1, 0.2}), ad::constant(g, {-0.3, 0.4}),
                           ad::constant(g, {0.5, -0.6})};
  std::map<std::string, Var> rels = {{"r1", ad::constant(g, {1.0, 0.0})},
                                     {"r2", ad::constant(g, {0.0, 1.0})}};
  auto enc = encode_fact_path(g, facts, ents, rels, p);
  REQUIRE(enc.entity_reps.size() == 3);
  REQUIRE(enc.relation_reps.size() == 2);
  for (const auto& v : enc.entity_reps) REQUIRE(v.size() == 2 * d);
  REQUIRE(enc.fact_vector.size() == 2 * d);

  // reversing the path changes the fact vector
  std::vector<Var> rents = {ents[2], ents[1], ents[0]};
  std::map<std::string, Var> rrels = {{"r1", rels.at("r2")}, {"r2", rels.at("r1")}};
  auto renc = encode_fact_path(g, facts, rents, rrels, p);
  bool differs = false;
  for (size_t i = 0; i < enc.fact_vector.value().size(); ++i)
    if (std::abs(enc.fact_vector.value()[i] - renc.fact_vector.value()[i]) > 1e-9)
      differs = true;
  REQUIRE(differs);
}

TEST_CASE("dropout is identity when disabled and rescales when enabled") {
  std::mt19937_64 rng(3);
  Graph g;
  Var x = ad::constant(g, {1.0, 1.0, 1.0, 1.0});
  Dropout off;
  REQUIRE(off.apply(g, x).value() == std::vector<double>{1, 1, 1, 1});
  Dropout on{0.5, &rng, true};
  auto v = on.apply(g, x).value();
  for (double e : v) REQUIRE((e == 0.0 || e == Catch::Approx(2.0)));
}
