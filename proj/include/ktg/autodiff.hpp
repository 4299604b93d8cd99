#pragma once

// Minimal reverse-mode autodiff over double vectors. Values are computed
// eagerly at node construction; backward() replays the tape in reverse.

#include <cassert>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ktg::ad {

struct Param {
  std::string name;
  int rows = 0;
  int cols = 1;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<double> adam_m, adam_v;  // sized lazily by the optimizer

  int size() const { return rows * cols; }
  double& operator()(int r, int c) { return value[size_t(r) * cols + c]; }
  double operator()(int r, int c) const { return value[size_t(r) * cols + c]; }
};

class ParamStore {
 public:
  Param& add(const std::string& name, int rows, int cols = 1) {
    if (index_.count(name)) throw std::runtime_error("duplicate parameter: " + name);
    auto p = std::make_unique<Param>();
    p->name = name;
    p->rows = rows;
    p->cols = cols;
    p->value.assign(size_t(rows) * cols, 0.0);
    p->grad.assign(size_t(rows) * cols, 0.0);
    Param* raw = p.get();
    index_[name] = raw;
    params_.push_back(std::move(p));
    return *raw;
  }

  Param* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : it->second;
  }

  const std::vector<std::unique_ptr<Param>>& all() const { return params_; }

  void zero_grad() {
    for (auto& p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0);
  }

  // Matrices get uniform(lo, hi); bias vectors (cols == 1) stay zero.
  void init_uniform(double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& p : params_) {
      if (p->cols == 1) continue;
      for (auto& v : p->value) v = dist(rng);
    }
  }

 private:
  std::vector<std::unique_ptr<Param>> params_;
  std::map<std::string, Param*> index_;
};

class Graph;

struct Var {
  Graph* g = nullptr;
  int i = -1;

  bool valid() const { return g != nullptr && i >= 0; }
  int size() const;
  const std::vector<double>& value() const;
  double scalar() const;
};

class Graph {
 public:
  struct Node {
    std::vector<double> val;
    std::vector<double> grad;
    int rows = 0, cols = 1;
    std::function<void(Graph&)> back;  // empty for constants
  };

  std::vector<Node> nodes;

  Node& at(int i) { return nodes[size_t(i)]; }
  const Node& at(int i) const { return nodes[size_t(i)]; }

  Var make(int rows, int cols = 1) {
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.val.assign(size_t(rows) * cols, 0.0);
    n.grad.assign(size_t(rows) * cols, 0.0);
    nodes.push_back(std::move(n));
    return Var{this, int(nodes.size()) - 1};
  }

  void backward(Var out) {
    if (out.g != this) throw std::runtime_error("backward: var from another graph");
    if (at(out.i).val.size() != 1) throw std::runtime_error("backward: loss must be scalar");
    at(out.i).grad[0] = 1.0;
    for (int i = out.i; i >= 0; --i) {
      if (nodes[size_t(i)].back) nodes[size_t(i)].back(*this);
    }
  }
};

inline int Var::size() const { return int(g->at(i).val.size()); }
inline const std::vector<double>& Var::value() const { return g->at(i).val; }
inline double Var::scalar() const {
  assert(size() == 1);
  return g->at(i).val[0];
}

// ---- leaves -------------------------------------------------------------

inline Var leaf(Graph& g, Param& p) {
  Var v = g.make(p.rows, p.cols);
  g.at(v.i).val = p.value;
  Param* pp = &p;
  int vi = v.i;
  g.at(v.i).back = [pp, vi](Graph& gr) {
    const auto& gout = gr.at(vi).grad;
    for (size_t k = 0; k < gout.size(); ++k) pp->grad[k] += gout[k];
  };
  return v;
}

// One row of a matrix parameter (embedding lookup).
inline Var leaf_row(Graph& g, Param& p, int row) {
  if (row < 0 || row >= p.rows) throw std::out_of_range("leaf_row: row out of range");
  Var v = g.make(p.cols);
  for (int c = 0; c < p.cols; ++c) g.at(v.i).val[size_t(c)] = p(row, c);
  Param* pp = &p;
  int vi = v.i;
  g.at(v.i).back = [pp, vi, row](Graph& gr) {
    const auto& gout = gr.at(vi).grad;
    for (size_t c = 0; c < gout.size(); ++c)
      pp->grad[size_t(row) * pp->cols + c] += gout[c];
  };
  return v;
}

inline Var constant(Graph& g, std::vector<double> v) {
  Var out = g.make(int(v.size()));
  g.at(out.i).val = std::move(v);
  return out;
}

inline Var zeros(Graph& g, int n) { return g.make(n); }

// ---- elementwise and linear ops ----------------------------------------

inline Var matvec(Var W, Var x) {
  Graph& g = *W.g;
  int rows = g.at(W.i).rows, cols = g.at(W.i).cols;
  if (x.size() != cols) throw std::runtime_error("matvec: dimension mismatch");
  Var out = g.make(rows);
  for (int r = 0; r < rows; ++r) {
    double s = 0;
    for (int c = 0; c < cols; ++c)
      s += g.at(W.i).val[size_t(r) * cols + c] * g.at(x.i).val[size_t(c)];
    g.at(out.i).val[size_t(r)] = s;
  }
  int wi = W.i, xi = x.i, oi = out.i;
  g.at(out.i).back = [wi, xi, oi, rows, cols](Graph& gr) {
    const auto& gout = gr.at(oi).grad;
    auto& gw = gr.at(wi).grad;
    auto& gx = gr.at(xi).grad;
    const auto& wv = gr.at(wi).val;
    const auto& xv = gr.at(xi).val;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        gw[size_t(r) * cols + c] += gout[size_t(r)] * xv[size_t(c)];
        gx[size_t(c)] += wv[size_t(r) * cols + c] * gout[size_t(r)];
      }
  };
  return out;
}

namespace detail {
template <class Fwd, class Bwd>
inline Var binary_elementwise(Var a, Var b, Fwd fwd, Bwd bwd) {
  Graph& g = *a.g;
  if (a.size() != b.size()) throw std::runtime_error("elementwise: size mismatch");
  Var out = g.make(a.size());
  for (int k = 0; k < a.size(); ++k)
    g.at(out.i).val[size_t(k)] = fwd(g.at(a.i).val[size_t(k)], g.at(b.i).val[size_t(k)]);
  int ai = a.i, bi = b.i, oi = out.i;
  g.at(out.i).back = [ai, bi, oi, bwd](Graph& gr) {
    const auto& gout = gr.at(oi).grad;
    for (size_t k = 0; k < gout.size(); ++k) {
      auto [da, db] = bwd(gr.at(ai).val[k], gr.at(bi).val[k]);
      gr.at(ai).grad[k] += da * gout[k];
      gr.at(bi).grad[k] += db * gout[k];
    }
  };
  return out;
}
}  // namespace detail

inline Var add(Var a, Var b) {
  return detail::binary_elementwise(
      a, b, [](double x, double y) { return x + y; },
      [](double, double) { return std::pair<double, double>{1.0, 1.0}; });
}

inline Var sub(Var a, Var b) {
  return detail::binary_elementwise(
      a, b, [](double x, double y) { return x - y; },
      [](double, double) { return std::pair<double, double>{1.0, -1.0}; });
}

inline Var cmul(Var a, Var b) {
  return detail::binary_elementwise(
      a, b, [](double x, double y) { return x * y; },
      [](double x, double y) { return std::pair<double, double>{y, x}; });
}

inline Var scale(Var a, double s) {
  Graph& g = *a.g;
  Var out = g.make(a.size());
  for (int k = 0; k < a.size(); ++k) g.at(out.i).val[size_t(k)] = s * g.at(a.i).val[size_t(k)];
  int ai = a.i, oi = out.i;
  g.at(out.i).back = [ai, oi, s](Graph& gr) {
    const auto& gout = gr.at(oi).grad;
    for (size_t k = 0; k < gout.size(); ++k) gr.at(ai).grad[k] += s * gout[k];
  };
  return out;
}

inline Var cmul_const(Var a, const std::vector<double>& m) {
  Graph& g = *a.g;
  if (int(m.size()) != a.size()) throw std::runtime_error("cmul_const: size mismatch");
  Var out = g.make(a.size());
  for (int k = 0; k < a.size(); ++k) g.at(out.i).val[size_t(k)] = m[size_t(k)] * g.at(a.i).val[size_t(k)];
  int ai = a.i, oi = out.i;
  std::vector<double> mc = m;
  g.at(out.i).back = [ai, oi, mc](Graph& gr) {
    const auto& gout = gr.at(oi).grad;
    for (size_t k = 0; k < gout.size(); ++k) gr.at(ai).grad[k] += mc[k] * gout[k];
  };
  return out;
}

inline Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::runtime_error("concat: empty");
  Graph& g = *parts[0].g;
  int total = 0;
  for (const Var& p : parts) total += p.size();
  Var out = g.make(total);
  int off = 0;
  std::vector<std::pair<int, int>> spans;  // (node index, offset)
  for (const Var& p : parts) {
    spans.emplace_back(p.i, off);
    for (int k = 0; k < p.size(); ++k) g.at(out.i).val[size_t(off + k)] = g.at(p.i).val[size_t(k)];
    off += p.size();
  }
  int oi = out.i;
  g.at(out.i).back = [oi, spans](Graph& gr) {
    const auto& gout = gr.at(oi).grad;
    for (auto [pi, o] : spans) {
      auto& gp = gr.at(pi).grad;
      for (size_t k = 0; k < gp.size(); ++k) gp[k] += gout[size_t(o) + k];
    }
  };
  return out;
}

inline Var concat(std::initializer_list<Var> parts) { return concat(std::vector<Var>(parts)); }

namespace detail {
template <class Fwd, class Deriv>
inline Var unary_elementwise(Var a, Fwd fwd, Deriv deriv) {
  Graph& g = *a.g;
  Var out = g.make(a.size());
  for (int k = 0; k < a.size(); ++k) g.at(out.i).val[size_t(k)] = fwd(g.at(a.i).val[size_t(k)]);
  int ai = a.i, oi = out.i;
  g.at(out.i).back = [ai, oi, deriv](Graph& gr) {
    const auto& gout = gr.at(oi).grad;
    const auto& y = gr.at(oi).val;
    const auto& x = gr.at(ai).val;
    for (size_t k = 0; k < gout.size(); ++k) gr.at(ai).grad[k] += deriv(x[k], y[k]) * gout[k];
  };
  return out;
}
}  // namespace detail

inline Var sigmoid(Var a) {
  return detail::unary_elementwise(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Var vtanh(Var a) {
  return detail::unary_elementwise(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var softmax(Var a) {
  Graph& g = *a.g;
  Var out = g.make(a.size());
  const auto& x = g.at(a.i).val;
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  double z = 0;
  for (size_t k = 0; k < x.size(); ++k) z += std::exp(x[k] - mx);
  for (size_t k = 0; k < x.size(); ++k) g.at(out.i).val[k] = std::exp(x[k] - mx) / z;
  int ai = a.i, oi = out.i;
  g.at(out.i).back = [ai, oi](Graph& gr) {
    const auto& gout = gr.at(oi).grad;
    const auto& y = gr.at(oi).val;
    double dotgy = 0;
    for (size_t k = 0; k < y.size(); ++k) dotgy += gout[k] * y[k];
    for (size_t k = 0; k < y.size(); ++k) gr.at(ai).grad[k] += y[k] * (gout[k] - dotgy);
  };
  return out;
}

// y = x / sum(x)
inline Var normalize_sum(Var a) {
  Graph& g = *a.g;
  double s = 0;
  for (double v : g.at(a.i).val) s += v;
  if (s == 0.0) throw std::runtime_error("normalize_sum: zero mass");
  Var out = g.make(a.size());
  for (size_t k = 0; k < g.at(a.i).val.size(); ++k)
    g.at(out.i).val[k] = g.at(a.i).val[k] / s;
  int ai = a.i, oi = out.i;
  g.at(out.i).back = [ai, oi, s](Graph& gr) {
    const auto& gout = gr.at(oi).grad;
    const auto& y = gr.at(oi).val;
    double dotgy = 0;
    for (size_t k = 0; k < y.size(); ++k) dotgy += gout[k] * y[k];
    for (size_t k = 0; k < y.size(); ++k) gr.at(ai).grad[k] += (gout[k] - dotgy) / s;
  };
  return out;
}

inline Var dot(Var a, Var b) {
  Graph& g = *a.g;
  if (a.size() != b.size()) throw std::runtime_error("dot: size mismatch");
  Var out = g.make(1);
  double s = 0;
  for (int k = 0; k < a.size(); ++k) s += g.at(a.i).val[size_t(k)] * g.at(b.i).val[size_t(k)];
  g.at(out.i).val[0] = s;
  int ai = a.i, bi = b.i, oi = out.i;
  g.at(out.i).back = [ai, bi, oi](Graph& gr) {
    double go = gr.at(oi).grad[0];
    const auto& av = gr.at(ai).val;
    const auto& bv = gr.at(bi).val;
    for (size_t k = 0; k < av.size(); ++k) {
      gr.at(ai).grad[k] += go * bv[k];
      gr.at(bi).grad[k] += go * av[k];
    }
  };
  return out;
}

inline Var vsum(Var a) {
  Graph& g = *a.g;
  Var out = g.make(1);
  double s = 0;
  for (double v : g.at(a.i).val) s += v;
  g.at(out.i).val[0] = s;
  int ai = a.i, oi = out.i;
  g.at(out.i).back = [ai, oi](Graph& gr) {
    double go = gr.at(oi).grad[0];
    for (auto& gv : gr.at(ai).grad) gv += go;
  };
  return out;
}

inline Var pick(Var a, int idx) {
  Graph& g = *a.g;
  if (idx < 0 || idx >= a.size()) throw std::out_of_range("pick: index out of range");
  Var out = g.make(1);
  g.at(out.i).val[0] = g.at(a.i).val[size_t(idx)];
  int ai = a.i, oi = out.i;
  g.at(out.i).back = [ai, oi, idx](Graph& gr) {
    gr.at(ai).grad[size_t(idx)] += gr.at(oi).grad[0];
  };
  return out;
}

// Elementwise log(max(x, eps)); sets *clamped when any entry was clamped.
inline Var log_clamped(Var a, double eps = 1e-12, bool* clamped = nullptr) {
  Graph& g = *a.g;
  Var out = g.make(a.size());
  for (int k = 0; k < a.size(); ++k) {
    double x = g.at(a.i).val[size_t(k)];
    if (x < eps) {
      if (clamped) *clamped = true;
      x = eps;
    }
    g.at(out.i).val[size_t(k)] = std::log(x);
  }
  int ai = a.i, oi = out.i;
  g.at(out.i).back = [ai, oi, eps](Graph& gr) {
    const auto& gout = gr.at(oi).grad;
    const auto& x = gr.at(ai).val;
    for (size_t k = 0; k < gout.size(); ++k) {
      if (x[k] >= eps) gr.at(ai).grad[k] += gout[k] / x[k];
    }
  };
  return out;
}

inline Var mul_scalar(Var v, Var s) {
  Graph& g = *v.g;
  if (s.size() != 1) throw std::runtime_error("mul_scalar: scalar expected");
  Var out = g.make(v.size());
  double sv = g.at(s.i).val[0];
  for (int k = 0; k < v.size(); ++k) g.at(out.i).val[size_t(k)] = sv * g.at(v.i).val[size_t(k)];
  int vi = v.i, si = s.i, oi = out.i;
  g.at(out.i).back = [vi, si, oi](Graph& gr) {
    const auto& gout = gr.at(oi).grad;
    const auto& vv = gr.at(vi).val;
    double sv2 = gr.at(si).val[0];
    double ds = 0;
    for (size_t k = 0; k < gout.size(); ++k) {
      gr.at(vi).grad[k] += sv2 * gout[k];
      ds += vv[k] * gout[k];
    }
    gr.at(si).grad[0] += ds;
  };
  return out;
}

// out[idx[k]] += a[k]
inline Var scatter_sum(Var a, const std::vector<int>& idx, int out_size) {
  Graph& g = *a.g;
  if (int(idx.size()) != a.size()) throw std::runtime_error("scatter_sum: size mismatch");
  Var out = g.make(out_size);
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= out_size) throw std::out_of_range("scatter_sum: index");
    g.at(out.i).val[size_t(idx[k])] += g.at(a.i).val[k];
  }
  int ai = a.i, oi = out.i;
  std::vector<int> ix = idx;
  g.at(out.i).back = [ai, oi, ix](Graph& gr) {
    const auto& gout = gr.at(oi).grad;
    for (size_t k = 0; k < ix.size(); ++k) gr.at(ai).grad[k] += gout[size_t(ix[k])];
  };
  return out;
}

inline Var pad_to(Var a, int out_size) {
  Graph& g = *a.g;
  if (out_size < a.size()) throw std::runtime_error("pad_to: shrinking");
  if (out_size == a.size()) return a;
  Var out = g.make(out_size);
  for (int k = 0; k < a.size(); ++k) g.at(out.i).val[size_t(k)] = g.at(a.i).val[size_t(k)];
  int ai = a.i, oi = out.i, n = a.size();
  g.at(out.i).back = [ai, oi, n](Graph& gr) {
    const auto& gout = gr.at(oi).grad;
    for (int k = 0; k < n; ++k) gr.at(ai).grad[size_t(k)] += gout[size_t(k)];
  };
  return out;
}

inline Var affine(Var W, Var x, Var b) { return add(matvec(W, x), b); }

inline Var neg(Var a) { return scale(a, -1.0); }

}  // namespace ktg::ad
