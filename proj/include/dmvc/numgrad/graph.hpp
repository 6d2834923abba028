#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "dmvc/error.hpp"
#include "dmvc/numgrad/param_store.hpp"
#include "dmvc/numgrad/tensor.hpp"

namespace dmvc::ng {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; only valid while its graph lives.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

enum class Op {
  input,
  constant,
  param,
  matmul,
  affine,
  transpose,
  add,
  sub,
  mul,
  div,
  scale,
  shift,
  relu,
  sigmoid,
  exp,
  log,
  square,
  clamp,
  floor_at,
  sum,
  mean,
  sum_rows,
  sum_cols,
  concat_cols,
  slice_cols,
  slice_rows,
  logsumexp_rows,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::input: return "input";
    case Op::constant: return "constant";
    case Op::param: return "param";
    case Op::matmul: return "matmul";
    case Op::affine: return "affine";
    case Op::transpose: return "transpose";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::div: return "div";
    case Op::scale: return "scale";
    case Op::shift: return "shift";
    case Op::relu: return "relu";
    case Op::sigmoid: return "sigmoid";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::square: return "square";
    case Op::clamp: return "clamp";
    case Op::floor_at: return "floor_at";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::sum_rows: return "sum_rows";
    case Op::sum_cols: return "sum_cols";
    case Op::concat_cols: return "concat_cols";
    case Op::slice_cols: return "slice_cols";
    case Op::slice_rows: return "slice_rows";
    case Op::logsumexp_rows: return "logsumexp_rows";
  }
  return "?";
}

/// A tape of primitive operations over matrices, evaluated eagerly as it is
/// built and replayable afterwards with new input or parameter values.
///
/// Nodes are appended in creation order, so the tape is always topologically
/// sorted. `backward` writes d(loss)/d(parameter) into the bound ParamStore's
/// gradient accumulators (adding to what is there).
///
/// Elementwise binary ops broadcast an operand whose row or column extent is 1.
class Graph {
 public:
  explicit Graph(ParamStore* params = nullptr) : params_(params), mutable_params_(params) {}
  /// Read-only binding: the graph evaluates but `backward` cannot write gradients.
  explicit Graph(const ParamStore* params) : params_(params) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // ---- leaves ----

  Var input(std::string name, Tensor value, bool requires_grad = false) {
    Node n{Op::input};
    n.name = std::move(name);
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push_leaf(std::move(n));
  }

  Var constant(Tensor value) {
    Node n{Op::constant};
    n.value = std::move(value);
    return push_leaf(std::move(n));
  }

  Var param(const std::string& name) {
    if (params_ == nullptr) throw UsageError("graph has no parameter store bound");
    if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return {this, it->second};
    Node n{Op::param};
    n.name = name;
    n.value = params_->value(name);
    n.requires_grad = true;
    Var v = push_leaf(std::move(n));
    param_nodes_[name] = v.id();
    return v;
  }

  // ---- primitives ----

  Var matmul(Var a, Var b) { return push(Op::matmul, {a.id(), b.id()}); }
  /// x * weight + bias, with bias a single row.
  Var affine(Var x, Var weight, Var bias) { return push(Op::affine, {x.id(), weight.id(), bias.id()}); }
  Var transpose(Var a) { return push(Op::transpose, {a.id()}); }
  Var add(Var a, Var b) { return push(Op::add, {a.id(), b.id()}); }
  Var sub(Var a, Var b) { return push(Op::sub, {a.id(), b.id()}); }
  Var mul(Var a, Var b) { return push(Op::mul, {a.id(), b.id()}); }
  Var div(Var a, Var b) { return push(Op::div, {a.id(), b.id()}); }
  Var scale(Var a, double factor) { return push(Op::scale, {a.id()}, factor); }
  Var shift(Var a, double offset) { return push(Op::shift, {a.id()}, offset); }
  Var relu(Var a) { return push(Op::relu, {a.id()}); }
  Var sigmoid(Var a) { return push(Op::sigmoid, {a.id()}); }
  Var exp(Var a) { return push(Op::exp, {a.id()}); }
  Var log(Var a) { return push(Op::log, {a.id()}); }
  Var square(Var a) { return push(Op::square, {a.id()}); }
  Var clamp(Var a, double lo, double hi) { return push(Op::clamp, {a.id()}, lo, hi); }
  /// Elementwise max(a, floor).
  Var floor_at(Var a, double floor) { return push(Op::floor_at, {a.id()}, floor); }
  Var sum(Var a) { return push(Op::sum, {a.id()}); }
  Var mean(Var a) { return push(Op::mean, {a.id()}); }
  /// Sum across columns: r x c -> r x 1.
  Var sum_rows(Var a) { return push(Op::sum_rows, {a.id()}); }
  /// Sum down rows: r x c -> 1 x c.
  Var sum_cols(Var a) { return push(Op::sum_cols, {a.id()}); }
  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw UsageError("concat_cols needs at least one input");
    std::vector<std::size_t> ids;
    for (const auto& p : parts) ids.push_back(p.id());
    return push(Op::concat_cols, std::move(ids));
  }
  Var slice_cols(Var a, std::size_t begin, std::size_t end) {
    return push(Op::slice_cols, {a.id()}, 0.0, 0.0, begin, end);
  }
  Var slice_rows(Var a, std::size_t begin, std::size_t end) {
    return push(Op::slice_rows, {a.id()}, 0.0, 0.0, begin, end);
  }
  /// Row-wise log(sum(exp(.))): r x c -> r x 1, shifted by the row max.
  Var logsumexp_rows(Var a) { return push(Op::logsumexp_rows, {a.id()}); }

  // ---- composites ----

  /// Row-wise log-softmax.
  Var log_softmax_rows(Var a) { return sub(a, logsumexp_rows(a)); }
  Var softmax_rows(Var a) { return exp(log_softmax_rows(a)); }

  // ---- evaluation ----

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  std::size_t size() const { return nodes_.size(); }
  Op op(Var v) const { return nodes_.at(v.id()).op; }

  /// Replays every node. Inputs named in `inputs` are rebound first (their
  /// shape must not change); parameters are re-read from the store.
  void forward(const std::map<std::string, Tensor>& inputs = {}) {
    for (auto& [name, t] : inputs) {
      bool bound = false;
      for (auto& n : nodes_) {
        if (n.op == Op::input && n.name == name) {
          if (t.rows() != n.value.rows() || t.cols() != n.value.cols())
            throw ConfigError("input '" + name + "' rebound with shape " + shape_string(t.shape()) +
                              ", expected " + shape_string(n.value.shape()));
          n.value = t;
          bound = true;
        }
      }
      if (!bound) throw UsageError("graph has no input named '" + name + "'");
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      auto& n = nodes_[i];
      if (n.op == Op::param) n.value = params_->value(n.name);
      if (n.op != Op::input && n.op != Op::constant && n.op != Op::param) compute(i);
    }
    adjoints_.clear();
    has_adjoint_.clear();
  }

  /// Reverse sweep from a 1x1 loss node. Parameter gradients are added into
  /// the store; adjoints of every node stay available through `grad`.
  void backward(Var loss) {
    const auto& ln = nodes_.at(loss.id());
    if (ln.value.size() != 1)
      throw UsageError("backward: loss node has shape " + shape_string(ln.value.shape()) +
                       ", expected a scalar");
    adjoints_.assign(nodes_.size(), Tensor());
    has_adjoint_.assign(nodes_.size(), false);
    adjoints_[loss.id()] = Tensor(ln.value.shape(), 1.0);
    has_adjoint_[loss.id()] = true;

    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      if (!has_adjoint_[i] || !nodes_[i].requires_grad) continue;
      propagate(i);
    }
    for (const auto& [name, id] : param_nodes_) {
      if (!has_adjoint_[id]) continue;
      if (mutable_params_ == nullptr) throw UsageError("backward on a graph with a read-only parameter store");
      auto& g = mutable_params_->at(name).grad;
      auto src = adjoints_[id].data();
      auto dst = g.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }

  /// Adjoint of a node after `backward`; zeros when the loss does not depend on it.
  Tensor grad(Var v) const {
    if (v.id() < has_adjoint_.size() && has_adjoint_[v.id()]) return adjoints_[v.id()];
    return Tensor(nodes_.at(v.id()).value.shape());
  }

 private:
  struct Node {
    Op op;
    std::vector<std::size_t> inputs{};
    double a = 0.0;
    double b = 0.0;
    std::size_t lo = 0;
    std::size_t hi = 0;
    std::string name{};
    Tensor value{};
    bool requires_grad = false;
  };

  Var push_leaf(Node n) {
    nodes_.push_back(std::move(n));
    const std::size_t id = nodes_.size() - 1;
    check_finite(id);
    return {this, id};
  }

  Var push(Op op, std::vector<std::size_t> inputs, double a = 0.0, double b = 0.0, std::size_t lo = 0,
           std::size_t hi = 0) {
    Node n{op, std::move(inputs), a, b, lo, hi};
    for (auto in : n.inputs) {
      if (in >= nodes_.size()) throw UsageError("graph input refers to a node of another graph");
      n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
    }
    nodes_.push_back(std::move(n));
    compute(nodes_.size() - 1);
    return {this, nodes_.size() - 1};
  }

  const Tensor& in(std::size_t node, std::size_t k) const { return nodes_[nodes_[node].inputs[k]].value; }

  std::string describe(std::size_t id) const {
    return "node " + std::to_string(id) + " (" + op_name(nodes_[id].op) + ")";
  }

  void check_finite(std::size_t id) const {
    if (!nodes_[id].value.all_finite())
      throw NumericError(describe(id) + " produced a non-finite value");
  }

  static std::size_t broadcast_extent(std::size_t x, std::size_t y, bool& ok) {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    ok = false;
    return 0;
  }

  template <typename F>
  Tensor broadcast_apply(std::size_t id, F f) const {
    const Tensor& x = in(id, 0);
    const Tensor& y = in(id, 1);
    bool ok = true;
    const std::size_t r = broadcast_extent(x.rows(), y.rows(), ok);
    const std::size_t c = broadcast_extent(x.cols(), y.cols(), ok);
    if (!ok)
      throw ConfigError(describe(id) + ": cannot broadcast " + shape_string(x.shape()) + " with " +
                        shape_string(y.shape()));
    Tensor out({r, c});
    const bool xr = x.rows() == 1, xc = x.cols() == 1, yr = y.rows() == 1, yc = y.cols() == 1;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        out(i, j) = f(x(xr ? 0 : i, xc ? 0 : j), y(yr ? 0 : i, yc ? 0 : j));
    return out;
  }

  /// Sums a broadcast gradient back down to `like`'s extents.
  static Tensor reduce_to(const Tensor& g, const Tensor& like) {
    if (g.rows() == like.rows() && g.cols() == like.cols()) {
      return g.reshaped(like.shape());
    }
    Tensor out(like.shape());
    const bool rr = like.rows() == 1, cc = like.cols() == 1;
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) out[(rr ? 0 : i) * like.cols() + (cc ? 0 : j)] += g(i, j);
    return out;
  }

  template <typename F>
  static Tensor map(const Tensor& x, F f) {
    Tensor out({x.rows(), x.cols()});
    auto src = x.data();
    auto dst = out.data();
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = f(src[k]);
    return out;
  }

  void compute(std::size_t id) {
    Node& n = nodes_[id];
    switch (n.op) {
      case Op::input:
      case Op::constant:
      case Op::param:
        break;
      case Op::matmul: {
        const Tensor& x = in(id, 0);
        const Tensor& w = in(id, 1);
        if (x.cols() != w.rows())
          throw ConfigError(describe(id) + ": " + shape_string(x.shape()) + " x " + shape_string(w.shape()));
        Tensor out({x.rows(), w.cols()});
        as_eigen(out).noalias() = as_eigen(x) * as_eigen(w);
        n.value = std::move(out);
        break;
      }
      case Op::affine: {
        const Tensor& x = in(id, 0);
        const Tensor& w = in(id, 1);
        const Tensor& bias = in(id, 2);
        if (x.cols() != w.rows() || bias.rows() != 1 || bias.cols() != w.cols())
          throw ConfigError(describe(id) + ": input " + shape_string(x.shape()) + ", weight " +
                            shape_string(w.shape()) + ", bias " + shape_string(bias.shape()));
        Tensor out({x.rows(), w.cols()});
        auto o = as_eigen(out);
        o.noalias() = as_eigen(x) * as_eigen(w);
        o.rowwise() += as_eigen(bias).row(0);
        n.value = std::move(out);
        break;
      }
      case Op::transpose: {
        const Tensor& x = in(id, 0);
        Tensor out({x.cols(), x.rows()});
        as_eigen(out) = as_eigen(x).transpose();
        n.value = std::move(out);
        break;
      }
      case Op::add: n.value = broadcast_apply(id, [](double p, double q) { return p + q; }); break;
      case Op::sub: n.value = broadcast_apply(id, [](double p, double q) { return p - q; }); break;
      case Op::mul: n.value = broadcast_apply(id, [](double p, double q) { return p * q; }); break;
      case Op::div: n.value = broadcast_apply(id, [](double p, double q) { return p / q; }); break;
      case Op::scale: {
        const double f = n.a;
        n.value = map(in(id, 0), [f](double v) { return v * f; });
        break;
      }
      case Op::shift: {
        const double f = n.a;
        n.value = map(in(id, 0), [f](double v) { return v + f; });
        break;
      }
      case Op::relu: n.value = map(in(id, 0), [](double v) { return v > 0.0 ? v : 0.0; }); break;
      case Op::sigmoid:
        n.value = map(in(id, 0), [](double v) {
          if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
          const double e = std::exp(v);
          return e / (1.0 + e);
        });
        break;
      case Op::exp: n.value = map(in(id, 0), [](double v) { return std::exp(v); }); break;
      case Op::log: n.value = map(in(id, 0), [](double v) { return std::log(v); }); break;
      case Op::square: n.value = map(in(id, 0), [](double v) { return v * v; }); break;
      case Op::clamp: {
        const double lo = n.a, hi = n.b;
        n.value = map(in(id, 0), [lo, hi](double v) { return std::clamp(v, lo, hi); });
        break;
      }
      case Op::floor_at: {
        const double f = n.a;
        n.value = map(in(id, 0), [f](double v) { return std::max(v, f); });
        break;
      }
      case Op::sum:
      case Op::mean: {
        const Tensor& x = in(id, 0);
        double s = 0.0;
        for (double v : x.data()) s += v;
        if (n.op == Op::mean) {
          if (x.size() == 0) throw ConfigError(describe(id) + ": mean of an empty tensor");
          s /= static_cast<double>(x.size());
        }
        n.value = Tensor::scalar(s);
        break;
      }
      case Op::sum_rows: {
        const Tensor& x = in(id, 0);
        Tensor out({x.rows(), 1});
        for (std::size_t i = 0; i < x.rows(); ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < x.cols(); ++j) s += x(i, j);
          out[i] = s;
        }
        n.value = std::move(out);
        break;
      }
      case Op::sum_cols: {
        const Tensor& x = in(id, 0);
        Tensor out({1, x.cols()});
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = 0; j < x.cols(); ++j) out[j] += x(i, j);
        n.value = std::move(out);
        break;
      }
      case Op::concat_cols: {
        const std::size_t r = in(id, 0).rows();
        std::size_t c = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          if (in(id, k).rows() != r) throw ConfigError(describe(id) + ": row counts differ");
          c += in(id, k).cols();
        }
        Tensor out({r, c});
        std::size_t offset = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const Tensor& part = in(id, k);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < part.cols(); ++j) out(i, offset + j) = part(i, j);
          offset += part.cols();
        }
        n.value = std::move(out);
        break;
      }
      case Op::slice_cols: {
        const Tensor& x = in(id, 0);
        if (n.lo >= n.hi || n.hi > x.cols()) throw ConfigError(describe(id) + ": column range out of bounds");
        Tensor out({x.rows(), n.hi - n.lo});
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = n.lo; j < n.hi; ++j) out(i, j - n.lo) = x(i, j);
        n.value = std::move(out);
        break;
      }
      case Op::slice_rows: {
        const Tensor& x = in(id, 0);
        if (n.lo >= n.hi || n.hi > x.rows()) throw ConfigError(describe(id) + ": row range out of bounds");
        Tensor out({n.hi - n.lo, x.cols()});
        std::copy(x.data().begin() + static_cast<std::ptrdiff_t>(n.lo * x.cols()),
                  x.data().begin() + static_cast<std::ptrdiff_t>(n.hi * x.cols()), out.data().begin());
        n.value = std::move(out);
        break;
      }
      case Op::logsumexp_rows: {
        const Tensor& x = in(id, 0);
        Tensor out({x.rows(), 1});
        for (std::size_t i = 0; i < x.rows(); ++i) {
          double mx = -std::numeric_limits<double>::infinity();
          for (std::size_t j = 0; j < x.cols(); ++j) mx = std::max(mx, x(i, j));
          double s = 0.0;
          for (std::size_t j = 0; j < x.cols(); ++j) s += std::exp(x(i, j) - mx);
          out[i] = mx + std::log(s);
        }
        n.value = std::move(out);
        break;
      }
    }
    check_finite(id);
  }

  void accumulate(std::size_t id, const Tensor& g) {
    if (!nodes_[id].requires_grad) return;
    if (!has_adjoint_[id]) {
      adjoints_[id] = g.reshaped(nodes_[id].value.shape());
      has_adjoint_[id] = true;
      return;
    }
    auto dst = adjoints_[id].data();
    auto src = g.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }

  bool wants(std::size_t node, std::size_t k) const { return nodes_[nodes_[node].inputs[k]].requires_grad; }

  void propagate(std::size_t id) {
    const Node& n = nodes_[id];
    const Tensor& g = adjoints_[id];
    const auto& ins = n.inputs;
    auto elementwise = [&](auto f) {
      const Tensor& x = in(id, 0);
      Tensor d({x.rows(), x.cols()});
      for (std::size_t k = 0; k < x.size(); ++k) d[k] = g[k] * f(x[k], n.value[k]);
      accumulate(ins[0], d);
    };

    switch (n.op) {
      case Op::input:
      case Op::constant:
      case Op::param:
        break;
      case Op::matmul:
      case Op::affine: {
        const Tensor& x = in(id, 0);
        const Tensor& w = in(id, 1);
        if (wants(id, 0)) {
          Tensor dx({x.rows(), x.cols()});
          as_eigen(dx).noalias() = as_eigen(g) * as_eigen(w).transpose();
          accumulate(ins[0], dx);
        }
        if (wants(id, 1)) {
          Tensor dw({w.rows(), w.cols()});
          as_eigen(dw).noalias() = as_eigen(x).transpose() * as_eigen(g);
          accumulate(ins[1], dw);
        }
        if (n.op == Op::affine && wants(id, 2)) {
          Tensor db({1, w.cols()});
          as_eigen(db) = as_eigen(g).colwise().sum();
          accumulate(ins[2], db);
        }
        break;
      }
      case Op::transpose: {
        Tensor d({g.cols(), g.rows()});
        as_eigen(d) = as_eigen(g).transpose();
        accumulate(ins[0], d);
        break;
      }
      case Op::add:
      case Op::sub:
      case Op::mul:
      case Op::div: {
        const Tensor& x = in(id, 0);
        const Tensor& y = in(id, 1);
        const bool xr = x.rows() == 1, xc = x.cols() == 1, yr = y.rows() == 1, yc = y.cols() == 1;
        Tensor dx({g.rows(), g.cols()}), dy({g.rows(), g.cols()});
        for (std::size_t i = 0; i < g.rows(); ++i) {
          for (std::size_t j = 0; j < g.cols(); ++j) {
            const double xv = x(xr ? 0 : i, xc ? 0 : j);
            const double yv = y(yr ? 0 : i, yc ? 0 : j);
            const double gv = g(i, j);
            switch (n.op) {
              case Op::add: dx(i, j) = gv; dy(i, j) = gv; break;
              case Op::sub: dx(i, j) = gv; dy(i, j) = -gv; break;
              case Op::mul: dx(i, j) = gv * yv; dy(i, j) = gv * xv; break;
              default: dx(i, j) = gv / yv; dy(i, j) = -gv * xv / (yv * yv); break;
            }
          }
        }
        if (wants(id, 0)) accumulate(ins[0], reduce_to(dx, x));
        if (wants(id, 1)) accumulate(ins[1], reduce_to(dy, y));
        break;
      }
      case Op::scale: elementwise([&](double, double) { return n.a; }); break;
      case Op::shift: elementwise([](double, double) { return 1.0; }); break;
      case Op::relu: elementwise([](double x, double) { return x > 0.0 ? 1.0 : 0.0; }); break;
      case Op::sigmoid: elementwise([](double, double y) { return y * (1.0 - y); }); break;
      case Op::exp: elementwise([](double, double y) { return y; }); break;
      case Op::log: elementwise([](double x, double) { return 1.0 / x; }); break;
      case Op::square: elementwise([](double x, double) { return 2.0 * x; }); break;
      case Op::clamp:
        elementwise([&](double x, double) { return (x >= n.a && x <= n.b) ? 1.0 : 0.0; });
        break;
      case Op::floor_at: elementwise([&](double x, double) { return x >= n.a ? 1.0 : 0.0; }); break;
      case Op::sum:
      case Op::mean: {
        const Tensor& x = in(id, 0);
        const double v = n.op == Op::sum ? g[0] : g[0] / static_cast<double>(x.size());
        accumulate(ins[0], Tensor({x.rows(), x.cols()}, v));
        break;
      }
      case Op::sum_rows: {
        const Tensor& x = in(id, 0);
        Tensor d({x.rows(), x.cols()});
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = 0; j < x.cols(); ++j) d(i, j) = g[i];
        accumulate(ins[0], d);
        break;
      }
      case Op::sum_cols: {
        const Tensor& x = in(id, 0);
        Tensor d({x.rows(), x.cols()});
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = 0; j < x.cols(); ++j) d(i, j) = g[j];
        accumulate(ins[0], d);
        break;
      }
      case Op::concat_cols: {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ins.size(); ++k) {
          const Tensor& part = in(id, k);
          if (wants(id, k)) {
            Tensor d({part.rows(), part.cols()});
            for (std::size_t i = 0; i < part.rows(); ++i)
              for (std::size_t j = 0; j < part.cols(); ++j) d(i, j) = g(i, offset + j);
            accumulate(ins[k], d);
          }
          offset += part.cols();
        }
        break;
      }
      case Op::slice_cols: {
        const Tensor& x = in(id, 0);
        Tensor d({x.rows(), x.cols()});
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = n.lo; j < n.hi; ++j) d(i, j) = g(i, j - n.lo);
        accumulate(ins[0], d);
        break;
      }
      case Op::slice_rows: {
        const Tensor& x = in(id, 0);
        Tensor d({x.rows(), x.cols()});
        std::copy(g.data().begin(), g.data().end(),
                  d.data().begin() + static_cast<std::ptrdiff_t>(n.lo * x.cols()));
        accumulate(ins[0], d);
        break;
      }
      case Op::logsumexp_rows: {
        const Tensor& x = in(id, 0);
        Tensor d({x.rows(), x.cols()});
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = 0; j < x.cols(); ++j) d(i, j) = g[i] * std::exp(x(i, j) - n.value[i]);
        accumulate(ins[0], d);
        break;
      }
    }
  }

  const ParamStore* params_;
  ParamStore* mutable_params_ = nullptr;
  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> param_nodes_;
  std::vector<Tensor> adjoints_;
  std::vector<bool> has_adjoint_;
};

inline const Tensor& Var::value() const { return graph_->value(*this); }

// Free-function spellings so model code reads as math.
inline Var operator+(Var a, Var b) { return a.graph().add(a, b); }
inline Var operator-(Var a, Var b) { return a.graph().sub(a, b); }
inline Var operator*(Var a, Var b) { return a.graph().mul(a, b); }
inline Var operator/(Var a, Var b) { return a.graph().div(a, b); }
inline Var operator*(double f, Var a) { return a.graph().scale(a, f); }
inline Var operator*(Var a, double f) { return a.graph().scale(a, f); }
inline Var operator+(Var a, double f) { return a.graph().shift(a, f); }
inline Var operator-(Var a) { return a.graph().scale(a, -1.0); }
inline Var relu(Var a) { return a.graph().relu(a); }
inline Var sigmoid(Var a) { return a.graph().sigmoid(a); }
inline Var exp(Var a) { return a.graph().exp(a); }
inline Var log(Var a) { return a.graph().log(a); }
inline Var square(Var a) { return a.graph().square(a); }
inline Var sum(Var a) { return a.graph().sum(a); }
inline Var mean(Var a) { return a.graph().mean(a); }
inline Var sum_rows(Var a) { return a.graph().sum_rows(a); }

}  // namespace dmvc::ng
