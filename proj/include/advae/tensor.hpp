#pragma once

// Dense row-major tensors with reverse-mode automatic differentiation.
//
// The graph is a define-by-run tape: while a Graph is in scope every op
// records a node (forward replay closure + backward closure). backward()
// sweeps the tape in reverse execution order, which is a valid reverse
// topological order. Leaf gradients accumulate across backward calls;
// intermediate gradients are scratch and reset per call.
//
// Broadcasting is restricted to trailing-dimension rules: shapes must be
// equal, or one operand's shape must be a suffix of the other's.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "advae/common.hpp"

namespace advae {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

namespace detail {
struct TensorData {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false) {
    validate_shape(shape);
    if (shape_numel(shape) != values.size()) {
      throw ShapeError("tensor: shape " + shape_str(shape) + " wants " +
                       std::to_string(shape_numel(shape)) + " values, got " +
                       std::to_string(values.size()));
    }
    d_ = std::make_shared<detail::TensorData>();
    d_->shape = std::move(shape);
    d_->values = std::move(values);
    d_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::size_t n = checked_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor full(Shape shape, double v, bool requires_grad = false) {
    std::size_t n = checked_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v), requires_grad);
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(d_); }
  const Shape& shape() const { return d_->shape; }
  std::size_t rank() const { return d_->shape.size(); }
  std::size_t numel() const { return d_->values.size(); }
  std::size_t extent(std::size_t axis) const { return d_->shape[axis]; }

  const std::vector<double>& values() const { return d_->values; }
  std::vector<double>& values() { return d_->values; }
  double at(std::size_t i) const { return d_->values[i]; }

  double item() const {
    if (numel() != 1) {
      throw ShapeError("item: tensor has shape " + shape_str(shape()) +
                       ", expected a single element");
    }
    return d_->values[0];
  }

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool b) { d_->requires_grad = b; }

  bool has_grad() const { return !d_->grad.empty(); }
  const std::vector<double>& grad() const { return d_->grad; }
  double grad_at(std::size_t i) const { return d_->grad[i]; }

  // Returns the gradient accumulator, allocating zeros on first use.
  std::vector<double>& grad_buffer() {
    if (d_->grad.empty()) d_->grad.assign(d_->values.size(), 0.0);
    return d_->grad;
  }

  void zero_grad() { d_->grad.clear(); }

  bool same_data(const Tensor& other) const { return d_ == other.d_; }

 private:
  static void validate_shape(const Shape& s) {
    if (s.empty()) throw ShapeError("tensor: empty shape");
    for (std::size_t e : s) {
      if (e == 0) {
        throw ShapeError("tensor: zero extent in shape " + shape_str(s));
      }
    }
  }
  static std::size_t checked_numel(const Shape& s) {
    validate_shape(s);
    return shape_numel(s);
  }

  std::shared_ptr<detail::TensorData> d_;
};

// ---------------------------------------------------------------------------
// Tape

struct GraphNode {
  const char* op = "";
  std::vector<Tensor> inputs;
  Tensor output;
  std::function<void()> forward;   // recompute output values from inputs
  std::function<void()> backward;  // accumulate input grads from output grad
};

class Graph {
 public:
  Graph() { stack().push_back(this); }
  ~Graph() { stack().pop_back(); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  static Graph* current() {
    auto& s = stack();
    return s.empty() ? nullptr : s.back();
  }

  void record(GraphNode node) { nodes_.push_back(std::move(node)); }

  std::size_t size() const { return nodes_.size(); }
  const GraphNode& node(std::size_t i) const { return nodes_[i]; }

  // Re-executes every recorded forward in order; reproduces identical values.
  void replay() {
    for (auto& n : nodes_) n.forward();
  }

  // Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable from
  // loss. Intermediate (node output) grads are reset at the start of each
  // call; leaf grads accumulate across calls.
  void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
      throw ShapeError("backward: loss must be a scalar, got shape " +
                       (loss.defined() ? shape_str(loss.shape()) : "<empty>"));
    }
    for (auto& n : nodes_) {
      Tensor out = n.output;
      out.zero_grad();
    }
    Tensor seed = loss;
    seed.grad_buffer()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (!it->output.has_grad()) continue;
      it->backward();
    }
  }

 private:
  static std::vector<Graph*>& stack() {
    static thread_local std::vector<Graph*> s;
    return s;
  }
  friend class NoGradGuard;
  std::vector<GraphNode> nodes_;
};

// Disables recording for the enclosed scope (finite-difference evaluation,
// frozen-model sampling).
class NoGradGuard {
 public:
  NoGradGuard() { Graph::stack().push_back(nullptr); }
  ~NoGradGuard() { Graph::stack().pop_back(); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

namespace detail {

inline bool any_needs(const std::vector<bool>& needs) {
  return std::any_of(needs.begin(), needs.end(), [](bool b) { return b; });
}

// Records a node if a graph is active; output requires_grad is decided here,
// and the backward closure is gated on the flags baked at record time, so a
// parameter freeze that is active during the forward holds for the backward.
inline void record_op(const char* op, std::vector<Tensor> inputs, Tensor output,
                      std::function<void()> forward,
                      std::function<void()> backward) {
  Graph* g = Graph::current();
  if (!g) return;
  GraphNode n;
  n.op = op;
  n.inputs = std::move(inputs);
  n.output = std::move(output);
  n.forward = std::move(forward);
  n.backward = std::move(backward);
  g->record(std::move(n));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Broadcasting plan

namespace detail {

// For row-major layouts a trailing-suffix broadcast means flat index i of the
// large operand pairs with i % numel(small).
struct BinaryPlan {
  Shape out_shape;
  bool bcast_a = false;  // a is the smaller, repeated operand
  bool bcast_b = false;
};

inline bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

inline BinaryPlan plan_binary(const char* op, const Shape& a, const Shape& b) {
  BinaryPlan p;
  if (a == b) {
    p.out_shape = a;
    return p;
  }
  if (is_suffix(b, a)) {
    p.out_shape = a;
    p.bcast_b = true;
    return p;
  }
  if (is_suffix(a, b)) {
    p.out_shape = b;
    p.bcast_a = true;
    return p;
  }
  throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                   shape_str(b) + " are not broadcast-compatible");
}

// Reduces an output-shaped gradient onto a (possibly broadcast) operand.
inline void accum_binary_grad(Tensor& t, bool bcast,
                              const std::vector<double>& contrib) {
  auto& g = t.grad_buffer();
  if (!bcast) {
    for (std::size_t i = 0; i < contrib.size(); ++i) g[i] += contrib[i];
    return;
  }
  const std::size_t n = g.size();
  for (std::size_t i = 0; i < contrib.size(); ++i) g[i % n] += contrib[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops

namespace detail {

template <typename Fwd, typename Bwd>
Tensor binary_op(const char* op, const Tensor& a, const Tensor& b, Fwd fwd,
                 Bwd bwd) {
  BinaryPlan plan = plan_binary(op, a.shape(), b.shape());
  const std::size_t n_out = shape_numel(plan.out_shape);
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();
  std::vector<double> out_vals(n_out);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < n_out; ++i) {
    out_vals[i] = fwd(av[plan.bcast_a ? i % na : i], bv[plan.bcast_b ? i % nb : i]);
  }
  Tensor out(plan.out_shape, std::move(out_vals));
  bool need_a = a.requires_grad();
  bool need_b = b.requires_grad();
  if (Graph::current()) {
    out.set_requires_grad(need_a || need_b);
    Tensor ac = a, bc = b, oc = out;
    record_op(
        op, {a, b}, out,
        [ac, bc, oc, plan, fwd, na, nb]() mutable {
          const auto& av2 = ac.values();
          const auto& bv2 = bc.values();
          auto& ov = oc.values();
          for (std::size_t i = 0; i < ov.size(); ++i) {
            ov[i] = fwd(av2[plan.bcast_a ? i % na : i],
                        bv2[plan.bcast_b ? i % nb : i]);
          }
        },
        [ac, bc, oc, plan, bwd, need_a, need_b, na, nb]() mutable {
          const auto& go = oc.grad();
          const auto& av2 = ac.values();
          const auto& bv2 = bc.values();
          const std::size_t n = go.size();
          if (need_a) {
            auto& ga = ac.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
              double x = av2[plan.bcast_a ? i % na : i];
              double y = bv2[plan.bcast_b ? i % nb : i];
              ga[plan.bcast_a ? i % na : i] += go[i] * bwd.da(x, y);
            }
          }
          if (need_b) {
            auto& gb = bc.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
              double x = av2[plan.bcast_a ? i % na : i];
              double y = bv2[plan.bcast_b ? i % nb : i];
              gb[plan.bcast_b ? i % nb : i] += go[i] * bwd.db(x, y);
            }
          }
        });
  }
  return out;
}

struct AddBwd {
  static double da(double, double) { return 1.0; }
  static double db(double, double) { return 1.0; }
};
struct SubBwd {
  static double da(double, double) { return 1.0; }
  static double db(double, double) { return -1.0; }
};
struct MulBwd {
  static double da(double, double y) { return y; }
  static double db(double x, double) { return x; }
};
struct DivBwd {
  static double da(double, double y) { return 1.0 / y; }
  static double db(double x, double y) { return -x / (y * y); }
};

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "add", a, b, [](double x, double y) { return x + y; }, detail::AddBwd{});
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "sub", a, b, [](double x, double y) { return x - y; }, detail::SubBwd{});
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "mul", a, b, [](double x, double y) { return x * y; }, detail::MulBwd{});
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  const auto& bv = b.values();
  for (std::size_t i = 0; i < bv.size(); ++i) {
    if (bv[i] == 0.0) {
      throw DomainError("div: zero divisor at index " + std::to_string(i));
    }
  }
  return detail::binary_op(
      "div", a, b, [](double x, double y) { return x / y; }, detail::DivBwd{});
}

// ---------------------------------------------------------------------------
// Elementwise unary ops

namespace detail {

template <typename Fwd, typename Bwd>
Tensor unary_op(const char* op, const Tensor& a, Fwd fwd, Bwd bwd) {
  std::vector<double> out_vals(a.numel());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out_vals.size(); ++i) out_vals[i] = fwd(av[i]);
  Tensor out(a.shape(), std::move(out_vals));
  bool need = a.requires_grad();
  if (Graph::current()) {
    out.set_requires_grad(need);
    Tensor ac = a, oc = out;
    record_op(
        op, {a}, out,
        [ac, oc, fwd]() mutable {
          const auto& av2 = ac.values();
          auto& ov = oc.values();
          for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = fwd(av2[i]);
        },
        [ac, oc, bwd, need]() mutable {
          if (!need) return;
          const auto& go = oc.grad();
          const auto& av2 = ac.values();
          const auto& ov = oc.values();
          auto& ga = ac.grad_buffer();
          for (std::size_t i = 0; i < go.size(); ++i) {
            ga[i] += go[i] * bwd(av2[i], ov[i]);
          }
        });
  }
  return out;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

inline Tensor exp(const Tensor& a) {
  return detail::unary_op(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

inline Tensor log(const Tensor& a) {
  const auto& av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (!(av[i] > 0.0)) {
      throw DomainError("log: nonpositive input " + std::to_string(av[i]) +
                        " at index " + std::to_string(i));
    }
  }
  return detail::unary_op(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

inline Tensor neg(const Tensor& a) {
  return detail::unary_op(
      "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

#ifdef ADVAE_CORRUPT_TANH_BACKWARD
// Negative-control build: deliberately wrong tanh derivative so the
// grad-check suite must report failures.
inline constexpr double kTanhBwdScale = 1.01;
#else
inline constexpr double kTanhBwdScale = 1.0;
#endif

inline Tensor tanh(const Tensor& a) {
  return detail::unary_op(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return kTanhBwdScale * (1.0 - y * y); });
}

inline Tensor relu(const Tensor& a) {
  return detail::unary_op(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor softplus(const Tensor& a) {
  return detail::unary_op(
      "softplus", a,
      [](double x) {
        return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
      },
      [](double x, double) { return detail::sigmoid(x); });
}

// ---------------------------------------------------------------------------
// Scalar (tensor, double) ops

namespace detail {

template <typename Fwd, typename Bwd>
Tensor scalar_op(const char* op, const Tensor& a, double c, Fwd fwd, Bwd bwd) {
  return unary_op(
      op, a, [fwd, c](double x) { return fwd(x, c); },
      [bwd, c](double x, double y) { return bwd(x, y, c); });
}

}  // namespace detail

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

inline Tensor operator+(const Tensor& a, double c) {
  return detail::scalar_op(
      "adds", a, c, [](double x, double k) { return x + k; },
      [](double, double, double) { return 1.0; });
}
inline Tensor operator+(double c, const Tensor& a) { return a + c; }

inline Tensor operator-(const Tensor& a, double c) { return a + (-c); }

inline Tensor operator-(double c, const Tensor& a) {
  return detail::scalar_op(
      "rsubs", a, c, [](double x, double k) { return k - x; },
      [](double, double, double) { return -1.0; });
}

inline Tensor operator*(const Tensor& a, double c) {
  return detail::scalar_op(
      "muls", a, c, [](double x, double k) { return x * k; },
      [](double, double, double k) { return k; });
}
inline Tensor operator*(double c, const Tensor& a) { return a * c; }

inline Tensor operator/(const Tensor& a, double c) {
  if (c == 0.0) throw DomainError("div: zero scalar divisor");
  return a * (1.0 / c);
}

inline Tensor operator/(double c, const Tensor& a) {
  const auto& av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (av[i] == 0.0) {
      throw DomainError("div: zero divisor at index " + std::to_string(i));
    }
  }
  return detail::scalar_op(
      "rdivs", a, c, [](double x, double k) { return k / x; },
      [](double x, double, double k) { return -k / (x * x); });
}

// ---------------------------------------------------------------------------
// Matrix product

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul: expects rank-2 operands, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.extent(0), k = a.extent(1);
  const std::size_t k2 = b.extent(0), n = b.extent(1);
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions disagree: " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  auto kernel = [m, k, n](const std::vector<double>& av,
                          const std::vector<double>& bv,
                          std::vector<double>& ov) {
    std::fill(ov.begin(), ov.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = av[i * k + p];
        const double* brow = bv.data() + p * n;
        double* orow = ov.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
      }
    }
  };
  std::vector<double> out_vals(m * n);
  kernel(a.values(), b.values(), out_vals);
  Tensor out(Shape{m, n}, std::move(out_vals));
  bool need_a = a.requires_grad();
  bool need_b = b.requires_grad();
  if (Graph::current()) {
    out.set_requires_grad(need_a || need_b);
    Tensor ac = a, bc = b, oc = out;
    detail::record_op(
        "matmul", {a, b}, out,
        [ac, bc, oc, kernel]() mutable {
          kernel(ac.values(), bc.values(), oc.values());
        },
        [ac, bc, oc, m, k, n, need_a, need_b]() mutable {
          const auto& go = oc.grad();
          if (need_a) {
            // grad_a = g . b^T
            auto& ga = ac.grad_buffer();
            const auto& bv = bc.values();
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t j = 0; j < n; ++j) {
                const double gij = go[i * n + j];
                const double* brow = bv.data() + j;  // column j of b
                double* garow = ga.data() + i * k;
                for (std::size_t p = 0; p < k; ++p) {
                  garow[p] += gij * brow[p * n];
                }
              }
            }
          }
          if (need_b) {
            // grad_b = a^T . g
            auto& gb = bc.grad_buffer();
            const auto& av = ac.values();
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t p = 0; p < k; ++p) {
                const double aip = av[i * k + p];
                const double* grow = go.data() + i * n;
                double* gbrow = gb.data() + p * n;
                for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
              }
            }
          }
        });
  }
  return out;
}

// Fused affine map: y[i,o] = sum_k x[i,k] * w[o,k] + b[o].
// Weight layout is [out x in], matching LinearLayer.
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1) {
    throw ShapeError("linear: expects x[n x in], w[out x in], b[out]");
  }
  const std::size_t n = x.extent(0), in = x.extent(1);
  const std::size_t out_dim = w.extent(0);
  if (w.extent(1) != in || b.extent(0) != out_dim) {
    throw ShapeError("linear: x " + shape_str(x.shape()) + " incompatible with w " +
                     shape_str(w.shape()) + ", b " + shape_str(b.shape()));
  }
  auto kernel = [n, in, out_dim](const std::vector<double>& xv,
                                 const std::vector<double>& wv,
                                 const std::vector<double>& bv,
                                 std::vector<double>& yv) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* xrow = xv.data() + i * in;
      double* yrow = yv.data() + i * out_dim;
      for (std::size_t o = 0; o < out_dim; ++o) {
        const double* wrow = wv.data() + o * in;
        double acc = bv[o];
        for (std::size_t p = 0; p < in; ++p) acc += xrow[p] * wrow[p];
        yrow[o] = acc;
      }
    }
  };
  std::vector<double> out_vals(n * out_dim);
  kernel(x.values(), w.values(), b.values(), out_vals);
  Tensor out(Shape{n, out_dim}, std::move(out_vals));
  bool need_x = x.requires_grad();
  bool need_w = w.requires_grad();
  bool need_b = b.requires_grad();
  if (Graph::current()) {
    out.set_requires_grad(need_x || need_w || need_b);
    Tensor xc = x, wc = w, bc = b, oc = out;
    detail::record_op(
        "linear", {x, w, b}, out,
        [xc, wc, bc, oc, kernel]() mutable {
          kernel(xc.values(), wc.values(), bc.values(), oc.values());
        },
        [xc, wc, bc, oc, n, in, out_dim, need_x, need_w, need_b]() mutable {
          const auto& go = oc.grad();
          if (need_x) {
            auto& gx = xc.grad_buffer();
            const auto& wv = wc.values();
            for (std::size_t i = 0; i < n; ++i) {
              const double* grow = go.data() + i * out_dim;
              double* gxrow = gx.data() + i * in;
              for (std::size_t o = 0; o < out_dim; ++o) {
                const double g = grow[o];
                const double* wrow = wv.data() + o * in;
                for (std::size_t p = 0; p < in; ++p) gxrow[p] += g * wrow[p];
              }
            }
          }
          if (need_w) {
            auto& gw = wc.grad_buffer();
            const auto& xv = xc.values();
            for (std::size_t i = 0; i < n; ++i) {
              const double* grow = go.data() + i * out_dim;
              const double* xrow = xv.data() + i * in;
              for (std::size_t o = 0; o < out_dim; ++o) {
                const double g = grow[o];
                double* gwrow = gw.data() + o * in;
                for (std::size_t p = 0; p < in; ++p) gwrow[p] += g * xrow[p];
              }
            }
          }
          if (need_b) {
            auto& gb = bc.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
              const double* grow = go.data() + i * out_dim;
              for (std::size_t o = 0; o < out_dim; ++o) gb[o] += grow[o];
            }
          }
        });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions

namespace detail {

inline Tensor reduce_impl(const char* op, const Tensor& a, bool is_mean) {
  const std::size_t n = a.numel();
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  const double scale = is_mean ? 1.0 / static_cast<double>(n) : 1.0;
  Tensor out = Tensor::scalar(acc * scale);
  bool need = a.requires_grad();
  if (Graph::current()) {
    out.set_requires_grad(need);
    Tensor ac = a, oc = out;
    record_op(
        op, {a}, out,
        [ac, oc, scale]() mutable {
          double s = 0.0;
          for (double v : ac.values()) s += v;
          oc.values()[0] = s * scale;
        },
        [ac, oc, scale, need]() mutable {
          if (!need) return;
          const double g = oc.grad()[0] * scale;
          auto& ga = ac.grad_buffer();
          for (auto& v : ga) v += g;
        });
  }
  return out;
}

inline Tensor reduce_axis_impl(const char* op, const Tensor& a, std::size_t axis,
                               bool is_mean) {
  if (axis >= a.rank()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(a.shape()));
  }
  const Shape& s = a.shape();
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != axis) out_shape.push_back(s[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  std::size_t pre = 1, post = 1;
  for (std::size_t i = 0; i < axis; ++i) pre *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) post *= s[i];
  const std::size_t ext = s[axis];
  const double scale = is_mean ? 1.0 / static_cast<double>(ext) : 1.0;
  auto kernel = [pre, post, ext, scale](const std::vector<double>& av,
                                        std::vector<double>& ov) {
    std::fill(ov.begin(), ov.end(), 0.0);
    for (std::size_t p = 0; p < pre; ++p) {
      for (std::size_t j = 0; j < ext; ++j) {
        const double* arow = av.data() + (p * ext + j) * post;
        double* orow = ov.data() + p * post;
        for (std::size_t q = 0; q < post; ++q) orow[q] += arow[q];
      }
    }
    for (auto& v : ov) v *= scale;
  };
  std::vector<double> out_vals(pre * post);
  kernel(a.values(), out_vals);
  Tensor out(out_shape, std::move(out_vals));
  bool need = a.requires_grad();
  if (Graph::current()) {
    out.set_requires_grad(need);
    Tensor ac = a, oc = out;
    record_op(
        op, {a}, out,
        [ac, oc, kernel]() mutable { kernel(ac.values(), oc.values()); },
        [ac, oc, pre, post, ext, scale, need]() mutable {
          if (!need) return;
          const auto& go = oc.grad();
          auto& ga = ac.grad_buffer();
          for (std::size_t p = 0; p < pre; ++p) {
            for (std::size_t j = 0; j < ext; ++j) {
              double* garow = ga.data() + (p * ext + j) * post;
              const double* grow = go.data() + p * post;
              for (std::size_t q = 0; q < post; ++q) {
                garow[q] += grow[q] * scale;
              }
            }
          }
        });
  }
  return out;
}

}  // namespace detail

inline Tensor sum(const Tensor& a) { return detail::reduce_impl("sum", a, false); }
inline Tensor mean(const Tensor& a) { return detail::reduce_impl("mean", a, true); }
inline Tensor sum(const Tensor& a, std::size_t axis) {
  return detail::reduce_axis_impl("sum", a, axis, false);
}
inline Tensor mean(const Tensor& a, std::size_t axis) {
  return detail::reduce_axis_impl("mean", a, axis, true);
}

// ---------------------------------------------------------------------------
// Layout ops

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(0) != b.extent(0)) {
    throw ShapeError("concat_cols: need rank-2 tensors with equal row counts, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t n = a.extent(0), ca = a.extent(1), cb = b.extent(1);
  auto kernel = [n, ca, cb](const std::vector<double>& av,
                            const std::vector<double>& bv,
                            std::vector<double>& ov) {
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(av.data() + i * ca, ca, ov.data() + i * (ca + cb));
      std::copy_n(bv.data() + i * cb, cb, ov.data() + i * (ca + cb) + ca);
    }
  };
  std::vector<double> out_vals(n * (ca + cb));
  kernel(a.values(), b.values(), out_vals);
  Tensor out(Shape{n, ca + cb}, std::move(out_vals));
  bool need_a = a.requires_grad();
  bool need_b = b.requires_grad();
  if (Graph::current()) {
    out.set_requires_grad(need_a || need_b);
    Tensor ac = a, bc = b, oc = out;
    detail::record_op(
        "concat_cols", {a, b}, out,
        [ac, bc, oc, kernel]() mutable {
          kernel(ac.values(), bc.values(), oc.values());
        },
        [ac, bc, oc, n, ca, cb, need_a, need_b]() mutable {
          const auto& go = oc.grad();
          if (need_a) {
            auto& ga = ac.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
              const double* grow = go.data() + i * (ca + cb);
              for (std::size_t j = 0; j < ca; ++j) ga[i * ca + j] += grow[j];
            }
          }
          if (need_b) {
            auto& gb = bc.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
              const double* grow = go.data() + i * (ca + cb) + ca;
              for (std::size_t j = 0; j < cb; ++j) gb[i * cb + j] += grow[j];
            }
          }
        });
  }
  return out;
}

inline Tensor slice_cols(const Tensor& a, std::size_t from, std::size_t to) {
  if (a.rank() != 2) {
    throw ShapeError("slice_cols: need rank-2 tensor, got " + shape_str(a.shape()));
  }
  if (from >= to || to > a.extent(1)) {
    throw ShapeError("slice_cols: range [" + std::to_string(from) + ", " +
                     std::to_string(to) + ") invalid for shape " +
                     shape_str(a.shape()));
  }
  const std::size_t n = a.extent(0), c = a.extent(1), w = to - from;
  auto kernel = [n, c, w, from](const std::vector<double>& av,
                                std::vector<double>& ov) {
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(av.data() + i * c + from, w, ov.data() + i * w);
    }
  };
  std::vector<double> out_vals(n * w);
  kernel(a.values(), out_vals);
  Tensor out(Shape{n, w}, std::move(out_vals));
  bool need = a.requires_grad();
  if (Graph::current()) {
    out.set_requires_grad(need);
    Tensor ac = a, oc = out;
    detail::record_op(
        "slice_cols", {a}, out,
        [ac, oc, kernel]() mutable { kernel(ac.values(), oc.values()); },
        [ac, oc, n, c, w, from, need]() mutable {
          if (!need) return;
          const auto& go = oc.grad();
          auto& ga = ac.grad_buffer();
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
              ga[i * c + from + j] += go[i * w + j];
            }
          }
        });
  }
  return out;
}

inline Tensor reshape(const Tensor& a, Shape new_shape) {
  if (shape_numel(new_shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(new_shape));
  }
  Tensor out(new_shape, a.values());
  bool need = a.requires_grad();
  if (Graph::current()) {
    out.set_requires_grad(need);
    Tensor ac = a, oc = out;
    detail::record_op(
        "reshape", {a}, out,
        [ac, oc]() mutable { oc.values() = ac.values(); },
        [ac, oc, need]() mutable {
          if (!need) return;
          const auto& go = oc.grad();
          auto& ga = ac.grad_buffer();
          for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        });
  }
  return out;
}

// Saturates values smoothly into [-bound, bound]; identity-like near zero.
inline Tensor smooth_clamp(const Tensor& a, double bound) {
  if (bound <= 0.0) throw DomainError("smooth_clamp: bound must be positive");
  return tanh(a * (1.0 / bound)) * bound;
}

// ---------------------------------------------------------------------------
// Enum dispatch (activation selection, config files)

enum class EwOp { add, sub, mul, div, exp, log, neg, tanh, relu, softplus };

inline Tensor elementwise(EwOp op, const Tensor& a, const Tensor* b = nullptr) {
  auto want_binary = [&](const char* name) {
    if (!b || !b->defined()) {
      throw ConfigError(std::string(name) + ": missing second operand");
    }
  };
  switch (op) {
    case EwOp::add: want_binary("add"); return add(a, *b);
    case EwOp::sub: want_binary("sub"); return sub(a, *b);
    case EwOp::mul: want_binary("mul"); return mul(a, *b);
    case EwOp::div: want_binary("div"); return div(a, *b);
    case EwOp::exp: return exp(a);
    case EwOp::log: return log(a);
    case EwOp::neg: return neg(a);
    case EwOp::tanh: return tanh(a);
    case EwOp::relu: return relu(a);
    case EwOp::softplus: return softplus(a);
  }
  throw ConfigError("elementwise: unknown op kind");
}

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckEntry {
  std::string param;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  bool pass = true;

  const GradCheckEntry* worst() const {
    const GradCheckEntry* w = nullptr;
    for (const auto& e : entries) {
      if (!w || e.max_rel_err > w->max_rel_err) w = &e;
    }
    return w;
  }
};

// Compares reverse-mode gradients of f against central finite differences
// (f(p+h) - f(p-h)) / 2h, coordinate by coordinate. f must rebuild its
// computation from the live parameter tensors on every call and must be
// deterministic (any noise fixed beforehand).
inline GradCheckReport grad_check(
    const std::function<Tensor()>& f,
    const std::vector<std::pair<std::string, Tensor>>& params, double h = 1e-5,
    double tol = 1e-4) {
  if (h <= 0.0) throw ConfigError("grad_check: step size must be positive");
  for (const auto& [nm, p] : params) {
    if (!p.defined() || !p.requires_grad()) {
      throw ConfigError("grad_check: parameter '" + nm +
                        "' must be a defined requires_grad tensor");
    }
  }
  std::vector<std::vector<double>> analytic;
  {
    for (auto& [nm, p] : params) {
      Tensor t = p;
      t.zero_grad();
    }
    Graph g;
    Tensor loss = f();
    if (loss.numel() != 1) {
      throw ShapeError("grad_check: f must return a scalar");
    }
    if (!std::isfinite(loss.item())) {
      throw NumericError("grad_check: non-finite loss at base point");
    }
    g.backward(loss);
    for (const auto& [nm, p] : params) {
      analytic.push_back(p.has_grad() ? p.grad()
                                      : std::vector<double>(p.numel(), 0.0));
    }
  }

  auto eval = [&](const std::string& where) {
    NoGradGuard ng;
    double v = f().item();
    if (!std::isfinite(v)) {
      throw NumericError("grad_check: non-finite value at " + where);
    }
    return v;
  };

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi].second;
    GradCheckEntry entry;
    entry.param = params[pi].first;
    auto& vals = p.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + h;
      double fp = eval(entry.param + "[" + std::to_string(i) + "]+h");
      vals[i] = orig - h;
      double fm = eval(entry.param + "[" + std::to_string(i) + "]-h");
      vals[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[pi][i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-6});
      const double rel = std::fabs(a - numeric) / denom;
      if (rel > entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.worst_index = i;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    entry.pass = entry.max_rel_err <= tol;
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

inline void zero_grads(const std::vector<Tensor>& params) {
  for (auto p : params) p.zero_grad();
}

inline double grad_l2_norm(const std::vector<Tensor>& params) {
  double acc = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) acc += g * g;
  }
  return std::sqrt(acc);
}

// Sets requires_grad=false on a parameter set for the current scope. Ops
// recorded while the freeze is active bake the frozen flags into their
// backward closures, so no gradient reaches these parameters even if
// backward() runs after the guard is released.
class ParamFreeze {
 public:
  explicit ParamFreeze(std::vector<Tensor> params) : params_(std::move(params)) {
    saved_.reserve(params_.size());
    for (auto& p : params_) {
      saved_.push_back(p.requires_grad());
      p.set_requires_grad(false);
    }
  }
  ~ParamFreeze() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      params_[i].set_requires_grad(saved_[i]);
    }
  }
  ParamFreeze(const ParamFreeze&) = delete;
  ParamFreeze& operator=(const ParamFreeze&) = delete;

 private:
  std::vector<Tensor> params_;
  std::vector<bool> saved_;
};

}  // namespace advae
