#pragma once

// Matrix-valued reverse-mode tape. Every primitive records its output value,
// the ids of its inputs and a closure that pushes the output gradient back.
// Primitive names mirror the plain-matrix overloads in linalg.hpp so the
// templated forward code in ggnn.hpp and stability.hpp runs on either.

#include "sggnn/linalg.hpp"

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace sggnn {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Raised when a recorded operation produces NaN or infinity.
class NonFiniteError : public Error {
 public:
  NonFiniteError(std::size_t index, std::string op)
      : Error("non-finite value produced by operation #" + std::to_string(index) + " (" + op + ")"),
        op_index(index),
        op_name(std::move(op)) {}

  std::size_t op_index;
  std::string op_name;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  Var variable(Matrix value) { return push("variable", std::move(value), true, nullptr); }
  Var constant(Matrix value) { return push("constant", std::move(value), false, nullptr); }

  Var record(std::string_view op, Matrix value, std::initializer_list<Var> inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || nodes_[in.id()].requires_grad;
    return push(op, std::move(value), needs, needs ? std::move(backward) : nullptr);
  }

  Var record(std::string_view op, Matrix value, const std::vector<Var>& inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || nodes_[in.id()].requires_grad;
    return push(op, std::move(value), needs, needs ? std::move(backward) : nullptr);
  }

  /// Seeds d(output)/d(output) = 1 and replays the tape in reverse.
  void backward(const Var& output) {
    require(output.tape() == this, "backward: variable belongs to another tape");
    require(output.rows() == 1 && output.cols() == 1, "backward: output must be a scalar");
    grad_buffer(output.id())(0, 0) += 1.0;
    for (std::size_t i = output.id() + 1; i-- > 0;) {
      auto& node = nodes_[i];
      if (node.backward && node.grad.size() != 0) node.backward(*this, i);
    }
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::string_view op(std::size_t id) const { return nodes_[id].op; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient accumulated at a node (zeros if nothing reached it).
  Matrix gradient(const Var& v) const {
    const auto& node = nodes_[v.id()];
    if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
    return node.grad;
  }

  const Matrix& upstream(std::size_t id) const { return nodes_[id].grad; }

  void accumulate(const Var& target, const Matrix& g) {
    if (!nodes_[target.id()].requires_grad) return;
    grad_buffer(target.id()) += g;
  }

  Matrix& grad_buffer(std::size_t id) {
    auto& node = nodes_[id];
    if (node.grad.size() == 0) node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
    return node.grad;
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::string_view op;
    bool requires_grad = false;
    Backward backward;
  };

  Var push(std::string_view op, Matrix value, bool requires_grad, Backward backward) {
    const std::size_t id = nodes_.size();
    if (!value.allFinite()) throw NonFiniteError(id, std::string(op));
    nodes_.push_back({std::move(value), Matrix(), op, requires_grad, std::move(backward)});
    return Var(this, id);
  }

  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

inline const Matrix& value_of(const Var& v) { return v.value(); }

namespace detail {
inline void same_tape(const Var& a, const Var& b) {
  require(a.tape() != nullptr && a.tape() == b.tape(), "tape: operands live on different tapes");
}
inline void same_shape(const Var& a, const Var& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), std::string(op) + ": dimension mismatch");
}
inline bool is_scalar(const Var& v) { return v.rows() == 1 && v.cols() == 1; }
}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  require(a.cols() == b.rows(), "matmul: dimension mismatch");
  return a.tape()->record("matmul", a.value() * b.value(), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.upstream(self);
    if (t.requires_grad(a.id())) t.grad_buffer(a.id()).noalias() += g * b.value().transpose();
    if (t.requires_grad(b.id())) t.grad_buffer(b.id()).noalias() += a.value().transpose() * g;
  });
}

/// Graph shift S x with a constant support.
inline Var shift(const Matrix& support, const Var& x) {
  require(support.cols() == x.rows(), "shift: dimension mismatch");
  return x.tape()->record("shift", support * x.value(), {x}, [support, x](Tape& t, std::size_t self) {
    t.grad_buffer(x.id()).noalias() += support.transpose() * t.upstream(self);
  });
}

inline Var operator+(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  detail::same_shape(a, b, "add");
  return a.tape()->record("add", a.value() + b.value(), {a, b}, [a, b](Tape& t, std::size_t self) {
    t.accumulate(a, t.upstream(self));
    t.accumulate(b, t.upstream(self));
  });
}

inline Var operator-(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  detail::same_shape(a, b, "sub");
  return a.tape()->record("sub", a.value() - b.value(), {a, b}, [a, b](Tape& t, std::size_t self) {
    t.accumulate(a, t.upstream(self));
    t.accumulate(b, -t.upstream(self));
  });
}

inline Var operator+(const Var& a, double c) {
  return a.tape()->record("add_const", (a.value().array() + c).matrix(), {a},
                          [a](Tape& t, std::size_t self) { t.accumulate(a, t.upstream(self)); });
}
inline Var operator+(double c, const Var& a) { return a + c; }
inline Var operator-(const Var& a, double c) { return a + (-c); }

inline Var scale(const Var& a, double s) {
  return a.tape()->record("scale", a.value() * s, {a},
                          [a, s](Tape& t, std::size_t self) { t.accumulate(a, t.upstream(self) * s); });
}
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }

/// Elementwise product; a 1 x 1 operand broadcasts.
inline Var operator*(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  if (detail::is_scalar(a) && !detail::is_scalar(b)) {
    return a.tape()->record("scalar_mul", b.value() * a.scalar(), {a, b}, [a, b](Tape& t, std::size_t self) {
      const Matrix& g = t.upstream(self);
      if (t.requires_grad(a.id())) t.grad_buffer(a.id())(0, 0) += g.cwiseProduct(b.value()).sum();
      t.accumulate(b, g * a.scalar());
    });
  }
  if (detail::is_scalar(b) && !detail::is_scalar(a)) return b * a;
  detail::same_shape(a, b, "mul");
  return a.tape()->record("mul", a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.upstream(self);
    t.accumulate(a, g.cwiseProduct(b.value()));
    t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

inline Var hadamard(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  detail::same_shape(a, b, "hadamard");
  return a * b;
}

inline Var add_bias(const Var& a, const Var& bias) {
  detail::same_tape(a, bias);
  require(bias.rows() == 1 && bias.cols() == a.cols(), "add_bias: dimension mismatch");
  Matrix out = a.value().rowwise() + bias.value().row(0);
  return a.tape()->record("add_bias", std::move(out), {a, bias}, [a, bias](Tape& t, std::size_t self) {
    const Matrix& g = t.upstream(self);
    t.accumulate(a, g);
    if (t.requires_grad(bias.id())) t.grad_buffer(bias.id()) += g.colwise().sum();
  });
}

inline Var logistic(const Var& a) {
  Matrix y = logistic(a.value());
  return a.tape()->record("logistic", y, {a}, [a](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    t.accumulate(a, t.upstream(self).cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

inline Var tanh_act(const Var& a) {
  return a.tape()->record("tanh", tanh_act(a.value()), {a}, [a](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    t.accumulate(a, t.upstream(self).cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

/// max(0, z) elementwise; the subgradient at 0 is 0.
inline Var positive_part(const Var& a) {
  Matrix y = a.value().cwiseMax(0.0);
  return a.tape()->record("positive_part", std::move(y), {a}, [a](Tape& t, std::size_t self) {
    Matrix mask = (a.value().array() > 0.0).cast<double>().matrix();
    t.accumulate(a, t.upstream(self).cwiseProduct(mask));
  });
}

/// min(0, z) elementwise; the subgradient at 0 is 0.
inline Var negative_part(const Var& a) {
  Matrix y = a.value().cwiseMin(0.0);
  return a.tape()->record("negative_part", std::move(y), {a}, [a](Tape& t, std::size_t self) {
    Matrix mask = (a.value().array() < 0.0).cast<double>().matrix();
    t.accumulate(a, t.upstream(self).cwiseProduct(mask));
  });
}

inline Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record("sum", std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const double g = t.upstream(self)(0, 0);
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g));
  });
}

/// sum of (pred - target)^2 over every entry.
inline Var sum_squared_error(const Var& pred, const Matrix& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "squared error: dimension mismatch");
  Matrix out(1, 1);
  out(0, 0) = (pred.value() - target).squaredNorm();
  return pred.tape()->record("sum_squared_error", std::move(out), {pred}, [pred, target](Tape& t, std::size_t self) {
    const double g = t.upstream(self)(0, 0);
    t.accumulate(pred, (pred.value() - target) * (2.0 * g));
  });
}

namespace detail {
inline double sign(double z) { return z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0); }
}  // namespace detail

/// Largest absolute entry. The gradient flows through the first maximizing
/// entry in row-major order.
inline Var max_abs(const Var& a) {
  const Matrix& v = a.value();
  Eigen::Index best_r = 0;
  Eigen::Index best_c = 0;
  double best = v.size() ? -1.0 : 0.0;
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      if (std::abs(v(r, c)) > best) {
        best = std::abs(v(r, c));
        best_r = r;
        best_c = c;
      }
    }
  }
  Matrix out(1, 1);
  out(0, 0) = v.size() ? best : 0.0;
  return a.tape()->record("max_abs", std::move(out), {a}, [a, best_r, best_c](Tape& t, std::size_t self) {
    if (a.value().size() == 0 || !t.requires_grad(a.id())) return;
    t.grad_buffer(a.id())(best_r, best_c) += t.upstream(self)(0, 0) * detail::sign(a.value()(best_r, best_c));
  });
}

/// Largest absolute column sum over a list of taps (the stacked-tap norm).
/// The gradient flows through the first maximizing (tap, column) pair.
inline Var stacked_tap_norm(const std::vector<Var>& taps) {
  require(!taps.empty(), "stacked_tap_norm: no taps");
  std::size_t best_k = 0;
  Eigen::Index best_col = 0;
  double best = -1.0;
  for (std::size_t k = 0; k < taps.size(); ++k) {
    detail::same_tape(taps[0], taps[k]);
    const Matrix& h = taps[k].value();
    for (Eigen::Index c = 0; c < h.cols(); ++c) {
      const double s = h.col(c).cwiseAbs().sum();
      if (s > best) {
        best = s;
        best_k = k;
        best_col = c;
      }
    }
  }
  Matrix out(1, 1);
  out(0, 0) = std::max(best, 0.0);
  const Var target = taps[best_k];
  return target.tape()->record(
      "stacked_tap_norm", std::move(out), taps, [target, best_col](Tape& t, std::size_t self) {
        if (!t.requires_grad(target.id()) || target.value().cols() == 0) return;
        const double g = t.upstream(self)(0, 0);
        auto col = t.grad_buffer(target.id()).col(best_col);
        const auto h = target.value().col(best_col);
        for (Eigen::Index r = 0; r < h.size(); ++r) col(r) += g * detail::sign(h(r));
      });
}

}  // namespace sggnn
