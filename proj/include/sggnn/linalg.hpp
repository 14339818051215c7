#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sggnn {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using Vec2 = Eigen::Vector2d;

/// Library-wide error type. Messages carry the contract that was violated.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

/// Induced infinity norm: maximum absolute row sum. Empty matrices have norm 0.
inline double inf_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

/// Largest absolute entry. This is the norm used for graph signals and biases
/// (a signal lies in the unit ball when every entry is in [-1, 1]).
inline double max_abs(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().maxCoeff();
}

/// Norm of a tap stack [H_0, ..., H_K]^T: the largest absolute column sum over
/// all taps. It bounds |(z H_k)_{if}| <= max_abs(z) * norm for every tap.
inline double stacked_tap_norm(const std::vector<Matrix>& taps) {
  double best = 0.0;
  for (const auto& h : taps) {
    if (h.size() == 0) continue;
    best = std::max(best, h.cwiseAbs().colwise().sum().maxCoeff());
  }
  return best;
}

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double positive_part(double z) { return z > 0.0 ? z : 0.0; }
inline double negative_part(double z) { return z < 0.0 ? z : 0.0; }

// Elementwise and product primitives on plain matrices. The same names are
// overloaded for tape variables (learn/tape.hpp) so forward code can be
// written once as a template.

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul: dimension mismatch");
  return a * b;
}

/// Left multiplication by a (constant) graph support.
inline Matrix shift(const Matrix& support, const Matrix& x) {
  require(support.cols() == x.rows(), "shift: dimension mismatch");
  return support * x;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard: dimension mismatch");
  return a.cwiseProduct(b);
}

/// Adds a 1 x F row to every row of an N x F matrix (the 1_N (x) b bias).
inline Matrix add_bias(const Matrix& a, const Matrix& bias) {
  require(bias.rows() == 1 && bias.cols() == a.cols(), "add_bias: dimension mismatch");
  return a.rowwise() + bias.row(0);
}

inline Matrix logistic(const Matrix& a) {
  return a.unaryExpr([](double z) { return logistic(z); });
}

inline Matrix tanh_act(const Matrix& a) {
  return a.unaryExpr([](double z) { return std::tanh(z); });
}

inline Matrix scale(const Matrix& a, double s) { return a * s; }

inline const Matrix& value_of(const Matrix& m) { return m; }

/// Vertically stacks matrices with equal column counts.
inline Matrix vstack(const std::vector<Matrix>& blocks) {
  if (blocks.empty()) return {};
  Eigen::Index rows = 0;
  const Eigen::Index cols = blocks.front().cols();
  for (const auto& b : blocks) {
    require(b.cols() == cols, "vstack: column mismatch");
    rows += b.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return out;
}

/// Block-diagonal assembly of square blocks.
inline Matrix block_diagonal(const std::vector<Matrix>& blocks) {
  Eigen::Index n = 0;
  for (const auto& b : blocks) n += b.rows();
  Matrix out = Matrix::Zero(n, n);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    require(b.rows() == b.cols(), "block_diagonal: blocks must be square");
    out.block(at, at, b.rows(), b.cols()) = b;
    at += b.rows();
  }
  return out;
}

}  // namespace sggnn
