#pragma once

// Reverse-mode gradients against central finite differences of the plain
// matrix code path.

#include "oracles.hpp"

#include "sggnn/flocking.hpp"
#include "sggnn/ggnn.hpp"
#include "sggnn/learn/dataset.hpp"
#include "sggnn/learn/loss.hpp"
#include "sggnn/learn/tape.hpp"
#include "sggnn/learn/train.hpp"
#include "sggnn/stability.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace gradcheck {

using sggnn::Matrix;
using sggnn::Tape;
using sggnn::Var;

struct Result {
  std::string name;
  double worst = 0.0;
};

using VarFn = std::function<Var(Tape&, const std::vector<Var>&)>;
using MatFn = std::function<Matrix(const std::vector<Matrix>&)>;

/// Objective sum(W .* op(inputs)) for a fixed random W; worst relative error
/// over every input coordinate.
inline double check_op(const std::vector<Matrix>& inputs, const VarFn& fv, const MatFn& fm, std::mt19937_64& rng) {
  const Matrix out = fm(inputs);
  const Matrix w = oracle::random_matrix(out.rows(), out.cols(), rng);
  Tape tape;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.variable(m));
  const Var obj = sggnn::sum(fv(tape, vars) * tape.constant(w));
  tape.backward(obj);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto f = [&](const Matrix& theta) {
      auto args = inputs;
      args[i] = theta;
      return fm(args).cwiseProduct(w).sum();
    };
    worst = std::max(worst, oracle::relative_error(tape.gradient(vars[i]), oracle::finite_difference(f, inputs[i])));
  }
  return worst;
}

/// Entries uniform in +-[0.1, 1], away from the kinks of max/min at 0.
inline Matrix signed_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = sign(rng) ? mag(rng) : -mag(rng);
  return m;
}

inline std::vector<Result> check_primitives(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto rnd = [&](Eigen::Index r, Eigen::Index c) { return oracle::random_matrix(r, c, rng); };
  std::vector<Result> out;
  auto add = [&](const std::string& name, std::vector<Matrix> in, VarFn fv, MatFn fm) {
    out.push_back({name, check_op(in, fv, fm, rng)});
  };
  const Matrix support = rnd(4, 4);
  const Matrix target = rnd(4, 3);

  add("matmul", {rnd(4, 3), rnd(3, 5)}, [](Tape&, auto& v) { return sggnn::matmul(v[0], v[1]); },
      [](auto& m) { return Matrix(m[0] * m[1]); });
  add("shift", {rnd(4, 3)}, [&](Tape&, auto& v) { return sggnn::shift(support, v[0]); },
      [&](auto& m) { return Matrix(support * m[0]); });
  add("add", {rnd(4, 3), rnd(4, 3)}, [](Tape&, auto& v) { return v[0] + v[1]; },
      [](auto& m) { return Matrix(m[0] + m[1]); });
  add("sub", {rnd(4, 3), rnd(4, 3)}, [](Tape&, auto& v) { return v[0] - v[1]; },
      [](auto& m) { return Matrix(m[0] - m[1]); });
  add("add_const", {rnd(4, 3)}, [](Tape&, auto& v) { return v[0] + 0.7; },
      [](auto& m) { return Matrix(m[0].array() + 0.7); });
  add("scale", {rnd(4, 3)}, [](Tape&, auto& v) { return sggnn::scale(v[0], -1.3); },
      [](auto& m) { return Matrix(m[0] * -1.3); });
  add("scalar_mul", {rnd(1, 1), rnd(4, 3)}, [](Tape&, auto& v) { return v[0] * v[1]; },
      [](auto& m) { return Matrix(m[1] * m[0](0, 0)); });
  add("mul", {rnd(4, 3), rnd(4, 3)}, [](Tape&, auto& v) { return sggnn::hadamard(v[0], v[1]); },
      [](auto& m) { return Matrix(m[0].cwiseProduct(m[1])); });
  add("add_bias", {rnd(4, 3), rnd(1, 3)}, [](Tape&, auto& v) { return sggnn::add_bias(v[0], v[1]); },
      [](auto& m) { return sggnn::add_bias(m[0], m[1]); });
  add("logistic", {rnd(4, 3) * 3.0}, [](Tape&, auto& v) { return sggnn::logistic(v[0]); },
      [](auto& m) { return sggnn::logistic(m[0]); });
  add("tanh", {rnd(4, 3) * 2.0}, [](Tape&, auto& v) { return sggnn::tanh_act(v[0]); },
      [](auto& m) { return sggnn::tanh_act(m[0]); });
  add("positive_part", {signed_matrix(4, 3, rng)}, [](Tape&, auto& v) { return sggnn::positive_part(v[0]); },
      [](auto& m) { return Matrix(m[0].cwiseMax(0.0)); });
  add("negative_part", {signed_matrix(4, 3, rng)}, [](Tape&, auto& v) { return sggnn::negative_part(v[0]); },
      [](auto& m) { return Matrix(m[0].cwiseMin(0.0)); });
  add("sum", {rnd(4, 3)}, [](Tape&, auto& v) { return sggnn::sum(v[0]); },
      [](auto& m) { return Matrix::Constant(1, 1, m[0].sum()); });
  add("sum_squared_error", {rnd(4, 3)}, [&](Tape&, auto& v) { return sggnn::sum_squared_error(v[0], target); },
      [&](auto& m) { return Matrix::Constant(1, 1, (m[0] - target).squaredNorm()); });
  add("max_abs", {rnd(4, 3)}, [](Tape&, auto& v) { return sggnn::max_abs(v[0]); },
      [](auto& m) { return Matrix::Constant(1, 1, oracle::max_entry(m[0])); });
  add("stacked_tap_norm", {rnd(3, 4), rnd(3, 4), rnd(3, 4)},
      [](Tape&, auto& v) { return sggnn::stacked_tap_norm(std::vector<Var>(v.begin(), v.end())); },
      [](auto& m) { return Matrix::Constant(1, 1, oracle::stacked_column_norm(m)); });
  return out;
}

/// A small network and a two-sample batch with a short horizon.
struct ComposedCase {
  sggnn::NetworkParams net;
  sggnn::Batch batch;
  std::vector<Matrix> states;  // carried states at the window start
  sggnn::SupportBounds bounds;
  sggnn::RegularizerConfig regularizer;
  int t0 = 1;
  int t1 = 4;
};

inline ComposedCase composed_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  sggnn::NetworkShape shape;
  shape.encoder_widths = {6};
  shape.state_width = 4;
  shape.n_layers = 2;
  shape.k_order = 2;
  shape.readout_width = 5;
  shape.head_widths = {};
  ComposedCase c;
  c.net = sggnn::init_network(shape, rng);
  sggnn::flocking::FlockingConfig cfg;
  cfg.horizon = 0.05;
  std::vector<sggnn::Sample> samples;
  for (int i = 0; i < 2; ++i) {
    const auto sc = sggnn::flocking::sample_scenario(rng, 3 + i, cfg);
    samples.push_back(sggnn::sample_from_trajectory(sc, sggnn::flocking::rollout(sggnn::flocking::Policy::expert(), sc)));
  }
  c.batch = sggnn::make_batch(samples, {0, 1}, c.net.meta.support);
  for (const auto& l : c.net.layers) c.states.push_back(oracle::random_matrix(c.batch.agents, l.b.cols(), rng, -0.9, 0.9));
  c.bounds = {1.0 + std::sqrt(3.0), sggnn::stacked_shift_norm_bound(1.0 + std::sqrt(3.0), shape.k_order)};
  return c;
}

/// The window objective evaluated on the matrix code path.
inline double composed_objective(const sggnn::NetworkParams& net, const ComposedCase& c) {
  auto states = c.states;
  std::vector<Matrix> pred;
  std::vector<Matrix> expert;
  for (int t = c.t0; t < c.t1; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    auto out = sggnn::deep_forward(net, c.batch.supports[ts], states, c.batch.features[ts]);
    states = out.states;
    pred.push_back(out.control);
    expert.push_back(c.batch.targets[ts]);
  }
  std::vector<double> margins;
  for (const auto& l : net.layers) margins.push_back(sggnn::diss_margin(l, c.bounds.s_bar, c.bounds.s_k_bar));
  return sggnn::imitation_loss(pred, expert, margins, std::optional(c.regularizer));
}

/// Worst relative error over every parameter coordinate of the composed loss.
inline double check_composed(std::uint64_t seed) {
  const auto c = composed_case(seed);
  auto states = c.states;
  const auto g = sggnn::window_gradient(c.net, c.batch, c.t0, c.t1, states, c.bounds, std::optional(c.regularizer));
  double worst = 0.0;
  std::size_t index = 0;
  auto net = c.net;
  sggnn::for_each_param(net, [&](const std::string&, Matrix& m) {
    const Matrix saved = m;
    auto f = [&](const Matrix& theta) {
      m = theta;
      return composed_objective(net, c);
    };
    worst = std::max(worst, oracle::relative_error(g.grads[index], oracle::finite_difference(f, saved)));
    m = saved;
    ++index;
  });
  return worst;
}

}  // namespace gradcheck
