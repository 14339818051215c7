#pragma once

#include "sggnn/ggnn.hpp"
#include "sggnn/linalg.hpp"

#include <cmath>
#include <vector>

namespace sggnn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline void validate(const AdamConfig& cfg) {
  require(cfg.learning_rate > 0.0, "adam: learning rate must be positive");
  require(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0,
          "adam: decay factors must lie in [0, 1)");
  require(cfg.epsilon > 0.0, "adam: epsilon must be positive");
}

struct OptimizerState {
  AdamConfig config;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  long step = 0;
};

/// Moments shaped like the given parameter list, step count 0.
inline OptimizerState make_optimizer(const std::vector<Matrix>& params, const AdamConfig& cfg = {}) {
  validate(cfg);
  OptimizerState s;
  s.config = cfg;
  for (const auto& p : params) {
    s.first_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
    s.second_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
  return s;
}

/// Bias-corrected adaptive-moment update, in place.
inline void adam_step(OptimizerState& s, std::vector<Matrix*> params, const std::vector<Matrix>& grads) {
  require(params.size() == grads.size() && params.size() == s.first_moment.size(),
          "adam: parameter and gradient counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i]->rows() == grads[i].rows() && params[i]->cols() == grads[i].cols() &&
                s.first_moment[i].rows() == grads[i].rows() && s.first_moment[i].cols() == grads[i].cols(),
            "adam: shape mismatch");
  }
  const auto& c = s.config;
  s.step += 1;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = s.first_moment[i];
    auto& v = s.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * grads[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grads[i].cwiseProduct(grads[i]);
    const auto m_hat = m.array() / correction1;
    const auto v_hat = v.array() / correction2;
    params[i]->array() -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
  }
}

inline std::vector<Matrix*> parameter_pointers(NetworkParams& net) {
  std::vector<Matrix*> out;
  for_each_param(net, [&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

inline std::vector<Matrix> parameter_values(const NetworkParams& net) {
  std::vector<Matrix> out;
  for_each_param(net, [&](const std::string&, const Matrix& m) { out.push_back(m); });
  return out;
}

inline OptimizerState make_optimizer(const NetworkParams& net, const AdamConfig& cfg = {}) {
  return make_optimizer(parameter_values(net), cfg);
}

/// grads in for_each_param order.
inline void adam_step(OptimizerState& s, NetworkParams& net, const std::vector<Matrix>& grads) {
  adam_step(s, parameter_pointers(net), grads);
}

}  // namespace sggnn
