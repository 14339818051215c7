#pragma once

#include "sggnn/ggnn.hpp"
#include "sggnn/graph.hpp"
#include "sggnn/linalg.hpp"

#include <json.hpp>

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

namespace sggnn {

// Closed-form margins. The matrix norms are stacked_tap_norm for filter banks,
// max_abs for biases; s_bar bounds inf_norm(S) and s_k_bar bounds
// inf_norm([I, S, ..., S^K]).

template <class M>
auto iss_margin(const BasicLayerParams<M>& p, double s_k_bar) {
  const auto g = gate_bounds(p, s_k_bar);
  return g.state_gate * s_k_bar * tap_norm(p.A);
}

/// The s-bar slots are evaluated with the stacked-shift bound s_k_bar; s_bar
/// is only checked and reported.
template <class M>
auto diss_margin(const BasicLayerParams<M>& p, double s_bar, double s_k_bar) {
  require(s_bar >= 1.0 && s_k_bar >= 1.0, "diss margin: support bounds must be at least 1");
  const double s = s_k_bar;
  const auto g = gate_bounds(p, s_k_bar);
  const auto a = tap_norm(p.A);
  const auto b = tap_norm(p.B);
  return g.state_gate * s * a + (0.25 * s * s) * (tap_norm(p.A_hat) * a) + (0.25 * s * s) * (tap_norm(p.A_tilde) * b);
}

struct InputGains {
  double B_gain = 0.0;        // input gain inside the ISS bound
  double B_delta_gain = 0.0;  // input-difference gain inside the dISS bound
  double W_gain = 0.0;        // support-difference gain inside the dISS bound
};

inline InputGains input_gains(const LayerParams& p, double s_bar, double s_k_bar) {
  require(s_bar >= 1.0 && s_k_bar >= 1.0, "input gains: support bounds must be at least 1");
  const double s = s_k_bar;
  const auto g = gate_bounds(p, s_k_bar);
  const double a = tap_norm(p.A);
  const double b = tap_norm(p.B);
  const double a_hat = tap_norm(p.A_hat);
  const double b_hat = tap_norm(p.B_hat);
  const double a_tilde = tap_norm(p.A_tilde);
  const double b_tilde = tap_norm(p.B_tilde);
  InputGains out;
  out.B_gain = g.input_gate * s_k_bar * b;
  out.B_delta_gain = g.input_gate * s * b + 0.25 * s * s * b_hat * a + 0.25 * s * s * b_tilde * b;
  out.W_gain = g.state_gate * a + g.input_gate * b + 0.25 * s * a * (a_hat + b_hat) + 0.25 * s * b * (a_tilde + b_tilde);
  return out;
}

struct LayerCertificate {
  double A_margin = 0.0;
  double A_delta_margin = 0.0;
  double B_gain = 0.0;
  double B_delta_gain = 0.0;
  double W_gain = 0.0;
  double sigma_hat = 0.0;
  double sigma_tilde = 0.0;
};

struct StabilityCertificate {
  std::vector<LayerCertificate> layers;
  double s_bar = 0.0;
  double s_k_bar = 0.0;
  bool verdict_iss = true;
  bool verdict_diss = true;
  std::vector<int> iss_violations;   // layers with A_margin > 1
  std::vector<int> diss_violations;  // layers with A_delta_margin > 1
  Matrix cascade;                    // lower-triangular M_delta
  std::vector<double> cascade_input;    // gain of the shared input difference per layer
  std::vector<double> cascade_support;  // gain of the support difference per layer
};

/// Lower-triangular cascade matrix: diagonal A_delta^i, entry (i, j < i) is
/// A_delta^j times the product of B_delta^h for h = j+1..i.
inline Matrix cascade_matrix(const std::vector<LayerCertificate>& layers) {
  const auto m = static_cast<Eigen::Index>(layers.size());
  Matrix out = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    out(i, i) = layers[static_cast<std::size_t>(i)].A_delta_margin;
    for (Eigen::Index j = 0; j < i; ++j) {
      double v = layers[static_cast<std::size_t>(j)].A_delta_margin;
      for (Eigen::Index h = j + 1; h <= i; ++h) v *= layers[static_cast<std::size_t>(h)].B_delta_gain;
      out(i, j) = v;
    }
  }
  return out;
}

inline StabilityCertificate certify(const NetworkParams& net, double s_bar, double s_k_bar) {
  validate(net);
  StabilityCertificate c;
  c.s_bar = s_bar;
  c.s_k_bar = s_k_bar;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& p = net.layers[i];
    const auto g = gate_bounds(p, s_k_bar);
    const auto gains = input_gains(p, s_bar, s_k_bar);
    LayerCertificate l;
    l.A_margin = iss_margin(p, s_k_bar);
    l.A_delta_margin = diss_margin(p, s_bar, s_k_bar);
    l.B_gain = gains.B_gain;
    l.B_delta_gain = gains.B_delta_gain;
    l.W_gain = gains.W_gain;
    l.sigma_hat = g.state_gate;
    l.sigma_tilde = g.input_gate;
    if (l.A_margin > 1.0) c.iss_violations.push_back(static_cast<int>(i));
    if (l.A_delta_margin > 1.0) c.diss_violations.push_back(static_cast<int>(i));
    c.layers.push_back(l);
  }
  c.verdict_iss = c.iss_violations.empty();
  c.verdict_diss = c.diss_violations.empty();
  c.cascade = cascade_matrix(c.layers);
  double input = 1.0;
  double support = 0.0;
  for (const auto& l : c.layers) {
    input *= l.B_delta_gain;
    support = l.B_delta_gain * support + l.W_gain;
    c.cascade_input.push_back(input);
    c.cascade_support.push_back(support);
  }
  return c;
}

/// Certificate against the bounds recorded in the parameters (or the default
/// bound for the support kind and team size when none is recorded).
inline StabilityCertificate certify(const NetworkParams& net, int max_team_size) {
  const double s_bar =
      net.meta.s_bar > 0.0 ? net.meta.s_bar : default_support_bound(net.meta.support, max_team_size);
  return certify(net, std::max(1.0, s_bar), stacked_shift_norm_bound(s_bar, net.meta.k_order));
}

inline nlohmann::json to_json(const StabilityCertificate& c) {
  nlohmann::json j;
  j["s_bar"] = c.s_bar;
  j["s_K_bar"] = c.s_k_bar;
  j["verdict_iss"] = c.verdict_iss;
  j["verdict_diss"] = c.verdict_diss;
  j["iss_violations"] = c.iss_violations;
  j["diss_violations"] = c.diss_violations;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : c.layers) {
    j["layers"].push_back({{"A_margin", l.A_margin},
                           {"A_delta_margin", l.A_delta_margin},
                           {"B_gain", l.B_gain},
                           {"B_delta_gain", l.B_delta_gain},
                           {"W_gain", l.W_gain},
                           {"sigma_q_hat", l.sigma_hat},
                           {"sigma_q_tilde", l.sigma_tilde}});
  }
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < c.cascade.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(c.cascade.cols()));
    for (Eigen::Index k = 0; k < c.cascade.cols(); ++k) row[static_cast<std::size_t>(k)] = c.cascade(r, k);
    rows.push_back(row);
  }
  j["cascade_matrix"] = rows;
  j["cascade_input_gain"] = c.cascade_input;
  j["cascade_support_gain"] = c.cascade_support;
  return j;
}

inline void write_table(std::ostream& os, const StabilityCertificate& c) {
  std::ostringstream s;
  s << std::setprecision(6);
  s << "assumed bounds: |S| <= " << c.s_bar << ", |S_K| <= " << c.s_k_bar << "\n";
  s << std::left << std::setw(7) << "layer" << std::setw(13) << "A" << std::setw(13) << "A_delta" << std::setw(13)
    << "B" << std::setw(13) << "B_delta" << std::setw(13) << "W" << std::setw(13) << "sigma_hat"
    << "sigma_tilde\n";
  for (std::size_t i = 0; i < c.layers.size(); ++i) {
    const auto& l = c.layers[i];
    s << std::setw(7) << i << std::setw(13) << l.A_margin << std::setw(13) << l.A_delta_margin << std::setw(13)
      << l.B_gain << std::setw(13) << l.B_delta_gain << std::setw(13) << l.W_gain << std::setw(13) << l.sigma_hat
      << l.sigma_tilde << "\n";
  }
  s << "ISS: " << (c.verdict_iss ? "certified" : "not certified") << "\n";
  s << "incremental ISS: " << (c.verdict_diss ? "certified" : "not certified");
  if (!c.verdict_diss) {
    s << " (layers";
    for (int i : c.diss_violations) s << " " << i;
    s << ")";
  }
  s << "\n";
  os << s.str();
}

// ---------------------------------------------------------------------------
// Training regularizer

struct RegularizerConfig {
  double rho_minus = 0.01;
  double rho_plus = 1.0;
  double epsilon = 0.05;
};

inline void validate(const RegularizerConfig& cfg) {
  require(cfg.rho_minus >= 0.0 && cfg.rho_plus >= 0.0, "regularizer: weights must be nonnegative");
  require(cfg.rho_minus <= cfg.rho_plus, "regularizer: rho_minus must not exceed rho_plus");
  require(cfg.epsilon >= 0.0, "regularizer: epsilon must be nonnegative");
}

/// rho_minus * min(0, m - 1 - eps) + rho_plus * max(0, m - 1 - eps), summed over layers.
template <class T>
T stability_penalty(const std::vector<T>& margins, const RegularizerConfig& cfg) {
  validate(cfg);
  require(!margins.empty(), "stability penalty: no margins");
  auto term = [&](const T& m) {
    const auto excess = m - (1.0 + cfg.epsilon);
    return cfg.rho_minus * negative_part(excess) + cfg.rho_plus * positive_part(excess);
  };
  T total = term(margins.front());
  for (std::size_t i = 1; i < margins.size(); ++i) total = total + term(margins[i]);
  return total;
}

// ---------------------------------------------------------------------------
// Runtime audits of the geometric bounds

struct BoundCheck {
  bool holds = true;
  int first_violation = -1;  // time index of the first violated step
  double worst_slack = std::numeric_limits<double>::infinity();  // min over t of rhs - lhs
};

constexpr double kBoundSlack = 1e-9;

/// |x(t)| <= A^t |x(0)| + (B |u| + |b|) / (1 - A) for every t.
inline BoundCheck check_iss_bound(const std::vector<double>& state_norms, double a_margin, double b_gain,
                                  double input_norm, double bias_norm) {
  if (!(a_margin < 1.0)) throw Error("no contraction certificate");
  BoundCheck out;
  if (state_norms.empty()) return out;
  const double x0 = state_norms.front();
  const double offset = (b_gain * input_norm + bias_norm) / (1.0 - a_margin);
  double power = 1.0;
  for (std::size_t t = 0; t < state_norms.size(); ++t) {
    const double slack = power * x0 + offset + kBoundSlack - state_norms[t];
    out.worst_slack = std::min(out.worst_slack, slack);
    if (slack < 0.0 && out.holds) {
      out.holds = false;
      out.first_violation = static_cast<int>(t);
    }
    power *= a_margin;
  }
  return out;
}

/// |dx(t)| <= A_d^t |dx(0)| + (B_d |du| + W |dS_K|) / (1 - A_d) for every t.
inline BoundCheck check_diss_bound(const std::vector<double>& difference_norms, double a_delta, double b_delta,
                                   double w_gain, double input_difference, double support_difference) {
  if (!(a_delta < 1.0)) throw Error("no contraction certificate");
  BoundCheck out;
  if (difference_norms.empty()) return out;
  const double d0 = difference_norms.front();
  const double offset = (b_delta * input_difference + w_gain * support_difference) / (1.0 - a_delta);
  double power = 1.0;
  for (std::size_t t = 0; t < difference_norms.size(); ++t) {
    const double slack = power * d0 + offset + kBoundSlack - difference_norms[t];
    out.worst_slack = std::min(out.worst_slack, slack);
    if (slack < 0.0 && out.holds) {
      out.holds = false;
      out.first_violation = static_cast<int>(t);
    }
    power *= a_delta;
  }
  return out;
}

/// Per-step difference norm between two state trajectories.
inline std::vector<double> difference_norms(const std::vector<Matrix>& x1, const std::vector<Matrix>& x2) {
  require(x1.size() == x2.size(), "difference norms: trajectory lengths differ");
  std::vector<double> out;
  out.reserve(x1.size());
  for (std::size_t t = 0; t < x1.size(); ++t) out.push_back(max_abs(x1[t] - x2[t]));
  return out;
}

}  // namespace sggnn
