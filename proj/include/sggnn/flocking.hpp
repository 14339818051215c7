#pragma once

#include "sggnn/ggnn.hpp"
#include "sggnn/graph.hpp"
#include "sggnn/linalg.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace sggnn::flocking {

constexpr int kFeatureWidth = 10;

struct FailureThresholds {
  double collision_distance = 0.1;       // any pair closer than this
  double leader_divergence_factor = 3.0;  // leader-target distance over its initial value
  double team_split_factor = 10.0;        // any pair farther than this times the initial diameter
};

struct FlockingConfig {
  double comm_radius = 4.0;     // R
  double sensing_radius = 1.0;  // R_CA
  double horizon = 2.5;         // s
  double dt = 0.01;             // s
  double saturation = 5.0;      // m/s^2, componentwise
  double leader_gain = 0.2;     // W_p
  /// Compare |r|^2 against R_CA^2 instead of R_CA (the printed condition).
  bool squared_sensing_threshold = false;
  FailureThresholds failure;
};

inline int horizon_steps(const FlockingConfig& cfg) {
  const double steps = cfg.horizon / cfg.dt;
  const double rounded = std::round(steps);
  require(std::abs(steps - rounded) < 1e-9 * std::max(1.0, steps), "horizon must be an integer number of steps");
  return static_cast<int>(rounded);
}

inline void validate(const FlockingConfig& cfg) {
  require(cfg.sensing_radius > 0.0 && cfg.comm_radius > cfg.sensing_radius,
          "flocking config: need R > R_CA > 0");
  require(cfg.dt > 0.0 && cfg.horizon > 0.0, "flocking config: dt and horizon must be positive");
  require(cfg.saturation > 0.0, "flocking config: saturation must be positive");
  (void)horizon_steps(cfg);
}

struct SwarmState {
  Matrix r;  // N x 2 positions, m
  Matrix v;  // N x 2 velocities, m/s
  int leader = 0;
  Vec2 target = Vec2::Zero();

  int size() const { return static_cast<int>(r.rows()); }
};

inline void validate(const SwarmState& s) {
  require(s.r.cols() == 2 && s.v.cols() == 2 && s.r.rows() == s.v.rows(), "swarm state: r and v must be N x 2");
  require(s.r.rows() >= 1, "swarm state: empty team");
  require(s.leader >= 0 && s.leader < s.size(), "swarm state: leader index out of range");
  require(s.r.allFinite() && s.v.allFinite() && s.target.allFinite(), "swarm state: non-finite entries");
}

struct Scenario {
  SwarmState initial;
  FlockingConfig config;
};

/// Componentwise clip to [-limit, limit].
inline Matrix saturate(const Matrix& u, double limit) { return u.cwiseMax(-limit).cwiseMin(limit); }

/// r+ = r + dt v, v+ = v + dt u.
inline SwarmState step_dynamics(const SwarmState& s, const Matrix& u, double dt) {
  require(u.rows() == s.r.rows() && u.cols() == 2, "step_dynamics: control must be N x 2");
  SwarmState next = s;
  next.r = s.r + dt * s.v;
  next.v = s.v + dt * u;
  return next;
}

inline bool within_sensing(double squared_distance, const FlockingConfig& cfg) {
  const double limit = cfg.squared_sensing_threshold ? cfg.sensing_radius * cfg.sensing_radius : cfg.sensing_radius;
  return squared_distance <= limit;
}

/// Gradient of the collision-avoidance potential for one pair, r_ij = r_i - r_j.
inline Vec2 ca_gradient(const Vec2& r_ij, const FlockingConfig& cfg) {
  const double sq = r_ij.squaredNorm();
  if (sq == 0.0) throw Error("coincident agents");
  if (!within_sensing(sq, cfg)) return Vec2::Zero();
  return -r_ij / (sq * sq) - r_ij / sq;
}

inline Vec2 ca_gradient(const Vec2& r_ij, double sensing_radius) {
  FlockingConfig cfg;
  cfg.sensing_radius = sensing_radius;
  return ca_gradient(r_ij, cfg);
}

/// Agents j != i with |r_i - r_j| <= R_CA.
inline std::vector<std::vector<int>> sensing_sets(const SwarmState& s, double sensing_radius) {
  const int n = s.size();
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && (s.r.row(i) - s.r.row(j)).norm() <= sensing_radius) out[static_cast<std::size_t>(i)].push_back(j);
  return out;
}

/// Followers: -L v - sum grad CA; leader: -W_p (r_l - d) - sum grad CA. The CA
/// sum runs over the sensing set. Clipped to the saturation limit.
inline Matrix expert_control(const SwarmState& s, const Graph& graph, const FlockingConfig& cfg) {
  validate(s);
  require(graph.n_agents() == s.size(), "expert: graph size mismatch");
  const Matrix lap = support_matrix(graph, SupportKind::laplacian).entries;
  Matrix u = -lap * s.v;
  const Vec2 leader_pos = s.r.row(s.leader).transpose();
  u.row(s.leader) = (-cfg.leader_gain * (leader_pos - s.target)).transpose();
  const auto sets = sensing_sets(s, cfg.sensing_radius);
  for (int i = 0; i < s.size(); ++i) {
    for (int j : sets[static_cast<std::size_t>(i)]) {
      const Vec2 r_ij = (s.r.row(i) - s.r.row(j)).transpose();
      u.row(i) -= ca_gradient(r_ij, cfg).transpose();
    }
  }
  return saturate(u, cfg.saturation);
}

/// Per agent: [v, sum r/|r|^4, sum r/|r|^2, leader offset or 0, one-hot role].
inline Matrix input_features(const SwarmState& s, const std::vector<std::vector<int>>& sets) {
  validate(s);
  require(static_cast<int>(sets.size()) == s.size(), "features: one sensing set per agent");
  Matrix w = Matrix::Zero(s.size(), kFeatureWidth);
  for (int i = 0; i < s.size(); ++i) {
    w.block(i, 0, 1, 2) = s.v.row(i);
    for (int j : sets[static_cast<std::size_t>(i)]) {
      const Eigen::RowVector2d r_ij = s.r.row(i) - s.r.row(j);
      const double sq = r_ij.squaredNorm();
      if (sq == 0.0) throw Error("coincident agents");
      w.block(i, 2, 1, 2) += r_ij / (sq * sq);
      w.block(i, 4, 1, 2) += r_ij / sq;
    }
    if (i == s.leader) {
      w.block(i, 6, 1, 2) = s.r.row(i) - s.target.transpose();
      w(i, 8) = 1.0;
    } else {
      w(i, 9) = 1.0;
    }
  }
  return w;
}

inline Matrix input_features(const SwarmState& s, const FlockingConfig& cfg) {
  return input_features(s, sensing_sets(s, cfg.sensing_radius));
}

/// (1/N) sum_i |v_i - mean v|^2.
inline double flocking_cost(const Matrix& v) {
  require(v.rows() >= 1 && v.cols() == 2, "flocking cost: v must be N x 2");
  const Eigen::RowVector2d mean = v.colwise().mean();
  return (v.rowwise() - mean).rowwise().squaredNorm().sum() / static_cast<double>(v.rows());
}

enum class FailureReason { none, agent_collision, leader_divergence, team_split };

inline std::string to_string(FailureReason r) {
  switch (r) {
    case FailureReason::none: return "none";
    case FailureReason::agent_collision: return "agent_collision";
    case FailureReason::leader_divergence: return "leader_divergence";
    case FailureReason::team_split: return "team_split";
  }
  return "unknown";
}

inline FailureReason failure_reason_from_string(const std::string& s) {
  for (auto r : {FailureReason::none, FailureReason::agent_collision, FailureReason::leader_divergence,
                 FailureReason::team_split})
    if (to_string(r) == s) return r;
  throw Error("unknown failure reason '" + s + "'");
}

struct Trajectory {
  std::vector<SwarmState> states;      // t = 0..T
  std::vector<Matrix> controls;        // applied, t = 0..T-1
  std::vector<Matrix> expert_controls; // expert labels at each visited state (may be empty)
  std::vector<Matrix> features;        // t = 0..T-1
  std::vector<Graph> graphs;           // communication graph at t = 0..T-1
  std::vector<double> cost;            // J(v(t)), t = 0..T
  FailureReason failure = FailureReason::none;
  int failure_step = -1;

  int steps() const { return static_cast<int>(controls.size()); }
};

inline double squared_leader_distance(const SwarmState& s) {
  return (s.r.row(s.leader).transpose() - s.target).squaredNorm();
}

/// e_f / e_s: final over initial squared leader-target distance.
inline double leader_error(const Trajectory& traj) {
  require(!traj.states.empty(), "leader error: empty trajectory");
  const double e_s = squared_leader_distance(traj.states.front());
  if (e_s == 0.0) throw Error("degenerate scenario");
  return squared_leader_distance(traj.states.back()) / e_s;
}

inline double average_cost(const Trajectory& traj) {
  require(!traj.cost.empty(), "average cost: empty trajectory");
  double sum = 0.0;
  for (double j : traj.cost) sum += j;
  return sum / static_cast<double>(traj.cost.size());
}

inline double swarm_diameter(const Matrix& r) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < r.rows(); ++i)
    for (Eigen::Index j = i + 1; j < r.rows(); ++j) d = std::max(d, (r.row(i) - r.row(j)).norm());
  return d;
}

inline double min_separation(const Matrix& r) {
  double d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < r.rows(); ++i)
    for (Eigen::Index j = i + 1; j < r.rows(); ++j) d = std::min(d, (r.row(i) - r.row(j)).norm());
  return d;
}

inline FailureReason detect_failure(const SwarmState& s, const SwarmState& initial, const FailureThresholds& th) {
  if (s.size() >= 2 && min_separation(s.r) < th.collision_distance) return FailureReason::agent_collision;
  const double d0 = std::sqrt(squared_leader_distance(initial));
  if (std::sqrt(squared_leader_distance(s)) > th.leader_divergence_factor * d0) return FailureReason::leader_divergence;
  const double diameter0 = swarm_diameter(initial.r);
  if (s.size() >= 2 && swarm_diameter(s.r) > th.team_split_factor * diameter0) return FailureReason::team_split;
  return FailureReason::none;
}

// ---------------------------------------------------------------------------
// Policies and closed-loop rollout

enum class PolicyKind { expert, zero, network };

struct Policy {
  PolicyKind kind = PolicyKind::expert;
  const NetworkParams* network = nullptr;

  static Policy expert() { return {PolicyKind::expert, nullptr}; }
  static Policy zero() { return {PolicyKind::zero, nullptr}; }
  static Policy learned(const NetworkParams& net) { return {PolicyKind::network, &net}; }
};

struct RolloutOptions {
  /// 0: instantaneous exchanges; 1: every filter hop costs one step.
  int comm_delay = 0;
  /// Also record the expert's control at every visited state.
  bool label_with_expert = false;
};

/// Closed loop at dt. The graph is rebuilt from positions every step. Failures
/// are recorded and the run continues; exact overlap ends the run early.
inline Trajectory rollout(const Policy& policy, const Scenario& scenario, const RolloutOptions& opts = {}) {
  const auto& cfg = scenario.config;
  validate(cfg);
  validate(scenario.initial);
  require(opts.comm_delay == 0 || opts.comm_delay == 1, "rollout: comm_delay must be 0 or 1");
  require(policy.kind != PolicyKind::network || policy.network != nullptr, "rollout: network policy without weights");
  const int steps = horizon_steps(cfg);
  const int n = scenario.initial.size();

  std::optional<NetworkRunner> direct;
  std::optional<DelayedNetworkRunner> delayed;
  if (policy.kind == PolicyKind::network) {
    if (opts.comm_delay == 0) {
      direct.emplace(*policy.network, n);
    } else {
      delayed.emplace(*policy.network, n);
    }
  }

  Trajectory traj;
  SwarmState s = scenario.initial;
  traj.states.push_back(s);
  traj.cost.push_back(flocking_cost(s.v));
  auto note_failure = [&](FailureReason r, int t) {
    if (traj.failure == FailureReason::none && r != FailureReason::none) {
      traj.failure = r;
      traj.failure_step = t;
    }
  };
  note_failure(detect_failure(s, scenario.initial, cfg.failure), 0);

  for (int t = 0; t < steps; ++t) {
    Graph graph;
    Matrix features;
    Matrix expert;
    try {
      graph = build_proximity_graph(s.r, cfg.comm_radius);
      features = input_features(s, cfg);
      if (policy.kind == PolicyKind::expert || opts.label_with_expert) expert = expert_control(s, graph, cfg);
    } catch (const Error&) {
      note_failure(FailureReason::agent_collision, t);
      break;
    }
    Matrix u;
    switch (policy.kind) {
      case PolicyKind::expert: u = expert; break;
      case PolicyKind::zero: u = Matrix::Zero(n, 2); break;
      case PolicyKind::network: {
        const SupportMatrix support = support_matrix(graph, policy.network->meta.support);
        u = direct ? direct->step(support, features) : delayed->step(support, features);
        u = saturate(u, cfg.saturation);
        break;
      }
    }
    traj.graphs.push_back(std::move(graph));
    traj.features.push_back(std::move(features));
    if (opts.label_with_expert || policy.kind == PolicyKind::expert) traj.expert_controls.push_back(expert);
    traj.controls.push_back(u);
    s = step_dynamics(s, u, cfg.dt);
    traj.states.push_back(s);
    traj.cost.push_back(flocking_cost(s.v));
    note_failure(detect_failure(s, scenario.initial, cfg.failure), t + 1);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Scenario sampling

struct GeometryConfig {
  double min_spacing = 0.6;    // m
  double max_spacing = 1.0;    // m
  double max_speed = 2.0;      // m/s, per component
  double target_half_width = 10.0;  // m, target box around the leader
  int max_attempts = 100000;
};

/// Agents are placed one by one, each at a random distance in
/// [min_spacing, max_spacing] from an already placed agent and no closer than
/// min_spacing to any other, so every nearest-neighbor distance lies in the band.
inline Scenario sample_scenario(std::mt19937_64& rng, int n_agents, const FlockingConfig& cfg,
                                const GeometryConfig& geo = {}) {
  require(n_agents >= 1, "sample_scenario: need at least one agent");
  require(geo.min_spacing > 0.0 && geo.max_spacing >= geo.min_spacing, "sample_scenario: bad spacing band");
  validate(cfg);
  std::uniform_real_distribution<double> spacing(geo.min_spacing, geo.max_spacing);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> speed(-geo.max_speed, geo.max_speed);
  std::uniform_real_distribution<double> offset(-geo.target_half_width, geo.target_half_width);

  Scenario sc;
  sc.config = cfg;
  auto& s = sc.initial;
  s.r = Matrix::Zero(n_agents, 2);
  int attempts = 0;
  for (int i = 1; i < n_agents; ++i) {
    for (;;) {
      if (++attempts > geo.max_attempts) throw Error("sample_scenario: rejection budget exhausted");
      const int anchor = std::uniform_int_distribution<int>(0, i - 1)(rng);
      const double d = spacing(rng);
      const double a = angle(rng);
      const Eigen::RowVector2d p = s.r.row(anchor) + d * Eigen::RowVector2d(std::cos(a), std::sin(a));
      bool ok = true;
      for (int j = 0; j < i && ok; ++j) ok = (p - s.r.row(j)).norm() >= geo.min_spacing;
      if (ok) {
        s.r.row(i) = p;
        break;
      }
    }
  }
  s.v = Matrix(n_agents, 2);
  for (int i = 0; i < n_agents; ++i)
    for (int c = 0; c < 2; ++c) s.v(i, c) = speed(rng);
  s.leader = std::uniform_int_distribution<int>(0, n_agents - 1)(rng);
  for (int c = 0; c < 2; ++c) s.target(c) = s.r(s.leader, c) + offset(rng);
  return sc;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index cols) {
  require(j.is_array(), "expected an array of rows");
  Matrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    require(j[r].is_array() && static_cast<Eigen::Index>(j[r].size()) == cols, "ragged matrix rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = j[r][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline nlohmann::json to_json(const FlockingConfig& c) {
  return {{"comm_radius", c.comm_radius},
          {"sensing_radius", c.sensing_radius},
          {"horizon", c.horizon},
          {"dt", c.dt},
          {"saturation", c.saturation},
          {"leader_gain", c.leader_gain},
          {"squared_sensing_threshold", c.squared_sensing_threshold},
          {"collision_distance", c.failure.collision_distance},
          {"leader_divergence_factor", c.failure.leader_divergence_factor},
          {"team_split_factor", c.failure.team_split_factor}};
}

inline FlockingConfig flocking_config_from_json(const nlohmann::json& j) {
  FlockingConfig c;
  c.comm_radius = j.at("comm_radius").get<double>();
  c.sensing_radius = j.at("sensing_radius").get<double>();
  c.horizon = j.at("horizon").get<double>();
  c.dt = j.at("dt").get<double>();
  c.saturation = j.at("saturation").get<double>();
  c.leader_gain = j.at("leader_gain").get<double>();
  c.squared_sensing_threshold = j.at("squared_sensing_threshold").get<bool>();
  c.failure.collision_distance = j.at("collision_distance").get<double>();
  c.failure.leader_divergence_factor = j.at("leader_divergence_factor").get<double>();
  c.failure.team_split_factor = j.at("team_split_factor").get<double>();
  validate(c);
  return c;
}

inline nlohmann::json to_json(const SwarmState& s) {
  return {{"r", matrix_to_json(s.r)},
          {"v", matrix_to_json(s.v)},
          {"leader", s.leader},
          {"target", {s.target(0), s.target(1)}}};
}

inline SwarmState swarm_state_from_json(const nlohmann::json& j) {
  SwarmState s;
  s.r = matrix_from_json(j.at("r"), 2);
  s.v = matrix_from_json(j.at("v"), 2);
  s.leader = j.at("leader").get<int>();
  const auto& t = j.at("target");
  require(t.is_array() && t.size() == 2, "target must have two entries");
  s.target = Vec2(t[0].get<double>(), t[1].get<double>());
  validate(s);
  return s;
}

inline nlohmann::json to_json(const Scenario& sc) {
  return {{"initial", to_json(sc.initial)}, {"config", to_json(sc.config)}};
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  return {swarm_state_from_json(j.at("initial")), flocking_config_from_json(j.at("config"))};
}

/// Trajectory summary: horizon-averaged cost, leader error, failure.
inline nlohmann::json summary_json(const Trajectory& traj) {
  nlohmann::json j;
  j["steps"] = traj.steps();
  j["average_cost"] = average_cost(traj);
  j["initial_cost"] = traj.cost.front();
  j["final_cost"] = traj.cost.back();
  const double e_s = squared_leader_distance(traj.states.front());
  j["leader_error"] = e_s > 0.0 ? nlohmann::json(leader_error(traj)) : nlohmann::json(nullptr);
  j["failure"] = to_string(traj.failure);
  j["failure_step"] = traj.failure_step;
  return j;
}

/// One row per (t, agent): positions, velocities, applied control (empty at
/// the final state) and the team cost at t.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t,agent,rx,ry,vx,vy,ux,uy,J\n";
  os << std::setprecision(17);
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    const auto& s = traj.states[t];
    for (int i = 0; i < s.size(); ++i) {
      os << t << ',' << i << ',' << s.r(i, 0) << ',' << s.r(i, 1) << ',' << s.v(i, 0) << ',' << s.v(i, 1) << ',';
      if (t < traj.controls.size()) {
        os << traj.controls[t](i, 0) << ',' << traj.controls[t](i, 1);
      } else {
        os << ',';
      }
      os << ',' << traj.cost[t] << '\n';
    }
  }
}

}  // namespace sggnn::flocking
