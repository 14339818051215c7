#pragma once

#include "sggnn/flocking.hpp"
#include "sggnn/graph.hpp"
#include "sggnn/linalg.hpp"
#include "sggnn/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace sggnn {

/// One expert-labeled trajectory: the state visited at every step with its
/// features, communication graph and expert control.
struct Sample {
  flocking::Scenario scenario;
  std::vector<flocking::SwarmState> states;  // t = 0..T-1
  std::vector<Matrix> features;
  std::vector<Graph> graphs;
  std::vector<Matrix> targets;
  int origin = 0;  // 0 for generated data, r for DAGGER round r

  int steps() const { return static_cast<int>(targets.size()); }
  int agents() const { return scenario.initial.size(); }
};

inline void validate(const Sample& s) {
  const auto T = s.targets.size();
  require(T > 0, "sample: empty trajectory");
  require(s.states.size() == T && s.features.size() == T && s.graphs.size() == T,
          "sample: features, graphs and expert controls must share the horizon");
  for (std::size_t t = 0; t < T; ++t) {
    require(s.features[t].rows() == s.agents() && s.targets[t].rows() == s.agents() && s.targets[t].cols() == 2 &&
                s.graphs[t].n_agents() == s.agents(),
            "sample: agent count mismatch at step " + std::to_string(t));
  }
}

/// Keeps every visited state (the final, unlabeled state is dropped).
inline Sample sample_from_trajectory(const flocking::Scenario& sc, const flocking::Trajectory& traj, int origin = 0) {
  require(static_cast<int>(traj.expert_controls.size()) == traj.steps(), "sample: trajectory lacks expert labels");
  Sample s;
  s.scenario = sc;
  s.states.assign(traj.states.begin(), traj.states.begin() + traj.steps());
  s.features = traj.features;
  s.graphs = traj.graphs;
  s.targets = traj.expert_controls;
  s.origin = origin;
  return s;
}

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> validation;
  std::vector<Sample> test;

  std::size_t size() const { return train.size() + validation.size() + test.size(); }
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

/// Rounded proportions; the test split takes the remainder.
inline SplitSizes split_sizes(std::size_t n, double train_fraction = 0.7, double validation_fraction = 0.1) {
  require(train_fraction >= 0.0 && validation_fraction >= 0.0 && train_fraction + validation_fraction <= 1.0,
          "split: fractions must be nonnegative and sum to at most 1");
  SplitSizes s;
  s.train = std::min(n, static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n))));
  s.validation =
      std::min(n - s.train, static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n))));
  s.test = n - s.train - s.validation;
  return s;
}

inline Dataset split_dataset(std::vector<Sample> samples, double train_fraction = 0.7,
                             double validation_fraction = 0.1) {
  const auto sizes = split_sizes(samples.size(), train_fraction, validation_fraction);
  Dataset d;
  auto it = std::make_move_iterator(samples.begin());
  d.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes.train));
  it += static_cast<std::ptrdiff_t>(sizes.train);
  d.validation.assign(it, it + static_cast<std::ptrdiff_t>(sizes.validation));
  it += static_cast<std::ptrdiff_t>(sizes.validation);
  d.test.assign(it, std::make_move_iterator(samples.end()));
  return d;
}

struct GenerationConfig {
  int count = 120;
  std::vector<int> team_sizes{4, 6, 10, 12, 15};
  flocking::FlockingConfig flocking;
  flocking::GeometryConfig geometry;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Scenario i draws its team size and geometry from derive_seed(seed, i).
inline flocking::Scenario generated_scenario(const GenerationConfig& cfg, std::size_t index) {
  require(!cfg.team_sizes.empty(), "generation: no team sizes");
  std::mt19937_64 rng(derive_seed(cfg.seed, index));
  const auto pick = std::uniform_int_distribution<std::size_t>(0, cfg.team_sizes.size() - 1)(rng);
  return flocking::sample_scenario(rng, cfg.team_sizes[pick], cfg.flocking, cfg.geometry);
}

/// Expert rollouts, in index order.
inline std::vector<Sample> generate_samples(const GenerationConfig& cfg) {
  require(cfg.count >= 0, "generation: negative count");
  std::vector<Sample> out(static_cast<std::size_t>(cfg.count));
  parallel_for(out.size(), cfg.threads, [&](std::size_t i) {
    const auto sc = generated_scenario(cfg, i);
    out[i] = sample_from_trajectory(sc, flocking::rollout(flocking::Policy::expert(), sc));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Minibatches: samples of equal horizon merged into one disjoint graph.

struct Batch {
  std::vector<std::size_t> members;
  std::vector<SupportMatrix> supports;  // block diagonal, t = 0..T-1
  std::vector<Matrix> features;         // stacked agents
  std::vector<Matrix> targets;
  Eigen::Index agents = 0;

  int steps() const { return static_cast<int>(targets.size()); }
};

inline Batch make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& members,
                        SupportKind kind) {
  require(!members.empty(), "batch: no members");
  const int T = samples[members.front()].steps();
  Batch b;
  b.members = members;
  for (auto m : members) {
    require(samples[m].steps() == T, "batch: members must share the horizon");
    b.agents += samples[m].agents();
  }
  for (int t = 0; t < T; ++t) {
    std::vector<Matrix> supports;
    std::vector<Matrix> features;
    std::vector<Matrix> targets;
    for (auto m : members) {
      const auto& s = samples[m];
      supports.push_back(support_matrix(s.graphs[static_cast<std::size_t>(t)], kind).entries);
      features.push_back(s.features[static_cast<std::size_t>(t)]);
      targets.push_back(s.targets[static_cast<std::size_t>(t)]);
    }
    b.supports.push_back({block_diagonal(supports), kind});
    b.features.push_back(vstack(features));
    b.targets.push_back(vstack(targets));
  }
  return b;
}

/// Shuffled partition into batches of at most batch_size samples that share
/// a horizon. The batch order is shuffled as well.
inline std::vector<std::vector<std::size_t>> batch_indices(const std::vector<Sample>& samples, int batch_size,
                                                           std::mt19937_64& rng) {
  require(batch_size >= 1, "batch size must be positive");
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::map<int, std::vector<std::size_t>> by_horizon;
  for (auto i : order) by_horizon[samples[i].steps()].push_back(i);
  std::vector<std::vector<std::size_t>> batches;
  for (auto& [steps, idx] : by_horizon) {
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(batch_size)) {
      const auto end = std::min(idx.size(), start + static_cast<std::size_t>(batch_size));
      batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                           idx.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

// ---------------------------------------------------------------------------
// Files. Features and graphs are recomputed from the stored states on load.

inline nlohmann::json to_json(const Sample& s) {
  nlohmann::json states = nlohmann::json::array();
  nlohmann::json targets = nlohmann::json::array();
  for (std::size_t t = 0; t < s.states.size(); ++t) {
    states.push_back({{"r", flocking::matrix_to_json(s.states[t].r)}, {"v", flocking::matrix_to_json(s.states[t].v)}});
    targets.push_back(flocking::matrix_to_json(s.targets[t]));
  }
  return {{"scenario", flocking::to_json(s.scenario)},
          {"origin", s.origin},
          {"steps", s.steps()},
          {"states", states},
          {"expert_controls", targets}};
}

inline Sample sample_from_json(const nlohmann::json& j) {
  Sample s;
  s.scenario = flocking::scenario_from_json(j.at("scenario"));
  s.origin = j.value("origin", 0);
  const auto& states = j.at("states");
  const auto& targets = j.at("expert_controls");
  require(states.size() == targets.size(), "sample file: states and expert controls differ in length");
  const auto& cfg = s.scenario.config;
  for (std::size_t t = 0; t < states.size(); ++t) {
    flocking::SwarmState st = s.scenario.initial;
    st.r = flocking::matrix_from_json(states[t].at("r"), 2);
    st.v = flocking::matrix_from_json(states[t].at("v"), 2);
    flocking::validate(st);
    s.graphs.push_back(build_proximity_graph(st.r, cfg.comm_radius));
    s.features.push_back(flocking::input_features(st, cfg));
    s.targets.push_back(flocking::matrix_from_json(targets[t], 2));
    s.states.push_back(std::move(st));
  }
  require(j.at("steps").get<int>() == s.steps(), "sample file: step count mismatch");
  validate(s);
  return s;
}

}  // namespace sggnn
