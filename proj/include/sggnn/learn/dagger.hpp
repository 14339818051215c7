#pragma once

#include "sggnn/flocking.hpp"
#include "sggnn/ggnn.hpp"
#include "sggnn/learn/dataset.hpp"
#include "sggnn/parallel.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace sggnn {

struct DaggerConfig {
  int rollouts = 4;
  std::vector<int> team_sizes{4};
  flocking::FlockingConfig flocking;
  flocking::GeometryConfig geometry;
  int comm_delay = 0;
  std::uint64_t seed = 0;
  int round = 1;
  int threads = 1;
};

/// Rolls the policy out on fresh scenarios and labels every visited state
/// with the expert control, failures included. Rollout i of round r draws
/// from derive_seed(derive_seed(seed, r), i).
inline std::vector<Sample> dagger_samples(const flocking::Policy& policy, const DaggerConfig& cfg) {
  require(cfg.rollouts >= 0, "dagger: negative rollout count");
  require(!cfg.team_sizes.empty(), "dagger: no team sizes");
  const std::uint64_t round_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(cfg.round));
  std::vector<Sample> out(static_cast<std::size_t>(cfg.rollouts));
  parallel_for(out.size(), cfg.threads, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(round_seed, i));
    const auto pick = std::uniform_int_distribution<std::size_t>(0, cfg.team_sizes.size() - 1)(rng);
    const auto sc = flocking::sample_scenario(rng, cfg.team_sizes[pick], cfg.flocking, cfg.geometry);
    flocking::RolloutOptions opts;
    opts.comm_delay = cfg.comm_delay;
    opts.label_with_expert = true;
    out[i] = sample_from_trajectory(sc, flocking::rollout(policy, sc, opts), cfg.round);
  });
  std::erase_if(out, [](const Sample& s) { return s.steps() == 0; });
  return out;
}

/// The dataset with the round's samples appended to its training split.
inline Dataset dagger_round(const flocking::Policy& policy, Dataset data, const DaggerConfig& cfg) {
  for (auto& s : dagger_samples(policy, cfg)) data.train.push_back(std::move(s));
  return data;
}

inline Dataset dagger_round(const NetworkParams& net, Dataset data, const DaggerConfig& cfg) {
  return dagger_round(flocking::Policy::learned(net), std::move(data), cfg);
}

}  // namespace sggnn
