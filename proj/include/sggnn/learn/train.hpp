#pragma once

#include "sggnn/ggnn.hpp"
#include "sggnn/learn/adam.hpp"
#include "sggnn/learn/dagger.hpp"
#include "sggnn/learn/dataset.hpp"
#include "sggnn/learn/loss.hpp"
#include "sggnn/learn/tape.hpp"
#include "sggnn/parallel.hpp"
#include "sggnn/stability.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace sggnn {

struct TrainConfig {
  NetworkShape shape;
  int epochs = 120;
  AdamConfig adam;
  RegularizerConfig regularizer;
  bool stable = true;  // false: the penalty is left out of the loss
  int batch_size = 8;
  int window = 0;  // BPTT truncation in steps; 0 is the full horizon
  int dagger_every = 20;
  int dagger_rollouts = 4;
  double s_bar = 0.0;  // 0: default bound for the largest team in the data
  std::uint64_t seed = 0;
  int threads = 1;
};

inline void validate(const TrainConfig& cfg) {
  require(cfg.epochs >= 0, "train: negative epoch count");
  require(cfg.batch_size >= 1, "train: batch size must be positive");
  require(cfg.window >= 0, "train: negative window");
  require(cfg.dagger_every >= 0 && cfg.dagger_rollouts >= 0, "train: negative DAGGER settings");
  require(cfg.s_bar == 0.0 || cfg.s_bar >= 1.0, "train: s_bar must be 0 (default) or at least 1");
  validate(cfg.adam);
  validate(cfg.regularizer);
}

struct EpochRecord {
  int epoch = 0;  // 1-based
  double loss = 0.0;  // mean window objective
  double train_mse = 0.0;
  double penalty = 0.0;  // penalty of the end-of-epoch margins
  double validation_mse = 0.0;
  std::vector<double> iss_margins;
  std::vector<double> diss_margins;
  bool verdict_diss = false;
  std::size_t train_size = 0;
  bool dagger = false;
};

struct TrainingReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0: the initialization
  bool aborted = false;
  std::string abort_reason;
  double s_bar = 0.0;
  double s_k_bar = 0.0;
  std::optional<StabilityCertificate> certificate;
};

struct TrainResult {
  NetworkParams params;
  TrainingReport report;
  Dataset data;  // including DAGGER samples
};

inline nlohmann::json to_json(const EpochRecord& e) {
  return {{"epoch", e.epoch},
          {"loss", e.loss},
          {"train_mse", e.train_mse},
          {"penalty", e.penalty},
          {"validation_mse", e.validation_mse},
          {"A_margins", e.iss_margins},
          {"A_delta_margins", e.diss_margins},
          {"verdict_diss", e.verdict_diss},
          {"train_size", e.train_size},
          {"dagger", e.dagger}};
}

struct SupportBounds {
  double s_bar = 1.0;
  double s_k_bar = 1.0;
};

inline int largest_team(const Dataset& data) {
  int n = 1;
  for (const auto* split : {&data.train, &data.validation, &data.test})
    for (const auto& s : *split) n = std::max(n, s.agents());
  return n;
}

inline SupportBounds training_bounds(const TrainConfig& cfg, const Dataset& data) {
  const double s = cfg.s_bar > 0.0 ? cfg.s_bar : default_support_bound(cfg.shape.support, largest_team(data));
  return {std::max(1.0, s), stacked_shift_norm_bound(std::max(1.0, s), cfg.shape.k_order)};
}

struct WindowGradient {
  double loss = 0.0;
  double mse = 0.0;
  std::vector<Matrix> grads;  // for_each_param order
};

/// Teacher-forced forward over steps [t0, t1) of a batch, recorded on a tape.
/// states holds the detached recurrent states at t0 and is advanced to t1.
inline WindowGradient window_gradient(const NetworkParams& net, const Batch& batch, int t0, int t1,
                                      std::vector<Matrix>& states, const SupportBounds& bounds,
                                      const std::optional<RegularizerConfig>& regularizer) {
  require(0 <= t0 && t0 < t1 && t1 <= batch.steps(), "window: bad step range");
  Tape tape;
  const auto vnet = transform_params<Var>(net, [&](const Matrix& m) { return tape.variable(m); });
  std::vector<Var> vstates;
  for (const auto& s : states) vstates.push_back(tape.constant(s));
  std::vector<Var> predicted;
  std::vector<Matrix> expert;
  for (int t = t0; t < t1; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    auto out = deep_forward(vnet, batch.supports[ts], vstates, tape.constant(batch.features[ts]));
    vstates = std::move(out.states);
    predicted.push_back(out.control);
    expert.push_back(batch.targets[ts]);
  }
  std::vector<Var> margins;
  if (regularizer) {
    for (const auto& l : vnet.layers) margins.push_back(diss_margin(l, bounds.s_bar, bounds.s_k_bar));
  }
  const Var mse = imitation_loss(predicted, expert, std::vector<Var>{}, std::nullopt);
  const Var loss = regularizer ? mse + stability_penalty(margins, *regularizer) : mse;
  tape.backward(loss);

  WindowGradient out;
  out.loss = loss.scalar();
  out.mse = mse.scalar();
  for_each_param(vnet, [&](const std::string&, const Var& v) { out.grads.push_back(tape.gradient(v)); });
  for (std::size_t i = 0; i < states.size(); ++i) states[i] = vstates[i].value();
  return out;
}

/// Teacher-forced imitation MSE over whole trajectories, no penalty.
inline double imitation_mse(const NetworkParams& net, const std::vector<Sample>& samples) {
  double sse = 0.0;
  double count = 0.0;
  for (const auto& s : samples) {
    NetworkRunner runner(net, s.agents());
    for (int t = 0; t < s.steps(); ++t) {
      const auto ts = static_cast<std::size_t>(t);
      const Matrix u = runner.step(support_matrix(s.graphs[ts], net.meta.support), s.features[ts]);
      sse += (u - s.targets[ts]).squaredNorm();
      count += static_cast<double>(u.size());
    }
  }
  return count > 0.0 ? sse / count : std::numeric_limits<double>::quiet_NaN();
}

inline std::vector<int> team_sizes_of(const std::vector<Sample>& samples) {
  std::set<int> sizes;
  for (const auto& s : samples) sizes.insert(s.agents());
  return {sizes.begin(), sizes.end()};
}

/// Minibatch BPTT with Adam, DAGGER rounds every dagger_every epochs (not
/// after the last), a certificate per epoch. Returns the parameters with the
/// lowest validation MSE (training MSE when there is no validation split); in
/// stable mode only epochs whose margins are within the penalty slack
/// compete, falling back to the final epoch. `on_epoch` sees every record.
inline TrainResult train(const Dataset& data, const TrainConfig& cfg,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  validate(cfg);
  require(!data.train.empty() || cfg.epochs == 0, "train: empty training split");
  for (const auto& s : data.train) validate(s);
  for (const auto& s : data.validation) validate(s);

  TrainResult result;
  result.data = data;
  std::mt19937_64 init_rng(derive_seed(cfg.seed, 0));
  std::mt19937_64 batch_rng(derive_seed(cfg.seed, 1));
  const auto bounds = training_bounds(cfg, data);
  NetworkShape shape = cfg.shape;
  shape.s_bar = bounds.s_bar;
  NetworkParams net = init_network(shape, init_rng);
  result.params = net;
  result.report.s_bar = bounds.s_bar;
  result.report.s_k_bar = bounds.s_k_bar;
  if (cfg.epochs == 0) {
    result.report.certificate = certify(net, bounds.s_bar, bounds.s_k_bar);
    return result;
  }

  const std::optional<RegularizerConfig> regularizer =
      cfg.stable ? std::optional<RegularizerConfig>(cfg.regularizer) : std::nullopt;
  auto opt = make_optimizer(net, cfg.adam);
  const bool use_validation = !data.validation.empty();
  double best_metric = std::numeric_limits<double>::infinity();
  bool have_best = false;
  NetworkParams last_good = net;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch + 1;
    double loss_sum = 0.0;
    double mse_sum = 0.0;
    int windows = 0;
    try {
      for (const auto& members : batch_indices(result.data.train, cfg.batch_size, batch_rng)) {
        const Batch batch = make_batch(result.data.train, members, net.meta.support);
        auto states = zero_states(net, batch.agents);
        const int T = batch.steps();
        const int W = cfg.window > 0 ? cfg.window : T;
        for (int t0 = 0; t0 < T; t0 += W) {
          const auto g = window_gradient(net, batch, t0, std::min(T, t0 + W), states, bounds, regularizer);
          if (!std::isfinite(g.loss)) throw NonFiniteError(0, "loss");
          adam_step(opt, net, g.grads);
          loss_sum += g.loss;
          mse_sum += g.mse;
          windows += 1;
        }
      }
      for (const auto& p : parameter_values(net)) {
        if (!p.allFinite()) throw NonFiniteError(0, "adam_step");
      }
    } catch (const NonFiniteError& e) {
      result.report.aborted = true;
      result.report.abort_reason = "epoch " + std::to_string(epoch + 1) + ": " + e.what();
      net = last_good;
      break;
    }
    last_good = net;

    const auto cert = certify(net, bounds.s_bar, bounds.s_k_bar);
    rec.loss = loss_sum / std::max(windows, 1);
    rec.train_mse = mse_sum / std::max(windows, 1);
    bool within_slack = true;
    for (const auto& l : cert.layers) {
      rec.iss_margins.push_back(l.A_margin);
      rec.diss_margins.push_back(l.A_delta_margin);
      within_slack = within_slack && l.A_delta_margin <= 1.0 + cfg.regularizer.epsilon;
    }
    rec.penalty = stability_penalty(rec.diss_margins, cfg.regularizer);
    rec.verdict_diss = cert.verdict_diss;
    rec.validation_mse = use_validation ? imitation_mse(net, result.data.validation) : rec.train_mse;

    const bool eligible = !cfg.stable || within_slack;
    const double metric = rec.validation_mse;
    if (eligible && std::isfinite(metric) && metric < best_metric) {
      best_metric = metric;
      have_best = true;
      result.params = net;
      result.report.best_epoch = rec.epoch;
    }

    if (cfg.dagger_every > 0 && (epoch + 1) % cfg.dagger_every == 0 && epoch + 1 < cfg.epochs &&
        cfg.dagger_rollouts > 0) {
      DaggerConfig dc;
      dc.rollouts = cfg.dagger_rollouts;
      dc.team_sizes = team_sizes_of(result.data.train);
      dc.flocking = result.data.train.front().scenario.config;
      dc.seed = derive_seed(cfg.seed, 2);
      dc.round = (epoch + 1) / cfg.dagger_every;
      dc.threads = cfg.threads;
      result.data = dagger_round(net, std::move(result.data), dc);
      rec.dagger = true;
    }
    rec.train_size = result.data.train.size();
    result.report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  if (!have_best && !result.report.epochs.empty()) {
    result.params = net;
    result.report.best_epoch = result.report.epochs.back().epoch;
  }
  result.report.certificate = certify(result.params, bounds.s_bar, bounds.s_k_bar);
  return result;
}

}  // namespace sggnn
