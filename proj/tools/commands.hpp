#pragma once

// Subcommands of the sggnn tool. Every command takes a fully resolved
// RunConfig, writes its outputs under cfg.out together with config.json, and
// returns a process exit code.

#include "sggnn/flocking.hpp"
#include "sggnn/ggnn.hpp"
#include "sggnn/learn/dataset.hpp"
#include "sggnn/learn/train.hpp"
#include "sggnn/parallel.hpp"
#include "sggnn/serialization.hpp"
#include "sggnn/stability.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace sggnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kNotCertified = 1, kFailure = 2 };

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "out";
  int threads = 1;

  // simulation
  double comm_radius = 4.0;
  double sensing_radius = 1.0;
  double horizon = 2.5;
  double dt = 0.01;
  double saturation = 5.0;
  double leader_gain = 0.2;
  bool squared_sensing_threshold = false;
  double collision_distance = 0.1;
  double leader_divergence_factor = 3.0;
  double team_split_factor = 10.0;
  double min_spacing = 0.6;
  double max_spacing = 1.0;
  double max_speed = 2.0;
  double target_half_width = 10.0;

  // gen-data
  int count = 120;
  std::vector<int> team_sizes{4, 6, 10, 12, 15};
  double train_fraction = 0.7;
  double validation_fraction = 0.1;

  // train
  std::string dataset;
  std::string mode = "stable";
  int epochs = 120;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double rho_plus = 1.0;
  double rho_minus = 0.01;
  double epsilon = 0.05;
  int batch_size = 8;
  int window = 0;
  int dagger_every = 20;
  int dagger_rollouts = 4;
  int state_width = 50;
  int k_order = 2;
  int n_layers = 1;
  std::vector<int> encoder_widths{128, 128};
  int readout_width = 128;
  std::vector<int> head_widths{128};
  std::string support = "normalized_laplacian";
  double s_bar = 0.0;

  // certify, eval, simulate
  std::string weights;
  int max_team_size = 0;
  std::string policy = "network";
  std::vector<int> grid_team_sizes{4, 6, 10, 12, 15};
  std::vector<double> grid_comm_radii{4.0};
  std::vector<int> grid_delays{0};
  int trajectories = 40;
  int team_size = 4;
  int comm_delay = 0;
};

using FieldRef = std::variant<double*, int*, bool*, std::uint64_t*, std::string*, std::vector<int>*,
                              std::vector<double>*>;

struct Field {
  std::string key;
  FieldRef ref;
  std::string help;
};

inline std::vector<Field> fields(RunConfig& c) {
  return {
      {"seed", &c.seed, "RNG seed"},
      {"out", &c.out, "output directory"},
      {"threads", &c.threads, "worker threads for rollouts and grid cells"},
      {"comm_radius", &c.comm_radius, "communication radius R (m)"},
      {"sensing_radius", &c.sensing_radius, "collision-avoidance radius R_CA (m)"},
      {"horizon", &c.horizon, "trajectory length (s)"},
      {"dt", &c.dt, "time step (s)"},
      {"saturation", &c.saturation, "control limit per axis (m/s^2)"},
      {"leader_gain", &c.leader_gain, "leader target-seeking gain W_p"},
      {"squared_sensing_threshold", &c.squared_sensing_threshold, "compare |r|^2 with R_CA^2"},
      {"collision_distance", &c.collision_distance, "failure: pair closer than this (m)"},
      {"leader_divergence_factor", &c.leader_divergence_factor, "failure: leader distance over initial"},
      {"team_split_factor", &c.team_split_factor, "failure: pair distance over initial diameter"},
      {"min_spacing", &c.min_spacing, "initial nearest-neighbor distance, lower end (m)"},
      {"max_spacing", &c.max_spacing, "initial nearest-neighbor distance, upper end (m)"},
      {"max_speed", &c.max_speed, "initial speed per axis (m/s)"},
      {"target_half_width", &c.target_half_width, "target box half width around the leader (m)"},
      {"count", &c.count, "gen-data: number of trajectories"},
      {"team_sizes", &c.team_sizes, "gen-data: team sizes to draw from"},
      {"train_fraction", &c.train_fraction, "gen-data: training share"},
      {"validation_fraction", &c.validation_fraction, "gen-data: validation share"},
      {"dataset", &c.dataset, "train: dataset directory (gen-data output)"},
      {"mode", &c.mode, "train: stable (penalty on) or unstable (penalty off)"},
      {"epochs", &c.epochs, "train: epochs"},
      {"lr", &c.lr, "train: Adam learning rate"},
      {"beta1", &c.beta1, "train: Adam first-moment decay"},
      {"beta2", &c.beta2, "train: Adam second-moment decay"},
      {"adam_epsilon", &c.adam_epsilon, "train: Adam offset"},
      {"rho_plus", &c.rho_plus, "train: penalty weight above the slack"},
      {"rho_minus", &c.rho_minus, "train: penalty weight below the slack"},
      {"epsilon", &c.epsilon, "train: penalty slack"},
      {"batch_size", &c.batch_size, "train: trajectories per minibatch"},
      {"window", &c.window, "train: BPTT window in steps (0 = full horizon)"},
      {"dagger_every", &c.dagger_every, "train: epochs between DAGGER rounds (0 = off)"},
      {"dagger_rollouts", &c.dagger_rollouts, "train: rollouts per DAGGER round"},
      {"state_width", &c.state_width, "train: GGNN state width F"},
      {"k_order", &c.k_order, "train: filter order K"},
      {"n_layers", &c.n_layers, "train: GGNN layers M"},
      {"encoder_widths", &c.encoder_widths, "train: encoder hidden widths"},
      {"readout_width", &c.readout_width, "train: readout filter width"},
      {"head_widths", &c.head_widths, "train: head hidden widths"},
      {"support", &c.support, "train: adjacency, laplacian or normalized_laplacian"},
      {"s_bar", &c.s_bar, "assumed bound on inf_norm(S) (0 = default for the team size)"},
      {"weights", &c.weights, "weights file"},
      {"max_team_size", &c.max_team_size, "certify: team size for the default bound"},
      {"policy", &c.policy, "eval/simulate: network, expert or zero"},
      {"grid_team_sizes", &c.grid_team_sizes, "eval: team sizes"},
      {"grid_comm_radii", &c.grid_comm_radii, "eval: communication radii"},
      {"grid_delays", &c.grid_delays, "eval: communication delays (0 or 1)"},
      {"trajectories", &c.trajectories, "eval: rollouts per grid cell"},
      {"team_size", &c.team_size, "simulate: team size"},
      {"comm_delay", &c.comm_delay, "simulate: communication delay (0 or 1)"},
  };
}

inline json config_json(const RunConfig& cfg) {
  RunConfig c = cfg;
  json j = json::object();
  for (const auto& f : fields(c)) {
    std::visit([&](auto* p) { j[f.key] = *p; }, f.ref);
  }
  return j;
}

/// Applies every key of a JSON object; unknown keys and type mismatches throw.
inline void apply_json(RunConfig& c, const json& j) {
  if (!j.is_object()) throw Error("config: top level must be an object");
  auto table = fields(c);
  for (const auto& [key, value] : j.items()) {
    auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw Error("config: unknown key '" + key + "'");
    try {
      std::visit(
          [&](auto* p) {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, bool>) {
              if (!value.is_boolean()) throw Error("expected a boolean");
            } else if constexpr (std::is_same_v<T, std::string>) {
              if (!value.is_string()) throw Error("expected a string");
            } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
              if (!value.is_number_integer()) throw Error("expected an integer");
              if constexpr (std::is_same_v<T, std::uint64_t>) {
                if (value.is_number_integer() && !value.is_number_unsigned() && value.get<long long>() < 0)
                  throw Error("expected a nonnegative integer");
              }
            } else if constexpr (std::is_same_v<T, double>) {
              if (!value.is_number()) throw Error("expected a number");
            } else {
              if (!value.is_array()) throw Error("expected an array");
            }
            *p = value.get<T>();
          },
          it->ref);
    } catch (const json::exception& e) {
      throw Error("config: key '" + key + "': " + e.what());
    } catch (const Error& e) {
      throw Error("config: key '" + key + "': " + e.what());
    }
  }
}

/// Flag text to JSON: lists are comma separated, strings are taken verbatim.
inline json flag_value(const RunConfig& proto, const std::string& key, const std::string& text) {
  RunConfig c = proto;
  for (const auto& f : fields(c)) {
    if (f.key != key) continue;
    return std::visit(
        [&](auto* p) -> json {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, std::string>) {
            return text;
          } else if constexpr (std::is_same_v<T, std::vector<int>> || std::is_same_v<T, std::vector<double>>) {
            json arr = json::array();
            std::stringstream ss(text);
            std::string item;
            while (std::getline(ss, item, ',')) {
              try {
                arr.push_back(json::parse(item));
              } catch (const json::exception&) {
                throw Error("--" + key + ": '" + item + "' is not a number");
              }
            }
            return arr;
          } else {
            try {
              return json::parse(text);
            } catch (const json::exception&) {
              throw Error("--" + key + ": cannot parse '" + text + "'");
            }
          }
        },
        f.ref);
  }
  throw Error("unknown key '" + key + "'");
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("config file '" + path + "' is not valid JSON: " + e.what());
  }
  RunConfig c;
  apply_json(c, j);
  return c;
}

// ---------------------------------------------------------------------------
// Translation into module configurations

inline flocking::FlockingConfig flocking_config(const RunConfig& c) {
  flocking::FlockingConfig f;
  f.comm_radius = c.comm_radius;
  f.sensing_radius = c.sensing_radius;
  f.horizon = c.horizon;
  f.dt = c.dt;
  f.saturation = c.saturation;
  f.leader_gain = c.leader_gain;
  f.squared_sensing_threshold = c.squared_sensing_threshold;
  f.failure.collision_distance = c.collision_distance;
  f.failure.leader_divergence_factor = c.leader_divergence_factor;
  f.failure.team_split_factor = c.team_split_factor;
  flocking::validate(f);
  return f;
}

inline flocking::GeometryConfig geometry_config(const RunConfig& c) {
  flocking::GeometryConfig g;
  g.min_spacing = c.min_spacing;
  g.max_spacing = c.max_spacing;
  g.max_speed = c.max_speed;
  g.target_half_width = c.target_half_width;
  return g;
}

inline TrainConfig train_config(const RunConfig& c) {
  require(c.mode == "stable" || c.mode == "unstable", "mode must be 'stable' or 'unstable'");
  TrainConfig t;
  t.shape.raw_inputs = flocking::kFeatureWidth;
  t.shape.encoder_widths = c.encoder_widths;
  t.shape.state_width = c.state_width;
  t.shape.n_layers = c.n_layers;
  t.shape.k_order = c.k_order;
  t.shape.readout_width = c.readout_width;
  t.shape.head_widths = c.head_widths;
  t.shape.outputs = 2;
  t.shape.support = support_kind_from_string(c.support);
  t.shape.saturation = c.saturation;
  t.epochs = c.epochs;
  t.adam = {c.lr, c.beta1, c.beta2, c.adam_epsilon};
  t.regularizer = {c.rho_minus, c.rho_plus, c.epsilon};
  t.stable = c.mode == "stable";
  t.batch_size = c.batch_size;
  t.window = c.window;
  t.dagger_every = c.dagger_every;
  t.dagger_rollouts = c.dagger_rollouts;
  t.s_bar = c.s_bar;
  t.seed = c.seed;
  t.threads = c.threads;
  return t;
}

// ---------------------------------------------------------------------------
// Files

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory '" + dir + "'");
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline void write_resolved_config(const RunConfig& c, const std::string& command) {
  ensure_dir(c.out);
  json j = config_json(c);
  j["command"] = command;
  write_json(fs::path(c.out) / "config.json", j);
}

inline json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

/// Reads a gen-data directory back into its splits.
inline Dataset load_dataset(const std::string& dir) {
  if (dir.empty()) throw Error("missing dataset: set 'dataset' to a gen-data output directory");
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  if (!fs::exists(manifest_path)) throw Error("missing dataset: no manifest.json in '" + dir + "'");
  const json manifest = read_json_file(manifest_path);
  Dataset d;
  auto load_split = [&](const char* name, std::vector<Sample>& split) {
    for (const auto& file : manifest.at("splits").at(name)) {
      split.push_back(sample_from_json(read_json_file(fs::path(dir) / file.get<std::string>())));
    }
  };
  load_split("train", d.train);
  load_split("validation", d.validation);
  load_split("test", d.test);
  return d;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_gen_data(const RunConfig& c) {
  GenerationConfig g;
  g.count = c.count;
  g.team_sizes = c.team_sizes;
  g.flocking = flocking_config(c);
  g.geometry = geometry_config(c);
  g.seed = c.seed;
  g.threads = c.threads;
  require(g.count >= 0, "count must be nonnegative");
  for (int n : g.team_sizes) require(n >= 1, "team sizes must be positive");
  write_resolved_config(c, "gen-data");
  ensure_dir((fs::path(c.out) / "trajectories").string());

  const auto samples = generate_samples(g);
  const auto sizes = split_sizes(samples.size(), c.train_fraction, c.validation_fraction);
  json splits = {{"train", json::array()}, {"validation", json::array()}, {"test", json::array()}};
  json entries = json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::ostringstream name;
    name << "trajectories/traj_" << std::setw(4) << std::setfill('0') << i << ".json";
    const char* split = i < sizes.train ? "train" : (i < sizes.train + sizes.validation ? "validation" : "test");
    splits[split].push_back(name.str());
    write_text(fs::path(c.out) / name.str(), to_json(samples[i]).dump() + "\n");
    entries.push_back({{"file", name.str()},
                       {"split", split},
                       {"team_size", samples[i].agents()},
                       {"steps", samples[i].steps()}});
  }
  json manifest = {{"count", samples.size()},
                   {"seed", c.seed},
                   {"split_sizes", {{"train", sizes.train}, {"validation", sizes.validation}, {"test", sizes.test}}},
                   {"splits", splits},
                   {"trajectories", entries}};
  write_json(fs::path(c.out) / "manifest.json", manifest);
  std::cout << "wrote " << samples.size() << " trajectories (" << sizes.train << "/" << sizes.validation << "/"
            << sizes.test << ") to " << c.out << "\n";
  return kOk;
}

inline int cmd_train(const RunConfig& c) {
  const auto tc = train_config(c);
  const Dataset data = load_dataset(c.dataset);
  write_resolved_config(c, "train");
  std::ofstream report(fs::path(c.out) / "report.jsonl", std::ios::binary);
  if (!report) throw Error("cannot write report in '" + c.out + "'");
  const auto result = train(data, tc, [&](const EpochRecord& e) {
    report << to_json(e).dump() << "\n";
    report.flush();
    std::cout << "epoch " << e.epoch << " loss " << e.loss << " validation " << e.validation_mse << " A_delta";
    for (double m : e.diss_margins) std::cout << " " << m;
    std::cout << "\n";
  });
  save_network(result.params, (fs::path(c.out) / "weights.json").string());
  const json cert = to_json(*result.report.certificate);
  write_json(fs::path(c.out) / "certificate.json", cert);
  write_json(fs::path(c.out) / "summary.json", {{"mode", c.mode},
                                                {"epochs_run", result.report.epochs.size()},
                                                {"best_epoch", result.report.best_epoch},
                                                {"aborted", result.report.aborted},
                                                {"abort_reason", result.report.abort_reason},
                                                {"train_size", result.data.train.size()},
                                                {"s_bar", result.report.s_bar},
                                                {"s_K_bar", result.report.s_k_bar},
                                                {"certificate", cert}});
  write_table(std::cout, *result.report.certificate);
  if (result.report.aborted) std::cerr << "training aborted: " << result.report.abort_reason << "\n";
  return kOk;
}

/// Bounds: s_bar from the config when set, else from the weights metadata,
/// else the default bound for max_team_size.
inline StabilityCertificate certify_weights(const NetworkParams& net, const RunConfig& c) {
  double s_bar = c.s_bar > 0.0 ? c.s_bar : net.meta.s_bar;
  if (s_bar <= 0.0) {
    require(c.max_team_size >= 1, "certify: weights carry no s_bar; set s_bar or max_team_size");
    s_bar = default_support_bound(net.meta.support, c.max_team_size);
  }
  s_bar = std::max(1.0, s_bar);
  return certify(net, s_bar, stacked_shift_norm_bound(s_bar, net.meta.k_order));
}

inline int cmd_certify(const RunConfig& c) {
  if (c.weights.empty()) throw Error("certify: set 'weights'");
  const NetworkParams net = load_network(c.weights);
  const auto cert = certify_weights(net, c);
  write_resolved_config(c, "certify");
  write_json(fs::path(c.out) / "certificate.json", to_json(cert));
  write_table(std::cout, cert);
  return cert.verdict_diss ? kOk : kNotCertified;
}

inline flocking::Policy policy_for(const RunConfig& c, const NetworkParams* net) {
  if (c.policy == "expert") return flocking::Policy::expert();
  if (c.policy == "zero") return flocking::Policy::zero();
  if (c.policy == "network") {
    require(net != nullptr, "policy 'network' needs weights");
    return flocking::Policy::learned(*net);
  }
  throw Error("unknown policy '" + c.policy + "'");
}

/// Linear interpolation between order statistics.
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct CellMetrics {
  int team_size = 0;
  double comm_radius = 0.0;
  int comm_delay = 0;
  std::vector<double> cost;
  std::vector<double> leader_error;
  int failures = 0;
};

inline CellMetrics run_cell(const flocking::Policy& policy, const RunConfig& c, int team_size, double radius, int delay,
                            std::uint64_t cell_seed) {
  auto fc = flocking_config(c);
  fc.comm_radius = radius;
  const auto geo = geometry_config(c);
  CellMetrics m{team_size, radius, delay, {}, {}, 0};
  for (int i = 0; i < c.trajectories; ++i) {
    std::mt19937_64 rng(derive_seed(cell_seed, static_cast<std::uint64_t>(i)));
    const auto sc = flocking::sample_scenario(rng, team_size, fc, geo);
    flocking::RolloutOptions opts;
    opts.comm_delay = delay;
    const auto traj = flocking::rollout(policy, sc, opts);
    m.cost.push_back(flocking::average_cost(traj));
    m.leader_error.push_back(flocking::leader_error(traj));
    if (traj.failure != flocking::FailureReason::none) m.failures += 1;
  }
  return m;
}

inline std::string metrics_csv(const std::vector<CellMetrics>& cells) {
  std::ostringstream os;
  os << "team_size,comm_radius,comm_delay,trajectories,mean_cost,p50_cost,p90_cost,mean_leader_error,"
        "p50_leader_error,p90_leader_error,failure_rate\n";
  os << std::setprecision(10);
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
  };
  for (const auto& m : cells) {
    const auto n = m.cost.size();
    os << m.team_size << ',' << m.comm_radius << ',' << m.comm_delay << ',' << n << ',' << mean(m.cost) << ','
       << percentile(m.cost, 0.5) << ',' << percentile(m.cost, 0.9) << ',' << mean(m.leader_error) << ','
       << percentile(m.leader_error, 0.5) << ',' << percentile(m.leader_error, 0.9) << ','
       << (n ? static_cast<double>(m.failures) / static_cast<double>(n) : 0.0) << '\n';
  }
  return os.str();
}

inline int cmd_eval(const RunConfig& c) {
  require(c.trajectories >= 1, "trajectories must be positive");
  for (int d : c.grid_delays) require(d == 0 || d == 1, "grid delays must be 0 or 1");
  std::optional<NetworkParams> net;
  if (c.policy == "network") {
    if (c.weights.empty()) throw Error("eval: policy 'network' needs 'weights'");
    net = load_network(c.weights);
  }
  const auto policy = policy_for(c, net ? &*net : nullptr);

  struct Cell {
    int n;
    double r;
    int d;
  };
  std::vector<Cell> grid;
  for (int n : c.grid_team_sizes)
    for (double r : c.grid_comm_radii)
      for (int d : c.grid_delays) grid.push_back({n, r, d});
  write_resolved_config(c, "eval");
  std::vector<CellMetrics> cells(grid.size());
  parallel_for(grid.size(), c.threads, [&](std::size_t k) {
    cells[k] = run_cell(policy, c, grid[k].n, grid[k].r, grid[k].d, derive_seed(c.seed, k));
  });
  const std::string table = metrics_csv(cells);
  write_text(fs::path(c.out) / "metrics.csv", table);
  std::cout << table;
  return kOk;
}

inline int cmd_simulate(const RunConfig& c) {
  require(c.comm_delay == 0 || c.comm_delay == 1, "comm_delay must be 0 or 1");
  std::optional<NetworkParams> net;
  if (c.policy == "network") {
    if (c.weights.empty()) throw Error("simulate: policy 'network' needs 'weights'");
    net = load_network(c.weights);
  }
  const auto policy = policy_for(c, net ? &*net : nullptr);
  std::mt19937_64 rng(c.seed);
  const auto sc = flocking::sample_scenario(rng, c.team_size, flocking_config(c), geometry_config(c));
  flocking::RolloutOptions opts;
  opts.comm_delay = c.comm_delay;
  const auto traj = flocking::rollout(policy, sc, opts);
  write_resolved_config(c, "simulate");
  std::ostringstream csv;
  flocking::write_trajectory_csv(csv, traj);
  write_text(fs::path(c.out) / "trajectory.csv", csv.str());
  json summary = flocking::summary_json(traj);
  summary["scenario"] = flocking::to_json(sc);
  write_json(fs::path(c.out) / "summary.json", summary);
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

inline int run_command(const std::string& name, const RunConfig& c) {
  if (name == "gen-data") return cmd_gen_data(c);
  if (name == "train") return cmd_train(c);
  if (name == "certify") return cmd_certify(c);
  if (name == "eval") return cmd_eval(c);
  if (name == "simulate") return cmd_simulate(c);
  throw Error("unknown command '" + name + "'");
}

}  // namespace sggnn::cli
