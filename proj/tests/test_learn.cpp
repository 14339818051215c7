#include "gradcheck.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

#include "sggnn/learn/adam.hpp"
#include "sggnn/learn/dagger.hpp"
#include "sggnn/learn/dataset.hpp"
#include "sggnn/learn/loss.hpp"
#include "sggnn/learn/tape.hpp"
#include "sggnn/learn/train.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

namespace {

using sggnn::Matrix;
using sggnn::Tape;
using sggnn::Var;
namespace fl = sggnn::flocking;

// ---------------------------------------------------------------------------
// Tape

TEST(Tape, HalfSquaredNormGradientIsTheta) {
  std::mt19937_64 rng(1);
  const Matrix theta = oracle::random_matrix(3, 4, rng);
  Tape tape;
  const Var v = tape.variable(theta);
  const Var loss = 0.5 * sggnn::sum_squared_error(v, Matrix::Zero(3, 4));
  tape.backward(loss);
  EXPECT_EQ(tape.gradient(v), theta);
}

TEST(Tape, ConstantLossGivesZeroGradients) {
  Tape tape;
  const Var v = tape.variable(Matrix::Ones(2, 2));
  const Var loss = sggnn::sum(tape.constant(Matrix::Constant(2, 2, 3.0)));
  tape.backward(loss);
  EXPECT_EQ(tape.gradient(v), Matrix::Zero(2, 2));
}

TEST(Tape, NonFiniteValueReportsOperationIndex) {
  Tape tape;
  const Var v = tape.variable(Matrix::Constant(1, 2, 1e308));
  const Var w = tape.constant(Matrix::Ones(1, 2));
  try {
    (void)sggnn::scale(v + w, 10.0);
    FAIL() << "expected NonFiniteError";
  } catch (const sggnn::NonFiniteError& e) {
    EXPECT_EQ(e.op_index, 3u);
    EXPECT_EQ(e.op_name, "scale");
  }
}

TEST(Tape, ReusedNodeAccumulatesGradient) {
  Tape tape;
  const Var v = tape.variable(Matrix::Constant(1, 1, 3.0));
  tape.backward(v * v + v);
  EXPECT_DOUBLE_EQ(tape.gradient(v)(0, 0), 7.0);
}

TEST(Tape, PrimitivesMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& r : gradcheck::check_primitives(seed)) EXPECT_LE(r.worst, 1e-4) << r.name << " seed " << seed;
  }
}

TEST(Tape, SingleLayerStepMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  const auto p = testing_support::random_layer(4, 3, 2, rng, 0.5);
  sggnn::Graph g(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}, {0, 2}});
  const auto s = sggnn::support_matrix(g, sggnn::SupportKind::normalized_laplacian);
  const Matrix x = oracle::random_matrix(5, 4, rng);
  const Matrix u = oracle::random_matrix(5, 3, rng);
  const Matrix w = oracle::random_matrix(5, 4, rng);

  Tape tape;
  auto to_var = [&](const Matrix& m) { return tape.variable(m); };
  const auto vp = sggnn::transform_layer<Var>(p, to_var);
  const Var out = sggnn::layer_forward(vp, s, tape.constant(x), tape.constant(u)).state;
  tape.backward(sggnn::sum(out * tape.constant(w)));

  std::vector<Matrix> grads;
  for (const auto* fb : {&vp.A, &vp.B, &vp.A_hat, &vp.B_hat, &vp.A_tilde, &vp.B_tilde})
    for (const auto& h : fb->taps) grads.push_back(tape.gradient(h));
  for (const auto* b : {&vp.b, &vp.b_hat, &vp.b_tilde}) grads.push_back(tape.gradient(*b));

  auto q = p;
  std::vector<Matrix*> slots;
  for (auto* fb : {&q.A, &q.B, &q.A_hat, &q.B_hat, &q.A_tilde, &q.B_tilde})
    for (auto& h : fb->taps) slots.push_back(&h);
  for (auto* b : {&q.b, &q.b_hat, &q.b_tilde}) slots.push_back(b);
  ASSERT_EQ(slots.size(), grads.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const Matrix saved = *slots[i];
    auto f = [&](const Matrix& theta) {
      *slots[i] = theta;
      return oracle::layer(testing_support::to_oracle(q), s.entries, x, u).cwiseProduct(w).sum();
    };
    EXPECT_LE(oracle::relative_error(grads[i], oracle::finite_difference(f, saved)), 1e-4) << "slot " << i;
    *slots[i] = saved;
  }
}

TEST(Tape, ComposedWindowLossMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) EXPECT_LE(gradcheck::check_composed(seed), 1e-4) << "seed " << seed;
}

TEST(Tape, MarginGradientFlowsThroughAttainingColumn) {
  Tape tape;
  Matrix h(2, 2);
  h << 1.0, -3.0, 2.0, 1.0;
  const Var v = tape.variable(h);
  tape.backward(sggnn::stacked_tap_norm({v}));
  Matrix expected(2, 2);
  expected << 0.0, -1.0, 0.0, 1.0;
  EXPECT_EQ(tape.gradient(v), expected);
}

TEST(Tape, MaxAbsTieBreaksOnFirstEntry) {
  Tape tape;
  Matrix h(1, 3);
  h << -2.0, 2.0, 1.0;
  const Var v = tape.variable(h);
  tape.backward(sggnn::max_abs(v));
  Matrix expected(1, 3);
  expected << -1.0, 0.0, 0.0;
  EXPECT_EQ(tape.gradient(v), expected);
}

// ---------------------------------------------------------------------------
// Adam

TEST(Adam, FirstStepWithUnitGradientMovesByLearningRate) {
  std::vector<Matrix> p{Matrix::Constant(2, 3, 0.5)};
  auto s = sggnn::make_optimizer(p);
  sggnn::adam_step(s, {&p[0]}, {Matrix::Ones(2, 3)});
  const double expected = 0.5 - 1e-3 * 1.0 / (1.0 + 1e-8);
  for (Eigen::Index i = 0; i < p[0].size(); ++i) EXPECT_DOUBLE_EQ(p[0](i), expected);
  EXPECT_NEAR(p[0](0, 0), 0.5 - 1e-3, 1e-10);
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, ZeroGradientLeavesParametersAndCountsStep) {
  std::vector<Matrix> p{Matrix::Constant(2, 2, -0.25)};
  auto s = sggnn::make_optimizer(p);
  sggnn::adam_step(s, {&p[0]}, {Matrix::Zero(2, 2)});
  EXPECT_EQ(p[0], Matrix::Constant(2, 2, -0.25));
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, TwoStepsMatchHandRecurrence) {
  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 2.0;
  double theta = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    theta -= lr * mh / (std::sqrt(vh) + eps);
  }
  std::vector<Matrix> p{Matrix::Constant(1, 1, 1.0)};
  auto s = sggnn::make_optimizer(p);
  for (int t = 0; t < 2; ++t) sggnn::adam_step(s, {&p[0]}, {Matrix::Constant(1, 1, g)});
  EXPECT_DOUBLE_EQ(p[0](0, 0), theta);
  EXPECT_NEAR(p[0](0, 0), 1.0 - 2e-3, 1e-9);
}

TEST(Adam, ShapeMismatchThrows) {
  std::vector<Matrix> p{Matrix::Zero(2, 2)};
  auto s = sggnn::make_optimizer(p);
  EXPECT_THROW(sggnn::adam_step(s, {&p[0]}, {Matrix::Zero(2, 3)}), sggnn::Error);
  EXPECT_THROW(sggnn::adam_step(s, {&p[0]}, {}), sggnn::Error);
}

TEST(Adam, NetworkStepVisitsEveryParameter) {
  std::mt19937_64 rng(3);
  sggnn::NetworkShape shape;
  shape.encoder_widths = {4};
  shape.state_width = 3;
  shape.readout_width = 4;
  shape.head_widths = {};
  auto net = sggnn::init_network(shape, rng);
  const auto before = sggnn::parameter_values(net);
  auto s = sggnn::make_optimizer(net);
  std::vector<Matrix> grads;
  for (const auto& m : before) grads.push_back(Matrix::Ones(m.rows(), m.cols()));
  sggnn::adam_step(s, net, grads);
  const auto after = sggnn::parameter_values(net);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_TRUE(((before[i] - after[i]).array() > 0.0).all()) << i;
}

// ---------------------------------------------------------------------------
// Loss

TEST(Loss, PerfectImitationLeavesOnlyPenalty) {
  std::mt19937_64 rng(5);
  std::vector<Matrix> u{oracle::random_matrix(3, 2, rng), oracle::random_matrix(3, 2, rng)};
  const std::vector<double> margins{1.3, 0.5};
  const sggnn::RegularizerConfig cfg;
  const double loss = sggnn::imitation_loss(u, u, margins, std::optional(cfg));
  EXPECT_EQ(loss, sggnn::stability_penalty(margins, cfg));
  EXPECT_EQ(sggnn::imitation_loss(u, u, std::vector<double>{}, std::nullopt), 0.0);
}

TEST(Loss, OneOffEntryOfTwoGivesHalf) {
  Matrix pred(1, 2);
  pred << 1.0, 0.0;
  const double loss =
      sggnn::imitation_loss(std::vector<Matrix>{pred}, {Matrix::Zero(1, 2)}, std::vector<double>{}, std::nullopt);
  EXPECT_EQ(loss, 0.5);
}

TEST(Loss, MatchesScalarLoop) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int T = 1 + trial % 5;
    const int N = 2 + trial % 4;
    std::vector<Matrix> pred, expert;
    for (int t = 0; t < T; ++t) {
      pred.push_back(oracle::random_matrix(N, 2, rng, -5, 5));
      expert.push_back(oracle::random_matrix(N, 2, rng, -5, 5));
    }
    const std::vector<double> margins{0.2 + trial * 0.1};
    const sggnn::RegularizerConfig cfg;
    double sse = 0.0;
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < N; ++i)
        for (int a = 0; a < 2; ++a) sse += std::pow(pred[t](i, a) - expert[t](i, a), 2);
    const double excess = margins[0] - 1.0 - cfg.epsilon;
    const double penalty = cfg.rho_minus * std::min(0.0, excess) + cfg.rho_plus * std::max(0.0, excess);
    EXPECT_NEAR(sggnn::imitation_loss(pred, expert, margins, std::optional(cfg)), sse / (T * N * 2) + penalty, 1e-12);
  }
}

TEST(Loss, HorizonMismatchThrows) {
  std::vector<Matrix> a{Matrix::Zero(1, 2)};
  std::vector<Matrix> b{Matrix::Zero(1, 2), Matrix::Zero(1, 2)};
  EXPECT_THROW(sggnn::imitation_loss(a, b, std::vector<double>{}, std::nullopt), sggnn::Error);
}

// ---------------------------------------------------------------------------
// Dataset

fl::FlockingConfig short_config(double horizon = 0.2) {
  fl::FlockingConfig cfg;
  cfg.horizon = horizon;
  return cfg;
}

sggnn::GenerationConfig small_generation(int count, std::uint64_t seed = 1) {
  sggnn::GenerationConfig g;
  g.count = count;
  g.team_sizes = {4};
  g.flocking = short_config();
  g.seed = seed;
  return g;
}

TEST(Dataset, SplitProportions) {
  const auto s = sggnn::split_sizes(120);
  EXPECT_EQ(s.train, 84u);
  EXPECT_EQ(s.validation, 12u);
  EXPECT_EQ(s.test, 24u);
  const auto t = sggnn::split_sizes(10);
  EXPECT_EQ(t.train, 7u);
  EXPECT_EQ(t.validation, 1u);
  EXPECT_EQ(t.test, 2u);
  const auto one = sggnn::split_sizes(1);
  EXPECT_EQ(one.train + one.validation + one.test, 1u);
}

TEST(Dataset, GeneratedSamplesAreConsistent) {
  const auto samples = sggnn::generate_samples(small_generation(3));
  ASSERT_EQ(samples.size(), 3u);
  for (const auto& s : samples) {
    EXPECT_NO_THROW(sggnn::validate(s));
    EXPECT_EQ(s.steps(), 20);
    for (int t = 0; t < s.steps(); ++t) {
      const auto& st = s.states[static_cast<std::size_t>(t)];
      const auto g = sggnn::build_proximity_graph(st.r, s.scenario.config.comm_radius);
      EXPECT_EQ(s.targets[static_cast<std::size_t>(t)], fl::expert_control(st, g, s.scenario.config));
    }
  }
}

TEST(Dataset, GenerationIsDeterministicAndThreadIndependent) {
  auto cfg = small_generation(4, 9);
  const auto a = sggnn::generate_samples(cfg);
  cfg.threads = 3;
  const auto b = sggnn::generate_samples(cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(sggnn::to_json(a[i]).dump(), sggnn::to_json(b[i]).dump());
}

TEST(Dataset, SampleRoundTripsThroughJson) {
  const auto s = sggnn::generate_samples(small_generation(1, 4)).front();
  const auto back = sggnn::sample_from_json(nlohmann::json::parse(sggnn::to_json(s).dump()));
  ASSERT_EQ(back.steps(), s.steps());
  for (int t = 0; t < s.steps(); ++t) {
    const auto ts = static_cast<std::size_t>(t);
    EXPECT_EQ(back.features[ts], s.features[ts]);
    EXPECT_EQ(back.targets[ts], s.targets[ts]);
    EXPECT_EQ(back.graphs[ts].adjacency(), s.graphs[ts].adjacency());
  }
}

TEST(Dataset, BatchIsDisjointUnion) {
  auto cfg = small_generation(0);
  cfg.count = 2;
  cfg.team_sizes = {3, 5};
  const auto samples = sggnn::generate_samples(cfg);
  const auto b = sggnn::make_batch(samples, {0, 1}, sggnn::SupportKind::normalized_laplacian);
  const auto n0 = samples[0].agents();
  const auto n1 = samples[1].agents();
  EXPECT_EQ(b.agents, n0 + n1);
  for (int t = 0; t < b.steps(); ++t) {
    const auto ts = static_cast<std::size_t>(t);
    const auto& S = b.supports[ts].entries;
    EXPECT_EQ(S.topLeftCorner(n0, n0), sggnn::support_matrix(samples[0].graphs[ts], b.supports[ts].kind).entries);
    EXPECT_EQ(S.bottomRightCorner(n1, n1), sggnn::support_matrix(samples[1].graphs[ts], b.supports[ts].kind).entries);
    EXPECT_EQ(S.topRightCorner(n0, n1), Matrix::Zero(n0, n1));
    EXPECT_EQ(b.features[ts].bottomRows(n1), samples[1].features[ts]);
  }
}

TEST(Dataset, BatchesPartitionByHorizon) {
  auto samples = sggnn::generate_samples(small_generation(11));
  samples[3].targets.pop_back();
  samples[3].states.pop_back();
  samples[3].features.pop_back();
  samples[3].graphs.pop_back();
  std::mt19937_64 rng(2);
  const auto batches = sggnn::batch_indices(samples, 4, rng);
  std::vector<int> seen(samples.size(), 0);
  for (const auto& b : batches) {
    EXPECT_LE(b.size(), 4u);
    for (auto i : b) {
      seen[i] += 1;
      EXPECT_EQ(samples[i].steps(), samples[b.front()].steps());
    }
  }
  for (int c : seen) EXPECT_EQ(c, 1);
}

// ---------------------------------------------------------------------------
// DAGGER

std::size_t labeled_states(const std::vector<sggnn::Sample>& split) {
  std::size_t n = 0;
  for (const auto& s : split) n += static_cast<std::size_t>(s.steps()) * static_cast<std::size_t>(s.agents());
  return n;
}

sggnn::DaggerConfig dagger_config(int rollouts) {
  sggnn::DaggerConfig dc;
  dc.rollouts = rollouts;
  dc.team_sizes = {4};
  dc.flocking = short_config();
  dc.seed = 5;
  return dc;
}

TEST(Dagger, ZeroRolloutsLeaveDatasetUnchanged) {
  sggnn::Dataset d = sggnn::split_dataset(sggnn::generate_samples(small_generation(4)));
  const auto before = d.train.size();
  const auto after = sggnn::dagger_round(fl::Policy::zero(), d, dagger_config(0));
  EXPECT_EQ(after.train.size(), before);
  EXPECT_EQ(after.size(), d.size());
}

TEST(Dagger, OneRolloutAppendsHorizonStates) {
  sggnn::Dataset d = sggnn::split_dataset(sggnn::generate_samples(small_generation(4)));
  const auto before = labeled_states(d.train);
  const auto after = sggnn::dagger_round(fl::Policy::zero(), d, dagger_config(1));
  ASSERT_EQ(after.train.size(), d.train.size() + 1);
  const auto& added = after.train.back();
  EXPECT_EQ(added.steps(), 20);
  EXPECT_EQ(added.agents(), 4);
  EXPECT_EQ(labeled_states(after.train), before + 20 * 4);
  EXPECT_EQ(added.origin, 1);
}

TEST(Dagger, ExpertPolicyLabelsEqualOwnControls) {
  const auto dc = dagger_config(2);
  const auto samples = sggnn::dagger_samples(fl::Policy::expert(), dc);
  ASSERT_EQ(samples.size(), 2u);
  for (const auto& s : samples) {
    const auto traj = fl::rollout(fl::Policy::expert(), s.scenario);
    ASSERT_EQ(traj.steps(), s.steps());
    for (int t = 0; t < s.steps(); ++t)
      EXPECT_LE((traj.controls[static_cast<std::size_t>(t)] - s.targets[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff(),
                1e-12);
  }
}

TEST(Dagger, SizeAfterRoundsIsInitialPlusHorizons) {
  sggnn::Dataset d = sggnn::split_dataset(sggnn::generate_samples(small_generation(5)));
  const auto initial = labeled_states(d.train);
  std::size_t added = 0;
  for (int r = 1; r <= 3; ++r) {
    auto dc = dagger_config(r);
    dc.round = r;
    const auto fresh = sggnn::dagger_samples(fl::Policy::zero(), dc);
    added += labeled_states(fresh);
    d = sggnn::dagger_round(fl::Policy::zero(), d, dc);
  }
  EXPECT_EQ(labeled_states(d.train), initial + added);
  EXPECT_EQ(added, (1 + 2 + 3) * 20u * 4u);
}

TEST(Dagger, RolloutsAreThreadIndependent) {
  auto dc = dagger_config(3);
  const auto a = sggnn::dagger_samples(fl::Policy::zero(), dc);
  dc.threads = 3;
  const auto b = sggnn::dagger_samples(fl::Policy::zero(), dc);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(sggnn::to_json(a[i]).dump(), sggnn::to_json(b[i]).dump());
}

// ---------------------------------------------------------------------------
// Training

sggnn::TrainConfig tiny_train(int epochs, std::uint64_t seed) {
  sggnn::TrainConfig cfg;
  cfg.shape.encoder_widths = {8};
  cfg.shape.state_width = 6;
  cfg.shape.readout_width = 8;
  cfg.shape.head_widths = {8};
  cfg.epochs = epochs;
  cfg.window = 5;
  cfg.dagger_every = 2;
  cfg.dagger_rollouts = 1;
  cfg.seed = seed;
  return cfg;
}

sggnn::Dataset tiny_data(std::uint64_t seed = 1) { return sggnn::split_dataset(sggnn::generate_samples(small_generation(5, seed))); }

TEST(Train, ZeroEpochsReturnsInitialization) {
  const auto cfg = tiny_train(0, 3);
  const auto data = tiny_data();
  const auto r = sggnn::train(data, cfg);
  EXPECT_TRUE(r.report.epochs.empty());
  std::mt19937_64 rng(sggnn::derive_seed(3, 0));
  auto shape = cfg.shape;
  shape.s_bar = r.report.s_bar;
  const auto init = sggnn::init_network(shape, rng);
  EXPECT_EQ(sggnn::parameter_values(r.params), sggnn::parameter_values(init));
  EXPECT_EQ(r.params.meta.s_bar, 1.0 + std::sqrt(3.0));
}

TEST(Train, ReportsEveryEpochAndRunsDagger) {
  const auto data = tiny_data();
  const auto r = sggnn::train(data, tiny_train(5, 3));
  ASSERT_EQ(r.report.epochs.size(), 5u);
  EXPECT_FALSE(r.report.aborted);
  EXPECT_EQ(r.report.epochs[1].dagger, true);
  EXPECT_EQ(r.report.epochs[3].dagger, true);
  EXPECT_EQ(r.report.epochs[4].dagger, false);
  EXPECT_EQ(r.data.train.size(), data.train.size() + 2);
  EXPECT_EQ(r.report.epochs.back().train_size, data.train.size() + 2);
  for (const auto& e : r.report.epochs) {
    EXPECT_TRUE(std::isfinite(e.loss));
    ASSERT_EQ(e.diss_margins.size(), 1u);
  }
  ASSERT_TRUE(r.report.certificate.has_value());
  const auto c = sggnn::certify(r.params, r.report.s_bar, r.report.s_k_bar);
  EXPECT_EQ(sggnn::to_json(c), sggnn::to_json(*r.report.certificate));
}

TEST(Train, DeterministicUnderFixedSeed) {
  const auto data = tiny_data();
  auto cfg = tiny_train(3, 8);
  const auto a = sggnn::train(data, cfg);
  cfg.threads = 2;
  const auto b = sggnn::train(data, cfg);
  ASSERT_EQ(a.report.epochs.size(), b.report.epochs.size());
  for (std::size_t i = 0; i < a.report.epochs.size(); ++i)
    EXPECT_EQ(sggnn::to_json(a.report.epochs[i]).dump(), sggnn::to_json(b.report.epochs[i]).dump());
  EXPECT_EQ(sggnn::parameter_values(a.params), sggnn::parameter_values(b.params));
}

TEST(Train, PenaltyShrinksMarginsRelativeToInitialization) {
  const auto data = tiny_data();
  auto cfg = tiny_train(4, 2);
  cfg.dagger_every = 0;
  const auto init = sggnn::train(data, tiny_train(0, 2));
  const auto r = sggnn::train(data, cfg);
  const double m0 = sggnn::certify(init.params, r.report.s_bar, r.report.s_k_bar).layers[0].A_delta_margin;
  EXPECT_LT(r.report.epochs.back().diss_margins[0], m0);
}

// Scaling rho_plus by 10 is nearly invisible to Adam once the penalty
// dominates the gradient (the update is scale invariant), so the monotone
// pressure property is asserted between the unpenalized and penalized runs.
TEST(Train, PenaltyNeverEndsAboveUnpenalizedMargin) {
  const auto data = tiny_data();
  for (std::uint64_t seed : {1, 2, 3}) {
    auto cfg = tiny_train(4, seed);
    cfg.dagger_every = 0;
    cfg.stable = false;
    const auto free_run = sggnn::train(data, cfg);
    cfg.stable = true;
    const auto penalized = sggnn::train(data, cfg);
    const auto& a = free_run.report.epochs.back().diss_margins;
    const auto& b = penalized.report.epochs.back().diss_margins;
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(b[i], a[i]) << "seed " << seed << " layer " << i;
  }
}

TEST(Train, DivergentLossAbortsWithLastGoodCheckpoint) {
  const auto data = tiny_data();
  auto cfg = tiny_train(4, 3);
  cfg.adam.learning_rate = 1e200;
  cfg.dagger_every = 0;
  const auto r = sggnn::train(data, cfg);
  EXPECT_TRUE(r.report.aborted);
  EXPECT_FALSE(r.report.abort_reason.empty());
  for (const auto& m : sggnn::parameter_values(r.params)) EXPECT_TRUE(m.allFinite());
}

TEST(Train, RejectsEmptyTrainingSplit) {
  EXPECT_THROW(sggnn::train(sggnn::Dataset{}, tiny_train(1, 0)), sggnn::Error);
}

}  // namespace
