#pragma once

#include "oracles.hpp"

#include <sggnn/ggnn.hpp>

#include <random>

namespace testing_support {

inline oracle::Layer to_oracle(const sggnn::LayerParams& p) {
  return {p.A.taps, p.B.taps, p.A_hat.taps, p.B_hat.taps, p.A_tilde.taps, p.B_tilde.taps, p.b, p.b_hat, p.b_tilde};
}

/// Random layer with every weight uniform in [-scale, scale].
inline sggnn::LayerParams random_layer(int F, int G, int K, std::mt19937_64& rng, double scale = 1.0) {
  sggnn::LayerParams p = sggnn::zero_layer({F, G, K});
  for (auto* fb : {&p.A, &p.B, &p.A_hat, &p.B_hat, &p.A_tilde, &p.B_tilde})
    for (auto& h : fb->taps) h = oracle::random_matrix(h.rows(), h.cols(), rng, -scale, scale);
  for (auto* b : {&p.b, &p.b_hat, &p.b_tilde}) *b = oracle::random_matrix(1, F, rng, -scale, scale);
  return p;
}

/// Random positions whose pairwise distances are all at least min_gap.
inline Eigen::MatrixXd spread_positions(int n, double box, double min_gap, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.0, box);
  Eigen::MatrixXd pos(n, 2);
  for (int i = 0; i < n; ++i) {
    for (;;) {
      pos(i, 0) = d(rng);
      pos(i, 1) = d(rng);
      bool ok = true;
      for (int j = 0; j < i; ++j) ok = ok && (pos.row(i) - pos.row(j)).norm() >= min_gap;
      if (ok) break;
    }
  }
  return pos;
}

}  // namespace testing_support
