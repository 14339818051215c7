#pragma once

#include "sggnn/graph.hpp"
#include "sggnn/linalg.hpp"

#include <deque>
#include <vector>

namespace sggnn {

/// K+1 weight blocks H_0..H_K of one graph filter, each G_in x F_out.
/// M is Matrix for evaluation or a tape variable for training.
template <class M>
struct FilterBank {
  std::vector<M> taps;

  int order() const { return static_cast<int>(taps.size()) - 1; }
};

inline void validate(const FilterBank<Matrix>& bank) {
  require(!bank.taps.empty(), "filter bank: needs at least one tap");
  const auto rows = bank.taps.front().rows();
  const auto cols = bank.taps.front().cols();
  for (const auto& h : bank.taps) {
    require(h.rows() == rows && h.cols() == cols, "filter bank: taps must share dimensions");
  }
}

inline Eigen::Index input_width(const FilterBank<Matrix>& bank) { return bank.taps.front().rows(); }
inline Eigen::Index output_width(const FilterBank<Matrix>& bank) { return bank.taps.front().cols(); }

template <class M>
auto tap_norm(const FilterBank<M>& bank) {
  return stacked_tap_norm(bank.taps);
}

/// z_0 = x, z_k = S z_{k-1}: the k-hop aggregates, computed by repeated shifts.
template <class M>
std::vector<M> shift_stack(const Matrix& support, const M& x, int k_order) {
  std::vector<M> z;
  z.reserve(static_cast<std::size_t>(k_order) + 1);
  z.push_back(x);
  for (int k = 1; k <= k_order; ++k) z.push_back(shift(support, z.back()));
  return z;
}

/// sum_k z_k H_k for precomputed aggregates z_k.
template <class M>
M apply_taps(const std::vector<M>& shifted, const FilterBank<M>& bank) {
  require(shifted.size() == bank.taps.size(), "filter: order mismatch between signal stack and taps");
  M out = matmul(shifted[0], bank.taps[0]);
  for (std::size_t k = 1; k < bank.taps.size(); ++k) out = out + matmul(shifted[k], bank.taps[k]);
  return out;
}

/// Graph filter sum_k S^k x H_k.
template <class M>
M filter_apply(const FilterBank<M>& bank, const SupportMatrix& s, const M& x) {
  require(s.entries.cols() == value_of(x).rows(), "filter: support/signal dimension mismatch");
  return apply_taps(shift_stack(s.entries, x, bank.order()), bank);
}

/// Last K+1 (time, signal, support) triples for the unit-delayed filter.
/// Single writer: the simulation loop pushes once per communication step.
class SignalHistory {
 public:
  struct Entry {
    long time = 0;
    Matrix signal;
    Matrix support;
  };

  explicit SignalHistory(int k_order) : k_(k_order) { require(k_ >= 0, "history: negative order"); }

  void push(long time, Matrix signal, Matrix support) {
    require(entries_.empty() || time > entries_.back().time, "history: timestamps must increase");
    entries_.push_back({time, std::move(signal), std::move(support)});
    while (static_cast<int>(entries_.size()) > k_ + 1) entries_.pop_front();
  }

  bool warm() const { return static_cast<int>(entries_.size()) == k_ + 1; }
  int order() const { return k_; }

  /// Entry for x(t - lag); lag 0 is the newest.
  const Entry& lagged(int lag) const {
    require(lag >= 0 && lag < static_cast<int>(entries_.size()), "history: lag out of range");
    return entries_[entries_.size() - 1 - static_cast<std::size_t>(lag)];
  }

  const std::deque<Entry>& entries() const { return entries_; }

 private:
  int k_;
  std::deque<Entry> entries_;
};

/// Tap k sees x(t-k) carried through the k most recent supports:
/// S(t) S(t-1) ... S(t-k+1) x(t-k), i.e. the oldest support is applied first.
inline std::vector<Matrix> delayed_shift_stack(const SignalHistory& history) {
  if (!history.warm()) throw Error("insufficient history");
  const int k_order = history.order();
  std::vector<Matrix> z;
  z.reserve(static_cast<std::size_t>(k_order) + 1);
  for (int k = 0; k <= k_order; ++k) {
    Matrix acc = history.lagged(k).signal;
    for (int lag = k - 1; lag >= 0; --lag) acc = shift(history.lagged(lag).support, acc);
    z.push_back(std::move(acc));
  }
  return z;
}

inline Matrix delayed_filter_apply(const FilterBank<Matrix>& bank, const SignalHistory& history) {
  require(bank.order() == history.order(), "delayed filter: order mismatch");
  return apply_taps(delayed_shift_stack(history), bank);
}

}  // namespace sggnn
