#pragma once

#include "sggnn/learn/tape.hpp"
#include "sggnn/linalg.hpp"
#include "sggnn/stability.hpp"

#include <optional>
#include <vector>

namespace sggnn {

inline double sum_squared_error(const Matrix& pred, const Matrix& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "squared error: dimension mismatch");
  return (pred - target).squaredNorm();
}

/// Mean over agents, axes and steps of the squared control error, plus the
/// stability penalty of the margins when a regularizer is given.
/// P is Matrix or Var; T (the margin type) is double or Var accordingly.
template <class P, class T>
auto imitation_loss(const std::vector<P>& predicted, const std::vector<Matrix>& expert, const std::vector<T>& margins,
                    const std::optional<RegularizerConfig>& regularizer) {
  require(!predicted.empty() && predicted.size() == expert.size(), "imitation loss: horizons differ");
  double count = 0.0;
  auto total = sum_squared_error(predicted[0], expert[0]);
  count += static_cast<double>(expert[0].size());
  for (std::size_t t = 1; t < predicted.size(); ++t) {
    total = total + sum_squared_error(predicted[t], expert[t]);
    count += static_cast<double>(expert[t].size());
  }
  require(count > 0.0, "imitation loss: empty controls");
  auto loss = total * (1.0 / count);
  if (regularizer) loss = loss + stability_penalty(margins, *regularizer);
  return loss;
}

}  // namespace sggnn
