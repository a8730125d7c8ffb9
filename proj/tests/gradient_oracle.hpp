#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cuebias/mlp.hpp"

namespace cuebias::testing {

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t compared = 0;
};

inline double batch_loss(const NetworkParameters<double>& p, const BinaryBatch& x,
                         std::span<const std::uint8_t> y) {
  return cross_entropy_loss(forward(p, x).probabilities(), y);
}

// Central differences with step h against backward(). Entries where both
// gradients are below `floor` in magnitude are skipped.
inline GradientCheck check_gradients(NetworkParameters<double> params, const BinaryBatch& x,
                                     std::span<const std::uint8_t> y, double h = 1e-5,
                                     double floor = 1e-9) {
  const auto analytic = backward(params, forward(params, x), y);
  GradientCheck out;
  auto compare = [&](double& slot, double a) {
    const double saved = slot;
    slot = saved + h;
    const double up = batch_loss(params, x, y);
    slot = saved - h;
    const double down = batch_loss(params, x, y);
    slot = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max(std::abs(a), std::abs(numeric));
    if (scale < floor) return;
    out.max_relative_error = std::max(out.max_relative_error, std::abs(a - numeric) / scale);
    ++out.compared;
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    const auto& g = analytic.values.layers[l];
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) compare(layer.weights(r, c), g.weights(r, c));
    }
    for (Eigen::Index c = 0; c < layer.bias.size(); ++c) compare(layer.bias(c), g.bias(c));
  }
  return out;
}

// Random {0,1} rows with roughly `density` of the inputs set.
inline BinaryBatch random_binary_batch(int input_dim, int rows, double density, RngStream& rng) {
  BinaryBatch b(input_dim);
  std::vector<std::uint16_t> active;
  for (int r = 0; r < rows; ++r) {
    active.clear();
    for (int i = 0; i < input_dim; ++i) {
      if (rng.uniform() < density) active.push_back(static_cast<std::uint16_t>(i));
    }
    b.add_row(active);
  }
  return b;
}

// Glorot weights plus non-zero biases, so no pre-activation sits exactly on
// the ReLU kink for an all-zero input row.
inline NetworkParameters<double> random_params(const NetworkConfig& cfg, RngStream& rng) {
  auto p = init_params<double>(cfg, rng);
  for (auto& l : p.layers) {
    for (Eigen::Index c = 0; c < l.bias.size(); ++c) l.bias(c) = rng.uniform() - 0.5;
  }
  return p;
}

}  // namespace cuebias::testing
