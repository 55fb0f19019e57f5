#pragma once

// Gradient-ascent engine shared by the dual estimator and the multiplier
// bootstrap: maximizes sum_i w_i f(X_i) over spectrally normalized critics.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "wtest/error.hpp"
#include "wtest/nn.hpp"
#include "wtest/random.hpp"

namespace wtest {

struct WeightedFit {
  CriticNet net;
  double objective = 0.0;  // sum_i w_i f(X_i) for the returned net, >= 0
  std::vector<double> objective_trace;
  double lipschitz_certificate = 0.0;
};

/// Runs cfg.epochs of ascent on sum_i w_i f(X_i), normalizing after every
/// step. The best post-normalization critic seen is certified (converged
/// normalization), and negated if its objective is negative, which is allowed
/// because the critic class is closed under f -> -f.
inline WeightedFit maximize_weighted_objective(const Eigen::MatrixXd& points,
                                               const Eigen::VectorXd& weights,
                                               const TrainConfig& cfg, Rng& rng,
                                               const CriticNet* warm_start = nullptr) {
  cfg.validate();
  if (weights.size() != points.rows()) throw ShapeError("one weight per point is required");

  CriticNet net = warm_start ? *warm_start
                             : init_critic(static_cast<std::size_t>(points.cols()), cfg, rng);
  if (net.input_dim() != static_cast<std::size_t>(points.cols())) {
    throw ShapeError("warm-start critic has the wrong input dimension");
  }
  SpectralState spectral;
  ensure_spectral_state(net, spectral, rng);
  OptimizerState opt = OptimizerState::for_net(net, cfg.optimizer);

  const Eigen::Index total = points.rows();
  const bool full_batch = !cfg.batch_size || *cfg.batch_size >= total;

  WeightedFit fit;
  fit.objective_trace.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
  CriticNet best = net;
  double best_value = -std::numeric_limits<double>::infinity();

  auto record = [&](double value, int epoch) {
    if (!std::isfinite(value)) {
      throw NumericError("non-finite objective at epoch " + std::to_string(epoch));
    }
    fit.objective_trace.push_back(value);
    // |value|: the mirrored critic -f attains -value.
    if (std::abs(value) > best_value) {
      best_value = std::abs(value);
      best = net;
    }
  };

  std::vector<Eigen::Index> order;
  if (!full_batch) {
    order.resize(static_cast<std::size_t>(total));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (full_batch) {
      ObjectiveGradient og = objective_and_gradient(net, weights, points);
      record(og.objective, epoch);
      optimizer_step(net, og.grad, opt, cfg);
      spectral_normalize(net, cfg.power_iterations, spectral, rng);
      continue;
    }
    record(net.forward_batch(points).dot(weights), epoch);
    std::shuffle(order.begin(), order.end(), rng);
    const Eigen::Index bs = *cfg.batch_size;
    for (Eigen::Index start = 0; start < total; start += bs) {
      const Eigen::Index len = std::min(bs, total - start);
      Eigen::MatrixXd batch(len, points.cols());
      Eigen::VectorXd bw(len);
      const double scale = static_cast<double>(total) / static_cast<double>(len);
      for (Eigen::Index k = 0; k < len; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(start + k)];
        batch.row(k) = points.row(src);
        bw(k) = weights(src) * scale;
      }
      optimizer_step(net, batch_gradient(net, bw, batch), opt, cfg);
      spectral_normalize(net, cfg.power_iterations, spectral, rng);
    }
  }
  record(net.forward_batch(points).dot(weights), cfg.epochs);

  SpectralState cert_state;
  certify_lipschitz(best, cert_state, rng);
  double value = best.forward_batch(points).dot(weights);
  if (value < 0.0) {
    best.negate();
    value = -value;
  }
  fit.net = std::move(best);
  fit.objective = value;
  fit.lipschitz_certificate = lipschitz_upper_bound(fit.net);
  return fit;
}

}  // namespace wtest
