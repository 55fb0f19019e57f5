#pragma once

// Dual-form Wasserstein estimate over the spectrally normalized critic class:
//   W_hat(mu1, mu2) = sup_f  mean_j f(Y_j) - mean_i f(X_i).

#include <Eigen/Dense>

#include <vector>

#include "wtest/nn.hpp"
#include "wtest/random.hpp"
#include "wtest/sample.hpp"
#include "wtest/trainer.hpp"

namespace wtest {

struct DualEstimate {
  double value = 0.0;
  CriticNet net;
  std::vector<double> objective_trace;
  double lipschitz_certificate = 0.0;
};

/// mean_j f(Y_j) - mean_i f(X_i).
inline double evaluate_dual(const CriticNet& net, const Sample& x, const Sample& y) {
  require_same_dim(x, y);
  return net.forward_batch(y.data()).mean() - net.forward_batch(x.data()).mean();
}

/// Objective weights that turn sum_k w_k f(Z_k), Z = [x; y], into the dual
/// objective.
inline Eigen::VectorXd dual_weights(std::size_t n, std::size_t m) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(n + m));
  w.head(static_cast<Eigen::Index>(n)).setConstant(-1.0 / static_cast<double>(n));
  w.tail(static_cast<Eigen::Index>(m)).setConstant(1.0 / static_cast<double>(m));
  return w;
}

inline DualEstimate train_dual_critic(const Sample& x, const Sample& y, const TrainConfig& cfg,
                                      Rng& rng) {
  require_same_dim(x, y);
  WeightedFit fit = maximize_weighted_objective(stack_rows(x, y), dual_weights(x.n(), y.n()), cfg, rng);
  DualEstimate est;
  est.value = fit.objective;
  est.net = std::move(fit.net);
  est.objective_trace = std::move(fit.objective_trace);
  est.lipschitz_certificate = fit.lipschitz_certificate;
  return est;
}

inline DualEstimate train_dual_critic(const Sample& x, const Sample& y, const TrainConfig& cfg) {
  Rng rng = make_stream(cfg.seed, "dual");
  return train_dual_critic(x, y, cfg, rng);
}

}  // namespace wtest
