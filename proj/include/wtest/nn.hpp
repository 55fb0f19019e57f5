#pragma once

// Feedforward ReLU critics with hand-written backpropagation, SGD/Adam ascent
// steps and spectral normalization.
//
// A critic with L hidden layers computes
//   f(x) = W_{L+1} relu(W_L ... relu(W_1 x + b_1) ... + b_L) + b_{L+1}
// and is 1-Lipschitz in the Euclidean norm whenever every ||W_l||_2 <= 1.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wtest/error.hpp"
#include "wtest/random.hpp"

namespace wtest {

/// Numerical slack allowed on a normalized spectral norm.
inline constexpr double kSpectralSlack = 1e-6;

struct LayerParams {
  Eigen::MatrixXd weight;  // out_dim x in_dim
  Eigen::VectorXd bias;    // out_dim

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
};

/// Same shape as the critic's parameter list.
using CriticGradient = std::vector<LayerParams>;

enum class Optimizer { SGD, Adam };

inline std::string to_string(Optimizer o) { return o == Optimizer::SGD ? "sgd" : "adam"; }

struct TrainConfig {
  std::vector<int> hidden_widths{100, 100, 100};
  Optimizer optimizer = Optimizer::Adam;
  double learning_rate = 1e-3;
  int epochs = 500;
  std::optional<int> batch_size;  // nullopt = full batch
  int power_iterations = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden_widths.empty()) throw ConfigError("hidden_widths must be nonempty");
    for (int w : hidden_widths) {
      if (w < 1) throw ConfigError("hidden widths must be positive");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("learning_rate must be positive");
    }
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size && *batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (power_iterations < 1) throw ConfigError("power_iterations must be >= 1");
  }
};

class CriticNet {
 public:
  CriticNet() = default;
  explicit CriticNet(std::vector<LayerParams> layers) : layers_(std::move(layers)) { check(); }

  const std::vector<LayerParams>& layers() const { return layers_; }
  std::vector<LayerParams>& mutable_layers() { return layers_; }

  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  std::size_t hidden_layers() const { return layers_.empty() ? 0 : layers_.size() - 1; }

  /// Total parameter count of the architecture (the S of the network class).
  std::size_t parameter_count() const {
    std::size_t s = 0;
    for (const auto& l : layers_) s += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return s;
  }

  /// Number of parameter entries that are currently non-zero.
  std::size_t nonzero_parameters() const {
    std::size_t s = 0;
    for (const auto& l : layers_) {
      s += static_cast<std::size_t>((l.weight.array() != 0.0).count() +
                                    (l.bias.array() != 0.0).count());
    }
    return s;
  }

  double forward(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (static_cast<std::size_t>(x.size()) != input_dim()) {
      throw ShapeError("forward: input has dimension " + std::to_string(x.size()) +
                       ", critic expects " + std::to_string(input_dim()));
    }
    Eigen::VectorXd h = x;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      h = (layers_[l].weight * h + layers_[l].bias).cwiseMax(0.0);
    }
    return (layers_.back().weight * h)(0) + layers_.back().bias(0);
  }

  /// Outputs for every row of `points` (N x d).
  Eigen::VectorXd forward_batch(const Eigen::MatrixXd& points) const {
    if (static_cast<std::size_t>(points.cols()) != input_dim()) {
      throw ShapeError("forward_batch: points have dimension " + std::to_string(points.cols()) +
                       ", critic expects " + std::to_string(input_dim()));
    }
    Eigen::MatrixXd h = points.transpose();
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      Eigen::MatrixXd z = layers_[l].weight * h;
      z.colwise() += layers_[l].bias;
      h = z.cwiseMax(0.0);
    }
    Eigen::RowVectorXd out = layers_.back().weight * h;
    out.array() += layers_.back().bias(0);
    return out.transpose();
  }

  /// Replaces f by -f, which stays in the same Lipschitz class.
  void negate() {
    layers_.back().weight = -layers_.back().weight;
    layers_.back().bias = -layers_.back().bias;
  }

 private:
  void check() const {
    if (layers_.empty()) throw ShapeError("critic needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (layers_[l].bias.size() != layers_[l].weight.rows()) {
        throw ShapeError("layer " + std::to_string(l) + ": bias/weight mismatch");
      }
      if (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows()) {
        throw ShapeError("layer " + std::to_string(l) + ": input does not match previous output");
      }
    }
    if (layers_.back().weight.rows() != 1) throw ShapeError("critic output must be scalar");
  }

  std::vector<LayerParams> layers_;
};

// ---------------------------------------------------------------------------
// Spectral norm estimation

/// Persistent left singular-vector estimates, one per layer, used to warm
/// start power iteration between training steps.
struct SpectralState {
  std::vector<Eigen::VectorXd> u;
};

namespace detail {

inline Eigen::VectorXd random_unit(Eigen::Index dim, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(rng);
  const double nrm = v.norm();
  if (nrm == 0.0) {
    v.setOnes();
    return v / std::sqrt(static_cast<double>(dim));
  }
  return v / nrm;
}

/// One power-iteration sweep; updates u in place and returns ||W v||.
inline double power_sweep(const Eigen::MatrixXd& w, Eigen::VectorXd& u) {
  Eigen::VectorXd v = w.transpose() * u;
  const double vn = v.norm();
  if (vn == 0.0) return 0.0;  // u orthogonal to the row space, or W == 0
  v /= vn;
  Eigen::VectorXd wv = w * v;
  const double sigma = wv.norm();
  if (sigma > 0.0) u = wv / sigma;
  return sigma;
}

}  // namespace detail

/// Largest singular value by power iteration, run until successive estimates
/// differ by at most `rel_tol` (relative) or `max_iter` sweeps. The estimate
/// never exceeds the true value.
inline double spectral_norm(const Eigen::MatrixXd& w, Eigen::VectorXd& u, double rel_tol = 1e-8,
                            int max_iter = 20000) {
  if (w.size() == 0) return 0.0;
  if (w.rows() == 1) return w.norm();
  if (w.cols() == 1) return w.norm();
  double prev = detail::power_sweep(w, u);
  for (int it = 1; it < max_iter; ++it) {
    const double cur = detail::power_sweep(w, u);
    if (std::abs(cur - prev) <= rel_tol * std::max(cur, 1e-300)) return cur;
    prev = cur;
  }
  return prev;
}

inline double spectral_norm(const Eigen::MatrixXd& w, double rel_tol = 1e-8,
                            int max_iter = 20000) {
  Rng rng(0x5eedULL);
  Eigen::VectorXd u = detail::random_unit(w.rows(), rng);
  return spectral_norm(w, u, rel_tol, max_iter);
}

inline void ensure_spectral_state(const CriticNet& net, SpectralState& state, Rng& rng) {
  const auto& layers = net.layers();
  if (state.u.size() == layers.size()) return;
  state.u.clear();
  for (const auto& l : layers) state.u.push_back(detail::random_unit(l.weight.rows(), rng));
}

/// Divides each weight matrix by max(sigma_hat, 1), sigma_hat being the power
/// iteration estimate after `power_iterations` warm-started sweeps. Biases are
/// untouched. Returns the per-layer estimates.
inline std::vector<double> spectral_normalize(CriticNet& net, int power_iterations,
                                              SpectralState& state, Rng& rng) {
  if (power_iterations < 1) throw ConfigError("power_iterations must be >= 1");
  ensure_spectral_state(net, state, rng);
  std::vector<double> sigmas;
  auto& layers = net.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& w = layers[l].weight;
    double sigma = 0.0;
    if (w.rows() == 1 || w.cols() == 1) {
      sigma = w.norm();
    } else {
      for (int it = 0; it < power_iterations; ++it) sigma = detail::power_sweep(w, state.u[l]);
    }
    if (sigma > 1.0) w /= sigma;
    sigmas.push_back(sigma);
  }
  return sigmas;
}

inline CriticNet spectral_normalize(CriticNet net, int power_iterations, Rng& rng) {
  SpectralState state;
  spectral_normalize(net, power_iterations, state, rng);
  return net;
}

/// Normalizes with power iteration run to convergence, so the resulting
/// network carries a Lipschitz certificate of 1 up to kSpectralSlack.
inline void certify_lipschitz(CriticNet& net, SpectralState& state, Rng& rng) {
  ensure_spectral_state(net, state, rng);
  auto& layers = net.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& w = layers[l].weight;
    const double sigma = spectral_norm(w, state.u[l], 1e-13, 50000);
    if (sigma > 1.0) w /= sigma;
  }
}

/// Product of per-layer spectral norms (converged power iteration, tolerance
/// 1e-8 on successive estimates). Upper-bounds the Lipschitz constant of the
/// network since ReLU is 1-Lipschitz.
inline double lipschitz_upper_bound(const CriticNet& net) {
  double bound = 1.0;
  for (const auto& l : net.layers()) bound *= spectral_norm(l.weight, 1e-8);
  return bound;
}

// ---------------------------------------------------------------------------
// Construction

inline CriticNet init_critic(std::size_t d, const TrainConfig& cfg, Rng& rng) {
  if (d < 1) throw ConfigError("input dimension must be >= 1");
  cfg.validate();
  std::vector<LayerParams> layers;
  std::size_t in = d;
  auto make_layer = [&](std::size_t out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in));  // He uniform
    std::uniform_real_distribution<double> unif(-limit, limit);
    LayerParams p;
    p.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index j = 0; j < p.weight.cols(); ++j) {
      for (Eigen::Index i = 0; i < p.weight.rows(); ++i) p.weight(i, j) = unif(rng);
    }
    p.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
    layers.push_back(std::move(p));
    in = out;
  };
  for (int w : cfg.hidden_widths) make_layer(static_cast<std::size_t>(w));
  make_layer(1);
  CriticNet net(std::move(layers));
  SpectralState state;
  certify_lipschitz(net, state, rng);
  return net;
}

// ---------------------------------------------------------------------------
// Backpropagation

struct ObjectiveGradient {
  double objective = 0.0;  // sum_i w_i f(X_i)
  CriticGradient grad;
};

/// Value and parameter gradient of sum_i w_i f(X_i) over the rows of
/// `points`. The ReLU subgradient at 0 is taken as 0.
inline ObjectiveGradient objective_and_gradient(const CriticNet& net,
                                                const Eigen::Ref<const Eigen::VectorXd>& weights,
                                                const Eigen::MatrixXd& points) {
  if (weights.size() != points.rows()) {
    throw ShapeError("objective weights have length " + std::to_string(weights.size()) +
                     " but there are " + std::to_string(points.rows()) + " points");
  }
  if (static_cast<std::size_t>(points.cols()) != net.input_dim()) {
    throw ShapeError("points have dimension " + std::to_string(points.cols()) +
                     ", critic expects " + std::to_string(net.input_dim()));
  }
  const auto& layers = net.layers();
  const std::size_t nl = layers.size();

  // activations[l] is the input to layer l (in_dim x N).
  std::vector<Eigen::MatrixXd> activations(nl);
  activations[0] = points.transpose();
  for (std::size_t l = 0; l + 1 < nl; ++l) {
    Eigen::MatrixXd z = layers[l].weight * activations[l];
    z.colwise() += layers[l].bias;
    activations[l + 1] = z.cwiseMax(0.0);
  }
  Eigen::RowVectorXd out = layers.back().weight * activations.back();
  out.array() += layers.back().bias(0);

  ObjectiveGradient result;
  result.objective = out.dot(weights.transpose());
  result.grad.resize(nl);

  Eigen::MatrixXd delta = weights.transpose();  // 1 x N
  for (std::size_t l = nl; l-- > 0;) {
    result.grad[l].weight = delta * activations[l].transpose();
    result.grad[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = layers[l].weight.transpose() * delta;
    // activations[l] > 0 exactly where the pre-activation was positive.
    delta = back.cwiseProduct((activations[l].array() > 0.0).cast<double>().matrix());
  }
  return result;
}

inline CriticGradient batch_gradient(const CriticNet& net,
                                     const Eigen::Ref<const Eigen::VectorXd>& objective_weights,
                                     const Eigen::MatrixXd& points) {
  return objective_and_gradient(net, objective_weights, points).grad;
}

/// Gradient of f with respect to its input at x.
inline Eigen::VectorXd input_gradient(const CriticNet& net,
                                      const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto& layers = net.layers();
  std::vector<Eigen::VectorXd> masks;
  Eigen::VectorXd h = x;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    Eigen::VectorXd z = layers[l].weight * h + layers[l].bias;
    masks.push_back((z.array() > 0.0).cast<double>().matrix());
    h = z.cwiseMax(0.0);
  }
  Eigen::VectorXd g = layers.back().weight.transpose();
  for (std::size_t l = layers.size() - 1; l-- > 0;) {
    g = layers[l].weight.transpose() * g.cwiseProduct(masks[l]);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Optimizers (ascent)

struct OptimizerState {
  Optimizer kind = Optimizer::Adam;
  std::vector<LayerParams> first_moment;
  std::vector<LayerParams> second_moment;
  long step = 0;

  static OptimizerState for_net(const CriticNet& net, Optimizer kind) {
    OptimizerState s;
    s.kind = kind;
    if (kind == Optimizer::Adam) {
      for (const auto& l : net.layers()) {
        LayerParams zero{Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                         Eigen::VectorXd::Zero(l.bias.size())};
        s.first_moment.push_back(zero);
        s.second_moment.push_back(std::move(zero));
      }
    }
    return s;
  }
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// params <- params + update, i.e. one ascent step on the objective.
inline void optimizer_step(CriticNet& net, const CriticGradient& grads, OptimizerState& state,
                           const TrainConfig& cfg) {
  auto& layers = net.mutable_layers();
  if (grads.size() != layers.size()) throw ShapeError("gradient does not match critic layers");
  for (std::size_t l = 0; l < grads.size(); ++l) {
    if (!grads[l].weight.allFinite() || !grads[l].bias.allFinite()) {
      throw NumericError("non-finite gradient in layer " + std::to_string(l));
    }
  }
  const double lr = cfg.learning_rate;
  if (state.kind == Optimizer::SGD) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].weight += lr * grads[l].weight;
      layers[l].bias += lr * grads[l].bias;
    }
    ++state.step;
    return;
  }

  if (state.first_moment.size() != layers.size()) {
    throw ConfigError("Adam state is not initialized for this critic");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
    v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * g.cwiseProduct(g);
    param.array() += lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEps);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, state.first_moment[l].weight, state.second_moment[l].weight,
           grads[l].weight);
    update(layers[l].bias, state.first_moment[l].bias, state.second_moment[l].bias,
           grads[l].bias);
  }
}

}  // namespace wtest
