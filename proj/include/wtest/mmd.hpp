#pragma once

// Gaussian-kernel MMD two-sample permutation test (baseline).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "wtest/error.hpp"
#include "wtest/parallel.hpp"
#include "wtest/random.hpp"
#include "wtest/sample.hpp"

namespace wtest {

struct MmdReport {
  double mmd2_unbiased = 0.0;
  double bandwidth = 0.0;
  std::size_t permutations = 0;
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

/// Pooled Gaussian kernel matrix k(a, b) = exp(-||a - b||^2 / (2 h^2)).
inline Eigen::MatrixXd gaussian_kernel_matrix(const Eigen::MatrixXd& z, double bandwidth) {
  const Eigen::VectorXd sq = z.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * z * z.transpose()).colwise() + sq;
  d2.rowwise() += sq.transpose();
  d2 = d2.cwiseMax(0.0);
  return (-d2 / (2.0 * bandwidth * bandwidth)).array().exp().matrix();
}

/// Unbiased MMD^2 for the split of the pooled kernel matrix given by `labels`
/// (first n entries form the x sample).
inline double mmd2_from_kernel(const Eigen::MatrixXd& k, const std::vector<Eigen::Index>& labels,
                               std::size_t n) {
  const std::size_t total = labels.size();
  const std::size_t m = total - n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t a = 0; a < total; ++a) {
    const Eigen::Index ia = labels[a];
    for (std::size_t b = a + 1; b < total; ++b) {
      const double v = k(ia, labels[b]);
      if (b < n) {
        sxx += v;
      } else if (a >= n) {
        syy += v;
      } else {
        sxy += v;
      }
    }
  }
  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);
  return 2.0 * sxx / (dn * (dn - 1.0)) + 2.0 * syy / (dm * (dm - 1.0)) - 2.0 * sxy / (dn * dm);
}

}  // namespace detail

inline double mmd2_unbiased(const Sample& x, const Sample& y, double bandwidth) {
  require_same_dim(x, y);
  if (x.n() < 2 || y.n() < 2) throw InputError("mmd2_unbiased needs at least two points per sample");
  if (!(bandwidth > 0.0)) throw InputError("bandwidth must be positive");
  const Eigen::MatrixXd k = detail::gaussian_kernel_matrix(stack_rows(x, y), bandwidth);
  std::vector<Eigen::Index> labels(x.n() + y.n());
  std::iota(labels.begin(), labels.end(), Eigen::Index{0});
  return detail::mmd2_from_kernel(k, labels, x.n());
}

/// Median of pairwise Euclidean distances in the pooled sample.
inline double median_heuristic_bandwidth(const Sample& x, const Sample& y) {
  const Eigen::MatrixXd z = stack_rows(x, y);
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(z.rows() * (z.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < z.rows(); ++j) dists.push_back((z.row(i) - z.row(j)).norm());
  }
  if (dists.empty()) throw InputError("bandwidth needs at least two points");
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  double h = *mid;
  if (dists.size() % 2 == 0) h = 0.5 * (h + *std::max_element(dists.begin(), mid));
  return h > 0.0 ? h : 1.0;  // all points identical
}

struct MmdOptions {
  double bandwidth = 0.0;  // 0 = median heuristic
  std::size_t threads = 0;
};

/// Permutation calibration: p = (1 + #{permuted >= observed}) / (1 + P).
inline MmdReport mmd_permutation_test(const Sample& x, const Sample& y, double alpha,
                                      std::size_t permutations, std::uint64_t seed,
                                      const MmdOptions& opts = {}) {
  require_same_dim(x, y);
  if (x.n() < 2 || y.n() < 2) throw InputError("MMD test needs at least two points per sample");
  if (permutations < 50) throw InputError("MMD test needs at least 50 permutations");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");

  MmdReport r;
  r.alpha = alpha;
  r.seed = seed;
  r.permutations = permutations;
  r.bandwidth = opts.bandwidth > 0.0 ? opts.bandwidth : median_heuristic_bandwidth(x, y);
  const Eigen::MatrixXd k = detail::gaussian_kernel_matrix(stack_rows(x, y), r.bandwidth);
  std::vector<Eigen::Index> identity(x.n() + y.n());
  std::iota(identity.begin(), identity.end(), Eigen::Index{0});
  r.mmd2_unbiased = detail::mmd2_from_kernel(k, identity, x.n());

  const std::vector<double> permuted = parallel_map(permutations, opts.threads, [&](std::size_t p) {
    Rng rng = make_stream(seed, p);
    std::vector<Eigen::Index> labels = identity;
    std::shuffle(labels.begin(), labels.end(), rng);
    return detail::mmd2_from_kernel(k, labels, x.n());
  });
  const auto exceed = std::count_if(permuted.begin(), permuted.end(),
                                    [&](double v) { return v >= r.mmd2_unbiased; });
  r.p_value = (1.0 + static_cast<double>(exceed)) / (1.0 + static_cast<double>(permutations));
  r.reject = r.p_value <= alpha;
  return r;
}

}  // namespace wtest
