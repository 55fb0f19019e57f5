#pragma once

// Exact 1-Wasserstein distances between uniform empirical measures.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "wtest/error.hpp"
#include "wtest/sample.hpp"

namespace wtest {

inline constexpr std::size_t kDefaultTransportBudget = 250'000;

/// W1 between two univariate empirical measures: the L1 distance between
/// their quantile functions, accumulated exactly over the breakpoints
/// k/n and l/m (handled in integer units of 1/(nm)).
inline double wasserstein1_1d_exact(const Sample& x, const Sample& y) {
  if (x.d() != 1 || y.d() != 1) throw ShapeError("wasserstein1_1d_exact needs univariate samples");
  std::vector<double> a(x.data().data(), x.data().data() + x.n());
  std::vector<double> b(y.data().data(), y.data().data() + y.n());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::uint64_t n = a.size();
  const std::uint64_t m = b.size();
  std::uint64_t i = 0, j = 0, pos = 0;
  double acc = 0.0;
  while (i < n && j < m) {
    const std::uint64_t next_a = (i + 1) * m;
    const std::uint64_t next_b = (j + 1) * n;
    const std::uint64_t next = std::min(next_a, next_b);
    acc += static_cast<double>(next - pos) * std::abs(a[i] - b[j]);
    pos = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  return acc / (static_cast<double>(n) * static_cast<double>(m));
}

/// Optimal coupling with dual certificate. `flow(i, j)` is in units of
/// 1/(nm); potentials satisfy alpha_i + beta_j <= c_ij with equality on the
/// support of the plan.
struct TransportSolution {
  double cost = 0.0;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> flow;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;

  double dual_value() const {
    return alpha.mean() + beta.mean();
  }
};

/// Solves min sum_ij pi_ij ||x_i - y_j||_2 over couplings of the uniform
/// measures on x and y. Masses are scaled to integers (m units per source, n
/// per sink) and routed by successive shortest paths with Dijkstra on reduced
/// costs, which terminates with an exactly optimal primal/dual pair.
inline TransportSolution solve_transport(const Sample& x, const Sample& y,
                                         std::size_t budget = kDefaultTransportBudget) {
  require_same_dim(x, y);
  const std::size_t n = x.n();
  const std::size_t m = y.n();
  if (n == 0 || m == 0) throw InputError("transport needs nonempty samples");
  if (n * m > budget) {
    throw CapacityError("exact transport needs " + std::to_string(n * m) +
                        " cost entries, budget is " + std::to_string(budget));
  }

  const auto ni = static_cast<Eigen::Index>(n);
  const auto mi = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd cost(ni, mi);
  for (Eigen::Index i = 0; i < ni; ++i) {
    for (Eigen::Index j = 0; j < mi; ++j) {
      cost(i, j) = (x.data().row(i) - y.data().row(j)).norm();
    }
  }

  TransportSolution sol;
  sol.flow.setZero(ni, mi);
  std::vector<std::int64_t> supply(n, static_cast<std::int64_t>(m));
  std::vector<std::int64_t> demand(m, static_cast<std::int64_t>(n));
  // Node potentials: sources 0..n-1, sinks n..n+m-1. Reduced cost of the
  // forward arc i->j is c_ij + pot_i - pot_j >= 0.
  std::vector<double> pot(n + m, 0.0);

  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t nodes = n + m;
  std::vector<double> dist(nodes);
  std::vector<std::ptrdiff_t> pred(nodes);
  std::vector<char> done(nodes);
  std::int64_t remaining = static_cast<std::int64_t>(n * m);

  while (remaining > 0) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(pred.begin(), pred.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (supply[i] > 0) dist[i] = 0.0;
    }

    std::ptrdiff_t target = -1;
    double target_dist = inf;
    for (;;) {
      std::ptrdiff_t u = -1;
      double best = inf;
      for (std::size_t v = 0; v < nodes; ++v) {
        if (!done[v] && dist[v] < best) {
          best = dist[v];
          u = static_cast<std::ptrdiff_t>(v);
        }
      }
      if (u < 0) break;
      done[static_cast<std::size_t>(u)] = 1;
      const auto uu = static_cast<std::size_t>(u);
      if (uu >= n && demand[uu - n] > 0) {
        target = u;
        target_dist = best;
        break;
      }
      if (uu < n) {
        const auto i = static_cast<Eigen::Index>(uu);
        for (std::size_t j = 0; j < m; ++j) {
          const std::size_t v = n + j;
          if (done[v]) continue;
          const double rc = std::max(0.0, cost(i, static_cast<Eigen::Index>(j)) + pot[uu] - pot[v]);
          if (best + rc < dist[v]) {
            dist[v] = best + rc;
            pred[v] = u;
          }
        }
      } else {
        const auto j = static_cast<Eigen::Index>(uu - n);
        for (std::size_t i = 0; i < n; ++i) {
          if (done[i] || sol.flow(static_cast<Eigen::Index>(i), j) == 0) continue;
          const double rc = std::max(0.0, -cost(static_cast<Eigen::Index>(i), j) + pot[uu] - pot[i]);
          if (best + rc < dist[i]) {
            dist[i] = best + rc;
            pred[i] = u;
          }
        }
      }
    }
    if (target < 0) throw NumericError("transport: no augmenting path (internal error)");

    for (std::size_t v = 0; v < nodes; ++v) pot[v] += std::min(dist[v], target_dist);

    // Bottleneck along the path back to a source with spare supply.
    std::int64_t amount = demand[static_cast<std::size_t>(target) - n];
    std::ptrdiff_t v = target;
    while (pred[static_cast<std::size_t>(v)] >= 0) {
      const std::ptrdiff_t u = pred[static_cast<std::size_t>(v)];
      if (static_cast<std::size_t>(u) >= n) {  // backward arc v(source) <- u(sink)
        amount = std::min(amount, sol.flow(static_cast<Eigen::Index>(v),
                                           static_cast<Eigen::Index>(u - static_cast<std::ptrdiff_t>(n))));
      }
      v = u;
    }
    amount = std::min(amount, supply[static_cast<std::size_t>(v)]);

    v = target;
    while (pred[static_cast<std::size_t>(v)] >= 0) {
      const std::ptrdiff_t u = pred[static_cast<std::size_t>(v)];
      if (static_cast<std::size_t>(u) < n) {
        sol.flow(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v - static_cast<std::ptrdiff_t>(n))) += amount;
      } else {
        sol.flow(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u - static_cast<std::ptrdiff_t>(n))) -= amount;
      }
      v = u;
    }
    supply[static_cast<std::size_t>(v)] -= amount;
    demand[static_cast<std::size_t>(target) - n] -= amount;
    remaining -= amount;
  }

  const double scale = static_cast<double>(n) * static_cast<double>(m);
  double total = 0.0;
  for (Eigen::Index i = 0; i < ni; ++i) {
    for (Eigen::Index j = 0; j < mi; ++j) {
      if (sol.flow(i, j) != 0) total += static_cast<double>(sol.flow(i, j)) * cost(i, j);
    }
  }
  sol.cost = total / scale;
  sol.alpha.resize(ni);
  sol.beta.resize(mi);
  for (std::size_t i = 0; i < n; ++i) sol.alpha(static_cast<Eigen::Index>(i)) = -pot[i];
  for (std::size_t j = 0; j < m; ++j) sol.beta(static_cast<Eigen::Index>(j)) = pot[n + j];
  return sol;
}

inline double wasserstein1_lp_exact(const Sample& x, const Sample& y,
                                    std::size_t budget = kDefaultTransportBudget) {
  return solve_transport(x, y, budget).cost;
}

/// Exact W1, using the sorting formula in one dimension.
inline double wasserstein1_exact(const Sample& x, const Sample& y,
                                 std::size_t budget = kDefaultTransportBudget) {
  require_same_dim(x, y);
  if (x.d() == 1) return wasserstein1_1d_exact(x, y);
  return wasserstein1_lp_exact(x, y, budget);
}

}  // namespace wtest
