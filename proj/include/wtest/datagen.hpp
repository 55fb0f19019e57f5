#pragma once

// Synthetic distributions used in the experiments, and the fixed-box map to
// [0, 1]^d.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wtest/error.hpp"
#include "wtest/random.hpp"
#include "wtest/sample.hpp"

namespace wtest {

enum class Family {
  Gaussian,         // N(param * 1, I)
  Exponential,      // Exp(1 + param) per coordinate
  GaussianMixture,  // 1/2 N(-4, 1) + 1/2 N(4, 1) per coordinate
  CirclePlain,      // uniform on x1^2 + x2^2 = 1/4
  CircleShift,      // uniform on (x1 - 0.08)^2 + x2^2 = 1/4
  CircleScale,      // uniform on x1^2 + x2^2 = (0.5 * 1.8)^2
  PointMass,        // all mass at `location`
};

struct DistSpec {
  Family family = Family::Gaussian;
  std::size_t d = 1;
  double param = 0.0;
  std::vector<double> location;  // PointMass only

  void validate() const {
    if (d < 1) throw InputError("distribution dimension must be >= 1");
    if (!std::isfinite(param)) throw InputError("distribution parameter must be finite");
    const bool circle = family == Family::CirclePlain || family == Family::CircleShift ||
                        family == Family::CircleScale;
    if (circle && d != 2) throw InputError("circle families require d = 2");
    if (family == Family::Exponential && !(1.0 + param > 0.0)) {
      throw InputError("exponential rate 1 + lambda must be positive");
    }
    if (family == Family::PointMass) {
      if (location.size() != d) throw InputError("point mass location must have d coordinates");
      for (double v : location) {
        if (!std::isfinite(v)) throw InputError("point mass location must be finite");
      }
    }
  }
};

/// Axis-aligned box [lo_k, hi_k] per dimension.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  static Box uniform(std::size_t d, double lo, double hi) {
    return Box{std::vector<double>(d, lo), std::vector<double>(d, hi)};
  }
};

/// Parses "gaussian", "gaussian:0.08", "exponential:0.08", "mixture",
/// "circle-plain", "circle-shift", "circle-scale", "point:0.5" or
/// "point:0.1,0.2".
inline DistSpec parse_dist(const std::string& text, std::size_t d) {
  DistSpec spec;
  spec.d = d;
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw InputError("");
      return v;
    } catch (...) {
      throw InputError("bad distribution parameter '" + s + "' in '" + text + "'");
    }
  };
  if (name == "gaussian" || name == "normal") {
    spec.family = Family::Gaussian;
  } else if (name == "exponential") {
    spec.family = Family::Exponential;
  } else if (name == "mixture") {
    spec.family = Family::GaussianMixture;
  } else if (name == "circle-plain") {
    spec.family = Family::CirclePlain;
  } else if (name == "circle-shift") {
    spec.family = Family::CircleShift;
  } else if (name == "circle-scale") {
    spec.family = Family::CircleScale;
  } else if (name == "point") {
    spec.family = Family::PointMass;
    std::stringstream ss(arg);
    std::string item;
    while (std::getline(ss, item, ',')) spec.location.push_back(number(item));
    if (spec.location.size() == 1 && d > 1) spec.location.assign(d, spec.location.front());
    spec.validate();
    return spec;
  } else {
    throw InputError("unknown distribution family '" + name + "'");
  }
  if (!arg.empty()) spec.param = number(arg);
  spec.validate();
  return spec;
}

/// Raw draws (circle families before the map to the unit box).
inline Sample generate(const DistSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw InputError("generate needs n >= 1");
  Rng rng = make_stream(seed, "generate");
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(spec.d);
  Eigen::MatrixXd data(rows, cols);
  std::normal_distribution<double> normal;

  switch (spec.family) {
    case Family::Gaussian:
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index k = 0; k < cols; ++k) data(i, k) = spec.param + normal(rng);
      break;
    case Family::Exponential: {
      std::exponential_distribution<double> expo(1.0 + spec.param);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index k = 0; k < cols; ++k) data(i, k) = expo(rng);
      break;
    }
    case Family::GaussianMixture: {
      std::bernoulli_distribution coin(0.5);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index k = 0; k < cols; ++k) data(i, k) = (coin(rng) ? 4.0 : -4.0) + normal(rng);
      break;
    }
    case Family::CirclePlain:
    case Family::CircleShift:
    case Family::CircleScale: {
      const double radius = spec.family == Family::CircleScale ? 0.5 * 1.8 : 0.5;
      const double cx = spec.family == Family::CircleShift ? 0.08 : 0.0;
      std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double t = angle(rng);
        data(i, 0) = cx + radius * std::cos(t);
        data(i, 1) = radius * std::sin(t);
      }
      break;
    }
    case Family::PointMass:
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index k = 0; k < cols; ++k) data(i, k) = spec.location[static_cast<std::size_t>(k)];
      break;
  }
  return Sample(std::move(data));
}

/// The fixed box each family is mapped from. Never data dependent.
inline Box default_box(const DistSpec& spec) {
  switch (spec.family) {
    case Family::Gaussian:
      return Box::uniform(spec.d, -6.0, 6.0);
    case Family::Exponential:
      return Box::uniform(spec.d, 0.0, 12.0);
    case Family::GaussianMixture:
      return Box::uniform(spec.d, -9.0, 9.0);
    case Family::CirclePlain:
    case Family::CircleShift:
    case Family::CircleScale:
      return Box::uniform(2, -1.0, 1.0);
    case Family::PointMass: {
      Box b;
      for (double c : spec.location) {
        const double lo = std::min(0.0, std::floor(c));
        b.lo.push_back(lo);
        b.hi.push_back(std::max(lo + 1.0, std::ceil(c)));
      }
      return b;
    }
  }
  throw InputError("unknown family");
}

/// (v - lo) / (hi - lo) per coordinate, clipped to [0, 1].
inline Sample rescale_to_unit_box(const Sample& x, const Box& box) {
  if (box.lo.size() != x.d() || box.hi.size() != x.d()) {
    throw InputError("box has " + std::to_string(box.lo.size()) + " dimensions, sample has " +
                     std::to_string(x.d()));
  }
  Eigen::MatrixXd out = x.data();
  for (Eigen::Index k = 0; k < out.cols(); ++k) {
    const double lo = box.lo[static_cast<std::size_t>(k)];
    const double hi = box.hi[static_cast<std::size_t>(k)];
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) {
      throw InputError("box bounds must satisfy lo < hi in dimension " + std::to_string(k));
    }
    out.col(k) = ((out.col(k).array() - lo) / (hi - lo)).cwiseMax(0.0).cwiseMin(1.0);
  }
  return Sample(std::move(out), true);
}

inline Sample generate_unit_box(const DistSpec& spec, std::size_t n, std::uint64_t seed) {
  return rescale_to_unit_box(generate(spec, n, seed), default_box(spec));
}

}  // namespace wtest
