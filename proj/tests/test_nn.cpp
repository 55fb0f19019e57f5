#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_helpers.hpp"
#include "wtest/nn.hpp"

using namespace wtest;
using wtest::testing::random_net;
using wtest::testing::finite_difference_check;
using wtest::testing::FdResult;
using wtest::testing::svd_norm;


TEST(InitCritic, ShapesFollowTheArchitecture) {
  TrainConfig cfg;
  cfg.hidden_widths = {100, 100, 100};
  Rng rng(1);
  const CriticNet net = init_critic(2, cfg, rng);
  ASSERT_EQ(net.layers().size(), 4u);
  EXPECT_EQ(net.layers()[0].weight.rows(), 100);
  EXPECT_EQ(net.layers()[0].weight.cols(), 2);
  EXPECT_EQ(net.layers()[1].weight.rows(), 100);
  EXPECT_EQ(net.layers()[1].weight.cols(), 100);
  EXPECT_EQ(net.layers()[2].weight.rows(), 100);
  EXPECT_EQ(net.layers()[2].weight.cols(), 100);
  EXPECT_EQ(net.layers()[3].weight.rows(), 1);
  EXPECT_EQ(net.layers()[3].weight.cols(), 100);
  EXPECT_EQ(net.hidden_layers(), 3u);
  EXPECT_EQ(net.parameter_count(), 300u + 2u * 10100u + 101u);
  for (const auto& l : net.layers()) EXPECT_TRUE((l.bias.array() == 0.0).all());
}

TEST(InitCritic, IsNormalizedAtStepZero) {
  TrainConfig cfg;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const CriticNet net = init_critic(3, cfg, rng);
    EXPECT_LE(lipschitz_upper_bound(net), 1.0 + kSpectralSlack);
    for (const auto& l : net.layers()) EXPECT_LE(svd_norm(l.weight), 1.0 + kSpectralSlack);
  }
}

TEST(InitCritic, SameSeedGivesIdenticalParameters) {
  TrainConfig cfg;
  cfg.hidden_widths = {16, 8};
  Rng a(42), b(42);
  const CriticNet n1 = init_critic(2, cfg, a);
  const CriticNet n2 = init_critic(2, cfg, b);
  for (std::size_t l = 0; l < n1.layers().size(); ++l) {
    EXPECT_TRUE(n1.layers()[l].weight == n2.layers()[l].weight);
    EXPECT_TRUE(n1.layers()[l].bias == n2.layers()[l].bias);
  }
}

TEST(InitCritic, RejectsInvalidConfiguration) {
  Rng rng(0);
  TrainConfig cfg;
  EXPECT_THROW(init_critic(0, cfg, rng), ConfigError);
  cfg.hidden_widths.clear();
  EXPECT_THROW(init_critic(2, cfg, rng), ConfigError);
  cfg.hidden_widths = {4, 0};
  EXPECT_THROW(init_critic(2, cfg, rng), ConfigError);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.power_iterations = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Forward, ZeroWeightsReturnFinalBias) {
  std::mt19937_64 rng(3);
  CriticNet net = random_net(3, {5, 4}, rng);
  for (auto& l : net.mutable_layers()) {
    l.weight.setZero();
    l.bias.setZero();
  }
  net.mutable_layers().back().bias(0) = -0.75;
  for (int t = 0; t < 5; ++t) EXPECT_EQ(net.forward(Eigen::Vector3d::Random()), -0.75);
}

TEST(Forward, SingleLinearLayer) {
  LayerParams p{Eigen::MatrixXd(1, 2), Eigen::VectorXd::Zero(1)};
  p.weight << 1.0, 0.0;
  const CriticNet net({p});
  EXPECT_DOUBLE_EQ(net.forward(Eigen::Vector2d(0.3, 0.9)), 0.3);
}

TEST(Forward, DimensionMismatchThrows) {
  std::mt19937_64 rng(3);
  const CriticNet net = random_net(3, {5}, rng);
  EXPECT_THROW(net.forward(Eigen::Vector2d(0.1, 0.2)), ShapeError);
  EXPECT_THROW(net.forward_batch(Eigen::MatrixXd::Zero(4, 2)), ShapeError);
}

TEST(Forward, BatchMatchesPointwise) {
  std::mt19937_64 rng(5);
  const CriticNet net = random_net(2, {7, 6}, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(9, 2);
  const Eigen::VectorXd batch = net.forward_batch(x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    EXPECT_NEAR(batch(i), net.forward(x.row(i).transpose()), 1e-12);
  }
}

TEST(Forward, InputGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    const CriticNet net = random_net(3, {8, 6}, rng, 0.7);
    const Eigen::VectorXd x = Eigen::VectorXd::Random(3);
    const Eigen::VectorXd g = input_gradient(net, x);
    for (Eigen::Index j = 0; j < 3; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      const double fd = (net.forward(xp) - net.forward(xm)) / (2.0 * h);
      EXPECT_NEAR(fd, g(j), 1e-5);
    }
  }
}

TEST(BatchGradient, ZeroWeightsGiveZeroGradient) {
  std::mt19937_64 rng(2);
  const CriticNet net = random_net(2, {5, 5}, rng);
  const CriticGradient g = batch_gradient(net, Eigen::VectorXd::Zero(6), Eigen::MatrixXd::Random(6, 2));
  for (const auto& l : g) {
    EXPECT_TRUE((l.weight.array() == 0.0).all());
    EXPECT_TRUE((l.bias.array() == 0.0).all());
  }
}

TEST(BatchGradient, MatchesCentralDifferencesOnTwoLayerNet) {
  std::mt19937_64 rng(7);
  const CriticNet net = random_net(2, {6, 5}, rng, 0.8);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 2);
  const Eigen::VectorXd w = Eigen::VectorXd::Random(4);
  const FdResult r = finite_difference_check(net, w, x, 1e-5);
  EXPECT_GT(r.checked, 40u);
  EXPECT_LE(r.max_rel_error, 1e-5);
}

TEST(BatchGradient, LinearInTheObjectiveWeights) {
  std::mt19937_64 rng(9);
  const CriticNet net = random_net(2, {6}, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 2);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Random(4, 2);
  Eigen::MatrixXd z(7, 2);
  z << x, y;
  Eigen::VectorXd w(7);
  w << Eigen::VectorXd::Constant(3, -1.0 / 3.0), Eigen::VectorXd::Constant(4, 0.25);
  const CriticGradient joint = batch_gradient(net, w, z);
  const CriticGradient gx = batch_gradient(net, Eigen::VectorXd::Constant(3, 1.0 / 3.0), x);
  const CriticGradient gy = batch_gradient(net, Eigen::VectorXd::Constant(4, 0.25), y);
  for (std::size_t l = 0; l < joint.size(); ++l) {
    EXPECT_LE((joint[l].weight - (gy[l].weight - gx[l].weight)).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LE((joint[l].bias - (gy[l].bias - gx[l].bias)).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(BatchGradient, ShapeErrors) {
  std::mt19937_64 rng(9);
  const CriticNet net = random_net(2, {6}, rng);
  EXPECT_THROW(batch_gradient(net, Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Zero(4, 2)), ShapeError);
  EXPECT_THROW(batch_gradient(net, Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Zero(4, 3)), ShapeError);
}

TEST(SpectralNormalize, DiagonalMatrix) {
  LayerParams hidden{Eigen::MatrixXd(2, 2), Eigen::VectorXd::Zero(2)};
  hidden.weight << 2.0, 0.0, 0.0, 0.5;
  LayerParams out{Eigen::MatrixXd(1, 2), Eigen::VectorXd::Zero(1)};
  out.weight << 0.6, 0.0;
  Rng rng(0);
  const CriticNet net = spectral_normalize(CriticNet({hidden, out}), 30, rng);
  EXPECT_NEAR(net.layers()[0].weight(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(net.layers()[0].weight(1, 1), 0.25, 1e-12);
  EXPECT_NEAR(net.layers()[0].weight(0, 1), 0.0, 1e-15);
  EXPECT_EQ(net.layers()[1].weight(0, 0), 0.6);  // norm 0.6 < 1: untouched
}

TEST(SpectralNormalize, LeavesContractionsAlone) {
  std::mt19937_64 gen(4);
  Eigen::MatrixXd w = Eigen::MatrixXd::Random(5, 4);
  w *= 0.8 / svd_norm(w);
  LayerParams hidden{w, Eigen::VectorXd::Ones(5)};
  LayerParams out{Eigen::MatrixXd::Constant(1, 5, 0.1), Eigen::VectorXd::Zero(1)};
  Rng rng(1);
  const CriticNet net = spectral_normalize(CriticNet({hidden, out}), 30, rng);
  EXPECT_TRUE(net.layers()[0].weight == w);
  EXPECT_TRUE(net.layers()[0].bias == Eigen::VectorXd::Ones(5));
}

TEST(SpectralNormalize, PowerIterationAgreesWithDenseSvd) {
  // Uniform [0,1) entries.
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> unif;
  Eigen::MatrixXd w(50, 50);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = unif(gen);
  const double exact = svd_norm(w);

  Rng rng(7);
  Eigen::VectorXd u = detail::random_unit(50, rng);
  double est = 0.0;
  for (int it = 0; it < 30; ++it) est = detail::power_sweep(w, u);
  EXPECT_LE(std::abs(est - exact) / exact, 1e-4);
  EXPECT_LE(est, exact * (1.0 + 1e-12));
}

TEST(SpectralNormalize, ConvergedNormOnGaussianMatrices) {
  // Gaussian matrices have a small top spectral gap, so a fixed sweep count
  // is not enough; the converged routine still matches the SVD.
  std::mt19937_64 gen(99);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 10; ++t) {
    Eigen::MatrixXd w(50, 50);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(gen);
    const double exact = svd_norm(w);
    const double est = spectral_norm(w, 1e-13);
    EXPECT_LE(std::abs(est - exact) / exact, 1e-5);
  }
}

TEST(LipschitzUpperBound, RankOneRow) {
  LayerParams p{Eigen::MatrixXd(1, 3), Eigen::VectorXd::Zero(1)};
  p.weight << 3.0 / std::sqrt(3.0), 3.0 / std::sqrt(3.0), 3.0 / std::sqrt(3.0);
  EXPECT_NEAR(lipschitz_upper_bound(CriticNet({p})), 3.0, 1e-12);
}

TEST(LipschitzUpperBound, ProductOverLayers) {
  LayerParams a{Eigen::MatrixXd(2, 2), Eigen::VectorXd::Zero(2)};
  a.weight << 0.5, 0.0, 0.0, 0.25;
  LayerParams b{Eigen::MatrixXd(1, 2), Eigen::VectorXd::Zero(1)};
  b.weight << 0.3, 0.4;
  EXPECT_NEAR(lipschitz_upper_bound(CriticNet({a, b})), 0.25, 1e-9);
}

TEST(LipschitzProperty, NormalizedNetsAreOneLipschitz) {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 5; ++trial) {
    CriticNet net = random_net(3, {20, 20}, gen, 1.5);
    Rng rng(static_cast<std::uint64_t>(trial));
    SpectralState state;
    certify_lipschitz(net, state, rng);
    EXPECT_LE(lipschitz_upper_bound(net), 1.0 + kSpectralSlack);
    for (int k = 0; k < 1000; ++k) {
      Eigen::VectorXd a(3), b(3);
      for (int j = 0; j < 3; ++j) {
        a(j) = u(gen);
        b(j) = u(gen);
      }
      EXPECT_LE(std::abs(net.forward(a) - net.forward(b)), (1.0 + kSpectralSlack) * (a - b).norm());
    }
  }
}

TEST(Forward, IsDeterministic) {
  std::mt19937_64 gen(1);
  const CriticNet net = random_net(2, {10, 10}, gen);
  const Eigen::Vector2d x(0.25, -0.5);
  const double first = net.forward(x);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(net.forward(x), first);
}

TEST(OptimizerStep, SgdScalarParameter) {
  LayerParams p{Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1)};
  CriticNet net({p});
  CriticGradient g{{Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Zero(1)}};
  TrainConfig cfg;
  cfg.optimizer = Optimizer::SGD;
  cfg.learning_rate = 0.1;
  OptimizerState state = OptimizerState::for_net(net, cfg.optimizer);
  optimizer_step(net, g, state, cfg);
  EXPECT_DOUBLE_EQ(net.layers()[0].weight(0, 0), 0.1);
  EXPECT_EQ(net.layers()[0].bias(0), 0.0);
}

TEST(OptimizerStep, AdamFirstStepIsLearningRateTimesSign) {
  LayerParams p{Eigen::MatrixXd::Zero(1, 3), Eigen::VectorXd::Zero(1)};
  CriticNet net({p});
  CriticGradient g{{Eigen::MatrixXd(1, 3), Eigen::VectorXd::Constant(1, -0.02)}};
  g[0].weight << 2.5, -1e-3, 40.0;
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  OptimizerState state = OptimizerState::for_net(net, Optimizer::Adam);
  optimizer_step(net, g, state, cfg);
  EXPECT_NEAR(net.layers()[0].weight(0, 0), 0.01, 1e-8);
  EXPECT_NEAR(net.layers()[0].weight(0, 1), -0.01, 1e-6);
  EXPECT_NEAR(net.layers()[0].weight(0, 2), 0.01, 1e-8);
  EXPECT_NEAR(net.layers()[0].bias(0), -0.01, 1e-7);
}

TEST(OptimizerStep, ZeroGradientLeavesParametersUnchanged) {
  std::mt19937_64 gen(5);
  for (Optimizer kind : {Optimizer::SGD, Optimizer::Adam}) {
    CriticNet net = random_net(2, {4}, gen);
    const CriticNet before = net;
    CriticGradient zero;
    for (const auto& l : net.layers()) {
      zero.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    }
    TrainConfig cfg;
    cfg.optimizer = kind;
    OptimizerState state = OptimizerState::for_net(net, kind);
    for (int s = 0; s < 3; ++s) optimizer_step(net, zero, state, cfg);
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      EXPECT_TRUE(net.layers()[l].weight == before.layers()[l].weight);
      EXPECT_TRUE(net.layers()[l].bias == before.layers()[l].bias);
    }
  }
}

TEST(OptimizerStep, NonFiniteGradientReportsLayer) {
  std::mt19937_64 gen(5);
  CriticNet net = random_net(2, {4, 3}, gen);
  CriticGradient g;
  for (const auto& l : net.layers()) {
    g.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  }
  g[1].bias(0) = std::nan("");
  TrainConfig cfg;
  OptimizerState state = OptimizerState::for_net(net, cfg.optimizer);
  try {
    optimizer_step(net, g, state, cfg);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos);
  }
}

TEST(CriticNet, ParameterCounts) {
  std::mt19937_64 gen(5);
  CriticNet net = random_net(2, {4}, gen);
  EXPECT_EQ(net.parameter_count(), 4u * 2u + 4u + 4u + 1u);
  EXPECT_EQ(net.nonzero_parameters(), net.parameter_count());
  net.mutable_layers()[0].weight(0, 0) = 0.0;
  EXPECT_EQ(net.nonzero_parameters(), net.parameter_count() - 1);
}

TEST(CriticNet, RejectsInconsistentLayers) {
  LayerParams a{Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(3)};
  LayerParams b{Eigen::MatrixXd::Zero(1, 4), Eigen::VectorXd::Zero(1)};
  EXPECT_THROW(CriticNet({a, b}), ShapeError);
  LayerParams c{Eigen::MatrixXd::Zero(2, 3), Eigen::VectorXd::Zero(2)};
  EXPECT_THROW(CriticNet({a, c}), ShapeError);  // output is not scalar
}
