#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gazemotion/gaze_net.hpp"
#include "test_util.hpp"

using namespace gazemotion;

namespace {

template <typename S>
Tensor<S> random_directions(std::size_t t, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  Tensor<S> g({3, t});
  for (std::size_t f = 0; f < t; ++f) {
    double v[3], n = 0.0;
    for (double& c : v) {
      c = d(rng);
      n += c * c;
    }
    n = std::sqrt(n);
    for (std::size_t c = 0; c < 3; ++c) g.data()[c * t + f] = static_cast<S>(v[c] / n);
  }
  return g;
}

}  // namespace

TEST(GazeNet, ArchitectureShapes) {
  const auto p = init_gaze_params<float>(0);
  EXPECT_EQ(p.channels(), 32u);
  EXPECT_EQ(p.hidden[0].kernel.shape(), (Shape{32, 3, 3}));
  EXPECT_EQ(p.hidden[1].kernel.shape(), (Shape{32, 32, 3}));
  EXPECT_EQ(p.out_kernel.shape(), (Shape{3, 32, 3}));
  EXPECT_EQ(p.named().size(), 14u);
  EXPECT_EQ(p.named().front().first, "gaze.conv1.kernel");
}

TEST(GazeNet, OutputShape) {
  std::mt19937_64 rng(1);
  const auto p = init_gaze_params<float>(1);
  EXPECT_EQ(gaze_forward(p, random_directions<float>(10, rng)).shape(), (Shape{3, 10}));
  EXPECT_THROW(gaze_forward(p, Tensor<float>({2, 10})), DimensionError);
}

TEST(GazeNet, ZeroParametersFallBackToLastDirection) {
  auto p = init_gaze_params<double>(2);
  for (auto& [name, t] : p.named()) {
    Tensor<double> h = t;
    std::fill(h.data().begin(), h.data().end(), 0.0);
  }
  std::mt19937_64 rng(2);
  const auto past = random_directions<double>(6, rng);
  const auto y = gaze_forward(p, past);
  for (std::size_t f = 0; f < 6; ++f)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(y.at(c, f), past.at(c, 5));
}

TEST(GazeNet, UnitNormOutputs) {
  std::mt19937_64 rng(3);
  for (int draw = 0; draw < 100; ++draw) {
    const auto p = init_gaze_params<double>(static_cast<std::uint64_t>(draw), 8);
    const auto y = gaze_forward(p, random_directions<double>(5, rng));
    for (std::size_t f = 0; f < 5; ++f) {
      double n = 0.0;
      for (std::size_t c = 0; c < 3; ++c) n += y.at(c, f) * y.at(c, f);
      EXPECT_NEAR(std::sqrt(n), 1.0, 1e-6);
    }
  }
}

TEST(AngularLoss, Fixtures) {
  Tensor<double> x({3, 1}, {1, 0, 0}), y({3, 1}, {0, 1, 0}), z({3, 1}, {-1, 0, 0});
  EXPECT_LE(angular_loss(x, x).item(), 1e-3);
  EXPECT_NEAR(angular_loss(x, y).item(), std::numbers::pi / 2, 1e-12);
  EXPECT_NEAR(angular_loss(x, z).item(), std::numbers::pi, 1e-3);
  EXPECT_LE(angular_loss(x, z).item(), std::numbers::pi);
  EXPECT_THROW(angular_loss(x, Tensor<double>({3, 2})), DimensionError);
}

TEST(AngularLoss, MeanOverFrames) {
  Tensor<double> a({3, 2}, {1, 1, 0, 0, 0, 0});
  Tensor<double> b({3, 2}, {1, 0, 0, 1, 0, 0});
  EXPECT_NEAR(angular_loss(a, b).item(), (std::acos(1.0 - 1e-7) + std::numbers::pi / 2) / 2, 1e-12);
}

TEST(GazeNet, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(4);
  const auto p = init_gaze_params<double>(4);
  const auto past = random_directions<double>(4, rng);
  const auto truth = random_directions<double>(4, rng);
  const auto report =
      grad_check<double>([&] { return angular_loss(gaze_forward(p, past), truth); }, p.named());
  EXPECT_TRUE(report.passed()) << report.max_rel_error();
  EXPECT_LT(report.max_rel_error(), 1e-4);
}
