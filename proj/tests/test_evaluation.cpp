#include <gtest/gtest.h>

#include <cmath>

#include "gazemotion/evaluation.hpp"
#include "gazemotion/motion_net.hpp"
#include "test_util.hpp"

using namespace gazemotion;

namespace {

// Window over a trajectory given per (frame, joint, axis).
template <typename F>
Window trajectory_window(std::size_t n, std::size_t t, std::size_t T, F&& position) {
  Window w;
  w.n_joints = n;
  w.observed = t;
  w.total = T;
  for (std::size_t k = 0; k < T; ++k)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t c = 0; c < 3; ++c) (k < t ? w.past_poses : w.future_poses).push_back(position(k, j, c));
  return w;
}

// Two-sided p-value by enumerating every sign pattern over mid-ranks of |d|.
double enumerated_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  const std::size_t n = d.size();
  if (n == 0) return 1.0;
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) ++below;
      if (std::abs(d[j]) == std::abs(d[i])) ++equal;
    }
    rank[i] = below + (equal + 1) / 2;
  }
  double observed = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) observed += rank[i];
  double le = 0, ge = 0;
  const std::uint64_t patterns = std::uint64_t{1} << n;
  for (std::uint64_t m = 0; m < patterns; ++m) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (m >> i & 1) w += rank[i];
    if (w <= observed + 1e-9) ++le;
    if (w >= observed - 1e-9) ++ge;
  }
  return std::min(1.0, 2.0 * std::min(le, ge) / static_cast<double>(patterns));
}

}  // namespace

TEST(ZeroVelocity, ConstantMotionHasZeroError) {
  const auto w = trajectory_window(3, 5, 15, [](std::size_t, std::size_t j, std::size_t c) {
    return static_cast<float>(0.1 * j + c);
  });
  const auto r = evaluate_windows({w}, zero_velocity_predict, {1, 10}, 30.0);
  EXPECT_EQ(r.report.average_mm, 0.0);
  EXPECT_EQ(constant_velocity_predict(w).values(), zero_velocity_predict(w).values());
}

TEST(ZeroVelocity, LinearMotionErrorGrowsWithHorizon) {
  const double v = 0.02;  // m per frame along x
  const auto w = trajectory_window(2, 4, 14, [&](std::size_t k, std::size_t, std::size_t c) {
    return c == 0 ? static_cast<float>(v * k) : 0.0f;
  });
  const auto r = evaluate_windows({w}, zero_velocity_predict, {1, 2, 5, 10}, 30.0);
  for (const auto& h : r.report.horizons) EXPECT_NEAR(h.mpjpe_mm, 1000.0 * v * h.frame, 1e-3);
}

TEST(ZeroVelocity, MatchesNetworkWithZeroEndWeight) {
  MotionNetConfig c;
  c.n_joints = 4;
  c.observed = 5;
  c.total = 15;
  c.blocks = 2;
  c.latent = 8;
  c.gaze_nodes = false;
  auto p = init_motion_params<float>(c, 1);
  std::fill(p.end.weight.data().begin(), p.end.weight.data().end(), 0.0f);
  const auto dct = build_dct<float>(15);
  std::mt19937_64 rng(1);
  std::normal_distribution<float> d;
  for (int i = 0; i < 10; ++i) {
    const auto w = trajectory_window(4, 5, 15, [&](std::size_t, std::size_t, std::size_t) { return d(rng); });
    const auto net = motion_predict(p, pose_only(pose_tensor<float>(w.past_poses, 4), 15), dct);
    const auto base = zero_velocity_predict(w);
    for (std::size_t k = 0; k < base.numel(); ++k) EXPECT_NEAR(net.data()[k], base.data()[k], 1e-5);
  }
}

TEST(ConstantVelocity, LinearMotionIsExact) {
  const auto w = trajectory_window(3, 6, 20, [](std::size_t k, std::size_t j, std::size_t c) {
    return static_cast<float>(0.5 + 0.01 * k * (c + 1) - 0.1 * j);
  });
  const auto r = evaluate_windows({w}, constant_velocity_predict, {14}, 30.0);
  EXPECT_LT(r.report.average_mm, 1e-2);  // float32 positions, millimeter output
}

TEST(ConstantVelocity, ParabolaClosedForm) {
  // x(k) = a k^2: the extrapolation error at future offset f is a (f^2 + f).
  const double a = 0.001;
  const std::size_t t = 5;
  const auto w = trajectory_window(1, t, 15, [&](std::size_t k, std::size_t, std::size_t c) {
    return c == 0 ? static_cast<float>(a * k * k) : 0.0f;
  });
  const auto r = evaluate_windows({w}, constant_velocity_predict, {1, 3, 10}, 30.0);
  for (const auto& h : r.report.horizons) {
    const double f = static_cast<double>(h.frame);
    EXPECT_NEAR(h.mpjpe_mm, 1000.0 * a * (f * f + f), 1e-3);
  }
}

TEST(ConstantVelocity, SingleObservedFrameFallsBack) {
  const auto w = trajectory_window(2, 1, 5, [](std::size_t k, std::size_t, std::size_t) { return float(k); });
  EXPECT_EQ(constant_velocity_predict(w).values(), zero_velocity_predict(w).values());
}

TEST(EvaluateWindows, PerWindowErrorsInOrder) {
  std::vector<Window> ws;
  for (int s = 0; s < 3; ++s)
    ws.push_back(trajectory_window(1, 2, 4, [&](std::size_t k, std::size_t, std::size_t c) {
      return c == 0 && k >= 2 ? static_cast<float>(s) : 0.0f;
    }));
  const auto r = evaluate_windows(ws, zero_velocity_predict, {2}, 30.0);
  ASSERT_EQ(r.window_errors.size(), 3u);
  for (int s = 0; s < 3; ++s) EXPECT_NEAR(r.window_errors[s], 1000.0 * s, 1e-9);
  EXPECT_NEAR(r.report.average_mm, 1000.0, 1e-9);
  EXPECT_EQ(r.report.windows, 3u);
}

TEST(SignedRank, Fixtures) {
  const std::vector<double> a{1, 2, 3, 4, 5, 6, 7};
  EXPECT_EQ(signed_rank_test(a, a), 1.0);
  std::vector<double> lo, hi;
  for (int i = 0; i < 10; ++i) {
    lo.push_back(i * 0.37);
    hi.push_back(i * 0.37 + 1.0 + 0.1 * i);
  }
  EXPECT_NEAR(signed_rank_test(lo, hi), 2.0 / 1024.0, 1e-15);
  EXPECT_NEAR(signed_rank_test(hi, lo), 2.0 / 1024.0, 1e-15);
  EXPECT_THROW(signed_rank_test({1, 2, 3}, {2, 3, 4}), ArgumentError);
  EXPECT_THROW(signed_rank_test(a, {1, 2}), ArgumentError);
}

TEST(SignedRank, MatchesEnumerationForSmallSamples) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> d;
  std::uniform_int_distribution<int> coarse(-3, 3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 6 + trial % 7;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Every third trial uses coarse values so ties and zero differences occur.
      a[i] = trial % 3 == 0 ? coarse(rng) : d(rng);
      b[i] = trial % 3 == 0 ? coarse(rng) : d(rng) + 0.3;
    }
    EXPECT_NEAR(signed_rank_test(a, b), enumerated_p(a, b), 1e-12) << "trial " << trial;
  }
}

TEST(SignedRank, NormalApproximationForLargeSamples) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> d;
  std::vector<double> a(60), b(60);
  for (std::size_t i = 0; i < 60; ++i) {
    a[i] = d(rng);
    b[i] = a[i] + 0.5 + 0.3 * d(rng);
  }
  EXPECT_LT(signed_rank_test(a, b), 1e-6);
  for (std::size_t i = 0; i < 60; ++i) b[i] = a[i] + 0.3 * d(rng);
  const double p = signed_rank_test(a, b);
  EXPECT_GT(p, 0.0);
  EXPECT_LE(p, 1.0);
}
