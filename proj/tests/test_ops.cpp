#include <gtest/gtest.h>

#include <cmath>

#include "gazemotion/ops.hpp"
#include "gazemotion/primitive_checks.hpp"
#include "test_util.hpp"

using namespace gazemotion;
using testutil::randn;

namespace {

/// loss = sum(op(...) * R) for a fixed random R; compares every listed input.
void expect_fd_agreement(const std::function<Tensor<double>()>& op, const std::vector<Tensor<double>>& inputs,
                         std::mt19937_64& rng, double tol = 1e-6) {
  const auto probe = op();
  const auto r = randn(probe.shape(), rng, false);
  auto f = [&] { return sum(mul(op(), r)); };
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto a = testutil::analytic_grad(f, inputs[i]);
    const auto n = testutil::numeric_grad(f, inputs[i]);
    EXPECT_LT(testutil::max_rel_error(a, n), tol) << "input " << i;
  }
}

}  // namespace

TEST(Matmul, IdentityLeavesOperand) {
  Tensor<float> a({2, 2}, {1, 0, 0, 1});
  Tensor<float> b({2, 2}, {3, 4, 5, 6});
  EXPECT_EQ(matmul(a, b).values(), (std::vector<float>{3, 4, 5, 6}));
}

TEST(Matmul, RowTimesColumn) {
  Tensor<float> a({1, 2}, {1, 2});
  Tensor<float> b({2, 1}, {3, 4});
  const auto c = matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{1, 1}));
  EXPECT_EQ(c.item(), 11.0f);
}

TEST(Matmul, MismatchNamesBothShapes) {
  Tensor<float> a({2, 3});
  Tensor<float> b({2, 2});
  try {
    matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[2x2]"), std::string::npos);
  }
}

TEST(MatmulAxis, ContractsMiddleAxis) {
  std::mt19937_64 rng(1);
  auto x = randn({2, 3, 4}, rng, false);
  auto m = randn({3, 5}, rng, false);
  const auto y = matmul_axis(x, m, 1);
  ASSERT_EQ(y.shape(), (Shape{2, 5, 4}));
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t c = 0; c < 4; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < 3; ++k) s += x.at(a, k, c) * m.at(k, j);
        EXPECT_NEAR(y.at(a, j, c), s, 1e-12);
      }
  const auto yt = matmul_axis(x, m, 1, Transpose::no);
  EXPECT_EQ(yt.values(), y.values());
}

TEST(MatmulAxis, TransposedUsesRows) {
  std::mt19937_64 rng(2);
  auto x = randn({2, 3, 4}, rng, false);
  auto m = randn({5, 3}, rng, false);
  const auto y = matmul_axis(x, m, 1, Transpose::yes);
  ASSERT_EQ(y.shape(), (Shape{2, 5, 4}));
  double s = 0.0;
  for (std::size_t k = 0; k < 3; ++k) s += m.at(4, k) * x.at(1, k, 2);
  EXPECT_NEAR(y.at(1, 4, 2), s, 1e-12);
}

TEST(Conv1d, ZeroInputGivesBias) {
  std::mt19937_64 rng(3);
  Tensor<double> x({3, 10});
  auto k = randn({4, 3, 3}, rng, false);
  Tensor<double> b({4}, {0.5, -1.0, 2.0, 0.0});
  const auto y = conv1d_same(x, k, b);
  ASSERT_EQ(y.shape(), (Shape{4, 10}));
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t t = 0; t < 10; ++t) EXPECT_EQ(y.at(c, t), b.at(c));
}

TEST(Conv1d, IdentityKernel) {
  Tensor<float> x({1, 4}, {1, 2, 3, 4});
  Tensor<float> k({1, 1, 3}, {0, 1, 0});
  Tensor<float> b({1}, 0.0f);
  EXPECT_EQ(conv1d_same(x, k, b).values(), (std::vector<float>{1, 2, 3, 4}));
}

TEST(Conv1d, BoxKernelWithZeroPadding) {
  Tensor<float> x({1, 4}, {1, 2, 3, 4});
  Tensor<float> k({1, 1, 3}, {1, 1, 1});
  Tensor<float> b({1}, 0.0f);
  EXPECT_EQ(conv1d_same(x, k, b).values(), (std::vector<float>{3, 6, 9, 7}));
}

TEST(Conv1d, ChannelMismatch) {
  EXPECT_THROW(conv1d_same(Tensor<float>({2, 5}), Tensor<float>({4, 3, 3}), Tensor<float>({4})), DimensionError);
}

TEST(LayerNorm, ConstantInputIsZero) {
  Tensor<double> x({4}, 1.0);
  const auto y = layer_norm(x, 0, Tensor<double>({4}, 1.0), Tensor<double>({4}, 0.0));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, UnitVarianceInEpsLimit) {
  Tensor<double> x({2}, {-1.0, 1.0});
  const auto y = layer_norm(x, 0, Tensor<double>({2}, 1.0), Tensor<double>({2}, 0.0), 1e-12);
  EXPECT_NEAR(y.at(0), -1.0, 1e-9);
  EXPECT_NEAR(y.at(1), 1.0, 1e-9);
}

TEST(LayerNorm, AffineAfterNormalization) {
  Tensor<double> x({2}, {-1.0, 1.0});
  const auto y = layer_norm(x, 0, Tensor<double>({2}, 2.0), Tensor<double>({2}, 3.0), 1e-12);
  EXPECT_NEAR(y.at(0), 1.0, 1e-9);
  EXPECT_NEAR(y.at(1), 5.0, 1e-9);
}

TEST(LayerNorm, NormalizesAlongChosenAxis) {
  std::mt19937_64 rng(4);
  auto x = randn({5, 3}, rng, false);
  const auto y = layer_norm(x, 0, Tensor<double>({5}, 1.0), Tensor<double>({5}, 0.0), 1e-12);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < 5; ++i) m += y.at(i, c);
    m /= 5.0;
    for (std::size_t i = 0; i < 5; ++i) v += (y.at(i, c) - m) * (y.at(i, c) - m);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 5.0, 1.0, 1e-9);
  }
}

TEST(LayerNorm, AxisOutOfRange) {
  EXPECT_THROW(layer_norm(Tensor<double>({2, 3}), 2, Tensor<double>({3}), Tensor<double>({3})), DimensionError);
  EXPECT_THROW(layer_norm(Tensor<double>({2, 3}), 0, Tensor<double>({3}), Tensor<double>({3})), DimensionError);
}

TEST(Dropout, EvalModeIsIdentity) {
  std::mt19937_64 rng(5), a(1), b(2);
  auto x = randn({6, 6}, rng, false);
  EXPECT_EQ(dropout(x, 0.3, false, a).values(), x.values());
  EXPECT_EQ(dropout(x, 0.3, false, b).values(), x.values());
}

TEST(Dropout, TrainModeZeroFractionAndScale) {
  Tensor<double> x({10000}, 1.0);
  std::mt19937_64 rng(6);
  const auto y = dropout(x, 0.3, true, rng);
  std::size_t zeros = 0;
  for (double v : y.values()) {
    if (v == 0.0)
      ++zeros;
    else
      EXPECT_NEAR(v, 1.0 / 0.7, 1e-12);
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 10000.0, 0.3, 0.02);
}

TEST(Dropout, MarksTapeStochastic) {
  auto x = Tensor<double>({4}, 1.0).set_requires_grad(true);
  std::mt19937_64 rng(0);
  Tape<double> tape;
  {
    auto rec = tape.record();
    (void)dropout(x, 0.3, false, rng);
    EXPECT_FALSE(tape.stochastic());
    (void)dropout(x, 0.3, true, rng);
  }
  EXPECT_TRUE(tape.stochastic());
}

TEST(Layout, ConcatSlicePermute) {
  Tensor<float> a({2, 2}, {1, 2, 3, 4});
  Tensor<float> b({2, 1}, {5, 6});
  const auto c = concat<float>({a, b}, 1);
  EXPECT_EQ(c.values(), (std::vector<float>{1, 2, 5, 3, 4, 6}));
  EXPECT_EQ(slice(c, 1, 1, 3).values(), (std::vector<float>{2, 5, 4, 6}));
  const auto p = permute(c, {1, 0});
  EXPECT_EQ(p.shape(), (Shape{3, 2}));
  EXPECT_EQ(p.values(), (std::vector<float>{1, 3, 2, 4, 5, 6}));
}

TEST(Layout, PadRepeatLast) {
  Tensor<float> x({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(pad_repeat_last(x, 1, 4).values(), (std::vector<float>{1, 2, 2, 2, 3, 4, 4, 4}));
  EXPECT_EQ(pad_repeat_last(x, 1, 2).values(), x.values());
  EXPECT_THROW(pad_repeat_last(x, 1, 1), ArgumentError);
}

TEST(Normalize, UnitColumnsAndFallback) {
  Tensor<double> x({3, 2}, {3, 0, 4, 0, 0, 1e-12});
  Tensor<double> fallback({3}, {0, 1, 0});
  const auto y = normalize_axis(x, 0, fallback, 1e-8);
  EXPECT_NEAR(y.at(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(y.at(1, 0), 0.8, 1e-15);
  EXPECT_EQ(y.at(0, 1), 0.0);
  EXPECT_EQ(y.at(1, 1), 1.0);
  EXPECT_EQ(y.at(2, 1), 0.0);
}

TEST(ArccosClamped, ClampsAtBounds) {
  Tensor<double> x({3}, {1.0, -1.0, 0.0});
  const double lo = -1.0 + 1e-7, hi = 1.0 - 1e-7;
  const auto y = arccos_clamped(x, lo, hi);
  EXPECT_NEAR(y.at(0), std::acos(hi), 1e-15);
  EXPECT_NEAR(y.at(1), std::acos(lo), 1e-15);
  EXPECT_NEAR(y.at(2), M_PI / 2, 1e-15);
}

// Finite-difference agreement of every differentiable primitive (float64, eps 1e-5).

TEST(PrimitiveGradients, Elementwise) {
  std::mt19937_64 rng(10);
  auto a = randn({3, 4}, rng), b = randn({3, 4}, rng);
  expect_fd_agreement([&] { return add(a, b); }, {a, b}, rng);
  expect_fd_agreement([&] { return sub(a, b); }, {a, b}, rng);
  expect_fd_agreement([&] { return mul(a, b); }, {a, b}, rng);
  expect_fd_agreement([&] { return scale(a, -1.75); }, {a}, rng);
  expect_fd_agreement([&] { return tanh(a); }, {a}, rng);
}

TEST(PrimitiveGradients, ReductionsAndBroadcast) {
  std::mt19937_64 rng(11);
  auto x = randn({2, 3, 4}, rng), b = randn({4}, rng);
  expect_fd_agreement([&] { return add_broadcast(x, b, 2); }, {x, b}, rng);
  expect_fd_agreement([&] { return sum_axis(x, 0); }, {x}, rng);
  expect_fd_agreement([&] { return mean(mul(x, x)); }, {x}, rng);
}

TEST(PrimitiveGradients, Matmul) {
  std::mt19937_64 rng(12);
  auto a = randn({3, 4}, rng), b = randn({4, 2}, rng);
  expect_fd_agreement([&] { return matmul(a, b); }, {a, b}, rng);
  auto x = randn({2, 3, 4}, rng), m0 = randn({2, 3}, rng), m2 = randn({5, 4}, rng);
  expect_fd_agreement([&] { return matmul_axis(x, m0, 0); }, {x, m0}, rng);
  expect_fd_agreement([&] { return matmul_axis(x, m2, 2, Transpose::yes); }, {x, m2}, rng);
}

TEST(PrimitiveGradients, ConvAndLayerNorm) {
  std::mt19937_64 rng(13);
  auto x = randn({3, 6}, rng), k = randn({4, 3, 3}, rng), b = randn({4}, rng);
  expect_fd_agreement([&] { return conv1d_same(x, k, b); }, {x, k, b}, rng);
  auto h = randn({5, 4}, rng), g = randn({5}, rng), beta = randn({5}, rng);
  expect_fd_agreement([&] { return layer_norm(h, 0, g, beta); }, {h, g, beta}, rng);
  const auto g1 = randn({4}, rng, false), b1 = randn({4}, rng, false);
  expect_fd_agreement([&] { return layer_norm(h, 1, g1, b1); }, {h}, rng);
}

TEST(PrimitiveGradients, Layout) {
  std::mt19937_64 rng(14);
  auto a = randn({2, 3}, rng), b = randn({2, 2}, rng), x = randn({2, 3, 4}, rng);
  expect_fd_agreement([&] { return concat<double>({a, b}, 1); }, {a, b}, rng);
  expect_fd_agreement([&] { return permute(x, {2, 0, 1}); }, {x}, rng);
  expect_fd_agreement([&] { return slice(x, 1, 1, 3); }, {x}, rng);
  expect_fd_agreement([&] { return reshape(x, {4, 6}); }, {x}, rng);
  expect_fd_agreement([&] { return repeat_axis(x, 0, 3); }, {x}, rng);
  expect_fd_agreement([&] { return pad_repeat_last(x, 2, 6); }, {x}, rng);
  std::mt19937_64 unused(0);
  expect_fd_agreement([&] { return dropout(x, 0.3, false, unused); }, {x}, rng);
}

TEST(PrimitiveGradients, ArccosAndNormalize) {
  std::mt19937_64 rng(15);
  Tensor<double> c({5}, {-0.8, -0.3, 0.0, 0.4, 0.9});
  c.set_requires_grad(true);
  expect_fd_agreement([&] { return arccos_clamped(c, -1.0 + 1e-7, 1.0 - 1e-7); }, {c}, rng);
  auto v = randn({3, 4}, rng);
  Tensor<double> fb({3}, {1.0, 0.0, 0.0});
  expect_fd_agreement([&] { return normalize_axis(v, 0, fb, 1e-8); }, {v}, rng);
}

TEST(PrimitiveGradients, LibrarySuitePasses) {
  GradCheckOptions opts;
  opts.tolerance = 1e-6;
  for (const auto& c : check_primitives(opts)) EXPECT_TRUE(c.report.passed()) << c.op;
}

TEST(PrimitiveGradients, LibrarySuiteNamesCorruptedOp) {
  debug::corrupt_backward("layer_norm");
  const auto checks = check_primitives();
  debug::clear_corruptions();
  for (const auto& c : checks) EXPECT_EQ(c.report.passed(), c.op != "layer_norm") << c.op;
}
