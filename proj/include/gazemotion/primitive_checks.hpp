#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gazemotion/gradcheck.hpp"
#include "gazemotion/ops.hpp"

namespace gazemotion {

/// Names under which ops appear on the tape (and that debug::corrupt_backward accepts).
inline const std::vector<std::string>& recorded_op_names() {
  static const std::vector<std::string> names{
      "add", "sub", "mul", "scale", "tanh", "arccos_clamped", "sum", "mean",
      "sum_axis", "add_broadcast", "matmul", "conv1d_same", "layer_norm", "dropout", "reshape", "permute",
      "concat", "slice", "pad_repeat_last", "normalize"};
  return names;
}

struct PrimitiveCheck {
  std::string op;
  GradCheckReport report;
};

/// Finite-difference checks of every differentiable primitive on small random
/// float64 tensors. Each loss is sum(op(...) * R) for a fixed random R.
inline std::vector<PrimitiveCheck> check_primitives(const GradCheckOptions& opts = {}, std::uint64_t seed = 7) {
  using T = Tensor<double>;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto randn = [&](Shape s) {
    T t(std::move(s));
    for (auto& v : t.data()) v = normal(rng);
    t.set_requires_grad(true);
    return t;
  };
  std::vector<PrimitiveCheck> out;
  auto run = [&](std::string op, std::function<T()> body, const NamedTensors<double>& params) {
    // R is drawn once so every evaluation sees the same loss.
    T r(body().shape());
    for (auto& v : r.data()) v = normal(rng);
    auto forward = [body, r]() { return sum(mul(body(), r)); };
    out.push_back({std::move(op), grad_check<double>(forward, params, opts)});
  };

  {
    auto a = randn({3, 4}), b = randn({3, 4});
    run("add", [=] { return add(a, b); }, {{"a", a}, {"b", b}});
    run("sub", [=] { return sub(a, b); }, {{"a", a}, {"b", b}});
    run("mul", [=] { return mul(a, b); }, {{"a", a}, {"b", b}});
    run("scale", [=] { return scale(a, 2.5); }, {{"a", a}});
    run("tanh", [=] { return tanh(a); }, {{"a", a}});
  }
  {
    auto x = randn({2, 3, 4}), b = randn({3});
    run("add_broadcast", [=] { return add_broadcast(x, b, 1); }, {{"x", x}, {"b", b}});
    run("sum_axis", [=] { return sum_axis(x, 1); }, {{"x", x}});
    run("mean", [=] { return reshape(mean(mul(x, x)), {1}); }, {{"x", x}});
    run("permute", [=] { return permute(x, {2, 0, 1}); }, {{"x", x}});
    run("reshape", [=] { return reshape(x, {6, 4}); }, {{"x", x}});
    run("repeat_axis", [=] { return repeat_axis(x, 1, 3); }, {{"x", x}});
    run("pad_repeat_last", [=] { return pad_repeat_last(x, 2, 7); }, {{"x", x}});
    run("slice", [=] { return slice(x, 2, 1, 3); }, {{"x", x}});
    std::mt19937_64 drop_rng(1);
    run("dropout (eval)", [=]() mutable { return dropout(x, 0.3, false, drop_rng); }, {{"x", x}});
  }
  {
    T x({6});
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    for (auto& v : x.data()) v = u(rng);
    x.set_requires_grad(true);
    run("arccos_clamped", [=] { return arccos_clamped(x, -1.0 + 1e-7, 1.0 - 1e-7); }, {{"x", x}});
  }
  {
    auto a = randn({3, 4}), b = randn({4, 2});
    run("matmul", [=] { return matmul(a, b); }, {{"a", a}, {"b", b}});
    auto x = randn({2, 3, 4}), m = randn({3, 5}), mt = randn({5, 3});
    run("matmul_axis", [=] { return matmul_axis(x, m, 1); }, {{"x", x}, {"m", m}});
    run("matmul_axis (transposed)", [=] { return matmul_axis(x, mt, 1, Transpose::yes); }, {{"x", x}, {"m", mt}});
  }
  {
    auto x = randn({3, 6}), k = randn({4, 3, 3}), b = randn({4});
    run("conv1d_same", [=] { return conv1d_same(x, k, b); }, {{"x", x}, {"kernels", k}, {"bias", b}});
  }
  {
    auto x = randn({4, 3}), g = randn({4}), b = randn({4});
    run("layer_norm", [=] { return layer_norm(x, 0, g, b); }, {{"x", x}, {"gain", g}, {"bias", b}});
  }
  {
    auto a = randn({2, 3}), b = randn({2, 2});
    run("concat", [=] { return concat<double>({a, b}, 1); }, {{"a", a}, {"b", b}});
  }
  {
    auto x = randn({3, 5});
    T fallback({3}, 0.0);
    fallback.data()[0] = 1.0;
    run("normalize", [=] { return normalize_axis(x, 0, fallback, 1e-8); }, {{"x", x}});
  }
  return out;
}

}  // namespace gazemotion
