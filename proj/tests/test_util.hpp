#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gazemotion/tensor.hpp"

namespace testutil {

using gazemotion::Shape;
using gazemotion::Tensor;

inline Tensor<double> randn(Shape shape, std::mt19937_64& rng, bool requires_grad = true) {
  std::normal_distribution<double> d;
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = d(rng);
  t.set_requires_grad(requires_grad);
  return t;
}

/// Reverse-mode gradient of `f` w.r.t. `p`, read through the tape directly.
inline std::vector<double> analytic_grad(const std::function<Tensor<double>()>& f, const Tensor<double>& p) {
  gazemotion::Tape<double> tape;
  Tensor<double> loss;
  {
    auto rec = tape.record();
    loss = f();
  }
  const auto grads = tape.compute_gradients(loss);
  const auto g = grads.of(p);
  if (g.empty()) return std::vector<double>(p.numel(), 0.0);
  return {g.begin(), g.end()};
}

/// Central differences, evaluated without any tape.
inline std::vector<double> numeric_grad(const std::function<Tensor<double>()>& f, Tensor<double> p,
                                        double eps = 1e-5) {
  std::vector<double> out(p.numel());
  auto d = p.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double saved = d[i];
    d[i] = saved + eps;
    const double fp = f().item();
    d[i] = saved - eps;
    const double fm = f().item();
    d[i] = saved;
    out[i] = (fp - fm) / (2.0 * eps);
  }
  return out;
}

inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-7) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    m = std::max(m, std::abs(a[i] - b[i]) / denom);
  }
  return m;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("gazemotion_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
