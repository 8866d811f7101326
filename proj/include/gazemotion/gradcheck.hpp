#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gazemotion/tensor.hpp"

namespace gazemotion {

template <typename S>
using NamedTensors = std::vector<std::pair<std::string, Tensor<S>>>;

struct GradCheckOptions {
  double eps = 1e-5;
  double tolerance = 1e-4;
  /// Parameters with more elements are checked on a random subsample of this size.
  std::size_t max_elements = 10000;
  std::uint64_t seed = 0;
  /// Lower bound on the relative-error denominator max(|analytic|, |numeric|);
  /// raised further to the finite-difference roundoff scale of the loss.
  double denom_floor = 1e-7;
};

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t total = 0;
  bool passed = true;
};

struct GradCheckReport {
  double tolerance = 0.0;
  std::vector<ParamCheck> params;

  bool passed() const {
    return std::all_of(params.begin(), params.end(), [](const ParamCheck& p) { return p.passed; });
  }
  double max_rel_error() const {
    double m = 0.0;
    for (const auto& p : params) m = std::max(m, p.max_rel_error);
    return m;
  }
};

/// Compares reverse-mode gradients of a scalar `forward()` against central
/// finite differences for every listed parameter.
///
/// `forward` must rebuild the computation from the current parameter values
/// each time it is called. A forward pass that records a stochastic op
/// (dropout in training mode) is rejected with ContractError.
template <typename S>
GradCheckReport grad_check(const std::function<Tensor<S>()>& forward, const NamedTensors<S>& params,
                           const GradCheckOptions& opts = {}) {
  for (const auto& [name, p] : params) {
    if (!p.requires_grad()) throw ContractError("grad_check: parameter '" + name + "' does not require grad");
  }
  Tape<S> tape;
  Tensor<S> loss;
  {
    auto rec = tape.record();
    loss = forward();
  }
  if (tape.stochastic()) {
    throw ContractError("grad_check: forward pass is stochastic (dropout enabled); disable dropout first");
  }
  const Gradients<S> grads = tape.compute_gradients(loss);

  auto eval = [&]() { return static_cast<double>(forward().item()); };
  // Central differences carry roundoff of about eps_mach * |loss| / eps; gradient
  // entries smaller than that over the tolerance are compared on this absolute scale.
  const double resolvable = std::numeric_limits<S>::epsilon() * std::max(1.0, std::abs(static_cast<double>(loss.item()))) /
                            (opts.eps * opts.tolerance);
  const double floor = std::max(opts.denom_floor, resolvable);

  GradCheckReport report;
  report.tolerance = opts.tolerance;
  std::mt19937_64 rng(opts.seed);
  for (auto [name, p] : params) {
    ParamCheck pc;
    pc.name = name;
    pc.total = p.numel();
    std::vector<std::size_t> idx(p.numel());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (idx.size() > opts.max_elements) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(opts.max_elements);
      std::sort(idx.begin(), idx.end());
    }
    const auto analytic = grads.of(p);
    auto data = p.data();
    for (std::size_t i : idx) {
      const S saved = data[i];
      data[i] = static_cast<S>(saved + opts.eps);
      const double fp = eval();
      data[i] = static_cast<S>(saved - opts.eps);
      const double fm = eval();
      data[i] = saved;
      const double numeric = (fp - fm) / (2.0 * opts.eps);
      const double a = analytic.empty() ? 0.0 : static_cast<double>(analytic[i]);
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      pc.max_rel_error = std::max(pc.max_rel_error, std::abs(a - numeric) / denom);
    }
    pc.checked = idx.size();
    pc.passed = pc.max_rel_error < opts.tolerance;
    report.params.push_back(std::move(pc));
  }
  return report;
}

}  // namespace gazemotion
