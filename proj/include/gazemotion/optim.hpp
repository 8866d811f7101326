#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "gazemotion/tensor.hpp"

namespace gazemotion {

/// Bias-corrected Adam moments for a fixed list of parameters.
template <typename S>
struct AdamState {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<S>> m;
  std::vector<std::vector<S>> v;
};

template <typename S>
AdamState<S> make_adam(const std::vector<Tensor<S>>& params, double lr) {
  if (!(lr > 0.0)) throw ArgumentError("adam: learning rate must be positive");
  AdamState<S> st;
  st.lr = lr;
  for (const auto& p : params) {
    st.m.emplace_back(p.numel(), S(0));
    st.v.emplace_back(p.numel(), S(0));
  }
  return st;
}

/// One Adam update from the `.grad` buffers of `params`.
template <typename S>
void adam_step(AdamState<S>& st, const std::vector<Tensor<S>>& params) {
  if (params.size() != st.m.size()) throw ContractError("adam_step: parameter list does not match optimizer state");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) throw ContractError("adam_step: parameter " + std::to_string(i) + " has no gradient");
    if (params[i].numel() != st.m[i].size()) throw ContractError("adam_step: parameter shape changed");
  }
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  const S b1 = static_cast<S>(st.beta1), b2 = static_cast<S>(st.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<S> p = params[i];
    auto w = p.data();
    auto g = std::as_const(p).grad();
    auto& m = st.m[i];
    auto& v = st.v[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (S(1) - b1) * g[k];
      v[k] = b2 * v[k] + (S(1) - b2) * g[k] * g[k];
      const double m_hat = static_cast<double>(m[k]) / bc1;
      const double v_hat = static_cast<double>(v[k]) / bc2;
      w[k] = static_cast<S>(static_cast<double>(w[k]) - st.lr * m_hat / (std::sqrt(v_hat) + st.eps));
    }
  }
}

/// lr0 * factor^epoch.
inline double epoch_decay(double lr0, std::size_t epoch, double factor) {
  if (!(factor > 0.0 && factor <= 1.0)) throw ArgumentError("epoch_decay: factor must be in (0, 1]");
  return lr0 * std::pow(factor, static_cast<double>(epoch));
}

template <typename S>
void zero_grads(const std::vector<Tensor<S>>& params) {
  for (auto p : params) p.zero_grad();
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename S>
double clip_grad_norm(const std::vector<Tensor<S>>& params, double max_norm) {
  double ss = 0.0;
  for (const auto& p : params)
    for (S g : p.grad()) ss += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(ss);
  if (max_norm > 0.0 && norm > max_norm) {
    const S f = static_cast<S>(max_norm / norm);
    for (auto p : params)
      for (auto& g : p.grad()) g *= f;
  }
  return norm;
}

}  // namespace gazemotion
