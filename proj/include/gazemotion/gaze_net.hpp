#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "gazemotion/gradcheck.hpp"
#include "gazemotion/ops.hpp"

namespace gazemotion {

// Gaze sequences are [3, t] tensors: one unit direction per column (frame).

template <typename S>
struct GazeHiddenLayer {
  Tensor<S> kernel;  // [C_out, C_in, 3]
  Tensor<S> bias;    // [C_out]
  Tensor<S> ln_gain;
  Tensor<S> ln_bias;
};

/// Three hidden conv+LN+tanh layers followed by a 3-channel conv+tanh output layer.
template <typename S>
struct GazeNetParams {
  std::array<GazeHiddenLayer<S>, 3> hidden;
  Tensor<S> out_kernel;  // [3, C_hidden, 3]
  Tensor<S> out_bias;    // [3]

  std::size_t channels() const { return hidden[0].bias.dim(0); }

  /// Checkpoint names: gaze.conv{1..4}.kernel/bias, gaze.ln{1..3}.gain/bias.
  NamedTensors<S> named() const {
    NamedTensors<S> out;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      const auto k = std::to_string(i + 1);
      out.emplace_back("gaze.conv" + k + ".kernel", hidden[i].kernel);
      out.emplace_back("gaze.conv" + k + ".bias", hidden[i].bias);
      out.emplace_back("gaze.ln" + k + ".gain", hidden[i].ln_gain);
      out.emplace_back("gaze.ln" + k + ".bias", hidden[i].ln_bias);
    }
    out.emplace_back("gaze.conv4.kernel", out_kernel);
    out.emplace_back("gaze.conv4.bias", out_bias);
    return out;
  }

  std::vector<Tensor<S>> trainable() const {
    std::vector<Tensor<S>> out;
    for (auto& [name, t] : named()) out.push_back(t);
    return out;
  }
};

template <typename S>
GazeNetParams<S> init_gaze_params(std::uint64_t seed, std::size_t channels = 32) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](Shape shape, double bound) {
    std::uniform_real_distribution<double> d(-bound, bound);
    Tensor<S> t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<S>(d(rng));
    t.set_requires_grad(true);
    return t;
  };
  auto constant = [](std::size_t n, S value) {
    Tensor<S> t({n}, value);
    t.set_requires_grad(true);
    return t;
  };
  GazeNetParams<S> p;
  std::size_t cin = 3;
  for (auto& layer : p.hidden) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * 3));
    layer.kernel = uniform({channels, cin, 3}, bound);
    layer.bias = uniform({channels}, bound);
    layer.ln_gain = constant(channels, S(1));
    layer.ln_bias = constant(channels, S(0));
    cin = channels;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(channels * 3));
  p.out_kernel = uniform({3, channels, 3}, bound);
  p.out_bias = uniform({3}, bound);
  return p;
}

/// Forecasts the next t gaze directions from the past t.
///
/// Frames whose raw output has norm below 1e-8 repeat the last observed
/// direction instead of being normalized.
template <typename S>
Tensor<S> gaze_forward(const GazeNetParams<S>& params, const Tensor<S>& past) {
  if (past.rank() != 2 || past.dim(0) != 3) {
    throw DimensionError("gaze_forward: expected [3, t] gaze, got " + shape_str(past.shape()));
  }
  Tensor<S> h = past;
  for (const auto& layer : params.hidden) {
    h = conv1d_same(h, layer.kernel, layer.bias);
    h = layer_norm(h, 0, layer.ln_gain, layer.ln_bias);
    h = tanh(h);
  }
  h = tanh(conv1d_same(h, params.out_kernel, params.out_bias));
  const std::size_t t = past.dim(1);
  Tensor<S> last({3});
  for (std::size_t c = 0; c < 3; ++c) last.data()[c] = past.data()[c * t + t - 1];
  return normalize_axis(h, 0, last, S(1e-8));
}

/// Mean over frames of the angle between predicted and true directions.
template <typename S>
Tensor<S> angular_loss(const Tensor<S>& pred, const Tensor<S>& truth) {
  if (pred.shape() != truth.shape() || pred.rank() != 2 || pred.dim(0) != 3) {
    throw DimensionError("angular_loss: shape mismatch " + shape_str(pred.shape()) + " vs " + shape_str(truth.shape()));
  }
  const auto cosines = sum_axis(mul(pred, truth), 0);
  return mean(arccos_clamped(cosines, S(-1) + S(1e-7), S(1) - S(1e-7)));
}

}  // namespace gazemotion
