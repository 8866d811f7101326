#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gazemotion/dct.hpp"
#include "gazemotion/fusion.hpp"
#include "gazemotion/gradcheck.hpp"
#include "gazemotion/ops.hpp"

namespace gazemotion {

enum class KeepHalf { first, second };

struct MotionNetConfig {
  std::size_t n_joints = 21;
  std::size_t observed = 10;  // t
  std::size_t total = 40;     // T
  std::size_t blocks = 16;    // m
  std::size_t latent = 16;
  double dropout = 0.3;
  bool gaze_nodes = true;
  bool spatial_gcn = true;
  bool temporal_gcn = true;
  bool global_residual = true;
  KeepHalf keep = KeepHalf::first;

  std::size_t nodes() const { return gaze_nodes ? 2 * n_joints : n_joints; }
};

/// Temporal adjacency, feature weight and spatial adjacency of one GCN stage.
template <typename S>
struct GcnStage {
  Tensor<S> temporal;  // [L, L]
  Tensor<S> weight;    // [F_in, F_out]
  Tensor<S> spatial;   // [N, N]
};

template <typename S>
struct ResidualBlock {
  GcnStage<S> gcn;
  Tensor<S> ln_gain;
  Tensor<S> ln_bias;
};

template <typename S>
struct MotionNetParams {
  MotionNetConfig config;
  GcnStage<S> start;
  std::vector<ResidualBlock<S>> blocks;
  GcnStage<S> end;

  NamedTensors<S> named() const {
    NamedTensors<S> out;
    auto stage = [&](const std::string& prefix, const GcnStage<S>& s) {
      out.emplace_back(prefix + ".at", s.temporal);
      out.emplace_back(prefix + ".w", s.weight);
      out.emplace_back(prefix + ".as", s.spatial);
    };
    stage("motion.start", start);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto prefix = "motion.res" + std::to_string(i + 1);
      stage(prefix, blocks[i].gcn);
      out.emplace_back(prefix + ".ln.gain", blocks[i].ln_gain);
      out.emplace_back(prefix + ".ln.bias", blocks[i].ln_bias);
    }
    stage("motion.end", end);
    return out;
  }

  /// Parameters the optimizer updates; adjacencies frozen by an ablation are excluded.
  NamedTensors<S> trainable() const {
    NamedTensors<S> out;
    for (auto& [name, t] : named())
      if (t.requires_grad()) out.emplace_back(name, t);
    return out;
  }
};

inline constexpr double kEndInitScale = 0.1;

/// Adjacencies start at identity + U(-0.01, 0.01); weights at U(+-1/sqrt(fan_in)),
/// the output projection at a tenth of that; layer norms at gain 1, bias 0.
/// Ablated adjacencies are exact frozen identities.

template <typename S>
MotionNetParams<S> init_motion_params(const MotionNetConfig& config, std::uint64_t seed) {
  if (config.n_joints == 0) throw ArgumentError("init_motion_params: n_joints must be positive");
  if (config.observed == 0 || config.observed > config.total) {
    throw ArgumentError("init_motion_params: need 1 <= t <= T");
  }
  std::mt19937_64 rng(seed);
  auto learned = [](Tensor<S> t) {
    t.set_requires_grad(true);
    return t;
  };
  auto adjacency = [&](std::size_t n, bool enabled) {
    auto a = Tensor<S>::eye(n);
    if (!enabled) return a;
    std::uniform_real_distribution<double> d(-0.01, 0.01);
    for (auto& v : a.data()) v = static_cast<S>(static_cast<double>(v) + d(rng));
    return learned(a);
  };
  auto weight = [&](std::size_t rows, std::size_t cols, double scale = 1.0) {
    const double bound = scale / std::sqrt(static_cast<double>(rows));
    std::uniform_real_distribution<double> d(-bound, bound);
    Tensor<S> w({rows, cols});
    for (auto& v : w.data()) v = static_cast<S>(d(rng));
    return learned(w);
  };
  const std::size_t T = config.total, N = config.nodes(), F = config.latent;
  MotionNetParams<S> p;
  p.config = config;
  p.start.temporal = adjacency(T, config.temporal_gcn);
  p.start.weight = weight(3, F);
  p.start.spatial = adjacency(N, config.spatial_gcn);
  for (std::size_t i = 0; i < config.blocks; ++i) {
    ResidualBlock<S> b;
    b.gcn.temporal = adjacency(2 * T, config.temporal_gcn);
    b.gcn.weight = weight(F, F);
    b.gcn.spatial = adjacency(N, config.spatial_gcn);
    b.ln_gain = learned(Tensor<S>({F}, S(1)));
    b.ln_bias = learned(Tensor<S>({F}, S(0)));
    p.blocks.push_back(std::move(b));
  }
  p.end.temporal = adjacency(T, config.temporal_gcn);
  // Small output projection: the untrained network starts close to the
  // global residual (repeat-last-pose) instead of metres away from it.
  p.end.weight = weight(F, 3, kEndInitScale);
  p.end.spatial = adjacency(N, config.spatial_gcn);
  return p;
}

/// h [F_in, N, L] -> temporal (h * A^T) -> features (W) -> spatial (A^S * h).
template <typename S>
Tensor<S> gcn_stage_forward(const GcnStage<S>& stage, const Tensor<S>& h) {
  auto u = matmul_axis(h, stage.temporal, 2);
  u = matmul_axis(u, stage.weight, 0);
  return matmul_axis(u, stage.spatial, 1, Transpose::yes);
}

/// [3, N, T] DCT coefficients -> [F, N, 2T] (lifted features, duplicated in time).
template <typename S>
Tensor<S> start_forward(const MotionNetParams<S>& params, const Tensor<S>& x_d) {
  const auto& c = params.config;
  if (x_d.shape() != Shape{3, c.nodes(), c.total}) {
    throw DimensionError("start_forward: expected " + shape_str({3, c.nodes(), c.total}) + ", got " +
                         shape_str(x_d.shape()));
  }
  auto h = gcn_stage_forward(params.start, x_d);
  return concat<S>({h, h}, 2);
}

/// h + dropout(tanh(layer_norm(gcn(h)))). Dropout is active only when `train`.
template <typename S, typename Rng>
Tensor<S> residual_block_forward(const ResidualBlock<S>& block, const Tensor<S>& h, double dropout_rate, bool train,
                                 Rng& rng) {
  auto u = gcn_stage_forward(block.gcn, h);
  u = layer_norm(u, 0, block.ln_gain, block.ln_bias);
  u = tanh(u);
  u = dropout(u, dropout_rate, train, rng);
  return add(h, u);
}

/// [F, N, T] features -> [3, N, T] output coefficients, plus x_d unless the
/// global residual is ablated.
template <typename S>
Tensor<S> end_forward(const MotionNetParams<S>& params, const Tensor<S>& h, const Tensor<S>& x_d) {
  const auto& c = params.config;
  if (h.shape() != Shape{c.latent, c.nodes(), c.total} || x_d.shape() != Shape{3, c.nodes(), c.total}) {
    throw DimensionError("end_forward: features " + shape_str(h.shape()) + " / input " + shape_str(x_d.shape()) +
                         " do not match the network configuration");
  }
  auto y = gcn_stage_forward(params.end, h);
  return c.global_residual ? add(y, x_d) : y;
}

/// Full graph output Y [3, N, T] in pose space.
template <typename S, typename Rng>
Tensor<S> motion_forward_graph(const MotionNetParams<S>& params, const Tensor<S>& x, const DctMatrix<S>& dct,
                               bool train, Rng& rng) {
  const auto& c = params.config;
  if (dct.size != c.total) throw DimensionError("motion_forward: DCT size does not match T");
  const auto x_d = dct_forward(x, dct);
  auto h = start_forward(params, x_d);
  for (const auto& block : params.blocks) h = residual_block_forward(block, h, c.dropout, train, rng);
  h = c.keep == KeepHalf::first ? slice(h, 2, 0, c.total) : slice(h, 2, c.total, 2 * c.total);
  return dct_inverse(end_forward(params, h, x_d), dct);
}

/// Predicted future poses [3, n, T - t].
template <typename S, typename Rng>
Tensor<S> motion_forward(const MotionNetParams<S>& params, const FusedInput<S>& fused, const DctMatrix<S>& dct,
                         bool train, Rng& rng) {
  const auto& c = params.config;
  if (fused.n_joints != c.n_joints || fused.observed != c.observed || fused.total != c.total ||
      fused.has_gaze != c.gaze_nodes) {
    throw DimensionError("motion_forward: fused input (n=" + std::to_string(fused.n_joints) +
                         ", t=" + std::to_string(fused.observed) + ", T=" + std::to_string(fused.total) +
                         (fused.has_gaze ? ", gaze" : ", no gaze") + ") does not match the network");
  }
  const auto y = motion_forward_graph(params, fused.x, dct, train, rng);
  return extract_future_poses(y, c.n_joints, c.observed);
}

/// Evaluation-mode convenience overload.
template <typename S>
Tensor<S> motion_predict(const MotionNetParams<S>& params, const FusedInput<S>& fused, const DctMatrix<S>& dct) {
  std::mt19937_64 unused(0);
  return motion_forward(params, fused, dct, false, unused);
}

}  // namespace gazemotion
