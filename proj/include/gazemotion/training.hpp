#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "gazemotion/gaze_net.hpp"
#include "gazemotion/losses.hpp"
#include "gazemotion/motion_net.hpp"
#include "gazemotion/optim.hpp"

namespace gazemotion {

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;      // optimized objective (batch mean)
  double motion = 0.0;    // batch mean of the motion term (motion network only)
  double velocity = 0.0;  // batch mean of the velocity term, logged even when not optimized
};

struct TrainConfig {
  double lr0 = 0.01;
  double decay = 0.95;
  std::size_t batch = 32;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  /// Stop after this many optimizer steps (0: run all epochs).
  std::size_t max_steps = 0;
  bool velocity_loss = true;
  /// Global gradient-norm clip (0: off).
  double clip_norm = 0.0;
  /// Call `on_checkpoint` every this many epochs (0: never).
  std::size_t checkpoint_every = 0;
  std::function<void(const StepRecord&)> on_step;
  std::function<void(std::size_t epoch)> on_checkpoint;

  static TrainConfig gaze_defaults() {
    TrainConfig c;
    c.decay = 0.9;
    c.epochs = 50;
    return c;
  }
  static TrainConfig motion_defaults() { return {}; }

  void validate() const {
    if (!(lr0 > 0.0)) throw ArgumentError("training: lr0 must be positive");
    if (!(decay > 0.0 && decay <= 1.0)) throw ArgumentError("training: decay must be in (0, 1]");
    if (batch == 0) throw ArgumentError("training: batch size must be at least 1");
  }
};

struct TrainResult {
  std::vector<StepRecord> steps;
  std::vector<double> epoch_loss;  // mean step loss per epoch
};

template <typename S>
struct GazeSample {
  Tensor<S> past;    // [3, t]
  Tensor<S> future;  // [3, t]
};

template <typename S>
struct MotionSample {
  FusedInput<S> input;
  Tensor<S> target;  // [3, n, T - t]
};

namespace detail {

/// Shared epoch/batch loop. `sample_grad(i, scale)` runs one sample, adds
/// scale * d(loss)/d(params) into the parameter grads and returns
/// {objective, motion, velocity}.
template <typename S, typename SampleFn>
TrainResult train_loop(const std::vector<Tensor<S>>& params, std::size_t n_samples, const TrainConfig& cfg,
                       SampleFn&& sample_grad) {
  cfg.validate();
  if (n_samples == 0) throw ArgumentError("training: dataset is empty");
  auto adam = make_adam(params, cfg.lr0);
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::vector<std::size_t> order(n_samples);
  TrainResult result;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    adam.lr = epoch_decay(cfg.lr0, epoch, cfg.decay);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_sum = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t b0 = 0; b0 < n_samples; b0 += cfg.batch) {
      if (cfg.max_steps && step >= cfg.max_steps) break;
      const std::size_t b1 = std::min(n_samples, b0 + cfg.batch);
      const S scale = S(1) / static_cast<S>(b1 - b0);
      zero_grads(params);
      StepRecord rec;
      for (std::size_t k = b0; k < b1; ++k) {
        const auto [obj, mot, vel] = sample_grad(order[k], scale);
        rec.loss += obj;
        rec.motion += mot;
        rec.velocity += vel;
      }
      const double inv = 1.0 / static_cast<double>(b1 - b0);
      rec.loss *= inv;
      rec.motion *= inv;
      rec.velocity *= inv;
      for (const auto& p : params) {
        if (!p.has_grad()) {
          // Parameters that did not influence this batch still take a (zero-gradient) step.
          Tensor<S> q = p;
          q.impl()->grad.assign(q.numel(), S(0));
        }
      }
      if (cfg.clip_norm > 0.0) clip_grad_norm(params, cfg.clip_norm);
      adam_step(adam, params);
      rec.step = step++;
      rec.epoch = epoch;
      rec.lr = adam.lr;
      epoch_sum += rec.loss;
      ++epoch_steps;
      result.steps.push_back(rec);
      if (cfg.on_step) cfg.on_step(rec);
    }
    if (epoch_steps) result.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_steps));
    if (cfg.checkpoint_every && cfg.on_checkpoint && (epoch + 1) % cfg.checkpoint_every == 0) cfg.on_checkpoint(epoch);
    if (cfg.max_steps && step >= cfg.max_steps) break;
  }
  return result;
}

}  // namespace detail

/// Trains the gaze network on angular loss with Adam.
template <typename S>
TrainResult train_gaze(GazeNetParams<S>& params, const std::vector<GazeSample<S>>& data, const TrainConfig& cfg) {
  const auto trainable = params.trainable();
  return detail::train_loop<S>(trainable, data.size(), cfg, [&](std::size_t i, S scale) {
    Tape<S> tape;
    Tensor<S> loss;
    {
      auto rec = tape.record();
      loss = angular_loss(gaze_forward(params, data[i].past), data[i].future);
    }
    tape.compute_gradients(loss).accumulate_into_leaves(scale);
    const double l = static_cast<double>(loss.item());
    return std::array<double, 3>{l, 0.0, 0.0};
  });
}

/// Trains the motion network on motion + velocity loss (motion only when
/// `cfg.velocity_loss` is false; the velocity term is still reported).
template <typename S>
TrainResult train_motion(MotionNetParams<S>& params, const std::vector<MotionSample<S>>& data, const TrainConfig& cfg) {
  const auto named = params.trainable();
  std::vector<Tensor<S>> trainable;
  for (const auto& [name, t] : named) trainable.push_back(t);
  const auto dct = build_dct<S>(params.config.total);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  return detail::train_loop<S>(trainable, data.size(), cfg, [&](std::size_t i, S scale) {
    Tape<S> tape;
    LossBreakdown<S> lb;
    {
      auto rec = tape.record();
      const auto pred = motion_forward(params, data[i].input, dct, true, dropout_rng);
      lb = motion_velocity_loss(pred, data[i].target);
    }
    const auto& objective = cfg.velocity_loss ? lb.total : lb.motion;
    tape.compute_gradients(objective).accumulate_into_leaves(scale);
    return std::array<double, 3>{static_cast<double>(objective.item()), static_cast<double>(lb.motion.item()),
                                 static_cast<double>(lb.velocity.item())};
  });
}

}  // namespace gazemotion
