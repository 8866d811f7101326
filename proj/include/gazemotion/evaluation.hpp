#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "gazemotion/dataset.hpp"
#include "gazemotion/losses.hpp"

namespace gazemotion {

/// Repeats the last observed pose for every future frame. Returns [3, n, T - t].
inline Tensor<float> zero_velocity_predict(const Window& w) {
  if (w.observed == 0) throw ArgumentError("zero_velocity_predict: window has no observed frames");
  const std::size_t n = w.n_joints, H = w.total - w.observed;
  const float* last = w.past_poses.data() + (w.observed - 1) * n * 3;
  Tensor<float> out({3, n, H});
  auto d = out.data();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t f = 0; f < H; ++f) d[(c * n + j) * H + f] = last[j * 3 + c];
  return out;
}

/// Extrapolates the last observed frame-to-frame velocity; falls back to the
/// zero-velocity prediction when fewer than two frames are observed.
inline Tensor<float> constant_velocity_predict(const Window& w) {
  if (w.observed < 2) return zero_velocity_predict(w);
  const std::size_t n = w.n_joints, H = w.total - w.observed;
  const float* last = w.past_poses.data() + (w.observed - 1) * n * 3;
  const float* prev = last - n * 3;
  Tensor<float> out({3, n, H});
  auto d = out.data();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t j = 0; j < n; ++j) {
      const double p = last[j * 3 + c], v = p - prev[j * 3 + c];
      for (std::size_t f = 0; f < H; ++f) d[(c * n + j) * H + f] = static_cast<float>(p + v * static_cast<double>(f + 1));
    }
  return out;
}

using Predictor = std::function<Tensor<float>(const Window&)>;

struct WindowEvaluation {
  EvalReport report;
  std::vector<double> window_errors;  // mean MPJPE (mm) of each window, in input order
};

inline WindowEvaluation evaluate_windows(const std::vector<Window>& windows, const Predictor& predict,
                                         const std::vector<std::size_t>& frame_offsets, double frame_rate) {
  MpjpeAccumulator acc(frame_offsets, frame_rate);
  WindowEvaluation out;
  for (const auto& w : windows) {
    const auto truth = pose_tensor<float>(w.future_poses, w.n_joints);
    out.window_errors.push_back(acc.add(predict(w), truth));
  }
  out.report = acc.report();
  return out;
}

namespace detail {

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

/// Average ranks (1-based) of `v`, ties sharing the mean rank.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

/// Two-sided paired Wilcoxon signed-rank test on a - b.
///
/// Zero differences are dropped. Exact null distribution for up to 25
/// remaining pairs (ties use mid-ranks), normal approximation with tie and
/// continuity correction above.
inline double signed_rank_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw ArgumentError("signed_rank_test: length mismatch (" + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
  }
  if (a.size() < 6) throw ArgumentError("signed_rank_test: need at least 6 pairs, got " + std::to_string(a.size()));
  std::vector<double> mag;
  std::vector<bool> positive;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d == 0.0) continue;
    mag.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  const std::size_t n = mag.size();
  if (n == 0) return 1.0;
  const auto ranks = detail::average_ranks(mag);

  if (n <= 25) {
    // Doubled mid-ranks are integers.
    std::vector<std::size_t> r2(n);
    std::size_t w2 = 0, max_sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      r2[i] = static_cast<std::size_t>(std::lround(2.0 * ranks[i]));
      max_sum += r2[i];
      if (positive[i]) w2 += r2[i];
    }
    std::vector<double> count(max_sum + 1, 0.0);
    count[0] = 1.0;
    std::size_t reach = 0;
    for (auto r : r2) {
      for (std::size_t s = reach + 1; s-- > 0;)
        if (count[s] != 0.0) count[s + r] += count[s];
      reach += r;
    }
    double le = 0.0, ge = 0.0, all = 0.0;
    for (std::size_t s = 0; s <= max_sum; ++s) {
      all += count[s];
      if (s <= w2) le += count[s];
      if (s >= w2) ge += count[s];
    }
    return std::min(1.0, 2.0 * std::min(le, ge) / all);
  }

  double w = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (positive[i]) w += ranks[i];
  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
  auto sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    var -= (t * t * t - t) / 48.0;
    i = j;
  }
  if (var <= 0.0) return 1.0;
  const double z = std::max(0.0, std::abs(w - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, 2.0 * detail::normal_sf(z));
}

}  // namespace gazemotion
