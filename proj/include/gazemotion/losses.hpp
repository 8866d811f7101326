#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "gazemotion/ops.hpp"

namespace gazemotion {

/// total == motion + velocity, evaluated in S.
template <typename S>
struct LossBreakdown {
  Tensor<S> total;
  Tensor<S> motion;
  Tensor<S> velocity;
  /// Set when fewer than two predicted frames make the velocity term zero.
  bool velocity_degenerate = false;
};

namespace detail {
inline void require_pose_pair(const char* op, const Shape& a, const Shape& b) {
  if (a != b || a.size() != 3 || a[0] != 3) {
    throw DimensionError(std::string(op) + ": expected equal [3, n, F] shapes, got " + shape_str(a) + " vs " +
                         shape_str(b));
  }
}
}  // namespace detail

/// Mean over joints and frames of the squared joint position error.
template <typename S>
Tensor<S> motion_loss(const Tensor<S>& pred, const Tensor<S>& truth) {
  detail::require_pose_pair("motion_loss", pred.shape(), truth.shape());
  if (pred.dim(2) == 0) throw DimensionError("motion_loss: no predicted frames");
  const auto d = sub(pred, truth);
  return scale(sum(mul(d, d)), S(1) / static_cast<S>(pred.dim(1) * pred.dim(2)));
}

/// Mean squared error of frame-to-frame velocities. Returns 0 (and sets
/// `degenerate`) when there are fewer than two frames.
template <typename S>
Tensor<S> velocity_loss(const Tensor<S>& pred, const Tensor<S>& truth, bool* degenerate = nullptr) {
  detail::require_pose_pair("velocity_loss", pred.shape(), truth.shape());
  const std::size_t F = pred.dim(2);
  if (degenerate) *degenerate = F < 2;
  if (F < 2) return Tensor<S>::scalar(S(0));
  const auto vp = sub(slice(pred, 2, 1, F), slice(pred, 2, 0, F - 1));
  const auto vt = sub(slice(truth, 2, 1, F), slice(truth, 2, 0, F - 1));
  const auto d = sub(vp, vt);
  return scale(sum(mul(d, d)), S(1) / static_cast<S>(pred.dim(1) * (F - 1)));
}

template <typename S>
LossBreakdown<S> motion_velocity_loss(const Tensor<S>& pred, const Tensor<S>& truth) {
  LossBreakdown<S> out;
  out.motion = motion_loss(pred, truth);
  out.velocity = velocity_loss(pred, truth, &out.velocity_degenerate);
  out.total = add(out.motion, out.velocity);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation metric

struct HorizonError {
  double ms = 0.0;
  std::size_t frame = 0;  // 1-based offset into the prediction
  double mpjpe_mm = 0.0;
};

struct EvalReport {
  std::string variant;
  std::string dataset;
  std::uint64_t seed = 0;
  std::vector<HorizonError> horizons;  // ascending
  double average_mm = 0.0;             // over all predicted frames and joints
  std::size_t windows = 0;
  std::size_t frames = 0;
};

/// Converts horizons in milliseconds to 1-based frame offsets; each must be
/// an integer number of frames.
inline std::vector<std::size_t> horizon_frames(const std::vector<double>& ms, double frame_rate) {
  std::vector<std::size_t> out;
  for (double h : ms) {
    const double frames = h * frame_rate / 1000.0;
    const double rounded = std::round(frames);
    if (h <= 0.0 || std::abs(frames - rounded) > 1e-9 || rounded < 1.0) {
      std::ostringstream os;
      os << "horizon " << h << " ms is " << frames << " frames at " << frame_rate << " Hz (not a positive integer)";
      throw ArgumentError(os.str());
    }
    out.push_back(static_cast<std::size_t>(rounded));
  }
  return out;
}

/// Accumulates unsquared joint position errors over windows.
///
/// Predictions are [3, n, F] in meters (scaled by `unit_scale` to millimeters).
class MpjpeAccumulator {
 public:
  MpjpeAccumulator(std::vector<std::size_t> frame_offsets, double frame_rate, double unit_scale = 1000.0)
      : offsets_(std::move(frame_offsets)), rate_(frame_rate), unit_(unit_scale), sums_(offsets_.size(), 0.0) {
    for (std::size_t i = 1; i < offsets_.size(); ++i) {
      if (offsets_[i] <= offsets_[i - 1]) throw ArgumentError("horizons must be strictly ascending");
    }
  }

  /// Adds one window; returns its mean per-joint error in millimeters.
  template <typename S>
  double add(const Tensor<S>& pred, const Tensor<S>& truth) {
    detail::require_pose_pair("mpjpe", pred.shape(), truth.shape());
    const std::size_t n = pred.dim(1), F = pred.dim(2);
    for (auto off : offsets_) {
      if (off == 0 || off > F) {
        throw ArgumentError("horizon frame " + std::to_string(off) + " outside prediction of " + std::to_string(F) +
                            " frames");
      }
    }
    std::vector<double> per_frame(F, 0.0);
    auto p = pred.data();
    auto g = truth.data();
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t j = 0; j < n; ++j) {
        double ss = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
          const std::size_t i = (c * n + j) * F + f;
          const double d = static_cast<double>(p[i]) - static_cast<double>(g[i]);
          ss += d * d;
        }
        per_frame[f] += std::sqrt(ss) * unit_;
      }
      per_frame[f] /= static_cast<double>(n);
    }
    for (std::size_t h = 0; h < offsets_.size(); ++h) sums_[h] += per_frame[offsets_[h] - 1];
    double window_avg = 0.0;
    for (double v : per_frame) window_avg += v;
    window_avg /= static_cast<double>(F);
    total_ += window_avg;
    ++windows_;
    frames_ = F;
    return window_avg;
  }

  EvalReport report() const {
    EvalReport r;
    for (std::size_t h = 0; h < offsets_.size(); ++h) {
      r.horizons.push_back({static_cast<double>(offsets_[h]) * 1000.0 / rate_, offsets_[h],
                            windows_ ? sums_[h] / static_cast<double>(windows_) : 0.0});
    }
    r.average_mm = windows_ ? total_ / static_cast<double>(windows_) : 0.0;
    r.windows = windows_;
    r.frames = frames_;
    return r;
  }

 private:
  std::vector<std::size_t> offsets_;
  double rate_;
  double unit_;
  std::vector<double> sums_;
  double total_ = 0.0;
  std::size_t windows_ = 0;
  std::size_t frames_ = 0;
};

/// MPJPE report for a single prediction.
template <typename S>
EvalReport mpjpe_metric(const Tensor<S>& pred, const Tensor<S>& truth, const std::vector<std::size_t>& frame_offsets,
                        double frame_rate, double unit_scale = 1000.0) {
  MpjpeAccumulator acc(frame_offsets, frame_rate, unit_scale);
  acc.add(pred, truth);
  return acc.report();
}

inline std::string format_ms(double ms) {
  std::ostringstream os;
  os << std::setprecision(10) << ms;
  return os.str();
}

/// CSV header: variant,dataset,seed,h<ms>...,avg
inline std::string report_csv_header(const EvalReport& r) {
  std::string s = "variant,dataset,seed";
  for (const auto& h : r.horizons) s += ",h" + format_ms(h.ms);
  return s + ",avg";
}

inline std::string report_csv_row(const EvalReport& r) {
  std::ostringstream os;
  os << r.variant << ',' << r.dataset << ',' << r.seed << std::fixed << std::setprecision(4);
  for (const auto& h : r.horizons) os << ',' << h.mpjpe_mm;
  os << ',' << r.average_mm;
  return os.str();
}

/// Text table with one row per report, columns "<ms> ms" ... "Average".
inline std::string render_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) return "";
  auto label = [](const EvalReport& r) { return r.variant + " (seed " + std::to_string(r.seed) + ")"; };
  std::size_t width = 8;
  for (const auto& r : reports) width = std::max(width, label(r).size() + 2);
  const int w = static_cast<int>(width);
  std::ostringstream os;
  os << std::left << std::setw(w) << "Method";
  for (const auto& h : reports.front().horizons) os << std::right << std::setw(10) << (format_ms(h.ms) + " ms");
  os << std::setw(10) << "Average" << '\n';
  os << std::fixed << std::setprecision(1);
  for (const auto& r : reports) {
    os << std::left << std::setw(w) << label(r);
    for (const auto& h : r.horizons) os << std::right << std::setw(10) << h.mpjpe_mm;
    os << std::right << std::setw(10) << r.average_mm << '\n';
  }
  return os.str();
}

}  // namespace gazemotion
