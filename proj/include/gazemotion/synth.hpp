#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "gazemotion/dataset.hpp"

namespace gazemotion {

/// Desk-scale pick-and-place generator in which gaze precedes body motion.
///
/// The body alternates between dwelling at a goal (with a right-arm reach)
/// and walking to the next one. Gaze switches to the next goal `lead` frames
/// before the body starts turning toward it; head direction follows gaze
/// through a first-order filter. y is up; positions are meters.
struct SynthConfig {
  std::size_t n_joints = 21;
  std::size_t frames = 300;
  std::size_t max_goals = 0;  // 0: keep visiting goals until `frames` is filled
  std::size_t lead = 5;       // frames between gaze switch and turn onset
  double gaze_noise = 0.0;    // per-axis std of the direction perturbation (~radians)
  double pose_noise = 0.0;    // per-coordinate std, meters
  double frame_rate = 30.0;
  std::uint64_t seed = 0;
  double walk_speed = 1.2;          // m/s
  double walk_accel = 2.0;          // m/s^2
  double turn_rate = std::numbers::pi;  // rad/s
  std::size_t dwell_min = 10;       // frames
  std::size_t dwell_max = 30;
  double head_follow = 0.2;         // filter gain toward gaze per frame
  double room_half_extent = 3.0;
};

/// Frame indices of one goal visit.
struct SynthEvent {
  std::size_t switch_frame = 0;  // first frame with gaze on the new goal
  std::size_t turn_start = 0;    // first frame whose heading differs from the previous one
  std::size_t walk_start = 0;
  std::size_t arrive = 0;
};

struct SynthResult {
  MotionSequence sequence;
  std::vector<SynthEvent> events;
};

namespace detail {

struct Vec3 {
  double x = 0, y = 0, z = 0;
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  Vec3 unit() const { return *this * (1.0 / norm()); }
};

// Body-frame offsets from the pelvis (x right, y up, z forward), 21 joints.
inline constexpr std::array<std::array<double, 3>, 21> kSkeleton = {{
    {0.0, 0.0, 0.0},      // 0 pelvis
    {0.0, 0.15, 0.0},     // 1 spine
    {0.0, 0.30, 0.0},     // 2 spine2
    {0.0, 0.45, 0.0},     // 3 chest
    {0.0, 0.60, 0.0},     // 4 neck
    {0.0, 0.72, 0.0},     // 5 head
    {-0.18, 0.55, 0.0},   // 6 left shoulder
    {-0.20, 0.28, 0.0},   // 7 left elbow
    {-0.20, 0.05, 0.0},   // 8 left wrist
    {0.18, 0.55, 0.0},    // 9 right shoulder
    {0.20, 0.28, 0.0},    // 10 right elbow
    {0.20, 0.05, 0.0},    // 11 right wrist
    {-0.10, -0.05, 0.0},  // 12 left hip
    {-0.10, -0.50, 0.0},  // 13 left knee
    {-0.10, -0.90, 0.0},  // 14 left ankle
    {-0.10, -0.95, 0.12}, // 15 left toe
    {0.10, -0.05, 0.0},   // 16 right hip
    {0.10, -0.50, 0.0},   // 17 right knee
    {0.10, -0.90, 0.0},   // 18 right ankle
    {0.10, -0.95, 0.12},  // 19 right toe
    {0.20, 0.00, 0.05},   // 20 right hand
}};
inline constexpr double kPelvisHeight = 0.95;
inline constexpr double kHeadOffset = 0.72;
inline constexpr double kStrideLength = 1.4;

struct BodyState {
  double x = 0, z = 0, heading = 0;
  double reach = 0;       // 0..1
  double swing = 0;       // leg phase, radians
  double swing_amp = 0;   // 0..1
};

inline double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= 2 * std::numbers::pi;
  while (a < -std::numbers::pi) a += 2 * std::numbers::pi;
  return a;
}

}  // namespace detail

inline SynthResult synth_generate(const SynthConfig& cfg) {
  using detail::Vec3;
  if (cfg.n_joints == 0) throw ArgumentError("synth: skeleton needs at least one joint");
  if (cfg.frames == 0) throw ArgumentError("synth: frame count must be positive");
  if (!(cfg.frame_rate > 0.0)) throw ArgumentError("synth: frame rate must be positive");
  if (cfg.dwell_min == 0 || cfg.dwell_max < cfg.dwell_min) throw ArgumentError("synth: invalid dwell range");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double dt = 1.0 / cfg.frame_rate;
  const double half = cfg.room_half_extent;

  std::vector<detail::BodyState> states;
  std::vector<Vec3> gaze_targets;
  std::vector<Vec3> reach_goals;
  SynthResult result;

  detail::BodyState body;
  body.x = (unit(rng) - 0.5) * half;
  body.z = (unit(rng) - 0.5) * half;
  body.heading = (unit(rng) * 2 - 1) * std::numbers::pi;
  Vec3 target{body.x + 2.0 * std::sin(body.heading), 0.9, body.z + 2.0 * std::cos(body.heading)};
  Vec3 reach_goal = target;

  auto emit = [&]() {
    states.push_back(body);
    gaze_targets.push_back(target);
    reach_goals.push_back(reach_goal);
  };
  auto full = [&]() { return states.size() >= cfg.frames; };
  std::uniform_int_distribution<std::size_t> dwell(cfg.dwell_min, cfg.dwell_max);
  auto dwell_frames = [&]() { return dwell(rng); };

  // Initial idle period.
  for (std::size_t i = 0, d = dwell_frames(); i < d && !full(); ++i) emit();

  std::size_t goals = 0;
  while (!full() && (cfg.max_goals == 0 || goals < cfg.max_goals)) {
    // Sample the next goal: 1-2.5 m away, 40-150 degrees off the current heading, inside the room.
    Vec3 goal;
    double bearing = 0, dist = 0;
    for (int attempt = 0;; ++attempt) {
      const double off = (40.0 + unit(rng) * 110.0) * std::numbers::pi / 180.0 * (unit(rng) < 0.5 ? -1.0 : 1.0);
      bearing = detail::wrap_angle(body.heading + off);
      dist = 1.0 + unit(rng) * 1.5;
      goal = {body.x + dist * std::sin(bearing), 0.7 + unit(rng) * 0.4, body.z + dist * std::cos(bearing)};
      if (std::abs(goal.x) <= half && std::abs(goal.z) <= half) break;
      if (attempt > 200) {
        // Head back toward the room center.
        bearing = std::atan2(-body.x, -body.z);
        if (std::abs(detail::wrap_angle(bearing - body.heading)) < 1e-3) bearing = detail::wrap_angle(bearing + 0.7);
        dist = 1.0;
        goal = {body.x + dist * std::sin(bearing), 0.9, body.z + dist * std::cos(bearing)};
        break;
      }
    }
    ++goals;
    SynthEvent ev;
    ev.switch_frame = states.size();
    target = goal;
    reach_goal = goal;
    for (std::size_t i = 0; i < cfg.lead && !full(); ++i) emit();

    ev.turn_start = states.size();
    const double start_heading = body.heading;
    const double delta = detail::wrap_angle(bearing - start_heading);
    const double step = cfg.turn_rate * dt;
    for (std::size_t j = 0; !full(); ++j) {
      const double turned = std::min(step * static_cast<double>(j + 1), std::abs(delta));
      body.heading = detail::wrap_angle(start_heading + (delta < 0 ? -turned : turned));
      emit();
      if (turned >= std::abs(delta)) break;
    }
    body.heading = bearing;

    // Trapezoidal (acceleration-bounded) speed profile along the straight line.
    ev.walk_start = states.size();
    const double v = cfg.walk_speed, a = cfg.walk_accel;
    double t_acc = v / a, t_cruise = 0, v_peak = v;
    if (dist < v * v / a) {
      t_acc = std::sqrt(dist / a);
      v_peak = a * t_acc;
    } else {
      t_cruise = (dist - v * v / a) / v;
    }
    const double t_total = 2 * t_acc + t_cruise;
    auto travelled = [&](double t) {
      if (t <= t_acc) return 0.5 * a * t * t;
      if (t <= t_acc + t_cruise) return 0.5 * a * t_acc * t_acc + v_peak * (t - t_acc);
      const double td = std::min(t, t_total) - t_acc - t_cruise;
      return 0.5 * a * t_acc * t_acc + v_peak * t_cruise + v_peak * td - 0.5 * a * td * td;
    };
    const double x0 = body.x, z0 = body.z;
    const auto walk_frames = static_cast<std::size_t>(std::ceil(t_total / dt));
    double prev = 0.0;
    for (std::size_t j = 1; j <= walk_frames && !full(); ++j) {
      const double s = j == walk_frames ? dist : travelled(static_cast<double>(j) * dt);
      body.x = x0 + s * std::sin(bearing);
      body.z = z0 + s * std::cos(bearing);
      body.swing += 2 * std::numbers::pi * (s - prev) / detail::kStrideLength;
      body.swing_amp = std::min(1.0, (s - prev) / (v * dt));
      prev = s;
      emit();
    }
    body.swing_amp = 0;
    ev.arrive = states.size();

    // Reach toward the goal while dwelling.
    const std::size_t d = dwell_frames();
    for (std::size_t j = 0; j < d && !full(); ++j) {
      body.reach = std::sin(std::numbers::pi * static_cast<double>(j + 1) / static_cast<double>(d + 1));
      emit();
    }
    body.reach = 0;
    result.events.push_back(ev);
  }
  while (!full()) emit();

  // Render joints and directions.
  MotionSequence& seq = result.sequence;
  seq.n_joints = cfg.n_joints;
  seq.frame_rate = static_cast<float>(cfg.frame_rate);
  seq.joints.reserve(cfg.frames * cfg.n_joints * 3);
  seq.gaze.reserve(cfg.frames * 3);
  seq.head.reserve(cfg.frames * 3);
  Vec3 head_dir;
  for (std::size_t f = 0; f < cfg.frames; ++f) {
    const auto& b = states[f];
    const Vec3 root{b.x, detail::kPelvisHeight, b.z};
    const Vec3 fwd{std::sin(b.heading), 0, std::cos(b.heading)};
    const Vec3 right{std::cos(b.heading), 0, -std::sin(b.heading)};
    auto world = [&](const std::array<double, 3>& o) { return root + right * o[0] + Vec3{0, o[1], 0} + fwd * o[2]; };
    const Vec3 goal = reach_goals[f];
    const Vec3 wrist_rest = world(detail::kSkeleton[11]);
    const Vec3 wrist = wrist_rest + (goal - wrist_rest) * b.reach;
    for (std::size_t j = 0; j < cfg.n_joints; ++j) {
      const std::size_t k = j % detail::kSkeleton.size();
      auto off = detail::kSkeleton[k];
      off[0] += 0.02 * static_cast<double>(j / detail::kSkeleton.size());
      const bool left_leg = k >= 13 && k <= 15, right_leg = k >= 17 && k <= 19;
      if (left_leg) off[2] += 0.2 * b.swing_amp * std::sin(b.swing);
      if (right_leg) off[2] -= 0.2 * b.swing_amp * std::sin(b.swing);
      Vec3 p = world(off);
      if (k == 10) p = p + (wrist - wrist_rest) * 0.5;
      if (k == 11 || k == 20) p = p + (wrist - wrist_rest);
      for (double c : {p.x, p.y, p.z}) {
        const double noise = cfg.pose_noise > 0 ? cfg.pose_noise * normal(rng) : 0.0;
        seq.joints.push_back(static_cast<float>(c + noise));
      }
    }
    const Vec3 head_pos = root + Vec3{0, detail::kHeadOffset, 0};
    Vec3 g = (gaze_targets[f] - head_pos).unit();
    if (cfg.gaze_noise > 0) g = (g + Vec3{normal(rng), normal(rng), normal(rng)} * cfg.gaze_noise).unit();
    head_dir = f == 0 ? g : (head_dir + (g - head_dir) * cfg.head_follow).unit();
    seq.gaze.push_back(static_cast<float>(g.x));
    seq.gaze.push_back(static_cast<float>(g.y));
    seq.gaze.push_back(static_cast<float>(g.z));
    seq.head.push_back(static_cast<float>(head_dir.x));
    seq.head.push_back(static_cast<float>(head_dir.y));
    seq.head.push_back(static_cast<float>(head_dir.z));
  }
  return result;
}

}  // namespace gazemotion
