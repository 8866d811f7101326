#pragma once

#include <string>

#include "gazemotion/ops.hpp"

namespace gazemotion {

/// Which direction stream feeds the gaze nodes of the graph.
enum class GazeSource { none, past_gaze, future_gaze, past_head, future_head };

/// How the gaze stream is laid out in time before padding to T.
enum class GazeLayout {
  predicted_only,       ///< the t predicted (or past) directions, then repetition
  past_then_predicted,  ///< past t directions followed by the t predicted ones
};

struct FusionConfig {
  GazeSource source = GazeSource::future_gaze;
  GazeLayout layout = GazeLayout::predicted_only;
};

inline bool uses_gaze_nodes(GazeSource s) { return s != GazeSource::none; }
inline bool uses_head(GazeSource s) { return s == GazeSource::past_head || s == GazeSource::future_head; }
inline bool uses_predictor(GazeSource s) { return s == GazeSource::future_gaze || s == GazeSource::future_head; }

/// Graph input [3, N, T]. Nodes 0..n-1 are joints; when gaze is fused,
/// nodes n..2n-1 are identical copies of the gaze stream.
template <typename S>
struct FusedInput {
  Tensor<S> x;
  std::size_t n_joints = 0;
  std::size_t observed = 0;  // t
  std::size_t total = 0;     // T
  bool has_gaze = false;

  std::size_t nodes() const { return has_gaze ? 2 * n_joints : n_joints; }
};

/// Pads the trailing (time) axis to `total` frames by repeating the last frame.
template <typename S>
Tensor<S> pad_repeat_last(const Tensor<S>& seq, std::size_t total) {
  if (seq.rank() == 0) throw DimensionError("pad_repeat_last: rank-0 input");
  return pad_repeat_last(seq, seq.rank() - 1, total);
}

/// Pose-only graph input (the "w/o gaze" configuration).
template <typename S>
FusedInput<S> pose_only(const Tensor<S>& poses, std::size_t total) {
  if (poses.rank() != 3 || poses.dim(0) != 3) {
    throw DimensionError("fuse: poses must be [3, n, t], got " + shape_str(poses.shape()));
  }
  const std::size_t t = poses.dim(2);
  if (t > total) throw ArgumentError("fuse: observed length " + std::to_string(t) + " exceeds T=" + std::to_string(total));
  return {pad_repeat_last(poses, total), poses.dim(1), t, total, false};
}

/// Fuses past poses [3, n, t] with a gaze stream [3, L] (L <= T, or longer
/// streams are cut to T) into [3, 2n, T].
template <typename S>
FusedInput<S> fuse_stream(const Tensor<S>& poses, const Tensor<S>& stream, std::size_t total) {
  auto fused = pose_only(poses, total);
  if (stream.rank() != 2 || stream.dim(0) != 3) {
    throw DimensionError("fuse: gaze must be [3, L], got " + shape_str(stream.shape()));
  }
  Tensor<S> g = stream.dim(1) > total ? slice(stream, 1, 0, total) : stream;
  g = pad_repeat_last(g, total);
  g = repeat_axis(reshape(g, {3, 1, total}), 1, fused.n_joints);
  fused.x = concat<S>({fused.x, g}, 1);
  fused.has_gaze = true;
  return fused;
}

/// Fuses past poses [3, n, t] with a gaze sequence of the same length t.
template <typename S>
FusedInput<S> fuse(const Tensor<S>& poses, const Tensor<S>& gaze, std::size_t total) {
  if (poses.rank() != 3 || gaze.rank() != 2 || gaze.dim(1) != poses.dim(2)) {
    throw DimensionError("fuse: gaze " + shape_str(gaze.shape()) + " and poses " + shape_str(poses.shape()) +
                         " must cover the same frames");
  }
  return fuse_stream(poses, gaze, total);
}

/// Joint-node block of a [3, N, T] graph output, frames t..T-1.
template <typename S>
Tensor<S> extract_future_poses(const Tensor<S>& y, std::size_t n_joints, std::size_t observed) {
  if (y.rank() != 3 || y.dim(0) != 3 || (y.dim(1) != 2 * n_joints && y.dim(1) != n_joints)) {
    throw DimensionError("extract_future_poses: output " + shape_str(y.shape()) + " inconsistent with n=" +
                         std::to_string(n_joints));
  }
  const std::size_t total = y.dim(2);
  if (observed > total) throw ArgumentError("extract_future_poses: t exceeds T");
  if (observed == total) return Tensor<S>({3, n_joints, 0});
  auto joints = y.dim(1) == n_joints ? y : slice(y, 1, 0, n_joints);
  return slice(joints, 2, observed, total);
}

}  // namespace gazemotion
