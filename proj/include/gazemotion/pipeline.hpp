#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gazemotion/checkpoint.hpp"
#include "gazemotion/dataset.hpp"
#include "gazemotion/fusion.hpp"
#include "gazemotion/gaze_net.hpp"
#include "gazemotion/motion_net.hpp"

namespace gazemotion {

enum class Variant {
  full,
  past_gaze,
  future_head,
  past_head,
  no_gaze,
  no_spatial_gcn,
  no_temporal_gcn,
  no_global_residual,
  no_velocity_loss,
  zero_velocity_baseline,
  constant_velocity_baseline,
};

inline constexpr std::array<std::pair<Variant, std::string_view>, 11> kVariantNames = {{
    {Variant::full, "full"},
    {Variant::past_gaze, "past-gaze"},
    {Variant::future_head, "future-head"},
    {Variant::past_head, "past-head"},
    {Variant::no_gaze, "no-gaze"},
    {Variant::no_spatial_gcn, "no-spatial-gcn"},
    {Variant::no_temporal_gcn, "no-temporal-gcn"},
    {Variant::no_global_residual, "no-global-residual"},
    {Variant::no_velocity_loss, "no-velocity-loss"},
    {Variant::zero_velocity_baseline, "zero-velocity-baseline"},
    {Variant::constant_velocity_baseline, "constant-velocity-baseline"},
}};

inline std::string variant_name(Variant v) {
  for (const auto& [value, name] : kVariantNames)
    if (value == v) return std::string(name);
  return "unknown";
}

inline std::string variant_list() {
  std::string s;
  for (const auto& [value, name] : kVariantNames) s += (s.empty() ? "" : ", ") + std::string(name);
  return s;
}

inline Variant parse_variant(std::string_view name) {
  for (const auto& [value, n] : kVariantNames)
    if (n == name) return value;
  throw ArgumentError("unknown variant '" + std::string(name) + "' (valid: " + variant_list() + ")");
}

/// Model, fusion and loss settings of one variant.
struct VariantSpec {
  Variant variant = Variant::full;
  bool baseline = false;
  FusionConfig fusion;
  bool spatial_gcn = true;
  bool temporal_gcn = true;
  bool global_residual = true;
  bool velocity_loss = true;
};

inline VariantSpec variant_spec(Variant v) {
  VariantSpec s;
  s.variant = v;
  switch (v) {
    case Variant::full: break;
    case Variant::past_gaze: s.fusion.source = GazeSource::past_gaze; break;
    case Variant::future_head: s.fusion.source = GazeSource::future_head; break;
    case Variant::past_head: s.fusion.source = GazeSource::past_head; break;
    case Variant::no_gaze: s.fusion.source = GazeSource::none; break;
    case Variant::no_spatial_gcn: s.spatial_gcn = false; break;
    case Variant::no_temporal_gcn: s.temporal_gcn = false; break;
    case Variant::no_global_residual: s.global_residual = false; break;
    case Variant::no_velocity_loss: s.velocity_loss = false; break;
    case Variant::zero_velocity_baseline:
    case Variant::constant_velocity_baseline:
      s.baseline = true;
      s.fusion.source = GazeSource::none;
      break;
  }
  return s;
}

/// Network configuration for a variant on top of shared size settings.
inline MotionNetConfig apply_variant(MotionNetConfig base, const VariantSpec& spec) {
  base.gaze_nodes = uses_gaze_nodes(spec.fusion.source);
  base.spatial_gcn = spec.spatial_gcn;
  base.temporal_gcn = spec.temporal_gcn;
  base.global_residual = spec.global_residual;
  return base;
}

inline std::string_view gaze_source_name(GazeSource s) {
  switch (s) {
    case GazeSource::none: return "none";
    case GazeSource::past_gaze: return "past-gaze";
    case GazeSource::future_gaze: return "future-gaze";
    case GazeSource::past_head: return "past-head";
    case GazeSource::future_head: return "future-head";
  }
  return "none";
}

inline GazeSource parse_gaze_source(std::string_view s) {
  for (auto v : {GazeSource::none, GazeSource::past_gaze, GazeSource::future_gaze, GazeSource::past_head,
                 GazeSource::future_head})
    if (gaze_source_name(v) == s) return v;
  throw ConfigError("unknown gaze source '" + std::string(s) + "'");
}

inline std::string_view layout_name(GazeLayout l) {
  return l == GazeLayout::predicted_only ? "predicted-only" : "past-then-predicted";
}

inline GazeLayout parse_layout(std::string_view s) {
  if (s == "predicted-only") return GazeLayout::predicted_only;
  if (s == "past-then-predicted") return GazeLayout::past_then_predicted;
  throw ArgumentError("unknown gaze layout '" + std::string(s) + "' (valid: predicted-only, past-then-predicted)");
}

inline DirectionStream stream_for(GazeSource s) {
  return uses_head(s) ? DirectionStream::head : DirectionStream::gaze;
}

/// Checks that every sequence carries the direction stream a variant needs.
inline void require_streams(const std::vector<MotionSequence>& seqs, GazeSource source) {
  if (!uses_gaze_nodes(source)) return;
  const bool head = uses_head(source);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (head ? !seqs[i].has_head() : !seqs[i].has_gaze()) {
      throw ConfigError(std::string("variant needs ") + (head ? "head" : "gaze") + " directions, sequence " +
                        std::to_string(i) + " has none");
    }
  }
}

/// Builds the graph input of one window. Future-stream sources need `predictor`.
template <typename S>
FusedInput<S> prepare_input(const Window& w, const FusionConfig& fusion, const GazeNetParams<S>* predictor) {
  const auto poses = pose_tensor<S>(w.past_poses, w.n_joints);
  if (!uses_gaze_nodes(fusion.source)) return pose_only(poses, w.total);
  const auto& raw = uses_head(fusion.source) ? w.past_head : w.past_gaze;
  if (raw.empty()) {
    throw ConfigError(std::string("window has no ") + (uses_head(fusion.source) ? "head" : "gaze") + " directions");
  }
  const auto past = direction_tensor<S>(raw);
  if (!uses_predictor(fusion.source)) return fuse(poses, past, w.total);
  if (!predictor) throw ConfigError("variant needs a trained direction predictor checkpoint");
  const auto predicted = gaze_forward(*predictor, past);
  if (fusion.layout == GazeLayout::predicted_only) return fuse(poses, predicted, w.total);
  return fuse_stream(poses, concat<S>({past, predicted}, 1), w.total);
}

// ---------------------------------------------------------------------------
// Checkpoints with JSON metadata sidecars (<checkpoint>.json)

inline std::filesystem::path sidecar_path(const std::filesystem::path& ckpt) {
  auto p = ckpt;
  p += ".json";
  return p;
}

struct MotionModel {
  VariantSpec spec;
  MotionNetParams<float> params;
};

inline nlohmann::json motion_metadata(const MotionModel& m) {
  const auto& c = m.params.config;
  return {{"kind", "motion"},
          {"variant", variant_name(m.spec.variant)},
          {"n_joints", c.n_joints},
          {"observed", c.observed},
          {"total", c.total},
          {"blocks", c.blocks},
          {"latent", c.latent},
          {"dropout", c.dropout},
          {"gaze_nodes", c.gaze_nodes},
          {"spatial_gcn", c.spatial_gcn},
          {"temporal_gcn", c.temporal_gcn},
          {"global_residual", c.global_residual},
          {"velocity_loss", m.spec.velocity_loss},
          {"source", gaze_source_name(m.spec.fusion.source)},
          {"layout", layout_name(m.spec.fusion.layout)},
          {"keep", c.keep == KeepHalf::first ? "first" : "second"}};
}

inline void save_motion_model(const std::filesystem::path& path, const MotionModel& m) {
  save_tensors(path, m.params.named());
  binary::write_file(sidecar_path(path), motion_metadata(m).dump(2) + "\n");
}

namespace detail {
inline nlohmann::json read_sidecar(const std::filesystem::path& ckpt, std::string_view kind) {
  const auto meta_path = sidecar_path(ckpt);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(binary::read_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("invalid checkpoint metadata '" + meta_path.string() + "': " + e.what(), 0);
  }
  if (j.value("kind", "") != kind) {
    throw ConfigError("checkpoint '" + ckpt.string() + "' is not a " + std::string(kind) + " checkpoint");
  }
  return j;
}
}  // namespace detail

inline MotionModel load_motion_model(const std::filesystem::path& path) {
  const auto j = detail::read_sidecar(path, "motion");
  MotionModel m;
  try {
    m.spec = variant_spec(parse_variant(j.at("variant").get<std::string>()));
    m.spec.fusion.source = parse_gaze_source(j.at("source").get<std::string>());
    m.spec.fusion.layout = parse_layout(j.at("layout").get<std::string>());
    m.spec.velocity_loss = j.at("velocity_loss").get<bool>();
    MotionNetConfig c;
    c.n_joints = j.at("n_joints").get<std::size_t>();
    c.observed = j.at("observed").get<std::size_t>();
    c.total = j.at("total").get<std::size_t>();
    c.blocks = j.at("blocks").get<std::size_t>();
    c.latent = j.at("latent").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.gaze_nodes = j.at("gaze_nodes").get<bool>();
    c.spatial_gcn = j.at("spatial_gcn").get<bool>();
    c.temporal_gcn = j.at("temporal_gcn").get<bool>();
    c.global_residual = j.at("global_residual").get<bool>();
    c.keep = j.at("keep").get<std::string>() == "second" ? KeepHalf::second : KeepHalf::first;
    m.params = init_motion_params<float>(c, 0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("invalid checkpoint metadata for '" + path.string() + "': " + e.what(), 0);
  }
  assign_tensors(m.params.named(), load_tensors(path));
  return m;
}

struct GazeModel {
  DirectionStream stream = DirectionStream::gaze;
  std::size_t observed = 10;
  GazeNetParams<float> params;
};

inline void save_gaze_model(const std::filesystem::path& path, const GazeModel& m) {
  save_tensors(path, m.params.named());
  const nlohmann::json j = {{"kind", "gaze"},
                            {"stream", m.stream == DirectionStream::gaze ? "gaze" : "head"},
                            {"observed", m.observed},
                            {"channels", m.params.channels()}};
  binary::write_file(sidecar_path(path), j.dump(2) + "\n");
}

inline GazeModel load_gaze_model(const std::filesystem::path& path) {
  const auto j = detail::read_sidecar(path, "gaze");
  GazeModel m;
  try {
    m.stream = j.at("stream").get<std::string>() == "head" ? DirectionStream::head : DirectionStream::gaze;
    m.observed = j.at("observed").get<std::size_t>();
    m.params = init_gaze_params<float>(0, j.at("channels").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("invalid checkpoint metadata for '" + path.string() + "': " + e.what(), 0);
  }
  assign_tensors(m.params.named(), load_tensors(path));
  return m;
}

}  // namespace gazemotion
