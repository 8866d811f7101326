#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gazemotion/evaluation.hpp"
#include "gazemotion/pipeline.hpp"
#include "gazemotion/training.hpp"

namespace gazemotion {

// ---------------------------------------------------------------------------
// Sample assembly and training of whole models

inline std::vector<GazeSample<float>> gaze_samples(const std::vector<MotionSequence>& seqs, DirectionStream stream,
                                                   std::size_t t, std::size_t stride) {
  std::vector<GazeSample<float>> out;
  for (const auto& s : seqs)
    for (const auto& p : direction_pairs(s, stream, t, stride))
      out.push_back({direction_tensor<float>(p.past), direction_tensor<float>(p.future)});
  return out;
}

inline std::vector<Window> collect_windows(const std::vector<MotionSequence>& seqs, std::size_t t, std::size_t T,
                                           std::size_t stride) {
  std::vector<Window> out;
  for (std::size_t i = 0; i < seqs.size(); ++i)
    for (auto& w : windows(seqs[i], t, T, stride, i)) out.push_back(std::move(w));
  return out;
}

/// Inputs are built once up front: the direction predictor is frozen while
/// the motion network trains.
inline std::vector<MotionSample<float>> motion_samples(const std::vector<Window>& ws, const FusionConfig& fusion,
                                                       const GazeNetParams<float>* predictor) {
  std::vector<MotionSample<float>> out;
  out.reserve(ws.size());
  for (const auto& w : ws)
    out.push_back({prepare_input(w, fusion, predictor), pose_tensor<float>(w.future_poses, w.n_joints)});
  return out;
}

inline GazeModel train_gaze_model(const std::vector<MotionSequence>& seqs, DirectionStream stream, std::size_t t,
                                  std::size_t stride, const TrainConfig& cfg, TrainResult* log = nullptr) {
  GazeModel m;
  m.stream = stream;
  m.observed = t;
  m.params = init_gaze_params<float>(cfg.seed);
  auto result = train_gaze(m.params, gaze_samples(seqs, stream, t, stride), cfg);
  if (log) *log = std::move(result);
  return m;
}

inline MotionModel train_motion_model(const std::vector<Window>& ws, const VariantSpec& spec,
                                      const MotionNetConfig& base, const GazeNetParams<float>* predictor,
                                      TrainConfig cfg, TrainResult* log = nullptr) {
  if (spec.baseline) throw ConfigError("baseline variants have no trainable model");
  MotionModel m;
  m.spec = spec;
  m.params = init_motion_params<float>(apply_variant(base, spec), cfg.seed);
  cfg.velocity_loss = spec.velocity_loss;
  auto result = train_motion(m.params, motion_samples(ws, spec.fusion, predictor), cfg);
  if (log) *log = std::move(result);
  return m;
}

/// Window predictor for a trained model (or a baseline when `model` is null).
inline Predictor make_predictor(const VariantSpec& spec, std::shared_ptr<const MotionModel> model,
                                std::shared_ptr<const GazeModel> direction) {
  if (spec.variant == Variant::zero_velocity_baseline) return zero_velocity_predict;
  if (spec.variant == Variant::constant_velocity_baseline) return constant_velocity_predict;
  if (!model) throw ConfigError("variant '" + variant_name(spec.variant) + "' needs a motion checkpoint");
  if (uses_predictor(model->spec.fusion.source) && !direction) {
    throw ConfigError("variant '" + variant_name(spec.variant) + "' needs a direction predictor checkpoint");
  }
  auto dct = std::make_shared<const DctMatrix<float>>(build_dct<float>(model->params.config.total));
  return [model, direction, dct](const Window& w) {
    const auto in = prepare_input(w, model->spec.fusion, direction ? &direction->params : nullptr);
    return motion_predict(model->params, in, *dct);
  };
}

// ---------------------------------------------------------------------------
// Ablation matrix

struct MatrixConfig {
  MotionNetConfig model;  // sizes; n_joints comes from the manifest
  TrainConfig motion_train = TrainConfig::motion_defaults();
  TrainConfig gaze_train = TrainConfig::gaze_defaults();
  GazeLayout layout = GazeLayout::predicted_only;
  std::size_t train_stride = 1;
  std::size_t gaze_stride = 1;
  std::size_t eval_stride = 5;
  std::vector<double> horizons_ms = {200, 400, 600, 800, 1000};
  /// Checkpoints are looked up (and saved) here as <variant>-seed<k>.gzmt and
  /// gaze-<stream>-seed<k>.gzmt. Empty: nothing is read or written.
  std::filesystem::path checkpoint_dir;
  /// Train missing models inline; otherwise a missing checkpoint is a ConfigError.
  bool train = true;
  std::function<void(const std::string&)> log;
};

struct MatrixCell {
  Variant variant = Variant::full;
  std::uint64_t seed = 0;
  bool trained = false;  // a model was trained in this run
  WindowEvaluation eval;
};

struct MatrixResult {
  std::vector<MatrixCell> cells;
  std::vector<EvalReport> reports() const {
    std::vector<EvalReport> r;
    for (const auto& c : cells) r.push_back(c.eval.report);
    return r;
  }
  std::size_t trained_models = 0;
  std::string table;  // per-variant mean +- std across seeds
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

/// Mean +- sample std of each horizon and the average across seeds, and the
/// signed-rank p-value of each variant against "full" on seed-averaged
/// per-window errors.
inline std::string comparison_table(const std::vector<MatrixCell>& cells) {
  if (cells.empty()) return "";
  std::vector<Variant> order;
  for (const auto& c : cells)
    if (std::find(order.begin(), order.end(), c.variant) == order.end()) order.push_back(c.variant);
  auto window_means = [&](Variant v) {
    std::vector<double> acc;
    std::size_t k = 0;
    for (const auto& c : cells) {
      if (c.variant != v) continue;
      if (acc.empty()) acc.assign(c.eval.window_errors.size(), 0.0);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += c.eval.window_errors[i];
      ++k;
    }
    for (auto& x : acc) x /= static_cast<double>(k);
    return acc;
  };
  const bool have_full = std::find(order.begin(), order.end(), Variant::full) != order.end();
  const auto full_errors = have_full ? window_means(Variant::full) : std::vector<double>{};

  const auto& first = cells.front().eval.report;
  std::ostringstream os;
  os << std::left << std::setw(28) << "Method";
  for (const auto& h : first.horizons) os << std::right << std::setw(16) << (format_ms(h.ms) + " ms");
  os << std::setw(16) << "Average" << std::setw(8) << "seeds" << std::setw(12) << "p vs full" << '\n';
  for (auto v : order) {
    std::vector<std::vector<double>> per_h(first.horizons.size());
    std::vector<double> avg;
    for (const auto& c : cells) {
      if (c.variant != v) continue;
      for (std::size_t h = 0; h < per_h.size(); ++h) per_h[h].push_back(c.eval.report.horizons[h].mpjpe_mm);
      avg.push_back(c.eval.report.average_mm);
    }
    auto cell = [](const std::vector<double>& xs) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(1) << detail::mean_of(xs) << " +- " << detail::std_of(xs);
      return s.str();
    };
    os << std::left << std::setw(28) << variant_name(v);
    for (const auto& xs : per_h) os << std::right << std::setw(16) << cell(xs);
    os << std::right << std::setw(16) << cell(avg) << std::setw(8) << avg.size();
    std::string p = "-";
    if (have_full && v != Variant::full && full_errors.size() >= 6) {
      std::ostringstream s;
      s << std::setprecision(3) << signed_rank_test(window_means(v), full_errors);
      p = s.str();
    }
    os << std::setw(12) << p << '\n';
  }
  return os.str();
}

/// Trains (when needed) and evaluates every (variant, seed) cell on the
/// manifest's test split.
inline MatrixResult run_matrix(const std::vector<Variant>& variants, const DatasetManifest& manifest,
                               const std::vector<std::uint64_t>& seeds, const MatrixConfig& config) {
  if (variants.empty() || seeds.empty()) throw ArgumentError("run_matrix: need at least one variant and one seed");
  auto log = [&](const std::string& s) {
    if (config.log) config.log(s);
  };
  MotionNetConfig base = config.model;
  base.n_joints = manifest.n_joints;
  const auto offsets = horizon_frames(config.horizons_ms, manifest.frame_rate);
  if (!offsets.empty() && offsets.back() > base.total - base.observed) {
    throw ArgumentError("horizon " + format_ms(config.horizons_ms.back()) + " ms exceeds the " +
                        std::to_string(base.total - base.observed) + "-frame prediction");
  }

  const auto test = load_split(manifest, "test");
  const auto test_windows = collect_windows(test, base.observed, base.total, config.eval_stride);
  if (test_windows.empty()) throw ConfigError("run_matrix: the test split yields no windows");
  std::vector<MotionSequence> train;
  std::vector<Window> train_windows;
  auto ensure_train = [&] {
    if (train.empty()) {
      train = load_split(manifest, "train");
      if (train.empty()) throw ConfigError("run_matrix: the manifest has no training sequences");
      train_windows = collect_windows(train, base.observed, base.total, config.train_stride);
    }
  };

  auto ckpt = [&](const std::string& stem) -> std::optional<std::filesystem::path> {
    if (config.checkpoint_dir.empty()) return std::nullopt;
    return config.checkpoint_dir / (stem + ".gzmt");
  };

  MatrixResult result;
  std::map<std::pair<int, std::uint64_t>, std::shared_ptr<const GazeModel>> direction_models;
  for (auto seed : seeds) {
    for (auto v : variants) {
      VariantSpec spec = variant_spec(v);
      spec.fusion.layout = config.layout;
      MatrixCell cell;
      cell.variant = v;
      cell.seed = seed;
      std::shared_ptr<const MotionModel> model;
      std::shared_ptr<const GazeModel> direction;
      if (!spec.baseline) {
        if (uses_predictor(spec.fusion.source)) {
          const auto stream = stream_for(spec.fusion.source);
          const auto key = std::make_pair(static_cast<int>(stream), seed);
          if (!direction_models.count(key)) {
            const std::string stem =
                std::string("gaze-") + (stream == DirectionStream::gaze ? "gaze" : "head") + "-seed" +
                std::to_string(seed);
            const auto path = ckpt(stem);
            if (path && std::filesystem::exists(*path)) {
              direction_models[key] = std::make_shared<const GazeModel>(load_gaze_model(*path));
            } else if (config.train) {
              ensure_train();
              require_streams(train, spec.fusion.source);
              log("training " + stem);
              auto gcfg = config.gaze_train;
              gcfg.seed = seed;
              auto g = train_gaze_model(train, stream, base.observed, config.gaze_stride, gcfg);
              if (path) save_gaze_model(*path, g);
              direction_models[key] = std::make_shared<const GazeModel>(std::move(g));
              ++result.trained_models;
            } else {
              throw ConfigError("missing direction checkpoint '" + (path ? path->string() : stem) +
                                "' and training is disabled");
            }
          }
          direction = direction_models[key];
        }
        const std::string stem = variant_name(v) + "-seed" + std::to_string(seed);
        const auto path = ckpt(stem);
        if (path && std::filesystem::exists(*path)) {
          model = std::make_shared<const MotionModel>(load_motion_model(*path));
        } else if (config.train) {
          ensure_train();
          require_streams(train, spec.fusion.source);
          log("training " + stem + " on " + std::to_string(train_windows.size()) + " windows");
          auto mcfg = config.motion_train;
          mcfg.seed = seed;
          auto m = train_motion_model(train_windows, spec, base, direction ? &direction->params : nullptr, mcfg);
          if (path) save_motion_model(*path, m);
          model = std::make_shared<const MotionModel>(std::move(m));
          cell.trained = true;
          ++result.trained_models;
        } else {
          throw ConfigError("missing checkpoint '" + (path ? path->string() : stem) + "' and training is disabled");
        }
      }
      require_streams(test, spec.fusion.source);
      cell.eval = evaluate_windows(test_windows, make_predictor(spec, model, direction), offsets, manifest.frame_rate);
      cell.eval.report.variant = variant_name(v);
      cell.eval.report.dataset = manifest.name;
      cell.eval.report.seed = seed;
      log("evaluated " + variant_name(v) + " seed " + std::to_string(seed) + ": avg " +
          std::to_string(cell.eval.report.average_mm) + " mm");
      result.cells.push_back(std::move(cell));
    }
  }
  result.table = comparison_table(result.cells);
  return result;
}

}  // namespace gazemotion
