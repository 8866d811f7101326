#include "cli.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gazemotion/experiment.hpp"
#include "gazemotion/primitive_checks.hpp"
#include "gazemotion/synth.hpp"

namespace gazemotion::cli {
namespace {

namespace fs = std::filesystem;

/// A check (gradient check) did not pass; maps to exit code 1.
struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Reads `key = value` lines; `#` starts a comment. Values may be quoted, and
/// list values may be written as [a, b].
std::vector<std::pair<std::string, std::string>> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path.string() + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
      std::string list;
      for (char c : value.substr(1, value.size() - 2))
        if (c != ' ' && c != '"') list.push_back(c);
      value = list;
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& key) {
  const std::string flag = "--" + key;
  for (const auto& a : args)
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  return false;
}

/// Inserts options from `--config FILE` that the command line does not set.
std::vector<std::string> merge_config(CLI::App& app, const std::vector<std::string>& args) {
  if (args.size() < 2) return args;
  CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[1]);
  } catch (const CLI::OptionNotFound&) {
    return args;
  }
  std::optional<std::string> config;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (!config) return args;
  std::vector<std::string> injected;
  for (const auto& [key, value] : read_config_file(*config)) {
    if (key == "config") continue;
    const auto* opt = sub->get_option_no_throw("--" + key);
    if (!opt) throw ConfigError("unknown key '" + key + "' in config file for '" + args[1] + "'");
    if (given_on_command_line(args, key)) continue;
    if (opt->get_type_size() == 0) {
      if (value == "true" || value == "1" || value == "yes" || value == "on") injected.push_back("--" + key);
    } else {
      injected.push_back("--" + key);
      injected.push_back(value);
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + 2);
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + 2, args.end());
  return out;
}

void echo_config(const CLI::App& sub, std::ostream& err) {
  std::istringstream lines(sub.config_to_str(true, false));
  err << "# resolved configuration: " << sub.get_name() << '\n';
  std::string line;
  while (std::getline(lines, line))
    if (line.rfind("config=", 0) != 0) err << line << '\n';
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void write_text(const fs::path& path, const std::string& text) { binary::write_file(path, text); }

/// JSON-lines training log. Wall time is opt-in so identical runs produce
/// identical logs.
class TrainLog {
 public:
  TrainLog(const std::string& path, bool wall_time) : wall_time_(wall_time), start_(std::chrono::steady_clock::now()) {
    if (path.empty()) return;
    file_.open(path, std::ios::trunc);
    if (!file_) throw IoError("cannot write training log '" + path + "'");
  }
  void operator()(const StepRecord& r) {
    if (!file_.is_open()) return;
    nlohmann::json j = {{"step", r.step}, {"epoch", r.epoch}, {"lr", r.lr}, {"loss", r.loss}};
    if (has_components_) {
      j["motion"] = r.motion;
      j["velocity"] = r.velocity;
    }
    if (wall_time_) {
      j["wall_time"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    file_ << j.dump() << '\n';
    file_.flush();
  }
  void set_components(bool v) { has_components_ = v; }

 private:
  std::ofstream file_;
  bool wall_time_;
  bool has_components_ = false;
  std::chrono::steady_clock::time_point start_;
};

fs::path epoch_checkpoint(const fs::path& final_path, std::size_t epoch) {
  auto p = final_path;
  p.replace_filename(final_path.stem().string() + "-epoch" + std::to_string(epoch + 1) + final_path.extension().string());
  return p;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::size_t sequences = 50;
  std::size_t frames = 300;
  std::size_t joints = 21;
  std::size_t lead = 5;
  std::size_t max_goals = 0;
  std::uint64_t seed = 0;
  double gaze_noise = 0.05;
  double pose_noise = 0.005;
  double frame_rate = 30.0;
  double train_fraction = 0.8;
  std::string name = "synthetic";
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  if (a.joints == 0) throw ArgumentError("--joints must be positive");
  if (a.sequences == 0) throw ArgumentError("--sequences must be positive");
  if (a.train_fraction < 0.0 || a.train_fraction > 1.0) throw ArgumentError("--train-fraction must be in [0, 1]");
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw IoError("cannot create output directory '" + a.out + "': " + ec.message());
  DatasetManifest m;
  m.name = a.name;
  m.n_joints = a.joints;
  m.frame_rate = a.frame_rate;
  const auto n_train = std::min(a.sequences, static_cast<std::size_t>(std::llround(a.train_fraction * a.sequences)));
  for (std::size_t i = 0; i < a.sequences; ++i) {
    SynthConfig c;
    c.n_joints = a.joints;
    c.frames = a.frames;
    c.max_goals = a.max_goals;
    c.lead = a.lead;
    c.gaze_noise = a.gaze_noise;
    c.pose_noise = a.pose_noise;
    c.frame_rate = a.frame_rate;
    c.seed = splitmix64(a.seed * 1000003ull + i);
    std::ostringstream file;
    file << "seq_" << std::setw(3) << std::setfill('0') << i << ".gzmo";
    write_sequence(fs::path(a.out) / file.str(), synth_generate(c).sequence);
    m.sequences.push_back({file.str(), i < n_train ? "train" : "test"});
  }
  write_manifest(fs::path(a.out) / "manifest.json", m);
  out << "wrote " << a.sequences << " sequences (" << n_train << " train, " << a.sequences - n_train
      << " test) to " << a.out << '\n';
}

struct ImportArgs {
  std::string input;
  std::string columns;
  double source_rate = 120.0;
  std::size_t decimate = 1;
  std::string out;
};

void cmd_import(const ImportArgs& a, std::ostream& out) {
  auto seq = import_csv(a.input, parse_column_map(a.columns), a.source_rate, a.decimate);
  write_sequence(a.out, seq);
  out << "imported " << seq.frames() << " frames of " << seq.n_joints << " joints at " << seq.frame_rate << " Hz to "
      << a.out << '\n';
}

struct TrainArgs {
  std::string manifest;
  std::string ckpt_out;
  std::string log;
  bool wall_time = false;
  std::size_t checkpoint_every = 0;
  std::size_t observed = 10;
  std::size_t epochs = 0;
  double lr = 0.01;
  double decay = 0.0;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
  std::size_t stride = 1;
  std::size_t max_steps = 0;
  double clip_norm = 0.0;
  // gaze network
  std::string stream = "gaze";
  // motion network
  std::string variant = "full";
  std::string gaze_ckpt;
  std::size_t total = 40;
  std::size_t blocks = 16;
  std::size_t latent = 16;
  double dropout = 0.3;
  std::string layout = "predicted-only";
  std::string keep = "first";
};

TrainConfig train_config(const TrainArgs& a) {
  TrainConfig c;
  c.lr0 = a.lr;
  c.decay = a.decay;
  c.batch = a.batch;
  c.epochs = a.epochs;
  c.seed = a.seed;
  c.max_steps = a.max_steps;
  c.clip_norm = a.clip_norm;
  c.checkpoint_every = a.checkpoint_every;
  c.validate();
  return c;
}

void cmd_train_gaze(const TrainArgs& a, std::ostream& out) {
  auto cfg = train_config(a);
  const auto stream = a.stream == "head" ? DirectionStream::head : DirectionStream::gaze;
  const auto manifest = read_manifest(a.manifest);
  const auto train = load_split(manifest, "train");
  require_streams(train, stream == DirectionStream::head ? GazeSource::past_head : GazeSource::past_gaze);
  TrainLog log(a.log, a.wall_time);
  cfg.on_step = std::ref(log);
  GazeModel model;
  model.stream = stream;
  model.observed = a.observed;
  model.params = init_gaze_params<float>(a.seed);
  cfg.on_checkpoint = [&](std::size_t epoch) { save_gaze_model(epoch_checkpoint(a.ckpt_out, epoch), model); };
  const auto samples = gaze_samples(train, stream, a.observed, a.stride);
  const auto result = train_gaze(model.params, samples, cfg);
  save_gaze_model(a.ckpt_out, model);
  out << "trained gaze network (" << a.stream << ") on " << samples.size() << " pairs, " << result.steps.size()
      << " steps, final loss " << (result.steps.empty() ? 0.0 : result.steps.back().loss) << " rad\n";
}

void cmd_train_motion(const TrainArgs& a, std::ostream& out) {
  auto spec = variant_spec(parse_variant(a.variant));
  if (spec.baseline) throw ConfigError("variant '" + a.variant + "' is a baseline and has nothing to train");
  spec.fusion.layout = parse_layout(a.layout);
  if (a.keep != "first" && a.keep != "second") throw ArgumentError("--keep must be 'first' or 'second'");
  auto cfg = train_config(a);
  std::shared_ptr<const GazeModel> direction;
  if (uses_predictor(spec.fusion.source)) {
    if (a.gaze_ckpt.empty()) {
      throw ConfigError("variant '" + a.variant + "' needs a trained direction predictor (--gaze-ckpt)");
    }
    direction = std::make_shared<const GazeModel>(load_gaze_model(a.gaze_ckpt));
    if (direction->stream != stream_for(spec.fusion.source)) {
      throw ConfigError("--gaze-ckpt was trained on the wrong direction stream for variant '" + a.variant + "'");
    }
    if (direction->observed != a.observed) throw ConfigError("--gaze-ckpt was trained with a different --observed");
  }
  const auto manifest = read_manifest(a.manifest);
  const auto train = load_split(manifest, "train");
  require_streams(train, spec.fusion.source);
  MotionNetConfig base;
  base.n_joints = manifest.n_joints;
  base.observed = a.observed;
  base.total = a.total;
  base.blocks = a.blocks;
  base.latent = a.latent;
  base.dropout = a.dropout;
  base.keep = a.keep == "second" ? KeepHalf::second : KeepHalf::first;
  const auto ws = collect_windows(train, a.observed, a.total, a.stride);

  MotionModel model;
  model.spec = spec;
  model.params = init_motion_params<float>(apply_variant(base, spec), a.seed);
  cfg.velocity_loss = spec.velocity_loss;
  TrainLog log(a.log, a.wall_time);
  log.set_components(true);
  cfg.on_step = std::ref(log);
  cfg.on_checkpoint = [&](std::size_t epoch) { save_motion_model(epoch_checkpoint(a.ckpt_out, epoch), model); };
  const auto samples = motion_samples(ws, spec.fusion, direction ? &direction->params : nullptr);
  const auto result = train_motion(model.params, samples, cfg);
  save_motion_model(a.ckpt_out, model);
  out << "trained motion network (" << a.variant << ") on " << samples.size() << " windows, "
      << result.steps.size() << " steps, final loss " << (result.steps.empty() ? 0.0 : result.steps.back().loss)
      << '\n';
}

struct EvalArgs {
  std::string manifest;
  std::string input;  // predict only
  std::string ckpt;
  std::string gaze_ckpt;
  std::string baseline;
  std::string variant_label;
  std::size_t observed = 10;
  std::size_t total = 40;
  std::vector<double> horizons = {200, 400, 600, 800, 1000};
  std::size_t stride = 5;
  std::string split = "test";
  std::uint64_t seed = 0;
  std::string csv;
  std::string table;
  std::string window_errors;
  std::size_t at = 0;  // predict only
  std::string out;     // predict only
};

struct LoadedPredictor {
  VariantSpec spec;
  Predictor predict;
  std::size_t observed = 0;
  std::size_t total = 0;
  std::size_t n_joints = 0;  // 0: any
};

LoadedPredictor load_predictor(const EvalArgs& a) {
  if (a.ckpt.empty() == a.baseline.empty()) throw ArgumentError("give exactly one of --ckpt or --baseline");
  LoadedPredictor p;
  if (!a.baseline.empty()) {
    if (a.baseline != "zero-velocity" && a.baseline != "constant-velocity") {
      throw ArgumentError("--baseline must be 'zero-velocity' or 'constant-velocity'");
    }
    p.spec = variant_spec(parse_variant(a.baseline + "-baseline"));
    p.predict = make_predictor(p.spec, nullptr, nullptr);
    p.observed = a.observed;
    p.total = a.total;
    if (p.observed == 0 || p.observed >= p.total) throw ArgumentError("need 1 <= --observed < --total");
    return p;
  }
  auto model = std::make_shared<const MotionModel>(load_motion_model(a.ckpt));
  std::shared_ptr<const GazeModel> direction;
  if (uses_predictor(model->spec.fusion.source)) {
    if (a.gaze_ckpt.empty()) throw ConfigError("checkpoint variant needs a direction predictor (--gaze-ckpt)");
    direction = std::make_shared<const GazeModel>(load_gaze_model(a.gaze_ckpt));
  }
  p.spec = model->spec;
  p.observed = model->params.config.observed;
  p.total = model->params.config.total;
  p.n_joints = model->params.config.n_joints;
  p.predict = make_predictor(model->spec, model, direction);
  return p;
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto manifest = read_manifest(a.manifest);
  auto p = load_predictor(a);
  if (p.n_joints && p.n_joints != manifest.n_joints) throw ConfigError("checkpoint joint count differs from manifest");
  const auto offsets = horizon_frames(a.horizons, manifest.frame_rate);
  if (!offsets.empty() && offsets.back() > p.total - p.observed) {
    throw ArgumentError("horizon " + format_ms(a.horizons.back()) + " ms exceeds the prediction length");
  }
  const auto seqs = load_split(manifest, a.split);
  require_streams(seqs, p.spec.fusion.source);
  const auto ws = collect_windows(seqs, p.observed, p.total, a.stride);
  if (ws.empty()) throw ConfigError("split '" + a.split + "' yields no windows");
  auto ev = evaluate_windows(ws, p.predict, offsets, manifest.frame_rate);
  ev.report.variant = a.variant_label.empty() ? variant_name(p.spec.variant) : a.variant_label;
  ev.report.dataset = manifest.name;
  ev.report.seed = a.seed;
  const auto csv = report_csv_header(ev.report) + "\n" + report_csv_row(ev.report) + "\n";
  const auto table = render_table({ev.report});
  out << table;
  if (!a.csv.empty()) write_text(a.csv, csv);
  if (!a.table.empty()) write_text(a.table, table);
  if (!a.window_errors.empty()) {
    std::ostringstream os;
    os << "variant,seed,sequence,start,mpjpe_mm\n" << std::fixed << std::setprecision(6);
    for (std::size_t i = 0; i < ws.size(); ++i)
      os << ev.report.variant << ',' << a.seed << ',' << ws[i].sequence << ',' << ws[i].start << ','
         << ev.window_errors[i] << '\n';
    write_text(a.window_errors, os.str());
  }
}

void cmd_predict(const EvalArgs& a, std::ostream& out) {
  const auto p = load_predictor(a);
  const auto seq = read_sequence(a.input);
  if (p.n_joints && p.n_joints != seq.n_joints) throw ConfigError("checkpoint joint count differs from the input");
  if (a.at < p.observed) {
    throw ArgumentError("--at " + std::to_string(a.at) + " is before the first predictable frame " +
                        std::to_string(p.observed));
  }
  if (a.at > seq.frames()) throw ArgumentError("--at is beyond the end of the sequence");
  const std::size_t n = seq.n_joints, start = a.at - p.observed, H = p.total - p.observed, per = 3 * n;
  Window w;
  w.start = start;
  w.n_joints = n;
  w.observed = p.observed;
  w.total = p.total;
  auto it = [&](const std::vector<float>& v, std::size_t frame, std::size_t width) {
    return v.begin() + static_cast<std::ptrdiff_t>(frame * width);
  };
  w.past_poses.assign(it(seq.joints, start, per), it(seq.joints, a.at, per));
  if (seq.has_gaze()) w.past_gaze.assign(it(seq.gaze, start, 3), it(seq.gaze, a.at, 3));
  if (seq.has_head()) w.past_head.assign(it(seq.head, start, 3), it(seq.head, a.at, 3));
  const bool have_truth = a.at + H <= seq.frames();
  if (have_truth) w.future_poses.assign(it(seq.joints, a.at, per), it(seq.joints, a.at + H, per));

  const auto pred = p.predict(w);
  MotionSequence result;
  result.n_joints = n;
  result.frame_rate = seq.frame_rate;
  result.joints = pose_frames(pred);
  write_sequence(a.out, result);

  if (!a.csv.empty()) {
    std::ostringstream os;
    os << "frame,joint,x,y,z" << (have_truth ? ",gt_x,gt_y,gt_z" : "") << '\n' << std::setprecision(9);
    for (std::size_t f = 0; f < H; ++f)
      for (std::size_t j = 0; j < n; ++j) {
        os << a.at + f << ',' << j;
        for (std::size_t c = 0; c < 3; ++c) os << ',' << result.joints[(f * n + j) * 3 + c];
        if (have_truth)
          for (std::size_t c = 0; c < 3; ++c) os << ',' << w.future_poses[(f * n + j) * 3 + c];
        os << '\n';
      }
    write_text(a.csv, os.str());
  }
  out << "predicted frames " << a.at << ".." << a.at + H - 1 << " -> " << a.out << '\n';
  if (have_truth) {
    MpjpeAccumulator acc({}, seq.frame_rate);
    const double mm = acc.add(pred, pose_tensor<float>(w.future_poses, n));
    out << "mpjpe_mm " << std::fixed << std::setprecision(4) << mm << '\n';
  }
}

struct GradcheckArgs {
  std::string scale = "tiny";
  double tolerance = 1e-4;
  double eps = 1e-5;
  std::uint64_t seed = 0;
  std::vector<std::string> corrupt;
};

void cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  if (a.scale != "tiny") throw ArgumentError("--scale: only 'tiny' is supported");
  struct Restore {
    ~Restore() { debug::clear_corruptions(); }
  } restore;
  for (const auto& op : a.corrupt) debug::corrupt_backward(op);
  GradCheckOptions opts;
  opts.eps = a.eps;
  opts.tolerance = a.tolerance;
  opts.seed = a.seed;

  std::mt19937_64 rng(a.seed);
  std::normal_distribution<double> normal;
  auto unit_columns = [&](std::size_t t) {
    Tensor<double> g({3, t});
    auto d = g.data();
    for (std::size_t f = 0; f < t; ++f) {
      double v[3], s = 0.0;
      for (auto& x : v) {
        x = normal(rng);
        s += x * x;
      }
      for (std::size_t c = 0; c < 3; ++c) d[c * t + f] = v[c] / std::sqrt(s);
    }
    return g;
  };

  std::vector<std::pair<std::string, GradCheckReport>> groups;
  {
    const auto gaze = init_gaze_params<double>(a.seed + 1);
    const auto past = unit_columns(4), future = unit_columns(4);
    groups.emplace_back("gaze network (t=4)",
                        grad_check<double>([&] { return angular_loss(gaze_forward(gaze, past), future); },
                                           gaze.named(), opts));
  }
  {
    MotionNetConfig c;
    c.n_joints = 3;
    c.observed = 2;
    c.total = 4;
    c.blocks = 2;
    c.dropout = 0.0;
    const auto params = init_motion_params<double>(c, a.seed + 2);
    Tensor<double> poses({3, 3, 2}), target({3, 3, 2});
    for (auto& v : poses.data()) v = normal(rng);
    for (auto& v : target.data()) v = normal(rng);
    const auto fused = fuse(poses, unit_columns(2), 4);
    const auto dct = build_dct<double>(4);
    groups.emplace_back("motion network (n=3, t=2, T=4, m=2)",
                        grad_check<double>(
                            [&] { return motion_velocity_loss(motion_predict(params, fused, dct), target).total; },
                            params.trainable(), opts));
  }
  bool ok = true;
  out << std::scientific << std::setprecision(3);
  for (const auto& [group, report] : groups) {
    out << group << '\n';
    for (const auto& pc : report.params) {
      out << "  " << std::left << std::setw(24) << pc.name << " max_rel_err " << pc.max_rel_error << "  "
          << (pc.passed ? "PASS" : "FAIL") << '\n';
    }
    ok &= report.passed();
  }
  if (!ok) {
    std::string failing;
    for (const auto& pc : check_primitives(opts, a.seed + 3))
      if (!pc.report.passed()) failing += (failing.empty() ? "" : ", ") + pc.op;
    throw CheckFailed("gradient check failed" + (failing.empty() ? std::string() : "; failing ops: " + failing));
  }
  out << "all gradients within " << a.tolerance << '\n';
}

struct ReportArgs {
  std::string manifest;
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::string ckpt_dir;
  bool no_train = false;
  TrainArgs motion;
  std::size_t gaze_epochs = 50;
  double gaze_lr = 0.01;
  double gaze_decay = 0.9;
  std::size_t gaze_stride = 1;
  std::size_t eval_stride = 5;
  std::vector<double> horizons = {200, 400, 600, 800, 1000};
  std::string csv;
  std::string table;
  std::string window_errors;
};

void cmd_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<Variant> variants;
  if (a.variants.empty()) {
    for (const auto& [v, name] : kVariantNames) variants.push_back(v);
  } else {
    for (const auto& s : a.variants) variants.push_back(parse_variant(s));
  }
  MatrixConfig mc;
  mc.model.observed = a.motion.observed;
  mc.model.total = a.motion.total;
  mc.model.blocks = a.motion.blocks;
  mc.model.latent = a.motion.latent;
  mc.model.dropout = a.motion.dropout;
  mc.motion_train = train_config(a.motion);
  mc.gaze_train = mc.motion_train;
  mc.gaze_train.epochs = a.gaze_epochs;
  mc.gaze_train.lr0 = a.gaze_lr;
  mc.gaze_train.decay = a.gaze_decay;
  mc.gaze_train.max_steps = 0;
  mc.gaze_train.validate();
  mc.layout = parse_layout(a.motion.layout);
  mc.train_stride = a.motion.stride;
  mc.gaze_stride = a.gaze_stride;
  mc.eval_stride = a.eval_stride;
  mc.horizons_ms = a.horizons;
  mc.checkpoint_dir = a.ckpt_dir;
  mc.train = !a.no_train;
  mc.log = [&](const std::string& s) { err << s << '\n'; };
  if (!a.ckpt_dir.empty()) {
    std::error_code ec;
    fs::create_directories(a.ckpt_dir, ec);
    if (ec) throw IoError("cannot create checkpoint directory '" + a.ckpt_dir + "'");
  }
  const auto result = run_matrix(variants, read_manifest(a.manifest), a.seeds, mc);
  const auto reports = result.reports();
  std::string csv = report_csv_header(reports.front()) + "\n";
  for (const auto& r : reports) csv += report_csv_row(r) + "\n";
  out << render_table(reports) << '\n' << result.table;
  if (!a.csv.empty()) write_text(a.csv, csv);
  if (!a.table.empty()) write_text(a.table, result.table);
  if (!a.window_errors.empty()) {
    std::ostringstream os;
    os << "variant,seed,window,mpjpe_mm\n" << std::fixed << std::setprecision(6);
    for (const auto& c : result.cells)
      for (std::size_t i = 0; i < c.eval.window_errors.size(); ++i)
        os << variant_name(c.variant) << ',' << c.seed << ',' << i << ',' << c.eval.window_errors[i] << '\n';
    write_text(a.window_errors, os.str());
  }
}

// ---------------------------------------------------------------------------

void add_config_option(CLI::App* sub) {
  sub->add_option("--config", "File of 'key = value' lines; command-line flags take precedence");
}

void add_train_options(CLI::App* sub, TrainArgs& a) {
  sub->add_option("--lr", a.lr, "Initial learning rate")->capture_default_str();
  sub->add_option("--decay", a.decay, "Learning-rate factor per epoch")->capture_default_str();
  sub->add_option("--epochs", a.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--batch", a.batch, "Minibatch size")->capture_default_str();
  sub->add_option("--seed", a.seed, "Initialization and shuffling seed")->capture_default_str();
  sub->add_option("--stride", a.stride, "Training window stride")->capture_default_str();
  sub->add_option("--max-steps", a.max_steps, "Stop after this many steps (0: no limit)")->capture_default_str();
  sub->add_option("--clip-norm", a.clip_norm, "Gradient-norm clip (0: off)")->capture_default_str();
  sub->add_option("--observed", a.observed, "Observed frames t")->capture_default_str();
}

void add_model_options(CLI::App* sub, TrainArgs& a) {
  sub->add_option("--total", a.total, "Window length T")->capture_default_str();
  sub->add_option("--blocks", a.blocks, "Residual blocks m")->capture_default_str();
  sub->add_option("--latent", a.latent, "Latent feature width")->capture_default_str();
  sub->add_option("--dropout", a.dropout, "Dropout rate in residual blocks")->capture_default_str();
  sub->add_option("--layout", a.layout, "Gaze stream layout: predicted-only | past-then-predicted")
      ->capture_default_str();
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const CheckFailed*>(&e)) return kCheckFailed;
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const IoError*>(&e) ||
      dynamic_cast<const ImportError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kIo;
  }
  if (dynamic_cast<const ArgumentError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const DimensionError*>(&e)) {
    return kUsage;
  }
  return kCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaze-guided human motion forecasting", args.empty() ? "gazemotion" : args[0]};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic gaze-correlated dataset and manifest");
  add_config_option(s);
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--sequences", synth.sequences, "Number of sequences")->capture_default_str();
  s->add_option("--frames", synth.frames, "Frames per sequence")->capture_default_str();
  s->add_option("--joints", synth.joints, "Joints per frame")->capture_default_str();
  s->add_option("--lead", synth.lead, "Frames by which gaze leads the body turn")->capture_default_str();
  s->add_option("--max-goals", synth.max_goals, "Goals per sequence (0: fill all frames)")->capture_default_str();
  s->add_option("--seed", synth.seed, "Corpus seed")->capture_default_str();
  s->add_option("--gaze-noise", synth.gaze_noise, "Gaze direction noise (radians, per axis)")->capture_default_str();
  s->add_option("--pose-noise", synth.pose_noise, "Joint position noise (meters)")->capture_default_str();
  s->add_option("--frame-rate", synth.frame_rate, "Frame rate (Hz)")->capture_default_str();
  s->add_option("--train-fraction", synth.train_fraction, "Fraction of sequences in the train split")
      ->capture_default_str();
  s->add_option("--name", synth.name, "Dataset name")->capture_default_str();

  ImportArgs imp;
  auto* im = app.add_subcommand("import-csv", "Convert a numeric CSV recording to a sequence file");
  add_config_option(im);
  im->add_option("--input", imp.input, "CSV file")->required();
  im->add_option("--columns", imp.columns, "Column map: name:index pairs (joint<k>.x, gaze.x, head.x, ...)")
      ->required();
  im->add_option("--source-rate", imp.source_rate, "Frame rate of the CSV (Hz)")->capture_default_str();
  im->add_option("--decimate", imp.decimate, "Keep every k-th frame")->capture_default_str();
  im->add_option("--out", imp.out, "Output sequence file")->required();

  TrainArgs tg;
  tg.epochs = 50;
  tg.decay = 0.9;
  auto* g = app.add_subcommand("train-gaze", "Train the gaze (or head direction) forecasting network");
  add_config_option(g);
  g->add_option("--manifest", tg.manifest, "Dataset manifest")->required();
  g->add_option("--ckpt-out", tg.ckpt_out, "Output checkpoint")->required();
  g->add_option("--stream", tg.stream, "Direction stream: gaze | head")
      ->check(CLI::IsMember({"gaze", "head"}))
      ->capture_default_str();
  g->add_option("--log", tg.log, "JSON-lines training log");
  g->add_flag("--wall-time", tg.wall_time, "Record wall time in the log (makes logs run-dependent)");
  g->add_option("--checkpoint-every", tg.checkpoint_every, "Save a checkpoint every k epochs (0: final only)")
      ->capture_default_str();
  add_train_options(g, tg);

  TrainArgs tm;
  tm.epochs = 100;
  tm.decay = 0.95;
  auto* m = app.add_subcommand("train-motion", "Train the motion forecasting network");
  add_config_option(m);
  m->add_option("--manifest", tm.manifest, "Dataset manifest")->required();
  m->add_option("--ckpt-out", tm.ckpt_out, "Output checkpoint")->required();
  m->add_option("--variant", tm.variant, "Model variant (" + variant_list() + ")")->capture_default_str();
  m->add_option("--gaze-ckpt", tm.gaze_ckpt, "Trained direction predictor (future-gaze/future-head variants)");
  m->add_option("--keep", tm.keep, "Temporal half kept after the residual blocks: first | second")
      ->capture_default_str();
  m->add_option("--log", tm.log, "JSON-lines training log");
  m->add_flag("--wall-time", tm.wall_time, "Record wall time in the log (makes logs run-dependent)");
  m->add_option("--checkpoint-every", tm.checkpoint_every, "Save a checkpoint every k epochs (0: final only)")
      ->capture_default_str();
  add_train_options(m, tm);
  add_model_options(m, tm);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint or baseline on a manifest split");
  add_config_option(e);
  e->add_option("--manifest", ev.manifest, "Dataset manifest")->required();
  e->add_option("--ckpt", ev.ckpt, "Motion checkpoint");
  e->add_option("--gaze-ckpt", ev.gaze_ckpt, "Direction predictor checkpoint");
  e->add_option("--baseline", ev.baseline, "Checkpoint-free predictor: zero-velocity | constant-velocity");
  e->add_option("--observed", ev.observed, "Observed frames (baselines)")->capture_default_str();
  e->add_option("--total", ev.total, "Window length (baselines)")->capture_default_str();
  e->add_option("--horizons", ev.horizons, "Reported horizons in ms")->delimiter(',')->capture_default_str();
  e->add_option("--stride", ev.stride, "Evaluation window stride")->capture_default_str();
  e->add_option("--split", ev.split, "Manifest split")->check(CLI::IsMember({"train", "test"}))->capture_default_str();
  e->add_option("--seed", ev.seed, "Seed label for the report")->capture_default_str();
  e->add_option("--variant-label", ev.variant_label, "Variant label for the report");
  e->add_option("--csv", ev.csv, "Write the report as CSV");
  e->add_option("--table", ev.table, "Write the text table");
  e->add_option("--window-errors", ev.window_errors, "Write per-window errors as CSV");

  EvalArgs pr;
  auto* p = app.add_subcommand("predict", "Predict future poses for one window of a sequence");
  add_config_option(p);
  p->add_option("--input", pr.input, "Input sequence file")->required();
  p->add_option("--at", pr.at, "First predicted frame (>= observed frames)")->required();
  p->add_option("--out", pr.out, "Output sequence file of predicted poses")->required();
  p->add_option("--csv", pr.csv, "Plot data: frame, joint, x, y, z (and ground truth when available)");
  p->add_option("--ckpt", pr.ckpt, "Motion checkpoint");
  p->add_option("--gaze-ckpt", pr.gaze_ckpt, "Direction predictor checkpoint");
  p->add_option("--baseline", pr.baseline, "Checkpoint-free predictor: zero-velocity | constant-velocity");
  p->add_option("--observed", pr.observed, "Observed frames (baselines)")->capture_default_str();
  p->add_option("--total", pr.total, "Window length (baselines)")->capture_default_str();

  GradcheckArgs gc;
  auto* c = app.add_subcommand("gradcheck", "Check analytic gradients against finite differences");
  add_config_option(c);
  c->add_option("--scale", gc.scale, "Network size (tiny)")->capture_default_str();
  c->add_option("--tolerance", gc.tolerance, "Maximum relative error")->capture_default_str();
  c->add_option("--eps", gc.eps, "Finite-difference step")->capture_default_str();
  c->add_option("--seed", gc.seed, "Seed for parameters and inputs")->capture_default_str();
  c->add_option("--corrupt-op", gc.corrupt, "Scale an op's backward rule by 1.5 (negative control)")
      ->check(CLI::IsMember(recorded_op_names()))
      ->group("");

  ReportArgs rp;
  rp.motion.epochs = 100;
  rp.motion.decay = 0.95;
  auto* r = app.add_subcommand("report", "Run the ablation matrix and emit comparison tables");
  add_config_option(r);
  r->add_option("--manifest", rp.manifest, "Dataset manifest")->required();
  r->add_option("--variants", rp.variants, "Variants (default: all)")->delimiter(',');
  r->add_option("--seeds", rp.seeds, "Seeds")->delimiter(',')->capture_default_str();
  r->add_option("--ckpt-dir", rp.ckpt_dir, "Checkpoint directory (read, and written when training)");
  r->add_flag("--no-train", rp.no_train, "Fail instead of training when a checkpoint is missing");
  r->add_option("--gaze-epochs", rp.gaze_epochs, "Direction predictor epochs")->capture_default_str();
  r->add_option("--gaze-lr", rp.gaze_lr, "Direction predictor learning rate")->capture_default_str();
  r->add_option("--gaze-decay", rp.gaze_decay, "Direction predictor decay per epoch")->capture_default_str();
  r->add_option("--gaze-stride", rp.gaze_stride, "Direction training pair stride")->capture_default_str();
  r->add_option("--eval-stride", rp.eval_stride, "Evaluation window stride")->capture_default_str();
  r->add_option("--horizons", rp.horizons, "Reported horizons in ms")->delimiter(',')->capture_default_str();
  r->add_option("--csv", rp.csv, "Write all reports as CSV");
  r->add_option("--table", rp.table, "Write the comparison table");
  r->add_option("--window-errors", rp.window_errors, "Write per-window errors as CSV");
  add_train_options(r, rp.motion);
  add_model_options(r, rp.motion);

  try {
    const auto merged = merge_config(app, args);
    std::vector<const char*> argv;
    for (const auto& a : merged) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& pe) {
      const int code = app.exit(pe, out, err);
      return code == 0 ? kOk : kUsage;
    }
    CLI::App* sub = app.get_subcommands().front();
    echo_config(*sub, err);
    if (sub == s) cmd_synth(synth, out);
    if (sub == im) cmd_import(imp, out);
    if (sub == g) cmd_train_gaze(tg, out);
    if (sub == m) cmd_train_motion(tm, out);
    if (sub == e) cmd_eval(ev, out);
    if (sub == p) cmd_predict(pr, out);
    if (sub == c) cmd_gradcheck(gc, out);
    if (sub == r) cmd_report(rp, out, err);
    return kOk;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return exit_code(ex);
  }
}

}  // namespace gazemotion::cli
