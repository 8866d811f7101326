#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gazemotion/binary_io.hpp"
#include "gazemotion/error.hpp"
#include "gazemotion/tensor.hpp"

namespace gazemotion {

/// One recorded trial. Joint positions are meters; directions are unit vectors.
struct MotionSequence {
  std::size_t n_joints = 0;
  float frame_rate = 30.0f;
  std::vector<float> joints;  // [frames][n_joints][3]
  std::vector<float> gaze;    // [frames][3], empty when absent
  std::vector<float> head;    // [frames][3], empty when absent

  std::size_t frames() const { return n_joints ? joints.size() / (3 * n_joints) : 0; }
  bool has_gaze() const { return !gaze.empty(); }
  bool has_head() const { return !head.empty(); }

  bool operator==(const MotionSequence&) const = default;
};

inline constexpr std::string_view kSequenceMagic = "GZMO";
inline constexpr std::uint32_t kSequenceVersion = 1;
inline constexpr std::uint32_t kFlagGaze = 1u << 0;
inline constexpr std::uint32_t kFlagHead = 1u << 1;
inline constexpr double kUnitTolerance = 1e-5;

namespace detail {
inline bool unit_row(const float* v) {
  const double n = std::sqrt(static_cast<double>(v[0]) * v[0] + static_cast<double>(v[1]) * v[1] +
                             static_cast<double>(v[2]) * v[2]);
  return std::abs(n - 1.0) <= kUnitTolerance;
}
}  // namespace detail

/// Throws ArgumentError describing the first violated invariant.
inline void validate_sequence(const MotionSequence& s) {
  if (s.n_joints == 0) throw ArgumentError("sequence has no joints");
  if (!(s.frame_rate > 0.0f)) throw ArgumentError("frame rate must be positive");
  if (s.joints.size() % (3 * s.n_joints) != 0 || s.frames() == 0) throw ArgumentError("sequence has no complete frame");
  const std::size_t F = s.frames();
  for (const auto* stream : {&s.gaze, &s.head}) {
    if (stream->empty()) continue;
    const char* name = stream == &s.gaze ? "gaze" : "head";
    if (stream->size() != 3 * F) throw ArgumentError(std::string(name) + " stream length does not match frame count");
    for (std::size_t f = 0; f < F; ++f) {
      if (!detail::unit_row(stream->data() + 3 * f)) {
        throw ArgumentError(std::string(name) + " direction at frame " + std::to_string(f) + " is not unit length");
      }
    }
  }
}

// GZMO sequence file:
//   "GZMO" | version u32 | n_joints u32 | n_frames u32 | frame_rate f32 | flags u32 |
//   per frame f32: 3*n_joints joint coords, then gaze xyz (if flagged), then head xyz (if flagged).
inline std::string encode_sequence(const MotionSequence& s) {
  validate_sequence(s);
  binary::Writer w;
  w.bytes(kSequenceMagic);
  w.u32(kSequenceVersion);
  w.u32(static_cast<std::uint32_t>(s.n_joints));
  w.u32(static_cast<std::uint32_t>(s.frames()));
  w.f32(s.frame_rate);
  w.u32((s.has_gaze() ? kFlagGaze : 0u) | (s.has_head() ? kFlagHead : 0u));
  const std::size_t per = 3 * s.n_joints;
  for (std::size_t f = 0; f < s.frames(); ++f) {
    for (std::size_t i = 0; i < per; ++i) w.f32(s.joints[f * per + i]);
    if (s.has_gaze())
      for (int c = 0; c < 3; ++c) w.f32(s.gaze[3 * f + c]);
    if (s.has_head())
      for (int c = 0; c < 3; ++c) w.f32(s.head[3 * f + c]);
  }
  return w.take();
}

inline MotionSequence decode_sequence(std::string_view bytes) {
  binary::Reader r(bytes);
  if (r.bytes(4, "magic") != kSequenceMagic) throw FormatError("bad magic, expected GZMO", 0);
  const std::size_t version_at = r.offset();
  const auto version = r.u32("version");
  if (version != kSequenceVersion) throw FormatError("unsupported GZMO version " + std::to_string(version), version_at);
  MotionSequence s;
  const std::size_t joints_at = r.offset();
  s.n_joints = r.u32("joint count");
  if (s.n_joints == 0) throw FormatError("joint count is zero", joints_at);
  const std::size_t frames_at = r.offset();
  const std::size_t frames = r.u32("frame count");
  if (frames == 0) throw FormatError("frame count is zero", frames_at);
  const std::size_t rate_at = r.offset();
  s.frame_rate = r.f32("frame rate");
  if (!(s.frame_rate > 0.0f) || !std::isfinite(s.frame_rate)) throw FormatError("invalid frame rate", rate_at);
  const std::size_t flags_at = r.offset();
  const auto flags = r.u32("flags");
  if ((flags & ~(kFlagGaze | kFlagHead)) != 0) throw FormatError("unknown flag bits", flags_at);
  const bool gaze = flags & kFlagGaze, head = flags & kFlagHead;
  const std::size_t per = 3 * s.n_joints;
  const std::size_t floats_per_frame = per + (gaze ? 3 : 0) + (head ? 3 : 0);
  if (r.remaining() / 4 / floats_per_frame < frames) throw FormatError("truncated frame data", r.offset());
  s.joints.resize(frames * per);
  if (gaze) s.gaze.resize(3 * frames);
  if (head) s.head.resize(3 * frames);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = 0; i < per; ++i) s.joints[f * per + i] = r.f32("joint data");
    if (gaze) {
      const std::size_t at = r.offset();
      for (int c = 0; c < 3; ++c) s.gaze[3 * f + c] = r.f32("gaze data");
      if (!detail::unit_row(&s.gaze[3 * f])) {
        throw ValidationError("gaze direction at frame " + std::to_string(f) + " is not unit length", at);
      }
    }
    if (head) {
      const std::size_t at = r.offset();
      for (int c = 0; c < 3; ++c) s.head[3 * f + c] = r.f32("head data");
      if (!detail::unit_row(&s.head[3 * f])) {
        throw ValidationError("head direction at frame " + std::to_string(f) + " is not unit length", at);
      }
    }
  }
  r.expect_end();
  return s;
}

inline void write_sequence(const std::filesystem::path& path, const MotionSequence& s) {
  binary::write_file(path, encode_sequence(s));
}

inline MotionSequence read_sequence(const std::filesystem::path& path) {
  return decode_sequence(binary::read_file(path));
}

// ---------------------------------------------------------------------------
// CSV import

/// Parses "name:index" pairs separated by commas or whitespace. Names are
/// joint<k>.x|y|z, gaze.x|y|z and head.x|y|z; indices are 0-based CSV columns.
inline std::map<std::string, std::size_t> parse_column_map(std::string_view spec) {
  std::map<std::string, std::size_t> out;
  std::string token;
  auto flush = [&]() {
    if (token.empty()) return;
    const auto colon = token.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == token.size()) {
      throw ArgumentError("column map entry '" + token + "' is not name:index");
    }
    std::size_t idx = 0;
    const auto* b = token.data() + colon + 1;
    const auto* e = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(b, e, idx);
    if (ec != std::errc() || ptr != e) throw ArgumentError("column map entry '" + token + "' has a bad index");
    out[token.substr(0, colon)] = idx;
    token.clear();
  };
  for (char c : spec) {
    if (c == ',' || c == ';' || std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      token.push_back(c);
    }
  }
  flush();
  return out;
}

/// Reads a numeric CSV (an optional non-numeric header row is skipped), keeps
/// every `decimate`-th frame starting at the first, and renormalizes directions.
inline MotionSequence import_csv(const std::filesystem::path& path, const std::map<std::string, std::size_t>& columns,
                                 double source_rate, std::size_t decimate) {
  if (decimate == 0) throw ArgumentError("decimation factor must be at least 1");
  if (!(source_rate > 0.0)) throw ArgumentError("source frame rate must be positive");
  std::size_t n = 0;
  for (const auto& [name, idx] : columns) {
    if (name.rfind("joint", 0) == 0) {
      const auto dot = name.find('.');
      if (dot == std::string::npos) throw ImportError("bad column name '" + name + "'");
      n = std::max<std::size_t>(n, std::stoul(name.substr(5, dot - 5)) + 1);
    }
  }
  if (n == 0) throw ImportError("column map names no joint columns (expected joint0.x ...)");
  auto require = [&](const std::string& name) {
    auto it = columns.find(name);
    if (it == columns.end()) throw ImportError("missing column '" + name + "'");
    return it->second;
  };
  static constexpr const char* kAxes[] = {"x", "y", "z"};
  std::vector<std::size_t> joint_cols;
  for (std::size_t j = 0; j < n; ++j)
    for (const char* a : kAxes) joint_cols.push_back(require("joint" + std::to_string(j) + "." + a));
  auto optional_stream = [&](const std::string& prefix) {
    std::vector<std::size_t> cols;
    const bool any = columns.count(prefix + ".x") || columns.count(prefix + ".y") || columns.count(prefix + ".z");
    if (!any) return cols;
    for (const char* a : kAxes) cols.push_back(require(prefix + "." + a));
    return cols;
  };
  const auto gaze_cols = optional_stream("gaze");
  const auto head_cols = optional_stream("head");

  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  MotionSequence s;
  s.n_joints = n;
  s.frame_rate = static_cast<float>(source_rate / static_cast<double>(decimate));
  std::string line;
  std::size_t row = 0, line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    auto number = [&](std::size_t col, bool& ok) {
      ok = false;
      if (col >= cells.size()) return 0.0f;
      try {
        std::size_t used = 0;
        const float v = std::stof(cells[col], &used);
        ok = true;
        return v;
      } catch (const std::exception&) {
        return 0.0f;
      }
    };
    bool ok = true;
    if (first) {
      first = false;
      number(joint_cols.front(), ok);
      if (!ok) continue;  // header row
    }
    const bool keep = row % decimate == 0;
    ++row;
    if (!keep) continue;
    for (auto col : joint_cols) {
      const float v = number(col, ok);
      if (!ok) throw ImportError("line " + std::to_string(line_no) + ": column " + std::to_string(col) + " missing or not numeric");
      s.joints.push_back(v);
    }
    for (auto* target : {&gaze_cols, &head_cols}) {
      if (target->empty()) continue;
      float v[3];
      for (int c = 0; c < 3; ++c) {
        v[c] = number((*target)[c], ok);
        if (!ok) throw ImportError("line " + std::to_string(line_no) + ": column " + std::to_string((*target)[c]) + " missing or not numeric");
      }
      const double norm = std::sqrt(double(v[0]) * v[0] + double(v[1]) * v[1] + double(v[2]) * v[2]);
      if (norm < 1e-12) throw ImportError("line " + std::to_string(line_no) + ": zero-length direction");
      auto& dst = target == &gaze_cols ? s.gaze : s.head;
      for (int c = 0; c < 3; ++c) dst.push_back(static_cast<float>(v[c] / norm));
    }
  }
  if (s.joints.empty()) throw ImportError("'" + path.string() + "' contains no data rows");
  validate_sequence(s);
  return s;
}

// ---------------------------------------------------------------------------
// Windows

/// t observed frames and T - t target frames from one sequence.
struct Window {
  std::size_t sequence = 0;  // index into the source list
  std::size_t start = 0;     // first frame
  std::size_t n_joints = 0;
  std::size_t observed = 0;  // t
  std::size_t total = 0;     // T
  std::vector<float> past_poses;    // [t][n][3]
  std::vector<float> past_gaze;     // [t][3] (empty when absent)
  std::vector<float> past_head;     // [t][3]
  std::vector<float> future_poses;  // [T - t][n][3]
};

/// Windows starting at 0, `stride` apart, while start + T <= length.
/// A sequence shorter than T yields no windows.
inline std::vector<Window> windows(const MotionSequence& seq, std::size_t t, std::size_t T, std::size_t stride,
                                   std::size_t sequence_id = 0) {
  if (t == 0 || t >= T) throw ArgumentError("windows: need 1 <= t < T");
  if (stride == 0) throw ArgumentError("windows: stride must be positive");
  std::vector<Window> out;
  const std::size_t F = seq.frames(), per = 3 * seq.n_joints;
  for (std::size_t s = 0; s + T <= F; s += stride) {
    Window w;
    w.sequence = sequence_id;
    w.start = s;
    w.n_joints = seq.n_joints;
    w.observed = t;
    w.total = T;
    w.past_poses.assign(seq.joints.begin() + static_cast<std::ptrdiff_t>(s * per),
                        seq.joints.begin() + static_cast<std::ptrdiff_t>((s + t) * per));
    w.future_poses.assign(seq.joints.begin() + static_cast<std::ptrdiff_t>((s + t) * per),
                          seq.joints.begin() + static_cast<std::ptrdiff_t>((s + T) * per));
    if (seq.has_gaze())
      w.past_gaze.assign(seq.gaze.begin() + static_cast<std::ptrdiff_t>(3 * s),
                         seq.gaze.begin() + static_cast<std::ptrdiff_t>(3 * (s + t)));
    if (seq.has_head())
      w.past_head.assign(seq.head.begin() + static_cast<std::ptrdiff_t>(3 * s),
                         seq.head.begin() + static_cast<std::ptrdiff_t>(3 * (s + t)));
    out.push_back(std::move(w));
  }
  return out;
}

/// Past/future direction pair for gaze-network training: frames [s, s+t) and [s+t, s+2t).
struct DirectionPair {
  std::vector<float> past;    // [t][3]
  std::vector<float> future;  // [t][3]
};

enum class DirectionStream { gaze, head };

inline std::vector<DirectionPair> direction_pairs(const MotionSequence& seq, DirectionStream which, std::size_t t,
                                                  std::size_t stride) {
  if (t == 0 || stride == 0) throw ArgumentError("direction_pairs: t and stride must be positive");
  const auto& stream = which == DirectionStream::gaze ? seq.gaze : seq.head;
  if (stream.empty()) {
    throw ConfigError(std::string("sequence has no ") + (which == DirectionStream::gaze ? "gaze" : "head") +
                      " directions");
  }
  std::vector<DirectionPair> out;
  for (std::size_t s = 0; s + 2 * t <= seq.frames(); s += stride) {
    DirectionPair p;
    p.past.assign(stream.begin() + static_cast<std::ptrdiff_t>(3 * s),
                  stream.begin() + static_cast<std::ptrdiff_t>(3 * (s + t)));
    p.future.assign(stream.begin() + static_cast<std::ptrdiff_t>(3 * (s + t)),
                    stream.begin() + static_cast<std::ptrdiff_t>(3 * (s + 2 * t)));
    out.push_back(std::move(p));
  }
  return out;
}

/// [frames][n][3] -> Tensor [3, n, frames].
template <typename S>
Tensor<S> pose_tensor(const std::vector<float>& frames_major, std::size_t n) {
  const std::size_t F = frames_major.size() / (3 * n);
  Tensor<S> t({3, n, F});
  auto d = t.data();
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t c = 0; c < 3; ++c) d[(c * n + j) * F + f] = static_cast<S>(frames_major[(f * n + j) * 3 + c]);
  return t;
}

/// [frames][3] -> Tensor [3, frames].
template <typename S>
Tensor<S> direction_tensor(const std::vector<float>& frames_major) {
  const std::size_t F = frames_major.size() / 3;
  Tensor<S> t({3, F});
  auto d = t.data();
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t c = 0; c < 3; ++c) d[c * F + f] = static_cast<S>(frames_major[f * 3 + c]);
  return t;
}

/// Tensor [3, n, F] -> [F][n][3].
template <typename S>
std::vector<float> pose_frames(const Tensor<S>& t) {
  const std::size_t n = t.dim(1), F = t.dim(2);
  std::vector<float> out(F * n * 3);
  auto d = t.data();
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t c = 0; c < 3; ++c) out[(f * n + j) * 3 + c] = static_cast<float>(d[(c * n + j) * F + f]);
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestEntry {
  std::string path;   // relative to the manifest directory unless absolute
  std::string split;  // "train" or "test"
};

struct DatasetManifest {
  std::string name = "dataset";
  std::size_t n_joints = 0;
  double frame_rate = 30.0;
  std::vector<ManifestEntry> sequences;
  std::filesystem::path root;  // directory the manifest was read from
};

inline void to_json(nlohmann::json& j, const DatasetManifest& m) {
  j = nlohmann::json{{"name", m.name}, {"n_joints", m.n_joints}, {"frame_rate", m.frame_rate}};
  auto arr = nlohmann::json::array();
  for (const auto& e : m.sequences) arr.push_back({{"path", e.path}, {"split", e.split}});
  j["sequences"] = arr;
}

inline void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  nlohmann::json j = m;
  binary::write_file(path, j.dump(2) + "\n");
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  const auto text = binary::read_file(path);
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.name = j.value("name", path.stem().string());
    m.n_joints = j.at("n_joints").get<std::size_t>();
    m.frame_rate = j.at("frame_rate").get<double>();
    for (const auto& e : j.at("sequences")) {
      ManifestEntry entry{e.at("path").get<std::string>(), e.at("split").get<std::string>()};
      if (entry.split != "train" && entry.split != "test") {
        throw ConfigError("manifest split must be 'train' or 'test', got '" + entry.split + "'");
      }
      m.sequences.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid manifest JSON: ") + e.what(), 0);
  }
  m.root = path.parent_path();
  return m;
}

/// Loads every sequence of one split, checking joint count and frame rate.
inline std::vector<MotionSequence> load_split(const DatasetManifest& m, const std::string& split) {
  std::vector<MotionSequence> out;
  for (const auto& e : m.sequences) {
    if (e.split != split) continue;
    std::filesystem::path p(e.path);
    if (p.is_relative()) p = m.root / p;
    auto s = read_sequence(p);
    if (s.n_joints != m.n_joints || std::abs(static_cast<double>(s.frame_rate) - m.frame_rate) > 1e-6) {
      throw ConfigError("sequence '" + e.path + "' does not match the manifest joint count / frame rate");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace gazemotion
