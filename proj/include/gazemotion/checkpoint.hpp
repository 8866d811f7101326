#pragma once

#include <algorithm>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>

#include "gazemotion/binary_io.hpp"
#include "gazemotion/gradcheck.hpp"
#include "gazemotion/tensor.hpp"

namespace gazemotion {

// GZMT tensor container:
//   "GZMT" | version u32 | count u32 | per tensor:
//   name_len u16 | name (UTF-8) | rank u8 | dims u32[rank] | data f32[numel]
// All integers and floats little-endian.

inline constexpr std::string_view kTensorMagic = "GZMT";
inline constexpr std::uint32_t kTensorVersion = 1;

template <typename S>
std::string encode_tensors(const NamedTensors<S>& tensors) {
  binary::Writer w;
  w.bytes(kTensorMagic);
  w.u32(kTensorVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw ArgumentError("tensor name too long: " + name);
    if (t.rank() == 0 || t.rank() > 255) throw ArgumentError("tensor '" + name + "' has unsupported rank");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (S v : t.data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

inline NamedTensors<float> decode_tensors(std::string_view bytes) {
  binary::Reader r(bytes);
  const std::size_t magic_at = r.offset();
  if (r.bytes(4, "magic") != kTensorMagic) throw FormatError("bad magic, expected GZMT", magic_at);
  const std::size_t version_at = r.offset();
  const auto version = r.u32("version");
  if (version != kTensorVersion) throw FormatError("unsupported GZMT version " + std::to_string(version), version_at);
  const auto count = r.u32("tensor count");
  NamedTensors<float> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.u16("name length");
    std::string name(r.bytes(name_len, "name"));
    const std::size_t rank_at = r.offset();
    const auto rank = r.u8("rank");
    if (rank == 0) throw FormatError("tensor '" + name + "' has rank 0", rank_at);
    Shape shape;
    std::size_t numel = 1;
    for (std::uint8_t a = 0; a < rank; ++a) {
      const auto d = r.u32("dimension");
      shape.push_back(d);
      numel *= d;
    }
    if (numel > r.remaining() / 4) throw FormatError("truncated data for tensor '" + name + "'", r.offset());
    std::vector<float> data(numel);
    for (auto& v : data) v = r.f32("tensor data");
    out.emplace_back(std::move(name), Tensor<float>(std::move(shape), std::move(data)));
  }
  r.expect_end();
  return out;
}

template <typename S>
void save_tensors(const std::filesystem::path& path, const NamedTensors<S>& tensors) {
  binary::write_file(path, encode_tensors(tensors));
}

inline NamedTensors<float> load_tensors(const std::filesystem::path& path) {
  return decode_tensors(binary::read_file(path));
}

/// Copies values from `source` into the same-named tensors of `target`.
/// Every target name must be present with an identical shape.
template <typename S>
void assign_tensors(const NamedTensors<S>& target, const NamedTensors<float>& source) {
  for (auto [name, t] : target) {
    auto it = std::find_if(source.begin(), source.end(), [&](const auto& p) { return p.first == name; });
    if (it == source.end()) throw ConfigError("checkpoint is missing tensor '" + name + "'");
    if (it->second.shape() != t.shape()) {
      throw ConfigError("checkpoint tensor '" + name + "' has shape " + shape_str(it->second.shape()) +
                        ", expected " + shape_str(t.shape()));
    }
    auto dst = t.data();
    auto src = it->second.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<S>(src[i]);
  }
}

}  // namespace gazemotion
