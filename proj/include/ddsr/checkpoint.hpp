#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "ddsr/model.hpp"
#include "ddsr/tensor.hpp"

namespace ddsr {

// Checkpoint container: magic "DDSR", version u32, parameter count u32,
// then per parameter: name length u32, UTF-8 name, rank u32, extents
// (u32 each), raw 32-bit little-endian values in row-major order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError(std::string("checkpoint: truncated while reading ") + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  write_u32(os, u);
}

inline float read_f32(std::istream& is, const char* what) {
  const std::uint32_t u = read_u32(is, what);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

}  // namespace detail

template <typename Scalar>
void save_checkpoint(DDSRNetParams<Scalar>& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("checkpoint: cannot open for writing: " + path.string());
  os.write("DDSR", 4);
  detail::write_u32(os, kCheckpointVersion);
  auto all = params.all();
  detail::write_u32(os, static_cast<std::uint32_t>(all.size()));
  for (const Parameter<Scalar>* p : all) {
    detail::write_u32(os, static_cast<std::uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    detail::write_u32(os, 4);
    for (Index d : p->value.shape()) detail::write_u32(os, static_cast<std::uint32_t>(d));
    for (Index i = 0; i < p->value.size(); ++i) {
      detail::write_f32(os, static_cast<float>(p->value[i]));
    }
  }
  if (!os) throw IoError("checkpoint: write failed: " + path.string());
}

struct CheckpointEntry {
  std::string name;
  Tensor<float> value;
};

inline std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "DDSR") {
    throw IoError("checkpoint: bad magic in " + path.string());
  }
  const std::uint32_t version = detail::read_u32(is, "version");
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = detail::read_u32(is, "parameter count");
  if (count > 1u << 20) throw IoError("checkpoint: implausible parameter count");
  std::vector<CheckpointEntry> entries;
  entries.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t name_len = detail::read_u32(is, "name length");
    if (name_len > 4096) throw IoError("checkpoint: implausible name length");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw IoError("checkpoint: truncated while reading name");
    const std::uint32_t rank = detail::read_u32(is, "rank");
    if (rank != 4) throw IoError("checkpoint: unsupported rank " + std::to_string(rank));
    Shape4 shape;
    for (int d = 0; d < 4; ++d) {
      shape[d] = static_cast<Index>(detail::read_u32(is, "extent"));
      if (shape[d] > 1 << 24) throw IoError("checkpoint: implausible extent");
    }
    Tensor<float> t(shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = detail::read_f32(is, "values");
    entries.push_back({std::move(name), std::move(t)});
  }
  return entries;
}

namespace detail {

inline const Tensor<float>& find_entry(const std::vector<CheckpointEntry>& entries,
                                       const std::string& name) {
  for (const auto& e : entries) {
    if (e.name == name) return e.value;
  }
  throw IoError("checkpoint: missing tensor '" + name + "'");
}

inline bool has_entry(const std::vector<CheckpointEntry>& entries, const std::string& name) {
  for (const auto& e : entries) {
    if (e.name == name) return true;
  }
  return false;
}

}  // namespace detail

// Rebuilds parameters from a checkpoint. The architecture (channel widths,
// which components exist, branch sharing) is recovered from the stored
// names and shapes; `scale` is not stored and comes from the dataset side.
inline DDSRNetParams<float> load_checkpoint(const std::filesystem::path& path, Index scale) {
  auto entries = read_checkpoint(path);
  ModelConfig cfg;
  cfg.scale = scale;
  cfg.use_spatial_net = detail::has_entry(entries, "spatial.conv1.weight");
  cfg.use_wavelet_net = detail::has_entry(entries, "low.conv_a.weight");
  cfg.share_high_branch = !detail::has_entry(entries, "high_lh.conv_a.weight");

  const std::string probe = cfg.use_spatial_net ? "spatial.conv1.weight" : "low.conv_a.weight";
  if (!cfg.use_spatial_net && !cfg.use_wavelet_net) {
    throw IoError("checkpoint: no recognizable model tensors in " + path.string());
  }
  const Tensor<float>& first = detail::find_entry(entries, probe);
  cfg.channels = first.channels();
  cfg.hidden = first.batch();

  DDSRNetParams<float> params = init_params<float>(cfg, 0);
  for (Parameter<float>* p : params.all()) {
    const Tensor<float>& stored = detail::find_entry(entries, p->name);
    if (!stored.same_shape(p->value)) {
      throw ShapeError("checkpoint: tensor '" + p->name + "' has shape " +
                       shape_str(stored.shape()) + ", expected " + shape_str(p->value.shape()));
    }
    p->value = stored;
    p->grad = Tensor<float>(stored.shape());
  }
  return params;
}

// Validates loaded parameters against an expected configuration, naming the
// first offending tensor.
inline void validate_params(DDSRNetParams<float>& loaded, const ModelConfig& expected) {
  DDSRNetParams<float> want = init_params<float>(expected, 0);
  auto lhs = loaded.all();
  auto rhs = want.all();
  if (lhs.size() != rhs.size()) {
    throw ShapeError("checkpoint: parameter count " + std::to_string(lhs.size()) +
                     " does not match expected " + std::to_string(rhs.size()));
  }
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    if (lhs[i]->name != rhs[i]->name || !lhs[i]->value.same_shape(rhs[i]->value)) {
      throw ShapeError("checkpoint: tensor '" + lhs[i]->name + "' has shape " +
                       shape_str(lhs[i]->value.shape()) + ", expected '" + rhs[i]->name + "' " +
                       shape_str(rhs[i]->value.shape()));
    }
  }
}

}  // namespace ddsr
