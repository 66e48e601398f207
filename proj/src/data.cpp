#include "ddsr/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "ddsr/manifest.hpp"
#include "ddsr/rng.hpp"

namespace ddsr {

namespace {

constexpr char kMagic[4] = {'H', 'S', 'R', '1'};
constexpr std::uint32_t kCubeVersion = 1;
constexpr Index kMaxExtent = 1 << 24;

void write_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError(std::string("HSR1: truncated while reading ") + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

HyperCube load_cube(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("HSR1: cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("HSR1: bad magic in " + path.string());
  }
  const std::uint32_t version = read_u32(is, "version");
  if (version != kCubeVersion) {
    throw IoError("HSR1: unsupported version " + std::to_string(version));
  }
  const Index c = static_cast<Index>(read_u32(is, "band count"));
  const Index h = static_cast<Index>(read_u32(is, "height"));
  const Index w = static_cast<Index>(read_u32(is, "width"));
  const Index orig = static_cast<Index>(read_u32(is, "original band count"));
  if (c <= 0 || h <= 0 || w <= 0 || c > kMaxExtent || h > kMaxExtent || w > kMaxExtent) {
    throw IoError("HSR1: implausible dimensions in " + path.string());
  }
  if (orig <= 0 || orig > c) {
    throw IoError("HSR1: invalid original band count in " + path.string());
  }
  HyperCube cube(c, h, w, path.stem().string());
  cube.original_bands = orig;
  is.read(reinterpret_cast<char*>(cube.values.data()),
          static_cast<std::streamsize>(cube.values.size() * sizeof(float)));
  if (!is || is.gcount() != static_cast<std::streamsize>(cube.values.size() * sizeof(float))) {
    throw IoError("HSR1: header claims more data than file contains: " + path.string());
  }
  return cube;
}

void save_cube(const HyperCube& cube, const std::filesystem::path& path) {
  if (cube.bands <= 0 || cube.height <= 0 || cube.width <= 0) {
    throw ShapeError("save_cube: empty cube");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("HSR1: cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  write_u32(os, kCubeVersion);
  write_u32(os, static_cast<std::uint32_t>(cube.bands));
  write_u32(os, static_cast<std::uint32_t>(cube.height));
  write_u32(os, static_cast<std::uint32_t>(cube.width));
  write_u32(os, static_cast<std::uint32_t>(cube.original_bands));
  os.write(reinterpret_cast<const char*>(cube.values.data()),
           static_cast<std::streamsize>(cube.values.size() * sizeof(float)));
  if (!os) throw IoError("HSR1: write failed: " + path.string());
}

NormalizeInfo normalize(HyperCube& cube) {
  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  for (float v : cube.values) {
    if (!std::isfinite(v)) throw ShapeError("normalize: non-finite value in cube");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) throw ShapeError("normalize: constant cube (max == min)");
  const NormalizeInfo info{lo, hi};
  apply_normalize(cube, info);
  return info;
}

void apply_normalize(HyperCube& cube, NormalizeInfo info) {
  const float s = 1.0f / (info.hi - info.lo);
  for (float& v : cube.values) v = (v - info.lo) * s;
}

void invert_normalize(HyperCube& cube, NormalizeInfo info) {
  const float s = info.hi - info.lo;
  for (float& v : cube.values) v = v * s + info.lo;
}

void pad_bands(HyperCube& cube, Index target) {
  if (target < cube.bands) {
    throw ShapeError("pad_bands: target " + std::to_string(target) + " below band count " +
                     std::to_string(cube.bands));
  }
  if (target - cube.bands >= 35) {
    throw ShapeError("pad_bands: would duplicate " + std::to_string(target - cube.bands) +
                     " bands; padding must stay below one group");
  }
  const Index plane = cube.height * cube.width;
  const Index orig = cube.original_bands;
  const std::vector<float> last(cube.values.end() - plane, cube.values.end());
  cube.values.reserve(static_cast<std::size_t>(target * plane));
  for (Index b = cube.bands; b < target; ++b) {
    cube.values.insert(cube.values.end(), last.begin(), last.end());
  }
  cube.bands = target;
  cube.original_bands = orig;
}

std::vector<HyperCube> group_bands(const HyperCube& cube, Index group) {
  if (group < 1) throw ShapeError("group_bands: group size must be >= 1");
  if (cube.bands % group != 0) {
    const Index pad = ((cube.bands + group - 1) / group) * group;
    throw ShapeError("group_bands: " + std::to_string(cube.bands) +
                     " bands not divisible by group " + std::to_string(group) + "; pad to " +
                     std::to_string(pad) + " first");
  }
  const Index n = cube.bands / group;
  const Index plane = cube.height * cube.width;
  std::vector<HyperCube> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index g = 0; g < n; ++g) {
    HyperCube part(group, cube.height, cube.width, cube.name);
    std::copy(cube.values.begin() + g * group * plane,
              cube.values.begin() + (g + 1) * group * plane, part.values.begin());
    out.push_back(std::move(part));
  }
  return out;
}

HyperCube ungroup_bands(const std::vector<HyperCube>& groups, Index original_bands) {
  if (groups.empty()) throw ShapeError("ungroup_bands: no groups");
  const Index g = groups[0].bands, h = groups[0].height, w = groups[0].width;
  for (const HyperCube& part : groups) {
    if (part.bands != g || part.height != h || part.width != w) {
      throw ShapeError("ungroup_bands: inconsistent group shapes");
    }
  }
  const Index total = g * static_cast<Index>(groups.size());
  if (original_bands < 1 || original_bands > total) {
    throw ShapeError("ungroup_bands: original band count " + std::to_string(original_bands) +
                     " outside [1, " + std::to_string(total) + "]");
  }
  HyperCube out(original_bands, h, w, groups[0].name);
  const Index plane = h * w;
  for (Index b = 0; b < original_bands; ++b) {
    const auto& src = groups[static_cast<std::size_t>(b / g)];
    std::copy(src.values.begin() + (b % g) * plane, src.values.begin() + (b % g + 1) * plane,
              out.values.begin() + b * plane);
  }
  return out;
}

HyperCube center_crop(const HyperCube& cube, Index size) {
  if (size < 1 || size > cube.height || size > cube.width) {
    throw ShapeError("center_crop: size " + std::to_string(size) + " does not fit in " +
                     std::to_string(cube.height) + "x" + std::to_string(cube.width));
  }
  return crop_patch(cube, {(cube.height - size) / 2, (cube.width - size) / 2}, size);
}

HyperCube crop_patch(const HyperCube& cube, PatchOrigin origin, Index size) {
  if (origin.row < 0 || origin.col < 0 || origin.row + size > cube.height ||
      origin.col + size > cube.width) {
    throw ShapeError("crop_patch: window outside cube");
  }
  HyperCube out(cube.bands, size, size, cube.name);
  out.original_bands = cube.original_bands;
  for (Index c = 0; c < cube.bands; ++c) {
    for (Index i = 0; i < size; ++i) {
      const float* src = &cube.values[static_cast<std::size_t>(
          (c * cube.height + origin.row + i) * cube.width + origin.col)];
      std::copy(src, src + size, &out.at(c, i, 0));
    }
  }
  return out;
}

std::vector<PatchOrigin> extract_patches(Index height, Index width, Index patch, Index stride) {
  if (patch < 1 || stride < 1) throw ShapeError("extract_patches: patch and stride must be >= 1");
  std::vector<PatchOrigin> out;
  for (Index i = 0; i + patch <= height; i += stride) {
    for (Index j = 0; j + patch <= width; j += stride) {
      out.push_back({i, j});
    }
  }
  return out;
}

namespace {

// Catmull-Rom kernel, a = -0.5
double cubic_weight(double u) {
  const double a = std::abs(u);
  if (a <= 1.0) return 1.5 * a * a * a - 2.5 * a * a + 1.0;
  if (a < 2.0) return -0.5 * a * a * a + 2.5 * a * a - 4.0 * a + 2.0;
  return 0.0;
}

struct CubicTap {
  Index idx[4];
  double w[4];
};

std::vector<CubicTap> cubic_taps(Index in_dim, Index out_dim) {
  const double ratio = static_cast<double>(in_dim) / static_cast<double>(out_dim);
  std::vector<CubicTap> taps(static_cast<std::size_t>(out_dim));
  for (Index d = 0; d < out_dim; ++d) {
    const double src = (static_cast<double>(d) + 0.5) * ratio - 0.5;
    const Index base = static_cast<Index>(std::floor(src)) - 1;
    CubicTap& t = taps[static_cast<std::size_t>(d)];
    for (int k = 0; k < 4; ++k) {
      t.idx[k] = std::clamp<Index>(base + k, 0, in_dim - 1);
      t.w[k] = cubic_weight(src - static_cast<double>(base + k));
    }
  }
  return taps;
}

}  // namespace

HyperCube resample_bicubic(const HyperCube& cube, Index out_h, Index out_w) {
  if (out_h < 1 || out_w < 1) throw ShapeError("resample_bicubic: empty output");
  const auto rows = cubic_taps(cube.height, out_h);
  const auto cols = cubic_taps(cube.width, out_w);
  HyperCube out(cube.bands, out_h, out_w, cube.name);
  out.original_bands = cube.original_bands;
  // separable: rows first into a scratch buffer, then columns
  std::vector<double> scratch(static_cast<std::size_t>(out_h * cube.width));
  for (Index c = 0; c < cube.bands; ++c) {
    for (Index i = 0; i < out_h; ++i) {
      const CubicTap& rt = rows[static_cast<std::size_t>(i)];
      for (Index j = 0; j < cube.width; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += rt.w[k] * cube.at(c, rt.idx[k], j);
        scratch[static_cast<std::size_t>(i * cube.width + j)] = acc;
      }
    }
    for (Index i = 0; i < out_h; ++i) {
      for (Index j = 0; j < out_w; ++j) {
        const CubicTap& ct = cols[static_cast<std::size_t>(j)];
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) {
          acc += ct.w[k] * scratch[static_cast<std::size_t>(i * cube.width + ct.idx[k])];
        }
        out.at(c, i, j) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

HyperCube degrade(const HyperCube& hr, Index scale) {
  if (scale < 1) throw ShapeError("degrade: scale must be >= 1");
  if (hr.height % scale != 0 || hr.width % scale != 0) {
    throw ShapeError("degrade: spatial dims " + std::to_string(hr.height) + "x" +
                     std::to_string(hr.width) + " not divisible by scale " +
                     std::to_string(scale));
  }
  if (scale == 1) return hr;
  return resample_bicubic(hr, hr.height / scale, hr.width / scale);
}

void DatasetSpec::validate() const {
  if (patch < 1 || stride < 1) throw ShapeError("DatasetSpec: patch and stride must be >= 1");
  if (scale != 1 && scale != 2 && scale != 4 && scale != 8) {
    throw ShapeError("DatasetSpec: scale must be one of {1,2,4,8}");
  }
  if (patch % (2 * scale) != 0) {
    throw ShapeError("DatasetSpec: patch " + std::to_string(patch) +
                     " must be divisible by 2*scale so wavelet dims stay even");
  }
  if (group < 1) throw ShapeError("DatasetSpec: group must be >= 1");
  if (!(val_fraction > 0.0) || val_fraction >= 1.0) {
    throw ShapeError("DatasetSpec: val_fraction must be in (0, 1)");
  }
}

namespace {

bool windows_overlap(PatchOrigin a, PatchOrigin b, Index size) {
  return a.row < b.row + size && b.row < a.row + size && a.col < b.col + size &&
         b.col < a.col + size;
}

}  // namespace

SplitPlan make_splits(Index height, Index width, const DatasetSpec& spec) {
  spec.validate();
  const auto candidates = extract_patches(height, width, spec.patch, spec.stride);

  SplitPlan plan;
  if (spec.test_origin.row < 0 || spec.test_origin.col < 0 ||
      spec.test_origin.row + spec.patch > height || spec.test_origin.col + spec.patch > width) {
    throw ShapeError("make_splits: test origin (" + std::to_string(spec.test_origin.row) + "," +
                     std::to_string(spec.test_origin.col) + ") outside cube");
  }
  plan.test.push_back(spec.test_origin);

  std::vector<PatchOrigin> remaining;
  for (const PatchOrigin& o : candidates) {
    if (o == spec.test_origin) continue;
    if (windows_overlap(o, spec.test_origin, spec.patch)) {
      ++plan.dropped_overlap;
      continue;
    }
    remaining.push_back(o);
  }
  if (remaining.empty()) throw ShapeError("make_splits: no train/val patches left");

  Rng rng(spec.seed);
  rng.shuffle(remaining);
  const Index val_n = std::max<Index>(
      1, static_cast<Index>(std::ceil(spec.val_fraction * static_cast<double>(remaining.size()))));
  if (val_n >= static_cast<Index>(remaining.size())) {
    throw ShapeError("make_splits: validation split would consume every training patch");
  }
  plan.val.assign(remaining.begin(), remaining.begin() + val_n);
  plan.train.assign(remaining.begin() + val_n, remaining.end());
  return plan;
}

PreparedDataset prepare_dataset(const HyperCube& raw, const DatasetSpec& spec) {
  spec.validate();
  PreparedDataset out;
  out.spec = spec;

  HyperCube cube = spec.crop > 0 ? center_crop(raw, spec.crop) : raw;
  out.norm = normalize(cube);
  out.source_bands = cube.bands;

  Index pad_to = spec.pad_to;
  if (pad_to == 0) pad_to = ((cube.bands + spec.group - 1) / spec.group) * spec.group;
  if (pad_to % spec.group != 0) {
    throw ShapeError("prepare_dataset: pad target " + std::to_string(pad_to) +
                     " not divisible by group " + std::to_string(spec.group));
  }
  pad_bands(cube, pad_to);

  const SplitPlan plan = make_splits(cube.height, cube.width, spec);
  auto materialize = [&](const std::vector<PatchOrigin>& origins, std::vector<PatchPair>& dst) {
    dst.reserve(origins.size());
    for (const PatchOrigin& o : origins) {
      PatchPair pair;
      pair.origin = o;
      pair.hr = crop_patch(cube, o, spec.patch);
      pair.lr = degrade(pair.hr, spec.scale);
      dst.push_back(std::move(pair));
    }
  };
  materialize(plan.train, out.train);
  materialize(plan.val, out.val);
  materialize(plan.test, out.test);
  out.spec.pad_to = pad_to;
  return out;
}

namespace {

void write_split(const std::vector<PatchPair>& patches, const std::filesystem::path& dir,
                 const std::string& split, std::string& audit, Index patch_size) {
  std::filesystem::create_directories(dir / split);
  char line[128];
  for (std::size_t i = 0; i < patches.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%04zu", i);
    save_cube(patches[i].hr, dir / split / ("hr_" + std::string(stem) + ".hsr1"));
    save_cube(patches[i].lr, dir / split / ("lr_" + std::string(stem) + ".hsr1"));
    std::snprintf(line, sizeof(line), "%s %04zu origin=%lld,%lld size=%lld\n", split.c_str(), i,
                  static_cast<long long>(patches[i].origin.row),
                  static_cast<long long>(patches[i].origin.col),
                  static_cast<long long>(patch_size));
    audit += line;
  }
}

}  // namespace

void write_prepared(const PreparedDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  KeyValues manifest;
  manifest.set("name", data.spec.name);
  manifest.set_int("patch", data.spec.patch);
  manifest.set_int("stride", data.spec.stride);
  manifest.set_int("scale", data.spec.scale);
  manifest.set_int("group", data.spec.group);
  manifest.set_int("pad_to", data.spec.pad_to);
  manifest.set_int("crop", data.spec.crop);
  manifest.set_int("test_origin_row", data.spec.test_origin.row);
  manifest.set_int("test_origin_col", data.spec.test_origin.col);
  manifest.set_double("val_fraction", data.spec.val_fraction);
  manifest.set_uint("seed", data.spec.seed);
  manifest.set_int("source_bands", data.source_bands);
  manifest.set_double("norm_lo", data.norm.lo);
  manifest.set_double("norm_hi", data.norm.hi);
  manifest.write_file(dir / "manifest.txt");

  std::string audit;
  write_split(data.test, dir, "test", audit, data.spec.patch);
  write_split(data.val, dir, "val", audit, data.spec.patch);
  write_split(data.train, dir, "train", audit, data.spec.patch);

  // overlap audit: every train/val window must be disjoint from the test window
  Index overlaps = 0;
  for (const auto* split : {&data.train, &data.val}) {
    for (const PatchPair& p : *split) {
      if (windows_overlap(p.origin, data.test[0].origin, data.spec.patch)) ++overlaps;
    }
  }
  char tail[160];
  std::snprintf(tail, sizeof(tail),
                "counts train=%zu val=%zu test=%zu\noverlap_check=%s overlapping=%lld\n",
                data.train.size(), data.val.size(), data.test.size(),
                overlaps == 0 ? "ok" : "FAILED", static_cast<long long>(overlaps));
  audit += tail;
  std::ofstream os(dir / "split_audit.txt", std::ios::binary);
  if (!os) throw IoError("cannot write split audit");
  os << audit;
}

namespace {

std::vector<PatchPair> load_split(const std::filesystem::path& dir, const std::string& split) {
  std::vector<PatchPair> out;
  for (std::size_t i = 0;; ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%04zu", i);
    const auto hr_path = dir / split / ("hr_" + std::string(stem) + ".hsr1");
    if (!std::filesystem::exists(hr_path)) break;
    PatchPair pair;
    pair.hr = load_cube(hr_path);
    pair.lr = load_cube(dir / split / ("lr_" + std::string(stem) + ".hsr1"));
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace

PreparedDataset load_prepared(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.txt";
  if (!std::filesystem::exists(manifest_path)) {
    throw IoError("load_prepared: no manifest at " + manifest_path.string());
  }
  const KeyValues manifest = KeyValues::parse_file(manifest_path);
  PreparedDataset out;
  out.spec.name = manifest.get("name", "dataset");
  out.spec.patch = manifest.get_int("patch", 144);
  out.spec.stride = manifest.get_int("stride", out.spec.patch);
  out.spec.scale = manifest.get_int("scale", 4);
  out.spec.group = manifest.get_int("group", 35);
  out.spec.pad_to = manifest.get_int("pad_to", 0);
  out.spec.crop = manifest.get_int("crop", 0);
  out.spec.test_origin = {manifest.get_int("test_origin_row", 0),
                          manifest.get_int("test_origin_col", 0)};
  out.spec.val_fraction = manifest.get_double("val_fraction", 0.1);
  out.spec.seed = manifest.get_uint("seed", 0);
  out.source_bands = manifest.get_int("source_bands", 0);
  out.norm.lo = static_cast<float>(manifest.get_double("norm_lo", 0.0));
  out.norm.hi = static_cast<float>(manifest.get_double("norm_hi", 1.0));
  out.train = load_split(dir, "train");
  out.val = load_split(dir, "val");
  out.test = load_split(dir, "test");
  if (out.test.empty()) throw IoError("load_prepared: no test patch in " + dir.string());
  return out;
}

Tensor<float> cube_to_tensor(const HyperCube& cube) {
  Tensor<float> t(1, cube.bands, cube.height, cube.width);
  std::copy(cube.values.begin(), cube.values.end(), t.data());
  return t;
}

HyperCube tensor_to_cube(const Tensor<float>& t, Index batch_index) {
  if (batch_index < 0 || batch_index >= t.batch()) {
    throw ShapeError("tensor_to_cube: batch index out of range");
  }
  HyperCube cube(t.channels(), t.height(), t.width());
  const float* src = t.data() + batch_index * t.channels() * t.height() * t.width();
  std::copy(src, src + cube.size(), cube.values.begin());
  return cube;
}

}  // namespace ddsr
