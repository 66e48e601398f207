#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ddsr/tensor.hpp"

namespace ddsr {

// One hyperspectral scene: bands x height x width, band-major then
// row-major. original_bands tracks the count before last-band padding.
struct HyperCube {
  Index bands = 0;
  Index height = 0;
  Index width = 0;
  Index original_bands = 0;
  std::string name;
  std::vector<float> values;

  HyperCube() = default;
  HyperCube(Index c, Index h, Index w, std::string n = "")
      : bands(c), height(h), width(w), original_bands(c), name(std::move(n)),
        values(static_cast<std::size_t>(c * h * w), 0.0f) {}

  float& at(Index c, Index i, Index j) {
    return values[static_cast<std::size_t>((c * height + i) * width + j)];
  }
  float at(Index c, Index i, Index j) const {
    return values[static_cast<std::size_t>((c * height + i) * width + j)];
  }
  Index size() const { return static_cast<Index>(values.size()); }
};

// Affine record of global min-max scaling: x' = (x - lo) / (hi - lo).
struct NormalizeInfo {
  float lo = 0.0f;
  float hi = 1.0f;
};

struct PatchOrigin {
  Index row = 0;
  Index col = 0;
  bool operator==(const PatchOrigin&) const = default;
};

// HSR1 container I/O (magic "HSR1", version, C, H, W, original band count,
// then f32 little-endian values).
HyperCube load_cube(const std::filesystem::path& path);
void save_cube(const HyperCube& cube, const std::filesystem::path& path);

NormalizeInfo normalize(HyperCube& cube);
void apply_normalize(HyperCube& cube, NormalizeInfo info);
void invert_normalize(HyperCube& cube, NormalizeInfo info);

void pad_bands(HyperCube& cube, Index target);
std::vector<HyperCube> group_bands(const HyperCube& cube, Index group = 35);
HyperCube ungroup_bands(const std::vector<HyperCube>& groups, Index original_bands);

HyperCube center_crop(const HyperCube& cube, Index size);
HyperCube crop_patch(const HyperCube& cube, PatchOrigin origin, Index size);

std::vector<PatchOrigin> extract_patches(Index height, Index width, Index patch, Index stride);

// Catmull-Rom (a = -0.5) separable resampling with half-pixel centers and
// edge clamping; used for degradation and for the bicubic baseline.
HyperCube resample_bicubic(const HyperCube& cube, Index out_h, Index out_w);
HyperCube degrade(const HyperCube& hr, Index scale);

struct DatasetSpec {
  Index patch = 144;
  Index stride = 144;  // = patch for non-overlapping extraction
  Index scale = 4;
  Index group = 35;
  Index pad_to = 0;  // 0: next multiple of group
  Index crop = 0;    // 0: no center crop
  PatchOrigin test_origin{0, 0};
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  std::string name = "dataset";

  void validate() const;
};

struct SplitPlan {
  std::vector<PatchOrigin> train;
  std::vector<PatchOrigin> val;
  std::vector<PatchOrigin> test;
  Index dropped_overlap = 0;
};

// Test patch from the configured selector; remaining origins shuffled by
// seed, validation takes ceil(fraction * n) of them (at least one). Any
// candidate whose window overlaps the test window is dropped.
SplitPlan make_splits(Index height, Index width, const DatasetSpec& spec);

struct PatchPair {
  HyperCube hr;
  HyperCube lr;
  PatchOrigin origin;
};

struct PreparedDataset {
  DatasetSpec spec;
  NormalizeInfo norm;
  Index source_bands = 0;  // pre-pad band count
  std::vector<PatchPair> train;
  std::vector<PatchPair> val;
  std::vector<PatchPair> test;
};

PreparedDataset prepare_dataset(const HyperCube& raw, const DatasetSpec& spec);
void write_prepared(const PreparedDataset& data, const std::filesystem::path& dir);
PreparedDataset load_prepared(const std::filesystem::path& dir);

// (1, C, H, W) view of a whole cube, and back.
Tensor<float> cube_to_tensor(const HyperCube& cube);
HyperCube tensor_to_cube(const Tensor<float>& t, Index batch_index = 0);

}  // namespace ddsr
