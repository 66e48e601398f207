#pragma once

#include <string>

#include "ddsr/data.hpp"
#include "ddsr/tensor.hpp"

namespace ddsr {

struct MetricReport {
  double mpsnr = 0.0;
  double mssim = 0.0;
  double sam = 0.0;
  double rmse = 0.0;
  double cc = 0.0;
  Index sam_skipped = 0;  // degenerate (near-zero norm) pixels excluded from SAM
};

// Per-band PSNR averaged over bands; a zero-MSE band contributes the 100 dB
// cap, and every band is capped there.
double mpsnr(const HyperCube& pred, const HyperCube& ref, double data_range = 1.0);

// Per-band SSIM with an 11x11 Gaussian window (sigma 1.5), valid-mode
// filtering, C1=(0.01 R)^2, C2=(0.03 R)^2, averaged over bands.
double mssim(const HyperCube& pred, const HyperCube& ref, double data_range = 1.0);

// Mean per-pixel spectral angle in degrees; *skipped (if non-null) receives
// the count of pixels excluded because either spectrum norm < 1e-8.
double sam(const HyperCube& pred, const HyperCube& ref, Index* skipped = nullptr);

double rmse(const HyperCube& pred, const HyperCube& ref);

// Mean over bands of the Pearson correlation; constant bands are skipped.
double cc(const HyperCube& pred, const HyperCube& ref);

MetricReport compute_metrics(const HyperCube& pred, const HyperCube& ref,
                             double data_range = 1.0);

// Human-readable key: value block.
std::string metrics_block(const MetricReport& r);
// Machine-readable: "METRICS mpsnr=<v> mssim=<v> sam=<v> rmse=<v> cc=<v>"
std::string metrics_line(const MetricReport& r, const std::string& tag = "METRICS");

}  // namespace ddsr
