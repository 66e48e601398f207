#include "ddsr/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

namespace ddsr {

namespace {

constexpr double kPsnrCapDb = 100.0;
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

void check_pair(const HyperCube& pred, const HyperCube& ref, const char* where) {
  if (pred.bands != ref.bands || pred.height != ref.height || pred.width != ref.width) {
    throw ShapeError(std::string(where) + ": cube shapes differ");
  }
  if (pred.bands < 1 || pred.height < 1 || pred.width < 1) {
    throw ShapeError(std::string(where) + ": empty cubes");
  }
}

double band_mse(const HyperCube& pred, const HyperCube& ref, Index c) {
  double sum = 0.0;
  for (Index i = 0; i < pred.height; ++i) {
    for (Index j = 0; j < pred.width; ++j) {
      const double e = static_cast<double>(pred.at(c, i, j)) - static_cast<double>(ref.at(c, i, j));
      sum += e * e;
    }
  }
  return sum / static_cast<double>(pred.height * pred.width);
}

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double sum = 0.0;
  for (int k = 0; k < kSsimWindow; ++k) {
    const double d = k - (kSsimWindow - 1) / 2.0;
    w[static_cast<std::size_t>(k)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[static_cast<std::size_t>(k)];
  }
  for (double& v : w) v /= sum;
  return w;
}

// separable valid-mode Gaussian filter over one band plane
std::vector<double> filter_valid(const std::vector<double>& img, Index h, Index w,
                                 const std::array<double, kSsimWindow>& win) {
  const Index oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(oh * w));
  for (Index i = 0; i < oh; ++i) {
    for (Index j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) {
        acc += win[static_cast<std::size_t>(k)] * img[static_cast<std::size_t>((i + k) * w + j)];
      }
      rows[static_cast<std::size_t>(i * w + j)] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh * ow));
  for (Index i = 0; i < oh; ++i) {
    for (Index j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) {
        acc += win[static_cast<std::size_t>(k)] * rows[static_cast<std::size_t>(i * w + j + k)];
      }
      out[static_cast<std::size_t>(i * ow + j)] = acc;
    }
  }
  return out;
}

}  // namespace

double mpsnr(const HyperCube& pred, const HyperCube& ref, double data_range) {
  check_pair(pred, ref, "mpsnr");
  double sum = 0.0;
  for (Index c = 0; c < pred.bands; ++c) {
    const double mse = band_mse(pred, ref, c);
    const double psnr =
        mse == 0.0 ? kPsnrCapDb
                   : std::min(kPsnrCapDb, 10.0 * std::log10(data_range * data_range / mse));
    sum += psnr;
  }
  return sum / static_cast<double>(pred.bands);
}

double mssim(const HyperCube& pred, const HyperCube& ref, double data_range) {
  check_pair(pred, ref, "mssim");
  if (pred.height < kSsimWindow || pred.width < kSsimWindow) {
    throw ShapeError("mssim: spatial dims must be >= 11");
  }
  const auto win = gaussian_window();
  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);
  const Index h = pred.height, w = pred.width;
  const std::size_t plane = static_cast<std::size_t>(h * w);

  std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
  double band_sum = 0.0;
  for (Index c = 0; c < pred.bands; ++c) {
    for (Index i = 0; i < h; ++i) {
      for (Index j = 0; j < w; ++j) {
        const std::size_t k = static_cast<std::size_t>(i * w + j);
        x[k] = pred.at(c, i, j);
        y[k] = ref.at(c, i, j);
        xx[k] = x[k] * x[k];
        yy[k] = y[k] * y[k];
        xy[k] = x[k] * y[k];
      }
    }
    const auto mx = filter_valid(x, h, w, win);
    const auto my = filter_valid(y, h, w, win);
    const auto mxx = filter_valid(xx, h, w, win);
    const auto myy = filter_valid(yy, h, w, win);
    const auto mxy = filter_valid(xy, h, w, win);
    double acc = 0.0;
    for (std::size_t k = 0; k < mx.size(); ++k) {
      const double vx = mxx[k] - mx[k] * mx[k];
      const double vy = myy[k] - my[k] * my[k];
      const double cov = mxy[k] - mx[k] * my[k];
      acc += (2.0 * mx[k] * my[k] + c1) * (2.0 * cov + c2) /
             ((mx[k] * mx[k] + my[k] * my[k] + c1) * (vx + vy + c2));
    }
    band_sum += acc / static_cast<double>(mx.size());
  }
  return band_sum / static_cast<double>(pred.bands);
}

double sam(const HyperCube& pred, const HyperCube& ref, Index* skipped) {
  check_pair(pred, ref, "sam");
  constexpr double kNormFloor = 1e-8;
  double sum = 0.0;
  Index counted = 0, skip = 0;
  for (Index i = 0; i < pred.height; ++i) {
    for (Index j = 0; j < pred.width; ++j) {
      double dot = 0.0, np = 0.0, nr = 0.0;
      for (Index c = 0; c < pred.bands; ++c) {
        const double p = pred.at(c, i, j), r = ref.at(c, i, j);
        dot += p * r;
        np += p * p;
        nr += r * r;
      }
      np = std::sqrt(np);
      nr = std::sqrt(nr);
      if (np < kNormFloor || nr < kNormFloor) {
        ++skip;
        continue;
      }
      const double cosv = std::clamp(dot / (np * nr), -1.0, 1.0);
      // divide by pi first: acos(0)/pi is exactly 0.5, so orthogonal
      // spectra come out at exactly 90 degrees
      sum += std::acos(cosv) / std::numbers::pi * 180.0;
      ++counted;
    }
  }
  if (skipped != nullptr) *skipped = skip;
  if (counted == 0) throw ShapeError("sam: every pixel has a degenerate spectrum");
  return sum / static_cast<double>(counted);
}

double rmse(const HyperCube& pred, const HyperCube& ref) {
  check_pair(pred, ref, "rmse");
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.values.size(); ++k) {
    const double e = static_cast<double>(pred.values[k]) - static_cast<double>(ref.values[k]);
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(pred.values.size()));
}

double cc(const HyperCube& pred, const HyperCube& ref) {
  check_pair(pred, ref, "cc");
  const double n = static_cast<double>(pred.height * pred.width);
  double sum = 0.0;
  Index counted = 0;
  for (Index c = 0; c < pred.bands; ++c) {
    double mp = 0.0, mr = 0.0;
    for (Index i = 0; i < pred.height; ++i) {
      for (Index j = 0; j < pred.width; ++j) {
        mp += pred.at(c, i, j);
        mr += ref.at(c, i, j);
      }
    }
    mp /= n;
    mr /= n;
    double cov = 0.0, vp = 0.0, vr = 0.0;
    for (Index i = 0; i < pred.height; ++i) {
      for (Index j = 0; j < pred.width; ++j) {
        const double dp = pred.at(c, i, j) - mp;
        const double dr = ref.at(c, i, j) - mr;
        cov += dp * dr;
        vp += dp * dp;
        vr += dr * dr;
      }
    }
    if (vp == 0.0 || vr == 0.0) continue;  // constant band in either input
    sum += cov / std::sqrt(vp * vr);
    ++counted;
  }
  if (counted == 0) throw ShapeError("cc: all bands constant");
  return sum / static_cast<double>(counted);
}

MetricReport compute_metrics(const HyperCube& pred, const HyperCube& ref, double data_range) {
  MetricReport r;
  r.mpsnr = mpsnr(pred, ref, data_range);
  r.mssim = mssim(pred, ref, data_range);
  r.sam = sam(pred, ref, &r.sam_skipped);
  r.rmse = rmse(pred, ref);
  r.cc = cc(pred, ref);
  return r;
}

std::string metrics_block(const MetricReport& r) {
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "mpsnr: %.6f\nmssim: %.6f\nsam: %.6f\nrmse: %.6f\ncc: %.6f\nsam_skipped: %lld\n",
                r.mpsnr, r.mssim, r.sam, r.rmse, r.cc, static_cast<long long>(r.sam_skipped));
  return buf;
}

std::string metrics_line(const MetricReport& r, const std::string& tag) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s mpsnr=%.6f mssim=%.6f sam=%.6f rmse=%.6f cc=%.6f",
                tag.c_str(), r.mpsnr, r.mssim, r.sam, r.rmse, r.cc);
  return buf;
}

}  // namespace ddsr
