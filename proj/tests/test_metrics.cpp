#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ddsr/metrics.hpp"

#include "support/oracles.hpp"
#include "support/synth.hpp"

using namespace ddsr;

namespace {

HyperCube noisy(const HyperCube& base, double amplitude, std::uint64_t seed) {
  synth::Rng rng(seed);
  HyperCube out = base;
  for (float& v : out.values) v += static_cast<float>(rng.uniform(-amplitude, amplitude));
  return out;
}

HyperCube permute_bands(const HyperCube& cube, const std::vector<Index>& perm) {
  HyperCube out(cube.bands, cube.height, cube.width, cube.name);
  for (Index c = 0; c < cube.bands; ++c)
    for (Index i = 0; i < cube.height; ++i)
      for (Index j = 0; j < cube.width; ++j)
        out.at(c, i, j) = cube.at(perm[static_cast<std::size_t>(c)], i, j);
  return out;
}

}  // namespace

TEST_CASE("mpsnr: identical inputs hit the 100 dB cap") {
  auto cube = synth::make_cube(3, 16, 16, 1);
  CHECK_EQ(mpsnr(cube, cube), 100.0);
}

TEST_CASE("mpsnr: closed-form uniform-error cases") {
  HyperCube ref(1, 16, 16);
  HyperCube pred = ref;
  for (float& v : pred.values) v += 0.1f;  // MSE = 0.01
  CHECK_EQ(mpsnr(pred, ref), doctest::Approx(20.0).epsilon(1e-5));

  HyperCube ref2(2, 16, 16);
  HyperCube pred2 = ref2;
  for (Index i = 0; i < 16; ++i)
    for (Index j = 0; j < 16; ++j) {
      pred2.at(0, i, j) += 0.1f;   // 20 dB band
      pred2.at(1, i, j) += 0.01f;  // 40 dB band
    }
  CHECK_EQ(mpsnr(pred2, ref2), doctest::Approx(30.0).epsilon(1e-4));
}

TEST_CASE("mssim: perfect match is 1, anti-correlated structure goes negative") {
  auto cube = synth::make_cube(2, 16, 16, 2);
  CHECK_EQ(mssim(cube, cube), doctest::Approx(1.0).epsilon(1e-12));

  // binary checkerboard vs its inverse
  HyperCube ref(1, 16, 16);
  for (Index i = 0; i < 16; ++i)
    for (Index j = 0; j < 16; ++j) ref.at(0, i, j) = float((i + j) % 2);
  HyperCube inv = ref;
  for (float& v : inv.values) v = 1.0f - v;
  const double got = mssim(inv, ref);
  CHECK_LT(got, 0.0);
  CHECK_EQ(got, doctest::Approx(oracle::mssim_reference(inv, ref)).epsilon(1e-9));

  HyperCube tiny(1, 8, 8);
  CHECK_THROWS_AS(mssim(tiny, tiny), ShapeError);
}

TEST_CASE("mssim: constant prediction scores well below 1 and matches the oracle") {
  auto ref = synth::make_cube(2, 16, 16, 3);
  HyperCube flat = ref;
  flat.values.assign(flat.values.size(), 0.5f);
  const double got = mssim(flat, ref);
  CHECK_LT(got, 0.8);
  CHECK_EQ(got, doctest::Approx(oracle::mssim_reference(flat, ref)).epsilon(1e-9));
}

TEST_CASE("sam: zero angle on equal and scaled inputs, 90 degrees when orthogonal") {
  auto cube = synth::make_cube(3, 8, 8, 4);
  CHECK_LT(sam(cube, cube), 1e-5);  // zero up to float->double acos rounding

  HyperCube doubled = cube;
  for (float& v : doubled.values) v *= 2.0f;
  CHECK_EQ(sam(doubled, cube), doctest::Approx(0.0).epsilon(1e-6));

  HyperCube a(2, 1, 1), b(2, 1, 1);
  a.at(0, 0, 0) = 1.0f;  // (1, 0)
  b.at(1, 0, 0) = 1.0f;  // (0, 1)
  CHECK_EQ(sam(a, b), doctest::Approx(90.0).epsilon(1e-12));
}

TEST_CASE("sam: degenerate pixels are skipped and counted, all-degenerate rejected") {
  HyperCube ref(2, 1, 2);
  ref.at(0, 0, 0) = 1.0f;
  ref.at(1, 0, 0) = 1.0f;  // pixel 1 is all-zero in both -> skipped
  HyperCube pred = ref;
  Index skipped = 0;
  CHECK_EQ(sam(pred, ref, &skipped), doctest::Approx(0.0));
  CHECK_EQ(skipped, 1);

  HyperCube zeros(2, 1, 1);
  CHECK_THROWS_AS(sam(zeros, zeros), ShapeError);
}

TEST_CASE("rmse: zero on equality, closed form for uniform error") {
  auto cube = synth::make_cube(2, 8, 8, 5);
  CHECK_EQ(rmse(cube, cube), 0.0);
  HyperCube shifted = cube;
  for (float& v : shifted.values) v += 0.1f;
  CHECK_EQ(rmse(shifted, cube), doctest::Approx(0.1).epsilon(1e-5));
}

TEST_CASE("cc: 1 on identity, -1 on per-band anti-correlation, constants handled") {
  auto cube = synth::make_cube(3, 8, 8, 6);
  CHECK_EQ(cc(cube, cube), doctest::Approx(1.0).epsilon(1e-12));

  HyperCube anti = cube;
  for (float& v : anti.values) v = 2.0f - v;
  CHECK_EQ(cc(anti, cube), doctest::Approx(-1.0).epsilon(1e-12));

  HyperCube with_const = cube;
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j) with_const.at(0, i, j) = 0.5f;  // band 0 constant
  const double partial = cc(with_const, cube);
  CHECK(std::isfinite(partial));

  HyperCube flat(2, 4, 4);
  flat.values.assign(flat.values.size(), 0.25f);
  CHECK_THROWS_AS(cc(flat, flat), ShapeError);
}

TEST_CASE("every metric matches its brute-force oracle on random pairs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto ref = synth::make_cube(3, 16, 16, 1000 + seed);
    auto pred = noisy(ref, 0.05, 2000 + seed);
    CHECK_EQ(mpsnr(pred, ref), doctest::Approx(oracle::mpsnr_reference(pred, ref)).epsilon(1e-9));
    CHECK_EQ(mssim(pred, ref), doctest::Approx(oracle::mssim_reference(pred, ref)).epsilon(1e-9));
    CHECK_EQ(sam(pred, ref), doctest::Approx(oracle::sam_reference(pred, ref)).epsilon(1e-9));
    CHECK_EQ(rmse(pred, ref), doctest::Approx(oracle::rmse_reference(pred, ref)).epsilon(1e-9));
    CHECK_EQ(cc(pred, ref), doctest::Approx(oracle::cc_reference(pred, ref)).epsilon(1e-9));
  }
}

TEST_CASE("metrics are invariant to identical band permutations") {
  auto ref = synth::make_cube(4, 16, 16, 7);
  auto pred = noisy(ref, 0.03, 8);
  const std::vector<Index> perm = {2, 0, 3, 1};
  auto report = compute_metrics(pred, ref);
  auto permuted = compute_metrics(permute_bands(pred, perm), permute_bands(ref, perm));
  CHECK_EQ(report.mpsnr, doctest::Approx(permuted.mpsnr).epsilon(1e-12));
  CHECK_EQ(report.mssim, doctest::Approx(permuted.mssim).epsilon(1e-12));
  CHECK_EQ(report.sam, doctest::Approx(permuted.sam).epsilon(1e-12));
  CHECK_EQ(report.rmse, doctest::Approx(permuted.rmse).epsilon(1e-12));
  CHECK_EQ(report.cc, doctest::Approx(permuted.cc).epsilon(1e-12));
}

TEST_CASE("mpsnr decreases monotonically with noise amplitude") {
  auto ref = synth::make_cube(3, 16, 16, 9);
  const double a = mpsnr(noisy(ref, 0.01, 10), ref);
  const double b = mpsnr(noisy(ref, 0.05, 10), ref);
  const double c = mpsnr(noisy(ref, 0.25, 10), ref);
  CHECK_GT(a, b);
  CHECK_GT(b, c);
}

TEST_CASE("report serialization carries the machine-readable line") {
  auto ref = synth::make_cube(2, 16, 16, 11);
  auto report = compute_metrics(noisy(ref, 0.02, 12), ref);
  const std::string line = metrics_line(report);
  CHECK(line.starts_with("METRICS mpsnr="));
  CHECK(line.find(" mssim=") != std::string::npos);
  CHECK(line.find(" cc=") != std::string::npos);
  const std::string block = metrics_block(report);
  CHECK(block.find("sam: ") != std::string::npos);
  CHECK_EQ(metrics_line(report, "METRICS_BICUBIC").substr(0, 15), "METRICS_BICUBIC");
  CHECK_THROWS_AS(compute_metrics(ref, synth::make_cube(3, 16, 16, 13)), ShapeError);
}
