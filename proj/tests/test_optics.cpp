#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "wavemo/errors.hpp"
#include "wavemo/fft.hpp"
#include "wavemo/optics.hpp"
#include "wavemo/zernike.hpp"

using namespace wavemo;

namespace {

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

PhaseMap random_phase(const GridSpec& grid, unsigned seed, double scale = 1.0) {
  const ZernikeBasis basis(grid, 28);
  auto c = oracle::random_vector(28, seed, -scale, scale);
  c[0] = 0.0;
  return basis.compose(c);
}

}  // namespace

TEST(Fft, ForwardMatchesBruteForce) {
  for (int n : {8, 16}) {
    auto re = oracle::random_vector(n * n, 1, -1, 1);
    auto im = oracle::random_vector(n * n, 2, -1, 1);
    std::vector<Complex> a(n * n);
    for (int i = 0; i < n * n; ++i) a[i] = {re[i], im[i]};
    const auto expect = oracle::dft2(a, n);
    fft::forward(a, n);
    double worst = 0.0, scale = 0.0;
    for (int i = 0; i < n * n; ++i) {
      worst = std::max(worst, std::abs(a[i] - expect[i]));
      scale = std::max(scale, std::abs(expect[i]));
    }
    EXPECT_LT(worst / scale, 1e-12) << "n=" << n;
  }
}

TEST(Fft, InverseCarriesOneOverNSquared) {
  const int n = 16;
  std::vector<Complex> a(n * n, 0.0);
  a[0] = 1.0;
  fft::inverse(a, n);
  for (const auto& v : a) EXPECT_NEAR(v.real(), 1.0 / (n * n), 1e-15);
}

TEST(Fft, ParsevalWithUnnormalizedForward) {
  const int n = 32;
  const auto re = oracle::random_vector(n * n, 3, -1, 1);
  const auto im = oracle::random_vector(n * n, 4, -1, 1);
  std::vector<Complex> a(n * n);
  double energy = 0.0;
  for (int i = 0; i < n * n; ++i) {
    a[i] = {re[i], im[i]};
    energy += std::norm(a[i]);
  }
  fft::forward(a, n);
  double spec = 0.0;
  for (const auto& v : a) spec += std::norm(v);
  EXPECT_NEAR(spec / (n * n * energy), 1.0, 1e-12);
}

TEST(Fft, RoundTrip) {
  const int n = 32;
  const auto x = oracle::random_vector(n * n, 5);
  const auto back = fft::inverse_real(fft::forward_real(x, n), n);
  EXPECT_LT(oracle::max_abs_diff(x, back), 1e-14);
}

TEST(Pupil, Geometry) {
  const auto m = pupil_mask(GridSpec{64, 0.5});
  EXPECT_EQ(m(32, 32), 1.0);
  EXPECT_EQ(m(0, 0), 0.0);
  const auto big = pupil_mask(GridSpec{256, 0.5});
  double count = 0.0;
  for (double v : big.values()) {
    EXPECT_TRUE(v == 0.0 || v == 1.0);
    count += v;
  }
  EXPECT_NEAR(count / (std::numbers::pi * 64 * 64), 1.0, 0.015);
}

TEST(Pupil, SymmetricUnderHalfTurnAboutCentre) {
  const int n = 64;
  const auto m = pupil_mask(GridSpec{n, 0.5});
  // Rotation by 180 degrees about pixel (n/2, n/2); row 0 / col 0 map outside.
  for (int r = 1; r < n; ++r) {
    for (int c = 1; c < n; ++c) EXPECT_EQ(m(r, c), m(n - r, n - c));
  }
}

TEST(Psf, MatchesBruteForceDft) {
  for (int n : {8, 16}) {
    const GridSpec grid{n, 0.5};
    const auto mask = pupil_mask(grid);
    const auto phase = random_phase(grid, 9);
    const auto expect = oracle::psf_centered(vec(mask.values()), vec(phase.values()), n);
    const auto got = psf(mask, phase);
    EXPECT_LT(oracle::max_abs_diff(vec(got.values()), expect), 1e-10) << "n=" << n;
  }
}

TEST(Psf, FullApertureFlatPhaseIsCentredDelta) {
  const GridSpec grid{16, 1.0};
  PupilMask ones(grid, 1.0);
  const auto h = psf(ones, PhaseMap(grid));
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) EXPECT_NEAR(h(r, c), (r == 8 && c == 8) ? 1.0 : 0.0, 1e-15);
  }
}

TEST(Psf, NonnegativeUnitSumAndPistonInvariant) {
  const GridSpec grid{32, 0.5};
  const auto mask = pupil_mask(grid);
  for (unsigned s = 0; s < 5; ++s) {
    const auto phase = random_phase(grid, s, 3.0);
    const auto h = psf(mask, phase);
    double sum = 0.0;
    for (double v : h.values()) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    PhaseMap shifted = phase;
    for (auto& v : shifted.values()) v += 1.234;
    EXPECT_LT(oracle::max_abs_diff(vec(psf(mask, shifted).values()), vec(h.values())), 1e-15);
  }
}

TEST(Psf, GridMismatchThrows) {
  EXPECT_THROW(psf(pupil_mask(GridSpec{16, 0.5}), PhaseMap(GridSpec{32, 0.5})), std::invalid_argument);
}

TEST(OtfMtf, MatchesBruteForceAndDcIsOne) {
  const int n = 8;
  const GridSpec grid{n, 0.5};
  const auto h = psf(pupil_mask(grid), random_phase(grid, 4));
  const auto [otf, mtf] = otf_mtf(h);
  std::vector<double> origin(n * n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) origin[r * n + c] = h((r + n / 2) % n, (c + n / 2) % n);
  }
  const auto expect = oracle::dft2(oracle::to_complex(origin), n);
  for (int i = 0; i < n * n; ++i) {
    EXPECT_LT(std::abs(otf[i] - expect[i]), 1e-10);
    EXPECT_NEAR(mtf[i], std::abs(expect[i]), 1e-10);
    EXPECT_LE(mtf[i], 1.0 + 1e-12);
  }
  EXPECT_NEAR(mtf[0], 1.0, 1e-14);
}

TEST(OtfMtf, UnnormalizedPsfIsContractError) {
  Psf h(GridSpec{8, 0.5}, 0.0);
  h(4, 4) = 1.5;
  EXPECT_THROW(otf_mtf(h), ContractError);
}

TEST(OtfMtf, InverseTransformRecoversPsf) {
  const int n = 32;
  const GridSpec grid{n, 0.5};
  const auto h = psf(pupil_mask(grid), random_phase(grid, 8, 2.0));
  auto otf = otf_mtf(h).first;
  std::vector<Complex> data(otf.values().begin(), otf.values().end());
  fft::inverse(data, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      EXPECT_NEAR(data[((r + n / 2) % n) * n + (c + n / 2) % n].real(), h(r, c), 1e-12);
    }
  }
}

TEST(Convolve, MatchesDirectWrapAroundSum) {
  for (int n : {8, 16}) {
    const GridSpec grid{n, 0.5};
    const auto x = oracle::random_vector(n * n, 21);
    const auto h = psf(pupil_mask(grid), random_phase(grid, 22));
    const auto expect = oracle::convolve_centered(x, vec(h.values()), n);
    const auto got = convolve(Image(grid, x), h);
    EXPECT_LT(oracle::max_abs_diff(vec(got.values()), expect) / oracle::max_abs(expect), 1e-10);
  }
}

TEST(Convolve, DeltaIdentityAndConstantPreserved) {
  const int n = 16;
  const GridSpec grid{n, 0.5};
  const auto x = oracle::random_vector(n * n, 23);
  Psf delta(grid, 0.0);
  delta(n / 2, n / 2) = 1.0;
  EXPECT_LT(oracle::max_abs_diff(vec(convolve(Image(grid, x), delta).values()), x), 1e-12);
  const auto h = psf(pupil_mask(grid), random_phase(grid, 24));
  for (double v : convolve(Image(grid, 0.37), h).values()) EXPECT_NEAR(v, 0.37, 1e-12);
}

TEST(Convolve, Linear) {
  const int n = 16;
  const GridSpec grid{n, 0.5};
  const Image a(grid, oracle::random_vector(n * n, 25));
  const Image b(grid, oracle::random_vector(n * n, 26));
  const auto h = psf(pupil_mask(grid), random_phase(grid, 27));
  const auto lhs = convolve(2.0 * a + (-3.0) * b, h);
  const auto ca = convolve(a, h);
  const auto cb = convolve(b, h);
  for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], 2.0 * ca[i] - 3.0 * cb[i], 1e-12);
}

TEST(Noise, ZeroSigmaIsIdentityAndSeedDeterministic) {
  const GridSpec grid{16, 0.5};
  const Image x(grid, oracle::random_vector(256, 30));
  Rng r0(1);
  EXPECT_EQ(vec(add_noise(x, 0.0, r0).values()), vec(x.values()));
  Rng r1(5), r2(5);
  EXPECT_EQ(vec(add_noise(x, 0.1, r1).values()), vec(add_noise(x, 0.1, r2).values()));
  EXPECT_THROW(add_noise(x, -0.1, r1), std::invalid_argument);
}

TEST(Noise, EmpiricalStdMatches) {
  const GridSpec grid{16, 0.5};
  const Image zero(grid);
  Rng rng(77);
  double s2 = 0.0;
  long count = 0;
  while (count < 100000) {
    for (double v : add_noise(zero, 0.05, rng).values()) {
      s2 += v * v;
      ++count;
    }
  }
  EXPECT_NEAR(std::sqrt(s2 / count) / 0.05, 1.0, 0.02);
}

TEST(Correlate, MatchesDefinition) {
  const int n = 8;
  const auto a = oracle::random_vector(n * n, 40);
  const auto b = oracle::random_vector(n * n, 41);
  const auto got = correlate(a, b, n);
  for (int dr = 0; dr < n; ++dr) {
    for (int dc = 0; dc < n; ++dc) {
      double acc = 0.0;
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) acc += a[r * n + c] * b[((r - dr + n) % n) * n + (c - dc + n) % n];
      }
      EXPECT_NEAR(got[dr * n + dc], acc, 1e-12);
    }
  }
}
