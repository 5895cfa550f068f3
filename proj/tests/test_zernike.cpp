#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "wavemo/errors.hpp"
#include "wavemo/zernike.hpp"

using namespace wavemo;

TEST(Zernike, NollIndexMatchesTable) {
  for (int j = 1; j <= 28; ++j) {
    EXPECT_EQ(noll_to_nm(j), oracle::noll(j)) << "j=" << j;
  }
}

TEST(Zernike, ValuesMatchFactorialFormula) {
  std::mt19937 g(3);
  std::uniform_real_distribution<double> rho(0.0, 1.0), th(-std::numbers::pi, std::numbers::pi);
  for (int j = 1; j <= 28; ++j) {
    for (int t = 0; t < 20; ++t) {
      const double r = rho(g), a = th(g);
      EXPECT_NEAR(zernike_value(j, r, a), oracle::zernike(j, r, a), 1e-12) << "j=" << j;
    }
  }
  EXPECT_EQ(zernike_value(4, 1.2, 0.0), 0.0);
}

TEST(Zernike, PistonIsOneInsideDisk) {
  const GridSpec grid{64, 1.0};
  const ZernikeBasis basis(grid, 1);
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 64; ++c) {
      EXPECT_EQ(basis.mode(0)(r, c), inside_disk(grid, r, c) ? 1.0 : 0.0);
    }
  }
}

TEST(Zernike, DefocusAtCentreIsMinusRootThree) {
  const ZernikeBasis basis(GridSpec{64, 0.5}, 4);
  EXPECT_NEAR(basis.mode(3)(32, 32), -std::sqrt(3.0), 1e-15);
}

TEST(Zernike, ModesVanishOutsideDisk) {
  const GridSpec grid{32, 0.5};
  const ZernikeBasis basis(grid, 28);
  for (int j = 0; j < 28; ++j) {
    for (int r = 0; r < 32; ++r) {
      for (int c = 0; c < 32; ++c) {
        if (!inside_disk(grid, r, c)) ASSERT_EQ(basis.mode(j)(r, c), 0.0);
      }
    }
  }
}

TEST(Zernike, NearOrthonormalOnFineGrid) {
  const GridSpec grid{256, 0.5};
  const ZernikeBasis basis(grid, 28);
  std::vector<double> norms(28);
  double pixels = 0.0;
  for (int r = 0; r < 256; ++r) {
    for (int c = 0; c < 256; ++c) pixels += inside_disk(grid, r, c);
  }
  for (int i = 0; i < 28; ++i) {
    double s = 0.0;
    for (double v : basis.mode(i).values()) s += v * v;
    norms[i] = s;
    if (i >= 1) EXPECT_NEAR(std::sqrt(s / pixels), 1.0, 2e-2) << "RMS of mode " << i + 1;
  }
  double worst = 0.0;
  for (int i = 1; i < 28; ++i) {
    for (int j = 1; j < 28; ++j) {
      if (i == j) continue;
      double s = 0.0;
      const auto a = basis.mode(i).values();
      const auto b = basis.mode(j).values();
      for (std::size_t p = 0; p < a.size(); ++p) s += a[p] * b[p];
      worst = std::max(worst, std::abs(s / norms[i]));
    }
  }
  EXPECT_LT(worst, 2e-2);
}

TEST(Zernike, ComposeMatchesDirectSummation) {
  const GridSpec grid{32, 0.5};
  const ZernikeBasis basis(grid, 28);
  const auto coeffs = oracle::random_vector(28, 11, -2.0, 2.0);
  const auto phase = basis.compose(coeffs);
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 32; ++c) {
      const auto d = disk_coord(grid, r, c);
      double expect = 0.0;
      if (d.rho < 1.0) {
        for (int j = 1; j <= 28; ++j) expect += coeffs[j - 1] * oracle::zernike(j, d.rho, d.theta);
      }
      EXPECT_NEAR(phase(r, c), expect, 1e-12);
    }
  }
}

TEST(Zernike, ComposeZeroAndScaledUnitVector) {
  const ZernikeBasis basis(GridSpec{32, 0.5}, 28);
  std::vector<double> c(28, 0.0);
  for (double v : basis.compose(c).values()) EXPECT_EQ(v, 0.0);
  c[3] = 2.5;
  const auto p = basis.compose(c);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_DOUBLE_EQ(p[i], 2.5 * basis.mode(3)[i]);
}

TEST(Zernike, ComposeIsLinear) {
  const ZernikeBasis basis(GridSpec{32, 0.5}, 28);
  const auto c1 = oracle::random_vector(28, 1, -1, 1);
  const auto c2 = oracle::random_vector(28, 2, -1, 1);
  const double a = 0.7, b = -1.3;
  std::vector<double> mix(28);
  for (int j = 0; j < 28; ++j) mix[j] = a * c1[j] + b * c2[j];
  const auto lhs = basis.compose(mix);
  const auto p1 = basis.compose(c1);
  const auto p2 = basis.compose(c2);
  for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], a * p1[i] + b * p2[i], 1e-13);
}

TEST(Zernike, AdjointIsTransposeOfCompose) {
  const ZernikeBasis basis(GridSpec{16, 0.5}, 28);
  const auto c = oracle::random_vector(28, 5, -1, 1);
  const auto f = oracle::random_vector(256, 6, -1, 1);
  const auto p = basis.compose(c);
  const auto adj = basis.adjoint(f);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) lhs += p[i] * f[i];
  for (int j = 0; j < 28; ++j) rhs += c[j] * adj[j];
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(Zernike, ComposeRejectsWrongLength) {
  const ZernikeBasis basis(GridSpec{16, 0.5}, 28);
  std::vector<double> c(27, 0.0);
  EXPECT_THROW((void)basis.compose(c), std::invalid_argument);
}

TEST(Zernike, InvalidGridIsConfigError) {
  EXPECT_THROW(ZernikeBasis(GridSpec{4, 0.5}, 28), ConfigError);
  EXPECT_THROW(ZernikeBasis(GridSpec{48, 0.5}, 28), ConfigError);
}

TEST(Aberration, DeterministicWithZeroPiston) {
  const ZernikeBasis basis(GridSpec{16, 0.5}, 28);
  Rng a(42), b(42);
  const auto s1 = sample_aberration(a, basis);
  const auto s2 = sample_aberration(b, basis);
  EXPECT_EQ(s1.coeffs, s2.coeffs);
  EXPECT_EQ(s1.sigmas, s2.sigmas);
  EXPECT_EQ(s1.coeffs[0], 0.0);
  ASSERT_EQ(s1.coeffs.size(), 28u);
  for (int j = 1; j < 28; ++j) {
    EXPECT_GE(s1.sigmas[j], 5.0);
    EXPECT_LE(s1.sigmas[j], 6.0);
  }
}

TEST(Aberration, PooledVarianceMatchesUniformMixture) {
  const ZernikeBasis basis(GridSpec{8, 0.5}, 28);
  Rng rng(7);
  const int draws = 100000 / 27 + 1;
  double sum2 = 0.0;
  long count = 0;
  for (int d = 0; d < draws; ++d) {
    const auto s = sample_aberration(rng, basis, 5.0, 6.0);
    for (int j = 1; j < 28; ++j) {
      sum2 += s.coeffs[j] * s.coeffs[j];
      ++count;
    }
  }
  const double expected = (216.0 - 125.0) / 3.0;
  EXPECT_NEAR(sum2 / count / expected, 1.0, 0.02);
}

TEST(Aberration, RejectsInvalidBounds) {
  const ZernikeBasis basis(GridSpec{8, 0.5}, 28);
  Rng rng(1);
  EXPECT_THROW(sample_aberration(rng, basis, -1.0, 6.0), std::invalid_argument);
  EXPECT_THROW(sample_aberration(rng, basis, 6.0, 5.0), std::invalid_argument);
}
