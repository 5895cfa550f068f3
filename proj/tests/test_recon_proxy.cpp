#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "wavemo/io.hpp"
#include "wavemo/optics.hpp"
#include "wavemo/recon_proxy.hpp"
#include "wavemo/scene.hpp"

using namespace wavemo;

namespace {

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

ProxyParams random_params(const GridSpec& grid, int k, unsigned seed) {
  auto p = ProxyParams::zeros(grid, k);
  auto flat = oracle::random_vector(p.parameter_count(), seed, -1.0, 1.0);
  p.unpack(flat);
  return p;
}

std::vector<Image> random_frames(const GridSpec& grid, int k, unsigned seed) {
  std::vector<Image> frames;
  for (int i = 0; i < k; ++i) frames.emplace_back(grid, oracle::random_vector(grid.pixels(), seed + i));
  return frames;
}

// Unaberrated OTF with DC at index 0.
std::vector<oracle::C> unaberrated_otf(const PupilMask& mask) {
  const auto otf = otf_mtf(psf(mask, PhaseMap(mask.grid()))).first;
  return {otf.values().begin(), otf.values().end()};
}

}  // namespace

TEST(ProxyForward, ZeroOperatorGivesZeroImage) {
  const GridSpec grid{16, 0.5};
  const auto p = ProxyParams::zeros(grid, 3);
  for (double v : proxy_forward(random_frames(grid, 3, 1), p).values()) EXPECT_EQ(v, 0.0);
}

TEST(ProxyForward, SingleFrameWienerOracle) {
  const int n = 16;
  const GridSpec grid{n, 0.5};
  const auto mask = pupil_mask(grid);
  const auto H = unaberrated_otf(mask);
  const double lambda0 = 0.05;
  auto p = ProxyParams::zeros(grid, 1);
  for (int q = 0; q < n * n; ++q) p.weights[0][q] = std::conj(H[q]) / (std::norm(H[q]) + lambda0);
  std::fill(p.reg_pre.begin(), p.reg_pre.end(), -1000.0);
  for (double l : p.reg_spectrum()) EXPECT_EQ(l, 0.0);

  Rng rng(3);
  const auto scene = procedural_scene(grid, rng);
  const auto y = convolve(scene, psf(mask, PhaseMap(grid)));
  const auto Y = oracle::dft2(oracle::to_complex(vec(y.values())), n);
  std::vector<oracle::C> X(n * n);
  for (int q = 0; q < n * n; ++q) X[q] = std::conj(H[q]) / (std::norm(H[q]) + lambda0) * Y[q];
  const auto back = oracle::dft2(X, n, +1);
  const std::vector<Image> frames{y};
  const auto got = proxy_forward(frames, p);
  for (int q = 0; q < n * n; ++q) EXPECT_NEAR(got[q], back[q].real() / (n * n), 1e-10);
}

TEST(ProxyForward, LinearInTheStack) {
  const GridSpec grid{16, 0.5};
  const auto p = random_params(grid, 2, 4);
  const auto a = random_frames(grid, 2, 10);
  const auto b = random_frames(grid, 2, 20);
  std::vector<Image> mix, doubled;
  for (int i = 0; i < 2; ++i) {
    mix.push_back(0.3 * a[i] + (-1.7) * b[i]);
    doubled.push_back(2.0 * a[i]);
  }
  const auto fa = proxy_forward(a, p);
  const auto fb = proxy_forward(b, p);
  const auto fm = proxy_forward(mix, p);
  const auto fd = proxy_forward(doubled, p);
  for (std::size_t q = 0; q < fa.size(); ++q) {
    const double la = fa[q] - p.bias, lb = fb[q] - p.bias;
    EXPECT_NEAR(fm[q] - p.bias, 0.3 * la - 1.7 * lb, 1e-12);
    EXPECT_NEAR(fd[q] - p.bias, 2.0 * la, 1e-12);
  }
}

TEST(ProxyForward, FrameCountMismatchThrows) {
  const GridSpec grid{16, 0.5};
  EXPECT_THROW(proxy_forward(random_frames(grid, 2, 1), ProxyParams::zeros(grid, 3)), std::invalid_argument);
}

TEST(ProxyParams, PackUnpackRoundTripAndSoftplusRegulariser) {
  const GridSpec grid{8, 0.5};
  auto p = ProxyParams::zeros(grid, 2);
  EXPECT_EQ(p.parameter_count(), 2u * 2u * 64u + 64u + 1u);
  const auto flat = oracle::random_vector(p.parameter_count(), 9, -3.0, 3.0);
  p.unpack(flat);
  EXPECT_EQ(p.pack(), flat);
  for (double l : p.reg_spectrum()) EXPECT_GE(l, 0.0);
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(sigmoid(0.0), 0.5, 1e-15);
}

TEST(ProxyParams, BundleRoundTripOnDisk) {
  const GridSpec grid{16, 0.5};
  const auto p = random_params(grid, 3, 12);
  const auto dir = std::filesystem::temp_directory_path() / "wavemo_proxy_bundle_test";
  std::filesystem::remove_all(dir);
  io::write_proxy(dir, p);
  const auto q = io::read_proxy(dir);
  ASSERT_EQ(q.k(), 3);
  // PFM stores 32-bit floats.
  const auto a = p.pack();
  const auto b = q.pack();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6 * (1.0 + std::abs(a[i])));
  std::filesystem::remove_all(dir);
}

TEST(ProxyLossGrads, ExactReconstructionHasZeroLossAndGradients) {
  const GridSpec grid{16, 0.5};
  const auto p = random_params(grid, 2, 5);
  const auto frames = random_frames(grid, 2, 30);
  const auto target = proxy_forward(frames, p);
  const auto g = proxy_loss_grads(target, frames, p);
  EXPECT_NEAR(g.loss, 0.0, 1e-24);
  for (double v : g.params.pack()) EXPECT_NEAR(v, 0.0, 1e-12);
  for (const auto& f : g.frames) {
    for (double v : f) EXPECT_NEAR(v, 0.0, 1e-12);
  }
}

TEST(ProxyLossGrads, SymmetricInResidualSign) {
  const GridSpec grid{16, 0.5};
  const auto p = random_params(grid, 2, 6);
  const auto frames = random_frames(grid, 2, 40);
  const Image scene(grid, oracle::random_vector(256, 41));
  const auto rec = proxy_forward(frames, p);
  const auto mirrored = 2.0 * rec + (-1.0) * scene;
  EXPECT_NEAR(proxy_loss_grads(scene, frames, p).loss, proxy_loss_grads(mirrored, frames, p).loss, 1e-10);
}

TEST(ProxyLossGrads, MatchFiniteDifferencesForEveryGroup) {
  const GridSpec grid{16, 0.5};
  const int k = 2;
  const auto p = random_params(grid, k, 7);
  auto frames = random_frames(grid, k, 50);
  const Image scene(grid, oracle::random_vector(256, 51));
  const auto g = proxy_loss_grads(scene, frames, p);
  const double h = 1e-5;

  const auto flat = p.pack();
  const auto grad = g.params.pack();
  std::vector<double> fd(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    auto up = flat, dn = flat;
    up[i] += h;
    dn[i] -= h;
    ProxyParams pu = p, pd = p;
    pu.unpack(up);
    pd.unpack(dn);
    fd[i] = (proxy_loss_grads(scene, frames, pu).loss - proxy_loss_grads(scene, frames, pd).loss) / (2 * h);
  }
  EXPECT_LT(oracle::max_abs_diff(grad, fd) / oracle::max_abs(fd), 1e-4);

  for (int i = 0; i < k; ++i) {
    std::vector<double> fdf(grid.pixels());
    for (std::size_t q = 0; q < grid.pixels(); ++q) {
      auto fu = frames, fdn = frames;
      fu[i][q] += h;
      fdn[i][q] -= h;
      fdf[q] = (proxy_loss_grads(scene, fu, p).loss - proxy_loss_grads(scene, fdn, p).loss) / (2 * h);
    }
    EXPECT_LT(oracle::max_abs_diff(g.frames[i], fdf) / oracle::max_abs(fdf), 1e-4) << "frame " << i;
  }
}

TEST(ProxyLossGrads, GridMismatchThrows) {
  const GridSpec grid{16, 0.5};
  EXPECT_THROW(proxy_loss_grads(Image(GridSpec{32, 0.5}), random_frames(grid, 2, 1), ProxyParams::zeros(grid, 2)),
               std::invalid_argument);
}

namespace {

struct FitBench {
  GridSpec grid{32, 0.5};
  ZernikeBasis basis{grid, 28};
  PupilMask mask = pupil_mask(grid);
};

ModulationSet random_mods(const ZernikeBasis& basis, int k, unsigned seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> c;
  for (int i = 0; i < k; ++i) c.push_back(sample_aberration(rng, basis, 0.5, 0.5).coeffs);
  return ModulationSet::from_coeffs(basis, c, Provenance::random_zernike);
}

}  // namespace

// The proxy is linear in the frames, so memorising one scene is only possible
// when the blur is the same every step.
TEST(FitProxy, OverfitsSingleRepeatedScene) {
  const FitBench b;
  Rng rng(8);
  const auto scene = procedural_scene(b.grid, rng);
  ProxyTrainOptions o;
  o.iterations = 2000;
  o.sigma_lo = 0.0;
  o.sigma_hi = 0.0;
  o.noise_sigma = 0.0;
  o.seed = 3;
  const auto fit = fit_proxy(list_sampler({scene}), random_mods(b.basis, 4, 9), b.mask, b.basis, o);
  ASSERT_EQ(fit.history.loss.size(), 2000u);
  EXPECT_LT(fit.history.loss.back(), 0.1 * fit.history.loss.front());
}

TEST(FitProxy, ZeroIterationsReturnsInitialisation) {
  const FitBench b;
  ProxyTrainOptions o;
  o.iterations = 0;
  const auto mods = random_mods(b.basis, 2, 10);
  const auto init = proxy_init(b.mask, 2);
  const auto fit = fit_proxy(procedural_sampler(b.grid), mods, b.mask, b.basis, o);
  EXPECT_EQ(fit.params.pack(), init.pack());
  EXPECT_TRUE(fit.history.loss.empty());
  const auto custom = random_params(b.grid, 2, 11);
  EXPECT_EQ(fit_proxy(procedural_sampler(b.grid), mods, b.mask, b.basis, o, custom).params.pack(), custom.pack());
}

TEST(FitProxy, SameSeedGivesIdenticalParameters) {
  const FitBench b;
  ProxyTrainOptions o;
  o.iterations = 50;
  o.noise_sigma = 0.01;
  o.seed = 17;
  const auto mods = random_mods(b.basis, 3, 12);
  const auto a = fit_proxy(procedural_sampler(b.grid), mods, b.mask, b.basis, o);
  const auto c = fit_proxy(procedural_sampler(b.grid), mods, b.mask, b.basis, o);
  EXPECT_EQ(a.params.pack(), c.params.pack());
  EXPECT_EQ(a.history.loss, c.history.loss);
}

TEST(FitProxy, EmptySceneListThrows) {
  EXPECT_THROW(list_sampler({}), std::invalid_argument);
}

// Uniform white scenes have per-frequency power n^2/12 and the noise has
// n^2 sigma^2, so the optimal linear filter is conj(H) / (|H|^2 + 12 sigma^2).
TEST(FitProxy, RecoversWienerFilterOnWhiteNoise) {
  const int n = 16;
  const GridSpec grid{n, 0.5};
  const ZernikeBasis basis(grid, 28);
  const auto mask = pupil_mask(grid);
  const double sigma = 0.05;
  const double c = 12.0 * sigma * sigma;
  ProxyTrainOptions o;
  o.iterations = 6000;
  o.batch = 4;
  o.learning_rate = 1e-2;
  o.sigma_lo = 0.0;
  o.sigma_hi = 0.0;
  o.noise_sigma = sigma;
  o.seed = 5;
  const SceneSampler white = [grid](Rng& rng) { return white_noise_scene(grid, rng); };
  const auto fit = fit_proxy(white, ModulationSet::none(grid), mask, basis, o);
  const auto H = unaberrated_otf(mask);
  const auto lambda = fit.params.reg_spectrum();
  double se = 0.0, ref = 0.0;
  int kept = 0;
  for (int q = 0; q < n * n; ++q) {
    if (std::abs(H[q]) <= 0.1) continue;
    const auto want = std::conj(H[q]) / (std::norm(H[q]) + c);
    const auto got = fit.params.weights[0][q] / (1.0 + lambda[q]);
    se += std::norm(got - want);
    ref += std::norm(want);
    ++kept;
  }
  ASSERT_GT(kept, 10);
  EXPECT_LT(std::sqrt(se / ref), 0.10);
}
