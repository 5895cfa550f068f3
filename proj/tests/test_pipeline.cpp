#include <gtest/gtest.h>

#include <cmath>

#include "wavemo/errors.hpp"
#include "wavemo/gradcheck.hpp"
#include "wavemo/optics.hpp"
#include "wavemo/pipeline.hpp"

using namespace wavemo;

TEST(Gradcheck, EveryChainPassesItsThreshold) {
  const auto rows = run_gradcheck();
  ASSERT_EQ(rows.size(), gradcheck_chains().size());
  for (const auto& r : rows) {
    EXPECT_TRUE(r.passed()) << r.chain << " " << r.max_rel_error;
    EXPECT_GT(r.coords_checked, 0) << r.chain;
    EXPECT_DOUBLE_EQ(r.threshold, r.chain == "end_to_end" ? 1e-3 : 1e-4) << r.chain;
  }
}

TEST(Gradcheck, FlippedChainIsTheOnlyFailure) {
  for (const auto& chain : gradcheck_chains()) {
    GradcheckOptions o;
    o.flip_chain = chain;
    for (const auto& r : run_gradcheck(o)) {
      if (r.chain == chain) {
        EXPECT_FALSE(r.passed()) << chain;
        EXPECT_NEAR(r.max_rel_error, 2.0, 1e-2) << chain;
      } else {
        EXPECT_TRUE(r.passed()) << r.chain << " while flipping " << chain;
      }
    }
  }
  GradcheckOptions bad;
  bad.flip_chain = "no_such_chain";
  EXPECT_THROW(run_gradcheck(bad), ConfigError);
}

TEST(Experiment, DefaultsValidateAndScaleSigma) {
  ExperimentConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_DOUBLE_EQ(cfg.sigma_lo_eff(), 0.625);
  EXPECT_DOUBLE_EQ(cfg.sigma_hi_eff(), 0.75);
  cfg.k = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Experiment, EvalItemsAreIndexDeterministic) {
  ExperimentConfig cfg;
  cfg.grid = GridSpec{16, 0.5};
  const ZernikeBasis basis(cfg.grid, 28);
  const auto a = eval_item(cfg, basis, 3);
  const auto b = eval_item(cfg, basis, 3);
  const auto c = eval_item(cfg, basis, 4);
  EXPECT_EQ(a.aberration.coeffs, b.aberration.coeffs);
  EXPECT_EQ(a.noise_seed, b.noise_seed);
  EXPECT_NE(a.aberration.coeffs, c.aberration.coeffs);
  for (int j = 1; j < 28; ++j) {
    EXPECT_GE(a.aberration.sigmas[j], cfg.sigma_lo_eff());
    EXPECT_LE(a.aberration.sigmas[j], cfg.sigma_hi_eff());
  }
}

TEST(Experiment, LearnedSetsPlugIntoBothReconstructors) {
  ExperimentConfig cfg;
  cfg.grid = GridSpec{16, 0.5};
  cfg.k = 2;
  cfg.hidden = 8;
  cfg.train_iters = 20;
  cfg.eval_scenes = 2;
  const ZernikeBasis basis(cfg.grid, 28);
  const auto mask = pupil_mask(cfg.grid);
  const auto learned = train_kind("learned", cfg, basis, mask);
  EXPECT_EQ(learned.modulations.provenance, Provenance::learned);
  EXPECT_EQ(learned.modulations.k(), 2);
  const auto random = train_kind("random_zernike", cfg, basis, mask);
  ReconOptions o;
  o.max_iters = 20;
  for (const auto* t : {&learned, &random}) {
    const auto p = evaluate_proxy(t->modulations, t->proxy, cfg, basis, mask, 2);
    const auto i = evaluate_iterative(t->modulations, cfg, basis, mask, 2, o);
    EXPECT_EQ(p.per_item.size(), 2u);
    EXPECT_EQ(i.per_item.size(), 2u);
    EXPECT_TRUE(std::isfinite(p.mean_psnr));
    EXPECT_TRUE(std::isfinite(i.mean_psnr));
  }
}

TEST(Experiment, EvaluationIsDeterministicAcrossThreads) {
  ExperimentConfig cfg;
  cfg.grid = GridSpec{16, 0.5};
  cfg.k = 2;
  const ZernikeBasis basis(cfg.grid, 28);
  const auto mask = pupil_mask(cfg.grid);
  const auto mods = baseline_modulations("random_zernike", cfg, basis, mask);
  const auto proxy = proxy_init(mask, 2);
  const auto a = evaluate_proxy(mods, proxy, cfg, basis, mask, 6);
  const auto b = evaluate_proxy(mods, proxy, cfg, basis, mask, 6);
  ASSERT_EQ(a.per_item.size(), b.per_item.size());
  for (std::size_t i = 0; i < a.per_item.size(); ++i) EXPECT_EQ(a.per_item[i].psnr, b.per_item[i].psnr);
  EXPECT_EQ(a.mean_psnr, b.mean_psnr);
}

TEST(MtfReport, NoneProfileIsTheAverageAberratedMtf) {
  ExperimentConfig cfg;
  cfg.grid = GridSpec{32, 0.5};
  const ZernikeBasis basis(cfg.grid, 28);
  const auto mask = pupil_mask(cfg.grid);
  const auto none = ModulationSet::none(cfg.grid);
  const auto cmp = mtf_comparison({{"none", none}}, cfg, basis, mask, 4, 9, 77);
  Rng rng(77);
  std::vector<double> expect(cmp.profiles[0].size(), 0.0);
  for (int s = 0; s < 4; ++s) {
    const auto ab = basis.compose(sample_aberration(rng, basis, cfg.sigma_lo_eff(), cfg.sigma_hi_eff()).coeffs);
    const auto prof = radial_profile(otf_mtf(psf(mask, ab)).second, 9).value;
    for (std::size_t b = 0; b < expect.size(); ++b) expect[b] += prof[b] / 4.0;
  }
  for (std::size_t b = 0; b < expect.size(); ++b) EXPECT_NEAR(cmp.profiles[0][b], expect[b], 1e-12);
  const auto again = mtf_comparison({{"none", none}}, cfg, basis, mask, 4, 9, 77);
  EXPECT_EQ(again.profiles, cmp.profiles);
}

TEST(MtfReport, UpperBandMeanUsesTopHalfOfBins) {
  EXPECT_DOUBLE_EQ(upper_band_mean({1.0, 1.0, 2.0, 4.0}), 3.0);
  EXPECT_DOUBLE_EQ(upper_band_mean({9.0, 1.0, 2.0, 3.0, 4.0}), 3.0);
  EXPECT_THROW(upper_band_mean({1.0}), std::invalid_argument);
}
