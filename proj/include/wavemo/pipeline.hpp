#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wavemo/diversity.hpp"
#include "wavemo/metrics.hpp"
#include "wavemo/modopt.hpp"
#include "wavemo/recon_iterative.hpp"
#include "wavemo/recon_proxy.hpp"

namespace wavemo {

/// Shared settings of the simulate / learn / evaluate / mtf-report workflows.
struct ExperimentConfig {
  GridSpec grid{32, 0.5};
  int k = 4;
  /// Per-mode coefficient std bounds before desk scaling.
  double sigma_lo = 5.0;
  double sigma_hi = 6.0;
  /// Multiplier applied to both sigma bounds (aberrations and random baselines).
  double aberration_scale = 0.125;
  double noise_sigma = 0.01;
  double sweep_amp = 6.0;

  int train_iters = 3000;
  int batch = 1;
  int hidden = 64;
  double mlp_learning_rate = 1e-3;
  double proxy_learning_rate = 1e-3;
  double init_scale = 1.0;
  std::uint64_t seed = 1;

  int mtf_opt_iters = 100;
  int mtf_opt_samples = 4;
  double mtf_tau = 0.05;

  int eval_scenes = 20;
  std::uint64_t eval_seed = 1000;

  [[nodiscard]] double sigma_lo_eff() const { return sigma_lo * aberration_scale; }
  [[nodiscard]] double sigma_hi_eff() const { return sigma_hi * aberration_scale; }
  void validate() const;
};

/// Modulations plus the proxy trained for them.
struct TrainedKind {
  std::string kind;
  ModulationSet modulations;
  ProxyParams proxy;
  TrainHistory history;
};

/// Modulations for a baseline kind drawn from the experiment seed.
ModulationSet baseline_modulations(const std::string& kind, const ExperimentConfig& cfg,
                                   const ZernikeBasis& basis, const PupilMask& mask);

/// Baselines: modulations frozen, proxy fitted. `learned`: joint training.
/// Every kind uses the same iteration budget and training seed.
TrainedKind train_kind(const std::string& kind, const ExperimentConfig& cfg,
                       const ZernikeBasis& basis, const PupilMask& mask);

/// Scene, aberration and noise for held-out item `index`, identical across
/// modulation kinds.
struct EvalItem {
  Image scene;
  AberrationSample aberration;
  std::uint64_t noise_seed = 0;
};
EvalItem eval_item(const ExperimentConfig& cfg, const ZernikeBasis& basis, int index);

MetricReport evaluate_proxy(const ModulationSet& mods, const ProxyParams& proxy,
                            const ExperimentConfig& cfg, const ZernikeBasis& basis,
                            const PupilMask& mask, int scenes);

/// Blind iterative reconstruction scored after sub-pixel registration.
MetricReport evaluate_iterative(const ModulationSet& mods, const ExperimentConfig& cfg,
                                const ZernikeBasis& basis, const PupilMask& mask, int scenes,
                                const ReconOptions& opts);

struct MtfComparison {
  std::vector<double> freq;
  std::vector<std::string> kinds;
  std::vector<std::vector<double>> profiles;  // one per kind
};

/// Radial profile of the combined MTF averaged over `samples` aberration draws
/// shared by all kinds.
MtfComparison mtf_comparison(const std::vector<std::pair<std::string, ModulationSet>>& sets,
                             const ExperimentConfig& cfg, const ZernikeBasis& basis,
                             const PupilMask& mask, int samples, int nbins,
                             std::uint64_t seed);

/// Mean of the profile over the upper half of its bins.
double upper_band_mean(const std::vector<double>& profile);

/// Worker count: WAVEMO_THREADS if set and positive, else hardware concurrency.
int worker_count();

}  // namespace wavemo
