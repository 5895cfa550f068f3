#include "wavemo/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace wavemo {
namespace {

// Runs body(i) for i in [0, count) on up to worker_count() threads. Results
// must be written to per-index slots so the outcome is order independent.
template <typename Body>
void parallel_for(int count, Body body) {
  const int workers = std::min(worker_count(), count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < count; i = next++) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 step over the combined value
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

void ExperimentConfig::validate() const {
  grid.validate();
  if (k < 1) throw ConfigError("K must be >= 1");
  for (double v : {sigma_lo, sigma_hi, aberration_scale, noise_sigma, sweep_amp, mlp_learning_rate,
                   proxy_learning_rate, init_scale, mtf_tau}) {
    if (!std::isfinite(v)) throw ConfigError("numeric settings must be finite");
  }
  if (sigma_lo < 0.0 || sigma_hi < sigma_lo) throw ConfigError("invalid sigma range");
  if (aberration_scale < 0.0) throw ConfigError("aberration_scale must be >= 0");
  if (noise_sigma < 0.0) throw ConfigError("noise sigma must be >= 0");
  if (mlp_learning_rate <= 0.0 || proxy_learning_rate <= 0.0) throw ConfigError("learning rates must be > 0");
  if (mtf_tau <= 0.0) throw ConfigError("mtf_tau must be > 0");
  if (train_iters < 0) throw ConfigError("iterations must be >= 0");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (eval_scenes < 1) throw ConfigError("eval scene count must be >= 1");
  if (hidden < 1) throw ConfigError("hidden width must be >= 1");
  if (mtf_opt_iters < 0 || mtf_opt_samples < 1) throw ConfigError("invalid direct-MTF settings");
}

int worker_count() {
  if (const char* env = std::getenv("WAVEMO_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ModulationSet baseline_modulations(const std::string& kind, const ExperimentConfig& cfg,
                                   const ZernikeBasis& basis, const PupilMask& mask) {
  Rng rng(mix(cfg.seed, 0xBA5E));
  if (kind == "mtf_opt") {
    std::vector<AberrationSample> samples;
    for (int s = 0; s < cfg.mtf_opt_samples; ++s) {
      samples.push_back(sample_aberration(rng, basis, cfg.sigma_lo_eff(), cfg.sigma_hi_eff()));
    }
    MtfOptOptions o;
    o.iterations = cfg.mtf_opt_iters;
    o.tau = cfg.mtf_tau;
    o.init_sigma_lo = cfg.sigma_lo_eff();
    o.init_sigma_hi = cfg.sigma_hi_eff();
    return mtf_direct_opt(cfg.k, basis, mask, samples, rng, o);
  }
  BaselineOptions bo{cfg.sigma_lo_eff(), cfg.sigma_hi_eff(), cfg.sweep_amp};
  return generate_baseline(baseline_from_string(kind), cfg.k, basis, rng, bo);
}

TrainedKind train_kind(const std::string& kind, const ExperimentConfig& cfg,
                       const ZernikeBasis& basis, const PupilMask& mask) {
  cfg.validate();
  TrainedKind out;
  out.kind = kind;
  if (kind == "learned") {
    TrainConfig tc;
    tc.iterations = cfg.train_iters;
    tc.k = cfg.k;
    tc.hidden = cfg.hidden;
    tc.batch = cfg.batch;
    tc.learning_rate = cfg.mlp_learning_rate;
    tc.proxy_learning_rate = cfg.proxy_learning_rate;
    tc.sigma_lo = cfg.sigma_lo_eff();
    tc.sigma_hi = cfg.sigma_hi_eff();
    tc.noise_sigma = cfg.noise_sigma;
    tc.init_scale = cfg.init_scale * cfg.aberration_scale;
    tc.seed = cfg.seed;
    auto learned = train_modulations(tc, basis, mask);
    out.modulations = std::move(learned.modulations);
    out.proxy = std::move(learned.proxy);
    out.history = std::move(learned.history);
    return out;
  }
  out.modulations = baseline_modulations(kind, cfg, basis, mask);
  ProxyTrainOptions po;
  po.iterations = cfg.train_iters;
  po.batch = cfg.batch;
  po.learning_rate = cfg.proxy_learning_rate;
  po.sigma_lo = cfg.sigma_lo_eff();
  po.sigma_hi = cfg.sigma_hi_eff();
  po.noise_sigma = cfg.noise_sigma;
  po.seed = cfg.seed;
  auto fit = fit_proxy(procedural_sampler(cfg.grid), out.modulations, mask, basis, po);
  out.proxy = std::move(fit.params);
  out.history = std::move(fit.history);
  return out;
}

EvalItem eval_item(const ExperimentConfig& cfg, const ZernikeBasis& basis, int index) {
  Rng rng(mix(cfg.eval_seed, static_cast<std::uint64_t>(index)));
  EvalItem item;
  item.scene = procedural_scene(cfg.grid, rng);
  item.aberration = sample_aberration(rng, basis, cfg.sigma_lo_eff(), cfg.sigma_hi_eff());
  item.noise_seed = rng();
  return item;
}

MetricReport evaluate_proxy(const ModulationSet& mods, const ProxyParams& proxy,
                            const ExperimentConfig& cfg, const ZernikeBasis& basis,
                            const PupilMask& mask, int scenes) {
  if (scenes < 1) throw std::invalid_argument("evaluate_proxy: need at least one scene");
  std::vector<MetricItem> items(scenes);
  parallel_for(scenes, [&](int i) {
    const auto item = eval_item(cfg, basis, i);
    Rng noise(item.noise_seed);
    const auto stack = capture_stack(item.scene, basis.compose(item.aberration.coeffs), mods, mask,
                                     cfg.noise_sigma, noise);
    const auto recon = proxy_forward(stack, proxy);
    items[i] = {"scene_" + std::to_string(i), psnr(recon, item.scene), ssim(recon, item.scene)};
  });
  return MetricReport::from_items(std::move(items));
}

MetricReport evaluate_iterative(const ModulationSet& mods, const ExperimentConfig& cfg,
                                const ZernikeBasis& basis, const PupilMask& mask, int scenes,
                                const ReconOptions& opts) {
  if (scenes < 1) throw std::invalid_argument("evaluate_iterative: need at least one scene");
  std::vector<MetricItem> items(scenes);
  parallel_for(scenes, [&](int i) {
    const auto item = eval_item(cfg, basis, i);
    Rng noise(item.noise_seed);
    const auto stack = capture_stack(item.scene, basis.compose(item.aberration.coeffs), mods, mask,
                                     cfg.noise_sigma, noise);
    const auto state = reconstruct(stack, mask, basis, opts);
    const auto aligned = register_to(state.scene_est, item.scene);
    items[i] = {"scene_" + std::to_string(i), psnr(aligned, item.scene), ssim(aligned, item.scene)};
  });
  return MetricReport::from_items(std::move(items));
}

MtfComparison mtf_comparison(const std::vector<std::pair<std::string, ModulationSet>>& sets,
                             const ExperimentConfig& cfg, const ZernikeBasis& basis,
                             const PupilMask& mask, int samples, int nbins, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("mtf_comparison: need at least one aberration sample");
  Rng rng(seed);
  std::vector<PhaseMap> aberrations;
  for (int s = 0; s < samples; ++s) {
    aberrations.push_back(basis.compose(sample_aberration(rng, basis, cfg.sigma_lo_eff(), cfg.sigma_hi_eff()).coeffs));
  }
  MtfComparison out;
  out.profiles.resize(sets.size());
  parallel_for(static_cast<int>(sets.size()), [&](int i) {
    std::vector<double> acc;
    for (const auto& ab : aberrations) {
      const auto prof = radial_profile(combined_mtf(ab, sets[i].second, mask), nbins);
      if (acc.empty()) acc.assign(prof.value.size(), 0.0);
      for (std::size_t b = 0; b < acc.size(); ++b) acc[b] += prof.value[b] / samples;
    }
    out.profiles[i] = std::move(acc);
  });
  for (const auto& [name, set] : sets) out.kinds.push_back(name);
  out.freq = radial_profile(Mtf(mask.grid()), nbins).freq;
  return out;
}

double upper_band_mean(const std::vector<double>& profile) {
  if (profile.size() < 2) throw std::invalid_argument("upper_band_mean: profile too short");
  const std::size_t start = profile.size() / 2;
  double s = 0.0;
  for (std::size_t b = start; b < profile.size(); ++b) s += profile[b];
  return s / static_cast<double>(profile.size() - start);
}

}  // namespace wavemo
