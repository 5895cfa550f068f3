#include "wavemo/modopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wavemo/adam.hpp"
#include "wavemo/fft.hpp"
#include "wavemo/metrics.hpp"
#include "wavemo/optics.hpp"

namespace wavemo {

// ---------------------------------------------------------------------------
// ModMLP

std::size_t ModMLP::parameter_count() const {
  return w1.size() + b1.size() + w2.size() + b2.size();
}

std::vector<double> ModMLP::pack() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto* part : {&w1, &b1, &w2, &b2}) flat.insert(flat.end(), part->begin(), part->end());
  return flat;
}

void ModMLP::unpack(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("ModMLP::unpack: size mismatch");
  auto it = flat.begin();
  for (auto* part : {&w1, &b1, &w2, &b2}) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(part->size()), part->begin());
    it += static_cast<std::ptrdiff_t>(part->size());
  }
}

ModMLP ModMLP::zeros(int k, int hidden, int modes) {
  if (k < 1 || hidden < 1 || modes < 1) throw ConfigError("ModMLP: sizes must be >= 1");
  ModMLP m;
  m.k = k;
  m.hidden = hidden;
  m.modes = modes;
  m.z.assign(modes, 1.0);
  m.w1.assign(static_cast<std::size_t>(hidden) * modes, 0.0);
  m.b1.assign(hidden, 0.0);
  m.w2.assign(static_cast<std::size_t>(k) * modes * hidden, 0.0);
  m.b2.assign(static_cast<std::size_t>(k) * modes, 0.0);
  return m;
}

ModMLP ModMLP::random(int k, int hidden, int modes, double output_scale, Rng& rng) {
  auto m = zeros(k, hidden, modes);
  std::normal_distribution<double> n1(0.0, 1.0 / std::sqrt(static_cast<double>(modes)));
  std::normal_distribution<double> n2(0.0, output_scale / std::sqrt(static_cast<double>(hidden)));
  for (auto& w : m.w1) w = n1(rng);
  for (auto& w : m.w2) w = n2(rng);
  return m;
}

namespace {

struct MlpActivations {
  std::vector<double> pre;  // W1 z + b1
  std::vector<double> act;  // leaky_relu(pre)
};

MlpActivations mlp_hidden(const ModMLP& m) {
  MlpActivations a{std::vector<double>(m.hidden), std::vector<double>(m.hidden)};
  for (int h = 0; h < m.hidden; ++h) {
    double s = m.b1[h];
    for (int j = 0; j < m.modes; ++j) s += m.w1[static_cast<std::size_t>(h) * m.modes + j] * m.z[j];
    a.pre[h] = s;
    a.act[h] = s > 0.0 ? s : kLeakySlope * s;
  }
  return a;
}

}  // namespace

CoeffMatrix mod_mlp_forward(const ModMLP& m) {
  const auto a = mlp_hidden(m);
  CoeffMatrix out(m.k, std::vector<double>(m.modes));
  for (int o = 0; o < m.k * m.modes; ++o) {
    double s = m.b2[o];
    for (int h = 0; h < m.hidden; ++h) s += m.w2[static_cast<std::size_t>(o) * m.hidden + h] * a.act[h];
    out[o / m.modes][o % m.modes] = s;
  }
  return out;
}

std::vector<double> mod_mlp_backward(const ModMLP& m, const CoeffMatrix& grad_out) {
  if (static_cast<int>(grad_out.size()) != m.k) throw std::invalid_argument("mod_mlp_backward: K mismatch");
  const auto a = mlp_hidden(m);
  auto g = ModMLP::zeros(m.k, m.hidden, m.modes);
  std::vector<double> g_act(m.hidden, 0.0);
  for (int o = 0; o < m.k * m.modes; ++o) {
    const double go = grad_out[o / m.modes].at(o % m.modes);
    g.b2[o] = go;
    for (int h = 0; h < m.hidden; ++h) {
      g.w2[static_cast<std::size_t>(o) * m.hidden + h] = go * a.act[h];
      g_act[h] += go * m.w2[static_cast<std::size_t>(o) * m.hidden + h];
    }
  }
  for (int h = 0; h < m.hidden; ++h) {
    const double gp = g_act[h] * (a.pre[h] > 0.0 ? 1.0 : kLeakySlope);
    g.b1[h] = gp;
    for (int j = 0; j < m.modes; ++j) g.w1[static_cast<std::size_t>(h) * m.modes + j] = gp * m.z[j];
  }
  return g.pack();
}

// ---------------------------------------------------------------------------
// Baselines

BaselineKind baseline_from_string(std::string_view name) {
  if (name == "none") return BaselineKind::none;
  if (name == "random_zernike") return BaselineKind::random_zernike;
  if (name == "random_gaussian") return BaselineKind::random_gaussian;
  if (name == "focus_sweep") return BaselineKind::focus_sweep;
  throw std::invalid_argument("unknown baseline kind '" + std::string(name) + "'");
}

double energy_matched_pixel_sigma(const ZernikeBasis& basis, double sigma_lo, double sigma_hi) {
  // E[sigma^2] for sigma ~ U[lo, hi]
  const double mean_var = sigma_hi > sigma_lo
                              ? (std::pow(sigma_hi, 3) - std::pow(sigma_lo, 3)) / (3.0 * (sigma_hi - sigma_lo))
                              : sigma_lo * sigma_lo;
  const auto& grid = basis.grid();
  double disk_pixels = 0.0;
  double energy = 0.0;
  for (int r = 0; r < grid.n; ++r) {
    for (int c = 0; c < grid.n; ++c) {
      if (!inside_disk(grid, r, c)) continue;
      disk_pixels += 1.0;
      for (int j = 1; j < basis.count(); ++j) energy += std::pow(basis.mode(j)(r, c), 2);
    }
  }
  return std::sqrt(mean_var * energy / disk_pixels);
}

ModulationSet generate_baseline(BaselineKind kind, int k, const ZernikeBasis& basis, Rng& rng,
                                const BaselineOptions& opts) {
  const auto& grid = basis.grid();
  if (kind == BaselineKind::none) return ModulationSet::none(grid);
  if (k < 1) throw std::invalid_argument("generate_baseline: K must be >= 1");
  switch (kind) {
    case BaselineKind::random_zernike: {
      CoeffMatrix coeffs;
      for (int i = 0; i < k; ++i) {
        coeffs.push_back(sample_aberration(rng, basis, opts.sigma_lo, opts.sigma_hi).coeffs);
      }
      return ModulationSet::from_coeffs(basis, std::move(coeffs), Provenance::random_zernike);
    }
    case BaselineKind::random_gaussian: {
      const double sigma_px = energy_matched_pixel_sigma(basis, opts.sigma_lo, opts.sigma_hi);
      std::normal_distribution<double> normal(0.0, sigma_px);
      ModulationSet set;
      set.provenance = Provenance::random_gaussian;
      for (int i = 0; i < k; ++i) {
        PhaseMap p(grid);
        for (int r = 0; r < grid.n; ++r) {
          for (int c = 0; c < grid.n; ++c) {
            if (inside_disk(grid, r, c)) p(r, c) = normal(rng);
          }
        }
        set.patterns.push_back(std::move(p));
      }
      return set;
    }
    case BaselineKind::focus_sweep: {
      if (basis.count() < 4) throw std::invalid_argument("focus_sweep needs the defocus mode (Noll 4)");
      CoeffMatrix coeffs;
      for (int i = 0; i < k; ++i) {
        std::vector<double> row(basis.count(), 0.0);
        row[3] = k == 1 ? 0.0 : -opts.sweep_amp + 2.0 * opts.sweep_amp * i / (k - 1);
        coeffs.push_back(std::move(row));
      }
      return ModulationSet::from_coeffs(basis, std::move(coeffs), Provenance::focus_sweep);
    }
    case BaselineKind::none:
      break;
  }
  throw std::invalid_argument("generate_baseline: unknown kind");
}

// ---------------------------------------------------------------------------
// Direct MTF optimization

double smooth_max(std::span<const double> values, double tau) {
  if (values.empty()) throw std::invalid_argument("smooth_max: empty input");
  if (!(tau > 0.0)) throw std::invalid_argument("smooth_max: tau must be positive");
  const double top = *std::max_element(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += std::exp((v - top) / tau);
  return top + tau * std::log(s);
}

MtfObjective mtf_objective(const CoeffMatrix& coeffs, const ZernikeBasis& basis,
                           const PupilMask& mask, std::span<const AberrationSample> samples,
                           double tau, bool with_grad) {
  if (samples.empty()) throw std::invalid_argument("mtf_objective: no aberration samples");
  if (coeffs.empty()) throw std::invalid_argument("mtf_objective: K must be >= 1");
  const int k = static_cast<int>(coeffs.size());
  const int n = mask.n();
  const std::size_t npix = mask.size();
  const double scale = 1.0 / (static_cast<double>(samples.size()) * npix);

  std::vector<PhaseMap> mods;
  for (const auto& row : coeffs) mods.push_back(basis.compose(row));

  MtfObjective out;
  std::vector<std::vector<double>> grad_phase(with_grad ? k : 0, std::vector<double>(npix, 0.0));
  std::vector<double> vals(k);
  std::vector<double> weights(k);
  for (const auto& sample : samples) {
    const PhaseMap aberration = basis.compose(sample.coeffs);
    std::vector<PsfEvaluation> evs;
    for (int i = 0; i < k; ++i) evs.push_back(evaluate_psf(mask, aberration + mods[i]));
    std::vector<std::vector<Complex>> u(with_grad ? k : 0, std::vector<Complex>(npix));
    for (std::size_t p = 0; p < npix; ++p) {
      for (int i = 0; i < k; ++i) vals[i] = std::abs(evs[i].otf[p]);
      const double sm = smooth_max(vals, tau);
      out.value += scale * sm;
      if (!with_grad) continue;
      for (int i = 0; i < k; ++i) {
        weights[i] = std::exp((vals[i] - sm) / tau);  // softmax
        const double mag = vals[i];
        u[i][p] = mag > 0.0 ? (scale * weights[i] / mag) * evs[i].otf[p] : Complex{};
      }
    }
    if (!with_grad) continue;
    for (int i = 0; i < k; ++i) {
      // d|O|/dkernel_x = Re(conj(O) e^{-i w x}) / |O|  =>  n^2 Re IDFT(u)
      auto gk = fft::inverse_real(u[i], n);
      for (auto& v : gk) v *= static_cast<double>(npix);
      const auto gphi = psf_phase_vjp(evs[i], gk);
      for (std::size_t p = 0; p < npix; ++p) grad_phase[i][p] += gphi[p];
    }
  }
  if (with_grad) {
    for (int i = 0; i < k; ++i) out.grad.push_back(basis.adjoint(grad_phase[i]));
  }
  return out;
}

ModulationSet mtf_direct_opt(int k, const ZernikeBasis& basis, const PupilMask& mask,
                             std::span<const AberrationSample> samples, Rng& rng,
                             const MtfOptOptions& opts) {
  if (k < 1) throw std::invalid_argument("mtf_direct_opt: K must be >= 1");
  if (samples.empty()) throw std::invalid_argument("mtf_direct_opt: no aberration samples");
  CoeffMatrix coeffs;
  for (int i = 0; i < k; ++i) {
    coeffs.push_back(sample_aberration(rng, basis, opts.init_sigma_lo, opts.init_sigma_hi).coeffs);
  }
  const std::size_t modes = basis.count();
  std::vector<double> flat;
  for (const auto& row : coeffs) flat.insert(flat.end(), row.begin(), row.end());
  Adam adam(flat.size(), opts.learning_rate);

  CoeffMatrix best = coeffs;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int it = 0; it <= opts.iterations; ++it) {
    for (int i = 0; i < k; ++i) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(i * modes), modes, coeffs[i].begin());
    }
    const bool last = it == opts.iterations;
    auto obj = mtf_objective(coeffs, basis, mask, samples, opts.tau, !last);
    if (obj.value > best_value) {
      best_value = obj.value;
      best = coeffs;
    }
    if (last) break;
    std::vector<double> grad;
    for (auto& row : obj.grad) {
      for (double g : row) grad.push_back(-g);  // ascent
    }
    adam.step(flat, grad);
  }
  return ModulationSet::from_coeffs(basis, std::move(best), Provenance::mtf_opt);
}

// ---------------------------------------------------------------------------
// End-to-end learning

void TrainConfig::validate() const {
  if (iterations < 0) throw ConfigError("train: iterations must be >= 0");
  if (k < 1) throw ConfigError("train: K must be >= 1");
  if (hidden < 1) throw ConfigError("train: hidden must be >= 1");
  if (batch < 1) throw ConfigError("train: batch must be >= 1");
  if (!(learning_rate > 0.0) || !(proxy_learning_rate > 0.0) || !std::isfinite(learning_rate) ||
      !std::isfinite(proxy_learning_rate)) {
    throw ConfigError("train: learning rates must be positive and finite");
  }
  if (!(sigma_lo >= 0.0) || !(sigma_hi >= sigma_lo) || !std::isfinite(sigma_hi)) {
    throw ConfigError("train: invalid sigma range");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("train: noise_sigma must be finite and >= 0");
  if (!std::isfinite(init_scale)) throw ConfigError("train: init_scale must be finite");
}

EndToEndEvaluation end_to_end(const ModMLP& mlp, const ProxyParams& proxy,
                              const ZernikeBasis& basis, const PupilMask& mask,
                              std::span<const EndToEndSample> samples) {
  if (proxy.k() != mlp.k) throw std::invalid_argument("end_to_end: proxy and MLP disagree on K");
  const int k = mlp.k;
  const int n = mask.n();
  const std::size_t npix = mask.size();
  const auto coeffs = mod_mlp_forward(mlp);
  std::vector<PhaseMap> mods;
  for (const auto& row : coeffs) mods.push_back(basis.compose(row));

  EndToEndEvaluation out;
  out.grad_proxy.assign(proxy.parameter_count(), 0.0);
  std::vector<std::vector<double>> grad_phase(k, std::vector<double>(npix, 0.0));
  for (const auto& s : samples) {
    const auto scene_spec = fft::forward_real(s.scene.values(), n);
    std::vector<PsfEvaluation> evs;
    std::vector<Image> frames;
    for (int i = 0; i < k; ++i) {
      evs.push_back(evaluate_psf(mask, s.aberration + mods[i]));
      Image y(mask.grid(), convolve_spectral(scene_spec, evs.back().otf, n));
      if (!s.noise.empty()) y += s.noise.at(i);
      frames.push_back(std::move(y));
    }
    const auto g = proxy_loss_grads(s.scene, frames, proxy);
    out.loss += g.loss;
    out.psnr += psnr(g.reconstruction, s.scene) / static_cast<double>(samples.size());
    const auto gp = g.params.pack();
    for (std::size_t p = 0; p < gp.size(); ++p) out.grad_proxy[p] += gp[p];
    for (int i = 0; i < k; ++i) {
      // frame_i = kernel_i (*) x  =>  dL/dkernel_i[d] = sum_x gy[x] x[x - d]
      const auto gk = correlate(g.frames[i], s.scene.values(), n);
      const auto gphi = psf_phase_vjp(evs[i], gk);
      for (std::size_t p = 0; p < npix; ++p) grad_phase[i][p] += gphi[p];
    }
  }
  CoeffMatrix grad_coeffs;
  for (int i = 0; i < k; ++i) grad_coeffs.push_back(basis.adjoint(grad_phase[i]));
  out.grad_mlp = mod_mlp_backward(mlp, grad_coeffs);
  return out;
}

LearnedModulations train_modulations(const TrainConfig& cfg, const ZernikeBasis& basis,
                                     const PupilMask& mask) {
  cfg.validate();
  Rng rng(cfg.seed);
  LearnedModulations out{{}, proxy_init(mask, cfg.k),
                         ModMLP::random(cfg.k, cfg.hidden, basis.count(), cfg.init_scale, rng), {}};
  auto mlp_flat = out.mlp.pack();
  auto proxy_flat = out.proxy.pack();
  Adam mlp_opt(mlp_flat.size(), cfg.learning_rate);
  Adam proxy_opt(proxy_flat.size(), cfg.proxy_learning_rate);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma > 0.0 ? cfg.noise_sigma : 1.0);

  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<EndToEndSample> batch;
    for (int b = 0; b < cfg.batch; ++b) {
      EndToEndSample s;
      s.scene = procedural_scene(mask.grid(), rng, cfg.scenes);
      s.aberration = basis.compose(sample_aberration(rng, basis, cfg.sigma_lo, cfg.sigma_hi).coeffs);
      if (cfg.noise_sigma > 0.0) {
        for (int i = 0; i < cfg.k; ++i) {
          Image e(mask.grid());
          for (auto& v : e.values()) v = noise(rng);
          s.noise.push_back(std::move(e));
        }
      }
      batch.push_back(std::move(s));
    }
    auto ev = end_to_end(out.mlp, out.proxy, basis, mask, batch);
    const double loss = ev.loss / cfg.batch;
    if (!std::isfinite(loss)) throw NumericalError("train_modulations: loss is not finite at iteration " + std::to_string(it));
    out.history.loss.push_back(loss);
    out.history.psnr.push_back(ev.psnr);
    for (auto& g : ev.grad_mlp) g /= cfg.batch;
    for (auto& g : ev.grad_proxy) g /= cfg.batch;
    mlp_opt.step(mlp_flat, ev.grad_mlp);
    proxy_opt.step(proxy_flat, ev.grad_proxy);
    out.mlp.unpack(mlp_flat);
    out.proxy.unpack(proxy_flat);
  }
  out.modulations = ModulationSet::from_coeffs(basis, mod_mlp_forward(out.mlp), Provenance::learned);
  return out;
}

}  // namespace wavemo
