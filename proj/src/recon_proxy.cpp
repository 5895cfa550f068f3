#include "wavemo/recon_proxy.hpp"

#include <cmath>

#include "wavemo/adam.hpp"
#include "wavemo/fft.hpp"
#include "wavemo/metrics.hpp"

namespace wavemo {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> ProxyParams::reg_spectrum() const {
  std::vector<double> out(reg_pre.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = softplus(reg_pre[i]);
  return out;
}

std::size_t ProxyParams::parameter_count() const {
  return weights.size() * grid.pixels() * 2 + reg_pre.size() + 1;
}

std::vector<double> ProxyParams::pack() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& w : weights) {
    for (const auto& v : w) {
      flat.push_back(v.real());
      flat.push_back(v.imag());
    }
  }
  flat.insert(flat.end(), reg_pre.begin(), reg_pre.end());
  flat.push_back(bias);
  return flat;
}

void ProxyParams::unpack(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("ProxyParams::unpack: size mismatch");
  std::size_t at = 0;
  for (auto& w : weights) {
    for (auto& v : w) {
      v = {flat[at], flat[at + 1]};
      at += 2;
    }
  }
  for (auto& r : reg_pre) r = flat[at++];
  bias = flat[at];
}

ProxyParams ProxyParams::zeros(const GridSpec& grid, int k) {
  ProxyParams p;
  p.grid = grid;
  p.weights.assign(k, std::vector<Complex>(grid.pixels()));
  p.reg_pre.assign(grid.pixels(), 0.0);
  return p;
}

ProxyParams proxy_init(const PupilMask& mask, int k) {
  if (k < 1) throw std::invalid_argument("proxy_init: K must be >= 1");
  auto p = ProxyParams::zeros(mask.grid(), k);
  const auto ev = evaluate_psf(mask, PhaseMap(mask.grid()));
  for (auto& w : p.weights) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = std::conj(ev.otf[i]) / (k * (std::norm(ev.otf[i]) + 0.1));
    }
  }
  return p;
}

namespace {

void check_frames(std::span<const Image> frames, const ProxyParams& params) {
  if (static_cast<int>(frames.size()) != params.k()) {
    throw std::invalid_argument("proxy: stack has " + std::to_string(frames.size()) +
                                " frames, parameters expect " + std::to_string(params.k()));
  }
  for (const auto& f : frames) {
    if (!(f.grid() == params.grid)) throw std::invalid_argument("proxy: grid mismatch");
  }
}

struct ForwardPass {
  std::vector<std::vector<Complex>> frame_spectra;
  std::vector<Complex> combined;  // S = sum W_i Y_i
  std::vector<double> gain;       // 1 / (1 + lambda)
  Image output;
};

ForwardPass run_forward(std::span<const Image> frames, const ProxyParams& params) {
  check_frames(frames, params);
  const int n = params.grid.n;
  const std::size_t npix = params.grid.pixels();
  ForwardPass fp;
  fp.combined.assign(npix, Complex{});
  for (int i = 0; i < params.k(); ++i) {
    fp.frame_spectra.push_back(fft::forward_real(frames[i].values(), n));
    const auto& y = fp.frame_spectra.back();
    const auto& w = params.weights[i];
    for (std::size_t p = 0; p < npix; ++p) fp.combined[p] += w[p] * y[p];
  }
  fp.gain.resize(npix);
  std::vector<Complex> q(npix);
  for (std::size_t p = 0; p < npix; ++p) {
    fp.gain[p] = 1.0 / (1.0 + softplus(params.reg_pre[p]));
    q[p] = fp.combined[p] * fp.gain[p];
  }
  auto x = fft::inverse_real(q, n);
  for (auto& v : x) v += params.bias;
  fp.output = Image(params.grid, std::move(x));
  return fp;
}

}  // namespace

Image proxy_forward(std::span<const Image> frames, const ProxyParams& params) {
  return run_forward(frames, params).output;
}

ProxyGradients proxy_loss_grads(const Image& scene, std::span<const Image> frames,
                                const ProxyParams& params) {
  if (!(scene.grid() == params.grid)) throw std::invalid_argument("proxy_loss_grads: grid mismatch");
  auto fp = run_forward(frames, params);
  const int n = params.grid.n;
  const std::size_t npix = params.grid.pixels();
  const double nn = static_cast<double>(npix);

  ProxyGradients g;
  std::vector<double> err(npix);
  double bias_grad = 0.0;
  for (std::size_t p = 0; p < npix; ++p) {
    err[p] = fp.output[p] - scene[p];
    g.loss += err[p] * err[p];
    bias_grad += 2.0 * err[p];
  }
  // G_Q = (2 / n^2) DFT(e) for x = Re IDFT(Q)
  auto gq = fft::forward_real(err, n);
  for (auto& v : gq) v *= 2.0 / nn;

  g.params = ProxyParams::zeros(params.grid, params.k());
  g.params.bias = bias_grad;
  std::vector<Complex> gs(npix);
  for (std::size_t p = 0; p < npix; ++p) {
    const double a = fp.gain[p];
    gs[p] = a * gq[p];
    const double d_gain = (std::conj(gq[p]) * fp.combined[p]).real();
    g.params.reg_pre[p] = d_gain * (-a * a) * sigmoid(params.reg_pre[p]);
  }
  for (int i = 0; i < params.k(); ++i) {
    auto& gw = g.params.weights[i];
    std::vector<Complex> gy(npix);
    for (std::size_t p = 0; p < npix; ++p) {
      gw[p] = gs[p] * std::conj(fp.frame_spectra[i][p]);
      gy[p] = gs[p] * std::conj(params.weights[i][p]);
    }
    // dL/dy = n^2 Re IDFT(G_Y)
    auto frame_grad = fft::inverse_real(gy, n);
    for (auto& v : frame_grad) v *= nn;
    g.frames.push_back(std::move(frame_grad));
  }
  g.reconstruction = std::move(fp.output);
  return g;
}

SceneSampler procedural_sampler(const GridSpec& grid, SceneOptions opts) {
  return [grid, opts](Rng& rng) { return procedural_scene(grid, rng, opts); };
}

SceneSampler list_sampler(std::vector<Image> scenes) {
  if (scenes.empty()) throw std::invalid_argument("list_sampler: dataset is empty");
  auto cursor = std::make_shared<std::size_t>(0);
  return [scenes = std::move(scenes), cursor](Rng&) {
    const auto& s = scenes[*cursor % scenes.size()];
    ++*cursor;
    return s;
  };
}

ProxyFit fit_proxy(const SceneSampler& dataset, const ModulationSet& mods, const PupilMask& mask,
                   const ZernikeBasis& basis, const ProxyTrainOptions& opts,
                   std::optional<ProxyParams> init) {
  if (!dataset) throw std::invalid_argument("fit_proxy: empty dataset");
  mods.validate();
  if (opts.iterations < 0 || opts.batch < 1) throw ConfigError("fit_proxy: invalid iterations/batch");
  ProxyFit fit{init ? std::move(*init) : proxy_init(mask, mods.k()), {}};
  if (fit.params.k() != mods.k()) throw std::invalid_argument("fit_proxy: K mismatch");

  Rng rng(opts.seed);
  Adam adam(fit.params.parameter_count(), opts.learning_rate);
  auto flat = fit.params.pack();
  for (int it = 0; it < opts.iterations; ++it) {
    std::vector<double> grad(flat.size(), 0.0);
    double loss = 0.0, psnr_acc = 0.0;
    for (int b = 0; b < opts.batch; ++b) {
      const Image scene = dataset(rng);
      const auto aber = sample_aberration(rng, basis, opts.sigma_lo, opts.sigma_hi);
      const auto stack = capture_stack(scene, basis.compose(aber.coeffs), mods, mask,
                                       opts.noise_sigma, rng);
      const auto g = proxy_loss_grads(scene, stack, fit.params);
      const auto gflat = g.params.pack();
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += gflat[i] / opts.batch;
      loss += g.loss / opts.batch;
      psnr_acc += psnr(g.reconstruction, scene) / opts.batch;
    }
    if (!std::isfinite(loss)) throw NumericalError("fit_proxy: loss is not finite");
    fit.history.loss.push_back(loss);
    fit.history.psnr.push_back(psnr_acc);
    adam.step(flat, grad);
    fit.params.unpack(flat);
  }
  return fit;
}

}  // namespace wavemo
