#include "wavemo/recon_iterative.hpp"

#include <cmath>
#include <string>

#include "wavemo/fft.hpp"
#include "wavemo/optics.hpp"

namespace wavemo {
namespace {

void check_inputs(const MeasurementStack& stack, const ReconState& state, const PupilMask& mask,
                  const ZernikeBasis& basis) {
  if (stack.frames.empty()) throw std::invalid_argument("pdi: measurement stack is empty");
  if (stack.modulations.k() != stack.k()) {
    throw std::invalid_argument("pdi: frame count does not match modulation count");
  }
  if (state.aber_coeffs.size() != static_cast<std::size_t>(basis.count())) {
    throw std::invalid_argument("pdi: expected " + std::to_string(basis.count()) +
                                " aberration coefficients");
  }
  state.scene_est.require_same_grid(mask, "pdi");
  if (!(basis.grid() == mask.grid())) throw std::invalid_argument("pdi: basis grid mismatch");
  for (const auto& f : stack.frames) mask.require_same_grid(f, "pdi");
}

double frame_energy(const MeasurementStack& stack) {
  double e = 0.0;
  for (const auto& f : stack.frames) {
    for (double v : f.values()) e += v * v;
  }
  return e;
}

PdiEvaluation evaluate(const MeasurementStack& stack, const ReconState& state,
                       const PupilMask& mask, const ZernikeBasis& basis, double tv_weight,
                       double tv_eps, bool with_grad) {
  check_inputs(stack, state, mask, basis);
  const int n = mask.n();
  const std::size_t npix = mask.size();
  const PhaseMap aberration = basis.compose(state.aber_coeffs);
  const auto scene_spec = fft::forward_real(state.scene_est.values(), n);

  PdiEvaluation out;
  if (with_grad) {
    out.grad_scene.assign(npix, 0.0);
    out.grad_coeffs.assign(basis.count(), 0.0);
  }
  std::vector<double> grad_phase_total(with_grad ? npix : 0, 0.0);
  for (int i = 0; i < stack.k(); ++i) {
    const auto ev = evaluate_psf(mask, aberration + stack.modulations.patterns[i]);
    auto residual = convolve_spectral(scene_spec, ev.otf, n);
    const auto& y = stack.frames[i];
    for (std::size_t p = 0; p < npix; ++p) {
      residual[p] -= y[p];
      out.loss += residual[p] * residual[p];
    }
    if (!with_grad) continue;
    // dL/dx = 2 sum_i h_i (correlated with) r_i
    auto res_spec = fft::forward_real(residual, n);
    std::vector<Complex> back(npix);
    for (std::size_t p = 0; p < npix; ++p) back[p] = 2.0 * std::conj(ev.otf[p]) * res_spec[p];
    const auto gs = fft::inverse_real(back, n);
    for (std::size_t p = 0; p < npix; ++p) out.grad_scene[p] += gs[p];
    // dL/dkernel[d] = 2 sum_x r[x] x[x - d]
    for (std::size_t p = 0; p < npix; ++p) back[p] = 2.0 * res_spec[p] * std::conj(scene_spec[p]);
    const auto grad_kernel = fft::inverse_real(back, n);
    const auto gphi = psf_phase_vjp(ev, grad_kernel);
    for (std::size_t p = 0; p < npix; ++p) grad_phase_total[p] += gphi[p];
  }
  if (with_grad) out.grad_coeffs = basis.adjoint(grad_phase_total);

  if (tv_weight > 0.0) {
    std::vector<double> tv_grad;
    out.loss += tv_weight * total_variation(state.scene_est, tv_eps, with_grad ? &tv_grad : nullptr);
    if (with_grad) {
      for (std::size_t p = 0; p < npix; ++p) out.grad_scene[p] += tv_weight * tv_grad[p];
    }
  }
  return out;
}

}  // namespace

void ReconOptions::validate() const {
  if (max_iters < 1) throw ConfigError("recon: max_iters must be >= 1");
  if (!(step_scene > 0.0) || !(step_coeffs > 0.0)) throw ConfigError("recon: steps must be positive");
  if (tv_weight < 0.0) throw ConfigError("recon: tv_weight must be >= 0");
  if (!(tv_eps > 0.0)) throw ConfigError("recon: tv_eps must be positive");
}

double total_variation(const Image& x, double eps, std::vector<double>* grad) {
  const int n = x.n();
  double tv = 0.0;
  if (grad) grad->assign(x.size(), 0.0);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double dx = x(r, (c + 1) % n) - x(r, c);
      const double dy = x((r + 1) % n, c) - x(r, c);
      const double mag = std::sqrt(dx * dx + dy * dy + eps * eps);
      tv += mag;
      if (grad) {
        auto& g = *grad;
        g[r * n + (c + 1) % n] += dx / mag;
        g[((r + 1) % n) * n + c] += dy / mag;
        g[r * n + c] -= (dx + dy) / mag;
      }
    }
  }
  return tv;
}

double pdi_loss(const MeasurementStack& stack, const ReconState& state, const PupilMask& mask,
                const ZernikeBasis& basis, double tv_weight, double tv_eps) {
  return evaluate(stack, state, mask, basis, tv_weight, tv_eps, false).loss;
}

PdiEvaluation pdi_gradients(const MeasurementStack& stack, const ReconState& state,
                            const PupilMask& mask, const ZernikeBasis& basis, double tv_weight,
                            double tv_eps) {
  return evaluate(stack, state, mask, basis, tv_weight, tv_eps, true);
}

ReconState initial_state(const MeasurementStack& stack, const ZernikeBasis& basis) {
  if (stack.frames.empty()) throw std::invalid_argument("reconstruct: empty stack");
  ReconState s;
  s.scene_est = Image(stack.grid());
  for (const auto& f : stack.frames) s.scene_est += f;
  s.scene_est *= 1.0 / stack.k();
  s.aber_coeffs.assign(basis.count(), 0.0);
  return s;
}

ReconState reconstruct(const MeasurementStack& stack, const PupilMask& mask,
                       const ZernikeBasis& basis, const ReconOptions& opts,
                       std::optional<ReconState> init) {
  opts.validate();
  if (stack.k() == 0) throw std::invalid_argument("reconstruct: K = 0");
  if (stack.k() == 1 && opts.optimize_aberration) {
    throw UnderdeterminedError(
        "reconstruct: a single frame cannot determine both scene and aberration; "
        "freeze the aberration or supply K >= 2 modulations");
  }
  ReconState state = init ? std::move(*init) : initial_state(stack, basis);
  state.loss_history.clear();
  state.iteration = 0;

  Adam scene_opt(state.scene_est.size(), opts.step_scene, opts.adam);
  Adam coeff_opt(state.aber_coeffs.size(), opts.step_coeffs, opts.adam);
  const double floor = opts.loss_floor * frame_energy(stack);

  for (int t = 0; t < opts.max_iters; ++t) {
    auto ev = pdi_gradients(stack, state, mask, basis, opts.tv_weight, opts.tv_eps);
    if (!std::isfinite(ev.loss)) throw NumericalError("reconstruct: loss is not finite");
    state.loss_history.push_back(ev.loss);
    if (ev.loss <= floor) break;
    if (t > 0) {
      const double prev = state.loss_history[t - 1];
      if (std::abs(prev - ev.loss) <= opts.tolerance * prev) break;
    }
    scene_opt.step(state.scene_est.values(), ev.grad_scene);
    if (opts.optimize_aberration) {
      ev.grad_coeffs[0] = 0.0;  // piston is unobservable
      coeff_opt.step(state.aber_coeffs, ev.grad_coeffs);
    }
    state.iteration = t + 1;
  }
  if (state.iteration == opts.max_iters) {
    state.loss_history.push_back(pdi_loss(stack, state, mask, basis, opts.tv_weight, opts.tv_eps));
  }
  return state;
}

Image multiframe_least_squares(const MeasurementStack& stack, const PhaseMap& aberration,
                               const PupilMask& mask, double cutoff) {
  const int n = mask.n();
  const std::size_t npix = mask.size();
  std::vector<Complex> num(npix);
  std::vector<double> den(npix, 0.0);
  for (int i = 0; i < stack.k(); ++i) {
    const auto ev = evaluate_psf(mask, aberration + stack.modulations.patterns[i]);
    const auto y = fft::forward_real(stack.frames[i].values(), n);
    for (std::size_t p = 0; p < npix; ++p) {
      num[p] += std::conj(ev.otf[p]) * y[p];
      den[p] += std::norm(ev.otf[p]);
    }
  }
  for (std::size_t p = 0; p < npix; ++p) num[p] = den[p] > cutoff ? num[p] / den[p] : Complex{};
  return Image(mask.grid(), fft::inverse_real(num, n));
}

}  // namespace wavemo
