#include "wavemo/optics.hpp"

#include <cmath>

#include "wavemo/fft.hpp"

namespace wavemo {

PupilMask pupil_mask(const GridSpec& grid) {
  grid.validate();
  PupilMask mask(grid);
  for (int r = 0; r < grid.n; ++r) {
    for (int c = 0; c < grid.n; ++c) mask(r, c) = inside_disk(grid, r, c) ? 1.0 : 0.0;
  }
  return mask;
}

PsfEvaluation evaluate_psf(const PupilMask& mask, const PhaseMap& phase) {
  mask.require_same_grid(phase, "psf");
  const int n = mask.n();
  PsfEvaluation ev;
  ev.n = n;
  ev.pupil_field.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    ev.pupil_field[i] = mask[i] == 0.0 ? Complex{} : mask[i] * std::polar(1.0, phase[i]);
  }
  ev.far_field = ev.pupil_field;
  fft::forward(ev.far_field, n);
  ev.kernel.resize(mask.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    ev.kernel[i] = std::norm(ev.far_field[i]);
    total += ev.kernel[i];
  }
  if (!(total > 0.0)) throw std::invalid_argument("psf: pupil mask is empty");
  ev.total = total;
  for (auto& v : ev.kernel) v /= total;
  ev.otf = fft::forward_real(ev.kernel, n);
  return ev;
}

Psf psf(const PupilMask& mask, const PhaseMap& phase) {
  auto ev = evaluate_psf(mask, phase);
  return half_shift(Psf(mask.grid(), std::move(ev.kernel)));
}

std::pair<Otf, Mtf> otf_mtf(const Psf& psf) {
  double sum = 0.0;
  for (double v : psf.values()) sum += v;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ContractError("otf_mtf: PSF is not normalized (sum = " + std::to_string(sum) + ")");
  }
  const auto origin = half_shift(psf);
  Otf otf(psf.grid(), fft::forward_real(origin.values(), psf.n()));
  Mtf mtf(psf.grid());
  for (std::size_t i = 0; i < otf.size(); ++i) mtf[i] = std::abs(otf[i]);
  return {std::move(otf), std::move(mtf)};
}

std::vector<double> convolve_spectral(std::span<const Complex> image_spectrum,
                                      std::span<const Complex> otf, int n) {
  std::vector<Complex> prod(image_spectrum.size());
  for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = image_spectrum[i] * otf[i];
  return fft::inverse_real(prod, n);
}

std::vector<double> correlate(std::span<const double> a, std::span<const double> b, int n) {
  auto fa = fft::forward_real(a, n);
  const auto fb = fft::forward_real(b, n);
  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= std::conj(fb[i]);
  return fft::inverse_real(fa, n);
}

Image convolve(const Image& image, const Psf& psf) {
  image.require_same_grid(psf, "convolve");
  const int n = image.n();
  const auto origin = half_shift(psf);
  const auto otf = fft::forward_real(origin.values(), n);
  const auto spec = fft::forward_real(image.values(), n);
  return Image(image.grid(), convolve_spectral(spec, otf, n));
}

Image add_noise(const Image& image, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("add_noise: sigma must be >= 0");
  Image out = image;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto& v : out.values()) v += normal(rng);
  return out;
}

std::vector<double> psf_phase_vjp(const PsfEvaluation& eval, std::span<const double> grad_kernel) {
  // kernel_k = |U_k|^2 / s, U = DFT(u), u = m exp(j phi)
  // dL/dphi_x = -2 Im( u_x * DFT(g/s * conj(U))_x )
  const int n = eval.n;
  std::vector<Complex> buf(eval.far_field.size());
  for (std::size_t k = 0; k < buf.size(); ++k) {
    buf[k] = (grad_kernel[k] / eval.total) * std::conj(eval.far_field[k]);
  }
  fft::forward(buf, n);
  std::vector<double> grad(buf.size());
  for (std::size_t x = 0; x < buf.size(); ++x) {
    grad[x] = -2.0 * (eval.pupil_field[x] * buf[x]).imag();
  }
  return grad;
}

}  // namespace wavemo
