#pragma once

#include <span>
#include <utility>
#include <vector>

#include "wavemo/field.hpp"
#include "wavemo/zernike.hpp"

namespace wavemo {

/// Binary disk of radius aperture_radius_frac * n / 2 centred on pixel (n/2, n/2).
PupilMask pupil_mask(const GridSpec& grid);

/// Incoherent PSF |DFT(m * exp(j phi))|^2, shifted so zero lag sits at the
/// centre pixel and normalized to unit sum.
Psf psf(const PupilMask& mask, const PhaseMap& phase);

/// OTF = DFT(PSF moved back to the origin), MTF = |OTF|.
/// Throws ContractError when the PSF does not sum to one.
std::pair<Otf, Mtf> otf_mtf(const Psf& psf);

/// Circular convolution through the spectral product.
Image convolve(const Image& image, const Psf& psf);

/// Adds i.i.d. N(0, sigma^2) to every pixel. No clipping.
Image add_noise(const Image& image, double sigma, Rng& rng);

/// Intermediate quantities of one PSF evaluation, kept for the backward pass.
struct PsfEvaluation {
  std::vector<Complex> pupil_field;  // m * exp(j phi)
  std::vector<Complex> far_field;    // DFT(pupil_field)
  std::vector<double> kernel;        // origin-indexed PSF, unit sum
  std::vector<Complex> otf;          // DFT(kernel)
  double total = 0.0;                // sum |far_field|^2 before normalization
  int n = 0;
};

PsfEvaluation evaluate_psf(const PupilMask& mask, const PhaseMap& phase);

/// Vector-Jacobian product of the normalized origin-indexed kernel with
/// respect to the pupil phase. grad_kernel holds dL/dkernel.
///
/// The normalizer sum |far_field|^2 = n^2 * sum m^2 does not depend on phi,
/// so only the numerator contributes.
std::vector<double> psf_phase_vjp(const PsfEvaluation& eval, std::span<const double> grad_kernel);

/// Spectral product helpers on origin-indexed data.
std::vector<double> convolve_spectral(std::span<const Complex> image_spectrum,
                                      std::span<const Complex> otf, int n);
/// Circular cross-correlation: out[d] = sum_x a[x] * b[x - d].
std::vector<double> correlate(std::span<const double> a, std::span<const double> b, int n);

}  // namespace wavemo
