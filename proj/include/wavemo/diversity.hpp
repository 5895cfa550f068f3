#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wavemo/field.hpp"
#include "wavemo/optics.hpp"
#include "wavemo/zernike.hpp"

namespace wavemo {

enum class Provenance { none, random_zernike, random_gaussian, focus_sweep, mtf_opt, learned };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view name);

/// Ordered set of K known pupil phase patterns.
struct ModulationSet {
  std::vector<PhaseMap> patterns;
  Provenance provenance = Provenance::none;
  /// K rows of Zernike coefficients when the set is Zernike-parameterized.
  std::optional<std::vector<std::vector<double>>> coeffs;

  [[nodiscard]] int k() const { return static_cast<int>(patterns.size()); }
  /// Throws when K = 0, grids differ, or a `none` set is not a single zero pattern.
  void validate() const;

  static ModulationSet none(const GridSpec& grid);
  static ModulationSet from_coeffs(const ZernikeBasis& basis,
                                   std::vector<std::vector<double>> coeffs, Provenance provenance);
};

struct MeasurementStack {
  std::vector<Image> frames;
  ModulationSet modulations;
  double noise_sigma = 0.0;
  std::optional<AberrationSample> aberration_truth;
  std::optional<Image> scene_truth;

  [[nodiscard]] int k() const { return static_cast<int>(frames.size()); }
  [[nodiscard]] const GridSpec& grid() const { return frames.at(0).grid(); }
};

/// frame_i = convolve(scene, psf(mask, aberration + gamma_i)) + noise_i.
/// Noise is drawn frame by frame from rng.
MeasurementStack capture_stack(const Image& scene, const PhaseMap& aberration,
                               const ModulationSet& mods, const PupilMask& mask, double sigma,
                               Rng& rng);

/// Per-frequency maximum over the modulated MTFs.
Mtf combined_mtf(const PhaseMap& aberration, const ModulationSet& mods, const PupilMask& mask);

struct RadialProfile {
  std::vector<double> freq;   // bin centres, cycles per grid
  std::vector<double> value;  // mean magnitude in the annulus
  std::vector<int> count;     // pixels per bin
};

/// Annular means of a DC-at-origin spectrum. Bin b is centred at b * step with
/// step = (n/2) / (bins - 1), so bin 0 holds DC and the last bin Nyquist.
/// Frequencies beyond Nyquist + step/2 are ignored. The bin count is capped at
/// n/2 + 1 so that no annulus is empty.
RadialProfile radial_profile(const Mtf& spectrum, int nbins = 32);

}  // namespace wavemo
