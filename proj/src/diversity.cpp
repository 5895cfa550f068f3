#include "wavemo/diversity.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "wavemo/fft.hpp"

namespace wavemo {
namespace {

constexpr std::array<std::pair<Provenance, std::string_view>, 6> kProvenanceNames{{
    {Provenance::none, "none"},
    {Provenance::random_zernike, "random_zernike"},
    {Provenance::random_gaussian, "random_gaussian"},
    {Provenance::focus_sweep, "focus_sweep"},
    {Provenance::mtf_opt, "mtf_opt"},
    {Provenance::learned, "learned"},
}};

PhaseMap modulated_phase(const PhaseMap& aberration, const PhaseMap& pattern) {
  return aberration + pattern;
}

}  // namespace

std::string_view to_string(Provenance p) {
  for (const auto& [value, name] : kProvenanceNames) {
    if (value == p) return name;
  }
  return "unknown";
}

Provenance provenance_from_string(std::string_view name) {
  for (const auto& [value, label] : kProvenanceNames) {
    if (label == name) return value;
  }
  throw std::invalid_argument("unknown modulation kind '" + std::string(name) + "'");
}

void ModulationSet::validate() const {
  if (patterns.empty()) throw std::invalid_argument("modulation set is empty");
  for (const auto& p : patterns) patterns.front().require_same_grid(p, "modulation set");
  if (provenance == Provenance::none) {
    const bool zero = std::all_of(patterns.front().values().begin(),
                                  patterns.front().values().end(), [](double v) { return v == 0.0; });
    if (patterns.size() != 1 || !zero) {
      throw std::invalid_argument("provenance 'none' requires exactly one all-zero pattern");
    }
  }
  if (coeffs && coeffs->size() != patterns.size()) {
    throw std::invalid_argument("modulation coefficient rows do not match K");
  }
}

ModulationSet ModulationSet::none(const GridSpec& grid) {
  return ModulationSet{{PhaseMap(grid)}, Provenance::none, std::nullopt};
}

ModulationSet ModulationSet::from_coeffs(const ZernikeBasis& basis,
                                         std::vector<std::vector<double>> coeffs,
                                         Provenance provenance) {
  ModulationSet set;
  set.provenance = provenance;
  for (const auto& row : coeffs) set.patterns.push_back(basis.compose(row));
  set.coeffs = std::move(coeffs);
  return set;
}

MeasurementStack capture_stack(const Image& scene, const PhaseMap& aberration,
                               const ModulationSet& mods, const PupilMask& mask, double sigma,
                               Rng& rng) {
  if (mods.patterns.empty()) throw std::invalid_argument("capture_stack: empty modulation set");
  if (sigma < 0.0) throw std::invalid_argument("capture_stack: sigma must be >= 0");
  scene.require_same_grid(aberration, "capture_stack");
  scene.require_same_grid(mask, "capture_stack");
  for (const auto& p : mods.patterns) scene.require_same_grid(p, "capture_stack");

  const int n = scene.n();
  const auto scene_spec = fft::forward_real(scene.values(), n);
  MeasurementStack stack;
  stack.modulations = mods;
  stack.noise_sigma = sigma;
  for (const auto& pattern : mods.patterns) {
    const auto ev = evaluate_psf(mask, modulated_phase(aberration, pattern));
    Image frame(scene.grid(), convolve_spectral(scene_spec, ev.otf, n));
    stack.frames.push_back(add_noise(frame, sigma, rng));
  }
  return stack;
}

Mtf combined_mtf(const PhaseMap& aberration, const ModulationSet& mods, const PupilMask& mask) {
  if (mods.patterns.empty()) throw std::invalid_argument("combined_mtf: empty modulation set");
  Mtf out(mask.grid(), 0.0);
  for (const auto& pattern : mods.patterns) {
    const auto ev = evaluate_psf(mask, modulated_phase(aberration, pattern));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], std::abs(ev.otf[i]));
  }
  return out;
}

RadialProfile radial_profile(const Mtf& spectrum, int nbins) {
  if (nbins < 2) throw std::invalid_argument("radial_profile: need at least 2 bins");
  const int n = spectrum.n();
  const int half = n / 2;
  nbins = std::min(nbins, half + 1);
  const double step = static_cast<double>(half) / (nbins - 1);

  RadialProfile prof;
  prof.freq.resize(nbins);
  prof.value.assign(nbins, 0.0);
  prof.count.assign(nbins, 0);
  for (int b = 0; b < nbins; ++b) prof.freq[b] = b * step;
  for (int r = 0; r < n; ++r) {
    const int fy = r < half ? r : r - n;
    for (int c = 0; c < n; ++c) {
      const int fx = c < half ? c : c - n;
      const double w = std::hypot(static_cast<double>(fx), static_cast<double>(fy));
      const int b = static_cast<int>(std::floor(w / step + 0.5));
      if (b >= nbins) continue;
      prof.value[b] += spectrum(r, c);
      prof.count[b] += 1;
    }
  }
  for (int b = 0; b < nbins; ++b) prof.value[b] /= prof.count[b];
  return prof;
}

}  // namespace wavemo
