#pragma once

#include <optional>
#include <vector>

#include "wavemo/adam.hpp"
#include "wavemo/diversity.hpp"
#include "wavemo/field.hpp"
#include "wavemo/zernike.hpp"

namespace wavemo {

/// Joint estimate of the scene (raw pixels) and aberration (Zernike coefficients).
struct ReconState {
  Image scene_est;
  std::vector<double> aber_coeffs;
  int iteration = 0;
  std::vector<double> loss_history;
};

struct ReconOptions {
  int max_iters = 2000;
  double step_scene = 1e-2;
  double step_coeffs = 1e-2;
  AdamSettings adam{};
  /// Weight of the smoothed isotropic total variation of the scene estimate.
  double tv_weight = 0.0;
  double tv_eps = 1e-3;
  /// Stop when |L_prev - L| <= tolerance * L_prev.
  double tolerance = 1e-12;
  /// Stop when L <= loss_floor * sum_i ||y_i||^2.
  double loss_floor = 1e-24;
  /// When false the coefficients stay at their initial value and K = 1 is allowed.
  bool optimize_aberration = true;

  void validate() const;
};

struct PdiEvaluation {
  double loss = 0.0;
  std::vector<double> grad_scene;
  std::vector<double> grad_coeffs;
};

/// sum_i ||y_i - h(phi + gamma_i) * x||^2 + tv_weight * TV(x).
double pdi_loss(const MeasurementStack& stack, const ReconState& state, const PupilMask& mask,
                const ZernikeBasis& basis, double tv_weight = 0.0, double tv_eps = 1e-3);

/// Loss and exact gradients with respect to the scene pixels and the
/// aberration coefficients.
PdiEvaluation pdi_gradients(const MeasurementStack& stack, const ReconState& state,
                            const PupilMask& mask, const ZernikeBasis& basis,
                            double tv_weight = 0.0, double tv_eps = 1e-3);

/// Smoothed isotropic TV with circular forward differences, and its gradient.
double total_variation(const Image& x, double eps, std::vector<double>* grad = nullptr);

/// Default starting point: frame average for the scene, zero coefficients.
ReconState initial_state(const MeasurementStack& stack, const ZernikeBasis& basis);

/// Adam on (scene, coefficients) until max_iters or a stopping rule fires.
/// loss_history[t] is the loss before update t; the last entry is the loss of
/// the returned state.
ReconState reconstruct(const MeasurementStack& stack, const PupilMask& mask,
                       const ZernikeBasis& basis, const ReconOptions& opts,
                       std::optional<ReconState> init = std::nullopt);

/// Minimum-norm least-squares multi-frame deconvolution for known PSFs:
/// X = sum conj(H_i) Y_i / sum |H_i|^2, zero where sum |H_i|^2 <= cutoff.
Image multiframe_least_squares(const MeasurementStack& stack, const PhaseMap& aberration,
                               const PupilMask& mask, double cutoff = 1e-14);

}  // namespace wavemo
