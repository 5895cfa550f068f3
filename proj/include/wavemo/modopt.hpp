#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wavemo/diversity.hpp"
#include "wavemo/recon_proxy.hpp"
#include "wavemo/zernike.hpp"

namespace wavemo {

using CoeffMatrix = std::vector<std::vector<double>>;  // K rows x modes

inline constexpr double kLeakySlope = 0.01;

/// Two-layer dense network G mapping a fixed input vector to K x modes
/// Zernike coefficients: out = W2 leaky_relu(W1 z + b1) + b2.
struct ModMLP {
  int k = 16;
  int hidden = 64;
  int modes = kDefaultZernikeModes;
  std::vector<double> z;   // fixed input, length modes
  std::vector<double> w1;  // hidden x modes, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // (k * modes) x hidden
  std::vector<double> b2;  // k * modes

  [[nodiscard]] std::size_t parameter_count() const;
  [[nodiscard]] std::vector<double> pack() const;
  void unpack(std::span<const double> flat);

  /// All-ones input; weights ~ N(0, 1/fan_in) for layer 1 and
  /// N(0, (output_scale^2) / hidden) for layer 2; zero biases.
  static ModMLP random(int k, int hidden, int modes, double output_scale, Rng& rng);
  static ModMLP zeros(int k, int hidden, int modes);
};

CoeffMatrix mod_mlp_forward(const ModMLP& mlp);

/// Parameter gradients (same layout as ModMLP::pack) for dL/dcoeffs.
std::vector<double> mod_mlp_backward(const ModMLP& mlp, const CoeffMatrix& grad_out);

enum class BaselineKind { none, random_zernike, random_gaussian, focus_sweep };
BaselineKind baseline_from_string(std::string_view name);

struct BaselineOptions {
  double sigma_lo = 5.0;  // random_zernike draws use the aberration distribution
  double sigma_hi = 6.0;
  double sweep_amp = 6.0;
};

/// Per-pixel std that matches the expected disk-averaged phase variance of
/// random_zernike draws: E[sigma^2] * sum_{j>=2} mean_disk(Z_j^2).
double energy_matched_pixel_sigma(const ZernikeBasis& basis, double sigma_lo, double sigma_hi);

ModulationSet generate_baseline(BaselineKind kind, int k, const ZernikeBasis& basis, Rng& rng,
                                const BaselineOptions& opts = {});

/// tau * log sum exp(v / tau).
double smooth_max(std::span<const double> values, double tau);

struct MtfOptOptions {
  int iterations = 200;
  double learning_rate = 0.05;
  double tau = 0.05;
  double init_sigma_lo = 5.0;
  double init_sigma_hi = 6.0;
};

struct MtfObjective {
  double value = 0.0;
  CoeffMatrix grad;  // d value / d coeffs
};

/// Mean over samples and frequencies of smooth_max_i MTF(aberration + gamma_i).
MtfObjective mtf_objective(const CoeffMatrix& coeffs, const ZernikeBasis& basis,
                           const PupilMask& mask, std::span<const AberrationSample> samples,
                           double tau, bool with_grad = true);

/// Gradient ascent on mtf_objective from a random-Zernike start; returns the
/// best iterate seen.
ModulationSet mtf_direct_opt(int k, const ZernikeBasis& basis, const PupilMask& mask,
                             std::span<const AberrationSample> samples, Rng& rng,
                             const MtfOptOptions& opts = {});

struct TrainConfig {
  int iterations = 5000;
  int k = 16;
  int hidden = 64;
  int batch = 1;
  double learning_rate = 1e-3;        // MLP
  double proxy_learning_rate = 1e-3;  // proxy parameters
  double sigma_lo = 5.0;
  double sigma_hi = 6.0;
  double noise_sigma = 0.01;
  double init_scale = 1.0;  // std of the initial modulation coefficients
  std::uint64_t seed = 0;
  SceneOptions scenes{};

  void validate() const;
};

/// One training example with its noise realization fixed.
struct EndToEndSample {
  Image scene;
  PhaseMap aberration;
  std::vector<Image> noise;  // K frames, may be all zero
};

struct EndToEndEvaluation {
  double loss = 0.0;
  double psnr = 0.0;                // mean over samples
  std::vector<double> grad_mlp;     // ModMLP::pack layout
  std::vector<double> grad_proxy;   // ProxyParams::pack layout
};

/// sum over samples of ||proxy(Y(G(z))) - x||^2 with gradients through proxy,
/// frames, PSFs, phases and the MLP.
EndToEndEvaluation end_to_end(const ModMLP& mlp, const ProxyParams& proxy,
                              const ZernikeBasis& basis, const PupilMask& mask,
                              std::span<const EndToEndSample> samples);

struct LearnedModulations {
  ModulationSet modulations;
  ProxyParams proxy;
  ModMLP mlp;
  TrainHistory history;
};

LearnedModulations train_modulations(const TrainConfig& cfg, const ZernikeBasis& basis,
                                     const PupilMask& mask);

}  // namespace wavemo
