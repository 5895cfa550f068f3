#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "wavemo/diversity.hpp"
#include "wavemo/field.hpp"
#include "wavemo/optics.hpp"
#include "wavemo/scene.hpp"
#include "wavemo/zernike.hpp"

namespace wavemo {

/// Learnable multi-frame spectral combiner
///   x = Re IDFT[ sum_i W_i(w) Y_i(w) / (1 + softplus(rho(w))) ] + bias.
struct ProxyParams {
  GridSpec grid;
  std::vector<std::vector<Complex>> weights;  // K planes, DC at index 0
  std::vector<double> reg_pre;                // rho; lambda = softplus(rho) >= 0
  double bias = 0.0;

  [[nodiscard]] int k() const { return static_cast<int>(weights.size()); }
  [[nodiscard]] std::vector<double> reg_spectrum() const;

  /// Flat parameter vector: (re, im) per weight, then rho, then bias.
  [[nodiscard]] std::vector<double> pack() const;
  void unpack(std::span<const double> flat);
  [[nodiscard]] std::size_t parameter_count() const;

  /// Zero weights of the given shape; rho = 0.
  static ProxyParams zeros(const GridSpec& grid, int k);
};

double softplus(double x);
double sigmoid(double x);

/// W_i = conj(H0) / (K (|H0|^2 + 0.1)) with H0 the unaberrated OTF, rho = 0, bias = 0.
ProxyParams proxy_init(const PupilMask& mask, int k);

Image proxy_forward(std::span<const Image> frames, const ProxyParams& params);
inline Image proxy_forward(const MeasurementStack& stack, const ProxyParams& params) {
  return proxy_forward(stack.frames, params);
}

struct ProxyGradients {
  double loss = 0.0;
  Image reconstruction;
  ProxyParams params;                       // same layout as the parameters
  std::vector<std::vector<double>> frames;  // dL/dy_i
};

/// ||proxy(Y) - scene||^2 with exact gradients for every parameter group and
/// every frame.
ProxyGradients proxy_loss_grads(const Image& scene, std::span<const Image> frames,
                                const ProxyParams& params);
inline ProxyGradients proxy_loss_grads(const Image& scene, const MeasurementStack& stack,
                                       const ProxyParams& params) {
  return proxy_loss_grads(scene, stack.frames, params);
}

using SceneSampler = std::function<Image(Rng&)>;

SceneSampler procedural_sampler(const GridSpec& grid, SceneOptions opts = {});
/// Cycles through a fixed list. Throws when the list is empty.
SceneSampler list_sampler(std::vector<Image> scenes);

struct ProxyTrainOptions {
  int iterations = 2000;
  int batch = 1;
  double learning_rate = 1e-3;
  double sigma_lo = 5.0;  // aberration coefficient std bounds
  double sigma_hi = 6.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct TrainHistory {
  std::vector<double> loss;
  std::vector<double> psnr;
};

struct ProxyFit {
  ProxyParams params;
  TrainHistory history;
};

/// Adam over the proxy parameters only, with the modulations frozen. Each
/// iteration draws fresh scenes, aberrations and noise.
ProxyFit fit_proxy(const SceneSampler& dataset, const ModulationSet& mods, const PupilMask& mask,
                   const ZernikeBasis& basis, const ProxyTrainOptions& opts,
                   std::optional<ProxyParams> init = std::nullopt);

}  // namespace wavemo
