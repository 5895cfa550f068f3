#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wavemo/field.hpp"

namespace wavemo {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(peak^2 / MSE), capped at 99 dB when the images are identical.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
/// C2 = 0.03^2 at unit peak, averaged over every window position that fits
/// inside the image.
double ssim(const Image& a, const Image& b);

/// Mean and sample standard deviation (n - 1). A single value has SD 0.
std::pair<double, double> aggregate(std::span<const double> values);

/// Circularly shifts `estimate` (sub-pixel, via a spectral phase ramp) to best
/// match `reference` in the least-squares sense.
///
/// Global tip/tilt of the aberration moves the scene estimate without
/// changing the data fit, so blind reconstructions are scored after this
/// registration.
Image register_to(const Image& estimate, const Image& reference);

struct MetricItem {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<MetricItem> per_item;
  double mean_psnr = 0.0;
  double sd_psnr = 0.0;
  double mean_ssim = 0.0;
  double sd_ssim = 0.0;

  static MetricReport from_items(std::vector<MetricItem> items);
};

}  // namespace wavemo
