#include "wavemo/metrics.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <tuple>

#include "wavemo/fft.hpp"

namespace wavemo {
namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow * kWindow> gaussian_window() {
  std::array<double, kWindow * kWindow> w{};
  const int h = kWindow / 2;
  double sum = 0.0;
  for (int r = 0; r < kWindow; ++r) {
    for (int c = 0; c < kWindow; ++c) {
      const double d2 = (r - h) * (r - h) + (c - h) * (c - h);
      w[r * kWindow + c] = std::exp(-d2 / (2.0 * kWindowSigma * kWindowSigma));
      sum += w[r * kWindow + c];
    }
  }
  for (auto& v : w) v /= sum;
  return w;
}

int signed_freq(int k, int n) { return k < n / 2 ? k : k - n; }

}  // namespace

double psnr(const Image& a, const Image& b, double peak) {
  a.require_same_grid(b, "psnr");
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Image& a, const Image& b) {
  a.require_same_grid(b, "ssim");
  const int n = a.n();
  if (n < kWindow) throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  static const auto window = gaussian_window();
  double total = 0.0;
  int positions = 0;
  for (int r0 = 0; r0 + kWindow <= n; ++r0) {
    for (int c0 = 0; c0 + kWindow <= n; ++c0) {
      double mu_a = 0, mu_b = 0, saa = 0, sbb = 0, sab = 0;
      for (int r = 0; r < kWindow; ++r) {
        for (int c = 0; c < kWindow; ++c) {
          const double w = window[r * kWindow + c];
          const double va = a(r0 + r, c0 + c);
          const double vb = b(r0 + r, c0 + c);
          mu_a += w * va;
          mu_b += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      }
      const double var_a = saa - mu_a * mu_a;
      const double var_b = sbb - mu_b * mu_b;
      const double cov = sab - mu_a * mu_b;
      const double num = (2 * mu_a * mu_b + kC1) * (2 * cov + kC2);
      const double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
      total += num / den;
      ++positions;
    }
  }
  return total / positions;
}

std::pair<double, double> aggregate(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("aggregate: empty list");
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (values.size() - 1))};
}

Image register_to(const Image& estimate, const Image& reference) {
  estimate.require_same_grid(reference, "register_to");
  const int n = estimate.n();
  const auto e = fft::forward_real(estimate.values(), n);
  const auto r = fft::forward_real(reference.values(), n);

  // c(s) = sum_x e(x - s) r(x); integer peak first.
  std::vector<Complex> cross(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) cross[i] = std::conj(e[i]) * r[i];
  fft::inverse(cross, n);
  std::size_t best = 0;
  for (std::size_t i = 1; i < cross.size(); ++i) {
    if (cross[i].real() > cross[best].real()) best = i;
  }
  double sy = signed_freq(static_cast<int>(best) / n, n);
  double sx = signed_freq(static_cast<int>(best) % n, n);

  std::vector<Complex> er(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) er[i] = e[i] * std::conj(r[i]);
  auto score = [&](double ty, double tx) {
    double acc = 0.0;
    for (int ky = 0; ky < n; ++ky) {
      const double fy = signed_freq(ky, n);
      for (int kx = 0; kx < n; ++kx) {
        const double fx = signed_freq(kx, n);
        const double ang = -2.0 * std::numbers::pi * (fy * ty + fx * tx) / n;
        acc += (er[ky * n + kx] * std::polar(1.0, ang)).real();
      }
    }
    return acc;
  };
  // Coarse-to-fine local search around the integer peak.
  double step = 0.5;
  double best_score = score(sy, sx);
  for (int level = 0; level < 12; ++level) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (const auto& [dy, dx] : std::array<std::pair<int, int>, 8>{
               {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}}) {
        const double s = score(sy + dy * step, sx + dx * step);
        if (s > best_score) {
          best_score = s;
          sy += dy * step;
          sx += dx * step;
          moved = true;
        }
      }
    }
    step *= 0.5;
  }

  std::vector<Complex> shifted(e.size());
  for (int ky = 0; ky < n; ++ky) {
    for (int kx = 0; kx < n; ++kx) {
      const double ang = -2.0 * std::numbers::pi * (signed_freq(ky, n) * sy + signed_freq(kx, n) * sx) / n;
      shifted[ky * n + kx] = e[ky * n + kx] * std::polar(1.0, ang);
    }
  }
  return Image(estimate.grid(), fft::inverse_real(shifted, n));
}

MetricReport MetricReport::from_items(std::vector<MetricItem> items) {
  MetricReport rep;
  std::vector<double> p, s;
  for (const auto& it : items) {
    p.push_back(it.psnr);
    s.push_back(it.ssim);
  }
  std::tie(rep.mean_psnr, rep.sd_psnr) = aggregate(p);
  std::tie(rep.mean_ssim, rep.sd_ssim) = aggregate(s);
  rep.per_item = std::move(items);
  return rep;
}

}  // namespace wavemo
