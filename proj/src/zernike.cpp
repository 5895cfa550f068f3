#include "wavemo/zernike.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace wavemo {
namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

double radial_poly(int n, int m, double rho) {
  double sum = 0.0;
  for (int k = 0; k <= (n - m) / 2; ++k) {
    const double num = ((k % 2) ? -1.0 : 1.0) * factorial(n - k);
    const double den = factorial(k) * factorial((n + m) / 2 - k) * factorial((n - m) / 2 - k);
    sum += num / den * std::pow(rho, n - 2 * k);
  }
  return sum;
}

}  // namespace

std::pair<int, int> noll_to_nm(int j) {
  if (j < 1) throw std::invalid_argument("Noll index must be >= 1");
  int n = 0;
  int j1 = j - 1;
  while (j1 > n) {
    ++n;
    j1 -= n;
  }
  const int sign = (j % 2 == 0) ? 1 : -1;
  const int m = sign * ((n % 2) + 2 * ((j1 + ((n + 1) % 2)) / 2));
  return {n, m};
}

double zernike_value(int j, double rho, double theta) {
  if (rho > 1.0) return 0.0;
  const auto [n, m] = noll_to_nm(j);
  const int am = std::abs(m);
  const double r = radial_poly(n, am, rho);
  if (m == 0) return std::sqrt(n + 1.0) * r;
  const double norm = std::sqrt(2.0 * (n + 1.0));
  return m > 0 ? norm * r * std::cos(am * theta) : norm * r * std::sin(am * theta);
}

DiskCoord disk_coord(const GridSpec& grid, int row, int col) {
  const double radius = grid.pupil_radius_px();
  const double half = grid.n / 2;
  const double x = (col - half) / radius;
  const double y = (row - half) / radius;
  return {std::hypot(x, y), std::atan2(y, x)};
}

bool inside_disk(const GridSpec& grid, int row, int col) {
  return disk_coord(grid, row, col).rho < 1.0;
}

ZernikeBasis::ZernikeBasis(const GridSpec& grid, int count) : grid_(grid) {
  grid_.validate();
  if (count < 1) throw ConfigError("Zernike mode count must be >= 1");
  modes_.reserve(count);
  for (int j = 1; j <= count; ++j) {
    PhaseMap mode(grid_);
    for (int r = 0; r < grid_.n; ++r) {
      for (int c = 0; c < grid_.n; ++c) {
        const auto [rho, theta] = disk_coord(grid_, r, c);
        if (rho < 1.0) mode(r, c) = zernike_value(j, rho, theta);
      }
    }
    modes_.push_back(std::move(mode));
  }
}

PhaseMap ZernikeBasis::compose(std::span<const double> coeffs) const {
  if (coeffs.size() != modes_.size()) {
    throw std::invalid_argument("compose_phase: expected " + std::to_string(modes_.size()) +
                                " coefficients, got " + std::to_string(coeffs.size()));
  }
  PhaseMap out(grid_);
  for (std::size_t j = 0; j < modes_.size(); ++j) {
    if (coeffs[j] == 0.0) continue;
    const auto& mode = modes_[j];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += coeffs[j] * mode[i];
  }
  return out;
}

std::vector<double> ZernikeBasis::adjoint(std::span<const double> field) const {
  if (field.size() != grid_.pixels()) throw std::invalid_argument("adjoint: field size mismatch");
  std::vector<double> out(modes_.size(), 0.0);
  for (std::size_t j = 0; j < modes_.size(); ++j) {
    double acc = 0.0;
    const auto& mode = modes_[j];
    for (std::size_t i = 0; i < field.size(); ++i) acc += field[i] * mode[i];
    out[j] = acc;
  }
  return out;
}

AberrationSample sample_aberration(Rng& rng, const ZernikeBasis& basis, double sigma_lo,
                                   double sigma_hi) {
  if (sigma_lo < 0.0) throw std::invalid_argument("sample_aberration: sigma_lo must be >= 0");
  if (sigma_hi < sigma_lo) throw std::invalid_argument("sample_aberration: sigma_hi < sigma_lo");
  const int count = basis.count();
  AberrationSample s{std::vector<double>(count, 0.0), std::vector<double>(count, 0.0)};
  std::uniform_real_distribution<double> uniform(sigma_lo, sigma_hi);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int j = 1; j < count; ++j) {
    const double sigma = sigma_hi > sigma_lo ? uniform(rng) : sigma_lo;
    s.sigmas[j] = sigma;
    s.coeffs[j] = sigma * normal(rng);
  }
  return s;
}

}  // namespace wavemo
