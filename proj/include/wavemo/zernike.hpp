#pragma once

#include <random>
#include <span>
#include <utility>
#include <vector>

#include "wavemo/field.hpp"

namespace wavemo {

using Rng = std::mt19937_64;

inline constexpr int kDefaultZernikeModes = 28;

/// Radial order n and signed azimuthal frequency m for Noll index j >= 1.
/// Negative m selects the sine term.
std::pair<int, int> noll_to_nm(int j);

/// Noll-normalized Zernike polynomial evaluated on the unit disk; 0 for r > 1.
double zernike_value(int j, double rho, double theta);

/// Unit-disk coordinates of pixel (row, col); rho > 1 outside the pupil.
struct DiskCoord {
  double rho;
  double theta;
};
DiskCoord disk_coord(const GridSpec& grid, int row, int col);
bool inside_disk(const GridSpec& grid, int row, int col);

/// Noll-indexed Zernike modes Z_1..Z_count sampled on a pupil grid.
class ZernikeBasis {
 public:
  ZernikeBasis(const GridSpec& grid, int count);

  [[nodiscard]] const GridSpec& grid() const { return grid_; }
  [[nodiscard]] int count() const { return static_cast<int>(modes_.size()); }
  /// Zero-based: mode(0) is piston (Noll j = 1).
  [[nodiscard]] const PhaseMap& mode(int index) const { return modes_.at(index); }

  /// sum_j coeffs[j] * Z_j.
  [[nodiscard]] PhaseMap compose(std::span<const double> coeffs) const;
  /// Adjoint of compose: out[j] = <field, Z_j> summed over all pixels.
  [[nodiscard]] std::vector<double> adjoint(std::span<const double> field) const;

 private:
  GridSpec grid_;
  std::vector<PhaseMap> modes_;
};

inline ZernikeBasis build_basis(const GridSpec& grid, int count = kDefaultZernikeModes) {
  return ZernikeBasis(grid, count);
}
inline PhaseMap compose_phase(const ZernikeBasis& basis, std::span<const double> coeffs) {
  return basis.compose(coeffs);
}

struct AberrationSample {
  std::vector<double> coeffs;  // radians per Noll mode; coeffs[0] (piston) == 0
  std::vector<double> sigmas;  // per-mode standard deviation drawn for this sample
};

/// Draws sigma_j ~ U[sigma_lo, sigma_hi] and coeff_j ~ N(0, sigma_j^2) for every
/// non-piston mode. Piston is always zero.
AberrationSample sample_aberration(Rng& rng, const ZernikeBasis& basis, double sigma_lo = 5.0,
                                   double sigma_hi = 6.0);

}  // namespace wavemo
