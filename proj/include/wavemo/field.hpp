#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wavemo/errors.hpp"

namespace wavemo {

using Complex = std::complex<double>;

/// Square sampling grid shared by pupil, phase, PSF and image planes.
///
/// The unit disk spans 2 * aperture_radius_frac * (n / 2) pixels, centred on
/// pixel (n/2, n/2).
struct GridSpec {
  int n = 64;
  double aperture_radius_frac = 0.5;

  void validate() const {
    if (n < 8 || (n & (n - 1)) != 0) {
      throw ConfigError("grid size must be a power of two >= 8, got " + std::to_string(n));
    }
    if (!(aperture_radius_frac > 0.0 && aperture_radius_frac <= 1.0)) {
      throw ConfigError("aperture_radius_frac must lie in (0, 1]");
    }
  }
  [[nodiscard]] std::size_t pixels() const { return static_cast<std::size_t>(n) * n; }
  [[nodiscard]] double pupil_radius_px() const { return aperture_radius_frac * n / 2.0; }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Row-major n x n plane tagged by its physical meaning.
///
/// Tags keep a PhaseMap from being passed where an Image is expected while
/// sharing storage and element access.
template <typename Tag, typename T = double>
class Plane {
 public:
  using value_type = T;

  Plane() = default;
  explicit Plane(const GridSpec& grid, T fill = T{}) : grid_(grid), values_(grid.pixels(), fill) {}
  Plane(const GridSpec& grid, std::vector<T> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.pixels()) {
      throw std::invalid_argument("plane value count does not match grid");
    }
  }

  [[nodiscard]] const GridSpec& grid() const { return grid_; }
  [[nodiscard]] int n() const { return grid_.n; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }

  T& operator()(int row, int col) { return values_[static_cast<std::size_t>(row) * grid_.n + col]; }
  const T& operator()(int row, int col) const {
    return values_[static_cast<std::size_t>(row) * grid_.n + col];
  }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  [[nodiscard]] std::span<T> values() { return values_; }
  [[nodiscard]] std::span<const T> values() const { return values_; }
  [[nodiscard]] std::vector<T>& storage() { return values_; }
  [[nodiscard]] const std::vector<T>& storage() const { return values_; }

  Plane& operator+=(const Plane& other) {
    require_same_grid(other, "plane +=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
  }
  Plane& operator*=(T s) {
    for (auto& v : values_) v *= s;
    return *this;
  }
  friend Plane operator+(Plane a, const Plane& b) { return a += b; }
  friend Plane operator*(T s, Plane a) { return a *= s; }

  template <typename OtherTag, typename U>
  void require_same_grid(const Plane<OtherTag, U>& other, const char* what) const {
    if (!(grid_ == other.grid())) {
      throw std::invalid_argument(std::string(what) + ": grid mismatch");
    }
  }

  template <typename OtherTag>
  [[nodiscard]] Plane<OtherTag, T> retag() const {
    return Plane<OtherTag, T>(grid_, values_);
  }

 private:
  GridSpec grid_{};
  std::vector<T> values_;
};

struct PhaseTag;
struct ImageTag;
struct MaskTag;
struct PsfTag;
struct OtfTag;
struct MtfTag;

/// Phase delay in radians over the pupil grid; zero outside the disk.
using PhaseMap = Plane<PhaseTag>;
/// Scene or measurement intensities, nominal range [0, 1].
using Image = Plane<ImageTag>;
/// Binary aperture.
using PupilMask = Plane<MaskTag>;
/// DC-centred, unit-sum point spread function.
using Psf = Plane<PsfTag>;
/// Complex transfer function with DC at index (0, 0).
using Otf = Plane<OtfTag, Complex>;
/// Magnitude spectrum with DC at index (0, 0).
using Mtf = Plane<MtfTag>;

/// Circular shift by n/2 along both axes. For even n this is its own inverse,
/// so it serves as both fftshift and ifftshift.
template <typename Tag, typename T>
Plane<Tag, T> half_shift(const Plane<Tag, T>& in) {
  Plane<Tag, T> out(in.grid());
  const int n = in.n();
  const int h = n / 2;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) out((r + h) % n, (c + h) % n) = in(r, c);
  }
  return out;
}

}  // namespace wavemo
