#pragma once

#include <span>
#include <vector>

#include "wavemo/field.hpp"

namespace wavemo::fft {

// Forward transforms are unnormalized; inverse transforms carry 1/n^2, so
// sum |DFT(a)|^2 = n^2 * sum |a|^2.

/// In-place forward 2-D DFT of an n x n row-major buffer.
void forward(std::span<Complex> data, int n);
/// In-place inverse 2-D DFT including the 1/n^2 factor.
void inverse(std::span<Complex> data, int n);

std::vector<Complex> forward_real(std::span<const double> data, int n);
/// Real part of the inverse transform.
std::vector<double> inverse_real(std::span<const Complex> data, int n);

}  // namespace wavemo::fft
