#pragma once

#include "wavemo/field.hpp"
#include "wavemo/zernike.hpp"

namespace wavemo {

struct SceneOptions {
  int blobs = 6;
  int strokes = 3;
  double stroke_width_px = 1.0;
  double background = 0.1;
};

/// Procedural test scene: Gaussian blobs for smooth content plus anti-aliased
/// polyline strokes for edges, clipped to [0, 1].
Image procedural_scene(const GridSpec& grid, Rng& rng, const SceneOptions& opts = {});

/// Independent uniform [0, 1) pixels.
Image white_noise_scene(const GridSpec& grid, Rng& rng);

}  // namespace wavemo
