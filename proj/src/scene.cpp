#include "wavemo/scene.hpp"

#include <algorithm>
#include <cmath>

namespace wavemo {
namespace {

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

}  // namespace

Image procedural_scene(const GridSpec& grid, Rng& rng, const SceneOptions& opts) {
  grid.validate();
  const int n = grid.n;
  Image img(grid, opts.background);
  std::uniform_real_distribution<double> pos(0.1 * n, 0.9 * n);
  std::uniform_real_distribution<double> amp(0.2, 0.7);
  std::uniform_real_distribution<double> width(0.03 * n, 0.12 * n);

  for (int b = 0; b < opts.blobs; ++b) {
    const double cy = pos(rng), cx = pos(rng), a = amp(rng), s = width(rng);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
        img(r, c) += a * std::exp(-d2 / (2.0 * s * s));
      }
    }
  }

  std::uniform_int_distribution<int> vertices(2, 4);
  std::uniform_real_distribution<double> level(0.5, 1.0);
  for (int s = 0; s < opts.strokes; ++s) {
    const int nv = vertices(rng);
    std::vector<std::pair<double, double>> pts(nv);
    for (auto& p : pts) p = {pos(rng), pos(rng)};
    const double value = level(rng);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        double d = 1e9;
        for (int v = 0; v + 1 < nv; ++v) {
          d = std::min(d, segment_distance(c, r, pts[v].first, pts[v].second, pts[v + 1].first,
                                           pts[v + 1].second));
        }
        // one-pixel linear falloff at the stroke edge
        const double cover = std::clamp(opts.stroke_width_px / 2.0 + 0.5 - d, 0.0, 1.0);
        img(r, c) = std::max(img(r, c), cover * value + (1.0 - cover) * img(r, c));
      }
    }
  }
  for (auto& v : img.values()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

Image white_noise_scene(const GridSpec& grid, Rng& rng) {
  Image img(grid);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : img.values()) v = u(rng);
  return img;
}

}  // namespace wavemo
