#include "wavemo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "wavemo/errors.hpp"
#include "wavemo/modopt.hpp"
#include "wavemo/optics.hpp"
#include "wavemo/recon_iterative.hpp"
#include "wavemo/recon_proxy.hpp"
#include "wavemo/scene.hpp"

namespace wavemo {
namespace {

constexpr double kStep = 1e-5;
constexpr double kThreshold = 1e-4;
constexpr double kChainThreshold = 1e-3;

using Objective = std::function<double(const std::vector<double>&)>;

struct GroupResult {
  double rel_error = 0.0;
  int checked = 0;
};

// The argmax of |analytic| is always checked so that a group never passes on
// coordinates whose gradient is numerically zero.
std::vector<std::size_t> sample_coords(const std::vector<double>& analytic, int count, Rng& rng) {
  std::vector<std::size_t> all(analytic.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min<std::size_t>(all.size(), static_cast<std::size_t>(count)));
  const auto peak = static_cast<std::size_t>(
      std::max_element(analytic.begin(), analytic.end(),
                       [](double a, double b) { return std::abs(a) < std::abs(b); }) -
      analytic.begin());
  if (std::find(all.begin(), all.end(), peak) == all.end()) all.push_back(peak);
  return all;
}

GroupResult check_group(const Objective& f, const std::vector<double>& x0,
                        const std::vector<double>& analytic, bool flip, int count, Rng& rng) {
  if (analytic.size() != x0.size()) throw ContractError("gradcheck: gradient size mismatch");
  const auto coords = sample_coords(analytic, count, rng);
  double max_diff = 0.0;
  double max_num = 0.0;
  std::vector<double> x = x0;
  for (const auto i : coords) {
    x[i] = x0[i] + kStep;
    const double up = f(x);
    x[i] = x0[i] - kStep;
    const double down = f(x);
    x[i] = x0[i];
    const double numeric = (up - down) / (2.0 * kStep);
    const double a = flip ? -analytic[i] : analytic[i];
    max_diff = std::max(max_diff, std::abs(a - numeric));
    max_num = std::max(max_num, std::abs(numeric));
  }
  return {max_diff / std::max(max_num, 1e-300), static_cast<int>(coords.size())};
}

void merge(GradcheckRow& row, const GroupResult& g) {
  row.max_rel_error = std::max(row.max_rel_error, g.rel_error);
  row.coords_checked += g.checked;
}

std::vector<double> flatten(const std::vector<std::vector<double>>& rows) {
  std::vector<double> out;
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

CoeffMatrix reshape(const std::vector<double>& flat, int rows) {
  const std::size_t cols = flat.size() / static_cast<std::size_t>(rows);
  CoeffMatrix out(rows);
  for (int r = 0; r < rows; ++r) {
    out[r].assign(flat.begin() + static_cast<std::ptrdiff_t>(r * cols),
                  flat.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
  }
  return out;
}

CoeffMatrix random_coeffs(int k, const ZernikeBasis& basis, double sigma, Rng& rng) {
  CoeffMatrix c;
  for (int i = 0; i < k; ++i) c.push_back(sample_aberration(rng, basis, sigma, sigma).coeffs);
  return c;
}

struct Fixture {
  GridSpec grid;
  ZernikeBasis basis;
  PupilMask mask;
  Fixture(int n) : grid{n, 0.5}, basis(grid, kDefaultZernikeModes), mask(pupil_mask(grid)) {}
};

GradcheckRow check_pdi(const Fixture& fx, const GradcheckOptions& o, Rng& rng) {
  GradcheckRow row{"pdi_gradients", 0.0, kThreshold, 0};
  const auto scene = procedural_scene(fx.grid, rng);
  const auto truth = sample_aberration(rng, fx.basis, 0.3, 0.3);
  const auto mods = ModulationSet::from_coeffs(fx.basis, random_coeffs(o.k, fx.basis, 0.3, rng),
                                               Provenance::random_zernike);
  const auto stack = capture_stack(scene, fx.basis.compose(truth.coeffs), mods, fx.mask, 0.01, rng);
  auto state = initial_state(stack, fx.basis);
  for (auto& c : state.aber_coeffs) c = 0.2 * std::normal_distribution<double>()(rng);
  const double tv = 1e-2;
  const auto eval = pdi_gradients(stack, state, fx.mask, fx.basis, tv);
  const bool flip = o.flip_chain == row.chain;

  const std::vector<double> x0(state.scene_est.values().begin(), state.scene_est.values().end());
  merge(row, check_group(
                 [&](const std::vector<double>& x) {
                   ReconState s = state;
                   s.scene_est = Image(fx.grid, x);
                   return pdi_loss(stack, s, fx.mask, fx.basis, tv);
                 },
                 x0, eval.grad_scene, flip, o.coords_per_group, rng));
  merge(row, check_group(
                 [&](const std::vector<double>& c) {
                   ReconState s = state;
                   s.aber_coeffs = c;
                   return pdi_loss(stack, s, fx.mask, fx.basis, tv);
                 },
                 state.aber_coeffs, eval.grad_coeffs, flip, o.coords_per_group, rng));
  return row;
}

GradcheckRow check_proxy(const Fixture& fx, const GradcheckOptions& o, Rng& rng) {
  GradcheckRow row{"proxy_loss_grads", 0.0, kThreshold, 0};
  const auto scene = procedural_scene(fx.grid, rng);
  std::vector<Image> frames;
  for (int i = 0; i < o.k; ++i) frames.push_back(white_noise_scene(fx.grid, rng));
  auto params = proxy_init(fx.mask, o.k);
  auto flat = params.pack();
  std::normal_distribution<double> nd(0.0, 0.1);
  for (auto& v : flat) v += nd(rng);
  params.unpack(flat);
  const auto g = proxy_loss_grads(scene, frames, params);
  const bool flip = o.flip_chain == row.chain;

  merge(row, check_group(
                 [&](const std::vector<double>& p) {
                   ProxyParams q = params;
                   q.unpack(p);
                   return proxy_loss_grads(scene, frames, q).loss;
                 },
                 flat, g.params.pack(), flip, o.coords_per_group, rng));

  std::vector<double> y0;
  for (const auto& f : frames) y0.insert(y0.end(), f.values().begin(), f.values().end());
  const std::size_t px = fx.grid.pixels();
  merge(row, check_group(
                 [&](const std::vector<double>& y) {
                   std::vector<Image> fs;
                   for (int i = 0; i < o.k; ++i) {
                     fs.emplace_back(fx.grid, std::vector<double>(y.begin() + i * px, y.begin() + (i + 1) * px));
                   }
                   return proxy_loss_grads(scene, fs, params).loss;
                 },
                 y0, flatten(g.frames), flip, o.coords_per_group, rng));
  return row;
}

GradcheckRow check_mlp(const Fixture& fx, const GradcheckOptions& o, Rng& rng) {
  GradcheckRow row{"mod_mlp_backward", 0.0, kThreshold, 0};
  auto mlp = ModMLP::random(o.k, o.hidden, fx.basis.count(), 1.0, rng);
  auto flat = mlp.pack();
  std::normal_distribution<double> nd(0.0, 0.1);
  for (std::size_t i = flat.size() - mlp.b2.size(); i < flat.size(); ++i) flat[i] = nd(rng);
  mlp.unpack(flat);
  // Linear probe L = <G, out> so that dL/dout = G.
  const auto probe = random_coeffs(o.k, fx.basis, 1.0, rng);
  const auto analytic = mod_mlp_backward(mlp, probe);
  merge(row, check_group(
                 [&](const std::vector<double>& p) {
                   ModMLP m = mlp;
                   m.unpack(p);
                   const auto out = mod_mlp_forward(m);
                   double s = 0.0;
                   for (int r = 0; r < o.k; ++r) {
                     for (std::size_t c = 0; c < out[r].size(); ++c) s += probe[r][c] * out[r][c];
                   }
                   return s;
                 },
                 flat, analytic, o.flip_chain == row.chain, o.coords_per_group, rng));
  return row;
}

GradcheckRow check_mtf(const Fixture& fx, const GradcheckOptions& o, Rng& rng) {
  GradcheckRow row{"mtf_smooth_max", 0.0, kThreshold, 0};
  std::vector<AberrationSample> samples;
  for (int s = 0; s < 2; ++s) samples.push_back(sample_aberration(rng, fx.basis, 0.3, 0.3));
  const auto coeffs = random_coeffs(o.k, fx.basis, 0.3, rng);
  const double tau = 0.05;
  const auto obj = mtf_objective(coeffs, fx.basis, fx.mask, samples, tau, true);
  merge(row, check_group(
                 [&](const std::vector<double>& c) {
                   return mtf_objective(reshape(c, o.k), fx.basis, fx.mask, samples, tau, false).value;
                 },
                 flatten(coeffs), flatten(obj.grad), o.flip_chain == row.chain, o.coords_per_group,
                 rng));
  return row;
}

GradcheckRow check_end_to_end(const Fixture& fx, const GradcheckOptions& o, Rng& rng) {
  GradcheckRow row{"end_to_end", 0.0, kChainThreshold, 0};
  const auto mlp = ModMLP::random(o.k, o.hidden, fx.basis.count(), 0.3, rng);
  auto proxy = proxy_init(fx.mask, o.k);
  std::vector<EndToEndSample> samples(2);
  for (auto& s : samples) {
    s.scene = procedural_scene(fx.grid, rng);
    s.aberration = fx.basis.compose(sample_aberration(rng, fx.basis, 0.3, 0.3).coeffs);
    for (int i = 0; i < o.k; ++i) s.noise.push_back(add_noise(Image(fx.grid), 0.01, rng));
  }
  const auto eval = end_to_end(mlp, proxy, fx.basis, fx.mask, samples);
  const bool flip = o.flip_chain == row.chain;
  merge(row, check_group(
                 [&](const std::vector<double>& p) {
                   ModMLP m = mlp;
                   m.unpack(p);
                   return end_to_end(m, proxy, fx.basis, fx.mask, samples).loss;
                 },
                 mlp.pack(), eval.grad_mlp, flip, o.coords_per_group, rng));
  merge(row, check_group(
                 [&](const std::vector<double>& p) {
                   ProxyParams q = proxy;
                   q.unpack(p);
                   return end_to_end(mlp, q, fx.basis, fx.mask, samples).loss;
                 },
                 proxy.pack(), eval.grad_proxy, flip, o.coords_per_group, rng));
  return row;
}

}  // namespace

std::vector<std::string> gradcheck_chains() {
  return {"pdi_gradients", "proxy_loss_grads", "mod_mlp_backward", "mtf_smooth_max", "end_to_end"};
}

std::vector<GradcheckRow> run_gradcheck(const GradcheckOptions& opts) {
  if (opts.k < 1 || opts.hidden < 1 || opts.coords_per_group < 1) {
    throw ConfigError("gradcheck: k, hidden and coordinate count must be positive");
  }
  if (!opts.flip_chain.empty()) {
    const auto names = gradcheck_chains();
    if (std::find(names.begin(), names.end(), opts.flip_chain) == names.end()) {
      throw ConfigError("gradcheck: unknown chain '" + opts.flip_chain + "'");
    }
  }
  const Fixture fx(opts.n);
  Rng rng(opts.seed);
  return {check_pdi(fx, opts, rng), check_proxy(fx, opts, rng), check_mlp(fx, opts, rng),
          check_mtf(fx, opts, rng), check_end_to_end(fx, opts, rng)};
}

}  // namespace wavemo
