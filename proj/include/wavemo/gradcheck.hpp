#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wavemo {

struct GradcheckOptions {
  int n = 16;
  int k = 3;
  int hidden = 8;
  std::uint64_t seed = 1;
  /// Coordinates sampled per parameter group for the finite differences.
  int coords_per_group = 16;
  /// Negates the analytic gradient of the named chain. Test hook only.
  std::string flip_chain;
};

struct GradcheckRow {
  std::string chain;
  double max_rel_error = 0.0;
  double threshold = 0.0;
  int coords_checked = 0;
  [[nodiscard]] bool passed() const { return max_rel_error < threshold; }
};

/// Chain names in the order run_gradcheck reports them.
std::vector<std::string> gradcheck_chains();

/// Central finite differences against every analytic gradient path. The error
/// of a group is max|analytic - numeric| / max|numeric| over the sampled
/// coordinates; a chain reports the worst of its groups.
std::vector<GradcheckRow> run_gradcheck(const GradcheckOptions& opts = {});

}  // namespace wavemo
