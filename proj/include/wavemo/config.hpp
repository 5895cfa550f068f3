#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wavemo/io.hpp"
#include "wavemo/pipeline.hpp"

namespace wavemo {

/// Every setting a command can read. Keys are snake_case in config files and
/// manifests and appear as --kebab-case flags on the command line.
struct RunConfig {
  ExperimentConfig exp;
  std::string out = "run";

  // simulate
  std::string mods = "random_zernike";
  std::string scene;  // empty: procedural scene from the seed

  // reconstruct
  std::string stack;
  std::string modulations;
  int recon_iters = 2000;
  double step_scene = 1e-2;
  double step_coeffs = 1e-2;
  double tv_weight = 0.0;
  bool blind = true;

  // evaluate / mtf-report
  std::vector<std::string> kinds{"none", "random_zernike", "learned"};
  std::string learned;  // directory written by `learn`
  std::string method = "proxy";  // proxy | iterative | both
  int iter_scenes = 5;
  std::vector<int> k_sweep;  // non-empty switches evaluate to the K ablation
  std::vector<std::uint64_t> seeds{1};
  int aberration_samples = 10;
  int nbins = 17;
  std::uint64_t mtf_seed = 77;

  // gradcheck
  int gc_n = 16;
  int gc_coords = 16;
  std::string inject_bug;

  void validate() const;
};

struct SettingInfo {
  std::string key;
  std::string help;
};

/// All keys with their one-line descriptions, in manifest order.
const std::vector<SettingInfo>& setting_table();

/// Throws ConfigError for unknown keys or unparsable values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_setting(const RunConfig& cfg, const std::string& key);

/// Defaults, then the file (when given), then the overrides in order. The
/// result is validated.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::pair<std::string, std::string>>& overrides);

io::KeyValues to_key_values(const RunConfig& cfg);

/// Converts a snake_case key to its flag spelling without the leading dashes.
std::string flag_name(const std::string& key);

}  // namespace wavemo
