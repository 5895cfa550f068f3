#include "wavemo/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>

#include "wavemo/errors.hpp"
#include "wavemo/modopt.hpp"

namespace wavemo {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  T value{};
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, value);
  if (t.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value for " + key + ": '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  if (t == "1" || t == "true" || t == "yes") return true;
  if (t == "0" || t == "false" || t == "no") return false;
  throw ConfigError("invalid value for " + key + ": '" + text + "' (expected true or false)");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

template <typename T>
std::string format_number(T v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, std::string>) {
      out += values[i];
    } else {
      out += format_number(values[i]);
    }
  }
  return out;
}

struct Entry {
  SettingInfo info;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Access>
Entry number(std::string key, std::string help, Access access) {
  return {{key, std::move(help)},
          [access, key](RunConfig& c, const std::string& v) { access(c) = parse_number<T>(key, v); },
          [access](const RunConfig& c) { return format_number<T>(access(const_cast<RunConfig&>(c))); }};
}

template <typename Access>
Entry text(std::string key, std::string help, Access access) {
  return {{key, std::move(help)},
          [access](RunConfig& c, const std::string& v) { access(c) = trim(v); },
          [access](const RunConfig& c) { return access(const_cast<RunConfig&>(c)); }};
}

std::vector<Entry> build_entries() {
  std::vector<Entry> e;
  e.push_back(number<int>("n", "grid size in pixels (power of two, >= 8)", [](RunConfig& c) -> int& { return c.exp.grid.n; }));
  e.push_back(number<double>("aperture_radius_frac", "pupil radius as a fraction of n/2", [](RunConfig& c) -> double& { return c.exp.grid.aperture_radius_frac; }));
  e.push_back(number<int>("k", "number of modulations", [](RunConfig& c) -> int& { return c.exp.k; }));
  e.push_back(number<double>("sigma_lo", "lower bound of the per-mode coefficient std", [](RunConfig& c) -> double& { return c.exp.sigma_lo; }));
  e.push_back(number<double>("sigma_hi", "upper bound of the per-mode coefficient std", [](RunConfig& c) -> double& { return c.exp.sigma_hi; }));
  e.push_back(number<double>("aberration_scale", "multiplier applied to both sigma bounds", [](RunConfig& c) -> double& { return c.exp.aberration_scale; }));
  e.push_back(number<double>("noise", "additive Gaussian noise std per frame", [](RunConfig& c) -> double& { return c.exp.noise_sigma; }));
  e.push_back(number<double>("sweep_amp", "focus sweep amplitude in radians", [](RunConfig& c) -> double& { return c.exp.sweep_amp; }));
  e.push_back(number<int>("iters", "training iterations", [](RunConfig& c) -> int& { return c.exp.train_iters; }));
  e.push_back(number<int>("batch", "training batch size", [](RunConfig& c) -> int& { return c.exp.batch; }));
  e.push_back(number<int>("hidden", "hidden width of the modulation network", [](RunConfig& c) -> int& { return c.exp.hidden; }));
  e.push_back(number<double>("mlp_lr", "Adam learning rate of the modulation network", [](RunConfig& c) -> double& { return c.exp.mlp_learning_rate; }));
  e.push_back(number<double>("proxy_lr", "Adam learning rate of the proxy", [](RunConfig& c) -> double& { return c.exp.proxy_learning_rate; }));
  e.push_back(number<double>("init_scale", "initial modulation coefficient std in units of the aberration std", [](RunConfig& c) -> double& { return c.exp.init_scale; }));
  e.push_back(number<std::uint64_t>("seed", "master random seed", [](RunConfig& c) -> std::uint64_t& { return c.exp.seed; }));
  e.push_back(number<int>("mtf_opt_iters", "iterations of direct MTF optimization", [](RunConfig& c) -> int& { return c.exp.mtf_opt_iters; }));
  e.push_back(number<int>("mtf_opt_samples", "aberration draws used by direct MTF optimization", [](RunConfig& c) -> int& { return c.exp.mtf_opt_samples; }));
  e.push_back(number<double>("mtf_tau", "smooth-max temperature", [](RunConfig& c) -> double& { return c.exp.mtf_tau; }));
  e.push_back(number<int>("eval_scenes", "held-out scenes per evaluation", [](RunConfig& c) -> int& { return c.exp.eval_scenes; }));
  e.push_back(number<std::uint64_t>("eval_seed", "seed of the held-out scenes and aberrations", [](RunConfig& c) -> std::uint64_t& { return c.exp.eval_seed; }));
  e.push_back(text("out", "run directory", [](RunConfig& c) -> std::string& { return c.out; }));
  e.push_back(text("mods", "modulation kind for simulate", [](RunConfig& c) -> std::string& { return c.mods; }));
  e.push_back(text("scene", "PFM or PGM scene file (empty: procedural)", [](RunConfig& c) -> std::string& { return c.scene; }));
  e.push_back(text("stack", "stack directory written by simulate", [](RunConfig& c) -> std::string& { return c.stack; }));
  e.push_back(text("modulations", "modulation CSV matching the stack", [](RunConfig& c) -> std::string& { return c.modulations; }));
  e.push_back(number<int>("recon_iters", "iterative reconstruction iterations", [](RunConfig& c) -> int& { return c.recon_iters; }));
  e.push_back(number<double>("step_scene", "Adam step of the scene estimate", [](RunConfig& c) -> double& { return c.step_scene; }));
  e.push_back(number<double>("step_coeffs", "Adam step of the aberration estimate", [](RunConfig& c) -> double& { return c.step_coeffs; }));
  e.push_back(number<double>("tv_weight", "total variation weight", [](RunConfig& c) -> double& { return c.tv_weight; }));
  e.push_back({{"blind", "estimate the aberration jointly (false: use the stack truth)"},
               [](RunConfig& c, const std::string& v) { c.blind = parse_bool("blind", v); },
               [](const RunConfig& c) { return std::string(c.blind ? "true" : "false"); }});
  e.push_back({{"kinds", "comma-separated modulation kinds to compare"},
               [](RunConfig& c, const std::string& v) { c.kinds = split_list(v); },
               [](const RunConfig& c) { return join(c.kinds); }});
  e.push_back(text("learned", "directory written by learn", [](RunConfig& c) -> std::string& { return c.learned; }));
  e.push_back(text("method", "reconstructor for evaluate: proxy, iterative or both", [](RunConfig& c) -> std::string& { return c.method; }));
  e.push_back(number<int>("iter_scenes", "scenes for iterative evaluation", [](RunConfig& c) -> int& { return c.iter_scenes; }));
  e.push_back({{"k_sweep", "comma-separated K values; switches evaluate to the K ablation"},
               [](RunConfig& c, const std::string& v) {
                 c.k_sweep.clear();
                 for (const auto& s : split_list(v)) c.k_sweep.push_back(parse_number<int>("k_sweep", s));
               },
               [](const RunConfig& c) { return join(c.k_sweep); }});
  e.push_back({{"seeds", "comma-separated training seeds for the K ablation"},
               [](RunConfig& c, const std::string& v) {
                 c.seeds.clear();
                 for (const auto& s : split_list(v)) c.seeds.push_back(parse_number<std::uint64_t>("seeds", s));
               },
               [](const RunConfig& c) { return join(c.seeds); }});
  e.push_back(number<int>("aberration_samples", "aberration draws averaged by mtf-report", [](RunConfig& c) -> int& { return c.aberration_samples; }));
  e.push_back(number<int>("nbins", "radial profile bins", [](RunConfig& c) -> int& { return c.nbins; }));
  e.push_back(number<std::uint64_t>("mtf_seed", "seed of the mtf-report aberration draws", [](RunConfig& c) -> std::uint64_t& { return c.mtf_seed; }));
  e.push_back(number<int>("gc_n", "grid size for gradcheck", [](RunConfig& c) -> int& { return c.gc_n; }));
  e.push_back(number<int>("gc_coords", "coordinates sampled per parameter group in gradcheck", [](RunConfig& c) -> int& { return c.gc_coords; }));
  e.push_back(text("inject_bug", "negate the analytic gradient of this chain (self-test)", [](RunConfig& c) -> std::string& { return c.inject_bug; }));
  return e;
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = build_entries();
  return table;
}

const Entry& find_entry(const std::string& key) {
  for (const auto& e : entries()) {
    if (e.info.key == key) return e;
  }
  throw ConfigError("unknown setting '" + key + "'");
}

bool is_kind(const std::string& s) {
  static const std::vector<std::string> kinds{"none",        "random_zernike", "random_gaussian",
                                              "focus_sweep", "mtf_opt",        "learned"};
  return std::find(kinds.begin(), kinds.end(), s) != kinds.end();
}

}  // namespace

void RunConfig::validate() const {
  exp.validate();
  if (out.empty()) throw ConfigError("out must not be empty");
  if (!is_kind(mods) || mods == "learned") throw ConfigError("unsupported mods kind '" + mods + "'");
  if (recon_iters < 0) throw ConfigError("recon_iters must be >= 0");
  if (step_scene <= 0.0 || step_coeffs <= 0.0) throw ConfigError("reconstruction steps must be > 0");
  if (tv_weight < 0.0) throw ConfigError("tv_weight must be >= 0");
  if (kinds.empty()) throw ConfigError("kinds must list at least one modulation kind");
  for (const auto& k : kinds) {
    if (!is_kind(k)) throw ConfigError("unknown modulation kind '" + k + "'");
  }
  if (method != "proxy" && method != "iterative" && method != "both") {
    throw ConfigError("method must be proxy, iterative or both");
  }
  if (iter_scenes < 1) throw ConfigError("iter_scenes must be >= 1");
  for (int k : k_sweep) {
    if (k < 1) throw ConfigError("k_sweep values must be >= 1");
  }
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (aberration_samples < 1) throw ConfigError("aberration_samples must be >= 1");
  if (nbins < 2) throw ConfigError("nbins must be >= 2");
  if (gc_n < 8 || (gc_n & (gc_n - 1)) != 0) throw ConfigError("gc_n must be a power of two >= 8");
  if (gc_coords < 1) throw ConfigError("gc_coords must be >= 1");
}

const std::vector<SettingInfo>& setting_table() {
  static const std::vector<SettingInfo> infos = [] {
    std::vector<SettingInfo> v;
    for (const auto& e : entries()) v.push_back(e.info);
    return v;
  }();
  return infos;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  find_entry(key).set(cfg, value);
}

std::string get_setting(const RunConfig& cfg, const std::string& key) {
  return find_entry(key).get(cfg);
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  if (file) {
    for (const auto& [k, v] : io::read_key_values(*file)) apply_setting(cfg, k, v);
  }
  for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
  cfg.validate();
  return cfg;
}

io::KeyValues to_key_values(const RunConfig& cfg) {
  io::KeyValues kv;
  for (const auto& e : entries()) kv[e.info.key] = e.get(cfg);
  return kv;
}

std::string flag_name(const std::string& key) {
  std::string s = key;
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

}  // namespace wavemo
