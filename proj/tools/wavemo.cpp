#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wavemo/config.hpp"
#include "wavemo/errors.hpp"
#include "wavemo/gradcheck.hpp"
#include "wavemo/io.hpp"
#include "wavemo/metrics.hpp"
#include "wavemo/modopt.hpp"
#include "wavemo/optics.hpp"
#include "wavemo/pipeline.hpp"
#include "wavemo/recon_iterative.hpp"
#include "wavemo/scene.hpp"

namespace fs = std::filesystem;
using namespace wavemo;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitIo = 3;

const std::vector<std::string> kCommonKeys{"out", "n", "aperture_radius_frac", "seed"};
const std::vector<std::string> kAberrationKeys{"sigma_lo", "sigma_hi", "aberration_scale"};
const std::vector<std::string> kTrainKeys{"iters",  "batch",   "hidden",    "mlp_lr",
                                          "proxy_lr", "init_scale", "noise", "k"};

struct Command {
  CLI::App* app = nullptr;
  std::optional<std::string> config_file;
  std::map<std::string, std::string> values;
  std::vector<std::string> keys;
};

void add_keys(Command& cmd, const std::vector<std::string>& keys) {
  for (const auto& key : keys) {
    std::string help;
    for (const auto& info : setting_table()) {
      if (info.key == key) help = info.help;
    }
    cmd.keys.push_back(key);
    cmd.app->add_option("--" + flag_name(key), cmd.values[key], help);
  }
}

Command make_command(CLI::App& root, const std::string& name, const std::string& description,
                     std::vector<std::vector<std::string>> groups) {
  Command cmd;
  cmd.app = root.add_subcommand(name, description);
  cmd.app->add_option("--config", cmd.config_file, "key=value config file; flags override it");
  for (const auto& g : groups) add_keys(cmd, g);
  return cmd;
}

RunConfig resolve(const Command& cmd) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& key : cmd.keys) {
    if (cmd.app->count("--" + flag_name(key)) > 0) overrides.emplace_back(key, cmd.values.at(key));
  }
  std::optional<fs::path> file;
  if (cmd.config_file) {
    if (!fs::exists(*cmd.config_file)) throw IoError("config file not found: " + *cmd.config_file);
    file = *cmd.config_file;
  }
  return load_run_config(file, overrides);
}

void require_exists(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is required");
  if (!fs::exists(path)) throw IoError(what + " not found: " + path);
}

io::KeyValues run_manifest(const RunConfig& cfg, const std::string& command) {
  auto kv = to_key_values(cfg);
  kv["command"] = command;
  return kv;
}

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string cell(double mean, double sd) { return num(mean) + " (" + num(sd) + ")"; }

double moving_average(const std::vector<double>& v, bool tail, std::size_t window = 500) {
  if (v.empty()) return std::nan("");
  const std::size_t w = std::min(window, v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < w; ++i) s += tail ? v[v.size() - 1 - i] : v[i];
  return s / static_cast<double>(w);
}

struct LearnedArtifacts {
  ModulationSet modulations;
  ProxyParams proxy;
};

void check_learned_dir(const RunConfig& cfg) {
  require_exists(cfg.learned, "learned artifact directory (--learned)");
  require_exists((fs::path(cfg.learned) / "modulations.csv").string(), "learned modulations");
  require_exists((fs::path(cfg.learned) / "proxy" / "manifest.txt").string(), "learned proxy");
}

LearnedArtifacts load_learned(const RunConfig& cfg, const ZernikeBasis& basis) {
  LearnedArtifacts out;
  const fs::path dir(cfg.learned);
  out.proxy = io::read_proxy(dir / "proxy");
  if (!(out.proxy.grid == cfg.exp.grid)) {
    throw ConfigError("learned artifacts were trained on a different grid");
  }
  auto coeffs = io::read_coeffs_csv(dir / "modulations.csv");
  if (static_cast<int>(coeffs.size()) != out.proxy.k()) {
    throw ConfigError("learned modulation count does not match its proxy");
  }
  out.modulations = ModulationSet::from_coeffs(basis, std::move(coeffs), Provenance::learned);
  return out;
}

bool needs_learned(const RunConfig& cfg) {
  for (const auto& k : cfg.kinds) {
    if (k == "learned") return true;
  }
  return false;
}

int cmd_simulate(const RunConfig& cfg) {
  if (!cfg.scene.empty()) require_exists(cfg.scene, "scene file");
  const ZernikeBasis basis(cfg.exp.grid, kDefaultZernikeModes);
  const auto mask = pupil_mask(cfg.exp.grid);

  Rng rng(cfg.exp.seed);
  const Image scene = cfg.scene.empty() ? procedural_scene(cfg.exp.grid, rng)
                                        : io::read_image(cfg.scene, cfg.exp.grid);
  const auto aberration = sample_aberration(rng, basis, cfg.exp.sigma_lo_eff(), cfg.exp.sigma_hi_eff());
  const auto mods = baseline_modulations(cfg.mods, cfg.exp, basis, mask);
  auto stack = capture_stack(scene, basis.compose(aberration.coeffs), mods, mask, cfg.exp.noise_sigma, rng);
  stack.scene_truth = scene;
  stack.aberration_truth = aberration;

  io::write_stack(cfg.out, stack, run_manifest(cfg, "simulate"));
  std::cout << "wrote " << stack.k() << " frames to " << cfg.out << "\n";
  return kExitOk;
}

int cmd_learn(const RunConfig& cfg) {
  const ZernikeBasis basis(cfg.exp.grid, kDefaultZernikeModes);
  const auto mask = pupil_mask(cfg.exp.grid);
  const auto trained = train_kind("learned", cfg.exp, basis, mask);

  const fs::path out(cfg.out);
  io::ensure_dir(out);
  io::write_coeffs_csv(out / "modulations.csv", *trained.modulations.coeffs);
  io::write_proxy(out / "proxy", trained.proxy);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < trained.history.loss.size(); ++i) {
    rows.push_back({static_cast<double>(i), trained.history.loss[i], trained.history.psnr[i]});
  }
  io::write_csv(out / "history.csv", {"iteration", "loss", "psnr"}, rows);

  auto kv = run_manifest(cfg, "learn");
  kv["modulation_hash"] = io::coeffs_hash(*trained.modulations.coeffs);
  io::write_key_values(out / "manifest.txt", kv);

  if (trained.history.loss.empty()) {
    std::cout << "no training iterations; wrote initialization to " << cfg.out << "\n";
  } else {
    std::cout << "moving-average loss: initial " << moving_average(trained.history.loss, false)
              << " final " << moving_average(trained.history.loss, true) << "\n";
  }
  return kExitOk;
}

int cmd_reconstruct(const RunConfig& cfg) {
  require_exists(cfg.stack, "stack directory (--stack)");
  require_exists((fs::path(cfg.stack) / "manifest.txt").string(), "stack manifest");
  if (!cfg.modulations.empty()) require_exists(cfg.modulations, "modulation CSV");

  io::KeyValues manifest;
  auto stack = io::read_stack(cfg.stack, &manifest);
  const GridSpec grid = stack.grid();
  const ZernikeBasis basis(grid, kDefaultZernikeModes);
  const auto mask = pupil_mask(grid);

  if (!cfg.modulations.empty()) {
    auto coeffs = io::read_coeffs_csv(cfg.modulations);
    if (static_cast<int>(coeffs.size()) != stack.k()) {
      throw ConfigError("modulation CSV has " + std::to_string(coeffs.size()) + " rows but the stack has K=" +
                        std::to_string(stack.k()));
    }
    const auto it = manifest.find("modulation_hash");
    if (it != manifest.end() && it->second != io::coeffs_hash(coeffs)) {
      throw ConfigError("modulation CSV does not match the stack manifest hash");
    }
    stack.modulations = ModulationSet::from_coeffs(basis, std::move(coeffs), stack.modulations.provenance);
  } else if (stack.modulations.coeffs) {
    // Recompose from the coefficients to avoid the single-precision pattern files.
    stack.modulations = ModulationSet::from_coeffs(basis, *stack.modulations.coeffs, stack.modulations.provenance);
  }

  ReconOptions opts;
  opts.max_iters = cfg.recon_iters;
  opts.step_scene = cfg.step_scene;
  opts.step_coeffs = cfg.step_coeffs;
  opts.tv_weight = cfg.tv_weight;
  opts.optimize_aberration = cfg.blind;
  opts.validate();
  std::optional<ReconState> init;
  if (!cfg.blind) {
    if (!stack.aberration_truth) throw ConfigError("blind=false needs a stack with a known aberration");
    init = initial_state(stack, basis);
    init->aber_coeffs = stack.aberration_truth->coeffs;
  }
  if (cfg.blind && stack.k() == 1) {
    throw UnderdeterminedError("a single frame cannot determine both scene and aberration; use K >= 2 or blind=false");
  }

  const auto state = reconstruct(stack, mask, basis, opts, init);
  for (double l : state.loss_history) {
    if (!std::isfinite(l)) throw NumericalError("reconstruction diverged (non-finite loss)");
  }

  const fs::path out(cfg.out);
  io::ensure_dir(out);
  io::write_pfm(out / "scene_est.pfm", state.scene_est);
  io::write_coeffs_csv(out / "aberration_est.csv", {state.aber_coeffs});
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < state.loss_history.size(); ++i) {
    rows.push_back({static_cast<double>(i), state.loss_history[i]});
  }
  io::write_csv(out / "loss.csv", {"iteration", "loss"}, rows);

  auto kv = run_manifest(cfg, "reconstruct");
  kv["iterations_run"] = std::to_string(state.iteration);
  if (stack.scene_truth) {
    const Image scored = cfg.blind ? register_to(state.scene_est, *stack.scene_truth) : state.scene_est;
    const double p = psnr(scored, *stack.scene_truth);
    const double s = ssim(scored, *stack.scene_truth);
    kv["psnr"] = num(p, 6);
    kv["ssim"] = num(s, 6);
    kv["registered"] = cfg.blind ? "true" : "false";
    std::cout << "psnr=" << num(p) << " ssim=" << num(s) << (cfg.blind ? " (after sub-pixel registration)" : "")
              << "\n";
  } else {
    std::cout << "final loss=" << (state.loss_history.empty() ? 0.0 : state.loss_history.back()) << "\n";
  }
  io::write_key_values(out / "manifest.txt", kv);
  return kExitOk;
}

ModulationSet modulations_for(const std::string& kind, const RunConfig& cfg, const ZernikeBasis& basis,
                              const PupilMask& mask, const std::optional<LearnedArtifacts>& learned) {
  if (kind == "learned") return learned->modulations;
  return baseline_modulations(kind, cfg.exp, basis, mask);
}

int cmd_evaluate_sweep(const RunConfig& cfg) {
  if (needs_learned(cfg)) throw ConfigError("the K ablation supports baseline kinds only");
  const ZernikeBasis basis(cfg.exp.grid, kDefaultZernikeModes);
  const auto mask = pupil_mask(cfg.exp.grid);

  std::vector<std::vector<std::string>> detail;
  std::vector<std::vector<std::string>> summary;
  for (const auto& kind : cfg.kinds) {
    for (int k : cfg.k_sweep) {
      std::vector<double> means;
      for (auto seed : cfg.seeds) {
        ExperimentConfig e = cfg.exp;
        e.k = k;
        e.seed = seed;
        const auto trained = train_kind(kind, e, basis, mask);
        const auto rep = evaluate_proxy(trained.modulations, trained.proxy, e, basis, mask, e.eval_scenes);
        means.push_back(rep.mean_psnr);
        detail.push_back({kind, std::to_string(k), std::to_string(seed), num(rep.mean_psnr, 6), num(rep.mean_ssim, 6)});
      }
      const auto [m, sd] = aggregate(means);
      summary.push_back({kind, std::to_string(k), num(m, 6), num(sd, 6), cell(m, sd)});
      std::cout << kind << " K=" << k << " mean PSNR " << cell(m, sd) << " over " << means.size() << " seeds\n";
    }
  }
  const fs::path out(cfg.out);
  io::ensure_dir(out);
  io::write_csv_text(out / "ksweep_runs.csv", {"kind", "K", "seed", "mean_psnr", "mean_ssim"}, detail);
  io::write_csv_text(out / "ksweep.csv", {"kind", "K", "mean_psnr", "sd_psnr", "cell"}, summary);
  io::write_key_values(out / "manifest.txt", run_manifest(cfg, "evaluate"));
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg) {
  if (needs_learned(cfg)) check_learned_dir(cfg);
  if (!cfg.k_sweep.empty()) return cmd_evaluate_sweep(cfg);

  const ZernikeBasis basis(cfg.exp.grid, kDefaultZernikeModes);
  const auto mask = pupil_mask(cfg.exp.grid);
  std::optional<LearnedArtifacts> learned;
  if (needs_learned(cfg)) learned = load_learned(cfg, basis);

  ReconOptions ropts;
  ropts.max_iters = cfg.recon_iters;
  ropts.step_scene = cfg.step_scene;
  ropts.step_coeffs = cfg.step_coeffs;
  ropts.tv_weight = cfg.tv_weight;
  ropts.validate();

  const bool do_proxy = cfg.method != "iterative";
  const bool do_iter = cfg.method != "proxy";
  std::map<std::string, std::vector<std::string>> table;  // row label -> one cell per kind
  std::vector<std::string> labels;
  auto row = [&](const std::string& label) -> std::vector<std::string>& {
    if (!table.count(label)) labels.push_back(label);
    return table[label];
  };
  std::vector<std::vector<std::string>> items;
  std::vector<std::vector<std::string>> summary;
  auto record = [&](const std::string& method, const std::string& kind, const MetricReport& rep) {
    summary.push_back({kind, method, std::to_string(rep.per_item.size()), num(rep.mean_psnr, 6), num(rep.sd_psnr, 6),
                       num(rep.mean_ssim, 6), num(rep.sd_ssim, 6)});
    row(method + " PSNR").push_back(cell(rep.mean_psnr, rep.sd_psnr));
    row(method + " SSIM").push_back(cell(rep.mean_ssim, rep.sd_ssim));
    for (const auto& it : rep.per_item) items.push_back({kind, method, it.id, num(it.psnr, 6), num(it.ssim, 6)});
    std::cout << method << " " << kind << ": PSNR " << cell(rep.mean_psnr, rep.sd_psnr) << " SSIM "
              << cell(rep.mean_ssim, rep.sd_ssim) << "\n";
  };

  for (const auto& kind : cfg.kinds) {
    const auto mods = modulations_for(kind, cfg, basis, mask, learned);
    if (do_proxy) {
      const ProxyParams proxy = kind == "learned" ? learned->proxy : train_kind(kind, cfg.exp, basis, mask).proxy;
      record("proxy", kind, evaluate_proxy(mods, proxy, cfg.exp, basis, mask, cfg.exp.eval_scenes));
    }
    if (do_iter) {
      if (mods.k() < 2) {
        row("iterative PSNR").push_back("n/a");
        row("iterative SSIM").push_back("n/a");
        std::cout << "iterative " << kind << ": skipped (a single frame is under-determined)\n";
      } else {
        record("iterative", kind, evaluate_iterative(mods, cfg.exp, basis, mask, cfg.iter_scenes, ropts));
      }
    }
  }

  std::vector<std::string> header{"method"};
  header.insert(header.end(), cfg.kinds.begin(), cfg.kinds.end());
  std::vector<std::vector<std::string>> rows;
  for (const auto& label : labels) {
    std::vector<std::string> r{label};
    r.insert(r.end(), table[label].begin(), table[label].end());
    rows.push_back(std::move(r));
  }
  const fs::path out(cfg.out);
  io::ensure_dir(out);
  io::write_csv_text(out / "metrics.csv", header, rows);
  io::write_csv_text(out / "summary.csv",
                     {"kind", "method", "scenes", "mean_psnr", "sd_psnr", "mean_ssim", "sd_ssim"}, summary);
  io::write_csv_text(out / "per_scene.csv", {"kind", "method", "scene", "psnr", "ssim"}, items);
  io::write_key_values(out / "manifest.txt", run_manifest(cfg, "evaluate"));
  return kExitOk;
}

int cmd_mtf_report(const RunConfig& cfg) {
  if (needs_learned(cfg)) check_learned_dir(cfg);
  const ZernikeBasis basis(cfg.exp.grid, kDefaultZernikeModes);
  const auto mask = pupil_mask(cfg.exp.grid);
  std::optional<LearnedArtifacts> learned;
  if (needs_learned(cfg)) learned = load_learned(cfg, basis);

  std::vector<std::pair<std::string, ModulationSet>> sets;
  for (const auto& kind : cfg.kinds) sets.emplace_back(kind, modulations_for(kind, cfg, basis, mask, learned));
  const auto cmp = mtf_comparison(sets, cfg.exp, basis, mask, cfg.aberration_samples, cfg.nbins, cfg.mtf_seed);

  const fs::path out(cfg.out);
  io::ensure_dir(out);
  std::vector<std::vector<double>> combined(cmp.freq.size());
  for (std::size_t b = 0; b < cmp.freq.size(); ++b) combined[b].push_back(cmp.freq[b]);
  for (std::size_t i = 0; i < cmp.kinds.size(); ++i) {
    std::vector<std::vector<double>> rows;
    for (std::size_t b = 0; b < cmp.freq.size(); ++b) {
      rows.push_back({cmp.freq[b], cmp.profiles[i][b]});
      combined[b].push_back(cmp.profiles[i][b]);
    }
    io::write_csv(out / ("mtf_" + cmp.kinds[i] + ".csv"), {"freq", "mtf"}, rows);
    std::cout << cmp.kinds[i] << ": upper-band mean MTF " << num(upper_band_mean(cmp.profiles[i]), 6) << "\n";
  }
  std::vector<std::string> header{"freq"};
  for (const auto& k : cmp.kinds) header.push_back("mtf_" + k);
  io::write_csv(out / "mtf_comparison.csv", header, combined);
  io::write_key_values(out / "manifest.txt", run_manifest(cfg, "mtf-report"));
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg) {
  GradcheckOptions o;
  o.n = cfg.gc_n;
  o.seed = cfg.exp.seed;
  o.coords_per_group = cfg.gc_coords;
  o.flip_chain = cfg.inject_bug;
  const auto rows = run_gradcheck(o);

  std::vector<std::vector<std::string>> table;
  std::vector<std::string> failing;
  std::printf("%-20s %-14s %-10s %s\n", "chain", "max_rel_error", "threshold", "status");
  for (const auto& r : rows) {
    std::printf("%-20s %-14.3e %-10.0e %s\n", r.chain.c_str(), r.max_rel_error, r.threshold,
                r.passed() ? "ok" : "FAIL");
    char err[32];
    std::snprintf(err, sizeof(err), "%.6e", r.max_rel_error);
    table.push_back({r.chain, err, num(r.threshold, 6), std::to_string(r.coords_checked), r.passed() ? "ok" : "FAIL"});
    if (!r.passed()) failing.push_back(r.chain);
  }
  const fs::path out(cfg.out);
  io::ensure_dir(out);
  io::write_csv_text(out / "gradcheck.csv", {"chain", "max_rel_error", "threshold", "coords", "status"}, table);
  io::write_key_values(out / "manifest.txt", run_manifest(cfg, "gradcheck"));
  if (!failing.empty()) {
    std::string names;
    for (const auto& f : failing) names += (names.empty() ? "" : ", ") + f;
    std::cerr << "gradient check failed: " << names << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-diversity imaging through unknown aberrations with learned wavefront modulations"};
  app.require_subcommand(1);

  std::vector<std::string> eval_keys{"kinds", "learned", "method", "eval_scenes", "eval_seed", "iter_scenes",
                                     "k_sweep", "seeds", "recon_iters", "step_scene", "step_coeffs", "tv_weight",
                                     "sweep_amp", "mtf_opt_iters", "mtf_opt_samples", "mtf_tau"};
  std::vector<std::string> mtf_keys{"kinds", "learned", "aberration_samples", "nbins", "mtf_seed", "k", "sweep_amp",
                                    "mtf_opt_iters", "mtf_opt_samples", "mtf_tau"};

  Command simulate = make_command(app, "simulate", "Simulate a phase-diversity measurement stack",
                                  {kCommonKeys, kAberrationKeys, {"k", "mods", "noise", "scene", "sweep_amp",
                                                                  "mtf_opt_iters", "mtf_opt_samples", "mtf_tau"}});
  Command learn = make_command(app, "learn", "Learn modulations jointly with the proxy reconstructor",
                               {kCommonKeys, kAberrationKeys, kTrainKeys});
  Command recon = make_command(app, "reconstruct", "Blind iterative reconstruction of a stack",
                               {{"out", "seed"}, {"stack", "modulations", "recon_iters", "step_scene", "step_coeffs",
                                                  "tv_weight", "blind"}});
  Command evaluate = make_command(app, "evaluate", "Compare modulation kinds on held-out scenes",
                                  {kCommonKeys, kAberrationKeys, kTrainKeys, eval_keys});
  Command mtf = make_command(app, "mtf-report", "Radial combined-MTF profiles per modulation kind",
                             {kCommonKeys, kAberrationKeys, mtf_keys});
  Command gradcheck = make_command(app, "gradcheck", "Finite-difference check of every gradient chain",
                                   {{"out", "seed"}, {"gc_n", "gc_coords", "inject_bug"}});

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (simulate.app->parsed()) return cmd_simulate(resolve(simulate));
    if (learn.app->parsed()) return cmd_learn(resolve(learn));
    if (recon.app->parsed()) return cmd_reconstruct(resolve(recon));
    if (evaluate.app->parsed()) return cmd_evaluate(resolve(evaluate));
    if (mtf.app->parsed()) return cmd_mtf_report(resolve(mtf));
    if (gradcheck.app->parsed()) return cmd_gradcheck(resolve(gradcheck));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitConfig;
}
