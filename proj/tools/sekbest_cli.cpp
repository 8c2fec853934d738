// sekbest: command-line front end for the detector simulator.
//
//   sekbest run (<config.toml> | --preset NAME) --out DIR [--seed S] [--threads T]
//   sekbest sweep --n 8 --m 256 --k 5,20 --snr 0,10,20 --out DIR
//   sekbest complexity --mode formula|tabulated
//   sekbest oracle-check --nt 2 --m 16 --k 16 --trials 1000
//   sekbest presets
//
// Exit codes: 0 success, 1 check failure, 2 usage or config error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sekbest/sekbest.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

unsigned threads_from(std::optional<unsigned> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SE_KBEST_THREADS")) {
    try {
      return static_cast<unsigned>(std::stoul(env));
    } catch (const std::exception&) {
      std::cerr << "ignoring invalid SE_KBEST_THREADS=" << env << '\n';
    }
  }
  return 0;
}

struct OutputFlags {
  std::string out_dir;
  std::optional<unsigned> threads;
  bool force = false;
  bool strict = false;
  bool quiet = false;
};

void add_output_flags(CLI::App* cmd, OutputFlags& f) {
  cmd->add_option("--out", f.out_dir, "Directory for results.csv and summary.json")->required();
  cmd->add_option("--threads", f.threads, "Worker threads (default: SE_KBEST_THREADS or all cores)");
  cmd->add_flag("--force", f.force, "Overwrite existing results in --out");
  cmd->add_flag("--strict", f.strict, "Exit 1 if any cell failed");
  cmd->add_flag("--quiet", f.quiet, "No progress output on stderr");
}

int execute(const sekbest::ExperimentSpec& spec, const OutputFlags& f) {
  namespace fs = std::filesystem;
  const fs::path dir(f.out_dir);
  if (!f.force && (fs::exists(dir / "results.csv") || fs::exists(dir / "summary.json"))) {
    std::cerr << "error: " << dir.string() << " already holds results (use --force)\n";
    return kExitUsage;
  }
  sekbest::RunOptions opts;
  opts.threads = threads_from(f.threads);
  opts.progress = f.quiet ? nullptr : &std::cerr;
  const auto result = sekbest::run_experiment(spec, opts);
  sekbest::write_results(dir, result, f.force);
  std::cout << (dir / "results.csv").string() << '\n' << (dir / "summary.json").string() << '\n';
  for (const auto& fail : result.failures)
    std::cerr << "cell n=" << fail.cell.n << " m=" << fail.cell.m << " k=" << fail.cell.k
              << " snr=" << sekbest::format_snr(fail.cell.snr_db) << " failed: " << fail.error << '\n';
  if (f.strict && !result.failures.empty()) return kExitCheckFailed;
  return kExitOk;
}

struct OracleFlags {
  std::size_t trials = 1000;
  std::size_t nt = 2;
  unsigned m = 16;
  std::size_t k = 16;
  double snr_db = 20.0;
  std::uint64_t seed = 1;
  double ml_budget = sekbest::kDefaultMlBudget;
};

int oracle_check(const OracleFlags& f) {
  using namespace sekbest;
  if (f.trials == 0 || f.nt == 0 || f.k == 0) {
    std::cerr << "error: --trials, --nt and --k must be >= 1\n";
    return kExitUsage;
  }
  std::optional<Constellation> c;
  try {
    c.emplace(f.m);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (ml_leaf_count(f.m, 2 * f.nt) > f.ml_budget) {
    std::cerr << "error: ML budget exceeded (" << f.m << "^" << f.nt << " candidates)\n";
    return kExitUsage;
  }
  // the tree never discards a path when K covers every partial path above the last row
  const bool saturated = std::pow(static_cast<double>(c->side()), static_cast<double>(2 * f.nt - 1)) <= f.k;

  DetectorConfig cfg;
  cfg.k = f.k;
  cfg.ml_budget = f.ml_budget;
  const NoiseModel noise = NoiseModel::from_snr_db(f.snr_db, f.nt);

  std::size_t equal_ml = 0, bound_ok = 0, equal_conventional = 0;
  for (std::size_t t = 0; t < f.trials; ++t) {
    const SeedPath path{f.seed, t};
    auto bit_rng = make_stream(path, Stream::bits);
    const auto x = modulate(random_bits(f.nt * c->bits_per_symbol(), bit_rng), *c);
    auto ch_rng = make_stream(path, Stream::channel);
    const auto h = draw_channel(f.nt, f.nt, ch_rng);
    auto noise_rng = make_stream(path, Stream::noise);
    const auto y = apply_channel(h, x, noise, noise_rng);
    RealSystem sys;
    try {
      sys = make_real_system(h, y, {.keep_q = false});
    } catch (const RankDeficientError&) {
      std::cerr << "trial " << t << ": rank-deficient channel skipped\n";
      continue;
    }
    const auto se = se_kbest_detect(sys, *c, cfg);
    const auto conv = conventional_kbest_detect(sys, *c, cfg);
    const auto ml = ml_detect(sys, *c, cfg);
    const double se_ped = se.final_candidates.front().ped;
    const double ml_ped = ml.final_candidates.front().ped;
    equal_ml += se.hard_bits == ml.hard_bits;
    bound_ok += ml_ped <= se_ped * (1.0 + 1e-12) + 1e-15;
    equal_conventional += se.final_candidates.front().symbols == conv.final_candidates.front().symbols;
  }
  std::cout << "trials=" << f.trials << " nt=" << f.nt << " m=" << f.m << " k=" << f.k
            << " snr_db=" << format_snr(f.snr_db) << " saturated=" << (saturated ? "yes" : "no") << '\n'
            << "se_kbest==ml: " << equal_ml << "/" << f.trials << '\n'
            << "ml_ped<=se_ped: " << bound_ok << "/" << f.trials << '\n'
            << "se_kbest==conventional: " << equal_conventional << "/" << f.trials << '\n';
  const bool ok = bound_ok == f.trials && equal_conventional == f.trials && (!saturated || equal_ml == f.trials);
  std::cout << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Schnorr-Euchner K-best MIMO detection simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sekbest::version_string());

  // run
  auto* run = app.add_subcommand("run", "Run an experiment from a config file or a preset");
  std::string config_path;
  std::string preset_name;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> frames;
  OutputFlags run_flags;
  run->add_option("config", config_path, "Experiment config file");
  run->add_option("--preset", preset_name, "Built-in preset (model1, model2, model3)");
  run->add_option("--seed", seed, "Run seed (overrides the config)");
  run->add_option("--frames", frames, "Frames per cell (overrides the config)");
  add_output_flags(run, run_flags);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run an ad-hoc grid given on the command line");
  sekbest::ExperimentSpec sweep_spec;
  sweep_spec.name = "sweep";
  std::string sweep_algorithm = "se_kbest";
  OutputFlags sweep_flags;
  sweep->add_option("--n", sweep_spec.antenna_sizes, "Antenna counts (N x N)")->required()->delimiter(',');
  sweep->add_option("--m", sweep_spec.m_orders, "Constellation orders")->required()->delimiter(',');
  sweep->add_option("--k", sweep_spec.k_values, "K values")->required()->delimiter(',');
  sweep->add_option("--snr", sweep_spec.snr_grid_db, "SNR grid in dB")->required()->delimiter(',');
  sweep->add_option("--frames", sweep_spec.frames, "Frames per cell");
  sweep->add_option("--seed", sweep_spec.run_seed, "Run seed");
  sweep->add_option("--algorithm", sweep_algorithm, "se_kbest, conventional_kbest or ml");
  sweep->add_flag("--sorted-qrd", sweep_spec.sorted_qrd, "Order columns by residual norm during QR");
  sweep->add_flag("--early-stop", sweep_spec.early_stop, "Stop a cell after 500 bit errors");
  add_output_flags(sweep, sweep_flags);

  // complexity
  auto* complexity = app.add_subcommand("complexity", "Print node-count comparison tables");
  std::string mode = "formula";
  complexity->add_option("--mode", mode, "formula or tabulated");

  // oracle-check
  auto* oracle = app.add_subcommand("oracle-check", "Compare SE K-best against exhaustive ML");
  OracleFlags oracle_flags;
  oracle->add_option("--trials", oracle_flags.trials, "Number of random trials");
  oracle->add_option("--nt", oracle_flags.nt, "Transmit (= receive) antennas");
  oracle->add_option("--m", oracle_flags.m, "Constellation order");
  oracle->add_option("--k", oracle_flags.k, "K");
  oracle->add_option("--snr", oracle_flags.snr_db, "SNR in dB");
  oracle->add_option("--seed", oracle_flags.seed, "Seed");

  // presets
  auto* presets = app.add_subcommand("presets", "List built-in experiment presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (run->parsed()) {
      if (config_path.empty() == preset_name.empty()) {
        std::cerr << "error: give exactly one of a config file or --preset\n";
        return kExitUsage;
      }
      sekbest::ExperimentSpec spec;
      if (!preset_name.empty()) {
        auto p = sekbest::preset(preset_name);
        if (!p) {
          std::cerr << "error: unknown preset '" << preset_name << "'\n";
          return kExitUsage;
        }
        spec = *p;
      } else {
        spec = sekbest::load_experiment_config(config_path);
      }
      if (seed) spec.run_seed = *seed;
      if (frames) spec.frames = *frames;
      spec.validate();
      return execute(spec, run_flags);
    }
    if (sweep->parsed()) {
      auto a = sekbest::parse_algorithm(sweep_algorithm);
      if (!a) {
        std::cerr << "error: unknown algorithm '" << sweep_algorithm << "'\n";
        return kExitUsage;
      }
      sweep_spec.algorithm = *a;
      sweep_spec.validate();
      return execute(sweep_spec, sweep_flags);
    }
    if (complexity->parsed()) {
      auto m = sekbest::parse_table_mode(mode);
      if (!m) {
        std::cerr << "error: --mode must be formula or tabulated\n";
        return kExitUsage;
      }
      std::cout << sekbest::render_complexity_table(sekbest::compare_complexity_table(*m), *m);
      return kExitOk;
    }
    if (oracle->parsed()) return oracle_check(oracle_flags);
    if (presets->parsed()) {
      for (const auto& name : sekbest::preset_names()) {
        const auto spec = *sekbest::preset(name);
        std::cout << name << ": " << sekbest::to_json(spec).dump() << '\n';
      }
      return kExitOk;
    }
  } catch (const sekbest::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitUsage;
}
