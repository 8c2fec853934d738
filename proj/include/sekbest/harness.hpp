#pragma once

// Monte-Carlo BER experiments: per-frame simulation, cell aggregation,
// parallel sweeps over experiment grids, presets and result files.

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "sekbest/channel.hpp"
#include "sekbest/complexity.hpp"
#include "sekbest/detector.hpp"
#include "sekbest/error.hpp"
#include "sekbest/modem.hpp"
#include "sekbest/numerics.hpp"

#ifndef SEKBEST_VERSION
#define SEKBEST_VERSION "0.1.0"
#endif
#ifndef SEKBEST_GIT_DESCRIBE
#define SEKBEST_GIT_DESCRIBE "unknown"
#endif

namespace sekbest {

inline std::string version_string() { return std::string("sekbest ") + SEKBEST_VERSION + " (" + SEKBEST_GIT_DESCRIBE + ")"; }

inline constexpr std::size_t kDefaultFrames = 10000;
inline constexpr std::uint64_t kEarlyStopErrors = 500;
inline constexpr int kMaxChannelRedraws = 16;

struct ExperimentSpec {
  std::string name = "custom";
  std::vector<std::size_t> antenna_sizes;
  std::vector<unsigned> m_orders;
  std::vector<std::size_t> k_values;
  std::vector<double> snr_grid_db;
  std::size_t frames = kDefaultFrames;
  std::uint64_t run_seed = 0;
  Algorithm algorithm = Algorithm::se_kbest;
  bool sorted_qrd = false;
  bool early_stop = false;
  double ml_budget = kDefaultMlBudget;

  void validate() const {
    if (antenna_sizes.empty()) throw ConfigError("antenna_sizes is empty");
    if (m_orders.empty()) throw ConfigError("m_orders is empty");
    if (k_values.empty()) throw ConfigError("k_values is empty");
    if (snr_grid_db.empty()) throw ConfigError("snr grid is empty");
    if (frames < 1) throw ConfigError("frames must be >= 1");
    for (auto n : antenna_sizes)
      if (n < 1) throw ConfigError("antenna sizes must be >= 1");
    for (auto m : m_orders) (void)Constellation(m);
    for (auto k : k_values)
      if (k < 1) throw ConfigError("K values must be >= 1");
    for (auto s : snr_grid_db)
      if (std::isnan(s) || (std::isinf(s) && s < 0)) throw ConfigError("SNR values must be numbers or +inf");
  }
};

struct Cell {
  std::size_t n = 0;  // N x N antennas
  unsigned m = 0;
  std::size_t k = 0;
  double snr_db = 0.0;
};

struct BerPoint {
  std::size_t n = 0;
  unsigned m = 0;
  std::size_t k = 0;
  double snr_db = 0.0;
  std::uint64_t frames_run = 0;
  std::uint64_t bits_total = 0;
  std::uint64_t bit_errors = 0;
  double ber = 0.0;
  double mean_nodes_per_frame = 0.0;
  double wall_time_s = 0.0;
  Algorithm algorithm = Algorithm::se_kbest;
  std::uint64_t run_seed = 0;
  std::uint64_t nodes_total = 0;
  std::uint64_t frame_error_sq_sum = 0;  // sum over frames of (bit errors in frame)^2
  std::uint64_t channel_redraws = 0;

  // Standard error of the BER estimate from the spread of per-frame error counts.
  double standard_error() const {
    if (frames_run < 2 || bits_total == 0) return 0.0;
    const double f = static_cast<double>(frames_run);
    const double bits_per_frame = static_cast<double>(bits_total) / f;
    const double sum = static_cast<double>(bit_errors);
    const double var = std::max(0.0, (static_cast<double>(frame_error_sq_sum) - sum * sum / f) / (f - 1.0));
    return std::sqrt(var / f) / bits_per_frame;
  }
};

struct CellFailure {
  Cell cell;
  std::string error;
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<BerPoint> points;
  std::vector<CellFailure> failures;
  double elapsed_s = 0.0;
};

struct RunOptions {
  unsigned threads = 0;       // 0: hardware concurrency
  std::size_t chunk_frames = 250;
  std::ostream* progress = nullptr;
};

struct FrameOutcome {
  std::uint64_t bit_errors = 0;
  std::uint64_t nodes = 0;
  std::uint64_t redraws = 0;
};

// bits -> modulate -> channel -> noise -> QR -> detect -> count errors.
inline FrameOutcome simulate_frame(const Cell& cell, const Constellation& c, Algorithm algorithm, bool sorted_qrd,
                                   std::uint64_t run_seed, std::uint64_t frame_index,
                                   double ml_budget = kDefaultMlBudget) {
  const SeedPath path{run_seed, frame_index};
  auto bit_rng = make_stream(path, Stream::bits);
  const BitFrame bits = random_bits(cell.n * c.bits_per_symbol(), bit_rng);
  const auto x = modulate(bits, c);
  const NoiseModel noise = NoiseModel::from_snr_db(cell.snr_db, cell.n);

  DetectorConfig cfg;
  cfg.k = cell.k;
  cfg.algorithm = algorithm;
  cfg.sorted_qrd = sorted_qrd;
  cfg.noise_variance = noise.sigma2;
  cfg.ml_budget = ml_budget;

  FrameOutcome out;
  for (std::uint64_t attempt = 0;; ++attempt) {
    auto ch_rng = make_stream(path, Stream::channel, attempt);
    const ComplexMatrix h = draw_channel(cell.n, cell.n, ch_rng);
    auto noise_rng = make_stream(path, Stream::noise, attempt);
    const auto y = apply_channel(h, x, noise, noise_rng);
    std::optional<RealSystem> sys;
    try {
      sys = make_real_system(h, y, {.sorted_qrd = sorted_qrd, .keep_q = false});
    } catch (const RankDeficientError&) {
      if (attempt + 1 >= kMaxChannelRedraws) throw;
      ++out.redraws;
      continue;
    }
    const DetectionResult res = detect(*sys, c, cfg);
    for (std::size_t i = 0; i < bits.size(); ++i) out.bit_errors += (bits[i] != res.hard_bits[i]);
    out.nodes = res.nodes_expanded;
    return out;
  }
}

namespace detail {

struct Partial {
  std::uint64_t frames = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t error_sq = 0;
  std::uint64_t nodes = 0;
  std::uint64_t redraws = 0;
  double seconds = 0.0;

  void add(const FrameOutcome& f) {
    ++frames;
    bit_errors += f.bit_errors;
    error_sq += f.bit_errors * f.bit_errors;
    nodes += f.nodes;
    redraws += f.redraws;
  }
};

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

inline void check_cell(const Cell& cell, Algorithm algorithm, double ml_budget) {
  if (cell.n < 1 || cell.k < 1) throw ConfigError("invalid cell");
  if (algorithm == Algorithm::ml && ml_leaf_count(cell.m, 2 * cell.n) > ml_budget * (1.0 + 1e-12))
    throw BudgetExceededError("ML budget exceeded: " + std::to_string(cell.m) + "^" + std::to_string(cell.n) +
                              " candidates");
}

// Runs `count` tasks over `threads` workers; each task index is executed once.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
}

}  // namespace detail

inline std::vector<Cell> expand_cells(const ExperimentSpec& spec) {
  std::vector<Cell> cells;
  for (auto n : spec.antenna_sizes)
    for (auto m : spec.m_orders)
      for (auto k : spec.k_values)
        for (auto snr : spec.snr_grid_db) cells.push_back({n, m, k, snr});
  return cells;
}

namespace detail {

inline BerPoint make_point(const Cell& cell, const Partial& p, unsigned bits_per_symbol, Algorithm algorithm,
                           std::uint64_t run_seed) {
  BerPoint pt;
  pt.n = cell.n;
  pt.m = cell.m;
  pt.k = cell.k;
  pt.snr_db = cell.snr_db;
  pt.frames_run = p.frames;
  pt.bits_total = p.frames * cell.n * bits_per_symbol;
  pt.bit_errors = p.bit_errors;
  pt.ber = pt.bits_total ? static_cast<double>(p.bit_errors) / static_cast<double>(pt.bits_total) : 0.0;
  pt.nodes_total = p.nodes;
  pt.mean_nodes_per_frame = p.frames ? static_cast<double>(p.nodes) / static_cast<double>(p.frames) : 0.0;
  pt.wall_time_s = p.seconds;
  pt.algorithm = algorithm;
  pt.run_seed = run_seed;
  pt.frame_error_sq_sum = p.error_sq;
  pt.channel_redraws = p.redraws;
  return pt;
}

}  // namespace detail

// Runs every cell of the spec. Cells are split into frame chunks that are
// scheduled over the worker pool; aggregation is in frame order, so results
// do not depend on the number of workers. A cell that throws is reported in
// `failures` and the others continue.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, const RunOptions& opts = {}) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::vector<Cell> cells = expand_cells(spec);
  const std::size_t chunk = spec.early_stop ? spec.frames : std::max<std::size_t>(1, opts.chunk_frames);
  const std::size_t chunks_per_cell = (spec.frames + chunk - 1) / chunk;

  std::map<unsigned, Constellation> constellations;
  for (auto m : spec.m_orders) constellations.emplace(m, Constellation(m));

  std::vector<detail::Partial> partials(cells.size() * chunks_per_cell);
  std::vector<std::string> errors(cells.size());
  std::vector<std::once_flag> error_once(cells.size());
  std::vector<std::atomic<bool>> failed(cells.size());
  std::atomic<std::size_t> done_tasks{0};
  std::mutex progress_mutex;

  for (std::size_t i = 0; i < cells.size(); ++i) {
    try {
      detail::check_cell(cells[i], spec.algorithm, spec.ml_budget);
    } catch (const std::exception& e) {
      errors[i] = e.what();
      failed[i] = true;
    }
  }

  const std::size_t tasks = cells.size() * chunks_per_cell;
  detail::parallel_for(tasks, detail::resolve_threads(opts.threads), [&](std::size_t task) {
    const std::size_t ci = task / chunks_per_cell;
    const std::size_t chunk_index = task % chunks_per_cell;
    if (failed[ci]) return;
    const Cell& cell = cells[ci];
    const Constellation& c = constellations.at(cell.m);
    auto& part = partials[task];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const std::size_t begin = chunk_index * chunk;
      const std::size_t end = std::min(spec.frames, begin + chunk);
      for (std::size_t f = begin; f < end; ++f) {
        part.add(simulate_frame(cell, c, spec.algorithm, spec.sorted_qrd, spec.run_seed, f, spec.ml_budget));
        if (spec.early_stop && part.bit_errors >= kEarlyStopErrors) break;
      }
    } catch (const std::exception& e) {
      std::call_once(error_once[ci], [&] { errors[ci] = e.what(); });
      failed[ci] = true;
    }
    part.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::size_t done = ++done_tasks;
    if (opts.progress != nullptr && (done % std::max<std::size_t>(1, tasks / 20) == 0 || done == tasks)) {
      std::lock_guard lock(progress_mutex);
      *opts.progress << "[" << spec.name << "] " << done << "/" << tasks << " chunks\n" << std::flush;
    }
  });

  ExperimentResult result;
  result.spec = spec;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    if (failed[ci]) {
      result.failures.push_back({cells[ci], errors[ci]});
      continue;
    }
    detail::Partial total;
    for (std::size_t j = 0; j < chunks_per_cell; ++j) {
      const auto& p = partials[ci * chunks_per_cell + j];
      total.frames += p.frames;
      total.bit_errors += p.bit_errors;
      total.error_sq += p.error_sq;
      total.nodes += p.nodes;
      total.redraws += p.redraws;
      total.seconds += p.seconds;
    }
    if (total.redraws > 0 && opts.progress != nullptr)
      *opts.progress << "[" << spec.name << "] redrew " << total.redraws << " rank-deficient channel(s)\n";
    result.points.push_back(detail::make_point(cells[ci], total, constellations.at(cells[ci].m).bits_per_symbol(),
                                               spec.algorithm, spec.run_seed));
  }
  result.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

inline BerPoint run_cell(const Cell& cell, std::size_t frames, std::uint64_t run_seed,
                         Algorithm algorithm = Algorithm::se_kbest, const RunOptions& opts = {},
                         bool sorted_qrd = false) {
  ExperimentSpec spec;
  spec.name = "cell";
  spec.antenna_sizes = {cell.n};
  spec.m_orders = {cell.m};
  spec.k_values = {cell.k};
  spec.snr_grid_db = {cell.snr_db};
  spec.frames = frames;
  spec.run_seed = run_seed;
  spec.algorithm = algorithm;
  spec.sorted_qrd = sorted_qrd;
  auto result = run_experiment(spec, opts);
  if (!result.failures.empty()) throw std::runtime_error(result.failures.front().error);
  return result.points.front();
}

// ---------------------------------------------------------------------------
// Presets

// Average receive SNR per antenna; 10 dB per antenna is about 1 dB per
// stream at 8x8.
inline const std::vector<double>& preset_snr_grid() {
  static const std::vector<double> grid = {10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60};
  return grid;
}

inline std::optional<ExperimentSpec> preset(std::string_view name) {
  ExperimentSpec spec;
  spec.m_orders = {256, 1024};
  spec.snr_grid_db = preset_snr_grid();
  spec.frames = kDefaultFrames;
  if (name == "model1") {
    spec.name = "model1";
    spec.antenna_sizes = {8, 25, 40, 50, 60, 80, 100, 120};
    spec.k_values = {5};
  } else if (name == "model2") {
    spec.name = "model2";
    spec.antenna_sizes = {8};
    spec.k_values = {5, 10, 15, 20, 100};
  } else if (name == "model3") {
    spec.name = "model3";
    spec.antenna_sizes = {100};
    spec.k_values = {5, 10, 15, 20};
  } else {
    return std::nullopt;
  }
  return spec;
}

inline std::vector<std::string> preset_names() { return {"model1", "model2", "model3"}; }

// ---------------------------------------------------------------------------
// Result files

inline constexpr std::string_view kCsvHeader =
    "n,m,k,snr_db,frames,bits_total,bit_errors,ber,mean_nodes_per_frame,algorithm,run_seed";

inline std::string format_snr(double snr_db) {
  if (std::isinf(snr_db)) return snr_db > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", snr_db);
  return buf;
}

inline void write_csv(std::ostream& os, const std::vector<BerPoint>& points) {
  os << kCsvHeader << '\n';
  char ber[32];
  char nodes[32];
  for (const auto& p : points) {
    std::snprintf(ber, sizeof ber, "%.10g", p.ber);
    std::snprintf(nodes, sizeof nodes, "%.6f", p.mean_nodes_per_frame);
    os << p.n << ',' << p.m << ',' << p.k << ',' << format_snr(p.snr_db) << ',' << p.frames_run << ','
       << p.bits_total << ',' << p.bit_errors << ',' << ber << ',' << nodes << ',' << to_string(p.algorithm) << ','
       << p.run_seed << '\n';
  }
}

inline nlohmann::ordered_json snr_json(double snr_db) {
  if (std::isinf(snr_db)) return format_snr(snr_db);
  return snr_db;
}

inline nlohmann::ordered_json to_json(const ExperimentSpec& spec) {
  nlohmann::ordered_json j;
  j["name"] = spec.name;
  j["antenna_sizes"] = spec.antenna_sizes;
  j["m_orders"] = spec.m_orders;
  j["k_values"] = spec.k_values;
  auto grid = nlohmann::ordered_json::array();
  for (double s : spec.snr_grid_db) grid.push_back(snr_json(s));
  j["snr_db"] = grid;
  j["frames"] = spec.frames;
  j["run_seed"] = spec.run_seed;
  j["algorithm"] = to_string(spec.algorithm);
  j["sorted_qrd"] = spec.sorted_qrd;
  j["early_stop"] = spec.early_stop;
  return j;
}

inline nlohmann::ordered_json summary_json(const ExperimentResult& result) {
  nlohmann::ordered_json j;
  j["version"] = version_string();
  j["spec"] = to_json(result.spec);
  auto points = nlohmann::ordered_json::array();
  for (const auto& p : result.points) {
    nlohmann::ordered_json q;
    q["n"] = p.n;
    q["m"] = p.m;
    q["k"] = p.k;
    q["snr_db"] = snr_json(p.snr_db);
    q["frames"] = p.frames_run;
    q["bits_total"] = p.bits_total;
    q["bit_errors"] = p.bit_errors;
    q["ber"] = p.ber;
    q["ber_std_error"] = p.standard_error();
    q["mean_nodes_per_frame"] = p.mean_nodes_per_frame;
    if (auto f = complexity_formula(p.algorithm, p.m, p.n, p.k).exact)
      q["formula_nodes_per_frame"] = *f;
    else
      q["formula_nodes_per_frame"] = nullptr;
    q["wall_time_s"] = p.wall_time_s;
    q["channel_redraws"] = p.channel_redraws;
    q["status"] = "ok";
    points.push_back(std::move(q));
  }
  j["points"] = points;
  auto failures = nlohmann::ordered_json::array();
  for (const auto& f : result.failures) {
    failures.push_back({{"n", f.cell.n},
                        {"m", f.cell.m},
                        {"k", f.cell.k},
                        {"snr_db", snr_json(f.cell.snr_db)},
                        {"status", "failed"},
                        {"error", f.error}});
  }
  j["failures"] = failures;
  j["elapsed_s"] = result.elapsed_s;
  return j;
}

// Writes <dir>/results.csv and <dir>/summary.json. Refuses to replace an
// existing results.csv unless `force` is set.
inline void write_results(const std::filesystem::path& dir, const ExperimentResult& result, bool force) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path csv = dir / "results.csv";
  const fs::path json = dir / "summary.json";
  if (!force && (fs::exists(csv) || fs::exists(json)))
    throw ConfigError("refusing to overwrite results in " + dir.string() + " (use --force)");
  {
    std::ofstream os(csv, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + csv.string());
    write_csv(os, result.points);
  }
  std::ofstream os(json, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + json.string());
  os << summary_json(result).dump(2) << '\n';
}

}  // namespace sekbest
