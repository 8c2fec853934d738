#pragma once

// Real-domain tree-search detectors over the triangular model Y = R x + N:
//
//  * se_kbest_detect: K-best where each parent's children are produced lazily
//    in Schnorr-Euchner order and the K survivors of a level are drawn from a
//    pool holding one pending child per parent (distributed sorting).
//  * conventional_kbest_detect: every parent expands all sqrt(M) children,
//    followed by a global sort.
//  * ml_detect: exhaustive search over all M^{N_T} vectors.
//
// Tree levels run from the last row of R (root) to row 0. The partial
// Euclidean distance (PED) increment at row i is (r_ii * (b_i - x_i))^2 with
// b_i = (Y_i - sum_{j>i} r_ij x_j) / r_ii; nodes_expanded counts one per
// increment evaluated.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sekbest/error.hpp"
#include "sekbest/modem.hpp"
#include "sekbest/numerics.hpp"

namespace sekbest {

enum class Algorithm { se_kbest, conventional_kbest, ml };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::se_kbest: return "se_kbest";
    case Algorithm::conventional_kbest: return "conventional_kbest";
    case Algorithm::ml: return "ml";
  }
  return "unknown";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view s) {
  if (s == "se_kbest" || s == "se") return Algorithm::se_kbest;
  if (s == "conventional_kbest" || s == "conventional") return Algorithm::conventional_kbest;
  if (s == "ml") return Algorithm::ml;
  return std::nullopt;
}

inline constexpr double kDefaultMlBudget = 1e7;

struct DetectorConfig {
  std::size_t k = 5;
  Algorithm algorithm = Algorithm::se_kbest;
  bool sorted_qrd = false;
  bool llr_enabled = false;
  double noise_variance = 1.0;  // sigma^2 used for LLR scaling
  double ml_budget = kDefaultMlBudget;
};

struct DetectionResult {
  BitFrame hard_bits;
  std::optional<std::vector<double>> llrs;
  std::uint64_t nodes_expanded = 0;
  std::vector<ScoredPath> final_candidates;  // ascending PED; front() is the decision
};

// Ordering of levels around a center: by distance, then by magnitude, then by value.
inline bool closer_to(double center, double a, double b) noexcept {
  const double da = std::abs(center - a);
  const double db = std::abs(center - b);
  if (da != db) return da < db;
  if (std::abs(a) != std::abs(b)) return std::abs(a) < std::abs(b);
  return a < b;
}

// Schnorr-Euchner enumeration over an ascending level set: the nearest level
// first, then zig-zag outward so that every emitted level is no farther from
// the center than the one after it.
class ChildEnumerator {
 public:
  ChildEnumerator() = default;

  ChildEnumerator(double center, std::span<const double> levels) : levels_(levels), center_(center) {
    const auto n = static_cast<int>(levels.size());
    int hi = static_cast<int>(std::lower_bound(levels.begin(), levels.end(), center) - levels.begin());
    int pick = std::min(hi, n - 1);
    if (hi > 0 && (hi == n || closer_to(center, levels[static_cast<std::size_t>(hi - 1)],
                                        levels[static_cast<std::size_t>(pick)])))
      pick = hi - 1;
    first_ = pick;
    lo_ = pick - 1;
    hi_ = pick + 1;
    emitted_ = 1;
  }

  int first() const noexcept { return first_; }
  double center() const noexcept { return center_; }
  std::size_t emitted() const noexcept { return emitted_; }
  bool exhausted() const noexcept { return lo_ < 0 && hi_ >= static_cast<int>(levels_.size()); }

  // Index of the next level in enumeration order, or nullopt once all are out.
  std::optional<int> next() noexcept {
    const int n = static_cast<int>(levels_.size());
    int pick;
    if (lo_ < 0 && hi_ >= n) return std::nullopt;
    if (lo_ < 0) {
      pick = hi_++;
    } else if (hi_ >= n) {
      pick = lo_--;
    } else if (closer_to(center_, levels_[static_cast<std::size_t>(hi_)], levels_[static_cast<std::size_t>(lo_)])) {
      pick = hi_++;
    } else {
      pick = lo_--;
    }
    ++emitted_;
    return pick;
  }

 private:
  std::span<const double> levels_;
  double center_ = 0.0;
  int first_ = 0;
  int lo_ = -1;
  int hi_ = 0;
  std::size_t emitted_ = 0;
};

inline double first_child(double center, std::span<const double> levels) {
  return levels[static_cast<std::size_t>(ChildEnumerator(center, levels).first())];
}

inline double first_child(double center, const Constellation& c) { return first_child(center, c.levels()); }

inline std::optional<double> next_child(ChildEnumerator& state, std::span<const double> levels) {
  if (auto idx = state.next()) return levels[static_cast<std::size_t>(*idx)];
  return std::nullopt;
}

inline std::optional<double> next_child(ChildEnumerator& state, const Constellation& c) {
  return next_child(state, c.levels());
}

namespace detail {

// Survivors of one tree level. Paths hold level indices in tree-variable
// order; only positions >= the current row are meaningful.
struct Layer {
  std::size_t width = 0;
  std::vector<double> ped;
  std::vector<std::int16_t> paths;

  Layer(std::size_t capacity, std::size_t n) : ped(capacity), paths(capacity * n) {}

  std::span<std::int16_t> path(std::size_t p, std::size_t n) { return {paths.data() + p * n, n}; }
  std::span<const std::int16_t> path(std::size_t p, std::size_t n) const { return {paths.data() + p * n, n}; }
};

class TreeSearch {
 public:
  TreeSearch(const RealSystem& sys, const Constellation& c) : sys_(sys), levels_(c.levels()), n_(sys.dimension()) {
    if (sys.r.rows() != n_ || sys.y_rot.size() != n_) throw DimensionError("inconsistent real system");
    if (sys.column_order.size() != n_) throw DimensionError("column order length mismatch");
    for (std::size_t i = 0; i < n_; ++i)
      if (!(sys.r(i, i) >= kRankTolerance)) throw RankDeficientError("r diagonal must be positive");
  }

  std::size_t n() const noexcept { return n_; }
  std::span<const double> levels() const noexcept { return levels_; }

  // Zero-noise estimate b_i of x_i given the decided entries above row i.
  double center(std::size_t row, std::span<const std::int16_t> path) const noexcept {
    const auto r = sys_.r.row(row);
    double acc = sys_.y_rot[row];
    for (std::size_t j = row + 1; j < n_; ++j) acc -= r[j] * levels_[static_cast<std::size_t>(path[j])];
    return acc / r[row];
  }

  double increment(std::size_t row, double center, int index) const noexcept {
    const double d = sys_.r(row, row) * (center - levels_[static_cast<std::size_t>(index)]);
    return d * d;
  }

  ScoredPath to_scored(std::span<const std::int16_t> path, double ped) const {
    ScoredPath out;
    out.symbols.resize(n_);
    for (std::size_t j = 0; j < n_; ++j)
      out.symbols[sys_.column_order[j]] = levels_[static_cast<std::size_t>(path[j])];
    out.ped = ped;
    return out;
  }

  std::vector<int> unpermuted_indices(std::span<const std::int16_t> path) const {
    std::vector<int> out(n_);
    for (std::size_t j = 0; j < n_; ++j) out[sys_.column_order[j]] = path[j];
    return out;
  }

 private:
  const RealSystem& sys_;
  std::span<const double> levels_;
  std::size_t n_;
};

inline DetectionResult finish(const TreeSearch& search, const Layer& last, const Constellation& c,
                              const DetectorConfig& cfg, std::uint64_t nodes) {
  DetectionResult res;
  res.nodes_expanded = nodes;
  res.final_candidates.reserve(last.width);
  for (std::size_t p = 0; p < last.width; ++p)
    res.final_candidates.push_back(search.to_scored(last.path(p, search.n()), last.ped[p]));
  res.hard_bits = bits_from_level_indices(search.unpermuted_indices(last.path(0, search.n())), c);
  if (cfg.llr_enabled) res.llrs = compute_llrs(res.final_candidates, cfg.noise_variance, c);
  return res;
}

}  // namespace detail

inline DetectionResult se_kbest_detect(const RealSystem& sys, const Constellation& c, const DetectorConfig& cfg) {
  if (cfg.k < 1) throw ConfigError("K must be >= 1");
  detail::TreeSearch search(sys, c);
  const std::size_t n = search.n();
  const std::size_t k = cfg.k;

  detail::Layer parents(k, n);
  detail::Layer children(k, n);
  parents.width = 1;  // the root: an empty path with zero PED
  parents.ped[0] = 0.0;

  struct Pending {
    ChildEnumerator en;
    int child = 0;
    double ped = 0.0;
  };
  std::vector<Pending> pending(k);
  // min-heap of parent indices keyed by (pending PED, parent index)
  std::vector<std::uint32_t> pool;
  pool.reserve(k);
  const auto after = [&pending](std::uint32_t a, std::uint32_t b) {
    if (pending[a].ped != pending[b].ped) return pending[a].ped > pending[b].ped;
    return a > b;
  };
  std::uint64_t nodes = 0;

  for (std::size_t row = n; row-- > 0;) {
    pool.clear();
    for (std::size_t p = 0; p < parents.width; ++p) {
      auto& slot = pending[p];
      const double b = search.center(row, parents.path(p, n));
      slot.en = ChildEnumerator(b, search.levels());
      slot.child = slot.en.first();
      slot.ped = parents.ped[p] + search.increment(row, b, slot.child);
      pool.push_back(static_cast<std::uint32_t>(p));
      ++nodes;
    }
    std::make_heap(pool.begin(), pool.end(), after);

    children.width = 0;
    while (children.width < k && !pool.empty()) {
      std::pop_heap(pool.begin(), pool.end(), after);
      const std::uint32_t best = pool.back();
      auto& slot = pending[best];
      const std::size_t out = children.width++;
      auto dst = children.path(out, n);
      auto src = parents.path(best, n);
      std::copy(src.begin() + static_cast<std::ptrdiff_t>(row + 1), src.end(),
                dst.begin() + static_cast<std::ptrdiff_t>(row + 1));
      dst[row] = static_cast<std::int16_t>(slot.child);
      children.ped[out] = slot.ped;

      if (children.width == k) break;
      // replace the extracted child by the same parent's next child
      if (auto nx = slot.en.next()) {
        slot.child = *nx;
        slot.ped = parents.ped[best] + search.increment(row, slot.en.center(), slot.child);
        ++nodes;
        std::push_heap(pool.begin(), pool.end(), after);
      } else {
        pool.pop_back();
      }
    }
    std::swap(parents, children);
  }
  return detail::finish(search, parents, c, cfg, nodes);
}

inline DetectionResult conventional_kbest_detect(const RealSystem& sys, const Constellation& c,
                                                 const DetectorConfig& cfg) {
  if (cfg.k < 1) throw ConfigError("K must be >= 1");
  detail::TreeSearch search(sys, c);
  const std::size_t n = search.n();
  const std::size_t k = cfg.k;
  const std::size_t side = c.side();

  detail::Layer parents(k, n);
  detail::Layer children(k, n);
  parents.width = 1;
  parents.ped[0] = 0.0;

  struct Child {
    double ped;
    std::uint32_t parent;
    std::uint32_t rank;
    int index;
  };
  std::vector<Child> expanded;
  expanded.reserve(k * side);
  std::uint64_t nodes = 0;

  for (std::size_t row = n; row-- > 0;) {
    expanded.clear();
    for (std::size_t p = 0; p < parents.width; ++p) {
      const double b = search.center(row, parents.path(p, n));
      ChildEnumerator en(b, search.levels());
      std::uint32_t rank = 0;
      for (std::optional<int> idx = en.first(); idx; idx = en.next()) {
        expanded.push_back({parents.ped[p] + search.increment(row, b, *idx), static_cast<std::uint32_t>(p), rank++,
                            *idx});
        ++nodes;
      }
    }
    const std::size_t keep = std::min(k, expanded.size());
    std::partial_sort(expanded.begin(), expanded.begin() + static_cast<std::ptrdiff_t>(keep), expanded.end(),
                      [](const Child& a, const Child& b) {
                        if (a.ped != b.ped) return a.ped < b.ped;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.rank < b.rank;
                      });
    children.width = keep;
    for (std::size_t out = 0; out < keep; ++out) {
      const auto& ch = expanded[out];
      auto dst = children.path(out, n);
      auto src = parents.path(ch.parent, n);
      std::copy(src.begin() + static_cast<std::ptrdiff_t>(row + 1), src.end(),
                dst.begin() + static_cast<std::ptrdiff_t>(row + 1));
      dst[row] = static_cast<std::int16_t>(ch.index);
      children.ped[out] = ch.ped;
    }
    std::swap(parents, children);
  }
  return detail::finish(search, parents, c, cfg, nodes);
}

// Number of leaves an exhaustive search visits: M^{N_T} = sqrt(M)^{2 N_T}.
inline double ml_leaf_count(unsigned order, std::size_t real_dimension) {
  return std::pow(static_cast<double>(order), static_cast<double>(real_dimension) / 2.0);
}

inline DetectionResult ml_detect(const RealSystem& sys, const Constellation& c, const DetectorConfig& cfg = {}) {
  detail::TreeSearch search(sys, c);
  const std::size_t n = search.n();
  const double leaves = ml_leaf_count(c.order(), n);
  if (leaves > cfg.ml_budget * (1.0 + 1e-12))
    throw BudgetExceededError("ML budget exceeded: " + std::to_string(c.order()) + "^" + std::to_string(n / 2) +
                              " candidates > " + std::to_string(static_cast<long long>(cfg.ml_budget)));

  const int side = static_cast<int>(c.side());
  std::vector<std::int16_t> path(n, 0);
  std::vector<std::int16_t> best_path(n, 0);
  std::vector<double> ped(n + 1, 0.0);     // ped[row] = PED after deciding row
  std::vector<double> centers(n, 0.0);
  std::vector<int> cursor(n, 0);
  double best = std::numeric_limits<double>::infinity();
  std::uint64_t nodes = 0;

  // Depth-first walk; cursor[row] is the next child index to try at that row.
  std::size_t row = n - 1;
  centers[row] = search.center(row, path);
  cursor[row] = 0;
  while (true) {
    if (cursor[row] == side) {
      if (row == n - 1) break;
      ++row;
      continue;
    }
    const int idx = cursor[row]++;
    path[row] = static_cast<std::int16_t>(idx);
    ped[row] = ped[row + 1] + search.increment(row, centers[row], idx);
    ++nodes;
    if (row == 0) {
      if (ped[0] < best) {
        best = ped[0];
        best_path = path;
      }
      continue;
    }
    --row;
    centers[row] = search.center(row, path);
    cursor[row] = 0;
  }

  detail::Layer last(1, n);
  last.width = 1;
  last.ped[0] = best;
  std::copy(best_path.begin(), best_path.end(), last.paths.begin());
  return detail::finish(search, last, c, cfg, nodes);
}

inline DetectionResult detect(const RealSystem& sys, const Constellation& c, const DetectorConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::se_kbest: return se_kbest_detect(sys, c, cfg);
    case Algorithm::conventional_kbest: return conventional_kbest_detect(sys, c, cfg);
    case Algorithm::ml: return ml_detect(sys, c, cfg);
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace sekbest
