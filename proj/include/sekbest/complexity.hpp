#pragma once

// Closed-form node counts and the complexity comparison tables for the
// 8x8 and 100x100 configurations.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sekbest/detector.hpp"

namespace sekbest {

struct NodeCount {
  double log10 = 0.0;
  std::optional<std::uint64_t> exact;  // absent when the count does not fit in 64 bits
};

namespace detail {

inline NodeCount exact_count(std::uint64_t v) { return {std::log10(static_cast<double>(v)), v}; }

inline std::uint64_t isqrt_order(unsigned m) {
  return static_cast<std::uint64_t>(std::llround(std::sqrt(static_cast<double>(m))));
}

}  // namespace detail

//  ml:           M^{N_T}
//  conventional: K * sqrt(M) * 2 N_T   (real domain)
//  se_kbest:     (2K - 1) * 2 N_T      (independent of M)
inline NodeCount complexity_formula(Algorithm algorithm, unsigned m, std::size_t n_t, std::size_t k) {
  switch (algorithm) {
    case Algorithm::ml: {
      const double lg = static_cast<double>(n_t) * std::log10(static_cast<double>(m));
      NodeCount out{lg, std::nullopt};
      if (lg < 18.0) {
        std::uint64_t v = 1;
        for (std::size_t i = 0; i < n_t; ++i) v *= m;
        out.exact = v;
      }
      return out;
    }
    case Algorithm::conventional_kbest: return detail::exact_count(k * detail::isqrt_order(m) * 2 * n_t);
    case Algorithm::se_kbest: return detail::exact_count((2 * k - 1) * 2 * n_t);
  }
  return {};
}

// Complex-domain reading K * M * 2 N_T, which is what the printed
// conventional K-best entries of the 8x8 / 100x100 tables follow.
inline NodeCount tabulated_conventional_count(unsigned m, std::size_t n_t, std::size_t k) {
  return detail::exact_count(k * m * 2 * n_t);
}

enum class Rounding { nearest, truncate };

inline double round_tenths(double x, Rounding mode) {
  // the small offset absorbs representation error in x * 10
  return mode == Rounding::nearest ? std::floor(x * 10.0 + 0.5 + 1e-9) / 10.0 : std::floor(x * 10.0 + 1e-9) / 10.0;
}

inline std::string power_of_ten(double log10, Rounding mode) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "10^%.1f", round_tenths(log10, mode));
  return buf;
}

// M^{N_T} written as a power of 256 (1024^8 == 256^10).
inline std::string ml_power_of_256(unsigned m, std::size_t n_t) {
  const double exponent = static_cast<double>(n_t) * std::log2(static_cast<double>(m)) / 8.0;
  char buf[32];
  if (std::abs(exponent - std::round(exponent)) < 1e-9)
    std::snprintf(buf, sizeof buf, "256^%lld", static_cast<long long>(std::llround(exponent)));
  else
    std::snprintf(buf, sizeof buf, "256^%.2f", exponent);
  return buf;
}

enum class TableMode { formula, tabulated };

inline std::optional<TableMode> parse_table_mode(std::string_view s) {
  if (s == "formula") return TableMode::formula;
  if (s == "tabulated") return TableMode::tabulated;
  return std::nullopt;
}

struct ComplexityRow {
  std::string table;  // "8x8" or "100x100"
  Algorithm algorithm;
  std::size_t n = 0;
  unsigned m = 0;
  std::size_t k = 0;
  NodeCount count;
  std::string display;
  std::string printed;  // value shown in the published table
  bool anomaly = false;
  std::string note;
};

namespace detail {

struct PublishedCell {
  std::size_t n;
  unsigned m;
  std::size_t k;
  Algorithm algorithm;
  std::string_view printed;
};

// Published values for the 8x8 and 100x100 comparison tables.
inline constexpr PublishedCell kPublished[] = {
    {100, 256, 5, Algorithm::ml, "256^100"},
    {100, 1024, 5, Algorithm::ml, "256^125"},
    {100, 256, 10, Algorithm::ml, "256^100"},
    {100, 1024, 10, Algorithm::ml, "256^125"},
    {100, 256, 5, Algorithm::conventional_kbest, "10^5.5"},
    {100, 1024, 5, Algorithm::conventional_kbest, "10^6.0"},
    {100, 256, 10, Algorithm::conventional_kbest, "10^5.7"},
    {100, 1024, 10, Algorithm::conventional_kbest, "10^6.3"},
    {100, 256, 5, Algorithm::se_kbest, "10^3.2"},
    {100, 1024, 5, Algorithm::se_kbest, "10^3.2"},
    {100, 256, 10, Algorithm::se_kbest, "10^3.5"},
    {100, 1024, 10, Algorithm::se_kbest, "10^3.5"},
    {8, 256, 5, Algorithm::ml, "256^8"},
    {8, 1024, 5, Algorithm::ml, "256^10"},
    {8, 256, 10, Algorithm::ml, "256^8"},
    {8, 1024, 10, Algorithm::ml, "256^10"},
    {8, 256, 5, Algorithm::conventional_kbest, "10^4.3"},
    {8, 1024, 5, Algorithm::conventional_kbest, "10^4.9"},
    {8, 256, 10, Algorithm::conventional_kbest, "10^4.6"},
    {8, 1024, 10, Algorithm::conventional_kbest, "10^5.2"},
    {8, 256, 5, Algorithm::se_kbest, "10^2.1"},
    {8, 1024, 5, Algorithm::se_kbest, "10^2.1"},
    {8, 256, 10, Algorithm::se_kbest, "10^2.5"},
    {8, 1024, 10, Algorithm::se_kbest, "10^2.5"},
};

inline std::string_view row_label(Algorithm a) {
  switch (a) {
    case Algorithm::ml: return "ml";
    case Algorithm::conventional_kbest: return "conventional";
    case Algorithm::se_kbest: return "this-work";
  }
  return "?";
}

}  // namespace detail

inline std::span<const detail::PublishedCell> published_cells() { return detail::kPublished; }

// In formula mode every count follows the closed forms above and is shown
// rounded to the nearest tenth of a decade. In tabulated mode conventional
// counts use K*M*2N_T; the published tables truncate some entries and round
// others, so a cell is accepted when either reading reproduces it and is
// flagged as an anomaly otherwise.
inline std::vector<ComplexityRow> compare_complexity_table(TableMode mode) {
  std::vector<ComplexityRow> rows;
  for (const auto& cell : detail::kPublished) {
    ComplexityRow row;
    row.table = std::to_string(cell.n) + "x" + std::to_string(cell.n);
    row.algorithm = cell.algorithm;
    row.n = cell.n;
    row.m = cell.m;
    row.k = cell.k;
    row.printed = std::string(cell.printed);
    if (cell.algorithm == Algorithm::conventional_kbest && mode == TableMode::tabulated)
      row.count = tabulated_conventional_count(cell.m, cell.n, cell.k);
    else
      row.count = complexity_formula(cell.algorithm, cell.m, cell.n, cell.k);

    if (cell.algorithm == Algorithm::ml) {
      row.display = ml_power_of_256(cell.m, cell.n);
      if (mode == TableMode::tabulated && row.display != row.printed) {
        row.anomaly = true;
        row.note = "published " + row.printed;
      }
    } else if (mode == TableMode::formula) {
      row.display = power_of_ten(row.count.log10, Rounding::nearest);
    } else {
      const std::string truncated = power_of_ten(row.count.log10, Rounding::truncate);
      const std::string nearest = power_of_ten(row.count.log10, Rounding::nearest);
      if (truncated == row.printed) {
        row.display = truncated;
        row.note = "truncated";
      } else if (nearest == row.printed) {
        row.display = nearest;
        row.note = "rounded";
      } else {
        row.display = nearest;
        row.anomaly = true;
        row.note = "published " + row.printed + " is a rounding anomaly, computed " + nearest;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string render_complexity_table(const std::vector<ComplexityRow>& rows, TableMode mode) {
  std::ostringstream os;
  os << "# node-expansion counts (" << (mode == TableMode::formula ? "formula" : "tabulated") << " mode)\n";
  std::string current;
  for (const auto& row : rows) {
    if (row.table != current) {
      current = row.table;
      os << "\n[" << current << "]\n";
    }
    char log_buf[32];
    std::snprintf(log_buf, sizeof log_buf, "%.3f", row.count.log10);
    os << detail::row_label(row.algorithm) << "  " << row.n << "x" << row.n << " K=" << row.k << "  " << row.display
       << "  M=" << row.m << "  nodes=" << (row.count.exact ? std::to_string(*row.count.exact) : std::string("-"))
       << "  log10=" << log_buf;
    if (!row.note.empty()) os << "  [" << row.note << "]";
    if (row.anomaly) os << "  ANOMALY";
    os << '\n';
  }
  os << "\n[general]\n"
     << "ml            M^N_T\n"
     << "conventional  K*sqrt(M)*2N_T\n"
     << "this-work     (2K-1)*2N_T\n";
  return os.str();
}

}  // namespace sekbest
