#pragma once

// Experiment config files: a TOML subset of `key = value` lines, optional
// `[experiment]` header, `#` comments, quoted strings, integers, floats,
// booleans and single-line arrays.
//
//   name = "ber-vs-snr-256"
//   antenna_sizes = [8]
//   m_orders = [256]
//   k_values = [5, 20]
//   snr_db = [0, 10, 20, inf]
//   frames = 10000
//   run_seed = 42
//   algorithm = "se_kbest"

#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sekbest/error.hpp"
#include "sekbest/harness.hpp"

namespace sekbest {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

class ConfigLine {
 public:
  ConfigLine(std::string source, std::size_t number, std::string key)
      : source_(std::move(source)), number_(number), key_(std::move(key)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(source_ + ":" + std::to_string(number_) + ": " + key_ + ": " + what);
  }

  double number(std::string_view tok) const {
    tok = trim(tok);
    if (tok == "inf" || tok == "+inf") return std::numeric_limits<double>::infinity();
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) fail("expected a number, got '" + std::string(tok) + "'");
    return v;
  }

  std::uint64_t integer(std::string_view tok) const {
    tok = trim(tok);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
      fail("expected a non-negative integer, got '" + std::string(tok) + "'");
    return v;
  }

  std::string string(std::string_view tok) const {
    tok = trim(tok);
    if (tok.size() < 2 || tok.front() != '"' || tok.back() != '"') fail("expected a quoted string");
    return std::string(tok.substr(1, tok.size() - 2));
  }

  bool boolean(std::string_view tok) const {
    tok = trim(tok);
    if (tok == "true") return true;
    if (tok == "false") return false;
    fail("expected true or false");
  }

  std::vector<std::string_view> array(std::string_view tok) const {
    tok = trim(tok);
    if (tok.size() < 2 || tok.front() != '[' || tok.back() != ']') fail("expected an array like [1, 2]");
    tok = trim(tok.substr(1, tok.size() - 2));
    std::vector<std::string_view> items;
    while (!tok.empty()) {
      const auto comma = tok.find(',');
      items.push_back(trim(tok.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      tok = trim(tok.substr(comma + 1));
      if (tok.empty()) items.emplace_back();  // trailing comma
    }
    for (auto item : items)
      if (item.empty()) fail("empty array element");
    return items;
  }

 private:
  std::string source_;
  std::size_t number_;
  std::string key_;
};

}  // namespace detail

inline ExperimentSpec parse_experiment_config(std::istream& in, const std::string& source = "<config>") {
  ExperimentSpec spec;
  spec.name = std::filesystem::path(source).stem().string();
  std::set<std::string> seen;
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto line = detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line != "[experiment]")
        throw ConfigError(source + ":" + std::to_string(number) + ": unknown section " + std::string(line));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(source + ":" + std::to_string(number) + ": expected key = value");
    const std::string key(detail::trim(line.substr(0, eq)));
    const auto value = detail::trim(line.substr(eq + 1));
    const detail::ConfigLine ctx(source, number, key);
    if (!seen.insert(key).second) ctx.fail("duplicate key");

    if (key == "name") {
      spec.name = ctx.string(value);
    } else if (key == "antenna_sizes") {
      spec.antenna_sizes.clear();
      for (auto t : ctx.array(value)) spec.antenna_sizes.push_back(ctx.integer(t));
    } else if (key == "m_orders") {
      spec.m_orders.clear();
      for (auto t : ctx.array(value)) spec.m_orders.push_back(static_cast<unsigned>(ctx.integer(t)));
    } else if (key == "k_values") {
      spec.k_values.clear();
      for (auto t : ctx.array(value)) spec.k_values.push_back(ctx.integer(t));
    } else if (key == "snr_db") {
      spec.snr_grid_db.clear();
      for (auto t : ctx.array(value)) spec.snr_grid_db.push_back(ctx.number(t));
    } else if (key == "frames") {
      spec.frames = ctx.integer(value);
    } else if (key == "run_seed") {
      spec.run_seed = ctx.integer(value);
    } else if (key == "algorithm") {
      auto a = parse_algorithm(ctx.string(value));
      if (!a) ctx.fail("unknown algorithm (se_kbest, conventional_kbest, ml)");
      spec.algorithm = *a;
    } else if (key == "sorted_qrd") {
      spec.sorted_qrd = ctx.boolean(value);
    } else if (key == "early_stop") {
      spec.early_stop = ctx.boolean(value);
    } else if (key == "ml_budget") {
      spec.ml_budget = ctx.number(value);
    } else {
      ctx.fail("unknown key");
    }
  }
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return spec;
}

inline ExperimentSpec load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_experiment_config(in, path.string());
}

}  // namespace sekbest
