#pragma once

// Square M-QAM with per-dimension reflected Gray labels, bit/symbol
// conversion and max-log LLRs.
//
// Bit layout of a frame: for each transmit antenna, the I-dimension label
// (MSB first) followed by the Q-dimension label. PAM levels are indexed in
// ascending order and level index i carries Gray label i ^ (i >> 1).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sekbest/error.hpp"
#include "sekbest/numerics.hpp"

namespace sekbest {

using BitFrame = std::vector<std::uint8_t>;

class Constellation {
 public:
  explicit Constellation(unsigned order) : order_(order) {
    if (order != 16 && order != 64 && order != 256 && order != 1024)
      throw ConfigError("unsupported constellation order " + std::to_string(order) +
                        " (expected 16, 64, 256 or 1024)");
    side_ = 1u << (std::countr_zero(order) / 2);
    bits_per_dim_ = static_cast<unsigned>(std::countr_zero(side_));
    scale_ = 1.0 / std::sqrt(2.0 * (order - 1.0) / 3.0);
    levels_.resize(side_);
    label_of_index_.resize(side_);
    index_of_label_.resize(side_);
    for (unsigned i = 0; i < side_; ++i) {
      levels_[i] = (2.0 * i - (side_ - 1.0)) * scale_;
      const unsigned label = i ^ (i >> 1);
      label_of_index_[i] = label;
      index_of_label_[label] = i;
    }
  }

  unsigned order() const noexcept { return order_; }
  // sqrt(M): number of PAM levels per real dimension.
  unsigned side() const noexcept { return side_; }
  unsigned bits_per_dim() const noexcept { return bits_per_dim_; }
  unsigned bits_per_symbol() const noexcept { return 2 * bits_per_dim_; }
  double scale() const noexcept { return scale_; }
  std::span<const double> levels() const noexcept { return levels_; }
  double level(std::size_t index) const noexcept { return levels_[index]; }

  unsigned gray_encode(unsigned index) const noexcept { return label_of_index_[index]; }
  unsigned gray_decode(unsigned label) const noexcept { return index_of_label_[label]; }

  // Index of the level within 1e-9 of `value`, or -1.
  int index_of(double value) const noexcept {
    const double u = (value / scale_ + (side_ - 1.0)) / 2.0;
    const double idx = std::round(u);
    if (idx < 0.0 || idx > side_ - 1.0) return -1;
    const auto i = static_cast<int>(idx);
    return std::abs(levels_[static_cast<std::size_t>(i)] - value) <= 1e-9 ? i : -1;
  }

 private:
  unsigned order_;
  unsigned side_ = 0;
  unsigned bits_per_dim_ = 0;
  double scale_ = 0.0;
  std::vector<double> levels_;
  std::vector<unsigned> label_of_index_;
  std::vector<unsigned> index_of_label_;
};

namespace detail {

inline unsigned read_label(std::span<const std::uint8_t> bits, unsigned width) {
  unsigned label = 0;
  for (unsigned b = 0; b < width; ++b) label = (label << 1) | (bits[b] & 1u);
  return label;
}

inline void write_label(unsigned label, unsigned width, std::span<std::uint8_t> out) {
  for (unsigned b = 0; b < width; ++b) out[b] = static_cast<std::uint8_t>((label >> (width - 1 - b)) & 1u);
}

}  // namespace detail

inline std::vector<Complex> modulate(std::span<const std::uint8_t> frame, const Constellation& c) {
  const unsigned bps = c.bits_per_symbol();
  if (frame.empty() || frame.size() % bps != 0)
    throw DimensionError("frame length " + std::to_string(frame.size()) + " is not a multiple of " +
                         std::to_string(bps));
  const unsigned w = c.bits_per_dim();
  std::vector<Complex> out(frame.size() / bps);
  for (std::size_t t = 0; t < out.size(); ++t) {
    auto sym = frame.subspan(t * bps, bps);
    const unsigned i_idx = c.gray_decode(detail::read_label(sym.first(w), w));
    const unsigned q_idx = c.gray_decode(detail::read_label(sym.subspan(w, w), w));
    out[t] = {c.level(i_idx), c.level(q_idx)};
  }
  return out;
}

inline std::vector<Complex> modulate(const BitFrame& frame, const Constellation& c) {
  return modulate(std::span<const std::uint8_t>(frame), c);
}

// Bits of a real-domain vector laid out as [Re x_0..Re x_{N-1}, Im x_0..Im x_{N-1}],
// given as level indices.
inline BitFrame bits_from_level_indices(std::span<const int> indices, const Constellation& c) {
  const std::size_t nt = indices.size() / 2;
  const unsigned w = c.bits_per_dim();
  BitFrame out(nt * c.bits_per_symbol());
  std::span<std::uint8_t> view(out);
  for (std::size_t t = 0; t < nt; ++t) {
    auto sym = view.subspan(t * c.bits_per_symbol(), c.bits_per_symbol());
    detail::write_label(c.gray_encode(static_cast<unsigned>(indices[t])), w, sym.first(w));
    detail::write_label(c.gray_encode(static_cast<unsigned>(indices[nt + t])), w, sym.subspan(w, w));
  }
  return out;
}

inline BitFrame hard_demodulate(std::span<const double> x_hat, const Constellation& c) {
  if (x_hat.empty() || x_hat.size() % 2 != 0) throw DimensionError("real-domain vector must have even length");
  std::vector<int> idx(x_hat.size());
  for (std::size_t i = 0; i < x_hat.size(); ++i) {
    idx[i] = c.index_of(x_hat[i]);
    if (idx[i] < 0) throw DimensionError("entry " + std::to_string(i) + " is not a PAM level");
  }
  return bits_from_level_indices(idx, c);
}

inline BitFrame hard_demodulate(const std::vector<double>& x_hat, const Constellation& c) {
  return hard_demodulate(std::span<const double>(x_hat), c);
}

// A full real-domain symbol vector (unpermuted, PAM values) with its metric.
struct ScoredPath {
  std::vector<double> symbols;
  double ped = 0.0;
};

inline constexpr double kLlrMax = 64.0;

// Max-log LLRs: LLR_b = (min ped over bit=1 paths - min ped over bit=0 paths) / sigma2,
// so positive means bit 0 is more likely. Clipped to +-llr_max, which is also
// the value used when one hypothesis has no candidate.
inline std::vector<double> compute_llrs(std::span<const ScoredPath> candidates, double sigma2,
                                        const Constellation& c, double llr_max = kLlrMax) {
  if (candidates.empty()) throw std::invalid_argument("compute_llrs needs at least one candidate");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t nbits = candidates.front().symbols.size() / 2 * c.bits_per_symbol();
  std::vector<double> min0(nbits, inf);
  std::vector<double> min1(nbits, inf);
  for (const auto& cand : candidates) {
    const BitFrame bits = hard_demodulate(cand.symbols, c);
    if (bits.size() != nbits) throw DimensionError("candidate paths differ in length");
    for (std::size_t b = 0; b < nbits; ++b) {
      auto& slot = bits[b] ? min1[b] : min0[b];
      slot = std::min(slot, cand.ped);
    }
  }
  std::vector<double> llr(nbits);
  for (std::size_t b = 0; b < nbits; ++b) {
    if (min0[b] == inf) {
      llr[b] = -llr_max;
    } else if (min1[b] == inf) {
      llr[b] = llr_max;
    } else if (sigma2 > 0.0) {
      llr[b] = std::clamp((min1[b] - min0[b]) / sigma2, -llr_max, llr_max);
    } else {
      // noise-free: only the sign is meaningful
      const double d = min1[b] - min0[b];
      llr[b] = d > 0.0 ? llr_max : (d < 0.0 ? -llr_max : 0.0);
    }
  }
  return llr;
}

inline std::vector<double> compute_llrs(const std::vector<ScoredPath>& candidates, double sigma2,
                                        const Constellation& c, double llr_max = kLlrMax) {
  return compute_llrs(std::span<const ScoredPath>(candidates), sigma2, c, llr_max);
}

}  // namespace sekbest
