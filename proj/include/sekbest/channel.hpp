#pragma once

// Seeded frame/channel/noise generation and the SNR -> noise variance map.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "sekbest/error.hpp"
#include "sekbest/modem.hpp"
#include "sekbest/numerics.hpp"

namespace sekbest {

enum class Stream : std::uint64_t { bits = 1, channel = 2, noise = 3 };

struct SeedPath {
  std::uint64_t run_seed = 0;
  std::uint64_t frame_index = 0;

  bool operator==(const SeedPath&) const = default;
};

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Generator for one (run_seed, frame_index, stream) key. Streams of distinct
// keys are independent of each other and of evaluation order, so a sweep
// gives the same numbers on any number of workers. `attempt` separates
// redraws of a rejected channel.
inline std::mt19937_64 make_stream(SeedPath path, Stream stream, std::uint64_t attempt = 0) {
  std::uint64_t h = detail::splitmix64(path.run_seed);
  h = detail::splitmix64(h ^ path.frame_index);
  h = detail::splitmix64(h ^ static_cast<std::uint64_t>(stream));
  h = detail::splitmix64(h ^ attempt);
  return std::mt19937_64(h);
}

inline BitFrame random_bits(std::size_t count, std::mt19937_64& rng) {
  BitFrame out(count);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (i % 64 == 0) word = rng();
    out[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1u);
  }
  return out;
}

struct ChannelRealization {
  ComplexMatrix h;
  SeedPath seed_path;
};

// N_R x N_T matrix of i.i.d. CN(0, 1) gains.
inline ComplexMatrix draw_channel(std::size_t n_t, std::size_t n_r, std::mt19937_64& rng) {
  if (n_t == 0 || n_r == 0) throw DimensionError("antenna counts must be >= 1");
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  ComplexMatrix h(n_r, n_t);
  for (std::size_t i = 0; i < n_r; ++i)
    for (std::size_t j = 0; j < n_t; ++j) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      h(i, j) = {re, im};
    }
  return h;
}

inline ChannelRealization draw_channel(std::size_t n_t, std::size_t n_r, SeedPath path, std::uint64_t attempt = 0) {
  auto rng = make_stream(path, Stream::channel, attempt);
  return {draw_channel(n_t, n_r, rng), path};
}

// Average received SNR per antenna is N_T * Es / sigma2 (Es = 1 for the
// normalized constellations), sigma2 being the complex noise variance.
struct NoiseModel {
  double snr_db = 0.0;
  double sigma2 = 0.0;

  static NoiseModel from_snr_db(double snr_db, std::size_t n_t, double symbol_energy = 1.0) {
    if (std::isinf(snr_db) && snr_db > 0) return {snr_db, 0.0};
    if (std::isnan(snr_db)) throw ConfigError("SNR must be a number");
    return {snr_db, static_cast<double>(n_t) * symbol_energy / std::pow(10.0, snr_db / 10.0)};
  }

  bool noise_free() const noexcept { return sigma2 == 0.0; }
};

// Noise-free sentinel for NoiseModel::from_snr_db.
inline constexpr double kNoiseFreeSnr = std::numeric_limits<double>::infinity();

// y = H x + n with n ~ CN(0, sigma2 I).
inline std::vector<Complex> apply_channel(const ComplexMatrix& h, std::span<const Complex> x, const NoiseModel& noise,
                                          std::mt19937_64& rng) {
  if (h.cols() != x.size()) throw DimensionError("symbol vector length must equal channel columns");
  std::vector<Complex> y = h * x;
  if (noise.noise_free()) return y;
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sd = std::sqrt(noise.sigma2 / 2.0);
  for (auto& v : y) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    v += Complex(sd * re, sd * im);
  }
  return y;
}

inline std::vector<Complex> apply_channel(const ComplexMatrix& h, const std::vector<Complex>& x,
                                          const NoiseModel& noise, std::mt19937_64& rng) {
  return apply_channel(h, std::span<const Complex>(x), noise, rng);
}

}  // namespace sekbest
