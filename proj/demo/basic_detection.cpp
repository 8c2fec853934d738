// Detects one 8x8 256-QAM frame with SE K-best and prints the outcome.

#include <iostream>

#include "sekbest/sekbest.hpp"

int main() {
  using namespace sekbest;
  const Constellation qam(256);
  const std::size_t n = 8;
  const SeedPath path{2024, 0};

  auto bit_rng = make_stream(path, Stream::bits);
  const BitFrame bits = random_bits(n * qam.bits_per_symbol(), bit_rng);
  const auto x = modulate(bits, qam);

  auto ch_rng = make_stream(path, Stream::channel);
  const auto h = draw_channel(n, n, ch_rng);
  const auto noise = NoiseModel::from_snr_db(30.0, n);
  auto noise_rng = make_stream(path, Stream::noise);
  const auto y = apply_channel(h, x, noise, noise_rng);

  const RealSystem sys = make_real_system(h, y);
  DetectorConfig cfg;
  cfg.k = 10;
  cfg.llr_enabled = true;
  cfg.noise_variance = noise.sigma2;
  const DetectionResult res = se_kbest_detect(sys, qam, cfg);

  std::size_t errors = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) errors += bits[i] != res.hard_bits[i];
  std::cout << "bits=" << bits.size() << " errors=" << errors << " nodes=" << res.nodes_expanded
            << " best_ped=" << res.final_candidates.front().ped << " first_llr=" << res.llrs->front() << '\n';
}
