#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "sekbest/channel.hpp"
#include "sekbest/detector.hpp"

using namespace sekbest;

namespace {

const std::vector<double> kUnitLevels = {-3, -1, 1, 3};

std::vector<double> enumerate_all(double center, std::span<const double> levels) {
  ChildEnumerator en(center, levels);
  std::vector<double> out = {levels[static_cast<std::size_t>(en.first())]};
  while (auto v = next_child(en, levels)) out.push_back(*v);
  return out;
}

struct Trial {
  BitFrame bits;
  std::vector<double> x_real;
  RealSystem sys;
};

Trial make_trial(std::size_t nt, const Constellation& c, double snr_db, std::uint64_t seed, std::uint64_t index,
                 bool sorted = false) {
  const SeedPath path{seed, index};
  auto bit_rng = make_stream(path, Stream::bits);
  Trial t;
  t.bits = random_bits(nt * c.bits_per_symbol(), bit_rng);
  const auto x = modulate(t.bits, c);
  t.x_real = complex_to_real_vector(x);
  auto ch_rng = make_stream(path, Stream::channel);
  const auto h = draw_channel(nt, nt, ch_rng);
  auto noise_rng = make_stream(path, Stream::noise);
  const auto y = apply_channel(h, x, NoiseModel::from_snr_db(snr_db, nt), noise_rng);
  t.sys = make_real_system(h, y, {.sorted_qrd = sorted, .keep_q = false});
  return t;
}

// Recomputes sum_i (Y_i - sum_{j>=i} r_ij x_j)^2 over rows >= from, in tree order.
double ped_from_rows(const RealSystem& sys, const std::vector<double>& symbols, std::size_t from) {
  const std::size_t n = sys.dimension();
  std::vector<double> xp(n);
  for (std::size_t j = 0; j < n; ++j) xp[j] = symbols[sys.column_order[j]];
  double ped = 0.0;
  for (std::size_t i = from; i < n; ++i) {
    double e = sys.y_rot[i];
    for (std::size_t j = i; j < n; ++j) e -= sys.r(i, j) * xp[j];
    ped += e * e;
  }
  return ped;
}

}  // namespace

TEST(Enumeration, FirstChildExamples) {
  EXPECT_EQ(first_child(1.2, kUnitLevels), 1.0);
  EXPECT_EQ(first_child(100.0, kUnitLevels), 3.0);
  EXPECT_EQ(first_child(-100.0, kUnitLevels), -3.0);
  EXPECT_EQ(first_child(0.0, kUnitLevels), -1.0);  // equidistant: smaller magnitude tie, then the lower value
  EXPECT_EQ(first_child(2.0, kUnitLevels), 1.0);
}

TEST(Enumeration, ZigZagSequences) {
  EXPECT_EQ(enumerate_all(1.2, kUnitLevels), (std::vector<double>{1, 3, -1, -3}));
  EXPECT_EQ(enumerate_all(-1.0, kUnitLevels), (std::vector<double>{-1, 1, -3, 3}));
  EXPECT_EQ(enumerate_all(5.0, kUnitLevels), (std::vector<double>{3, 1, -1, -3}));
  ChildEnumerator en(1.2, kUnitLevels);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(next_child(en, kUnitLevels).has_value());
  EXPECT_TRUE(en.exhausted());
  EXPECT_FALSE(next_child(en, kUnitLevels).has_value());
  EXPECT_EQ(en.emitted(), 4u);
}

TEST(Enumeration, MatchesBruteForceSort) {
  std::mt19937_64 rng(31);
  for (unsigned m : {16u, 64u, 256u, 1024u}) {
    const Constellation c(m);
    const auto lv = c.levels();
    std::uniform_real_distribution<double> u(2.0 * lv.front(), 2.0 * lv.back());
    for (int trial = 0; trial < 2000; ++trial) {
      double center = u(rng);
      if (trial % 10 == 0) center = 0.5 * (lv[rng() % (lv.size() - 1)] + lv[rng() % (lv.size() - 1) + 1]);
      std::vector<double> expected(lv.begin(), lv.end());
      std::sort(expected.begin(), expected.end(), [&](double a, double b) { return closer_to(center, a, b); });
      const auto got = enumerate_all(center, lv);
      ASSERT_EQ(got, expected) << "M=" << m << " center=" << center;
      for (std::size_t i = 1; i < got.size(); ++i)
        ASSERT_LE(std::abs(got[i - 1] - center), std::abs(got[i] - center));
    }
  }
}

class NoiseFree : public ::testing::TestWithParam<std::tuple<unsigned, std::size_t>> {};

TEST_P(NoiseFree, DetectsTransmittedFrame) {
  const auto [m, k] = GetParam();
  const Constellation c(m);
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const auto tr = make_trial(4, c, kNoiseFreeSnr, 100 + m, t);
    DetectorConfig cfg;
    cfg.k = k;
    const auto se = se_kbest_detect(tr.sys, c, cfg);
    ASSERT_EQ(se.hard_bits, tr.bits) << "trial " << t;
    ASSERT_NEAR(se.final_candidates.front().ped, 0.0, 1e-18);
    ASSERT_EQ(conventional_kbest_detect(tr.sys, c, cfg).hard_bits, tr.bits);
  }
}

INSTANTIATE_TEST_SUITE_P(Grid, NoiseFree,
                         ::testing::Combine(::testing::Values(16u, 64u, 256u, 1024u),
                                            ::testing::Values(std::size_t{1}, std::size_t{5}, std::size_t{20})));

TEST(SeKbest, SortedQrdNoiseFree) {
  const Constellation c(256);
  DetectorConfig cfg;
  cfg.k = 5;
  for (std::uint64_t t = 0; t < 200; ++t) {
    const auto tr = make_trial(8, c, kNoiseFreeSnr, 5, t, true);
    ASSERT_EQ(se_kbest_detect(tr.sys, c, cfg).hard_bits, tr.bits);
  }
}

TEST(SeKbest, AgreesWithConventionalSurvivors) {
  const Constellation c(16);
  DetectorConfig cfg;
  cfg.k = 4;
  for (std::uint64_t t = 0; t < 500; ++t) {
    const auto tr = make_trial(4, c, 12.0, 41, t);
    const auto se = se_kbest_detect(tr.sys, c, cfg);
    const auto conv = conventional_kbest_detect(tr.sys, c, cfg);
    ASSERT_EQ(se.final_candidates.size(), conv.final_candidates.size());
    for (std::size_t i = 0; i < se.final_candidates.size(); ++i) {
      ASSERT_EQ(se.final_candidates[i].symbols, conv.final_candidates[i].symbols) << "trial " << t;
      ASSERT_DOUBLE_EQ(se.final_candidates[i].ped, conv.final_candidates[i].ped);
    }
    ASSERT_LT(se.nodes_expanded, conv.nodes_expanded);
  }
}

TEST(SeKbest, SaturatedTreeEqualsMl) {
  // 2x2 16-QAM: four real levels per row, 4^3 = 64 partial paths above the leaves
  const Constellation c(16);
  DetectorConfig cfg;
  cfg.k = 64;
  for (std::uint64_t t = 0; t < 300; ++t) {
    const auto tr = make_trial(2, c, 3.0, 43, t);
    const auto se = se_kbest_detect(tr.sys, c, cfg);
    const auto ml = ml_detect(tr.sys, c, cfg);
    ASSERT_EQ(se.hard_bits, ml.hard_bits) << "trial " << t;
    ASSERT_DOUBLE_EQ(se.final_candidates.front().ped, ml.final_candidates.front().ped);
  }
}

TEST(SeKbest, MlNeverWorse) {
  const Constellation c(16);
  DetectorConfig cfg;
  cfg.k = 4;
  for (std::uint64_t t = 0; t < 300; ++t) {
    const auto tr = make_trial(3, c, 8.0, 44, t);
    const double se = se_kbest_detect(tr.sys, c, cfg).final_candidates.front().ped;
    const double ml = ml_detect(tr.sys, c, cfg).final_candidates.front().ped;
    ASSERT_LE(ml, se * (1.0 + 1e-12) + 1e-15);
  }
}

TEST(SeKbest, ReportedPedMatchesRecomputation) {
  const Constellation c(256);
  DetectorConfig cfg;
  cfg.k = 10;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto tr = make_trial(8, c, 25.0, 46, t);
    const auto res = se_kbest_detect(tr.sys, c, cfg);
    ASSERT_EQ(res.final_candidates.size(), cfg.k);
    for (std::size_t i = 0; i < res.final_candidates.size(); ++i) {
      const auto& cand = res.final_candidates[i];
      const double full = ped_from_rows(tr.sys, cand.symbols, 0);
      ASSERT_NEAR(cand.ped, full, 1e-9 * std::max(1.0, full));
      if (i > 0) {
        ASSERT_LE(res.final_candidates[i - 1].ped, cand.ped);
      }
      // prefix PEDs grow as the walk moves toward row 0
      double prev = 0.0;
      for (std::size_t row = tr.sys.dimension(); row-- > 0;) {
        const double p = ped_from_rows(tr.sys, cand.symbols, row);
        ASSERT_GE(p, prev - 1e-12);
        prev = p;
      }
    }
  }
}

TEST(SeKbest, NodeCountsAgainstClosedForms) {
  const Constellation c(256);
  DetectorConfig cfg;
  cfg.k = 5;
  for (std::uint64_t t = 0; t < 50; ++t) {
    const auto tr = make_trial(8, c, 20.0, 47, t);
    const auto se = se_kbest_detect(tr.sys, c, cfg);
    const auto conv = conventional_kbest_detect(tr.sys, c, cfg);
    // K first children at the root, then K first children + (K-1) refills on each of 15 rows
    EXPECT_EQ(se.nodes_expanded, 140u);
    EXPECT_LE(se.nodes_expanded, 144u);  // (2K-1) * 2 N_T
    EXPECT_EQ(conv.nodes_expanded, 1216u);
    EXPECT_LE(conv.nodes_expanded, 1280u);  // K sqrt(M) 2 N_T
  }
}

TEST(SeKbest, RootWithFewerLevelsThanK) {
  // 256-QAM has 16 real levels, so K=100 keeps every root child and saturates the second row
  const Constellation c(256);
  DetectorConfig cfg;
  cfg.k = 100;
  const auto tr = make_trial(8, c, 30.0, 48, 0);
  const auto se = se_kbest_detect(tr.sys, c, cfg);
  EXPECT_EQ(se.final_candidates.size(), 100u);
  EXPECT_EQ(se.hard_bits, tr.bits);
  // root 16, second row 16 + 99 refills, then 14 rows of 100 + 99
  EXPECT_EQ(se.nodes_expanded, 16u + 115u + 14u * 199u);
  // 16 + 16*16 + 14*100*16
  EXPECT_EQ(conventional_kbest_detect(tr.sys, c, cfg).nodes_expanded, 22672u);
}

TEST(SeKbest, LlrOutputShape) {
  const Constellation c(64);
  DetectorConfig cfg;
  cfg.k = 8;
  cfg.llr_enabled = true;
  cfg.noise_variance = 0.1;
  const auto tr = make_trial(4, c, 20.0, 49, 0);
  const auto res = se_kbest_detect(tr.sys, c, cfg);
  ASSERT_TRUE(res.llrs.has_value());
  EXPECT_EQ(res.llrs->size(), tr.bits.size());
  for (double v : *res.llrs) EXPECT_LE(std::abs(v), kLlrMax);
  cfg.llr_enabled = false;
  EXPECT_FALSE(se_kbest_detect(tr.sys, c, cfg).llrs.has_value());
}

TEST(SeKbest, RejectsBadInputs) {
  const Constellation c(16);
  DetectorConfig cfg;
  cfg.k = 0;
  const auto tr = make_trial(2, c, 20.0, 50, 0);
  EXPECT_THROW(se_kbest_detect(tr.sys, c, cfg), ConfigError);
  EXPECT_THROW(conventional_kbest_detect(tr.sys, c, cfg), ConfigError);

  RealSystem broken = tr.sys;
  broken.r(1, 1) = 0.0;
  cfg.k = 4;
  EXPECT_THROW(se_kbest_detect(broken, c, cfg), RankDeficientError);

  const ComplexMatrix singular(2, 2, {Complex(1, 0), Complex(2, 0), Complex(2, 0), Complex(4, 0)});
  EXPECT_THROW(make_real_system(singular, std::vector<Complex>(2)), RankDeficientError);
}

TEST(Ml, SingleAntennaIsSlicing) {
  const Constellation c(64);
  std::mt19937_64 rng(51);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    const ComplexMatrix h(1, 1, {Complex(g(rng), g(rng))});
    const std::vector<Complex> y = {Complex(g(rng), g(rng))};
    const auto sys = make_real_system(h, y);
    const auto res = ml_detect(sys, c);
    // brute force over the 64 symbols
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> arg;
    for (double re : c.levels())
      for (double im : c.levels()) {
        const Complex d = y[0] - h(0, 0) * Complex(re, im);
        if (std::norm(d) < best) {
          best = std::norm(d);
          arg = {re, im};
        }
      }
    ASSERT_EQ(res.final_candidates.front().symbols, arg);
    ASSERT_NEAR(res.final_candidates.front().ped, best, 1e-9);
    ASSERT_EQ(res.nodes_expanded, 8u + 64u);
  }
}

TEST(Ml, BudgetGuard) {
  EXPECT_DOUBLE_EQ(ml_leaf_count(1024, 4), 1048576.0);
  const Constellation big(1024);
  const auto ok = make_trial(2, big, 30.0, 52, 0);
  EXPECT_NO_THROW(ml_detect(ok.sys, big));
  const Constellation c(256);
  const auto tr = make_trial(8, c, 30.0, 52, 1);
  EXPECT_THROW(ml_detect(tr.sys, c), BudgetExceededError);
}

TEST(Algorithm, NamesRoundTrip) {
  for (auto a : {Algorithm::se_kbest, Algorithm::conventional_kbest, Algorithm::ml})
    EXPECT_EQ(parse_algorithm(to_string(a)), a);
  EXPECT_EQ(parse_algorithm("se"), Algorithm::se_kbest);
  EXPECT_FALSE(parse_algorithm("sphere").has_value());
}
