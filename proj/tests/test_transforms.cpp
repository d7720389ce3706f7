#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "microstat/rng.hpp"
#include "microstat/transforms.hpp"

using namespace microstat;

namespace {

CountTable table_from(std::vector<std::string> taxa,
                      std::vector<std::string> specimens,
                      std::vector<std::int64_t> counts) {
  CountTable ct;
  ct.taxa_ids = std::move(taxa);
  ct.specimen_ids = std::move(specimens);
  ct.counts = std::move(counts);
  return ct;
}

CountTable random_positive_table(Pcg32 &g, std::size_t m, std::size_t n,
                                 std::int64_t lo, std::int64_t hi) {
  std::vector<std::int64_t> counts(m * n);
  for (auto &v : counts)
    v = lo + static_cast<std::int64_t>(g.bounded(
                 static_cast<std::uint64_t>(hi - lo)));
  std::vector<std::string> taxa, specs;
  for (std::size_t i = 0; i < m; ++i) taxa.push_back("t" + std::to_string(i));
  for (std::size_t j = 0; j < n; ++j) specs.push_back("s" + std::to_string(j));
  return table_from(taxa, specs, counts);
}

// brute-force median-of-ratios, written independently of the library path
std::vector<double> mor_oracle(const CountTable &ct) {
  const std::size_t m = ct.n_taxa(), n = ct.n_specimens();
  std::vector<double> d(n);
  std::vector<std::size_t> ref;
  for (std::size_t i = 0; i < m; ++i) {
    bool allpos = true;
    for (std::size_t j = 0; j < n; ++j) allpos = allpos && ct.at(i, j) > 0;
    if (allpos) ref.push_back(i);
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> r;
    for (std::size_t i : ref) {
      double prod = 1.0;
      for (std::size_t jj = 0; jj < n; ++jj)
        prod *= std::pow(static_cast<double>(ct.at(i, jj)), 1.0 / n);
      r.push_back(static_cast<double>(ct.at(i, j)) / prod);
    }
    std::sort(r.begin(), r.end());
    d[j] = r.size() % 2 ? r[r.size() / 2]
                        : 0.5 * (r[r.size() / 2 - 1] + r[r.size() / 2]);
  }
  double gm = 1.0;
  for (double v : d) gm *= std::pow(v, 1.0 / n);
  for (double &v : d) v /= gm;
  return d;
}

} // namespace

TEST(MedianOfRatios, ExactScalingColumn) {
  // column 2 = 3x column 1, all positive
  const auto ct = table_from({"A", "B", "C"}, {"s1", "s2"},
                             {2, 6, 5, 15, 9, 27});
  const auto d = median_of_ratios(ct);
  EXPECT_NEAR(d[1] / d[0], 3.0, 1e-12);
  EXPECT_NEAR(d[0], 1.0 / std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(d[1], std::sqrt(3.0), 1e-12);
}

TEST(MedianOfRatios, IdenticalColumnsGiveUnitFactors) {
  const auto ct = table_from({"A", "B"}, {"s1", "s2", "s3"},
                             {4, 4, 4, 7, 7, 7});
  for (double v : median_of_ratios(ct)) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(MedianOfRatios, MatchesBruteForceOracle) {
  Pcg32 g(2024, 5);
  const auto ct = random_positive_table(g, 30, 6, 1, 400);
  const auto d = median_of_ratios(ct);
  const auto oracle = mor_oracle(ct);
  ASSERT_EQ(d.size(), oracle.size());
  for (std::size_t j = 0; j < d.size(); ++j)
    EXPECT_NEAR(d[j], oracle[j], 1e-9);
}

TEST(MedianOfRatios, ScaleEquivariant) {
  Pcg32 g(2025, 5);
  auto ct = random_positive_table(g, 20, 5, 1, 200);
  const auto base = median_of_ratios(ct);
  // multiply column 3 by 7: its pre-normalization factor scales by 7,
  // which survives normalization as a known ratio shift
  auto scaled = ct;
  for (std::size_t i = 0; i < ct.n_taxa(); ++i) scaled.at(i, 3) *= 7;
  const auto after = median_of_ratios(scaled);
  EXPECT_NEAR((after[3] / base[3]) / (after[0] / base[0]), 7.0, 1e-9);
}

TEST(MedianOfRatios, PseudoReferenceFallback) {
  // every row has a zero somewhere
  const auto ct = table_from({"A", "B"}, {"s1", "s2"}, {0, 5, 5, 0});
  EXPECT_THROW(median_of_ratios(ct), data_error);
  const auto d = median_of_ratios(ct, true);
  EXPECT_EQ(d.size(), 2u);
  for (double v : d) EXPECT_GT(v, 0.0);
}

TEST(Anscombe, PointValueAndMonotonicity) {
  const auto ct = table_from({"A"}, {"s1", "s2", "s3"}, {0, 5, 6});
  const auto t = anscombe(ct, {2.0});
  // asinh(sqrt((0+3/8)/(2-3/4))) = asinh(sqrt(0.3))
  EXPECT_NEAR(t.at(0, 0), 0.5234839575015942, 1e-12);
  EXPECT_LT(t.at(0, 1), t.at(0, 2));
  EXPECT_TRUE(t.flagged_taxa.empty());
}

TEST(Anscombe, ClampsSmallDispersionAndFlags) {
  const auto ct = table_from({"A"}, {"s1"}, {10});
  const auto t = anscombe(ct, {0.5});
  ASSERT_EQ(t.flagged_taxa.size(), 1u);
  EXPECT_EQ(t.flagged_taxa[0], "A");
  EXPECT_NEAR(t.per_taxon_param[0], 1.0 + 1e-6, 1e-12);
  EXPECT_TRUE(std::isfinite(t.at(0, 0)));
}

TEST(Anscombe, StabilizesVarianceOfNbDraws) {
  Pcg32 g(31337, 9);
  const double mu = 100.0, k = 10.0;
  const std::size_t n = 100000;
  CountTable ct;
  ct.taxa_ids = {"A"};
  for (std::size_t j = 0; j < n; ++j)
    ct.specimen_ids.push_back("s" + std::to_string(j));
  ct.counts.resize(n);
  for (auto &v : ct.counts) v = rnbinom_mu(g, mu, k);
  const auto t = anscombe(ct, {k});
  double s = 0.0, s2 = 0.0;
  for (double v : t.values) {
    s += v;
    s2 += v * v;
  }
  const double var = s2 / n - (s / n) * (s / n);
  const double target = 1.0 / (4.0 * (k - 0.5));
  EXPECT_NEAR(var, target, 0.15 * target);
}

TEST(TruncatedRank, PaperWorkedNumbers) {
  // 1000 taxa with distinct abundances
  const std::size_t m = 1000;
  CountTable ct;
  ct.specimen_ids = {"s1"};
  ct.counts.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    ct.taxa_ids.push_back("t" + std::to_string(i));
    ct.counts[i] = static_cast<std::int64_t>(i + 1); // rank = i+1
  }
  const auto t = truncated_rank(ct, 330);
  EXPECT_DOUBLE_EQ(t.at(m - 1, 0), 670.0); // most abundant
  std::size_t ones = 0;
  for (std::size_t i = 0; i < m; ++i)
    if (t.at(i, 0) == 1.0) ++ones;
  EXPECT_GE(ones, 330u);
  for (std::size_t i = 0; i < 330; ++i) EXPECT_DOUBLE_EQ(t.at(i, 0), 1.0);
}

TEST(TruncatedRank, ZeroThresholdIsPermutationWhenDistinct) {
  const auto ct = table_from({"A", "B", "C", "D"}, {"s1"}, {7, 2, 9, 4});
  const auto t = truncated_rank(ct, 0);
  std::vector<double> scores;
  for (std::size_t i = 0; i < 4; ++i) scores.push_back(t.at(i, 0));
  std::sort(scores.begin(), scores.end());
  EXPECT_EQ(scores, (std::vector<double>{1, 2, 3, 4}));
}

TEST(TruncatedRank, MatchesNaiveOracleWithTies) {
  Pcg32 g(555, 3);
  const auto ct = random_positive_table(g, 40, 7, 0, 6); // lots of ties
  const std::int64_t thr = 10;
  const auto t = truncated_rank(ct, thr);
  for (std::size_t j = 0; j < ct.n_specimens(); ++j) {
    for (std::size_t i = 0; i < ct.n_taxa(); ++i) {
      // naive average rank: 1 + #smaller + (#equal-1)/2
      double smaller = 0, equal = 0;
      for (std::size_t ii = 0; ii < ct.n_taxa(); ++ii) {
        if (ct.at(ii, j) < ct.at(i, j)) ++smaller;
        if (ct.at(ii, j) == ct.at(i, j)) ++equal;
      }
      const double rank = 1.0 + smaller + (equal - 1.0) / 2.0;
      EXPECT_NEAR(t.at(i, j), std::max(rank - thr, 1.0), 1e-12);
    }
  }
}

TEST(TruncatedRank, InvariantUnderMonotoneTransform) {
  Pcg32 g(556, 3);
  const auto ct = random_positive_table(g, 25, 4, 0, 50);
  auto squared = ct;
  for (auto &v : squared.counts) v = v * v; // strictly monotone on >= 0
  const auto a = truncated_rank(ct, 5);
  const auto b = truncated_rank(squared, 5);
  EXPECT_EQ(a.values, b.values);
}

TEST(TruncatedRank, ThresholdTooLargeErrors) {
  const auto ct = table_from({"A", "B"}, {"s1"}, {1, 2});
  EXPECT_THROW(truncated_rank(ct, 2), data_error);
}

TEST(PresenceAbsence, ThresholdBehavior) {
  const auto ct = table_from({"A", "B", "C"}, {"s1"}, {2, 1, 0});
  const auto t2 = presence_absence(ct, 2);
  EXPECT_DOUBLE_EQ(t2.at(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(t2.at(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(t2.at(2, 0), 0.0);
  const auto t1 = presence_absence(ct, 1);
  EXPECT_DOUBLE_EQ(t1.at(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(t1.at(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(t1.at(2, 0), 0.0);
}

TEST(PresenceAbsence, MonotoneNonIncreasingInTau) {
  Pcg32 g(557, 3);
  const auto ct = random_positive_table(g, 15, 5, 0, 8);
  const auto a = presence_absence(ct, 2);
  const auto b = presence_absence(ct, 4);
  for (std::size_t x = 0; x < a.values.size(); ++x)
    EXPECT_LE(b.values[x], a.values[x]);
}

TEST(ScaleBySizeFactors, IdentityAndHalving) {
  const auto ct = table_from({"A", "B"}, {"s1", "s2"}, {4, 6, 8, 10});
  const auto id = scale_by_size_factors(ct, {1.0, 1.0});
  EXPECT_DOUBLE_EQ(id.at(1, 1), 10.0);
  const auto h = scale_by_size_factors(ct, {1.0, 2.0});
  EXPECT_DOUBLE_EQ(h.at(0, 1), 3.0);
  EXPECT_DOUBLE_EQ(h.at(1, 1), 5.0);
  EXPECT_THROW(scale_by_size_factors(ct, {1.0}), data_error);
  EXPECT_THROW(scale_by_size_factors(ct, {1.0, 0.0}), data_error);
}
