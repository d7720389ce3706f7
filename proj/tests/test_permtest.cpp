#include <gtest/gtest.h>

#include <cmath>

#include "microstat/permtest.hpp"
#include "microstat/rng.hpp"

using namespace microstat;

namespace {

DistanceMatrix matrix_from(std::vector<double> d, std::size_t n) {
  DistanceMatrix out;
  for (std::size_t i = 0; i < n; ++i)
    out.ids.push_back("p" + std::to_string(i));
  out.d = std::move(d);
  return out;
}

// Euclidean distances of iid normal points, optionally with a mean shift
// on the second half.
DistanceMatrix gaussian_distances(Pcg32 &g, std::size_t n, std::size_t dim,
                                  double shift) {
  std::vector<double> pts(n * dim);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < dim; ++k)
      pts[j * dim + k] = rnorm(g) + (j >= n / 2 ? shift : 0.0);
  DistanceMatrix d;
  for (std::size_t j = 0; j < n; ++j) d.ids.push_back("s" + std::to_string(j));
  d.d.assign(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = pts[a * dim + k] - pts[b * dim + k];
        s += diff * diff;
      }
      d.at(a, b) = d.at(b, a) = std::sqrt(s);
    }
  return d;
}

std::vector<std::string> half_groups(std::size_t n) {
  std::vector<std::string> g;
  for (std::size_t j = 0; j < n; ++j)
    g.push_back(j < n / 2 ? "g1" : "g2");
  return g;
}

} // namespace

TEST(Permanova, HandWorkedPseudoF) {
  // 6 specimens, two groups of three; SST = 329/6, SSW = 4,
  // F = ((SST-SSW)/1)/(SSW/4) = 50.8333...
  const std::vector<double> d{0, 1, 2, 5, 6, 7, 1, 0, 1, 6, 5, 6,
                              2, 1, 0, 7, 6, 5, 5, 6, 7, 0, 2, 1,
                              6, 5, 6, 2, 0, 1, 7, 6, 5, 1, 1, 0};
  const auto dm = matrix_from(d, 6);
  const auto res = permanova(dm, {"a", "a", "a", "b", "b", "b"}, 99, 7);
  EXPECT_NEAR(res.statistic_observed, 50.833333333333336, 1e-12);
}

TEST(Permanova, MaximalSeparationHitsSmallestP) {
  // two tight clusters at distinct points, 8 + 8
  Pcg32 g(3001, 2);
  const auto dm = gaussian_distances(g, 16, 2, 40.0);
  const auto res = permanova(dm, half_groups(16), 199, 11);
  EXPECT_DOUBLE_EQ(res.p_value, 1.0 / 200.0);
  EXPECT_GT(res.statistic_observed, 100.0);
}

TEST(Permanova, NullCalibration) {
  // labels independent of distances: p uniform, so the rejection rate
  // at alpha = 0.05 stays near 0.05
  int rejections = 0;
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    Pcg32 g(5000 + r, 2);
    const auto dm = gaussian_distances(g, 14, 3, 0.0);
    const auto res = permanova(dm, half_groups(14), 99,
                               static_cast<std::uint64_t>(r));
    if (res.p_value <= 0.05) ++rejections;
  }
  EXPECT_NEAR(rejections / static_cast<double>(reps), 0.05, 0.03);
}

TEST(Permanova, InvariancesAndDeterminism) {
  Pcg32 g(3002, 2);
  const auto dm = gaussian_distances(g, 12, 2, 1.0);
  const auto groups = half_groups(12);
  const auto a = permanova(dm, groups, 199, 5);
  const auto b = permanova(dm, groups, 199, 5);
  EXPECT_DOUBLE_EQ(a.p_value, b.p_value);
  EXPECT_DOUBLE_EQ(a.statistic_observed, b.statistic_observed);

  // renaming groups changes nothing
  std::vector<std::string> renamed;
  for (const auto &s : groups) renamed.push_back(s == "g1" ? "x" : "y");
  const auto c = permanova(dm, renamed, 199, 5);
  EXPECT_DOUBLE_EQ(c.p_value, a.p_value);

  // multiplying distances by a constant changes nothing
  auto scaled = dm;
  for (auto &v : scaled.d) v *= 3.7;
  const auto s = permanova(scaled, groups, 199, 5);
  EXPECT_NEAR(s.statistic_observed, a.statistic_observed, 1e-9);
  EXPECT_DOUBLE_EQ(s.p_value, a.p_value);
}

TEST(Permanova, SpecimenReorderingLeavesTheStatisticAlone) {
  Pcg32 g(3010, 2);
  const std::size_t n = 12;
  const auto dm = gaussian_distances(g, n, 2, 1.2);
  const auto groups = half_groups(n);
  const auto base = permanova(dm, groups, 499, 5);

  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < n; ++j) perm[j] = (j * 5 + 3) % n;
  DistanceMatrix rd;
  std::vector<std::string> rg(n);
  for (std::size_t j = 0; j < n; ++j) {
    rd.ids.push_back(dm.ids[perm[j]]);
    rg[j] = groups[perm[j]];
  }
  rd.d.assign(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      rd.at(a, b) = dm.at(perm[a], perm[b]);
  const auto re = permanova(rd, rg, 499, 5);
  EXPECT_NEAR(re.statistic_observed, base.statistic_observed, 1e-10);
  // the permutation stream differs after reordering, so p agrees only
  // up to Monte Carlo error
  EXPECT_NEAR(re.p_value, base.p_value, 0.1);

  const auto mst_base = mst_pure_edge_test(dm, groups, 499, 5);
  const auto mst_re = mst_pure_edge_test(rd, rg, 499, 5);
  EXPECT_DOUBLE_EQ(mst_re.statistic_observed, mst_base.statistic_observed);
}

TEST(Permanova, WithinBlockPermutationRespectsBlocks) {
  // paired design: each block holds one specimen per group
  Pcg32 g(3003, 2);
  const std::size_t n = 12;
  const auto dm = gaussian_distances(g, n, 2, 0.5);
  std::vector<std::string> groups, blocks;
  for (std::size_t j = 0; j < n; ++j) {
    groups.push_back(j % 2 == 0 ? "O" : "M");
    blocks.push_back("pair" + std::to_string(j / 2));
  }
  const auto res = permanova(dm, groups, 199, 9, &blocks);
  EXPECT_EQ(res.scheme, PermutationScheme::within_block);
  EXPECT_GE(res.p_value, 1.0 / 200.0);
  EXPECT_LE(res.p_value, 1.0);

  std::vector<std::string> singleton_blocks;
  for (std::size_t j = 0; j < n; ++j)
    singleton_blocks.push_back("b" + std::to_string(j));
  EXPECT_THROW(permanova(dm, groups, 99, 9, &singleton_blocks), data_error);
}

TEST(Permanova, RejectsBadInputs) {
  Pcg32 g(3004, 2);
  const auto dm = gaussian_distances(g, 6, 2, 0.0);
  EXPECT_THROW(permanova(dm, {"a", "a", "a", "a", "a", "a"}, 99, 1),
               data_error);
  EXPECT_THROW(permanova(dm, {"a", "a", "a", "a", "a", "b"}, 99, 1),
               data_error);
  EXPECT_THROW(permanova(dm, {"a", "b"}, 99, 1), data_error);
}

TEST(MstTest, SeparatedClustersRejectExchangeableDataDoesNot) {
  Pcg32 g(3005, 2);
  const auto far = gaussian_distances(g, 16, 2, 30.0);
  const auto res = mst_pure_edge_test(far, half_groups(16), 199, 13);
  EXPECT_DOUBLE_EQ(res.p_value, 1.0 / 200.0);
  // all MST edges but the bridge are pure
  EXPECT_DOUBLE_EQ(res.statistic_observed, 14.0);

  // exchangeable groups: mean p over replicates is near 1/2
  double psum = 0.0;
  const int reps = 60;
  for (int r = 0; r < reps; ++r) {
    Pcg32 gg(6000 + r, 2);
    const auto dm = gaussian_distances(gg, 14, 3, 0.0);
    psum += mst_pure_edge_test(dm, half_groups(14), 99,
                               static_cast<std::uint64_t>(r))
                .p_value;
  }
  EXPECT_NEAR(psum / reps, 0.5, 0.12);
}

TEST(MstTest, NullCalibration) {
  int rejections = 0;
  const int reps = 300;
  for (int r = 0; r < reps; ++r) {
    Pcg32 g(7000 + r, 2);
    const auto dm = gaussian_distances(g, 14, 3, 0.0);
    if (mst_pure_edge_test(dm, half_groups(14), 99,
                           static_cast<std::uint64_t>(r))
            .p_value <= 0.05)
      ++rejections;
  }
  // the statistic is discrete, so the test is conservative at 0.05
  EXPECT_LE(rejections / static_cast<double>(reps), 0.08);
}

TEST(MstTest, TiedDistancesAreFlaggedAndDeterministic) {
  // unit square: several tied inter-point distances
  std::vector<double> d{0, 1, 1, std::sqrt(2.0),
                        1, 0, std::sqrt(2.0), 1,
                        1, std::sqrt(2.0), 0, 1,
                        std::sqrt(2.0), 1, 1, 0};
  const auto dm = matrix_from(d, 4);
  const auto a = mst_pure_edge_test(dm, {"x", "x", "y", "y"}, 99, 3);
  const auto b = mst_pure_edge_test(dm, {"x", "x", "y", "y"}, 99, 3);
  EXPECT_TRUE(a.tie_flagged);
  EXPECT_DOUBLE_EQ(a.statistic_observed, b.statistic_observed);
  EXPECT_DOUBLE_EQ(a.p_value, b.p_value);
}

TEST(ThresholdNetwork, CompleteEmptyAndOracle) {
  Pcg32 g(3006, 2);
  const auto dm = gaussian_distances(g, 10, 2, 0.0);
  double dmax = 0.0, dmin = 1e300;
  for (std::size_t a = 0; a < 10; ++a)
    for (std::size_t b = a + 1; b < 10; ++b) {
      dmax = std::max(dmax, dm.at(a, b));
      dmin = std::min(dmin, dm.at(a, b));
    }
  const auto full = threshold_network(dm, dmax + 1.0);
  EXPECT_EQ(full.edges.size(), 45u);
  EXPECT_EQ(full.n_components, 1);
  const auto empty = threshold_network(dm, dmin * 0.5);
  EXPECT_TRUE(empty.edges.empty());
  EXPECT_EQ(empty.n_components, 10);

  const double cut = 0.5 * (dmin + dmax);
  const auto net = threshold_network(dm, cut);
  std::size_t expect = 0;
  for (std::size_t a = 0; a < 10; ++a)
    for (std::size_t b = a + 1; b < 10; ++b)
      if (dm.at(a, b) <= cut) ++expect;
  EXPECT_EQ(net.edges.size(), expect);
}

namespace {

SimScenario power_scenario(double effect) {
  SimScenario sc;
  for (int i = 0; i < 12; ++i)
    sc.taxa.push_back({"t" + std::to_string(i), 40.0, 6.0, std::nullopt, 0.0});
  // differential taxon, switched into an alias label in group 2
  sc.taxa.push_back({"diff", 60.0, 6.0, 60.0 * effect, 0.0});
  sc.taxa.push_back({"alias", 0.0, 6.0, std::nullopt, 0.0});
  sc.switch_pairs = {{"diff", "alias"}};
  sc.n_group1 = 12;
  sc.n_group2 = 12;
  return sc;
}

} // namespace

TEST(Power, SizeEqualsLevelWithoutEffectOrSwitching) {
  auto sc = power_scenario(1.0);
  sc.switch_pairs.clear();
  sc.taxa.pop_back(); // drop the alias
  // strain_switch_power requires switch pairs, so check size via a
  // direct replicate loop on the unswitched scenario
  int rejections = 0;
  const int reps = 300;
  PowerOptions opts;
  for (int r = 0; r < reps; ++r) {
    auto s = sc;
    s.seed = derive_seed(40, static_cast<std::uint64_t>(r));
    const auto data = simulate(s);
    const auto d = distance_matrix(data.counts, Metric::bray_curtis);
    std::vector<std::string> groups;
    for (const auto &row : data.samples) groups.push_back(row.group);
    if (permanova(d, groups, 99, derive_seed(41, static_cast<std::uint64_t>(r)))
            .p_value <= 0.05)
      ++rejections;
  }
  EXPECT_NEAR(rejections / static_cast<double>(reps), 0.05, 0.03);
}

TEST(Power, SubjectLevelSwitchingReducesPower) {
  // strain identity varies by specimen, not by group: the label noise
  // inflates within-group distances and drowns the real effect
  auto sc = power_scenario(1.8);
  sc.switch_scope = SwitchScope::all;
  PowerOptions opts;
  opts.n_perm = 99;
  const auto [with, without] =
      strain_switch_power(sc, {0.5, 1.0}, 120, 2026, opts);
  EXPECT_GT(without.power[0], with.power[0] + 0.1);
  // a coherent switch of every specimen is a pure relabel
  EXPECT_DOUBLE_EQ(with.power[1], without.power[1]);
}

TEST(Power, GroupAlignedSwitchingCreatesLabelSignal) {
  // when the switch lines up with the groups, the alias itself becomes
  // a between-group difference and rejection rates go up, not down
  const auto sc = power_scenario(1.0); // no abundance effect at all
  PowerOptions opts;
  opts.n_perm = 99;
  const auto [with, without] = strain_switch_power(sc, {1.0}, 80, 7, opts);
  EXPECT_GT(with.power[0], without.power[0] + 0.2);
}

TEST(Power, MoreSpecimensDoNotHurtPower) {
  auto small = power_scenario(2.0);
  auto big = power_scenario(2.0);
  big.n_group1 = big.n_group2 = 24;
  PowerOptions opts;
  opts.n_perm = 99;
  const auto ps = strain_switch_power(small, {0.0}, 100, 77, opts);
  const auto pb = strain_switch_power(big, {0.0}, 100, 77, opts);
  EXPECT_GE(pb.second.power[0] + 0.12, ps.second.power[0]);
}

TEST(Power, IdenticalSeedsShareDrawsAcrossArms) {
  const auto sc = power_scenario(2.0);
  PowerOptions opts;
  opts.n_perm = 49;
  const auto a = strain_switch_power(sc, {0.0}, 20, 99, opts);
  // at fraction 0 both arms see identical datasets
  EXPECT_EQ(a.first.power[0], a.second.power[0]);
}
