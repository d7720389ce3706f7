// Acceptance suite: one check per release criterion, each printed as a
// single [PASS]/[FAIL] line with its runtime. Exits nonzero if any
// criterion fails. argv[1] must name the microstat binary (used by the
// CLI-facing criteria).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "microstat/microstat.hpp"
#include "../test_util.hpp"

namespace ms = microstat;
namespace fs = std::filesystem;

namespace {

std::string g_bin;
std::string g_note; // observed metrics for the current criterion

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path &p, const std::string &content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

int run_cli(const std::string &args, const fs::path &cwd) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" + g_bin + "' " +
                          args + " >/dev/null 2>'" +
                          (cwd / "_stderr").string() + "'";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------- criterion 1

std::string criterion_gof_calibration() {
  const std::size_t m = 500, n = 50;
  ms::Dataset d;
  ms::Pcg32 g(20260801, 1);
  for (std::size_t j = 0; j < n; ++j) {
    d.counts.specimen_ids.push_back("s" + std::to_string(j));
    ms::SampleInfo s;
    s.specimen_id = d.counts.specimen_ids.back();
    d.samples.push_back(s);
  }
  d.counts.counts.resize(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    d.counts.taxa_ids.push_back("asv" + std::to_string(i));
    const double mu = std::exp(std::log(5.0) +
                               ms::runif(g) * std::log(200.0 / 5.0));
    const double k = std::exp(std::log(0.5) +
                              ms::runif(g) * std::log(20.0 / 0.5));
    for (std::size_t j = 0; j < n; ++j)
      d.counts.at(i, j) = ms::rnbinom_mu(g, mu, k);
  }
  d.size_factors = std::vector<double>(n, 1.0);
  const auto batch = ms::gof_all(d, 1000, 42);
  std::size_t rejected = 0, tested = 0;
  for (const auto &r : batch.results) {
    if (r.skipped) continue;
    ++tested;
    if (!std::isnan(r.p_adjusted) && r.p_adjusted < 0.05) ++rejected;
  }
  const double fraction = static_cast<double>(rejected) /
                          static_cast<double>(tested);
  {
    char buf[96];
    std::snprintf(buf, sizeof buf, "rejected %zu of %zu", rejected, tested);
    g_note = buf;
  }
  if (fraction > 0.01) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "BH-rejected fraction %.4f > 0.01 (%zu of %zu)", fraction,
                  rejected, tested);
    return buf;
  }
  return "";
}

// ---------------------------------------------------------- criterion 2

std::string criterion_anscombe_variance() {
  ms::Pcg32 g(2, 77);
  for (const double k : {3.0, 5.0, 10.0, 25.0}) {
    for (const double mu : {20.0, 100.0}) {
      const std::size_t n = 100000;
      double s = 0.0, s2 = 0.0;
      const double denom = k - 0.75;
      for (std::size_t i = 0; i < n; ++i) {
        const auto draw = ms::rnbinom_mu(g, mu, k);
        const double v = std::asinh(
            std::sqrt((static_cast<double>(draw) + 0.375) / denom));
        s += v;
        s2 += v * v;
      }
      const double var = s2 / n - (s / n) * (s / n);
      const double target = 1.0 / (4.0 * (k - 0.5));
      if (std::fabs(var - target) > 0.15 * target) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "k=%g mu=%g: var %.5f vs %.5f (tol 15%%)", k, mu, var,
                      target);
        return buf;
      }
    }
  }
  return "";
}

// ---------------------------------------------------------- criterion 3

std::string criterion_contamination_calls() {
  const std::size_t n_contam = 20, n_real = 20, n_bio = 20, n_ctrl = 5;
  ms::Dataset d;
  ms::Pcg32 g(33, 5);
  const std::size_t m = n_contam + n_real;
  for (std::size_t i = 0; i < m; ++i)
    d.counts.taxa_ids.push_back(
        (i < n_contam ? "contam" : "real") + std::to_string(i));
  for (std::size_t j = 0; j < n_bio + n_ctrl; ++j) {
    const bool ctrl = j >= n_bio;
    d.counts.specimen_ids.push_back((ctrl ? "ctrl" : "bio") +
                                    std::to_string(j));
    ms::SampleInfo s;
    s.specimen_id = d.counts.specimen_ids.back();
    s.specimen_type = ctrl ? ms::SpecimenType::negative_control
                           : ms::SpecimenType::biological;
    d.samples.push_back(s);
  }
  d.counts.counts.resize(m * (n_bio + n_ctrl));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n_bio + n_ctrl; ++j) {
      const bool ctrl = j >= n_bio;
      const bool contam = i < n_contam;
      const double lambda = contam ? 10.0 : (ctrl ? 0.0 : 50.0);
      d.counts.at(i, j) = lambda > 0.0 ? ms::rpois(g, lambda) : 0;
    }
  d.size_factors = std::vector<double>(n_bio + n_ctrl, 1.0);

  ms::McmcSettings mc; // defaults: 4 chains x 2000, warmup 1000, HPD 0.95
  mc.seed = 99;
  const auto res = ms::call_contaminants(d, mc);
  std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
  for (const auto &s : res.summaries) {
    if (!s.evaluated) continue;
    const bool truly = s.taxon_id.rfind("contam", 0) == 0;
    if (truly)
      (s.is_contaminant ? tp : fn) += 1;
    else
      (s.is_contaminant ? fp : tn) += 1;
  }
  const double sens = static_cast<double>(tp) / (tp + fn);
  const double spec = static_cast<double>(tn) / (tn + fp);
  {
    char buf[96];
    std::snprintf(buf, sizeof buf, "sensitivity %.3f, specificity %.3f",
                  sens, spec);
    g_note = buf;
  }
  if (sens < 0.90 || spec < 0.90) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "sensitivity %.3f, specificity %.3f "
                                   "(need both >= 0.90)",
                  sens, spec);
    return buf;
  }
  return "";
}

// ---------------------------------------------------------- criterion 4

std::string criterion_median_of_ratios() {
  ms::Pcg32 g(4, 9);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t m = 10 + g.bounded(30), n = 3 + g.bounded(8);
    ms::CountTable ct;
    for (std::size_t i = 0; i < m; ++i)
      ct.taxa_ids.push_back("t" + std::to_string(i));
    for (std::size_t j = 0; j < n; ++j)
      ct.specimen_ids.push_back("s" + std::to_string(j));
    ct.counts.resize(m * n);
    for (auto &v : ct.counts)
      v = 1 + static_cast<std::int64_t>(g.bounded(500));
    const auto base = ms::median_of_ratios(ct);

    const std::size_t target = g.bounded(n);
    const std::int64_t f = 2 + static_cast<std::int64_t>(g.bounded(7));
    auto scaled = ct;
    for (std::size_t i = 0; i < m; ++i) scaled.at(i, target) *= f;
    const auto after = ms::median_of_ratios(scaled);
    const std::size_t other = target == 0 ? 1 : 0;
    const double recovered = (after[target] / base[target]) /
                             (after[other] / base[other]);
    if (std::fabs(recovered - static_cast<double>(f)) >
        1e-9 * static_cast<double>(f)) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "rep %d: factor %lld recovered as %.12f", rep,
                    static_cast<long long>(f), recovered);
      return buf;
    }
  }
  return "";
}

// ---------------------------------------------------------- criterion 5

std::string criterion_ordination_oracles() {
  ms::Pcg32 g(5, 11);
  // (a) PCoA recovers planted 2-D configurations
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 8 + g.bounded(12);
    std::vector<double> xy(2 * n);
    for (auto &v : xy) v = 20.0 * ms::runif(g) - 10.0;
    ms::DistanceMatrix d;
    for (std::size_t i = 0; i < n; ++i)
      d.ids.push_back("p" + std::to_string(i));
    d.d.assign(n * n, 0.0);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        const double dx = xy[2 * a] - xy[2 * b];
        const double dy = xy[2 * a + 1] - xy[2 * b + 1];
        d.at(a, b) = std::sqrt(dx * dx + dy * dy);
      }
    const auto ord = ms::pcoa(d, 2);
    const double rmse =
        testutil::procrustes_rmse(ord.coordinates, xy, n, 2);
    if (rmse >= 1e-8) {
      char buf[120];
      std::snprintf(buf, sizeof buf, "PCoA rep %d: Procrustes RMSE %.2e",
                    rep, rmse);
      return buf;
    }
  }
  // (b) CA total inertia equals chi-square / n
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t m = 3 + g.bounded(8), n = 3 + g.bounded(6);
    ms::CountTable ct;
    for (std::size_t i = 0; i < m; ++i)
      ct.taxa_ids.push_back("t" + std::to_string(i));
    for (std::size_t j = 0; j < n; ++j)
      ct.specimen_ids.push_back("s" + std::to_string(j));
    ct.counts.resize(m * n);
    for (auto &v : ct.counts)
      v = 1 + static_cast<std::int64_t>(g.bounded(60));
    const auto ord = ms::correspondence_analysis(ct, 2);
    double grand = 0.0;
    std::vector<double> rs(m, 0.0), cs(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        grand += static_cast<double>(ct.at(i, j));
        rs[i] += static_cast<double>(ct.at(i, j));
        cs[j] += static_cast<double>(ct.at(i, j));
      }
    double chi2 = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double e = rs[i] * cs[j] / grand;
        chi2 += (ct.at(i, j) - e) * (ct.at(i, j) - e) / e;
      }
    if (std::fabs(ord.total_inertia - chi2 / grand) > 1e-10) {
      char buf[120];
      std::snprintf(buf, sizeof buf, "CA rep %d: inertia %.12f vs %.12f",
                    rep, ord.total_inertia, chi2 / grand);
      return buf;
    }
  }
  // (c) UniFrac matches the hand-computed 4-leaf fixture
  const auto tree = ms::parse_newick("((A:1,B:2):1,(C:3,D:1):2);");
  ms::CountTable ct;
  ct.taxa_ids = {"A", "B", "C", "D"};
  ct.specimen_ids = {"X", "Y"};
  ct.counts = {4, 0, 0, 3, 2, 0, 2, 3};
  const double w = ms::unifrac(ct, tree, true).at(0, 1);
  const double wn = ms::unifrac(ct, tree, true, true).at(0, 1);
  const double u = ms::unifrac(ct, tree, false).at(0, 1);
  if (std::fabs(w - 2.5) > 1e-12 || std::fabs(wn - 2.5 / 6.0) > 1e-12 ||
      std::fabs(u - 0.6) > 1e-12) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "unifrac fixture: %.12f/%.12f/%.12f vs 2.5/%.12f/0.6", w,
                  wn, u, 2.5 / 6.0);
    return buf;
  }
  return "";
}

// ---------------------------------------------------------- criterion 6

std::string criterion_permanova_size_and_power() {
  // type-I error under the null
  int rejections = 0;
  const int reps = 1000;
  for (int r = 0; r < reps; ++r) {
    ms::Pcg32 g(60000 + r, 2);
    const std::size_t n = 14, dim = 3;
    std::vector<double> pts(n * dim);
    for (auto &v : pts) v = ms::rnorm(g);
    ms::DistanceMatrix d;
    for (std::size_t j = 0; j < n; ++j)
      d.ids.push_back("s" + std::to_string(j));
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
    std::vector<std::string> groups;
    for (std::size_t j = 0; j < n; ++j)
      groups.push_back(j < n / 2 ? "g1" : "g2");
    if (ms::permanova(d, groups, 199, static_cast<std::uint64_t>(r))
            .p_value <= 0.05)
      ++rejections;
  }
  const double rate = rejections / static_cast<double>(reps);
  if (std::fabs(rate - 0.05) > 0.02) {
    char buf[120];
    std::snprintf(buf, sizeof buf, "type-I error %.4f outside 0.05 +/- 0.02",
                  rate);
    return buf;
  }

  // power drops when the differential taxon is strain-switched
  ms::SimScenario sc;
  for (int i = 0; i < 12; ++i)
    sc.taxa.push_back({"t" + std::to_string(i), 40.0, 6.0, std::nullopt,
                       0.0});
  sc.taxa.push_back({"diff", 60.0, 6.0, 60.0 * 1.8, 0.0});
  sc.taxa.push_back({"alias", 0.0, 6.0, std::nullopt, 0.0});
  sc.switch_pairs = {{"diff", "alias"}};
  sc.switch_scope = ms::SwitchScope::all;
  sc.n_group1 = sc.n_group2 = 12;
  ms::PowerOptions opts;
  opts.n_perm = 99;
  const auto [with, without] =
      ms::strain_switch_power(sc, {0.5}, 300, 2026, opts);
  if (without.power[0] < with.power[0] + 0.1) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "power without switching %.3f, with %.3f (drop < 0.1)",
                  without.power[0], with.power[0]);
    return buf;
  }
  return "";
}

// ---------------------------------------------------------- criterion 7

std::string criterion_lda() {
  // (a) planted-topic recovery
  {
    ms::Pcg32 g(70, 3);
    const std::size_t t = 3, m = 90, n = 80;
    const std::int64_t depth = 1000;
    std::vector<double> beta_true(t * m, 0.0);
    const std::size_t block = m / t;
    for (std::size_t tt = 0; tt < t; ++tt) {
      double s = 0.0;
      for (std::size_t w = 0; w < m; ++w) {
        const double v =
            (w / block == tt ? 1.0 : 0.02) * (0.5 + ms::runif(g));
        beta_true[tt * m + w] = v;
        s += v;
      }
      for (std::size_t w = 0; w < m; ++w) beta_true[tt * m + w] /= s;
    }
    ms::CountTable ct;
    for (std::size_t w = 0; w < m; ++w)
      ct.taxa_ids.push_back("asv" + std::to_string(w));
    for (std::size_t j = 0; j < n; ++j)
      ct.specimen_ids.push_back("sp" + std::to_string(j));
    ct.counts.assign(m * n, 0);
    for (std::size_t j = 0; j < n; ++j) {
      const auto theta = ms::rdirichlet(g, std::vector<double>(t, 0.8));
      std::vector<double> p(m, 0.0);
      for (std::size_t tt = 0; tt < t; ++tt)
        for (std::size_t w = 0; w < m; ++w)
          p[w] += theta[tt] * beta_true[tt * m + w];
      const auto draw = ms::rmultinom(g, depth, p);
      for (std::size_t w = 0; w < m; ++w) ct.at(w, j) = draw[w];
    }
    ms::LdaSpec spec;
    spec.n_topics = 3;
    spec.chains = 4;
    spec.iters = 800;
    spec.warmup = 400;
    spec.seed = 17;
    const auto fit = ms::align_chains(ms::fit_lda(ct, spec));

    // simplex conservation across every draw
    for (const auto &chain : fit.theta)
      for (const auto &draw : chain)
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t tt = 0; tt < t; ++tt) s += draw[j * t + tt];
          if (std::fabs(s - 1.0) > 1e-10) return "theta row sum off by > 1e-10";
        }
    for (const auto &chain : fit.beta)
      for (const auto &draw : chain)
        for (std::size_t tt = 0; tt < t; ++tt) {
          double s = 0.0;
          for (std::size_t w = 0; w < m; ++w) s += draw[tt * m + w];
          if (std::fabs(s - 1.0) > 1e-10) return "beta row sum off by > 1e-10";
        }

    const auto mean = fit.mean_beta(0);
    for (std::size_t tt = 0; tt < t; ++tt) {
      double best = -2.0;
      for (std::size_t f = 0; f < t; ++f) {
        double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
        for (std::size_t w = 0; w < m; ++w) {
          const double a = beta_true[tt * m + w];
          const double b = mean[f * m + w];
          sa += a;
          sb += b;
          saa += a * a;
          sbb += b * b;
          sab += a * b;
        }
        const double md = static_cast<double>(m);
        const double corr = (sab - sa * sb / md) /
                            std::sqrt((saa - sa * sa / md) *
                                      (sbb - sb * sb / md));
        best = std::max(best, corr);
      }
      if (best < 0.9) {
        char buf[120];
        std::snprintf(buf, sizeof buf,
                      "topic %zu recovered with correlation %.3f < 0.9", tt,
                      best);
        return buf;
      }
    }
  }

  // (b) collapsed Gibbs vs exhaustive enumeration on the S=8 micro case
  {
    const double alpha = 0.8, gamma = 0.5;
    const std::int64_t c0 = 5, c1 = 3;
    std::map<std::pair<int, int>, double> exact;
    double total = 0.0;
    for (int a = 0; a <= c0; ++a)
      for (int b = 0; b <= c1; ++b) {
        double logw = std::lgamma(c0 + 1.0) - std::lgamma(a + 1.0) -
                      std::lgamma(c0 - a + 1.0) + std::lgamma(c1 + 1.0) -
                      std::lgamma(b + 1.0) - std::lgamma(c1 - b + 1.0);
        logw += std::lgamma(a + b + alpha) +
                std::lgamma(c0 - a + c1 - b + alpha);
        logw += std::lgamma(a + gamma) + std::lgamma(b + gamma) -
                std::lgamma(a + b + 2 * gamma);
        logw += std::lgamma(c0 - a + gamma) + std::lgamma(c1 - b + gamma) -
                std::lgamma(c0 - a + c1 - b + 2 * gamma);
        exact[{a, b}] = std::exp(logw);
        total += exact[{a, b}];
      }
    for (auto &[k, v] : exact) v /= total;

    std::vector<ms::detail::LdaCell> cells{{0, 0, c0}, {0, 1, c1}};
    ms::LdaSpec spec;
    spec.n_topics = 2;
    spec.alpha = alpha;
    spec.gamma = gamma;
    ms::Pcg32 g(31, 7);
    ms::detail::LdaChain chain(cells, 1, 2, spec, g);
    std::map<std::pair<int, int>, double> freq;
    const int sweeps = 150000, burn = 2000;
    for (int it = 0; it < sweeps + burn; ++it) {
      chain.sweep(g);
      if (it >= burn) {
        const auto &z = chain.assignments();
        freq[{static_cast<int>(z[0][0]), static_cast<int>(z[1][0])}] += 1.0;
      }
    }
    for (auto &[k, v] : freq) v /= sweeps;
    double tv = 0.0;
    for (const auto &[k, v] : exact)
      tv += std::fabs(v - (freq.count(k) ? freq.at(k) : 0.0));
    tv *= 0.5;
    if (tv >= 0.02) {
      char buf[120];
      std::snprintf(buf, sizeof buf,
                    "enumeration TV %.4f >= 0.02 on the S=8 instance", tv);
      return buf;
    }
  }

  // (c) R-hat / ESS calibration on iid draws
  {
    ms::Pcg32 g(71, 3);
    for (int param = 0; param < 30; ++param) {
      std::vector<std::vector<double>> chains(4);
      for (auto &c : chains) {
        c.resize(500);
        for (auto &v : c) v = ms::rnorm(g);
      }
      const double rhat = ms::split_rhat(chains);
      const double ess = ms::bulk_ess(chains);
      if (rhat < 0.99 || rhat > 1.01) {
        char buf[120];
        std::snprintf(buf, sizeof buf, "iid R-hat %.4f outside [0.99, 1.01]",
                      rhat);
        return buf;
      }
      if (ess < 0.5 * 2000) {
        char buf[120];
        std::snprintf(buf, sizeof buf, "iid bulk ESS %.0f < 1000", ess);
        return buf;
      }
    }
  }
  return "";
}

// ---------------------------------------------------------- criterion 8

ms::TopicFit synthetic_fit(ms::Pcg32 &g, std::size_t n, std::size_t t,
                           const std::vector<double> &group2_scale) {
  ms::TopicFit fit;
  fit.n_topics = static_cast<int>(t);
  fit.taxa_ids = {"x"};
  for (std::size_t j = 0; j < n; ++j)
    fit.specimen_ids.push_back("s" + std::to_string(j));
  std::vector<std::vector<double>> center(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto th = ms::rdirichlet(g, std::vector<double>(t, 2.0));
    if (j >= n / 2) {
      double s = 0.0;
      for (std::size_t tt = 0; tt < t; ++tt) {
        th[tt] *= group2_scale[tt];
        s += th[tt];
      }
      for (auto &v : th) v /= s;
    }
    center[j] = th;
  }
  fit.theta.resize(1);
  fit.beta.resize(1);
  fit.loglik.resize(1);
  fit.alignment.resize(1);
  for (int d = 0; d < 41; ++d) {
    std::vector<double> draw(n * t);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      std::vector<double> v(t);
      for (std::size_t tt = 0; tt < t; ++tt) {
        v[tt] = std::max(1e-9, center[j][tt] * (1.0 + 0.05 * ms::rnorm(g)));
        s += v[tt];
      }
      for (std::size_t tt = 0; tt < t; ++tt) draw[j * t + tt] = v[tt] / s;
    }
    fit.theta[0].push_back(draw);
    fit.beta[0].push_back({1.0});
    fit.loglik[0].push_back(0.0);
  }
  return fit;
}

std::string criterion_differential_topics() {
  const std::size_t n = 40, t = 3;
  std::vector<std::string> groups;
  for (std::size_t j = 0; j < n; ++j)
    groups.push_back(j < n / 2 ? "O" : "M");
  std::vector<std::int64_t> libs(n, 10000);

  // null calibration: mean false-discovery proportion at nominal 0.05
  {
    ms::Pcg32 g(80, 8);
    double fdp_sum = 0.0;
    const int sims = 200;
    for (int s = 0; s < sims; ++s) {
      const auto fit = synthetic_fit(g, n, t, {1.0, 1.0, 1.0});
      const auto rows = ms::differential_topics(fit, libs, groups);
      int v = 0, r = 0;
      for (const auto &row : rows)
        if (!row.na && row.p_adj < 0.05) {
          ++v;
          ++r;
        }
      fdp_sum += r > 0 ? static_cast<double>(v) / r : 0.0;
    }
    const double fdr = fdp_sum / sims;
    if (fdr > 0.07) {
      char buf[120];
      std::snprintf(buf, sizeof buf, "null FDR %.4f > 0.07", fdr);
      return buf;
    }
  }

  // planted 4-fold shift: detection power
  {
    ms::Pcg32 g(81, 8);
    int detected = 0;
    const int sims = 50;
    for (int s = 0; s < sims; ++s) {
      const auto fit = synthetic_fit(g, n, t, {4.0, 1.0, 1.0});
      const auto rows = ms::differential_topics(fit, libs, groups);
      if (rows[0].p_adj < 0.05) ++detected;
    }
    const double power = detected / static_cast<double>(sims);
    if (power < 0.8) {
      char buf[120];
      std::snprintf(buf, sizeof buf, "planted-shift power %.3f < 0.8",
                    power);
      return buf;
    }
  }

  // output schema through the CLI
  {
    const fs::path dir =
        fs::temp_directory_path() / "microstat_acceptance_schema";
    fs::remove_all(dir);
    fs::create_directories(dir);
    spit(dir / "scenario.json", R"({
      "format": "microstat.scenario",
      "taxa": [
        {"id": "A", "mu": 60, "k": 8},
        {"id": "B", "mu": 40, "k": 8},
        {"id": "C", "mu": 90, "k": 8}
      ],
      "n_group1": 4, "n_group2": 4, "seed": 12
    })");
    if (run_cli("simulate --scenario scenario.json --out d.json", dir) != 0)
      return "schema check: simulate failed";
    if (run_cli("topics --data d.json --T 2 --chains 2 --iters 60 "
                "--warmup 20 --seed 5 --out fit.json",
                dir) != 0)
      return "schema check: topics failed";
    if (run_cli("topics-diff --fit fit.json --group group --out td.csv",
                dir) != 0)
      return "schema check: topics-diff failed";
    std::istringstream csv(slurp(dir / "td.csv"));
    std::string header;
    std::getline(csv, header);
    fs::remove_all(dir);
    if (header != "Topic,lfc,lfcSE,WTS,pvalue,p.adj")
      return "schema check: header is '" + header + "'";
  }
  return "";
}

// ---------------------------------------------------------- criterion 9

std::string criterion_end_to_end_determinism() {
  const fs::path dir = fs::temp_directory_path() / "microstat_acceptance_e2e";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // synthetic raw tables: 16 taxa, 12 biological specimens in 2 groups,
  // 4 negative controls; 3 taxa carry reagent contamination
  ms::Pcg32 g(90, 12);
  const std::size_t m = 16, nbio = 12, nctrl = 4;
  std::ostringstream counts;
  counts << "taxon_id";
  for (std::size_t j = 0; j < nbio; ++j) counts << "\tb" << j + 1;
  for (std::size_t j = 0; j < nctrl; ++j) counts << "\tc" << j + 1;
  counts << '\n';
  for (std::size_t i = 0; i < m; ++i) {
    counts << "asv" << i + 1;
    const bool contam = i < 3;
    const double mu = 20.0 + static_cast<double>(g.bounded(80));
    const double mu2 = (i == 4 || i == 5) ? mu * 2.5 : mu;
    for (std::size_t j = 0; j < nbio; ++j) {
      const double base = contam ? 12.0 : (j < nbio / 2 ? mu : mu2);
      counts << '\t' << ms::rnbinom_mu(g, base, 6.0);
    }
    for (std::size_t j = 0; j < nctrl; ++j)
      counts << '\t' << (contam ? ms::rpois(g, 12.0) : 0);
    counts << '\n';
  }
  spit(dir / "counts.tsv", counts.str());

  std::ostringstream samples;
  samples << "specimen_id\tspecimen_type\tgroup\tsubject_id\n";
  for (std::size_t j = 0; j < nbio; ++j)
    samples << 'b' << j + 1 << "\tbiological\t"
            << (j < nbio / 2 ? 'O' : 'M') << "\tsub" << j + 1 << '\n';
  for (std::size_t j = 0; j < nctrl; ++j)
    samples << 'c' << j + 1 << "\tnegative_control\t\t\n";
  spit(dir / "samples.tsv", samples.str());

  spit(dir / "pipe.cfg",
       "ingest --counts ../counts.tsv --samples ../samples.tsv "
       "--out ds.json\n"
       "filter --data ds.json --min-reads 10 --out filtered.json\n"
       "decontam --data filtered.json --chains 4 --iters 2000 "
       "--warmup 1000 --seed 5 --out cleaned.json --report contam.csv\n"
       "filter --data cleaned.json --min-reads 1 "
       "--drop-specimens c1,c2,c3,c4 --out bio.json\n"
       "transform --data bio.json --method anscombe --out anscombe.csv\n"
       "ordinate --data bio.json --metric bray --method pcoa --axes 2 "
       "--out coords.csv --svg plot.svg --color group\n"
       "test --data bio.json --metric bray --method permanova "
       "--group group --nperm 999 --seed 6 --out permanova.csv\n"
       "topics --data bio.json --T 3 --chains 4 --iters 2000 --warmup 1000 "
       "--seed 7 --out fit.json --diagnostics diag.csv\n"
       "topics-diff --fit fit.json --group group --out topics_diff.csv\n");

  if (run_cli("pipeline --config pipe.cfg --run-dir run1", dir) != 0)
    return "first pipeline run failed: " + slurp(dir / "_stderr");
  if (run_cli("pipeline --config pipe.cfg --run-dir run2", dir) != 0)
    return "second pipeline run failed: " + slurp(dir / "_stderr");

  std::vector<std::string> mismatches;
  for (const auto &entry : fs::directory_iterator(dir / "run1")) {
    const std::string name = entry.path().filename().string();
    if (name.find(".manifest.json") != std::string::npos) continue;
    if (slurp(entry.path()) != slurp(dir / "run2" / name))
      mismatches.push_back(name);
  }
  fs::remove_all(dir);
  if (!mismatches.empty()) {
    std::string msg = "outputs differ between runs:";
    for (const auto &m2 : mismatches) msg += " " + m2;
    return msg;
  }
  return "";
}

} // namespace

int main(int argc, char **argv) {
  if (argc > 1) g_bin = argv[1];
  if (g_bin.empty())
    if (const char *env = std::getenv("MICROSTAT_BIN")) g_bin = env;
  if (g_bin.empty()) {
    std::fprintf(stderr,
                 "usage: acceptance <path-to-microstat-binary>\n");
    return 2;
  }

  struct Criterion {
    int id;
    const char *name;
    double budget_seconds;
    std::function<std::string()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "NB goodness-of-fit calibration (500 taxa, 1000 sims)", 120,
       criterion_gof_calibration},
      {2, "Anscombe variance stabilization", 30,
       criterion_anscombe_variance},
      {3, "contamination calls on planted truth", 600,
       criterion_contamination_calls},
      {4, "median-of-ratios exactness", 5, criterion_median_of_ratios},
      {5, "ordination oracles (PCoA, CA, UniFrac)", 30,
       criterion_ordination_oracles},
      {6, "PERMANOVA size and strain-switching power", 600,
       criterion_permanova_size_and_power},
      {7, "LDA recovery and sampler correctness", 900, criterion_lda},
      {8, "differential topics (null FDR, power, schema)", 600,
       criterion_differential_topics},
      {9, "end-to-end pipeline determinism", 1200,
       criterion_end_to_end_determinism},
  };

  int failures = 0;
  for (const auto &c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    try {
      detail = c.run();
    } catch (const std::exception &e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (detail.empty() && secs > c.budget_seconds) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "runtime %.1f s over the %.0f s budget",
                    secs, c.budget_seconds);
      detail = buf;
    }
    if (detail.empty()) {
      std::printf("[PASS] criterion %d: %s (%.1f s)\n", c.id, c.name, secs);
    } else {
      std::printf("[FAIL] criterion %d: %s (%.1f s) - %s\n", c.id, c.name,
                  secs, detail.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures > 0)
    std::printf("%d criterion(s) failed\n", failures);
  else
    std::printf("all %zu criteria passed\n", criteria.size());
  return failures == 0 ? 0 : 1;
}
