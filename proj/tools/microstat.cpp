// microstat: statistical toolkit for microbial count tables.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 numerical failure. Every output file gets a
// <output>.manifest.json with input digests, arguments and seed.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "microstat/microstat.hpp"

namespace ms = microstat;
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

std::ofstream open_output(const std::string &path) {
  if (path.find('/') != std::string::npos) {
    const fs::path dir = fs::path(path).parent_path();
    if (!dir.empty()) fs::create_directories(dir);
  }
  std::ofstream out(path);
  if (!out) throw ms::data_error("cannot write '" + path + "'");
  return out;
}

// metadata column values aligned with the count table's specimen order
std::vector<std::string> metadata_column(const ms::Dataset &data,
                                         const std::string &col) {
  std::vector<std::string> out;
  for (const auto &id : data.counts.specimen_ids) {
    const ms::SampleInfo *s = data.sample_for(id);
    if (!s)
      throw ms::data_error("specimen '" + id + "' has no metadata row");
    std::string v;
    if (col == "group")
      v = s->group;
    else if (col == "subject_id")
      v = s->subject_id;
    else if (col == "pair_id")
      v = s->pair_id;
    else if (col == "batch")
      v = s->has_batch ? std::to_string(s->batch) : "";
    else if (col == "specimen_type")
      v = ms::to_string(s->specimen_type);
    else
      throw ms::data_error(
          "unknown metadata column '" + col +
          "' (expected group, subject_id, pair_id, batch, specimen_type)");
    if (v.empty())
      throw ms::data_error("specimen '" + id + "' has no value for column '" +
                           col + "'");
    out.push_back(std::move(v));
  }
  return out;
}

ms::Dataset load_validated(const std::string &path) {
  ms::Dataset data = ms::load_dataset(path);
  const auto violations = ms::validate(data);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "'" << path << "' fails validation:";
    for (const auto &v : violations)
      msg << "\n  [" << v.rule << "] " << v.id << ": " << v.detail;
    throw ms::data_error(msg.str());
  }
  return data;
}

std::vector<double> ensure_size_factors(ms::Dataset &data,
                                        bool pseudo_reference) {
  if (!data.size_factors)
    data.size_factors = ms::median_of_ratios(data.counts, pseudo_reference);
  return *data.size_factors;
}

struct ManifestScope {
  ms::RunManifest m;
  explicit ManifestScope(std::string subcommand,
                         const std::vector<std::string> &argv) {
    m.subcommand = std::move(subcommand);
    m.argv = argv;
    m.started = ms::RunManifest::now_iso8601();
  }
  void seed(std::uint64_t s) {
    m.seed = s;
    m.has_seed = true;
  }
  void done(const std::string &output) {
    m.finished = ms::RunManifest::now_iso8601();
    m.write_for(output);
  }
};

int run_command(const std::vector<std::string> &args);

// ---------------------------------------------------------------- ingest

int cmd_ingest(const std::vector<std::string> &argv, std::string counts_file,
               std::string samples_file, std::string taxonomy_file,
               std::string tree_file, bool csv, std::string out) {
  const char delim = csv ? ',' : '\t';
  ms::Dataset data;
  {
    std::ifstream in(counts_file);
    if (!in) throw ms::data_error("cannot read '" + counts_file + "'");
    data.counts = ms::parse_count_table(in, delim);
  }
  {
    std::ifstream in(samples_file);
    if (!in) throw ms::data_error("cannot read '" + samples_file + "'");
    data.samples = ms::parse_sample_table(in, delim);
  }
  if (!taxonomy_file.empty()) {
    std::ifstream in(taxonomy_file);
    if (!in) throw ms::data_error("cannot read '" + taxonomy_file + "'");
    data.taxonomy = ms::parse_taxonomy_table(in, delim);
  }
  if (!tree_file.empty()) {
    std::ifstream in(tree_file);
    if (!in) throw ms::data_error("cannot read '" + tree_file + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    data.tree = ms::parse_newick(buf.str());
  }
  const auto violations = ms::validate(data);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "ingested dataset fails validation:";
    for (const auto &v : violations)
      msg << "\n  [" << v.rule << "] " << v.id << ": " << v.detail;
    throw ms::data_error(msg.str());
  }

  ManifestScope man("ingest", argv);
  man.m.add_input(counts_file);
  man.m.add_input(samples_file);
  if (!taxonomy_file.empty()) man.m.add_input(taxonomy_file);
  if (!tree_file.empty()) man.m.add_input(tree_file);
  ms::save_dataset(data, out);
  man.done(out);
  std::cerr << "ingest: " << data.counts.n_taxa() << " taxa x "
            << data.counts.n_specimens() << " specimens -> " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------- filter

int cmd_filter(const std::vector<std::string> &argv, std::string data_file,
               std::string out, ms::FilterSpec spec,
               const std::vector<std::string> &drop_rank_exprs) {
  for (const auto &expr : drop_rank_exprs) {
    const auto eq = expr.find('=');
    if (eq == std::string::npos)
      throw ms::data_error("--drop-rank expects RANK=VALUE, got '" + expr +
                           "'");
    spec.drop_taxonomy.emplace_back(expr.substr(0, eq), expr.substr(eq + 1));
  }
  ms::Dataset data = load_validated(data_file);
  const ms::Dataset filtered = ms::filter_dataset(data, spec);
  ManifestScope man("filter", argv);
  man.m.add_input(data_file);
  ms::save_dataset(filtered, out);
  man.done(out);
  std::cerr << "filter: " << data.counts.n_taxa() << " -> "
            << filtered.counts.n_taxa() << " taxa, "
            << data.counts.n_specimens() << " -> "
            << filtered.counts.n_specimens() << " specimens\n";
  return 0;
}

// ------------------------------------------------------------------- gof

int cmd_gof(const std::vector<std::string> &argv, std::string data_file,
            int nsim, std::uint64_t seed, std::string out,
            bool no_size_factors, bool pseudo_reference) {
  ms::Dataset data = load_validated(data_file);
  ensure_size_factors(data, pseudo_reference);
  ms::GofOptions opts;
  opts.use_size_factors = !no_size_factors;
  const auto batch = ms::gof_all(data, nsim, seed, opts);

  ManifestScope man("gof", argv);
  man.m.add_input(data_file);
  man.seed(seed);
  auto fh = open_output(out);
  fh << "taxon_id,statistic,n_bins,p_value,p_adjusted,zeros_observed,"
        "zeros_expected,flag\n";
  for (const auto &r : batch.results) {
    std::string flag;
    if (r.skipped)
      flag = "skipped";
    else if (r.degenerate)
      flag = "degenerate_bins";
    else if (r.fit_flagged)
      flag = "mom_fallback";
    fh << r.taxon_id << ',' << fmt(r.statistic) << ',' << r.n_bins << ','
       << fmt(r.p_value) << ',' << fmt(r.p_adjusted) << ','
       << fmt(r.zeros_observed) << ',' << fmt(r.zeros_expected) << ',' << flag
       << '\n';
  }
  fh.close();
  man.done(out);
  std::cerr << "gof: " << batch.results.size() << " taxa, excess-zero "
            << "fraction " << fmt(batch.excess_zero_fraction) << "\n";
  return 0;
}

// -------------------------------------------------------------- decontam

int cmd_decontam(const std::vector<std::string> &argv, std::string data_file,
                 double hpd, int chains, int iters, int warmup,
                 std::uint64_t seed, std::string out, std::string report,
                 bool taxon_level, bool pseudo_reference) {
  ms::Dataset data = load_validated(data_file);
  ensure_size_factors(data, pseudo_reference);
  ms::McmcSettings mc;
  mc.chains = chains;
  mc.iters = iters;
  mc.warmup = warmup;
  mc.hpd_level = hpd;
  mc.seed = seed;
  ms::DecontamOptions opts;
  opts.taxon_level = taxon_level;
  const auto res = ms::call_contaminants(data, mc, opts);

  ManifestScope man("decontam", argv);
  man.m.add_input(data_file);
  man.seed(seed);
  ms::save_dataset(res.cleaned, out);
  man.done(out);
  if (!report.empty()) {
    auto fh = open_output(report);
    fh << "taxon_id,specimen_id,L_r,U_r,L_c,U_c,is_contaminant\n";
    for (const auto &s : res.summaries) {
      if (!s.evaluated && !s.failed) continue; // zero-count cells
      fh << s.taxon_id << ',' << s.specimen_id << ',' << fmt(s.hpd_true.lower)
         << ',' << fmt(s.hpd_true.upper) << ',' << fmt(s.hpd_contam.lower)
         << ',' << fmt(s.hpd_contam.upper) << ','
         << (s.is_contaminant ? "true" : "false") << '\n';
    }
    fh.close();
    man.done(report);
  }
  std::cerr << "decontam: " << res.contaminant_cells
            << " contaminant cells, " << res.contaminant_taxa.size()
            << " taxon-level calls\n";
  return 0;
}

// ------------------------------------------------------------- transform

ms::TransformedTable apply_transform(ms::Dataset &data,
                                     const std::string &method,
                                     std::int64_t t, std::int64_t tau,
                                     bool pseudo_reference) {
  if (method == "anscombe") {
    ensure_size_factors(data, pseudo_reference);
    std::vector<double> dispersion(data.counts.n_taxa());
    for (std::size_t i = 0; i < data.counts.n_taxa(); ++i) {
      std::vector<std::int64_t> row(data.counts.n_specimens());
      for (std::size_t j = 0; j < row.size(); ++j)
        row[j] = data.counts.at(i, j);
      bool all_zero = true;
      for (auto v : row) all_zero = all_zero && v == 0;
      if (all_zero) {
        dispersion[i] = 1e6; // flat row transforms like a Poisson
        continue;
      }
      dispersion[i] = ms::fit_nb(row, *data.size_factors).params.k;
    }
    return ms::anscombe(data.counts, dispersion);
  }
  if (method == "trunc-rank") return ms::truncated_rank(data.counts, t);
  if (method == "presence") return ms::presence_absence(data.counts, tau);
  if (method == "scale") {
    ensure_size_factors(data, pseudo_reference);
    return ms::scale_by_size_factors(data.counts, *data.size_factors);
  }
  throw ms::data_error("unknown transform '" + method +
                       "' (anscombe, trunc-rank, presence, scale)");
}

int cmd_transform(const std::vector<std::string> &argv, std::string data_file,
                  std::string method, std::int64_t t, std::int64_t tau,
                  std::string out, bool pseudo_reference) {
  ms::Dataset data = load_validated(data_file);
  const auto table = apply_transform(data, method, t, tau, pseudo_reference);
  ManifestScope man("transform", argv);
  man.m.add_input(data_file);
  auto fh = open_output(out);
  fh << "taxon_id";
  for (const auto &id : table.specimen_ids) fh << ',' << id;
  fh << '\n';
  for (std::size_t i = 0; i < table.n_taxa(); ++i) {
    fh << table.taxa_ids[i];
    for (std::size_t j = 0; j < table.n_specimens(); ++j)
      fh << ',' << fmt(table.at(i, j));
    fh << '\n';
  }
  fh.close();
  man.done(out);
  if (!table.flagged_taxa.empty())
    std::cerr << "transform: " << table.flagged_taxa.size()
              << " taxa clamped (dispersion <= 1)\n";
  return 0;
}

// -------------------------------------------------------------- ordinate

int cmd_ordinate(const std::vector<std::string> &argv, std::string data_file,
                 std::string metric, std::string method, std::size_t axes,
                 std::string out, std::string svg_file, std::string color_col,
                 std::string transform, std::int64_t t, std::int64_t tau,
                 bool normalized, std::string loadings_file,
                 bool pseudo_reference) {
  ms::Dataset data = load_validated(data_file);

  ms::Ordination ord;
  if (method == "pcoa") {
    ms::DistanceMatrix d;
    if (metric == "unifrac" || metric == "unifrac-unweighted") {
      if (!data.tree || data.tree->empty())
        throw ms::data_error("unifrac needs a tree in the dataset");
      d = ms::unifrac(data.counts, *data.tree, metric == "unifrac",
                      normalized);
    } else {
      if (transform != "none") {
        const auto table =
            apply_transform(data, transform, t, tau, pseudo_reference);
        d = ms::distance_matrix(table, ms::metric_from_string(metric));
      } else {
        d = ms::distance_matrix(data.counts, ms::metric_from_string(metric));
      }
    }
    ord = ms::pcoa(d, axes);
  } else if (method == "pca") {
    ms::TransformedTable table;
    if (transform == "none") {
      table.taxa_ids = data.counts.taxa_ids;
      table.specimen_ids = data.counts.specimen_ids;
      table.values.assign(data.counts.counts.begin(),
                          data.counts.counts.end());
    } else {
      table = apply_transform(data, transform, t, tau, pseudo_reference);
    }
    ord = ms::pca(table, axes);
  } else if (method == "ca") {
    ord = ms::correspondence_analysis(data.counts, axes);
  } else {
    throw ms::data_error("unknown ordination method '" + method +
                         "' (pcoa, pca, ca)");
  }

  ManifestScope man("ordinate", argv);
  man.m.add_input(data_file);
  auto fh = open_output(out);
  fh << "specimen_id";
  for (std::size_t a = 0; a < ord.n_axes; ++a) fh << ",Axis" << a + 1;
  fh << '\n';
  for (std::size_t j = 0; j < ord.ids.size(); ++j) {
    fh << ord.ids[j];
    for (std::size_t a = 0; a < ord.n_axes; ++a)
      fh << ',' << fmt(ord.coord(j, a));
    fh << '\n';
  }
  fh.close();
  man.done(out);

  if (!loadings_file.empty() && !ord.loadings.empty()) {
    auto lf = open_output(loadings_file);
    lf << "taxon_id";
    for (std::size_t a = 0; a < ord.n_axes; ++a) lf << ",Axis" << a + 1;
    lf << '\n';
    for (std::size_t i = 0; i < ord.feature_ids.size(); ++i) {
      lf << ord.feature_ids[i];
      for (std::size_t a = 0; a < ord.n_axes; ++a)
        lf << ',' << fmt(ord.loading(i, a));
      lf << '\n';
    }
    lf.close();
    man.done(loadings_file);
  }

  if (!svg_file.empty()) {
    if (ord.n_axes < 2)
      throw ms::data_error("svg plot needs at least 2 axes");
    std::vector<ms::ScatterPoint> pts;
    std::vector<std::string> colors(ord.ids.size());
    if (!color_col.empty()) colors = metadata_column(data, color_col);
    for (std::size_t j = 0; j < ord.ids.size(); ++j)
      pts.push_back({ord.coord(j, 0), ord.coord(j, 1), colors[j]});
    char xl[64], yl[64];
    std::snprintf(xl, sizeof xl, "Axis 1 (%.1f%%)",
                  100.0 * ord.variance_explained[0]);
    std::snprintf(yl, sizeof yl, "Axis 2 (%.1f%%)",
                  100.0 * ord.variance_explained[1]);
    auto sf = open_output(svg_file);
    sf << ms::svg_scatter(pts, xl, yl, method + " / " + metric);
    sf.close();
    man.done(svg_file);
  }

  std::cerr << "ordinate: " << ord.n_axes << " axes";
  if (!ord.variance_explained.empty()) {
    std::cerr << ", variance explained";
    for (double v : ord.variance_explained) std::cerr << ' ' << fmt(v);
  }
  if (ord.negative_eigenvalue_mass > 0.0)
    std::cerr << ", negative eigenvalue mass "
              << fmt(ord.negative_eigenvalue_mass);
  std::cerr << '\n';
  return 0;
}

// ------------------------------------------------------------------ test

int cmd_test(const std::vector<std::string> &argv, std::string data_file,
             std::string metric, std::string method, std::string group_col,
             std::string blocks_col, int nperm, std::uint64_t seed,
             std::string out, bool normalized) {
  ms::Dataset data = load_validated(data_file);
  ms::DistanceMatrix d;
  if (metric == "unifrac" || metric == "unifrac-unweighted") {
    if (!data.tree || data.tree->empty())
      throw ms::data_error("unifrac needs a tree in the dataset");
    d = ms::unifrac(data.counts, *data.tree, metric == "unifrac", normalized);
  } else {
    d = ms::distance_matrix(data.counts, ms::metric_from_string(metric));
  }
  const auto groups = metadata_column(data, group_col);

  ms::PermTestResult res;
  if (method == "permanova") {
    if (blocks_col.empty()) {
      res = ms::permanova(d, groups, nperm, seed);
    } else {
      const auto blocks = metadata_column(data, blocks_col);
      res = ms::permanova(d, groups, nperm, seed, &blocks);
    }
  } else if (method == "mst") {
    res = ms::mst_pure_edge_test(d, groups, nperm, seed);
  } else {
    throw ms::data_error("unknown test '" + method + "' (permanova, mst)");
  }

  std::cout << method << " statistic=" << fmt(res.statistic_observed)
            << " p=" << fmt(res.p_value) << " nperm=" << res.n_perm
            << " scheme="
            << (res.scheme == ms::PermutationScheme::free ? "free"
                                                          : "within_block")
            << '\n';
  if (!out.empty()) {
    ManifestScope man("test", argv);
    man.m.add_input(data_file);
    man.seed(seed);
    auto fh = open_output(out);
    fh << "method,metric,statistic,p_value,n_perm,scheme,seed\n";
    fh << method << ',' << metric << ',' << fmt(res.statistic_observed) << ','
       << fmt(res.p_value) << ',' << res.n_perm << ','
       << (res.scheme == ms::PermutationScheme::free ? "free" : "within_block")
       << ',' << seed << '\n';
    fh.close();
    man.done(out);
  }
  return 0;
}

// ----------------------------------------------------------------- power

int cmd_power(const std::vector<std::string> &argv, std::string scenario_file,
              double alpha, int reps, std::string grid_expr, int nperm,
              std::uint64_t seed, std::string out) {
  const auto scenario = ms::load_scenario(scenario_file);
  std::vector<double> grid;
  {
    std::stringstream ss(grid_expr);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) grid.push_back(std::stod(tok));
  }
  if (grid.empty()) throw ms::data_error("--grid has no entries");
  ms::PowerOptions opts;
  opts.alpha = alpha;
  opts.n_perm = nperm;
  const auto [with, without] =
      ms::strain_switch_power(scenario, grid, reps, seed, opts);

  ManifestScope man("power", argv);
  man.m.add_input(scenario_file);
  man.seed(seed);
  auto fh = open_output(out);
  fh << "scenario,switch_fraction,power,mc_se,n_replicates,alpha\n";
  for (const auto *curve : {&with, &without})
    for (std::size_t i = 0; i < curve->grid.size(); ++i)
      fh << curve->scenario << ',' << fmt(curve->grid[i]) << ','
         << fmt(curve->power[i]) << ',' << fmt(curve->mc_se[i]) << ','
         << curve->n_replicates << ',' << fmt(curve->alpha) << '\n';
  fh.close();
  man.done(out);
  return 0;
}

// ---------------------------------------------------------------- topics

int cmd_topics(const std::vector<std::string> &argv, std::string data_file,
               int n_topics, double alpha, double gamma, int chains,
               int iters, int warmup, int thin, std::uint64_t seed,
               std::string out, std::string diag_file, std::string scan_expr,
               std::string scan_out, double holdout) {
  ms::Dataset data = load_validated(data_file);
  ms::LdaSpec spec;
  spec.n_topics = n_topics;
  spec.alpha = alpha;
  spec.gamma = gamma;
  spec.chains = chains;
  spec.iters = iters;
  spec.warmup = warmup;
  spec.thin = thin;
  spec.seed = seed;

  if (!scan_expr.empty()) {
    if (scan_out.empty())
      throw ms::data_error("--scan needs --scan-out for the report");
    std::vector<int> grid;
    std::stringstream ss(scan_expr);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) grid.push_back(std::stoi(tok));
    const auto rows =
        ms::lda_t_scan(data.counts, grid, spec, holdout, seed);
    ManifestScope man("topics", argv);
    man.m.add_input(data_file);
    man.seed(seed);
    auto fh = open_output(scan_out);
    fh << "T,heldout_loglik\n";
    for (const auto &r : rows)
      fh << r.n_topics << ',' << fmt(r.heldout_loglik) << '\n';
    fh.close();
    man.done(scan_out);
    if (out.empty()) return 0;
  }
  if (out.empty())
    throw ms::data_error("--out is required unless --scan is used");
  const auto fit = ms::align_chains(ms::fit_lda(data.counts, spec));

  ManifestScope man("topics", argv);
  man.m.add_input(data_file);
  man.seed(seed);
  ms::save_topicfit(fit, data, out);
  man.done(out);

  if (!diag_file.empty()) {
    const auto diag = ms::diagnostics(fit);
    auto fh = open_output(diag_file);
    fh << "parameter,rhat,ess\n";
    const auto tcount = static_cast<std::size_t>(fit.n_topics);
    for (std::size_t j = 0; j < fit.n_specimens(); ++j)
      for (std::size_t tt = 0; tt < tcount; ++tt)
        fh << "theta[" << fit.specimen_ids[j] << ",Topic_" << tt + 1 << "],"
           << fmt(diag.rhat_theta[j * tcount + tt]) << ','
           << fmt(diag.ess_theta[j * tcount + tt]) << '\n';
    for (std::size_t tt = 0; tt < tcount; ++tt)
      for (std::size_t w = 0; w < fit.n_taxa(); ++w)
        fh << "beta[Topic_" << tt + 1 << ',' << fit.taxa_ids[w] << "],"
           << fmt(diag.rhat_beta[tt * fit.n_taxa() + w]) << ','
           << fmt(diag.ess_beta[tt * fit.n_taxa() + w]) << '\n';
    fh.close();
    man.done(diag_file);
    std::cerr << "topics: max rhat " << fmt(diag.max_rhat()) << ", min ess "
              << fmt(diag.min_ess()) << '\n';
  }
  return 0;
}

int cmd_topics_diff(const std::vector<std::string> &argv,
                    std::string fit_file, std::string group_col,
                    std::string out) {
  const auto bundle = ms::load_topicfit(fit_file);
  const auto groups = metadata_column(bundle.data, group_col);
  const auto sizes = ms::library_sizes(bundle.data.counts);
  const auto rows = ms::differential_topics(bundle.fit, sizes, groups);

  ManifestScope man("topics-diff", argv);
  man.m.add_input(fit_file);
  auto fh = open_output(out);
  fh << "Topic,lfc,lfcSE,WTS,pvalue,p.adj\n";
  for (const auto &r : rows)
    fh << r.feature_id << ',' << fmt(r.lfc) << ',' << fmt(r.lfcSE) << ','
       << fmt(r.WTS) << ',' << fmt(r.pvalue) << ',' << fmt(r.p_adj) << '\n';
  fh.close();
  man.done(out);
  return 0;
}

int cmd_topics_ppc(const std::vector<std::string> &argv, std::string fit_file,
                   std::string out, std::size_t draws, std::uint64_t seed) {
  const auto bundle = ms::load_topicfit(fit_file);
  const auto rows = ms::posterior_predictive_check(bundle.fit,
                                                   bundle.data.counts, seed,
                                                   draws);
  ManifestScope man("topics-ppc", argv);
  man.m.add_input(fit_file);
  man.seed(seed);
  auto fh = open_output(out);
  fh << "taxon_id,observed_max,tail_probability,replicate_mean\n";
  for (const auto &r : rows)
    fh << r.taxon_id << ',' << fmt(r.observed_max) << ','
       << fmt(r.tail_probability) << ',' << fmt(r.replicate_mean) << '\n';
  fh.close();
  man.done(out);
  return 0;
}

// ------------------------------------------------------------------ diff

int cmd_diff(const std::vector<std::string> &argv, std::string data_file,
             std::string group_col, std::string out, bool pseudo_reference) {
  ms::Dataset data = load_validated(data_file);
  const auto sf = ensure_size_factors(data, pseudo_reference);
  const auto groups = metadata_column(data, group_col);
  const auto rows = ms::wald_test(data.counts, groups, sf);

  ManifestScope man("diff", argv);
  man.m.add_input(data_file);
  auto fh = open_output(out);
  fh << "taxon_id,baseMean,lfc,lfcSE,WTS,pvalue,p.adj,flag\n";
  for (const auto &r : rows) {
    std::string flag;
    if (r.na)
      flag = "all_zero";
    else if (r.separated)
      flag = "separated";
    fh << r.feature_id << ',' << fmt(r.base_mean) << ',' << fmt(r.lfc) << ','
       << fmt(r.lfcSE) << ',' << fmt(r.WTS) << ',' << fmt(r.pvalue) << ','
       << fmt(r.p_adj) << ',' << flag << '\n';
  }
  fh.close();
  man.done(out);
  return 0;
}

// -------------------------------------------------------------- simulate

int cmd_simulate(const std::vector<std::string> &argv,
                 std::string scenario_file, std::string out) {
  const auto scenario = ms::load_scenario(scenario_file);
  const auto data = ms::simulate(scenario);
  ManifestScope man("simulate", argv);
  man.m.add_input(scenario_file);
  man.seed(scenario.seed);
  ms::save_dataset(data, out);
  man.done(out);
  std::cerr << "simulate: " << data.counts.n_taxa() << " taxa x "
            << data.counts.n_specimens() << " specimens -> " << out << "\n";
  return 0;
}

// -------------------------------------------------------------- pipeline

std::vector<std::string> tokenize(const std::string &line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      continue;
    }
    if (!quoted && std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int cmd_pipeline(std::string config_file, std::string run_dir) {
  std::ifstream in(config_file);
  if (!in) throw ms::data_error("cannot read '" + config_file + "'");
  std::vector<std::vector<std::string>> stages;
  std::string line;
  while (std::getline(in, line)) {
    const auto toks = tokenize(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    stages.push_back(toks);
  }
  if (stages.empty())
    throw ms::data_error("pipeline config has no stages");
  fs::create_directories(run_dir);
  const fs::path previous = fs::current_path();
  fs::current_path(run_dir);
  for (std::size_t i = 0; i < stages.size(); ++i) {
    std::cerr << "pipeline stage " << i + 1 << "/" << stages.size() << ": "
              << stages[i][0] << "\n";
    int rc = 0;
    try {
      rc = run_command(stages[i]);
    } catch (...) {
      fs::current_path(previous);
      std::cerr << "pipeline: stage " << i + 1 << " ('" << stages[i][0]
                << "') failed\n";
      throw;
    }
    if (rc != 0) {
      fs::current_path(previous);
      std::cerr << "pipeline: stage " << i + 1 << " ('" << stages[i][0]
                << "') failed with exit code " << rc << "\n";
      return rc;
    }
  }
  fs::current_path(previous);
  return 0;
}

// ------------------------------------------------------------- dispatch

int run_command(const std::vector<std::string> &args) {
  CLI::App app{"microstat: statistics for microbial count tables"};
  app.set_version_flag("--version", std::string("microstat ") +
                                        MICROSTAT_VERSION);
  unsigned threads = 0;
  app.add_option("--threads", threads, "cap worker thread count");
  app.require_subcommand(1);

  std::vector<std::string> argv = args;

  // ingest
  auto *ingest = app.add_subcommand("ingest", "parse tables into a dataset");
  std::string counts_file, samples_file, taxonomy_file, tree_file, out;
  bool csv = false;
  ingest->add_option("--counts", counts_file, "count table (taxa x specimens)")
      ->required();
  ingest->add_option("--samples", samples_file, "sample metadata table")
      ->required();
  ingest->add_option("--taxonomy", taxonomy_file, "taxonomy table");
  ingest->add_option("--tree", tree_file, "Newick tree");
  ingest->add_flag("--csv", csv, "comma-delimited input (default TSV)");
  ingest->add_option("--out", out, "output dataset.json")->required();

  // filter
  auto *filter = app.add_subcommand("filter", "apply read/prevalence/"
                                              "taxonomy screens");
  std::string f_data, f_out;
  ms::FilterSpec fspec;
  std::vector<std::string> drop_rank_exprs;
  std::string drop_specimens_expr;
  filter->add_option("--data", f_data, "dataset.json")->required();
  filter->add_option("--out", f_out, "filtered dataset.json")->required();
  filter->add_option("--min-reads", fspec.min_reads_per_specimen,
                     "minimum reads per specimen (default 800)");
  filter->add_option("--min-count", fspec.min_count,
                     "minimum reads for prevalence screen");
  filter->add_option("--min-specimens", fspec.min_specimens,
                     "minimum specimens reaching --min-count");
  filter->add_option("--drop-rank", drop_rank_exprs,
                     "drop taxa with RANK=VALUE (repeatable)");
  filter->add_option("--require-rank", fspec.require_rank,
                     "drop taxa lacking an assignment at RANK (repeatable)");
  filter->add_option("--drop-specimens", drop_specimens_expr,
                     "comma-separated specimen ids to exclude");

  // gof
  auto *gof = app.add_subcommand("gof", "NB goodness-of-fit per taxon");
  std::string g_data, g_out;
  int g_nsim = 1000;
  std::uint64_t g_seed = 0;
  bool g_nosf = false, g_pseudo = false;
  gof->add_option("--data", g_data, "dataset.json")->required();
  gof->add_option("--nsim", g_nsim, "bootstrap simulations (default 1000)");
  gof->add_option("--seed", g_seed, "RNG seed")->required();
  gof->add_option("--out", g_out, "output CSV")->required();
  gof->add_flag("--no-size-factors", g_nosf,
                "ignore size factors in the GoF fit");
  gof->add_flag("--pseudo-reference", g_pseudo,
                "median-of-ratios over positive entries only");

  // decontam
  auto *dec = app.add_subcommand("decontam", "Bayesian contaminant calls "
                                             "from negative controls");
  std::string d_data, d_out, d_report;
  double d_hpd = 0.95;
  int d_chains = 4, d_iters = 2000, d_warmup = 1000;
  std::uint64_t d_seed = 0;
  bool d_taxon_level = false, d_pseudo = false;
  dec->add_option("--data", d_data, "dataset.json")->required();
  dec->add_option("--hpd", d_hpd, "HPD level (default 0.95)");
  dec->add_option("--chains", d_chains, "MCMC chains (default 4)");
  dec->add_option("--iters", d_iters, "iterations per chain (default 2000)");
  dec->add_option("--warmup", d_warmup, "warmup iterations (default 1000)");
  dec->add_option("--seed", d_seed, "RNG seed")->required();
  dec->add_option("--out", d_out, "cleaned dataset.json")->required();
  dec->add_option("--report", d_report, "per-cell HPD report CSV");
  dec->add_flag("--taxon-level", d_taxon_level,
                "zero whole taxa called in >= 50% of specimens");
  dec->add_flag("--pseudo-reference", d_pseudo,
                "median-of-ratios over positive entries only");

  // transform
  auto *tr = app.add_subcommand("transform", "variance-stabilizing and rank "
                                             "transforms");
  std::string t_data, t_method, t_out;
  std::int64_t t_t = 0, t_tau = 2;
  bool t_pseudo = false;
  tr->add_option("--data", t_data, "dataset.json")->required();
  tr->add_option("--method", t_method,
                 "anscombe | trunc-rank | presence | scale")
      ->required();
  tr->add_option("--t", t_t, "rank truncation threshold");
  tr->add_option("--tau", t_tau, "presence threshold (default 2)");
  tr->add_option("--out", t_out, "output CSV")->required();
  tr->add_flag("--pseudo-reference", t_pseudo,
               "median-of-ratios over positive entries only");

  // ordinate
  auto *ord = app.add_subcommand("ordinate", "distances + PCoA/PCA/CA");
  std::string o_data, o_metric = "bray", o_method = "pcoa", o_out, o_svg,
              o_color, o_transform = "none", o_loadings;
  std::size_t o_axes = 2;
  std::int64_t o_t = 0, o_tau = 2;
  bool o_norm = false, o_pseudo = false;
  ord->add_option("--data", o_data, "dataset.json")->required();
  ord->add_option("--metric", o_metric,
                  "bray | jaccard | euclidean | unifrac | unifrac-unweighted");
  ord->add_option("--method", o_method, "pcoa | pca | ca");
  ord->add_option("--axes", o_axes, "number of axes (default 2)");
  ord->add_option("--out", o_out, "coordinates CSV")->required();
  ord->add_option("--svg", o_svg, "scatter plot of the first two axes");
  ord->add_option("--color", o_color, "metadata column for point colors");
  ord->add_option("--transform", o_transform,
                  "pre-transform (none | anscombe | trunc-rank | presence | "
                  "scale)");
  ord->add_option("--t", o_t, "rank truncation threshold");
  ord->add_option("--tau", o_tau, "presence threshold");
  ord->add_flag("--normalized", o_norm, "normalized weighted unifrac");
  ord->add_option("--loadings", o_loadings, "write taxon loadings CSV");
  ord->add_flag("--pseudo-reference", o_pseudo,
                "median-of-ratios over positive entries only");

  // test
  auto *tst = app.add_subcommand("test", "permutation tests on distances");
  std::string ts_data, ts_metric = "bray", ts_method = "permanova", ts_group,
              ts_blocks, ts_out;
  int ts_nperm = 9999;
  std::uint64_t ts_seed = 0;
  bool ts_norm = false;
  tst->add_option("--data", ts_data, "dataset.json")->required();
  tst->add_option("--metric", ts_metric,
                  "bray | jaccard | euclidean | unifrac | unifrac-unweighted");
  tst->add_option("--method", ts_method, "permanova | mst");
  tst->add_option("--group", ts_group, "metadata column with group labels")
      ->required();
  tst->add_option("--blocks", ts_blocks,
                  "metadata column restricting permutations");
  tst->add_option("--nperm", ts_nperm, "permutations (default 9999)");
  tst->add_option("--seed", ts_seed, "RNG seed")->required();
  tst->add_option("--out", ts_out, "result CSV");
  tst->add_flag("--normalized", ts_norm, "normalized weighted unifrac");

  // power
  auto *pw = app.add_subcommand("power", "strain-switching power curves");
  std::string p_scenario, p_out, p_grid = "0,0.5,1";
  double p_alpha = 0.05;
  int p_reps = 500, p_nperm = 199;
  std::uint64_t p_seed = 0;
  pw->add_option("--scenario", p_scenario, "scenario.json")->required();
  pw->add_option("--alpha", p_alpha, "test level (default 0.05)");
  pw->add_option("--reps", p_reps, "replicates per grid point (default 500)");
  pw->add_option("--grid", p_grid,
                 "comma-separated switch fractions (default 0,0.5,1)");
  pw->add_option("--nperm", p_nperm, "permutations per test (default 199)");
  pw->add_option("--seed", p_seed, "RNG seed")->required();
  pw->add_option("--out", p_out, "power CSV")->required();

  // topics
  auto *tp = app.add_subcommand("topics", "LDA by collapsed Gibbs");
  std::string tp_data, tp_out, tp_diag, tp_scan, tp_scan_out;
  int tp_T = 11, tp_chains = 4, tp_iters = 2000, tp_warmup = 1000,
      tp_thin = 1;
  double tp_alpha = 0.8, tp_gamma = 0.5, tp_holdout = 0.1;
  std::uint64_t tp_seed = 0;
  tp->add_option("--data", tp_data, "dataset.json")->required();
  tp->add_option("--T", tp_T, "number of topics");
  tp->add_option("--alpha", tp_alpha, "Dirichlet prior on topics (0.8)");
  tp->add_option("--gamma", tp_gamma, "Dirichlet prior on taxa (0.5)");
  tp->add_option("--chains", tp_chains, "chains (default 4)");
  tp->add_option("--iters", tp_iters, "iterations per chain (default 2000)");
  tp->add_option("--warmup", tp_warmup, "warmup iterations (default 1000)");
  tp->add_option("--thin", tp_thin, "keep every n-th draw (default 1)");
  tp->add_option("--seed", tp_seed, "RNG seed")->required();
  tp->add_option("--out", tp_out, "fit.json");
  tp->add_option("--diagnostics", tp_diag, "split-Rhat/ESS CSV");
  tp->add_option("--scan", tp_scan,
                 "comma-separated T grid for the held-out scan report");
  tp->add_option("--scan-out", tp_scan_out, "scan report CSV");
  tp->add_option("--holdout", tp_holdout,
                 "held-out read fraction for --scan (default 0.1)");

  // topics-diff
  auto *td = app.add_subcommand("topics-diff", "differential topic analysis");
  std::string td_fit, td_group, td_out;
  td->add_option("--fit", td_fit, "fit.json")->required();
  td->add_option("--group", td_group, "metadata column with group labels")
      ->required();
  td->add_option("--out", td_out, "output CSV")->required();

  // topics-ppc
  auto *tc = app.add_subcommand("topics-ppc",
                                "posterior predictive check (max statistic)");
  std::string tc_fit, tc_out;
  std::size_t tc_draws = 1000;
  std::uint64_t tc_seed = 0;
  tc->add_option("--fit", tc_fit, "fit.json")->required();
  tc->add_option("--out", tc_out, "output CSV")->required();
  tc->add_option("--draws", tc_draws, "posterior draws to use (default 1000)");
  tc->add_option("--seed", tc_seed, "RNG seed");

  // diff
  auto *df = app.add_subcommand("diff", "taxa-level NB GLM Wald test");
  std::string df_data, df_group, df_out;
  bool df_pseudo = false;
  df->add_option("--data", df_data, "dataset.json")->required();
  df->add_option("--group", df_group, "metadata column with group labels")
      ->required();
  df->add_option("--out", df_out, "output CSV")->required();
  df->add_flag("--pseudo-reference", df_pseudo,
               "median-of-ratios over positive entries only");

  // simulate
  auto *sim = app.add_subcommand("simulate", "draw a dataset from a "
                                             "scenario");
  std::string s_scenario, s_out;
  sim->add_option("--scenario", s_scenario, "scenario.json")->required();
  sim->add_option("--out", s_out, "output dataset.json")->required();

  // pipeline
  auto *pl = app.add_subcommand("pipeline", "run stages from a config file");
  std::string pl_config, pl_dir = ".";
  pl->add_option("--config", pl_config, "stage list, one command per line")
      ->required();
  pl->add_option("--run-dir", pl_dir, "directory for stage outputs");

  try {
    // CLI11's vector overload consumes arguments back to front
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError &e) {
    // prints help to stdout or the usage error to stderr
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  if (threads > 0) ms::max_threads() = threads;

  if (*ingest)
    return cmd_ingest(argv, counts_file, samples_file, taxonomy_file,
                      tree_file, csv, out);
  if (*filter) {
    std::stringstream ss(drop_specimens_expr);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) fspec.drop_specimens.push_back(tok);
    return cmd_filter(argv, f_data, f_out, fspec, drop_rank_exprs);
  }
  if (*gof)
    return cmd_gof(argv, g_data, g_nsim, g_seed, g_out, g_nosf, g_pseudo);
  if (*dec)
    return cmd_decontam(argv, d_data, d_hpd, d_chains, d_iters, d_warmup,
                        d_seed, d_out, d_report, d_taxon_level, d_pseudo);
  if (*tr)
    return cmd_transform(argv, t_data, t_method, t_t, t_tau, t_out, t_pseudo);
  if (*ord)
    return cmd_ordinate(argv, o_data, o_metric, o_method, o_axes, o_out,
                        o_svg, o_color, o_transform, o_t, o_tau, o_norm,
                        o_loadings, o_pseudo);
  if (*tst)
    return cmd_test(argv, ts_data, ts_metric, ts_method, ts_group, ts_blocks,
                    ts_nperm, ts_seed, ts_out, ts_norm);
  if (*pw)
    return cmd_power(argv, p_scenario, p_alpha, p_reps, p_grid, p_nperm,
                     p_seed, p_out);
  if (*tp)
    return cmd_topics(argv, tp_data, tp_T, tp_alpha, tp_gamma, tp_chains,
                      tp_iters, tp_warmup, tp_thin, tp_seed, tp_out, tp_diag,
                      tp_scan, tp_scan_out, tp_holdout);
  if (*td) return cmd_topics_diff(argv, td_fit, td_group, td_out);
  if (*tc) return cmd_topics_ppc(argv, tc_fit, tc_out, tc_draws, tc_seed);
  if (*df) return cmd_diff(argv, df_data, df_group, df_out, df_pseudo);
  if (*sim) return cmd_simulate(argv, s_scenario, s_out);
  if (*pl) return cmd_pipeline(pl_config, pl_dir);
  return 1;
}

} // namespace

int main(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run_command(args);
  } catch (const ms::parse_error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ms::data_error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ms::numeric_error &e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception &e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
