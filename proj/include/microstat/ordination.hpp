#ifndef MICROSTAT_ORDINATION_HPP
#define MICROSTAT_ORDINATION_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "microstat/distances.hpp"
#include "microstat/errors.hpp"
#include "microstat/transforms.hpp"

namespace microstat {

struct Ordination {
  std::vector<std::string> ids;           // specimens, canonical order
  std::size_t n_axes = 0;
  std::vector<double> coordinates;        // N x n_axes row-major
  std::vector<double> eigenvalues;        // non-increasing
  std::vector<double> variance_explained; // per axis, sums to <= 1
  double negative_eigenvalue_mass = 0.0;  // PCoA only
  std::vector<std::string> feature_ids;   // taxa (PCA loadings / CA rows)
  std::vector<double> loadings;           // m x n_axes row-major
  double total_inertia = 0.0;             // CA only
  bool truncated = false; // fewer axes available than requested

  double coord(std::size_t j, std::size_t a) const {
    return coordinates[j * n_axes + a];
  }
  double loading(std::size_t i, std::size_t a) const {
    return loadings[i * n_axes + a];
  }
};

namespace detail {

// Deterministic sign convention: make the largest-magnitude entry of
// each column positive. Applies the same flip to a paired matrix.
inline void fix_signs(Eigen::MatrixXd &primary, Eigen::MatrixXd *paired) {
  for (Eigen::Index c = 0; c < primary.cols(); ++c) {
    Eigen::Index imax = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < primary.rows(); ++r) {
      const double a = std::fabs(primary(r, c));
      if (a > best + 1e-15) {
        best = a;
        imax = r;
      }
    }
    if (primary(imax, c) < 0.0) {
      primary.col(c) *= -1.0;
      if (paired && c < paired->cols()) paired->col(c) *= -1.0;
    }
  }
}

} // namespace detail

// Classical MDS: eigendecomposition of the double-centered squared
// distance matrix. Axes with non-positive eigenvalues are dropped and
// their mass reported.
inline Ordination pcoa(const DistanceMatrix &dm, std::size_t k) {
  const std::size_t n = dm.size();
  if (n < 3) throw data_error("pcoa: need at least 3 specimens");

  Eigen::MatrixXd b(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          -0.5 * dm.at(i, j) * dm.at(i, j);
  const Eigen::VectorXd row_mean = b.rowwise().mean();
  const double grand = b.mean();
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      b(i, j) += grand - row_mean(i) - row_mean(j);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
  if (es.info() != Eigen::Success)
    throw numeric_error("pcoa: eigendecomposition failed");

  // ascending from Eigen; walk backwards for non-increasing order
  std::vector<std::size_t> pos_axes;
  double pos_sum = 0.0, neg_mass = 0.0;
  for (Eigen::Index a = es.eigenvalues().size() - 1; a >= 0; --a) {
    const double lam = es.eigenvalues()(a);
    if (lam > 1e-12 * std::max(1.0, std::fabs(es.eigenvalues().maxCoeff()))) {
      pos_axes.push_back(static_cast<std::size_t>(a));
      pos_sum += lam;
    } else if (lam < 0.0) {
      neg_mass += -lam;
    }
  }

  Ordination out;
  out.ids = dm.ids;
  out.negative_eigenvalue_mass = neg_mass;
  if (k > pos_axes.size()) {
    out.truncated = true;
    k = pos_axes.size();
  }
  out.n_axes = k;
  Eigen::MatrixXd vecs(n, static_cast<Eigen::Index>(k));
  for (std::size_t a = 0; a < k; ++a)
    vecs.col(static_cast<Eigen::Index>(a)) =
        es.eigenvectors().col(static_cast<Eigen::Index>(pos_axes[a]));
  detail::fix_signs(vecs, nullptr);
  out.coordinates.resize(n * k);
  for (std::size_t a = 0; a < k; ++a) {
    const double lam = es.eigenvalues()(static_cast<Eigen::Index>(pos_axes[a]));
    out.eigenvalues.push_back(lam);
    out.variance_explained.push_back(pos_sum > 0.0 ? lam / pos_sum : 0.0);
    for (std::size_t j = 0; j < n; ++j)
      out.coordinates[j * k + a] =
          vecs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(a)) *
          std::sqrt(lam);
  }
  return out;
}

// PCA of the column-centered specimen x taxon matrix (SVD route), with
// taxon loadings for biplots.
inline Ordination pca(const TransformedTable &table, std::size_t k) {
  const std::size_t n = table.n_specimens();
  const std::size_t m = table.n_taxa();
  if (n < 2 || m < 2) throw data_error("pca: need at least 2x2 data");

  Eigen::MatrixXd x(n, m); // specimens are observations
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i)
      x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
          table.at(i, j);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  if (x.cwiseAbs().maxCoeff() < 1e-14)
    throw data_error("pca: matrix has zero variance");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto &sv = svd.singularValues();
  double total = 0.0;
  std::size_t rank = 0;
  for (Eigen::Index a = 0; a < sv.size(); ++a) {
    total += sv(a) * sv(a);
    if (sv(a) > 1e-12 * sv(0)) ++rank;
  }

  Ordination out;
  out.ids = table.specimen_ids;
  out.feature_ids = table.taxa_ids;
  if (k > rank) {
    out.truncated = true;
    k = rank;
  }
  out.n_axes = k;
  Eigen::MatrixXd v = svd.matrixV().leftCols(static_cast<Eigen::Index>(k));
  Eigen::MatrixXd u = svd.matrixU().leftCols(static_cast<Eigen::Index>(k));
  detail::fix_signs(v, &u);
  out.coordinates.resize(n * k);
  out.loadings.resize(m * k);
  for (std::size_t a = 0; a < k; ++a) {
    const double s = sv(static_cast<Eigen::Index>(a));
    out.eigenvalues.push_back(s * s);
    out.variance_explained.push_back(total > 0.0 ? s * s / total : 0.0);
    for (std::size_t j = 0; j < n; ++j)
      out.coordinates[j * k + a] =
          u(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(a)) * s;
    for (std::size_t i = 0; i < m; ++i)
      out.loadings[i * k + a] =
          v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a));
  }
  return out;
}

// Correspondence analysis of a contingency table: SVD of the
// standardized residuals under independence; principal coordinates for
// rows (taxa) and columns (specimens); total inertia = chi-square / n.
inline Ordination correspondence_analysis(const CountTable &ct,
                                          std::size_t k) {
  const std::size_t m = ct.n_taxa();
  const std::size_t n = ct.n_specimens();
  double grand = 0.0;
  std::vector<double> row_sum(m, 0.0), col_sum(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double v = static_cast<double>(ct.at(i, j));
      grand += v;
      row_sum[i] += v;
      col_sum[j] += v;
    }
  if (!(grand > 0.0))
    throw data_error("correspondence_analysis: empty table");
  for (std::size_t i = 0; i < m; ++i)
    if (row_sum[i] == 0.0)
      throw data_error("correspondence_analysis: all-zero row '" +
                       ct.taxa_ids[i] + "'; filter the table first");
  for (std::size_t j = 0; j < n; ++j)
    if (col_sum[j] == 0.0)
      throw data_error("correspondence_analysis: all-zero column '" +
                       ct.specimen_ids[j] + "'; filter the table first");

  Eigen::MatrixXd s(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const double r = row_sum[i] / grand;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = col_sum[j] / grand;
      const double p = static_cast<double>(ct.at(i, j)) / grand;
      s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (p - r * c) / std::sqrt(r * c);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      s, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto &sv = svd.singularValues();

  Ordination out;
  out.ids = ct.specimen_ids;
  out.feature_ids = ct.taxa_ids;
  double inertia = 0.0;
  std::size_t rank = 0;
  for (Eigen::Index a = 0; a < sv.size(); ++a) {
    inertia += sv(a) * sv(a);
    if (sv(a) * sv(a) > 1e-12) ++rank;
  }
  out.total_inertia = inertia;
  if (k > rank) {
    out.truncated = true;
    k = rank;
  }
  out.n_axes = k;
  Eigen::MatrixXd u = svd.matrixU().leftCols(static_cast<Eigen::Index>(k));
  Eigen::MatrixXd v = svd.matrixV().leftCols(static_cast<Eigen::Index>(k));
  detail::fix_signs(v, &u);
  out.coordinates.resize(n * k);
  out.loadings.resize(m * k);
  for (std::size_t a = 0; a < k; ++a) {
    const double sa = sv(static_cast<Eigen::Index>(a));
    out.eigenvalues.push_back(sa * sa);
    out.variance_explained.push_back(inertia > 0.0 ? sa * sa / inertia : 0.0);
    for (std::size_t j = 0; j < n; ++j)
      out.coordinates[j * k + a] =
          v(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(a)) * sa /
          std::sqrt(col_sum[j] / grand);
    for (std::size_t i = 0; i < m; ++i)
      out.loadings[i * k + a] =
          u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) * sa /
          std::sqrt(row_sum[i] / grand);
  }
  return out;
}

} // namespace microstat

#endif
