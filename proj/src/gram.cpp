#include "bdf/gram.hpp"

#include <vector>

#include <omp.h>

#include "bdf/error.hpp"

namespace bdf {

namespace {

// Below this nonzero fraction the pairwise sparse path beats a dense syrk.
constexpr double kSparseDensity = 0.2;

void check_shapes(const FeatureMatrix& phi, const MatrixXd& labels) {
  if (labels.rows() != phi.rows()) {
    throw InvalidArgument("normal stats: " + std::to_string(labels.rows()) + " label rows for " +
                          std::to_string(phi.rows()) + " feature rows");
  }
}

SparseFeatures compress(const FeatureMatrix& phi) {
  SparseFeatures c;
  c.cols = phi.cols();
  c.offsets.reserve(static_cast<std::size_t>(phi.rows()) + 1);
  for (Index r = 0; r < phi.rows(); ++r) {
    const double* row = phi.row(r).data();
    for (Index m = 0; m < phi.cols(); ++m) {
      if (row[m] != 0.0) {
        c.indices.push_back(static_cast<int>(m));
        c.values.push_back(row[m]);
      }
    }
    c.offsets.push_back(static_cast<Index>(c.indices.size()));
  }
  return c;
}

}  // namespace

NormalStatsAccumulator::NormalStatsAccumulator(Index m, Index k)
    : upper_(RowMajorMatrix::Zero(m, m)), cross_(MatrixXd::Zero(m, k)) {}

void NormalStatsAccumulator::check_batch(Index rows, Index cols, const MatrixXd& labels) const {
  if (labels.rows() != rows) {
    throw InvalidArgument("normal stats: " + std::to_string(labels.rows()) + " label rows for " + std::to_string(rows) +
                          " feature rows");
  }
  if (cols != upper_.rows() || labels.cols() != cross_.cols()) {
    throw InvalidArgument("normal stats: batch of width " + std::to_string(cols) + " x " +
                          std::to_string(labels.cols()) + " for accumulator of " + std::to_string(upper_.rows()) +
                          " x " + std::to_string(cross_.cols()));
  }
}

void NormalStatsAccumulator::add(const FeatureMatrix& phi, const MatrixXd& labels) {
  check_batch(phi.rows(), phi.cols(), labels);
  if (phi.rows() == 0) return;
  const SparseFeatures c = compress(phi);
  const double density = static_cast<double>(c.indices.size()) / static_cast<double>(phi.size());
  if (density < kSparseDensity) {
    add_sparse(c, labels);
    return;
  }
  // Row-major upper triangle viewed as the lower triangle of its column-major transpose.
  Eigen::Map<MatrixXd> lower(upper_.data(), upper_.rows(), upper_.cols());
  lower.selfadjointView<Eigen::Lower>().rankUpdate(phi.transpose());
  cross_.noalias() += phi.transpose() * labels;
}

void NormalStatsAccumulator::add(const SparseFeatures& phi, const MatrixXd& labels) {
  check_batch(phi.rows(), phi.cols, labels);
  add_sparse(phi, labels);
}

void NormalStatsAccumulator::add_sparse(const SparseFeatures& c, const MatrixXd& labels) {
  const Index k_dim = labels.cols();
#pragma omp parallel
  {
    const int nthreads = omp_get_num_threads();
    const int tid = omp_get_thread_num();
    for (Index r = 0; r < c.rows(); ++r) {
      const auto begin = static_cast<std::size_t>(c.offsets[static_cast<std::size_t>(r)]);
      const auto end = static_cast<std::size_t>(c.offsets[static_cast<std::size_t>(r) + 1]);
      for (std::size_t a = begin; a < end; ++a) {
        const int i = c.indices[a];
        if (i % nthreads != tid) continue;
        const double vi = c.values[a];
        double* out = upper_.row(i).data();
        for (std::size_t b = a; b < end; ++b) out[c.indices[b]] += vi * c.values[b];
        for (Index k = 0; k < k_dim; ++k) cross_(i, k) += vi * labels(r, k);
      }
    }
  }
}

NormalStats NormalStatsAccumulator::finish() const {
  NormalStats stats;
  stats.gram = upper_;
  stats.gram.triangularView<Eigen::StrictlyLower>() = stats.gram.transpose();
  stats.cross = cross_;
  return stats;
}

double nonzero_fraction(const FeatureMatrix& phi) {
  if (phi.size() == 0) return 0.0;
  const Index nnz = (phi.array() != 0.0).count();
  return static_cast<double>(nnz) / static_cast<double>(phi.size());
}

NormalStats accumulate_normal_stats(const FeatureMatrix& phi, const MatrixXd& labels) {
  check_shapes(phi, labels);
  NormalStatsAccumulator acc(phi.cols(), labels.cols());
  acc.add(phi, labels);
  return acc.finish();
}

namespace reference {

NormalStats accumulate_normal_stats(const FeatureMatrix& phi, const MatrixXd& labels) {
  check_shapes(phi, labels);
  const Index m_dim = phi.cols();
  NormalStats stats{MatrixXd::Zero(m_dim, m_dim), MatrixXd::Zero(m_dim, labels.cols())};
  for (Index r = 0; r < phi.rows(); ++r) {
    for (Index i = 0; i < m_dim; ++i) {
      for (Index j = 0; j < m_dim; ++j) stats.gram(i, j) += phi(r, i) * phi(r, j);
      for (Index k = 0; k < labels.cols(); ++k) stats.cross(i, k) += phi(r, i) * labels(r, k);
    }
  }
  return stats;
}

}  // namespace reference

}  // namespace bdf
