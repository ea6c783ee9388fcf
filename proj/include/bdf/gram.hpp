#pragma once

#include "bdf/kernel.hpp"
#include "bdf/types.hpp"

namespace bdf {

/// Sufficient statistics of a feature batch for conjugate updates:
/// gram = Phi^T Phi (M x M, both triangles filled) and cross = Phi^T Y
/// (M x K, one column per label channel).
struct NormalStats {
  MatrixXd gram;
  MatrixXd cross;
};

/// Rows with a large fraction of exact zeros (sparsified features) are
/// accumulated pairwise over their nonzeros; dense batches go through a
/// symmetric rank-k update. Work is split over OpenMP threads by output
/// index, so every entry sums rows in the same order for any thread count.
NormalStats accumulate_normal_stats(const FeatureMatrix& phi, const MatrixXd& labels);

/// Running version of accumulate_normal_stats over many row blocks. Keeps one
/// M x M upper triangle, so blocks add no M x M temporaries.
class NormalStatsAccumulator {
 public:
  NormalStatsAccumulator(Index m, Index k);
  void add(const FeatureMatrix& phi, const MatrixXd& labels);
  void add(const SparseFeatures& phi, const MatrixXd& labels);
  NormalStats finish() const;

 private:
  void check_batch(Index rows, Index cols, const MatrixXd& labels) const;
  void add_sparse(const SparseFeatures& phi, const MatrixXd& labels);

  using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajorMatrix upper_;
  MatrixXd cross_;
};

/// Fraction of nonzero entries; drives the dense/sparse choice above.
double nonzero_fraction(const FeatureMatrix& phi);

namespace reference {

/// Straight triple loop, serial. Test baseline only.
NormalStats accumulate_normal_stats(const FeatureMatrix& phi, const MatrixXd& labels);

}  // namespace reference

}  // namespace bdf
