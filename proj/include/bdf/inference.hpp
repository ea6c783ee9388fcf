#pragma once

#include <memory>
#include <utility>

#include "bdf/types.hpp"

namespace bdf {

/// Noise precision beta (1/velocity^2) and prior weight precision alpha.
struct NoiseModel {
  double alpha = 1e-2;
  double beta = 1e2;

  void validate() const;
};

/// Lower Cholesky factor L of a precision matrix (L L^T = precision + jitter I).
///
/// Factorization first runs without jitter; on failure it adds
/// 1e-10 * trace / M to the diagonal and escalates by 10x up to
/// 1e-4 * trace / M before giving up with NumericalFailure.
class CholeskyFactor {
 public:
  static CholeskyFactor factorize(const MatrixXd& precision);

  Index dim() const { return lower_.rows(); }
  double jitter() const { return jitter_; }
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& lower() const { return lower_; }

  /// precision^{-1} rhs.
  VectorXd solve(const VectorXd& rhs) const;
  /// phi^T precision^{-1} phi computed as |L^{-1} phi|^2. The arithmetic
  /// depends only on phi, never on neighbouring queries.
  double inverse_quadratic(const double* phi) const;
  MatrixXd inverse() const;

 private:
  CholeskyFactor() = default;

  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> lower_;
  double jitter_ = 0.0;
};

/// Immutable materialized posterior: the factor of the precision and the
/// mean. Several components may share one factor when their precisions match.
struct PosteriorSnapshot {
  std::shared_ptr<const CholeskyFactor> factor;
  VectorXd mean;
};

/// Gaussian over the weights of one scalar regression, held in precision
/// form (Lambda, Lambda mu) so that Bayesian updates are additive.
class GaussianState {
 public:
  GaussianState(MatrixXd precision, VectorXd info);

  Index dim() const { return info_.size(); }
  const MatrixXd& precision() const { return precision_; }
  const VectorXd& info() const { return info_; }

  /// Factorizes and caches the mean. When `shared` is given the caller
  /// guarantees it factors exactly this precision.
  void materialize(std::shared_ptr<const CholeskyFactor> shared = nullptr);
  /// Additionally caches the dense covariance.
  void materialize_covariance();
  bool materialized() const { return snapshot_ != nullptr; }

  /// Cached snapshot, or a freshly computed one that is not stored.
  std::shared_ptr<const PosteriorSnapshot> snapshot() const;
  VectorXd mean() const { return snapshot()->mean; }
  MatrixXd covariance() const;
  const MatrixXd* cached_covariance() const { return covariance_.get(); }

  /// precision += beta * gram, info += beta * cross. Drops caches.
  void add_evidence(const MatrixXd& gram, const VectorXd& cross, double beta);

 private:
  MatrixXd precision_;
  VectorXd info_;
  std::shared_ptr<const PosteriorSnapshot> snapshot_;
  std::shared_ptr<const MatrixXd> covariance_;
};

/// Zero-mean isotropic prior: precision alpha I, info 0.
GaussianState make_prior(Index m, double alpha);

/// Conjugate update with a batch of features and scalar labels. An empty
/// batch returns the state unchanged. Chaining batches equals one update on
/// their concatenation.
GaussianState posterior_update(const GaussianState& state, const FeatureMatrix& features,
                               const VectorXd& labels, double beta);

struct GaussianMoments {
  VectorXd mean;
  MatrixXd cov;
};

/// Dense-inverse transcription of the posterior formulas, no factorization:
/// cov = (prior_cov^{-1} + beta Phi^T Phi)^{-1}, mean = cov (prior_cov^{-1}
/// prior_mu + beta Phi^T v). Inverses use Gauss-Jordan elimination.
/// Intended as an oracle for M up to a few hundred.
GaussianMoments brute_force_posterior(const VectorXd& prior_mu, const MatrixXd& prior_cov,
                                      const FeatureMatrix& features, const VectorXd& labels, double beta);

/// Gauss-Jordan inverse with partial pivoting; NumericalFailure on a
/// (numerically) singular matrix.
MatrixXd gauss_jordan_inverse(const MatrixXd& a);

struct Prediction {
  VectorXd means;
  VectorXd variances;
};

/// Posterior predictive per query row: mean = mu^T phi,
/// variance = 1/beta + phi^T Sigma phi. Each row is computed independently
/// of the others, so a single query equals the same row of a batch bitwise.
Prediction predict(const GaussianState& state, const FeatureMatrix& features, double beta);

/// Means only; skips the triangular solves.
VectorXd predict_mean(const GaussianState& state, const FeatureMatrix& features);

/// Predicts the mean twice: once as is, once with features scaled by c and
/// weights scaled by 1/c. An input-noise factor exp(-gamma nu^2) on every
/// feature is absorbed into the weights this way, leaving the means intact.
std::pair<VectorXd, VectorXd> rescale_check(const GaussianState& state, const FeatureMatrix& features, double c);

namespace detail {
/// Dot product with a fixed 4-lane accumulation order, independent of
/// pointer alignment.
double ordered_dot(const double* a, const double* b, Index n);
}  // namespace detail

}  // namespace bdf
