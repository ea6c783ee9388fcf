#include "bdf/inference.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "bdf/error.hpp"
#include "bdf/gram.hpp"

namespace bdf {

namespace {

constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-4;
constexpr Index kQueryTile = 16;

std::string dims(Index a, Index b) { return std::to_string(a) + " vs " + std::to_string(b); }

}  // namespace

namespace detail {

double ordered_dot(const double* a, const double* b, Index n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  Index i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

void NoiseModel::validate() const {
  if (!std::isfinite(alpha) || alpha <= 0.0) throw InvalidArgument("alpha must be finite and positive");
  if (!std::isfinite(beta) || beta <= 0.0) throw InvalidArgument("beta must be finite and positive");
}

CholeskyFactor CholeskyFactor::factorize(const MatrixXd& precision) {
  if (precision.rows() != precision.cols() || precision.rows() == 0) {
    throw InvalidArgument("cholesky: precision must be square and nonempty");
  }
  const Index m = precision.rows();
  const double scale = precision.trace() / static_cast<double>(m);
  double jitter = 0.0;
  double factor = kJitterStart;
  while (true) {
    Eigen::LLT<MatrixXd> llt;
    if (jitter == 0.0) {
      llt.compute(precision);
    } else {
      MatrixXd shifted = precision;
      shifted.diagonal().array() += jitter;
      llt.compute(shifted);
    }
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite()) {
      CholeskyFactor out;
      out.lower_ = llt.matrixL();
      out.jitter_ = jitter;
      return out;
    }
    if (factor > kJitterMax * (1.0 + 1e-12) || !(scale > 0.0) || !std::isfinite(scale)) {
      throw NumericalFailure("precision matrix is not positive definite (jitter escalated to " +
                             std::to_string(jitter) + ")");
    }
    jitter = factor * scale;
    factor *= 10.0;
  }
}

VectorXd CholeskyFactor::solve(const VectorXd& rhs) const {
  VectorXd x = lower_.triangularView<Eigen::Lower>().solve(rhs);
  lower_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

double CholeskyFactor::inverse_quadratic(const double* phi) const {
  const Index m = lower_.rows();
  Index first = 0;
  while (first < m && phi[first] == 0.0) ++first;
  if (first == m) return 0.0;
  // Forward substitution; z stays zero before the first nonzero of phi.
  VectorXd z = VectorXd::Zero(m);
  double acc = 0.0;
  for (Index i = first; i < m; ++i) {
    const double* li = lower_.row(i).data();
    const double s = detail::ordered_dot(li + first, z.data() + first, i - first);
    const double zi = (phi[i] - s) / li[i];
    z[i] = zi;
    acc += zi * zi;
  }
  return acc;
}

MatrixXd CholeskyFactor::inverse() const {
  const Index m = lower_.rows();
  MatrixXd linv = MatrixXd::Identity(m, m);
  lower_.triangularView<Eigen::Lower>().solveInPlace(linv);
  MatrixXd out = MatrixXd::Zero(m, m);
  out.selfadjointView<Eigen::Lower>().rankUpdate(linv.transpose());
  out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
  return out;
}

GaussianState::GaussianState(MatrixXd precision, VectorXd info)
    : precision_(std::move(precision)), info_(std::move(info)) {
  if (precision_.rows() != precision_.cols() || precision_.rows() != info_.size()) {
    throw InvalidArgument("gaussian state: precision " + dims(precision_.rows(), precision_.cols()) +
                          " does not match info length " + std::to_string(info_.size()));
  }
  if (info_.size() == 0) throw InvalidArgument("gaussian state: dimension must be >= 1");
}

void GaussianState::materialize(std::shared_ptr<const CholeskyFactor> shared) {
  auto snap = std::make_shared<PosteriorSnapshot>();
  snap->factor = shared ? std::move(shared) : std::make_shared<const CholeskyFactor>(CholeskyFactor::factorize(precision_));
  if (snap->factor->dim() != dim()) throw InvalidArgument("materialize: shared factor has wrong dimension");
  snap->mean = snap->factor->solve(info_);
  snapshot_ = std::move(snap);
}

void GaussianState::materialize_covariance() {
  if (!snapshot_) materialize();
  covariance_ = std::make_shared<const MatrixXd>(snapshot_->factor->inverse());
}

std::shared_ptr<const PosteriorSnapshot> GaussianState::snapshot() const {
  if (snapshot_) return snapshot_;
  auto snap = std::make_shared<PosteriorSnapshot>();
  snap->factor = std::make_shared<const CholeskyFactor>(CholeskyFactor::factorize(precision_));
  snap->mean = snap->factor->solve(info_);
  return snap;
}

MatrixXd GaussianState::covariance() const {
  if (covariance_) return *covariance_;
  return snapshot()->factor->inverse();
}

void GaussianState::add_evidence(const MatrixXd& gram, const VectorXd& cross, double beta) {
  if (gram.rows() != dim() || gram.cols() != dim() || cross.size() != dim()) {
    throw InvalidArgument("add_evidence: statistics of size " + dims(gram.rows(), cross.size()) +
                          " for state of dimension " + std::to_string(dim()));
  }
  precision_.noalias() += beta * gram;
  info_.noalias() += beta * cross;
  snapshot_.reset();
  covariance_.reset();
}

GaussianState make_prior(Index m, double alpha) {
  if (m < 1) throw InvalidArgument("make_prior: dimension must be >= 1");
  if (!std::isfinite(alpha) || alpha <= 0.0) throw InvalidArgument("make_prior: alpha must be positive");
  GaussianState prior(alpha * MatrixXd::Identity(m, m), VectorXd::Zero(m));
  prior.materialize();
  return prior;
}

GaussianState posterior_update(const GaussianState& state, const FeatureMatrix& features,
                               const VectorXd& labels, double beta) {
  if (!std::isfinite(beta) || beta <= 0.0) throw InvalidArgument("posterior_update: beta must be positive");
  if (features.rows() != labels.size()) {
    throw InvalidArgument("posterior_update: features/labels rows " + dims(features.rows(), labels.size()));
  }
  if (features.rows() == 0) return state;
  if (features.cols() != state.dim()) {
    throw InvalidArgument("posterior_update: feature columns " + dims(features.cols(), state.dim()));
  }
  const NormalStats stats = accumulate_normal_stats(features, labels);
  GaussianState next = state;
  next.add_evidence(stats.gram, stats.cross.col(0), beta);
  return next;
}

MatrixXd gauss_jordan_inverse(const MatrixXd& a) {
  if (a.rows() != a.cols()) throw InvalidArgument("gauss_jordan_inverse: matrix not square");
  const Index n = a.rows();
  MatrixXd work = a;
  MatrixXd inv = MatrixXd::Identity(n, n);
  const double norm = a.cwiseAbs().maxCoeff();
  for (Index col = 0; col < n; ++col) {
    Index pivot = col;
    for (Index r = col + 1; r < n; ++r) {
      if (std::abs(work(r, col)) > std::abs(work(pivot, col))) pivot = r;
    }
    if (!(std::abs(work(pivot, col)) > 1e-14 * norm)) {
      throw NumericalFailure("gauss_jordan_inverse: matrix is singular");
    }
    work.row(col).swap(work.row(pivot));
    inv.row(col).swap(inv.row(pivot));
    const double p = work(col, col);
    work.row(col) /= p;
    inv.row(col) /= p;
    for (Index r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = work(r, col);
      if (f == 0.0) continue;
      work.row(r) -= f * work.row(col);
      inv.row(r) -= f * inv.row(col);
    }
  }
  return inv;
}

GaussianMoments brute_force_posterior(const VectorXd& prior_mu, const MatrixXd& prior_cov,
                                      const FeatureMatrix& features, const VectorXd& labels, double beta) {
  if (prior_cov.rows() != prior_mu.size() || prior_cov.cols() != prior_mu.size()) {
    throw InvalidArgument("brute_force_posterior: prior shapes disagree");
  }
  if (features.rows() != labels.size()) throw InvalidArgument("brute_force_posterior: features/labels rows");
  if (features.rows() > 0 && features.cols() != prior_mu.size()) {
    throw InvalidArgument("brute_force_posterior: feature columns");
  }
  if (features.rows() == 0) return {prior_mu, prior_cov};
  const MatrixXd prior_prec = gauss_jordan_inverse(prior_cov);
  const MatrixXd phi = features;
  MatrixXd cov = gauss_jordan_inverse(prior_prec + beta * (phi.transpose() * phi));
  VectorXd mean = cov * (prior_prec * prior_mu + beta * (phi.transpose() * labels));
  return {std::move(mean), std::move(cov)};
}

namespace {

void check_query(const GaussianState& state, const FeatureMatrix& features) {
  if (features.cols() != state.dim()) {
    throw InvalidArgument("predict: feature columns " + dims(features.cols(), state.dim()));
  }
}

}  // namespace

VectorXd predict_mean(const GaussianState& state, const FeatureMatrix& features) {
  check_query(state, features);
  const auto snap = state.snapshot();
  const Index q = features.rows();
  VectorXd means(q);
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < q; ++r) {
    means[r] = detail::ordered_dot(features.row(r).data(), snap->mean.data(), state.dim());
  }
  return means;
}

Prediction predict(const GaussianState& state, const FeatureMatrix& features, double beta) {
  if (!std::isfinite(beta) || beta <= 0.0) throw InvalidArgument("predict: beta must be positive");
  check_query(state, features);
  const auto snap = state.snapshot();
  const Index q = features.rows();
  const Index m = state.dim();
  Prediction out{VectorXd(q), VectorXd(q)};
  const double noise_var = 1.0 / beta;
  const Index tiles = (q + kQueryTile - 1) / kQueryTile;
#pragma omp parallel for schedule(dynamic)
  for (Index t = 0; t < tiles; ++t) {
    const Index begin = t * kQueryTile;
    const Index end = std::min(q, begin + kQueryTile);
    for (Index r = begin; r < end; ++r) {
      const double* phi = features.row(r).data();
      out.means[r] = detail::ordered_dot(phi, snap->mean.data(), m);
      out.variances[r] = noise_var + snap->factor->inverse_quadratic(phi);
    }
  }
  return out;
}

std::pair<VectorXd, VectorXd> rescale_check(const GaussianState& state, const FeatureMatrix& features, double c) {
  if (!std::isfinite(c) || c <= 0.0) throw InvalidArgument("rescale_check: c must be positive");
  check_query(state, features);
  const auto snap = state.snapshot();
  const FeatureMatrix scaled = c * features;
  const VectorXd weights = snap->mean / c;
  VectorXd before(features.rows()), after(features.rows());
  for (Index r = 0; r < features.rows(); ++r) {
    before[r] = detail::ordered_dot(features.row(r).data(), snap->mean.data(), state.dim());
    after[r] = detail::ordered_dot(scaled.row(r).data(), weights.data(), state.dim());
  }
  return {std::move(before), std::move(after)};
}

}  // namespace bdf
