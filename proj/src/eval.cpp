#include "bdf/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>

#include <json.hpp>
#include <omp.h>

#include "bdf/error.hpp"

namespace bdf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

MatrixXd estimates_mean(const std::vector<VelocityEstimate>& est) {
  MatrixXd m(static_cast<Index>(est.size()), 3);
  for (std::size_t i = 0; i < est.size(); ++i) m.row(static_cast<Index>(i)) = est[i].mean.transpose();
  return m;
}

MatrixXd estimates_var(const std::vector<VelocityEstimate>& est) {
  MatrixXd m(static_cast<Index>(est.size()), 3);
  for (std::size_t i = 0; i < est.size(); ++i) m.row(static_cast<Index>(i)) = est[i].variance.transpose();
  return m;
}

MatrixXd kernel_matrix(const Points& a, const Points& b, const KernelSpec& spec) {
  MatrixXd k(a.rows(), b.rows());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < a.rows(); ++i) {
    const Vec3 ai = a.row(i).transpose();
    for (Index j = 0; j < b.rows(); ++j) k(i, j) = se_kernel(ai, b.row(j).transpose(), spec);
  }
  return k;
}

}  // namespace

double rmse(const MatrixXd& predicted, const MatrixXd& truth) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
    throw InvalidArgument("rmse: shape mismatch");
  }
  if (predicted.size() == 0) throw InvalidArgument("rmse: no points");
  return std::sqrt((predicted - truth).array().square().mean());
}

double msll(const MatrixXd& pred_mean, const MatrixXd& pred_var, const MatrixXd& truth, const VectorXd& train_mean,
            const VectorXd& train_var) {
  if (pred_mean.rows() != truth.rows() || pred_mean.cols() != truth.cols() || pred_var.rows() != truth.rows() ||
      pred_var.cols() != truth.cols() || train_mean.size() != truth.cols() || train_var.size() != truth.cols()) {
    throw InvalidArgument("msll: shape mismatch");
  }
  if (truth.size() == 0) throw InvalidArgument("msll: no points");
  if (!(pred_var.array() > 0.0).all() || !(train_var.array() > 0.0).all()) {
    throw InvalidArgument("msll: variances must be positive");
  }
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double total = 0.0;
  for (Index i = 0; i < truth.rows(); ++i) {
    for (Index k = 0; k < truth.cols(); ++k) {
      const double e = truth(i, k) - pred_mean(i, k);
      const double model = 0.5 * std::log(two_pi * pred_var(i, k)) + e * e / (2.0 * pred_var(i, k));
      const double e0 = truth(i, k) - train_mean[k];
      const double trivial = 0.5 * std::log(two_pi * train_var[k]) + e0 * e0 / (2.0 * train_var[k]);
      total += model - trivial;
    }
  }
  return total / static_cast<double>(truth.size());
}

FullGp FullGp::fit(const Points& inputs, const MatrixXd& targets, const KernelSpec& spec, double noise_var,
                   std::size_t cap) {
  spec.validate();
  if (inputs.rows() != targets.rows()) throw InvalidArgument("full GP: inputs/targets rows differ");
  if (inputs.rows() == 0) throw DataError("full GP: empty training set");
  if (!(noise_var > 0.0)) throw InvalidArgument("full GP: noise variance must be positive");
  if (static_cast<std::size_t>(inputs.rows()) > cap) {
    throw CapacityError("full GP oracle refuses N=" + std::to_string(inputs.rows()) + " (cap " + std::to_string(cap) +
                        "); exact GP cost grows as N^3");
  }
  FullGp gp;
  gp.inputs_ = inputs;
  gp.spec_ = spec;
  gp.noise_var_ = noise_var;
  MatrixXd k = kernel_matrix(inputs, inputs, spec);
  k.diagonal().array() += noise_var;
  gp.factor_.compute(k);
  if (gp.factor_.info() != Eigen::Success) throw NumericalFailure("full GP: kernel matrix not positive definite");
  gp.alpha_ = gp.factor_.solve(targets);
  return gp;
}

GpPrediction FullGp::predict(const Points& queries) const {
  const MatrixXd ks = kernel_matrix(inputs_, queries, spec_);  // N x Q
  GpPrediction out;
  out.means = ks.transpose() * alpha_;
  const MatrixXd v = factor_.matrixL().solve(ks);
  out.variances = (1.0 - v.colwise().squaredNorm().array()).matrix().transpose();
  out.variances.array() += noise_var_;
  return out;
}

GpPrediction full_gp_fit_predict(const Dataset& train, const Points& test_positions, const KernelSpec& spec,
                                 double noise_var, std::size_t cap) {
  return FullGp::fit(train.positions, train.velocities, spec, noise_var, cap).predict(test_positions);
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["rmse"] = rmse;
  j["msll"] = msll;
  j["train_time_s"] = train_time_s;
  j["query_time_s"] = query_time_s;
  j["n_train"] = n_train;
  j["n_test"] = n_test;
  j["M"] = basis_size;
  j["threads"] = threads;
  j["config"] = config;
  return j.dump(2);
}

EvalReport evaluate_field(const VelocityField& field, const Dataset& test) {
  if (test.empty()) throw DataError("evaluate: empty test set");
  const auto start = Clock::now();
  const auto est = query_field(field, test.positions);
  EvalReport r;
  r.query_time_s = seconds_since(start);
  const MatrixXd truth = test.velocities;
  r.rmse = rmse(estimates_mean(est), truth);
  const auto& ls = field.label_stats();
  if (ls.count < 2 || !(ls.variance().array() > 0.0).all()) {
    throw DataError("evaluate: field carries no usable training label statistics for MSLL");
  }
  r.msll = msll(estimates_mean(est), estimates_var(est), truth, ls.mean(), ls.variance());
  r.n_train = static_cast<std::size_t>(ls.count);
  r.n_test = static_cast<std::size_t>(test.size());
  r.basis_size = static_cast<std::size_t>(field.basis().size());
  r.threads = omp_get_max_threads();
  return r;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<ScalingRow> scaling_benchmark(const Dataset& pool, const Dataset& test, const std::vector<std::size_t>& sizes,
                                          const FieldConfig& config, const ScalingOptions& options) {
  if (options.repeats == 0) throw InvalidArgument("scaling benchmark needs at least one repeat");
  if (!std::is_sorted(sizes.begin(), sizes.end())) throw InvalidArgument("scaling benchmark sizes must be increasing");
  std::vector<ScalingRow> rows;
  for (std::size_t n : sizes) {
    if (n == 0 || n > static_cast<std::size_t>(pool.size())) {
      throw InvalidArgument("scaling benchmark size " + std::to_string(n) + " exceeds pool of " +
                            std::to_string(pool.size()));
    }
    std::vector<Index> head(n);
    for (std::size_t i = 0; i < n; ++i) head[i] = static_cast<Index>(i);
    const Dataset train = pool.subset(head);
    if (options.warmup) (void)train_field(train, config);

    std::vector<double> train_times, query_times;
    ScalingRow row;
    row.n = n;
    for (std::size_t rep = 0; rep < options.repeats; ++rep) {
      auto start = Clock::now();
      const VelocityField field = train_field(train, config);
      train_times.push_back(seconds_since(start));
      start = Clock::now();
      const auto est = query_field(field, test.positions);
      query_times.push_back(seconds_since(start));
      const MatrixXd truth = test.velocities;
      row.rmse = rmse(estimates_mean(est), truth);
      const auto& ls = field.label_stats();
      row.msll = (ls.count >= 2 && (ls.variance().array() > 0.0).all())
                     ? msll(estimates_mean(est), estimates_var(est), truth, ls.mean(), ls.variance())
                     : std::nan("");
    }
    row.train_s = median(train_times);
    row.query_s = median(query_times);
    rows.push_back(row);
  }
  return rows;
}

void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows, const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "n,train_s,query_s,rmse,msll\n";
  for (const auto& r : rows) {
    out << r.n << ',' << format_double(r.train_s) << ',' << format_double(r.query_s) << ',' << format_double(r.rmse)
        << ',' << format_double(r.msll) << '\n';
  }
}

}  // namespace bdf
