#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "bdf/data.hpp"
#include "bdf/field.hpp"
#include "bdf/kernel.hpp"

namespace bdf {

/// sqrt of the mean squared error over every component of Q x K arrays.
double rmse(const MatrixXd& predicted, const MatrixXd& truth);

/// Mean standardized log loss: average negative log predictive density of
/// the model minus that of a Gaussian with the training mean and variance
/// (per column). Negative is better than the trivial model.
double msll(const MatrixXd& pred_mean, const MatrixXd& pred_var, const MatrixXd& truth, const VectorXd& train_mean,
            const VectorXd& train_var);

inline constexpr std::size_t kDefaultGpCap = 3000;

struct GpPrediction {
  MatrixXd means;      ///< Q x K, one column per label channel
  VectorXd variances;  ///< Q, shared by every channel (includes noise_var)
};

/// Exact Gaussian-process regression with the squared-exponential kernel
/// (unit signal variance). O(N^3), so fitting refuses N above `cap`.
class FullGp {
 public:
  static FullGp fit(const Points& inputs, const MatrixXd& targets, const KernelSpec& spec, double noise_var,
                    std::size_t cap = kDefaultGpCap);

  /// mean = k*^T (K + s2 I)^{-1} y, var = k** - k*^T (K + s2 I)^{-1} k* + s2.
  GpPrediction predict(const Points& queries) const;

 private:
  FullGp() = default;

  Points inputs_;
  KernelSpec spec_;
  double noise_var_ = 0.0;
  Eigen::LLT<MatrixXd> factor_;
  MatrixXd alpha_;  ///< (K + s2 I)^{-1} y
};

GpPrediction full_gp_fit_predict(const Dataset& train, const Points& test_positions, const KernelSpec& spec,
                                 double noise_var, std::size_t cap = kDefaultGpCap);

struct EvalReport {
  double rmse = 0.0;
  double msll = 0.0;
  double train_time_s = 0.0;
  double query_time_s = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t basis_size = 0;
  int threads = 1;
  std::map<std::string, std::string> config;

  std::string to_json() const;
};

/// Queries the field at the test positions and scores it against their labels.
/// MSLL's trivial model uses the field's recorded training label statistics.
EvalReport evaluate_field(const VelocityField& field, const Dataset& test);

struct ScalingRow {
  std::size_t n = 0;
  double train_s = 0.0;
  double query_s = 0.0;
  double rmse = 0.0;
  double msll = 0.0;
};

struct ScalingOptions {
  std::size_t repeats = 3;
  bool warmup = true;
};

/// Trains on the first n rows of `pool` for each size and scores on `test`.
/// Times are medians over `repeats` runs on a monotonic clock, after one
/// discarded warm-up run.
std::vector<ScalingRow> scaling_benchmark(const Dataset& pool, const Dataset& test, const std::vector<std::size_t>& sizes,
                                          const FieldConfig& config, const ScalingOptions& options = {});

/// Header `n,train_s,query_s,rmse,msll`.
void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows,
                       const std::vector<std::string>& comments = {});

double median(std::vector<double> values);

}  // namespace bdf
