#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bdf/data.hpp"
#include "bdf/inference.hpp"
#include "bdf/kernel.hpp"
#include "bdf/qmc.hpp"

namespace bdf {

struct FieldConfig {
  std::array<AxisRange, 3> bounds{AxisRange{-1.0, 1.0}, AxisRange{-1.0, 1.0}, AxisRange{-1.0, 1.0}};
  Vec3 spacing = Vec3::Constant(0.2);
  KernelSpec kernel = KernelSpec::isotropic(10.0);
  NoiseModel noise;
  /// Noise precision for QMC zero-velocity points; <= 0 means "same as noise.beta".
  double synthetic_beta = 0.0;
  double sparsify_below = 0.0;
  std::size_t max_basis = kDefaultMaxBasis;
  /// World -> model map applied to positions (and velocities) before
  /// featurization. Identity when the data is already in model units.
  NormalizerTransform normalizer;
};

/// Running sums of real (non-synthetic) training labels in world units.
struct LabelStats {
  std::int64_t count = 0;
  Vec3 sum = Vec3::Zero();
  Vec3 sum_sq = Vec3::Zero();

  Vec3 mean() const;
  /// Population variance per axis.
  Vec3 variance() const;
  void add(const Points& velocities);
};

/// Queryable 3D velocity map: one weight posterior per velocity axis over a
/// shared basis. Instances are snapshots: update_field returns a new one.
class VelocityField {
 public:
  VelocityField(FeatureBasis basis, std::array<GaussianState, 3> components, NoiseModel noise,
                NormalizerTransform normalizer, double synthetic_beta, double sparsify_below, LabelStats labels);

  const FeatureBasis& basis() const { return basis_; }
  const GaussianState& component(int axis) const { return components_[static_cast<std::size_t>(axis)]; }
  const NoiseModel& noise() const { return noise_; }
  const NormalizerTransform& normalizer() const { return normalizer_; }
  double synthetic_beta() const { return synthetic_beta_; }
  double sparsify_below() const { return sparsify_below_; }
  const LabelStats& label_stats() const { return labels_; }
  std::int64_t observations() const { return observations_; }

  /// Adds a batch in world units and re-materializes the three posteriors.
  void absorb(const Dataset& batch);

 private:
  friend VelocityField load_field(const std::filesystem::path& path);

  void materialize();

  FeatureBasis basis_;
  std::array<GaussianState, 3> components_;
  NoiseModel noise_;
  NormalizerTransform normalizer_;
  double synthetic_beta_;
  double sparsify_below_;
  LabelStats labels_;
  std::int64_t observations_ = 0;
};

VelocityField train_field(const Dataset& data, const FieldConfig& config);

/// Sequential update: the previous posterior acts as the prior. The result
/// matches retraining on all data seen so far.
VelocityField update_field(const VelocityField& field, const Dataset& batch);

struct VelocityEstimate {
  Vec3 position;
  Vec3 mean;
  Vec3 variance;
  double sigma_max = 0.0;
};

struct QueryStats {
  /// Queries whose model coordinates fall outside the grid bounds.
  Index outside_grid = 0;
};

/// Predictive mean and variance per velocity axis at world positions.
/// Deterministic; each row is independent of the rest of the batch.
std::vector<VelocityEstimate> query_field(const VelocityField& field, const Points& world_positions,
                                          QueryStats* stats = nullptr);

/// Appends `count` zero-velocity low-discrepancy samples inside `bounds`
/// (world units), tagged synthetic, after discarding every sample closer
/// than `removal_radius` to a real data point.
Dataset qmc_augment(const Dataset& data, const std::array<AxisRange, 3>& bounds, std::size_t count,
                    double removal_radius, QmcSequence sequence = QmcSequence::sobol);

/// Keeps estimates with sigma_max <= sigma_threshold, order preserved.
std::vector<VelocityEstimate> filter_by_confidence(const std::vector<VelocityEstimate>& estimates,
                                                   double sigma_threshold);

inline constexpr std::uint32_t kFieldFormatVersion = 1;

/// Binary container; see docs/field_format.md. `config_echo` is stored
/// verbatim for provenance.
void save_field(const VelocityField& field, const std::filesystem::path& path, const std::string& config_echo = {});
VelocityField load_field(const std::filesystem::path& path);
/// Provenance text stored by save_field.
std::string load_field_config_echo(const std::filesystem::path& path);

/// Header `x,y,z,mean_vx,mean_vy,mean_vz,var_vx,var_vy,var_vz,sigma_max`,
/// shortest round-trip number formatting, optional leading `#` comments.
void write_estimates_csv(std::ostream& out, const std::vector<VelocityEstimate>& estimates,
                         const std::vector<std::string>& comments = {});
std::vector<VelocityEstimate> parse_estimates_csv(std::istream& in, const std::string& source_name);

}  // namespace bdf
