#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bdf/field.hpp"

namespace bdf {

/// Everything a CLI run depends on. Populated from a `key = value` file and
/// `--set key=value` overrides; unknown keys are rejected.
///
/// Keys: gamma, bounds, spacing, alpha, beta, synthetic_beta, sparsify_below,
/// max_basis, seed, dataset, n, data, test_fraction, normalize,
/// standardize_velocity, qmc_count, qmc_radius, qmc_sequence,
/// sigma_threshold, gp_cap, bench_test_n, threads.
struct RunConfig {
  Vec3 gamma = Vec3::Constant(10.0);
  std::array<AxisRange, 3> bounds{AxisRange{-1.0, 1.0}, AxisRange{-1.0, 1.0}, AxisRange{-1.0, 1.0}};
  Vec3 spacing = Vec3::Constant(0.2);
  double alpha = 1e-2;
  double beta = 1e2;
  double synthetic_beta = 0.0;
  double sparsify_below = 0.0;
  std::size_t max_basis = kDefaultMaxBasis;
  std::uint64_t seed = 0;
  std::string dataset = "blobs";
  std::size_t n = 5000;
  std::string data;
  double test_fraction = 0.2;
  bool normalize = true;
  bool standardize_velocity = false;
  std::size_t qmc_count = 0;
  double qmc_radius = 0.0;  ///< 0 means half the x grid spacing
  QmcSequence qmc_sequence = QmcSequence::sobol;
  double sigma_threshold = 30.0;
  std::size_t gp_cap = 3000;
  std::size_t bench_test_n = 1000;
  int threads = 0;  ///< 0 keeps the OpenMP default

  void set(std::string_view key, std::string_view value);
  /// Reads `key = value` lines; blank lines and `#` comments are skipped.
  void load_file(const std::filesystem::path& path);
  void validate() const;

  FieldConfig field_config() const;
  double effective_qmc_radius() const { return qmc_radius > 0.0 ? qmc_radius : spacing[0] / 2.0; }

  /// Canonical `key=value` lines in fixed key order.
  std::vector<std::string> echo() const;
};

/// `lo:step:hi` on one axis, or three such specs separated by commas.
/// Lattice points follow the basis-grid rule (hi included when reached).
Points parse_grid_spec(std::string_view spec);

}  // namespace bdf
