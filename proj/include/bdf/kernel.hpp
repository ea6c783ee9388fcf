#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "bdf/types.hpp"

namespace bdf {

/// Per-axis inverse bandwidths of the squared-exponential kernel
/// k(a, b) = exp(-sum_d gamma_d (a_d - b_d)^2). Equal gammas give the
/// isotropic kernel.
struct KernelSpec {
  Vec3 gammas{1.0, 1.0, 1.0};

  static KernelSpec isotropic(double gamma) { return {Vec3::Constant(gamma)}; }
  static KernelSpec ard(double gx, double gy, double gz) { return {Vec3(gx, gy, gz)}; }

  /// Throws InvalidArgument unless every gamma is finite and > 0.
  void validate() const;
  bool is_isotropic() const { return gammas[0] == gammas[1] && gammas[1] == gammas[2]; }
};

struct AxisRange {
  double lo = -1.0;
  double hi = 1.0;
};

/// Lattice along one axis: lo, lo + spacing, ..., up to the largest value <= hi.
struct AxisGrid {
  double lo = 0.0;
  double hi = 0.0;
  double spacing = 1.0;
  std::size_t count = 1;

  double coordinate(std::size_t i) const;
};

struct GridMeta {
  std::array<AxisGrid, 3> axes;

  std::size_t size() const { return axes[0].count * axes[1].count * axes[2].count; }
  /// Flat index of lattice cell (ix, iy, iz); z varies fastest.
  std::size_t flat_index(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return (ix * axes[1].count + iy) * axes[2].count + iz;
  }
};

inline constexpr std::size_t kDefaultMaxBasis = 1'000'000;

/// The M fixed points on a regular 3D grid plus the kernel that turns any
/// point into an M-vector of similarities.
class FeatureBasis {
 public:
  FeatureBasis(GridMeta grid, KernelSpec kernel);

  const GridMeta& grid() const { return grid_; }
  const KernelSpec& kernel() const { return kernel_; }
  const Points& fixed_points() const { return fixed_points_; }
  Index size() const { return fixed_points_.rows(); }

 private:
  GridMeta grid_;
  KernelSpec kernel_;
  Points fixed_points_;
};

/// Squared-exponential similarity, accumulated in x, y, z order so that
/// se_kernel(a, b) == se_kernel(b, a) bit for bit.
double se_kernel(const Vec3& a, const Vec3& b, const KernelSpec& spec);

/// Builds the axis-aligned lattice. A zero-extent axis (lo == hi) yields a
/// single layer. Throws CapacityError when the lattice exceeds `max_points`.
FeatureBasis build_grid(const std::array<AxisRange, 3>& bounds, const Vec3& spacing,
                        const KernelSpec& spec, std::size_t max_points = kDefaultMaxBasis);

struct FeaturizeOptions {
  /// Entries strictly below this value are stored as exact zeros. 0 keeps
  /// every entry.
  double sparsify_below = 0.0;
};

/// Dense N x M feature matrix. Uses the tensor-product structure of the grid
/// (three short exp tables per point) and is row-partitioned across OpenMP
/// threads; the result does not depend on the thread count.
FeatureMatrix featurize(const Points& points, const FeatureBasis& basis,
                        const FeaturizeOptions& options = {});

/// Compressed-row featurization: only entries >= threshold are kept, in
/// ascending column order per row. Holds exactly the nonzeros of
/// featurize(points, basis, {threshold}).
struct SparseFeatures {
  Index cols = 0;
  std::vector<Index> offsets{0};  ///< rows() + 1 entries
  std::vector<int> indices;
  std::vector<double> values;

  Index rows() const { return static_cast<Index>(offsets.size()) - 1; }
  /// Multiplies every stored entry of row r by s.
  void scale_row(Index r, double s);
};

/// Requires threshold > 0. Row-partitioned across OpenMP threads; the
/// result does not depend on the thread count.
SparseFeatures featurize_sparse(const Points& points, const FeatureBasis& basis, double threshold);

namespace reference {

/// Serial entry-by-entry evaluation through se_kernel. Kept as the
/// correctness baseline for the parallel kernel.
FeatureMatrix featurize(const Points& points, const FeatureBasis& basis,
                        const FeaturizeOptions& options = {});

}  // namespace reference

}  // namespace bdf
