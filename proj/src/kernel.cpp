#include "bdf/kernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <omp.h>

#include "bdf/error.hpp"

namespace bdf {

namespace {

// Relative slack when deciding whether hi - lo is a whole number of steps.
constexpr double kLatticeSlack = 1e-9;

bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

void KernelSpec::validate() const {
  for (int d = 0; d < 3; ++d) {
    if (!std::isfinite(gammas[d]) || gammas[d] <= 0.0) {
      throw InvalidArgument("kernel gamma[" + std::to_string(d) + "] must be finite and positive, got " +
                            std::to_string(gammas[d]));
    }
  }
}

double AxisGrid::coordinate(std::size_t i) const {
  if (i + 1 == count && count > 1) {
    const double last = lo + static_cast<double>(i) * spacing;
    if (std::abs(last - hi) <= kLatticeSlack * spacing) return hi;
    return last;
  }
  return lo + static_cast<double>(i) * spacing;
}

FeatureBasis::FeatureBasis(GridMeta grid, KernelSpec kernel)
    : grid_(grid), kernel_(kernel), fixed_points_(static_cast<Index>(grid.size()), 3) {
  kernel_.validate();
  const auto& ax = grid_.axes;
  for (std::size_t ix = 0; ix < ax[0].count; ++ix) {
    for (std::size_t iy = 0; iy < ax[1].count; ++iy) {
      for (std::size_t iz = 0; iz < ax[2].count; ++iz) {
        const auto m = static_cast<Index>(grid_.flat_index(ix, iy, iz));
        fixed_points_(m, 0) = ax[0].coordinate(ix);
        fixed_points_(m, 1) = ax[1].coordinate(iy);
        fixed_points_(m, 2) = ax[2].coordinate(iz);
      }
    }
  }
}

double se_kernel(const Vec3& a, const Vec3& b, const KernelSpec& spec) {
  if (!all_finite(a) || !all_finite(b)) {
    throw InvalidArgument("se_kernel: non-finite coordinate");
  }
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  // (a-b)^2 == (b-a)^2 exactly, so a fixed x,y,z order makes this symmetric.
  double acc = spec.gammas[0] * (dx * dx);
  acc += spec.gammas[1] * (dy * dy);
  acc += spec.gammas[2] * (dz * dz);
  return std::exp(-acc);
}

FeatureBasis build_grid(const std::array<AxisRange, 3>& bounds, const Vec3& spacing,
                        const KernelSpec& spec, std::size_t max_points) {
  spec.validate();
  GridMeta meta;
  double total = 1.0;
  for (int d = 0; d < 3; ++d) {
    const auto [lo, hi] = bounds[d];
    const double h = spacing[d];
    if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) {
      throw InvalidArgument("grid bounds on axis " + std::to_string(d) + " must satisfy lo <= hi");
    }
    if (!std::isfinite(h) || h <= 0.0) {
      throw InvalidArgument("grid spacing on axis " + std::to_string(d) + " must be positive");
    }
    const double ratio = (hi - lo) / h;
    const double steps = std::floor(ratio + kLatticeSlack * std::max(1.0, ratio));
    total *= steps + 1.0;
    if (total > static_cast<double>(max_points)) {
      throw CapacityError("grid would exceed the configured maximum of " + std::to_string(max_points) +
                          " fixed points");
    }
    meta.axes[d] = AxisGrid{lo, hi, h, static_cast<std::size_t>(steps) + 1};
  }
  return FeatureBasis(meta, spec);
}

namespace {

void check_points(const Points& points) {
  if (points.rows() == 0) throw InvalidArgument("featurize: empty point set");
  if (!points.allFinite()) throw InvalidArgument("featurize: non-finite coordinate");
}

}  // namespace

FeatureMatrix featurize(const Points& points, const FeatureBasis& basis, const FeaturizeOptions& options) {
  check_points(points);
  const GridMeta& grid = basis.grid();
  const Vec3& gammas = basis.kernel().gammas;
  const auto nx = grid.axes[0].count, ny = grid.axes[1].count, nz = grid.axes[2].count;
  const Index n = points.rows();
  const double tau = options.sparsify_below;

  std::vector<std::vector<double>> axis_coords(3);
  for (int d = 0; d < 3; ++d) {
    axis_coords[d].resize(grid.axes[d].count);
    for (std::size_t i = 0; i < grid.axes[d].count; ++i) axis_coords[d][i] = grid.axes[d].coordinate(i);
  }

  FeatureMatrix phi(n, basis.size());
#pragma omp parallel
  {
    std::vector<double> ex(nx), ey(ny), ez(nz);
#pragma omp for schedule(static)
    for (Index r = 0; r < n; ++r) {
      for (std::size_t i = 0; i < nx; ++i) {
        const double d = points(r, 0) - axis_coords[0][i];
        ex[i] = std::exp(-(gammas[0] * (d * d)));
      }
      for (std::size_t i = 0; i < ny; ++i) {
        const double d = points(r, 1) - axis_coords[1][i];
        ey[i] = std::exp(-(gammas[1] * (d * d)));
      }
      for (std::size_t i = 0; i < nz; ++i) {
        const double d = points(r, 2) - axis_coords[2][i];
        ez[i] = std::exp(-(gammas[2] * (d * d)));
      }
      double* row = phi.row(r).data();
      for (std::size_t ix = 0; ix < nx; ++ix) {
        for (std::size_t iy = 0; iy < ny; ++iy) {
          const double exy = ex[ix] * ey[iy];
          double* out = row + (ix * ny + iy) * nz;
          // Every factor is <= 1, so the whole z run is below tau as well.
          if (exy < tau) {
            std::fill(out, out + nz, 0.0);
            continue;
          }
          for (std::size_t iz = 0; iz < nz; ++iz) {
            const double v = exy * ez[iz];
            out[iz] = v < tau ? 0.0 : v;
          }
        }
      }
    }
  }
  return phi;
}

void SparseFeatures::scale_row(Index r, double s) {
  for (Index a = offsets[static_cast<std::size_t>(r)]; a < offsets[static_cast<std::size_t>(r) + 1]; ++a) {
    values[static_cast<std::size_t>(a)] *= s;
  }
}

SparseFeatures featurize_sparse(const Points& points, const FeatureBasis& basis, double threshold) {
  check_points(points);
  if (!(threshold > 0.0) || !std::isfinite(threshold)) {
    throw InvalidArgument("featurize_sparse: threshold must be positive");
  }
  const GridMeta& grid = basis.grid();
  const Vec3& gammas = basis.kernel().gammas;
  const std::array<std::size_t, 3> counts{grid.axes[0].count, grid.axes[1].count, grid.axes[2].count};
  const Index n = points.rows();

  // Contiguous row ranges per thread, concatenated in thread order.
  std::vector<SparseFeatures> parts;
#pragma omp parallel
  {
#pragma omp single
    parts.resize(static_cast<std::size_t>(omp_get_num_threads()));
    const auto tid = static_cast<std::size_t>(omp_get_thread_num());
    const Index per = (n + static_cast<Index>(parts.size()) - 1) / static_cast<Index>(parts.size());
    const Index begin = std::min(n, static_cast<Index>(tid) * per);
    const Index end = std::min(n, begin + per);
    SparseFeatures& local = parts[tid];
    std::array<std::vector<double>, 3> e;
    for (int d = 0; d < 3; ++d) e[d].resize(counts[d]);
    for (Index r = begin; r < end; ++r) {
      for (int d = 0; d < 3; ++d) {
        for (std::size_t i = 0; i < counts[d]; ++i) {
          const double diff = points(r, d) - grid.axes[d].coordinate(i);
          e[d][i] = std::exp(-(gammas[d] * (diff * diff)));
        }
      }
      for (std::size_t ix = 0; ix < counts[0]; ++ix) {
        if (e[0][ix] < threshold) continue;
        for (std::size_t iy = 0; iy < counts[1]; ++iy) {
          const double exy = e[0][ix] * e[1][iy];
          if (exy < threshold) continue;
          const std::size_t base = (ix * counts[1] + iy) * counts[2];
          for (std::size_t iz = 0; iz < counts[2]; ++iz) {
            const double v = exy * e[2][iz];
            if (v < threshold) continue;
            local.indices.push_back(static_cast<int>(base + iz));
            local.values.push_back(v);
          }
        }
      }
      local.offsets.push_back(static_cast<Index>(local.indices.size()));
    }
  }

  SparseFeatures out;
  out.cols = basis.size();
  for (const auto& part : parts) {
    const Index shift = static_cast<Index>(out.indices.size());
    for (std::size_t r = 1; r < part.offsets.size(); ++r) out.offsets.push_back(part.offsets[r] + shift);
    out.indices.insert(out.indices.end(), part.indices.begin(), part.indices.end());
    out.values.insert(out.values.end(), part.values.begin(), part.values.end());
  }
  return out;
}

namespace reference {

FeatureMatrix featurize(const Points& points, const FeatureBasis& basis, const FeaturizeOptions& options) {
  check_points(points);
  const Points& fixed = basis.fixed_points();
  FeatureMatrix phi(points.rows(), basis.size());
  for (Index r = 0; r < points.rows(); ++r) {
    const Vec3 p = points.row(r).transpose();
    for (Index m = 0; m < fixed.rows(); ++m) {
      const double v = se_kernel(p, fixed.row(m).transpose(), basis.kernel());
      phi(r, m) = v < options.sparsify_below ? 0.0 : v;
    }
  }
  return phi;
}

}  // namespace reference

}  // namespace bdf
