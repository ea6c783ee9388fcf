#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bdf/types.hpp"

namespace bdf {

enum class SourceTag : std::uint8_t { real, qmc_synthetic };

/// Velocity observations: positions and velocity labels (N x 3 each),
/// optional timestamps, and a provenance tag per point.
struct Dataset {
  Points positions;
  Points velocities;
  std::optional<VectorXd> timestamps;
  std::vector<SourceTag> tags;

  Dataset() : positions(0, 3), velocities(0, 3) {}
  /// All points tagged real.
  Dataset(Points positions, Points velocities, std::optional<VectorXd> timestamps = std::nullopt);

  Index size() const { return positions.rows(); }
  bool empty() const { return positions.rows() == 0; }
  Index synthetic_count() const;

  /// Throws DataError on unequal lengths or non-finite values.
  void validate() const;

  Dataset subset(const std::vector<Index>& rows) const;
  /// Appends rows; timestamps are kept only when both sides carry them.
  void append(const Dataset& other);
};

/// Affine map between world coordinates and the model cube [-1, 1]^3:
/// model = (world - offset) * scale, per axis. Velocities follow the same
/// form with their own offset/scale (identity unless standardized).
struct NormalizerTransform {
  Vec3 offset = Vec3::Zero();
  Vec3 scale = Vec3::Ones();
  Vec3 velocity_offset = Vec3::Zero();
  Vec3 velocity_scale = Vec3::Ones();

  void validate() const;
  bool is_identity() const;

  Points positions_to_model(const Points& world) const;
  Points positions_to_world(const Points& model) const;
  Points velocities_to_model(const Points& world) const;
  Points velocities_to_world(const Points& model) const;
};

struct ChunksOptions {
  std::array<double, 3> slab_labels{-2.0, 0.0, 2.0};
  double noise_sigma = 0.1;
};

/// Noise-free x-velocity of the slab containing x: x < -1/3, [-1/3, 1/3), >= 1/3.
double chunks_slab_label(double x, const ChunksOptions& options = {});

/// Three adjacent velocity slabs along x in [-1, 1]^3. Point i falls in slab
/// i % 3 (uniform inside it), so the slabs are equally populated.
/// vx is the slab label plus Gaussian noise; vy and vz are pure noise.
Dataset generate_chunks(std::size_t n_points, std::uint64_t seed, const ChunksOptions& options = {});

struct BlobsOptions {
  std::array<Vec3, 3> centers{Vec3(-0.6, -0.6, -0.6), Vec3(0.0, 0.0, 0.0), Vec3(0.6, 0.6, 0.6)};
  double spread = 0.15;
  std::array<Vec3, 3> velocities{Vec3(-1.5, 0.5, 0.0), Vec3(1.0, -1.0, 0.5), Vec3(0.0, 1.5, -1.0)};
  double noise_sigma = 0.1;
};

/// Three isotropic Gaussian clusters (truncated to [-1, 1]^3), points
/// assigned round-robin, each cluster with a constant velocity plus noise.
Dataset generate_blobs(std::size_t n_points, std::uint64_t seed, const BlobsOptions& options = {});

struct AirwaysOptions {
  Vec3 box{1000.0, 400.0, 60.0};
  std::size_t trajectories = 60;
  double min_speed = 5.0;
  double max_speed = 15.0;
  double noise_sigma = 0.2;
};

/// Drone-corridor-like tracks in a world box [0, box]: each trajectory flies
/// start -> waypoint -> end at constant speed and is sampled at uniform
/// random times. Positions in meters, velocities in m/s with Gaussian noise.
Dataset generate_airways(std::size_t n_points, std::uint64_t seed, const AirwaysOptions& options = {});

/// CSV with header `x,y,z,vx,vy,vz[,t]`; `#` lines are comments.
Dataset load_trajectories(const std::filesystem::path& path);
Dataset parse_trajectories_csv(std::istream& in, const std::string& source_name);
/// Writes the same schema. Numbers use the shortest round-trip form.
void write_dataset_csv(std::ostream& out, const Dataset& data, const std::vector<std::string>& comments = {});

std::string format_double(double v);

struct Trajectory {
  std::string id;
  Points positions;
  VectorXd times;
};

/// Finite-difference velocities (p[n+1] - p[n]) / (t[n+1] - t[n]) placed at
/// the segment midpoint (position and time). The last fix of each
/// trajectory has no successor and is dropped.
Dataset derive_velocities(const std::vector<Trajectory>& trajectories);

/// Maps the data bounding box onto [-1, 1]^3 per axis. A zero-extent axis
/// maps to 0 with unit scale. Optionally standardizes velocities per axis.
std::pair<Dataset, NormalizerTransform> normalize(const Dataset& data, bool standardize_velocity = false);

/// Uniform random split without replacement; round(test_fraction * N) test
/// rows. Both parts keep the original row order.
std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed);

}  // namespace bdf
