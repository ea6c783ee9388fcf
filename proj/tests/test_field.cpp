#include <doctest.h>

#include <cmath>
#include <limits>

#include "bdf/error.hpp"
#include "bdf/eval.hpp"
#include "bdf/field.hpp"

using namespace bdf;

namespace {

const std::array<AxisRange, 3> kCube{AxisRange{-1, 1}, AxisRange{-1, 1}, AxisRange{-1, 1}};

FieldConfig config(double gamma, double spacing = 0.2) {
  FieldConfig c;
  c.kernel = KernelSpec::isotropic(gamma);
  c.spacing = Vec3::Constant(spacing);
  return c;
}

Points means_of(const std::vector<VelocityEstimate>& est) {
  Points m(static_cast<Index>(est.size()), 3);
  for (std::size_t i = 0; i < est.size(); ++i) m.row(static_cast<Index>(i)) = est[i].mean.transpose();
  return m;
}

Points grid_points(double lo, double hi, int n) {
  Points p(static_cast<Index>(n) * n * n, 3);
  Index r = 0;
  const double step = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) p.row(r++) = Eigen::RowVector3d(lo + i * step, lo + j * step, lo + k * step);
  return p;
}

Dataset rows(const Dataset& d, Index begin, Index end) {
  std::vector<Index> idx;
  for (Index r = begin; r < end; ++r) idx.push_back(r);
  return d.subset(idx);
}

double nearest(const Vec3& q, const Points& pts) {
  return std::sqrt((pts.rowwise() - q.transpose()).rowwise().squaredNorm().minCoeff());
}

}  // namespace

TEST_CASE("all-zero labels give zero means") {
  Dataset d = generate_blobs(600, 1);
  d.velocities.setZero();
  const VelocityField f = train_field(d, config(10));
  for (const auto& e : query_field(f, grid_points(-1, 1, 7))) CHECK(e.mean.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("blobs field beats the training-mean baseline") {
  const auto [train, test] = split(generate_blobs(3000, 2), 0.2, 2);
  const VelocityField f = train_field(train, config(10));
  const double model = rmse(means_of(query_field(f, test.positions)), test.velocities);
  const Eigen::RowVector3d mean = train.velocities.colwise().mean();
  const MatrixXd trivial = mean.replicate(test.size(), 1);
  CHECK(model < rmse(trivial, test.velocities));
}

TEST_CASE("chunks: ARD kernel beats the wide isotropic kernel") {
  const auto [train, test] = split(generate_chunks(3000, 5), 0.2, 5);
  FieldConfig ard = config(1);
  ard.kernel = KernelSpec::ard(100, 0.1, 0.1);
  const double r_ard = rmse(means_of(query_field(train_field(train, ard), test.positions)), test.velocities);
  const double r_wide =
      rmse(means_of(query_field(train_field(train, config(0.1)), test.positions)), test.velocities);
  CHECK(r_ard < r_wide);
}

TEST_CASE("update_field") {
  const Dataset d = generate_blobs(1200, 3);
  const VelocityField full = train_field(d, config(10));
  const Points probes = grid_points(-1, 1, 9);

  SUBCASE("empty batch leaves the field unchanged") {
    const VelocityField same = update_field(full, Dataset());
    CHECK(means_of(query_field(same, probes)) == means_of(query_field(full, probes)));
    CHECK(same.observations() == full.observations());
  }
  SUBCASE("two halves equal one batch") {
    const VelocityField halves = update_field(train_field(rows(d, 0, 600), config(10)), rows(d, 600, 1200));
    const double diff = (means_of(query_field(halves, probes)) - means_of(query_field(full, probes))).cwiseAbs().maxCoeff();
    CHECK(diff < 1e-6);
    CHECK(halves.observations() == 1200);
  }
}

TEST_CASE("streaming airways data contracts the variance at a fixed probe") {
  const Dataset raw = generate_airways(3000, 4);
  FieldConfig c = config(10);
  c.normalizer = normalize(raw).second;
  Points probe(1, 3);
  probe << 500, 200, 30;
  VelocityField f = train_field(rows(raw, 0, 300), c);
  double prev = query_field(f, probe)[0].variance.maxCoeff();
  for (Index chunk = 1; chunk < 10; ++chunk) {
    f = update_field(f, rows(raw, chunk * 300, (chunk + 1) * 300));
    const double cur = query_field(f, probe)[0].variance.maxCoeff();
    CHECK(cur <= prev * (1 + 1e-12));
    prev = cur;
  }
}

TEST_CASE("query behaviour around the data") {
  BlobsOptions opts;
  opts.noise_sigma = 0.0;
  const Dataset d = generate_blobs(1500, 6, opts);
  const VelocityField f = train_field(d, config(10));

  SUBCASE("training points are reproduced within two sigma") {
    const auto est = query_field(f, rows(d, 0, 30).positions);
    for (Index r = 0; r < 30; ++r) {
      const auto& e = est[static_cast<std::size_t>(r)];
      for (int k = 0; k < 3; ++k) CHECK(std::abs(e.mean[k] - d.velocities(r, k)) <= 2 * std::sqrt(e.variance[k]));
    }
  }
  SUBCASE("far from the data the variance is larger than at a cluster centre") {
    Points q(2, 3);
    q << 0.0, 0.0, 0.0, 0.9, -0.9, 0.9;
    QueryStats stats;
    const auto est = query_field(f, q, &stats);
    CHECK(est[1].variance.minCoeff() > est[0].variance.maxCoeff());
    CHECK(stats.outside_grid == 0);
  }
  SUBCASE("beyond the basis every feature vanishes and only the noise floor remains") {
    Points outside(1, 3);
    outside << 3, 3, 3;
    QueryStats stats;
    const auto far = query_field(f, outside, &stats);
    CHECK(stats.outside_grid == 1);
    CHECK(far[0].mean.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(far[0].variance.maxCoeff() == doctest::Approx(1.0 / f.noise().beta).epsilon(1e-9));
  }
  SUBCASE("non-finite query") {
    Points bad(1, 3);
    bad << 0, std::numeric_limits<double>::infinity(), 0;
    CHECK_THROWS_AS(query_field(f, bad), InvalidArgument);
  }
}

TEST_CASE("velocity axes are modelled independently") {
  const Dataset d = generate_blobs(900, 7);
  Dataset permuted = d;
  permuted.velocities.col(0) = d.velocities.col(2);
  permuted.velocities.col(1) = d.velocities.col(0);
  permuted.velocities.col(2) = d.velocities.col(1);
  const Points probes = grid_points(-1, 1, 5);
  const Points a = means_of(query_field(train_field(d, config(10)), probes));
  const Points b = means_of(query_field(train_field(permuted, config(10)), probes));
  CHECK(b.col(0) == a.col(2));
  CHECK(b.col(1) == a.col(0));
  CHECK(b.col(2) == a.col(1));
}

TEST_CASE("un-normalization matches training on pre-normalized data") {
  Dataset d = generate_blobs(900, 8);
  d.positions *= 0.8;  // strictly inside the cube, so the fitted map is not the identity
  const auto [model, tf] = normalize(d);
  REQUIRE(!tf.is_identity());

  FieldConfig world_cfg = config(10);
  world_cfg.normalizer = tf;
  const VelocityField world_field = train_field(d, world_cfg);
  const VelocityField model_field = train_field(model, config(10));

  const Points probes = grid_points(-0.7, 0.7, 6);
  const auto via_world = query_field(world_field, probes);
  const auto via_model = query_field(model_field, tf.positions_to_model(probes));
  for (std::size_t i = 0; i < via_world.size(); ++i) {
    CHECK((via_world[i].mean - via_model[i].mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((via_world[i].variance - via_model[i].variance).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("a sub-grid field matches the full field where the data lives") {
  Dataset d = generate_chunks(800, 9);
  // Squeeze x into [-1, -0.6]; features on basis points with x >= 0 are below 1e-12 at gamma 100.
  d.positions.col(0) = -0.8 + 0.2 * d.positions.col(0).array();
  FieldConfig full = config(100);
  FieldConfig sub = full;
  sub.bounds = {AxisRange{-1, 0}, AxisRange{-1, 1}, AxisRange{-1, 1}};
  const VelocityField f_full = train_field(d, full);
  const VelocityField f_sub = train_field(d, sub);
  CHECK(f_sub.basis().size() < f_full.basis().size());

  Points probes(200, 3);
  for (Index r = 0; r < 200; ++r) probes.row(r) = d.positions.row(r * 4);
  const double diff =
      (means_of(query_field(f_full, probes)) - means_of(query_field(f_sub, probes))).cwiseAbs().maxCoeff();
  CHECK(diff < 1e-6);
}

TEST_CASE("qmc_augment") {
  const Dataset d = generate_blobs(500, 10);

  SUBCASE("count zero keeps the data") {
    const Dataset a = qmc_augment(d, kCube, 0, 0.1);
    CHECK(a.size() == d.size());
    CHECK(a.positions == d.positions);
  }
  SUBCASE("a radius larger than the box diagonal removes every sample") {
    CHECK(qmc_augment(d, kCube, 1000, 4.0).synthetic_count() == 0);
  }
  SUBCASE("survivors respect the radius and carry zero velocity") {
    const Dataset a = qmc_augment(d, kCube, 2048, 0.15, QmcSequence::halton);
    REQUIRE(a.synthetic_count() > 0);
    for (Index r = d.size(); r < a.size(); ++r) {
      CHECK(nearest(a.positions.row(r).transpose(), d.positions) >= 0.15);
      CHECK(a.velocities.row(r).isZero());
      CHECK(a.tags[static_cast<std::size_t>(r)] == SourceTag::qmc_synthetic);
    }
  }
  SUBCASE("invalid radius") {
    CHECK_THROWS_AS(qmc_augment(d, kCube, 10, 0.0), InvalidArgument);
    CHECK_THROWS_AS(qmc_augment(d, kCube, 10, -1.0), InvalidArgument);
  }
}

TEST_CASE("synthetic points are excluded from label statistics") {
  const Dataset d = generate_blobs(300, 11);
  const Dataset a = qmc_augment(d, kCube, 500, 0.1);
  const VelocityField f = train_field(a, config(10));
  CHECK(f.label_stats().count == 300);
  CHECK(f.observations() == a.size());
}

TEST_CASE("filter_by_confidence") {
  const Dataset d = generate_blobs(1500, 12);
  const VelocityField f = train_field(d, config(10));
  const Points grid = grid_points(-1, 1, 11);
  const auto est = query_field(f, grid);

  CHECK(filter_by_confidence(est, std::numeric_limits<double>::infinity()).size() == est.size());
  CHECK(filter_by_confidence(est, 0.999 / std::sqrt(f.noise().beta)).empty());

  // Data-region sigma is near the noise floor, empty-region sigma near the prior level.
  const double threshold = 1.0;
  double kept_dist = 0.0, rejected_dist = 0.0;
  std::size_t kept = 0, rejected = 0;
  for (const auto& e : est) {
    const double dist = nearest(e.position, d.positions);
    if (e.sigma_max <= threshold) {
      kept_dist += dist;
      ++kept;
    } else {
      rejected_dist += dist;
      ++rejected;
    }
  }
  REQUIRE(kept > 0);
  REQUIRE(rejected > 0);
  CHECK(kept_dist / kept < rejected_dist / rejected);
  CHECK(filter_by_confidence(est, threshold).size() == kept);
}

TEST_CASE("training errors") {
  CHECK_THROWS_AS(train_field(Dataset(), config(10)), DataError);
  FieldConfig tiny = config(10, 0.01);
  CHECK_THROWS_AS(train_field(generate_blobs(10, 1), tiny), CapacityError);
}
