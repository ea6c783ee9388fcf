#include "bdf/field.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "bdf/error.hpp"
#include "bdf/gram.hpp"

namespace bdf {

namespace {

// Rows featurized at once; bounds the dense block at kBlockRows x M doubles.
constexpr Index kBlockRows = 4096;

std::array<GaussianState, 3> make_priors(Index m, double alpha) {
  GaussianState prior = make_prior(m, alpha);
  return {prior, prior, prior};
}

Points block_rows(const Points& p, Index begin, Index end) { return p.middleRows(begin, end - begin); }

}  // namespace

Vec3 LabelStats::mean() const {
  if (count == 0) return Vec3::Zero();
  return sum / static_cast<double>(count);
}

Vec3 LabelStats::variance() const {
  if (count == 0) return Vec3::Zero();
  const Vec3 m = mean();
  return (sum_sq / static_cast<double>(count) - m.cwiseProduct(m)).cwiseMax(0.0);
}

void LabelStats::add(const Points& velocities) {
  count += velocities.rows();
  sum += velocities.colwise().sum().transpose();
  sum_sq += velocities.array().square().matrix().colwise().sum().transpose();
}

VelocityField::VelocityField(FeatureBasis basis, std::array<GaussianState, 3> components, NoiseModel noise,
                             NormalizerTransform normalizer, double synthetic_beta, double sparsify_below,
                             LabelStats labels)
    : basis_(std::move(basis)),
      components_(std::move(components)),
      noise_(noise),
      normalizer_(normalizer),
      synthetic_beta_(synthetic_beta),
      sparsify_below_(sparsify_below),
      labels_(labels) {
  noise_.validate();
  normalizer_.validate();
  for (const auto& c : components_) {
    if (c.dim() != basis_.size()) throw InvalidArgument("velocity field: component dimension does not match basis");
  }
  if (!(sparsify_below_ >= 0.0 && sparsify_below_ < 1.0)) {
    throw InvalidArgument("sparsify threshold must lie in [0, 1)");
  }
}

void VelocityField::materialize() {
  components_[0].materialize();
  const auto factor = components_[0].snapshot()->factor;
  for (std::size_t c = 1; c < 3; ++c) {
    if (components_[c].precision() == components_[0].precision()) {
      components_[c].materialize(factor);
    } else {
      components_[c].materialize();
    }
  }
}

void VelocityField::absorb(const Dataset& batch) {
  batch.validate();
  if (batch.empty()) return;
  const Points model_pos = normalizer_.positions_to_model(batch.positions);
  const Points model_vel = normalizer_.velocities_to_model(batch.velocities);
  const double beta = noise_.beta;
  const double syn_beta = synthetic_beta_ > 0.0 ? synthetic_beta_ : beta;
  const bool reweight = syn_beta != beta && batch.synthetic_count() > 0;
  const double syn_weight = std::sqrt(syn_beta / beta);

  const Index m = basis_.size();
  NormalStatsAccumulator acc(m, 3);
  const FeaturizeOptions opts{sparsify_below_};
  for (Index begin = 0; begin < batch.size(); begin += kBlockRows) {
    const Index end = std::min(batch.size(), begin + kBlockRows);
    MatrixXd labels = block_rows(model_vel, begin, end);
    const auto synthetic = [&](Index r) { return batch.tags[static_cast<std::size_t>(r)] == SourceTag::qmc_synthetic; };
    if (sparsify_below_ > 0.0) {
      SparseFeatures phi = featurize_sparse(block_rows(model_pos, begin, end), basis_, sparsify_below_);
      for (Index r = begin; reweight && r < end; ++r) {
        if (synthetic(r)) {
          phi.scale_row(r - begin, syn_weight);
          labels.row(r - begin) *= syn_weight;
        }
      }
      acc.add(phi, labels);
    } else {
      FeatureMatrix phi = featurize(block_rows(model_pos, begin, end), basis_, opts);
      for (Index r = begin; reweight && r < end; ++r) {
        if (synthetic(r)) {
          phi.row(r - begin) *= syn_weight;
          labels.row(r - begin) *= syn_weight;
        }
      }
      acc.add(phi, labels);
    }
  }
  const NormalStats stats = acc.finish();
  for (std::size_t c = 0; c < 3; ++c) {
    components_[c].add_evidence(stats.gram, stats.cross.col(static_cast<Index>(c)), beta);
  }

  std::vector<Index> real_rows;
  for (Index r = 0; r < batch.size(); ++r) {
    if (batch.tags[static_cast<std::size_t>(r)] == SourceTag::real) real_rows.push_back(r);
  }
  labels_.add(batch.subset(real_rows).velocities);
  observations_ += batch.size();
  materialize();
}

VelocityField train_field(const Dataset& data, const FieldConfig& config) {
  if (data.empty()) throw DataError("cannot train a velocity field on an empty dataset");
  config.noise.validate();
  FeatureBasis basis = build_grid(config.bounds, config.spacing, config.kernel, config.max_basis);
  const Index m = basis.size();
  VelocityField field(std::move(basis), make_priors(m, config.noise.alpha), config.noise, config.normalizer,
                      config.synthetic_beta, config.sparsify_below, LabelStats{});
  field.absorb(data);
  return field;
}

VelocityField update_field(const VelocityField& field, const Dataset& batch) {
  VelocityField next = field;
  next.absorb(batch);
  return next;
}

std::vector<VelocityEstimate> query_field(const VelocityField& field, const Points& world_positions,
                                          QueryStats* stats) {
  if (world_positions.rows() == 0) throw InvalidArgument("query_field: no query positions");
  if (!world_positions.allFinite()) throw InvalidArgument("query_field: non-finite query position");
  const auto& tf = field.normalizer();
  const Points model = tf.positions_to_model(world_positions);
  const Index q = model.rows();

  if (stats) {
    const auto& axes = field.basis().grid().axes;
    Index outside = 0;
    for (Index r = 0; r < q; ++r) {
      for (int d = 0; d < 3; ++d) {
        if (model(r, d) < axes[d].lo || model(r, d) > axes[d].hi) {
          ++outside;
          break;
        }
      }
    }
    stats->outside_grid += outside;
  }

  std::vector<VelocityEstimate> out(static_cast<std::size_t>(q));
  const FeaturizeOptions opts{field.sparsify_below()};
  const double beta = field.noise().beta;
  for (Index begin = 0; begin < q; begin += kBlockRows) {
    const Index end = std::min(q, begin + kBlockRows);
    const FeatureMatrix phi = featurize(block_rows(model, begin, end), field.basis(), opts);
    std::array<Prediction, 3> preds;
    preds[0] = predict(field.component(0), phi, beta);
    for (int c = 1; c < 3; ++c) {
      const auto& comp = field.component(c);
      // Equal precisions share one factor, so the variances are identical.
      if (comp.snapshot()->factor == field.component(0).snapshot()->factor) {
        preds[static_cast<std::size_t>(c)] = Prediction{predict_mean(comp, phi), preds[0].variances};
      } else {
        preds[static_cast<std::size_t>(c)] = predict(comp, phi, beta);
      }
    }
    for (Index r = begin; r < end; ++r) {
      auto& est = out[static_cast<std::size_t>(r)];
      est.position = world_positions.row(r).transpose();
      double max_var = 0.0;
      for (int d = 0; d < 3; ++d) {
        const auto& pd = preds[static_cast<std::size_t>(d)];
        const double vs = tf.velocity_scale[d];
        est.mean[d] = pd.means[r - begin] / vs + tf.velocity_offset[d];
        est.variance[d] = pd.variances[r - begin] / (vs * vs);
        max_var = std::max(max_var, est.variance[d]);
      }
      est.sigma_max = std::sqrt(max_var);
    }
  }
  return out;
}

namespace {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (std::int64_t v : {k.x, k.y, k.z}) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

/// Uniform hash grid with cell size r; a radius-r ball overlaps at most the
/// 27 cells around its centre cell.
class RadiusIndex {
 public:
  RadiusIndex(const Points& points, const std::vector<Index>& rows, double radius) : points_(points), r_(radius) {
    for (Index row : rows) cells_[key(points.row(row).transpose())].push_back(row);
  }

  bool any_within(const Vec3& p) const {
    const CellKey c = key(p);
    const double r2 = r_ * r_;
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == cells_.end()) continue;
          for (Index row : it->second) {
            if ((points_.row(row).transpose() - p).squaredNorm() < r2) return true;
          }
        }
      }
    }
    return false;
  }

 private:
  CellKey key(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p[0] / r_)), static_cast<std::int64_t>(std::floor(p[1] / r_)),
            static_cast<std::int64_t>(std::floor(p[2] / r_))};
  }

  const Points& points_;
  double r_;
  std::unordered_map<CellKey, std::vector<Index>, CellHash> cells_;
};

}  // namespace

Dataset qmc_augment(const Dataset& data, const std::array<AxisRange, 3>& bounds, std::size_t count,
                    double removal_radius, QmcSequence sequence) {
  if (!std::isfinite(removal_radius) || removal_radius <= 0.0) {
    throw InvalidArgument("qmc_augment: removal radius must be positive");
  }
  for (const auto& b : bounds) {
    if (!(b.lo <= b.hi)) throw InvalidArgument("qmc_augment: bounds must satisfy lo <= hi");
  }
  data.validate();
  if (count == 0) return data;

  const Points unit = qmc_unit_points(sequence, count);
  std::vector<Index> real_rows;
  for (Index r = 0; r < data.size(); ++r) {
    if (data.tags[static_cast<std::size_t>(r)] == SourceTag::real) real_rows.push_back(r);
  }
  const RadiusIndex index(data.positions, real_rows, removal_radius);

  std::vector<Vec3> survivors;
  for (Index i = 0; i < unit.rows(); ++i) {
    Vec3 p;
    for (int d = 0; d < 3; ++d) p[d] = bounds[d].lo + unit(i, d) * (bounds[d].hi - bounds[d].lo);
    if (!index.any_within(p)) survivors.push_back(p);
  }

  Dataset synthetic;
  synthetic.positions.resize(static_cast<Index>(survivors.size()), 3);
  synthetic.velocities = Points::Zero(static_cast<Index>(survivors.size()), 3);
  for (std::size_t i = 0; i < survivors.size(); ++i) synthetic.positions.row(static_cast<Index>(i)) = survivors[i];
  synthetic.tags.assign(survivors.size(), SourceTag::qmc_synthetic);
  if (data.timestamps && data.size() > 0) {
    synthetic.timestamps = VectorXd::Constant(static_cast<Index>(survivors.size()), data.timestamps->minCoeff());
  }
  Dataset out = data;
  out.append(synthetic);
  return out;
}

std::vector<VelocityEstimate> filter_by_confidence(const std::vector<VelocityEstimate>& estimates,
                                                   double sigma_threshold) {
  std::vector<VelocityEstimate> kept;
  for (const auto& e : estimates) {
    if (e.sigma_max <= sigma_threshold) kept.push_back(e);
  }
  return kept;
}

}  // namespace bdf
