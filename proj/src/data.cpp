#include "bdf/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string_view>

#include "bdf/error.hpp"

namespace bdf {

Dataset::Dataset(Points positions_in, Points velocities_in, std::optional<VectorXd> timestamps_in)
    : positions(std::move(positions_in)),
      velocities(std::move(velocities_in)),
      timestamps(std::move(timestamps_in)),
      tags(static_cast<std::size_t>(positions.rows()), SourceTag::real) {}

Index Dataset::synthetic_count() const {
  return static_cast<Index>(std::count(tags.begin(), tags.end(), SourceTag::qmc_synthetic));
}

void Dataset::validate() const {
  const Index n = positions.rows();
  if (velocities.rows() != n || static_cast<Index>(tags.size()) != n || (timestamps && timestamps->size() != n)) {
    throw DataError("dataset fields have unequal lengths");
  }
  if (!positions.allFinite()) throw DataError("dataset has non-finite positions");
  if (!velocities.allFinite()) throw DataError("dataset has non-finite velocities");
  if (timestamps && !timestamps->allFinite()) throw DataError("dataset has non-finite timestamps");
}

Dataset Dataset::subset(const std::vector<Index>& rows) const {
  Dataset out;
  const auto n = static_cast<Index>(rows.size());
  out.positions.resize(n, 3);
  out.velocities.resize(n, 3);
  out.tags.resize(rows.size());
  if (timestamps) out.timestamps = VectorXd(n);
  for (Index i = 0; i < n; ++i) {
    const Index r = rows[static_cast<std::size_t>(i)];
    out.positions.row(i) = positions.row(r);
    out.velocities.row(i) = velocities.row(r);
    out.tags[static_cast<std::size_t>(i)] = tags[static_cast<std::size_t>(r)];
    if (timestamps) (*out.timestamps)[i] = (*timestamps)[r];
  }
  return out;
}

void Dataset::append(const Dataset& other) {
  if (other.empty()) return;
  const Index n = size();
  const bool keep_time = (timestamps.has_value() || n == 0) && other.timestamps.has_value();
  Points p(n + other.size(), 3), v(n + other.size(), 3);
  p << positions, other.positions;
  v << velocities, other.velocities;
  if (keep_time) {
    VectorXd t(n + other.size());
    if (n > 0) t << *timestamps, *other.timestamps;
    else t = *other.timestamps;
    timestamps = std::move(t);
  } else {
    timestamps.reset();
  }
  positions = std::move(p);
  velocities = std::move(v);
  tags.insert(tags.end(), other.tags.begin(), other.tags.end());
}

void NormalizerTransform::validate() const {
  if (!offset.allFinite() || !scale.allFinite() || !velocity_offset.allFinite() || !velocity_scale.allFinite()) {
    throw InvalidArgument("normalizer has non-finite parameters");
  }
  if ((scale.array() == 0.0).any() || (velocity_scale.array() == 0.0).any()) {
    throw InvalidArgument("normalizer scale must be nonzero on every axis");
  }
}

bool NormalizerTransform::is_identity() const {
  return offset.isZero(0.0) && scale == Vec3::Ones() && velocity_offset.isZero(0.0) && velocity_scale == Vec3::Ones();
}

Points NormalizerTransform::positions_to_model(const Points& world) const {
  Points out(world.rows(), 3);
  for (int d = 0; d < 3; ++d) out.col(d) = (world.col(d).array() - offset[d]) * scale[d];
  return out;
}

Points NormalizerTransform::positions_to_world(const Points& model) const {
  Points out(model.rows(), 3);
  for (int d = 0; d < 3; ++d) out.col(d) = model.col(d).array() / scale[d] + offset[d];
  return out;
}

Points NormalizerTransform::velocities_to_model(const Points& world) const {
  Points out(world.rows(), 3);
  for (int d = 0; d < 3; ++d) out.col(d) = (world.col(d).array() - velocity_offset[d]) * velocity_scale[d];
  return out;
}

Points NormalizerTransform::velocities_to_world(const Points& model) const {
  Points out(model.rows(), 3);
  for (int d = 0; d < 3; ++d) out.col(d) = model.col(d).array() / velocity_scale[d] + velocity_offset[d];
  return out;
}

double chunks_slab_label(double x, const ChunksOptions& options) {
  if (x < -1.0 / 3.0) return options.slab_labels[0];
  if (x < 1.0 / 3.0) return options.slab_labels[1];
  return options.slab_labels[2];
}

Dataset generate_chunks(std::size_t n_points, std::uint64_t seed, const ChunksOptions& options) {
  if (n_points < 3) throw InvalidArgument("chunks generator needs at least 3 points");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> third(0.0, 2.0 / 3.0);
  std::normal_distribution<double> noise(0.0, options.noise_sigma);
  const auto n = static_cast<Index>(n_points);
  Points p(n, 3), v(n, 3);
  for (Index i = 0; i < n; ++i) {
    // Slab i % 3, uniform inside it, so every slab holds n/3 points (rounded).
    p(i, 0) = -1.0 + 2.0 / 3.0 * static_cast<double>(i % 3) + third(rng);
    p(i, 0) = std::min(p(i, 0), 1.0);
    p(i, 1) = unit(rng);
    p(i, 2) = unit(rng);
    v(i, 0) = chunks_slab_label(p(i, 0), options) + noise(rng);
    v(i, 1) = noise(rng);
    v(i, 2) = noise(rng);
  }
  return Dataset(std::move(p), std::move(v));
}

Dataset generate_blobs(std::size_t n_points, std::uint64_t seed, const BlobsOptions& options) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> spread(0.0, options.spread);
  std::normal_distribution<double> noise(0.0, options.noise_sigma);
  const auto n = static_cast<Index>(n_points);
  Points p(n, 3), v(n, 3);
  for (Index i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(i % 3);
    for (int d = 0; d < 3; ++d) {
      double x;
      do {
        x = options.centers[c][d] + spread(rng);
      } while (x < -1.0 || x > 1.0);
      p(i, d) = x;
    }
    for (int d = 0; d < 3; ++d) v(i, d) = options.velocities[c][d] + noise(rng);
  }
  return Dataset(std::move(p), std::move(v));
}

Dataset generate_airways(std::size_t n_points, std::uint64_t seed, const AirwaysOptions& options) {
  if (options.trajectories == 0) throw InvalidArgument("airways generator needs at least one trajectory");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, options.noise_sigma);
  const auto n = static_cast<Index>(n_points);
  Points p(n, 3), v(n, 3);
  VectorXd t(n);
  const auto k = options.trajectories;
  Index row = 0;
  for (std::size_t traj = 0; traj < k; ++traj) {
    const std::size_t count = n_points / k + (traj < n_points % k ? 1 : 0);
    std::array<Vec3, 3> nodes;
    for (auto& node : nodes) node = Vec3(unit(rng), unit(rng), unit(rng)).cwiseProduct(options.box);
    const double speed = options.min_speed + (options.max_speed - options.min_speed) * unit(rng);
    const double len0 = (nodes[1] - nodes[0]).norm();
    const double len1 = (nodes[2] - nodes[1]).norm();
    const double duration = (len0 + len1) / speed;
    for (std::size_t s = 0; s < count; ++s, ++row) {
      const double time = duration * unit(rng);
      const double dist = time * speed;
      const int leg = dist < len0 ? 0 : 1;
      const Vec3 from = nodes[leg], to = nodes[leg + 1];
      const double leg_len = leg == 0 ? len0 : len1;
      const double along = leg == 0 ? dist : dist - len0;
      const Vec3 dir = leg_len > 0.0 ? Vec3((to - from) / leg_len) : Vec3::Zero();
      p.row(row) = (from + dir * std::min(along, leg_len)).transpose();
      for (int d = 0; d < 3; ++d) v(row, d) = dir[d] * speed + noise(rng);
      t[row] = time;
    }
  }
  return Dataset(std::move(p), std::move(v), std::move(t));
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool parse_number(std::string_view text, double& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

}  // namespace

Dataset parse_trajectories_csv(std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  std::vector<std::array<double, 7>> rows;
  std::vector<std::string> problems;
  std::size_t bad_rows = 0;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (columns == 0) {
      if (view == "x,y,z,vx,vy,vz") {
        columns = 6;
      } else if (view == "x,y,z,vx,vy,vz,t") {
        columns = 7;
      } else {
        throw DataError(source_name + ":" + std::to_string(line_no) +
                        ": expected header 'x,y,z,vx,vy,vz[,t]', got '" + std::string(view) + "'");
      }
      continue;
    }
    const auto fields = split_fields(view);
    std::array<double, 7> values{};
    std::string reason;
    if (fields.size() != columns) {
      reason = "expected " + std::to_string(columns) + " fields, got " + std::to_string(fields.size());
    } else {
      for (std::size_t c = 0; c < columns && reason.empty(); ++c) {
        if (!parse_number(fields[c], values[c])) {
          reason = "field " + std::to_string(c + 1) + " is not a number";
        } else if (!std::isfinite(values[c])) {
          reason = "field " + std::to_string(c + 1) + " is not finite";
        }
      }
    }
    if (!reason.empty()) {
      ++bad_rows;
      if (problems.size() < 10) problems.push_back("line " + std::to_string(line_no) + ": " + reason);
      continue;
    }
    rows.push_back(values);
  }
  if (columns == 0) throw DataError(source_name + ": missing header 'x,y,z,vx,vy,vz[,t]'");
  if (bad_rows > 0) {
    std::ostringstream msg;
    msg << source_name << ": " << bad_rows << " malformed row(s)";
    for (const auto& p : problems) msg << "; " << p;
    throw DataError(msg.str());
  }

  const auto n = static_cast<Index>(rows.size());
  Points p(n, 3), v(n, 3);
  std::optional<VectorXd> t;
  if (columns == 7) t = VectorXd(n);
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    p.row(i) << r[0], r[1], r[2];
    v.row(i) << r[3], r[4], r[5];
    if (t) (*t)[i] = r[6];
  }
  return Dataset(std::move(p), std::move(v), std::move(t));
}

Dataset load_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_trajectories_csv(in, path.string());
}

void write_dataset_csv(std::ostream& out, const Dataset& data, const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  const bool with_time = data.timestamps.has_value();
  out << (with_time ? "x,y,z,vx,vy,vz,t\n" : "x,y,z,vx,vy,vz\n");
  for (Index i = 0; i < data.size(); ++i) {
    for (int d = 0; d < 3; ++d) out << format_double(data.positions(i, d)) << ',';
    for (int d = 0; d < 3; ++d) out << format_double(data.velocities(i, d)) << (d < 2 || with_time ? "," : "");
    if (with_time) out << format_double((*data.timestamps)[i]);
    out << '\n';
  }
}

Dataset derive_velocities(const std::vector<Trajectory>& trajectories) {
  Index total = 0;
  for (const auto& tr : trajectories) {
    if (tr.times.size() != tr.positions.rows()) {
      throw DataError("trajectory '" + tr.id + "': positions and times differ in length");
    }
    for (Index i = 0; i + 1 < tr.times.size(); ++i) {
      if (!(tr.times[i + 1] > tr.times[i])) {
        throw DataError("trajectory '" + tr.id + "': timestamps not strictly increasing at fix " +
                        std::to_string(i + 1));
      }
    }
    total += std::max<Index>(0, tr.positions.rows() - 1);
  }
  Points p(total, 3), v(total, 3);
  VectorXd t(total);
  Index row = 0;
  for (const auto& tr : trajectories) {
    for (Index i = 0; i + 1 < tr.positions.rows(); ++i, ++row) {
      const double dt = tr.times[i + 1] - tr.times[i];
      p.row(row) = 0.5 * (tr.positions.row(i) + tr.positions.row(i + 1));
      v.row(row) = (tr.positions.row(i + 1) - tr.positions.row(i)) / dt;
      t[row] = 0.5 * (tr.times[i] + tr.times[i + 1]);
    }
  }
  Dataset out(std::move(p), std::move(v), std::move(t));
  out.validate();
  return out;
}

std::pair<Dataset, NormalizerTransform> normalize(const Dataset& data, bool standardize_velocity) {
  if (data.empty()) throw DataError("normalize: empty dataset");
  NormalizerTransform tf;
  for (int d = 0; d < 3; ++d) {
    const double lo = data.positions.col(d).minCoeff();
    const double hi = data.positions.col(d).maxCoeff();
    if (hi > lo) {
      tf.offset[d] = 0.5 * (lo + hi);
      tf.scale[d] = 2.0 / (hi - lo);
    } else {
      tf.offset[d] = lo;
      tf.scale[d] = 1.0;
    }
    if (standardize_velocity) {
      const double mean = data.velocities.col(d).mean();
      const double var = (data.velocities.col(d).array() - mean).square().mean();
      tf.velocity_offset[d] = mean;
      tf.velocity_scale[d] = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    }
  }
  Dataset out = data;
  out.positions = tf.positions_to_model(data.positions);
  out.velocities = tf.velocities_to_model(data.velocities);
  return {std::move(out), tf};
}

std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidArgument("split: test fraction must lie in (0, 1)");
  }
  const Index n = data.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  std::vector<Index> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<Index> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {data.subset(train), data.subset(test)};
}

}  // namespace bdf
