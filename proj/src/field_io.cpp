#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bdf/error.hpp"
#include "bdf/field.hpp"

namespace bdf {

static_assert(std::endian::native == std::endian::little, "field files are little-endian");

namespace {

constexpr char kMagic[8] = {'B', 'D', 'F', 'F', 'I', 'E', 'L', 'D'};
constexpr char kTrailer[8] = {'B', 'D', 'F', '-', 'E', 'N', 'D', '\n'};
constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;
// Refuse absurd sizes before allocating.
constexpr std::uint64_t kMaxStoredBasis = 1u << 16;
constexpr std::uint64_t kMaxConfigBytes = 1u << 20;

class PayloadWriter {
 public:
  explicit PayloadWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= kFnvPrime;
    }
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }
  template <typename T>
  void scalar(T v) {
    bytes(&v, sizeof(T));
  }
  void vec3(const Vec3& v) { bytes(v.data(), 3 * sizeof(double)); }

  std::uint64_t hash() const { return hash_; }

 private:
  std::ostream& out_;
  std::uint64_t hash_ = kFnvOffset;
};

class PayloadReader {
 public:
  PayloadReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(source_ + ": truncated field file");
    }
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= kFnvPrime;
    }
  }
  template <typename T>
  T scalar() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  Vec3 vec3() {
    Vec3 v;
    bytes(v.data(), 3 * sizeof(double));
    return v;
  }

  std::uint64_t hash() const { return hash_; }
  /// Unhashed read for the checksum and trailer.
  void raw(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError(source_ + ": truncated field file");
  }

 private:
  std::istream& in_;
  std::string source_;
  std::uint64_t hash_ = kFnvOffset;
};

struct Header {
  std::uint32_t version = 0;
};

Header read_header(std::istream& in, const std::string& source) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw FormatError(source + ": not a velocity field file (bad magic)");
  }
  Header h;
  in.read(reinterpret_cast<char*>(&h.version), sizeof(h.version));
  if (in.gcount() != sizeof(h.version)) throw FormatError(source + ": truncated field file");
  if (h.version != kFieldFormatVersion) {
    throw VersionError(source + ": field file version " + std::to_string(h.version) +
                       " is not supported by this build (supports version " + std::to_string(kFieldFormatVersion) +
                       ")");
  }
  return h;
}

}  // namespace

void save_field(const VelocityField& field, const std::filesystem::path& path, const std::string& config_echo) {
  std::ostringstream buf(std::ios::binary);
  buf.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kFieldFormatVersion;
  buf.write(reinterpret_cast<const char*>(&version), sizeof(version));

  PayloadWriter w(buf);
  for (const auto& ax : field.basis().grid().axes) {
    w.scalar(ax.lo);
    w.scalar(ax.hi);
    w.scalar(ax.spacing);
    w.scalar(static_cast<std::uint64_t>(ax.count));
  }
  w.vec3(field.basis().kernel().gammas);
  w.scalar(field.noise().alpha);
  w.scalar(field.noise().beta);
  w.scalar(field.synthetic_beta());
  w.scalar(field.sparsify_below());
  const auto& tf = field.normalizer();
  w.vec3(tf.offset);
  w.vec3(tf.scale);
  w.vec3(tf.velocity_offset);
  w.vec3(tf.velocity_scale);
  const auto& ls = field.label_stats();
  w.scalar(static_cast<std::int64_t>(ls.count));
  w.vec3(ls.sum);
  w.vec3(ls.sum_sq);
  w.scalar(static_cast<std::int64_t>(field.observations()));
  const auto m = static_cast<std::uint64_t>(field.basis().size());
  w.scalar(m);
  for (int c = 0; c < 3; ++c) {
    const auto& state = field.component(c);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> prec = state.precision();
    w.bytes(prec.data(), static_cast<std::size_t>(prec.size()) * sizeof(double));
    w.bytes(state.info().data(), static_cast<std::size_t>(m) * sizeof(double));
  }
  w.scalar(static_cast<std::uint64_t>(config_echo.size()));
  w.bytes(config_echo.data(), config_echo.size());
  const std::uint64_t checksum = w.hash();
  buf.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
  buf.write(kTrailer, sizeof(kTrailer));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  const std::string bytes = buf.str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

namespace {

struct Loaded {
  GridMeta grid;
  Vec3 gammas;
  NoiseModel noise;
  double synthetic_beta = 0.0;
  double sparsify_below = 0.0;
  NormalizerTransform tf;
  LabelStats labels;
  std::int64_t observations = 0;
  std::vector<MatrixXd> precisions;
  std::vector<VectorXd> infos;
  std::string config_echo;
};

Loaded read_container(const std::filesystem::path& path) {
  const std::string source = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + source + "'");
  read_header(in, source);

  PayloadReader r(in, source);
  Loaded out;
  for (auto& ax : out.grid.axes) {
    ax.lo = r.scalar<double>();
    ax.hi = r.scalar<double>();
    ax.spacing = r.scalar<double>();
    ax.count = static_cast<std::size_t>(r.scalar<std::uint64_t>());
  }
  out.gammas = r.vec3();
  out.noise.alpha = r.scalar<double>();
  out.noise.beta = r.scalar<double>();
  out.synthetic_beta = r.scalar<double>();
  out.sparsify_below = r.scalar<double>();
  out.tf.offset = r.vec3();
  out.tf.scale = r.vec3();
  out.tf.velocity_offset = r.vec3();
  out.tf.velocity_scale = r.vec3();
  out.labels.count = r.scalar<std::int64_t>();
  out.labels.sum = r.vec3();
  out.labels.sum_sq = r.vec3();
  out.observations = r.scalar<std::int64_t>();
  const auto m = r.scalar<std::uint64_t>();
  if (m == 0 || m > kMaxStoredBasis || m != out.grid.size()) {
    throw FormatError(source + ": corrupt field file (basis size " + std::to_string(m) + ")");
  }
  const auto mi = static_cast<Index>(m);
  for (int c = 0; c < 3; ++c) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> prec(mi, mi);
    r.bytes(prec.data(), static_cast<std::size_t>(prec.size()) * sizeof(double));
    VectorXd info(mi);
    r.bytes(info.data(), static_cast<std::size_t>(m) * sizeof(double));
    out.precisions.emplace_back(prec);
    out.infos.push_back(std::move(info));
  }
  const auto echo_len = r.scalar<std::uint64_t>();
  if (echo_len > kMaxConfigBytes) throw FormatError(source + ": corrupt field file (config length)");
  out.config_echo.resize(static_cast<std::size_t>(echo_len));
  r.bytes(out.config_echo.data(), out.config_echo.size());

  const std::uint64_t expected = r.hash();
  std::uint64_t stored = 0;
  r.raw(&stored, sizeof(stored));
  char trailer[8];
  r.raw(trailer, sizeof(trailer));
  if (stored != expected) throw FormatError(source + ": checksum mismatch, field file is corrupt");
  if (std::memcmp(trailer, kTrailer, sizeof(trailer)) != 0) throw FormatError(source + ": bad trailer");
  return out;
}

}  // namespace

VelocityField load_field(const std::filesystem::path& path) {
  Loaded d = read_container(path);
  FeatureBasis basis(d.grid, KernelSpec{d.gammas});
  std::array<GaussianState, 3> comps{GaussianState(d.precisions[0], d.infos[0]),
                                     GaussianState(d.precisions[1], d.infos[1]),
                                     GaussianState(d.precisions[2], d.infos[2])};
  VelocityField field(std::move(basis), std::move(comps), d.noise, d.tf, d.synthetic_beta, d.sparsify_below,
                      d.labels);
  field.observations_ = d.observations;
  field.materialize();
  return field;
}

std::string load_field_config_echo(const std::filesystem::path& path) { return read_container(path).config_echo; }

void write_estimates_csv(std::ostream& out, const std::vector<VelocityEstimate>& estimates,
                         const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "x,y,z,mean_vx,mean_vy,mean_vz,var_vx,var_vy,var_vz,sigma_max\n";
  for (const auto& e : estimates) {
    for (int d = 0; d < 3; ++d) out << format_double(e.position[d]) << ',';
    for (int d = 0; d < 3; ++d) out << format_double(e.mean[d]) << ',';
    for (int d = 0; d < 3; ++d) out << format_double(e.variance[d]) << ',';
    out << format_double(e.sigma_max) << '\n';
  }
}

std::vector<VelocityEstimate> parse_estimates_csv(std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::vector<VelocityEstimate> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "x,y,z,mean_vx,mean_vy,mean_vz,var_vx,var_vy,var_vz,sigma_max") {
        throw DataError(source_name + ":" + std::to_string(line_no) + ": not an estimates CSV header");
      }
      header = true;
      continue;
    }
    double v[10];
    std::size_t field = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (field < 10) {
      const auto res = std::from_chars(p, end, v[field]);
      if (res.ec != std::errc() || !std::isfinite(v[field])) break;
      p = res.ptr;
      ++field;
      if (field < 10) {
        if (p == end || *p != ',') break;
        ++p;
      }
    }
    if (field != 10 || p != end) {
      throw DataError(source_name + ":" + std::to_string(line_no) + ": malformed estimates row");
    }
    VelocityEstimate e;
    e.position = Vec3(v[0], v[1], v[2]);
    e.mean = Vec3(v[3], v[4], v[5]);
    e.variance = Vec3(v[6], v[7], v[8]);
    e.sigma_max = v[9];
    out.push_back(e);
  }
  if (!header) throw DataError(source_name + ": missing estimates CSV header");
  return out;
}

}  // namespace bdf
