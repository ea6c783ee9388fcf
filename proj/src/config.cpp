#include "bdf/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>

#include "bdf/error.hpp"

namespace bdf {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw InvalidArgument("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " +
                        expected);
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  std::string_view t = trim(v);
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(out)) {
    bad_value(key, v, "a finite number");
  }
  return out;
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const std::string_view t = trim(v);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  const std::string_view t = trim(v);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  bad_value(key, v, "a boolean");
}

Vec3 to_vec3(std::string_view key, std::string_view v) {
  const auto parts = split_on(v, ',');
  if (parts.size() == 1) return Vec3::Constant(to_double(key, parts[0]));
  if (parts.size() != 3) bad_value(key, v, "one value or three comma-separated values");
  return Vec3(to_double(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2]));
}

std::array<AxisRange, 3> to_bounds(std::string_view key, std::string_view v) {
  const auto axes = split_on(v, ',');
  if (axes.size() != 1 && axes.size() != 3) bad_value(key, v, "lo:hi or lo:hi,lo:hi,lo:hi");
  std::array<AxisRange, 3> out;
  for (std::size_t d = 0; d < 3; ++d) {
    const auto parts = split_on(axes[axes.size() == 1 ? 0 : d], ':');
    if (parts.size() != 2) bad_value(key, v, "lo:hi or lo:hi,lo:hi,lo:hi");
    out[d] = AxisRange{to_double(key, parts[0]), to_double(key, parts[1])};
  }
  return out;
}

std::string vec3_text(const Vec3& v) {
  return format_double(v[0]) + "," + format_double(v[1]) + "," + format_double(v[2]);
}

std::string bounds_text(const std::array<AxisRange, 3>& b) {
  std::string s;
  for (std::size_t d = 0; d < 3; ++d) {
    if (d) s += ",";
    s += format_double(b[d].lo) + ":" + format_double(b[d].hi);
  }
  return s;
}

using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"gamma", [](RunConfig& c, auto k, auto v) { c.gamma = to_vec3(k, v); }},
      {"bounds", [](RunConfig& c, auto k, auto v) { c.bounds = to_bounds(k, v); }},
      {"spacing", [](RunConfig& c, auto k, auto v) { c.spacing = to_vec3(k, v); }},
      {"alpha", [](RunConfig& c, auto k, auto v) { c.alpha = to_double(k, v); }},
      {"beta", [](RunConfig& c, auto k, auto v) { c.beta = to_double(k, v); }},
      {"synthetic_beta", [](RunConfig& c, auto k, auto v) { c.synthetic_beta = to_double(k, v); }},
      {"sparsify_below", [](RunConfig& c, auto k, auto v) { c.sparsify_below = to_double(k, v); }},
      {"max_basis", [](RunConfig& c, auto k, auto v) { c.max_basis = to_uint(k, v); }},
      {"seed", [](RunConfig& c, auto k, auto v) { c.seed = to_uint(k, v); }},
      {"dataset", [](RunConfig& c, auto, auto v) { c.dataset = std::string(trim(v)); }},
      {"n", [](RunConfig& c, auto k, auto v) { c.n = to_uint(k, v); }},
      {"data", [](RunConfig& c, auto, auto v) { c.data = std::string(trim(v)); }},
      {"test_fraction", [](RunConfig& c, auto k, auto v) { c.test_fraction = to_double(k, v); }},
      {"normalize", [](RunConfig& c, auto k, auto v) { c.normalize = to_bool(k, v); }},
      {"standardize_velocity", [](RunConfig& c, auto k, auto v) { c.standardize_velocity = to_bool(k, v); }},
      {"qmc_count", [](RunConfig& c, auto k, auto v) { c.qmc_count = to_uint(k, v); }},
      {"qmc_radius", [](RunConfig& c, auto k, auto v) { c.qmc_radius = to_double(k, v); }},
      {"qmc_sequence", [](RunConfig& c, auto, auto v) { c.qmc_sequence = parse_qmc_sequence(trim(v)); }},
      {"sigma_threshold", [](RunConfig& c, auto k, auto v) { c.sigma_threshold = to_double(k, v); }},
      {"gp_cap", [](RunConfig& c, auto k, auto v) { c.gp_cap = to_uint(k, v); }},
      {"bench_test_n", [](RunConfig& c, auto k, auto v) { c.bench_test_n = to_uint(k, v); }},
      {"threads", [](RunConfig& c, auto k, auto v) { c.threads = static_cast<int>(to_uint(k, v)); }},
  };
  return table;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  const auto it = setters().find(trim(key));
  if (it == setters().end()) throw InvalidArgument("unknown config key '" + std::string(trim(key)) + "'");
  it->second(*this, trim(key), value);
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set(t.substr(0, eq), t.substr(eq + 1));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::validate() const {
  KernelSpec{gamma}.validate();
  NoiseModel{alpha, beta}.validate();
  for (int d = 0; d < 3; ++d) {
    if (!(bounds[static_cast<std::size_t>(d)].lo <= bounds[static_cast<std::size_t>(d)].hi)) {
      throw InvalidArgument("bounds must satisfy lo <= hi on every axis");
    }
    if (!(spacing[d] > 0.0)) throw InvalidArgument("spacing must be positive");
  }
  if (!(sparsify_below >= 0.0 && sparsify_below < 1.0)) throw InvalidArgument("sparsify_below must lie in [0, 1)");
  if (synthetic_beta < 0.0) throw InvalidArgument("synthetic_beta must be >= 0 (0 = same as beta)");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InvalidArgument("test_fraction must lie in (0, 1)");
  if (qmc_radius < 0.0) throw InvalidArgument("qmc_radius must be >= 0 (0 = half the grid spacing)");
  if (!(sigma_threshold > 0.0)) throw InvalidArgument("sigma_threshold must be positive");
  if (dataset != "blobs" && dataset != "chunks" && dataset != "airways") {
    throw InvalidArgument("dataset must be blobs, chunks or airways");
  }
  if (threads < 0) throw InvalidArgument("threads must be >= 0");
}

FieldConfig RunConfig::field_config() const {
  FieldConfig fc;
  fc.bounds = bounds;
  fc.spacing = spacing;
  fc.kernel = KernelSpec{gamma};
  fc.noise = NoiseModel{alpha, beta};
  fc.synthetic_beta = synthetic_beta;
  fc.sparsify_below = sparsify_below;
  fc.max_basis = max_basis;
  return fc;
}

std::vector<std::string> RunConfig::echo() const {
  return {
      "gamma=" + vec3_text(gamma),
      "bounds=" + bounds_text(bounds),
      "spacing=" + vec3_text(spacing),
      "alpha=" + format_double(alpha),
      "beta=" + format_double(beta),
      "synthetic_beta=" + format_double(synthetic_beta),
      "sparsify_below=" + format_double(sparsify_below),
      "max_basis=" + std::to_string(max_basis),
      "seed=" + std::to_string(seed),
      "dataset=" + dataset,
      "n=" + std::to_string(n),
      "data=" + data,
      "test_fraction=" + format_double(test_fraction),
      std::string("normalize=") + (normalize ? "true" : "false"),
      std::string("standardize_velocity=") + (standardize_velocity ? "true" : "false"),
      "qmc_count=" + std::to_string(qmc_count),
      "qmc_radius=" + format_double(qmc_radius),
      std::string("qmc_sequence=") + to_string(qmc_sequence),
      "sigma_threshold=" + format_double(sigma_threshold),
      "gp_cap=" + std::to_string(gp_cap),
      "bench_test_n=" + std::to_string(bench_test_n),
      "threads=" + std::to_string(threads),
  };
}

Points parse_grid_spec(std::string_view spec) {
  const auto axes = split_on(spec, ',');
  if (axes.size() != 1 && axes.size() != 3) {
    throw InvalidArgument("grid spec must be lo:step:hi or three of them separated by commas");
  }
  std::array<AxisRange, 3> bounds;
  Vec3 step;
  for (std::size_t d = 0; d < 3; ++d) {
    const auto parts = split_on(axes[axes.size() == 1 ? 0 : d], ':');
    if (parts.size() != 3) throw InvalidArgument("grid spec axis must be lo:step:hi, got '" + std::string(spec) + "'");
    bounds[d] = AxisRange{to_double("grid", parts[0]), to_double("grid", parts[2])};
    step[static_cast<Index>(d)] = to_double("grid", parts[1]);
  }
  return build_grid(bounds, step, KernelSpec{}, 10'000'000).fixed_points();
}

}  // namespace bdf
