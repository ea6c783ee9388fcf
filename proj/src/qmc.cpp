#include "bdf/qmc.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include <boost/random/sobol.hpp>

#include "bdf/error.hpp"

namespace bdf {

QmcSequence parse_qmc_sequence(std::string_view name) {
  if (name == "sobol") return QmcSequence::sobol;
  if (name == "halton") return QmcSequence::halton;
  throw InvalidArgument("unknown QMC sequence '" + std::string(name) + "' (expected sobol or halton)");
}

const char* to_string(QmcSequence seq) { return seq == QmcSequence::sobol ? "sobol" : "halton"; }

double radical_inverse(std::size_t index, unsigned base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

Points qmc_unit_points(QmcSequence seq, std::size_t count) {
  Points out(static_cast<Index>(count), 3);
  if (seq == QmcSequence::sobol) {
    // boost's engine already omits the origin.
    boost::random::sobol engine(3);
    for (Index i = 0; i < out.rows(); ++i) {
      for (int d = 0; d < 3; ++d) out(i, d) = static_cast<double>(engine()) * 0x1p-64;
    }
  } else {
    constexpr unsigned bases[3] = {2, 3, 5};
    for (Index i = 0; i < out.rows(); ++i) {
      for (int d = 0; d < 3; ++d) out(i, d) = radical_inverse(static_cast<std::size_t>(i) + 1, bases[d]);
    }
  }
  return out;
}

double max_axis_gap(const Points& unit_points) {
  double worst = 0.0;
  std::vector<double> coords(static_cast<std::size_t>(unit_points.rows()));
  for (int d = 0; d < 3; ++d) {
    for (Index i = 0; i < unit_points.rows(); ++i) coords[static_cast<std::size_t>(i)] = unit_points(i, d);
    std::sort(coords.begin(), coords.end());
    double prev = 0.0;
    for (double c : coords) {
      worst = std::max(worst, c - prev);
      prev = c;
    }
    worst = std::max(worst, 1.0 - prev);
  }
  return worst;
}

}  // namespace bdf
