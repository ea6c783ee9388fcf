#pragma once

#include <cstddef>
#include <string_view>

#include "bdf/types.hpp"

namespace bdf {

enum class QmcSequence { sobol, halton };

QmcSequence parse_qmc_sequence(std::string_view name);
const char* to_string(QmcSequence seq);

/// First `count` points of a 3D low-discrepancy sequence in [0, 1)^3.
/// Sobol skips the all-zero leading point; Halton uses prime bases 2, 3, 5
/// starting from index 1.
Points qmc_unit_points(QmcSequence seq, std::size_t count);

/// Radical inverse of `index` in `base` (van der Corput).
double radical_inverse(std::size_t index, unsigned base);

/// Largest gap between consecutive sorted coordinates (including the gaps to
/// 0 and 1) over the three axes. Smaller means more even coverage.
double max_axis_gap(const Points& unit_points);

}  // namespace bdf
