#pragma once

#include <span>
#include <vector>

#include "engage/types.hpp"

namespace engage {

enum class Aggregator { mean, last };

/// Largest run of empty output bins bridged by interpolation.
inline constexpr double kDefaultMaxGapSeconds = 5.0;

/// Bins the samples of `pieces` (same channel, any order) falling in [t0, t1) onto a grid of
/// `out_rate` Hz starting at t0. Empty bins are linearly interpolated between neighbouring
/// non-empty bins (edge runs copy the nearest value). Runs of empty bins longer than
/// `max_gap_seconds` split the result into several traces.
/// Throws EmptySliceError when no sample falls in the interval.
std::vector<SensorTrace> slice_resample_split(std::span<const SensorTrace> pieces, double t0, double t1,
                                              double out_rate, Aggregator aggregator,
                                              double max_gap_seconds = kDefaultMaxGapSeconds);

/// As slice_resample_split, but the result must be a single trace; throws ValidationError
/// when a gap longer than `max_gap_seconds` splits it.
SensorTrace slice_resample(std::span<const SensorTrace> pieces, double t0, double t1, double out_rate,
                           Aggregator aggregator, double max_gap_seconds = kDefaultMaxGapSeconds);

SensorTrace slice_resample(const SensorTrace& trace, double t0, double t1, double out_rate, Aggregator aggregator,
                           double max_gap_seconds = kDefaultMaxGapSeconds);

/// Exact sample-index slice of [t0, t1) without resampling (empty when no overlap).
SensorTrace slice(const SensorTrace& trace, double t0, double t1);

}  // namespace engage
