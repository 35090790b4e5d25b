#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "engage/types.hpp"

namespace engage {

/// Channel-major multichannel series: X[c][t]. All channels share one length.
using Multichannel = std::vector<std::vector<double>>;

struct SegmentationResult {
    std::vector<std::size_t> boundaries;  // sorted, each in (0, T)
    double information_gain = 0.0;        // bits

    std::size_t k() const noexcept { return boundaries.size(); }
};

/// Shannon entropy (bits) of the channel-share distribution over [a, b).
/// Channels must be non-negative; an all-zero segment has entropy 0.
double segment_entropy(const Multichannel& X, std::size_t a, std::size_t b);

/// H(whole) minus the length-weighted entropies of the segments cut at `boundaries`.
double information_gain(const Multichannel& X, std::span<const std::size_t> boundaries);

/// Greedy top-down IGTS: adds one boundary at a time, each maximising the information gain
/// given those already placed. Ties go to the smallest index. Requires k < T.
SegmentationResult igts_topdown(const Multichannel& X, std::size_t k);

/// Shifts every channel by its minimum minus eps so all values are >= eps.
Multichannel shift_nonnegative(const Multichannel& X, double eps = 1e-9);

/// Two-channel IGTS input from a univariate series: the shifted series and its complement
/// (max - x). A single channel always has zero entropy, so the complement carries the level.
Multichannel with_complement(std::span<const double> x, double eps = 1e-9);

enum class BoundarySide { start, end };

struct ClassBoundaryOptions {
    double half_window_seconds = 300.0;
    double rate_hz = 1.0;
};

struct BoundaryEstimate {
    BoundarySide side = BoundarySide::start;
    double time = 0.0;                      // UTC seconds
    std::size_t n_participants_used = 0;
    bool fallback = false;                  // no usable trace: scheduled time returned
    std::vector<double> per_participant;    // individual estimates, input order
};

/// Estimates an actual class start or end from participants' ACC magnitude recordings
/// (each participant given as the list of their ACC_MAG pieces). Each covering participant
/// contributes the k = 1 IGTS boundary of the window [t - h, t + h) resampled to `rate_hz`;
/// the result is the lower median across participants.
BoundaryEstimate class_boundary(std::span<const std::vector<SensorTrace>> acc_mags, double scheduled_t,
                                BoundarySide side, const ClassBoundaryOptions& options = {});

/// Lower-middle median of a non-empty set.
double lower_median(std::vector<double> values);

}  // namespace engage
