#pragma once

#include <optional>
#include <span>
#include <vector>

#include "engage/types.hpp"

namespace engage {

struct BeatDetectionOptions {
    double window_seconds = 0.75;     // rolling-mean threshold window
    double refractory_seconds = 0.25; // minimum beat spacing
    double min_relative_prominence = 0.5;  // vs the median candidate height above the mean; 0 disables
};

/// Systolic peak times (UTC seconds): the maximum of every run above the rolling mean,
/// minus runs whose peak sits less than min_relative_prominence x the median candidate
/// height above the mean, thinned so that beats closer than the refractory period keep the
/// larger peak.
std::vector<double> detect_beats(const SensorTrace& bvp, const BeatDetectionOptions& options = {});

enum class IbiFlag { detected, interpolated };

struct IbiSeries {
    std::vector<double> beat_times;  // n + 1 beats
    std::vector<double> intervals;   // n intervals, ms
    std::vector<IbiFlag> flags;      // per interval
};

struct IbiOptions {
    double min_ms = 250.0;
    double max_ms = 2000.0;
};

/// Intervals outside [min_ms, max_ms] are replaced by linear interpolation between the
/// nearest valid neighbours; invalid runs at either end are dropped. Beat times are
/// rebuilt from the cleaned intervals so that intervals = diff(beat_times) * 1000.
IbiSeries ibi_from_beats(std::span<const double> beat_times, const IbiOptions& options = {});

struct HrvTimeFeatures {
    double bpm = 0.0;
    double meani = 0.0;  // ms
    double sdnn = 0.0;
    double rmssd = 0.0;
    double sdsd = 0.0;
    double pnn50 = 0.0;  // percent
    double pnn20 = 0.0;
};

struct HrvFreqFeatures {
    double lf_power = 0.0;  // ms^2
    double hf_power = 0.0;
    std::optional<double> ratio_lf_hf;  // missing when hf_power is negligible
};

struct HrvFeatures {
    HrvTimeFeatures time;
    std::optional<HrvFreqFeatures> freq;  // missing for sessions shorter than the minimum
};

HrvTimeFeatures hrv_time_features(std::span<const double> intervals_ms);
HrvTimeFeatures hrv_time_features(const IbiSeries& ibi);

struct WelchOptions {
    double resample_hz = 4.0;
    double segment_seconds = 64.0;
    double overlap = 0.5;
    double min_duration_seconds = 120.0;
};

struct Spectrum {
    std::vector<double> frequency;  // Hz
    std::vector<double> density;    // one-sided, units^2 / Hz
    double resolution = 0.0;        // Hz per bin
};

/// Averaged Hann-windowed periodogram of a uniformly sampled series (mean removed first).
Spectrum welch_psd(std::span<const double> x, double sample_rate, std::size_t segment_length, double overlap);

/// Sum of density * resolution over bins with lo <= f < hi (or f <= hi when `closed_hi`).
double band_power(const Spectrum& s, double lo, double hi, bool closed_hi = false);

/// Throws ValidationError when the intervals span less than min_duration_seconds.
HrvFreqFeatures hrv_freq_features(const IbiSeries& ibi, const WelchOptions& options = {});

/// Time features always; frequency features when the session is long enough.
HrvFeatures hrv_features(const IbiSeries& ibi, const WelchOptions& options = {});

}  // namespace engage
