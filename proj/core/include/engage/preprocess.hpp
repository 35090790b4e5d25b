#pragma once

#include <span>
#include <string>
#include <vector>

#include "engage/types.hpp"

namespace engage {

/// round(seconds * rate), bumped to the next odd number; at least 1.
std::size_t median_window_samples(double window_seconds, double sample_rate);

/// Centred sliding median. Near the edges the window shrinks to the available samples;
/// even-sized windows take the lower median.
std::vector<double> median_filter(std::span<const double> x, std::size_t window);
SensorTrace median_filter(const SensorTrace& trace, double window_seconds);

/// Per-sample Euclidean norm of three equally sampled axes followed by a median filter.
SensorTrace acc_magnitude(const SensorTrace& x, const SensorTrace& y, const SensorTrace& z,
                          double filter_seconds = 0.2);

struct GateThresholds {
    double flat_level_us = 0.01;       // below this counts as a flat (no-contact) sample
    double flat_run_seconds = 10.0;    // shorter flat runs are ignored
    double max_flat_fraction = 0.2;
    double drop_us = 0.5;              // sample-to-sample decrease counted as abrupt
    std::size_t max_drops = 10;
    double quantization_window_seconds = 60.0;
    double min_distinct_values = 3.0;  // median distinct values per window below this flags quantization
};

struct QualityReport {
    double flat_fraction = 0.0;
    std::size_t n_abrupt_drops = 0;
    bool quantization_flag = false;
    bool accepted = false;
    std::vector<std::string> reasons;
};

/// Screens one class window of raw EDA for contact loss, abrupt drops and quantization.
QualityReport eda_quality_gate(const SensorTrace& eda, const GateThresholds& thresholds = {});

}  // namespace engage
