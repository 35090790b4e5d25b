#include "engage/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "engage/errors.hpp"

namespace engage {

std::size_t median_window_samples(double window_seconds, double sample_rate) {
    if (!(window_seconds > 0.0)) throw ValidationError("median window must be positive");
    auto w = static_cast<std::size_t>(std::llround(window_seconds * sample_rate));
    if (w % 2 == 0) ++w;
    return std::max<std::size_t>(w, 1);
}

std::vector<double> median_filter(std::span<const double> x, std::size_t window) {
    if (x.empty()) throw ValidationError("median filter on an empty trace");
    if (window == 0) throw ValidationError("median window must be positive");
    const std::size_t half = window / 2;
    const std::size_t n = x.size();
    std::vector<double> out(n);
    std::vector<double> buf;
    buf.reserve(window);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n, i + half + 1);
        buf.assign(x.begin() + static_cast<std::ptrdiff_t>(lo), x.begin() + static_cast<std::ptrdiff_t>(hi));
        const auto mid = (buf.size() - 1) / 2;
        std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid), buf.end());
        out[i] = buf[mid];
    }
    return out;
}

SensorTrace median_filter(const SensorTrace& trace, double window_seconds) {
    SensorTrace out{trace.channel, trace.start_time, trace.sample_rate, {}};
    out.values = median_filter(trace.values, median_window_samples(window_seconds, trace.sample_rate));
    return out;
}

SensorTrace acc_magnitude(const SensorTrace& x, const SensorTrace& y, const SensorTrace& z, double filter_seconds) {
    if (x.size() != y.size() || x.size() != z.size()) throw ValidationError("ACC axes differ in length");
    if (x.sample_rate != y.sample_rate || x.sample_rate != z.sample_rate) {
        throw ValidationError("ACC axes differ in sample rate");
    }
    SensorTrace mag{Channel::ACC_MAG, x.start_time, x.sample_rate, std::vector<double>(x.size())};
    for (std::size_t i = 0; i < x.size(); ++i) {
        mag.values[i] = std::sqrt(x.values[i] * x.values[i] + y.values[i] * y.values[i] + z.values[i] * z.values[i]);
    }
    if (mag.empty()) return mag;
    return median_filter(mag, filter_seconds);
}

QualityReport eda_quality_gate(const SensorTrace& eda, const GateThresholds& th) {
    QualityReport report;
    const auto& x = eda.values;
    const std::size_t n = x.size();
    if (n == 0) {
        report.flat_fraction = 1.0;
        report.reasons.emplace_back("empty trace");
        return report;
    }

    // Flat runs: consecutive samples below the contact level, or exactly constant.
    const auto min_run = static_cast<std::size_t>(std::ceil(th.flat_run_seconds * eda.sample_rate - 1e-9));
    std::vector<bool> flat(n, false);
    auto mark_runs = [&](auto&& same_run) {
        std::size_t start = 0;
        for (std::size_t i = 1; i <= n; ++i) {
            if (i < n && same_run(i)) continue;
            if (i - start >= min_run) std::fill(flat.begin() + static_cast<std::ptrdiff_t>(start),
                                                flat.begin() + static_cast<std::ptrdiff_t>(i), true);
            start = i;
        }
    };
    mark_runs([&](std::size_t i) { return x[i] < th.flat_level_us && x[i - 1] < th.flat_level_us; });
    mark_runs([&](std::size_t i) { return x[i] == x[i - 1]; });
    std::size_t nflat = static_cast<std::size_t>(std::count(flat.begin(), flat.end(), true));
    report.flat_fraction = static_cast<double>(nflat) / static_cast<double>(n);

    for (std::size_t i = 1; i < n; ++i) {
        if (x[i - 1] - x[i] > th.drop_us) ++report.n_abrupt_drops;
    }

    const auto w = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(th.quantization_window_seconds * eda.sample_rate)));
    std::vector<double> distinct;
    for (std::size_t start = 0; start + w <= n; start += w) {
        std::set<double> values(x.begin() + static_cast<std::ptrdiff_t>(start),
                                x.begin() + static_cast<std::ptrdiff_t>(start + w));
        distinct.push_back(static_cast<double>(values.size()));
    }
    if (distinct.empty()) distinct.push_back(static_cast<double>(std::set<double>(x.begin(), x.end()).size()));
    std::sort(distinct.begin(), distinct.end());
    const std::size_t m = distinct.size();
    const double median_distinct = m % 2 ? distinct[m / 2] : 0.5 * (distinct[m / 2 - 1] + distinct[m / 2]);
    report.quantization_flag = median_distinct < th.min_distinct_values;

    if (report.flat_fraction > th.max_flat_fraction) report.reasons.emplace_back("flat responses");
    if (report.n_abrupt_drops > th.max_drops) report.reasons.emplace_back("abrupt drops");
    if (report.quantization_flag) report.reasons.emplace_back("quantization");
    report.accepted = report.reasons.empty();
    return report;
}

}  // namespace engage
