#include "engage/resample.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "engage/errors.hpp"

namespace engage {

namespace {
constexpr double kEps = 1e-9;

std::size_t first_index_at_or_after(const SensorTrace& t, double when) {
    const double i = std::ceil((when - t.start_time) * t.sample_rate - kEps);
    return static_cast<std::size_t>(std::clamp(i, 0.0, static_cast<double>(t.values.size())));
}
}  // namespace

SensorTrace slice(const SensorTrace& trace, double t0, double t1) {
    SensorTrace out{trace.channel, trace.start_time, trace.sample_rate, {}};
    const auto a = first_index_at_or_after(trace, t0);
    const auto b = std::max(a, first_index_at_or_after(trace, t1));
    out.values.assign(trace.values.begin() + static_cast<std::ptrdiff_t>(a),
                      trace.values.begin() + static_cast<std::ptrdiff_t>(b));
    out.start_time = trace.start_time + static_cast<double>(a) / trace.sample_rate;
    return out;
}

std::vector<SensorTrace> slice_resample_split(std::span<const SensorTrace> pieces, double t0, double t1,
                                              double out_rate, Aggregator aggregator, double max_gap_seconds) {
    if (!(out_rate > 0.0)) throw ValidationError("output rate must be positive");
    if (!(t1 > t0)) throw EmptySliceError("empty slice interval");
    if (pieces.empty()) throw EmptySliceError("no source samples");
    const auto nbins = static_cast<std::size_t>(std::floor((t1 - t0) * out_rate + kEps));
    if (nbins == 0) throw EmptySliceError("slice shorter than one output period");

    std::vector<const SensorTrace*> order;
    for (const auto& p : pieces) order.push_back(&p);
    std::stable_sort(order.begin(), order.end(),
                     [](const SensorTrace* a, const SensorTrace* b) { return a->start_time < b->start_time; });

    std::vector<double> acc(nbins, 0.0);
    std::vector<std::size_t> count(nbins, 0);
    for (const auto* p : order) {
        const auto lo = first_index_at_or_after(*p, t0);
        const auto hi = first_index_at_or_after(*p, t1);
        const double offset = p->start_time - t0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double rel = offset + static_cast<double>(i) / p->sample_rate;
            auto bin = static_cast<std::size_t>(std::max(0.0, std::floor(rel * out_rate + kEps)));
            if (bin >= nbins) continue;
            if (aggregator == Aggregator::mean) {
                acc[bin] += p->values[i];
            } else {
                acc[bin] = p->values[i];
            }
            ++count[bin];
        }
    }

    std::vector<double> value(nbins, 0.0);
    std::vector<bool> filled(nbins, false);
    bool any = false;
    for (std::size_t b = 0; b < nbins; ++b) {
        if (count[b] == 0) continue;
        value[b] = aggregator == Aggregator::mean ? acc[b] / static_cast<double>(count[b]) : acc[b];
        filled[b] = true;
        any = true;
    }
    if (!any) throw EmptySliceError("no samples of " + std::string(to_string(pieces.front().channel)) + " in slice");

    const double max_gap_bins = max_gap_seconds * out_rate + kEps;
    std::vector<SensorTrace> out;
    SensorTrace current{pieces.front().channel, 0.0, out_rate, {}};
    auto flush = [&] {
        if (!current.values.empty()) out.push_back(std::move(current));
        current = SensorTrace{pieces.front().channel, 0.0, out_rate, {}};
    };

    std::size_t b = 0;
    while (b < nbins) {
        if (filled[b]) {
            if (current.values.empty()) current.start_time = t0 + static_cast<double>(b) / out_rate;
            current.values.push_back(value[b]);
            ++b;
            continue;
        }
        std::size_t e = b;
        while (e < nbins && !filled[e]) ++e;
        if (static_cast<double>(e - b) > max_gap_bins) {
            flush();
        } else if (current.values.empty()) {
            // Leading run: copy the first value backwards.
            current.start_time = t0 + static_cast<double>(b) / out_rate;
            current.values.insert(current.values.end(), e - b, value[e]);
        } else if (e == nbins) {
            current.values.insert(current.values.end(), e - b, value[b - 1]);
        } else {
            const double left = value[b - 1];
            const double right = value[e];
            const auto span = static_cast<double>(e - b + 1);
            for (std::size_t k = b; k < e; ++k) {
                current.values.push_back(left + (right - left) * static_cast<double>(k - b + 1) / span);
            }
        }
        b = e;
    }
    flush();
    return out;
}

SensorTrace slice_resample(std::span<const SensorTrace> pieces, double t0, double t1, double out_rate,
                           Aggregator aggregator, double max_gap_seconds) {
    auto parts = slice_resample_split(pieces, t0, t1, out_rate, aggregator, max_gap_seconds);
    if (parts.size() != 1) {
        throw ValidationError("slice contains a gap longer than " + std::to_string(max_gap_seconds) + " s");
    }
    return std::move(parts.front());
}

SensorTrace slice_resample(const SensorTrace& trace, double t0, double t1, double out_rate, Aggregator aggregator,
                           double max_gap_seconds) {
    return slice_resample(std::span<const SensorTrace>(&trace, 1), t0, t1, out_rate, aggregator, max_gap_seconds);
}

}  // namespace engage
