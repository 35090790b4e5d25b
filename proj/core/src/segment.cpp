#include "engage/segment.hpp"

#include <algorithm>
#include <cmath>

#include "engage/errors.hpp"
#include "engage/resample.hpp"

namespace engage {

namespace {

void check_shape(const Multichannel& X) {
    if (X.empty()) throw ValidationError("IGTS input has no channels");
    const auto T = X.front().size();
    for (const auto& ch : X) {
        if (ch.size() != T) throw ValidationError("IGTS channels differ in length");
        for (double v : ch) {
            if (!(v >= 0.0)) throw ValidationError("IGTS channels must be non-negative");
        }
    }
}

double entropy_of(std::span<const double> sums) {
    double total = 0.0;
    for (double s : sums) total += s;
    if (!(total > 0.0)) return 0.0;
    double h = 0.0;
    for (double s : sums) {
        if (s <= 0.0) continue;
        const double p = s / total;
        h -= p * std::log2(p);
    }
    return h;
}

/// Prefix sums with a leading zero: P[c][t] = sum of X[c][0..t).
class PrefixSums {
public:
    explicit PrefixSums(const Multichannel& X) : prefix_(X.size()) {
        for (std::size_t c = 0; c < X.size(); ++c) {
            auto& p = prefix_[c];
            p.resize(X[c].size() + 1, 0.0);
            for (std::size_t t = 0; t < X[c].size(); ++t) p[t + 1] = p[t] + X[c][t];
        }
        scratch_.resize(X.size());
    }

    double entropy(std::size_t a, std::size_t b) {
        for (std::size_t c = 0; c < prefix_.size(); ++c) scratch_[c] = prefix_[c][b] - prefix_[c][a];
        return entropy_of(scratch_);
    }

private:
    std::vector<std::vector<double>> prefix_;
    std::vector<double> scratch_;
};

}  // namespace

double segment_entropy(const Multichannel& X, std::size_t a, std::size_t b) {
    check_shape(X);
    if (!(b > a) || b > X.front().size()) throw ValidationError("segment_entropy requires a < b <= T");
    std::vector<double> sums(X.size(), 0.0);
    for (std::size_t c = 0; c < X.size(); ++c) {
        for (std::size_t t = a; t < b; ++t) sums[c] += X[c][t];
    }
    return entropy_of(sums);
}

double information_gain(const Multichannel& X, std::span<const std::size_t> boundaries) {
    check_shape(X);
    const auto T = X.front().size();
    PrefixSums ps(X);
    std::vector<std::size_t> cuts(boundaries.begin(), boundaries.end());
    std::sort(cuts.begin(), cuts.end());
    double weighted = 0.0;
    std::size_t a = 0;
    for (std::size_t i = 0; i <= cuts.size(); ++i) {
        const std::size_t b = i < cuts.size() ? cuts[i] : T;
        if (b <= a || b > T) throw ValidationError("boundaries must be strictly increasing inside (0, T)");
        weighted += static_cast<double>(b - a) / static_cast<double>(T) * ps.entropy(a, b);
        a = b;
    }
    return std::max(0.0, ps.entropy(0, T) - weighted);
}

SegmentationResult igts_topdown(const Multichannel& X, std::size_t k) {
    check_shape(X);
    const auto T = X.front().size();
    if (k >= T) throw ValidationError("IGTS needs k < T (k = " + std::to_string(k) + ", T = " + std::to_string(T) + ")");

    PrefixSums ps(X);
    const double inv_t = 1.0 / static_cast<double>(T);
    constexpr double kTieTolerance = 1e-12;

    SegmentationResult result;
    std::vector<std::size_t> cuts;  // sorted
    for (std::size_t step = 0; step < k; ++step) {
        double best_delta = -1.0;
        std::size_t best = 0;
        for (std::size_t t = 1; t < T; ++t) {
            const auto idx = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), t) - cuts.begin());
            const std::size_t a = idx == 0 ? 0 : cuts[idx - 1];
            if (a == t) continue;
            const std::size_t b = idx < cuts.size() ? cuts[idx] : T;
            const double delta = static_cast<double>(b - a) * inv_t * ps.entropy(a, b) -
                                 static_cast<double>(t - a) * inv_t * ps.entropy(a, t) -
                                 static_cast<double>(b - t) * inv_t * ps.entropy(t, b);
            if (best == 0 || delta > best_delta + kTieTolerance) {
                best_delta = delta;
                best = t;
            }
        }
        cuts.insert(std::upper_bound(cuts.begin(), cuts.end(), best), best);
    }
    result.boundaries = cuts;
    result.information_gain = information_gain(X, cuts);
    return result;
}

Multichannel shift_nonnegative(const Multichannel& X, double eps) {
    Multichannel out = X;
    for (auto& ch : out) {
        if (ch.empty()) continue;
        const double lo = *std::min_element(ch.begin(), ch.end());
        for (double& v : ch) v = v - lo + eps;
    }
    return out;
}

Multichannel with_complement(std::span<const double> x, double eps) {
    if (x.empty()) throw ValidationError("empty series");
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    Multichannel out(2, std::vector<double>(x.size()));
    for (std::size_t t = 0; t < x.size(); ++t) {
        out[0][t] = x[t] - lo + eps;
        out[1][t] = hi - x[t] + eps;
    }
    return out;
}

double lower_median(std::vector<double> values) {
    if (values.empty()) throw ValidationError("median of an empty set");
    const auto mid = (values.size() - 1) / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    return values[mid];
}

BoundaryEstimate class_boundary(std::span<const std::vector<SensorTrace>> acc_mags, double scheduled_t,
                                BoundarySide side, const ClassBoundaryOptions& options) {
    BoundaryEstimate est;
    est.side = side;
    const double t0 = scheduled_t - options.half_window_seconds;
    const double t1 = scheduled_t + options.half_window_seconds;
    const auto expected = static_cast<std::size_t>(std::floor((t1 - t0) * options.rate_hz + 1e-9));

    for (const auto& pieces : acc_mags) {
        if (pieces.empty()) continue;
        SensorTrace window;
        try {
            window = slice_resample(pieces, t0, t1, options.rate_hz, Aggregator::mean);
        } catch (const ValidationError&) {
            continue;
        }
        if (window.values.size() != expected || std::abs(window.start_time - t0) > 1e-6) continue;
        const auto seg = igts_topdown(with_complement(window.values), 1);
        est.per_participant.push_back(t0 + static_cast<double>(seg.boundaries.front()) / options.rate_hz);
    }
    est.n_participants_used = est.per_participant.size();
    if (est.per_participant.empty()) {
        est.fallback = true;
        est.time = scheduled_t;
    } else {
        est.time = lower_median(est.per_participant);
    }
    return est;
}

}  // namespace engage
