#include "engage/hrv.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "engage/errors.hpp"

namespace engage {

std::vector<double> detect_beats(const SensorTrace& bvp, const BeatDetectionOptions& opt) {
    if (bvp.duration() < 2.0) throw ValidationError("BVP trace shorter than 2 s");
    const auto& x = bvp.values;
    const std::size_t n = x.size();
    const auto half = static_cast<std::size_t>(std::llround(opt.window_seconds * bvp.sample_rate)) / 2;

    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
    auto rolling_mean = [&](std::size_t i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n, i + half + 1);
        return (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
    };

    std::vector<std::size_t> candidates;
    std::size_t i = 0;
    while (i < n) {
        if (!(x[i] > rolling_mean(i))) {
            ++i;
            continue;
        }
        std::size_t best = i;
        while (i < n && x[i] > rolling_mean(i)) {
            if (x[i] > x[best]) best = i;
            ++i;
        }
        candidates.push_back(best);
    }

    // Drop shoulders such as the dicrotic notch: weak relative to the typical candidate.
    if (!candidates.empty() && opt.min_relative_prominence > 0.0) {
        std::vector<double> prom(candidates.size());
        for (std::size_t k = 0; k < candidates.size(); ++k) prom[k] = x[candidates[k]] - rolling_mean(candidates[k]);
        auto sorted = prom;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
        const double cut = opt.min_relative_prominence * sorted[sorted.size() / 2];
        std::vector<std::size_t> strong;
        for (std::size_t k = 0; k < candidates.size(); ++k) {
            if (prom[k] >= cut) strong.push_back(candidates[k]);
        }
        candidates = std::move(strong);
    }

    const double refractory = opt.refractory_seconds * bvp.sample_rate;
    std::vector<std::size_t> kept;
    for (std::size_t c : candidates) {
        if (!kept.empty() && static_cast<double>(c - kept.back()) < refractory) {
            if (x[c] > x[kept.back()]) kept.back() = c;
            continue;
        }
        kept.push_back(c);
    }

    std::vector<double> beats;
    beats.reserve(kept.size());
    for (std::size_t k : kept) {
        // Parabolic refinement of the peak position between samples.
        double offset = 0.0;
        if (k > 0 && k + 1 < n) {
            const double den = x[k - 1] - 2.0 * x[k] + x[k + 1];
            if (den < 0.0) offset = std::clamp(0.5 * (x[k - 1] - x[k + 1]) / den, -0.5, 0.5);
        }
        beats.push_back(bvp.start_time + (static_cast<double>(k) + offset) / bvp.sample_rate);
    }
    return beats;
}

IbiSeries ibi_from_beats(std::span<const double> beat_times, const IbiOptions& opt) {
    if (beat_times.size() < 3) throw ValidationError("need at least 3 beats");
    if (!std::is_sorted(beat_times.begin(), beat_times.end())) throw ValidationError("beat times must be sorted");
    std::vector<double> rr(beat_times.size() - 1);
    std::vector<bool> valid(rr.size());
    for (std::size_t i = 0; i < rr.size(); ++i) {
        rr[i] = (beat_times[i + 1] - beat_times[i]) * 1000.0;
        valid[i] = rr[i] >= opt.min_ms && rr[i] <= opt.max_ms;
    }
    const auto first = static_cast<std::size_t>(std::find(valid.begin(), valid.end(), true) - valid.begin());
    if (first == rr.size()) throw ValidationError("no valid inter-beat interval");
    std::size_t last = rr.size() - 1;
    while (!valid[last]) --last;
    if (std::count(valid.begin(), valid.end(), true) < 2) throw ValidationError("fewer than 2 valid inter-beat intervals");

    IbiSeries out;
    std::size_t prev_valid = first;
    for (std::size_t i = first; i <= last; ++i) {
        if (valid[i]) {
            out.intervals.push_back(rr[i]);
            out.flags.push_back(IbiFlag::detected);
            prev_valid = i;
            continue;
        }
        std::size_t next_valid = i + 1;
        while (!valid[next_valid]) ++next_valid;
        const double frac = static_cast<double>(i - prev_valid) / static_cast<double>(next_valid - prev_valid);
        out.intervals.push_back(rr[prev_valid] + frac * (rr[next_valid] - rr[prev_valid]));
        out.flags.push_back(IbiFlag::interpolated);
    }
    out.beat_times.push_back(beat_times[first]);
    for (double v : out.intervals) out.beat_times.push_back(out.beat_times.back() + v / 1000.0);
    return out;
}

HrvTimeFeatures hrv_time_features(std::span<const double> rr) {
    if (rr.size() < 3) throw ValidationError("need at least 3 intervals for HRV features");
    const auto n = static_cast<double>(rr.size());
    HrvTimeFeatures f;
    f.meani = std::accumulate(rr.begin(), rr.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : rr) ss += (v - f.meani) * (v - f.meani);
    f.sdnn = std::sqrt(ss / n);
    f.bpm = 60000.0 / f.meani;

    std::vector<double> d(rr.size() - 1);
    for (std::size_t i = 0; i + 1 < rr.size(); ++i) d[i] = rr[i + 1] - rr[i];
    const auto nd = static_cast<double>(d.size());
    double sq = 0.0;
    double sum = 0.0;
    std::size_t over50 = 0;
    std::size_t over20 = 0;
    for (double v : d) {
        sq += v * v;
        sum += v;
        if (std::abs(v) > 50.0) ++over50;
        if (std::abs(v) > 20.0) ++over20;
    }
    f.rmssd = std::sqrt(sq / nd);
    const double dmean = sum / nd;
    double dss = 0.0;
    for (double v : d) dss += (v - dmean) * (v - dmean);
    f.sdsd = std::sqrt(dss / nd);
    f.pnn50 = 100.0 * static_cast<double>(over50) / nd;
    f.pnn20 = 100.0 * static_cast<double>(over20) / nd;
    return f;
}

HrvTimeFeatures hrv_time_features(const IbiSeries& ibi) { return hrv_time_features(ibi.intervals); }

Spectrum welch_psd(std::span<const double> x, double fs, std::size_t L, double overlap) {
    if (L < 2 || x.size() < L) throw ValidationError("series shorter than one Welch segment");
    const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(L) * (1.0 - overlap))));
    std::vector<double> w(L);
    double wss = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(L));
        wss += w[i] * w[i];
    }
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());

    Eigen::FFT<double> fft;
    std::vector<double> seg(L);
    std::vector<std::complex<double>> spec;
    const std::size_t nbins = L / 2 + 1;
    Spectrum s;
    s.resolution = fs / static_cast<double>(L);
    s.density.assign(nbins, 0.0);
    std::size_t count = 0;
    for (std::size_t start = 0; start + L <= x.size(); start += step, ++count) {
        double seg_mean = 0.0;
        for (std::size_t i = 0; i < L; ++i) seg_mean += x[start + i] - mean;
        seg_mean /= static_cast<double>(L);
        for (std::size_t i = 0; i < L; ++i) seg[i] = (x[start + i] - mean - seg_mean) * w[i];
        fft.fwd(spec, seg);
        for (std::size_t k = 0; k < nbins; ++k) {
            const bool edge = k == 0 || (L % 2 == 0 && k == L / 2);
            s.density[k] += (edge ? 1.0 : 2.0) * std::norm(spec[k]) / (fs * wss);
        }
    }
    for (std::size_t k = 0; k < nbins; ++k) {
        s.density[k] /= static_cast<double>(count);
        s.frequency.push_back(static_cast<double>(k) * s.resolution);
    }
    return s;
}

double band_power(const Spectrum& s, double lo, double hi, bool closed_hi) {
    double p = 0.0;
    for (std::size_t k = 0; k < s.density.size(); ++k) {
        const double f = s.frequency[k];
        if (f >= lo && (f < hi || (closed_hi && f <= hi))) p += s.density[k] * s.resolution;
    }
    return p;
}

HrvFreqFeatures hrv_freq_features(const IbiSeries& ibi, const WelchOptions& opt) {
    if (ibi.intervals.size() < 3) throw ValidationError("need at least 3 intervals for HRV features");
    // Each interval is placed at the beat that closes it.
    const double t_first = ibi.beat_times[1];
    const double t_last = ibi.beat_times.back();
    if (t_last - ibi.beat_times.front() < opt.min_duration_seconds) {
        throw ValidationError("interval series too short for frequency-domain HRV");
    }
    std::vector<double> grid;
    std::size_t j = 1;
    for (double t = t_first; t <= t_last + 1e-9; t = t_first + static_cast<double>(grid.size()) / opt.resample_hz) {
        while (j + 1 < ibi.beat_times.size() && ibi.beat_times[j + 1] < t) ++j;
        const std::size_t k = j - 1;  // interval ending at beat j
        if (k + 1 >= ibi.intervals.size()) {
            grid.push_back(ibi.intervals.back());
            continue;
        }
        const double ta = ibi.beat_times[j];
        const double tb = ibi.beat_times[j + 1];
        const double frac = tb > ta ? std::clamp((t - ta) / (tb - ta), 0.0, 1.0) : 0.0;
        grid.push_back(ibi.intervals[k] + frac * (ibi.intervals[k + 1] - ibi.intervals[k]));
    }
    const auto L = static_cast<std::size_t>(std::llround(opt.segment_seconds * opt.resample_hz));
    const Spectrum s = welch_psd(grid, opt.resample_hz, std::min(L, grid.size()), opt.overlap);

    HrvFreqFeatures f;
    f.lf_power = band_power(s, 0.04, 0.15);
    f.hf_power = band_power(s, 0.15, 0.40, true);
    if (f.hf_power >= 1e-12) f.ratio_lf_hf = f.lf_power / f.hf_power;
    return f;
}

HrvFeatures hrv_features(const IbiSeries& ibi, const WelchOptions& opt) {
    HrvFeatures f;
    f.time = hrv_time_features(ibi);
    if (ibi.beat_times.back() - ibi.beat_times.front() >= opt.min_duration_seconds) f.freq = hrv_freq_features(ibi, opt);
    return f;
}

}  // namespace engage
