#include "engage/eda.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "engage/errors.hpp"

namespace engage {
namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

// Three-tap lower-banded matrix with rows i >= 2 holding taps (c0, c1, c2) at i, i-1, i-2.
SparseMatrix banded3(Eigen::Index n, const double (&c)[3]) {
    Triplets t;
    t.reserve(static_cast<std::size_t>(3 * n));
    for (Eigen::Index i = 2; i < n; ++i) {
        t.emplace_back(i, i, c[0]);
        t.emplace_back(i, i - 1, c[1]);
        t.emplace_back(i, i - 2, c[2]);
    }
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

SparseMatrix spline_basis(Eigen::Index n, Eigen::Index knot_step) {
    std::vector<double> tri;
    for (Eigen::Index i = 1; i < knot_step; ++i) tri.push_back(static_cast<double>(i));
    for (Eigen::Index i = knot_step; i > 0; --i) tri.push_back(static_cast<double>(i));
    std::vector<double> spl(2 * tri.size() - 1, 0.0);
    for (std::size_t i = 0; i < tri.size(); ++i) {
        for (std::size_t j = 0; j < tri.size(); ++j) spl[i + j] += tri[i] * tri[j];
    }
    const double peak = *std::max_element(spl.begin(), spl.end());
    for (double& v : spl) v /= peak;

    const auto len = static_cast<Eigen::Index>(spl.size());
    const Eigen::Index first = -(len / 2);
    Triplets t;
    Eigen::Index col = 0;
    for (Eigen::Index knot = 0; knot < n; knot += knot_step, ++col) {
        for (Eigen::Index k = 0; k < len; ++k) {
            const Eigen::Index row = knot + first + k;
            if (row >= 0 && row < n) t.emplace_back(row, col, spl[static_cast<std::size_t>(k)]);
        }
    }
    SparseMatrix b(n, col);
    b.setFromTriplets(t.begin(), t.end());
    return b;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

CvxEdaProblem build_cvxeda_problem(std::span<const double> yv, double sample_rate, const CvxEdaParams& params) {
    const auto n = static_cast<Eigen::Index>(yv.size());
    const double delta = 1.0 / sample_rate;
    const double a1 = 1.0 / std::min(params.tau1, params.tau0);
    const double a0 = 1.0 / std::max(params.tau1, params.tau0);
    if (!(a1 > a0)) throw ValidationError("cvxEDA: time constants must differ");
    const double den = (a1 - a0) * delta * delta;
    const double ar[3] = {(a1 * delta + 2.0) * (a0 * delta + 2.0) / den, (2.0 * a1 * a0 * delta * delta - 8.0) / den,
                          (a1 * delta - 2.0) * (a0 * delta - 2.0) / den};
    const double ma[3] = {1.0, 2.0, 1.0};

    CvxEdaProblem pr;
    pr.A = banded3(n, ar);
    pr.M = banded3(n, ma);
    const auto knot_step = static_cast<Eigen::Index>(std::llround(params.delta_knot / delta));
    if (knot_step < 2) throw ValidationError("cvxEDA: knot spacing too small for the sample rate");
    pr.B = spline_basis(n, knot_step);
    pr.C.resize(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        pr.C(i, 0) = 1.0;
        pr.C(i, 1) = static_cast<double>(i + 1) / static_cast<double>(n);
    }

    const Eigen::Index nb = pr.B.cols();
    const Eigen::Index nv = n + 2 + nb;
    // W = [M C B], the linear map from x to the fitted signal.
    Triplets wt;
    wt.reserve(static_cast<std::size_t>(pr.M.nonZeros() + 2 * n + pr.B.nonZeros()));
    for (Eigen::Index c = 0; c < n; ++c) {
        for (SparseMatrix::InnerIterator it(pr.M, c); it; ++it) wt.emplace_back(it.row(), c, it.value());
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        wt.emplace_back(i, n, pr.C(i, 0));
        wt.emplace_back(i, n + 1, pr.C(i, 1));
    }
    for (Eigen::Index c = 0; c < nb; ++c) {
        for (SparseMatrix::InnerIterator it(pr.B, c); it; ++it) wt.emplace_back(it.row(), n + 2 + c, it.value());
    }
    SparseMatrix W(n, nv);
    W.setFromTriplets(wt.begin(), wt.end());

    const Eigen::Map<const Eigen::VectorXd> y(yv.data(), n);
    pr.qp.P = SparseMatrix(W.transpose() * W);
    for (Eigen::Index c = 0; c < nb; ++c) pr.qp.P.coeffRef(n + 2 + c, n + 2 + c) += params.gamma;
    pr.qp.P.makeCompressed();
    pr.qp.q = -(W.transpose() * y);
    const Eigen::VectorXd colsum = pr.A.transpose() * Eigen::VectorXd::Ones(n);
    pr.qp.q.head(n) += params.alpha * colsum;

    // Constraints: driver rows Aq >= 0, plus two initial-state rows (q0 >= 0 and
    // q1 - r q0 >= 0, r the smaller pole) that keep the free response, and with it
    // the phasic component, non-negative.
    const double r_small = (2.0 - a1 * delta) / (2.0 + a1 * delta);
    Triplets gt;
    gt.reserve(static_cast<std::size_t>(pr.A.nonZeros() + 3));
    for (Eigen::Index c = 0; c < n; ++c) {
        for (SparseMatrix::InnerIterator it(pr.A, c); it; ++it) gt.emplace_back(it.row() - 2, c, it.value());
    }
    const Eigen::Index m = std::max<Eigen::Index>(n - 2, 0) + 2;
    gt.emplace_back(m - 2, 0, 1.0);
    gt.emplace_back(m - 1, 1, 1.0);
    gt.emplace_back(m - 1, 0, -r_small);
    pr.qp.A.resize(m, nv);
    pr.qp.A.setFromTriplets(gt.begin(), gt.end());
    pr.qp.l = Eigen::VectorXd::Zero(m);
    pr.qp.u = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::infinity());
    return pr;
}

EdaDecomposition cvxeda_decompose(const SensorTrace& eda, const CvxEdaParams& params) {
    if (std::abs(eda.sample_rate - 4.0) > 1e-9) throw ValidationError("cvxEDA expects a 4 Hz EDA trace");
    if (eda.size() < 40) throw ValidationError("cvxEDA needs at least 40 samples");

    const CvxEdaProblem pr = build_cvxeda_problem(eda.values, eda.sample_rate, params);
    const QpResult res = solve_qp(pr.qp, params.solver);

    const auto n = static_cast<Eigen::Index>(eda.size());
    const Eigen::Index nb = pr.B.cols();
    const Eigen::VectorXd q = res.x.head(n);
    const Eigen::VectorXd d = res.x.segment(n, 2);
    const Eigen::VectorXd l = res.x.tail(nb);

    EdaDecomposition out;
    out.start_time = eda.start_time;
    out.sample_rate = eda.sample_rate;
    out.mixed = eda.values;
    out.phasic = to_std(pr.M * q);
    out.driver = to_std(pr.A * q);
    out.tonic = to_std(pr.C * d + pr.B * l);
    out.residual.resize(eda.size());
    for (std::size_t i = 0; i < eda.size(); ++i) out.residual[i] = out.mixed[i] - out.tonic[i] - out.phasic[i];
    const Eigen::Map<const Eigen::VectorXd> y(eda.values.data(), n);
    out.objective = res.objective + 0.5 * y.squaredNorm();
    return out;
}

ZStats zstats(std::span<const double> x) {
    ZStats s;
    if (x.empty()) return s;
    s.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(x.size()));
    return s;
}

std::vector<double> zscore(std::span<const double> x, const ZStats& s) {
    std::vector<double> out(x.size(), 0.0);
    if (s.sd > 0.0) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - s.mean) / s.sd;
    }
    return out;
}

std::vector<double> zscore(std::span<const double> x) { return zscore(x, zstats(x)); }

EdaNormalization normalization_stats(const EdaDecomposition& d) {
    return {zstats(d.mixed), zstats(d.tonic), zstats(d.phasic)};
}

EdaNormalization normalization_stats(std::span<const EdaDecomposition* const> sessions) {
    auto pooled = [&](auto member) {
        std::vector<double> all;
        for (const auto* s : sessions) {
            const auto& v = s->*member;
            all.insert(all.end(), v.begin(), v.end());
        }
        return zstats(all);
    };
    return {pooled(&EdaDecomposition::mixed), pooled(&EdaDecomposition::tonic), pooled(&EdaDecomposition::phasic)};
}

EdaDecomposition normalize_eda(const EdaDecomposition& d) { return normalize_eda(d, normalization_stats(d)); }

EdaDecomposition normalize_eda(const EdaDecomposition& d, const EdaNormalization& s) {
    EdaDecomposition out = d;
    out.mixed = zscore(d.mixed, s.mixed);
    out.tonic = zscore(d.tonic, s.tonic);
    out.phasic = zscore(d.phasic, s.phasic);
    return out;
}

std::vector<Peak> detect_scr_peaks(std::span<const double> x, double min_amplitude) {
    if (min_amplitude < 0.0) throw ValidationError("peak threshold must be non-negative");
    std::vector<Peak> peaks;
    const std::size_t n = x.size();
    std::size_t i = 1;
    while (i + 1 < n) {
        if (!(x[i] > x[i - 1])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && x[j + 1] == x[i]) ++j;
        if (j + 1 < n && x[j + 1] < x[i] && x[i] >= min_amplitude) peaks.push_back({i, x[i]});
        i = j + 1;
    }
    return peaks;
}

std::size_t window_count(std::size_t n_samples, double sample_rate, double window_seconds) {
    const auto w = static_cast<std::size_t>(std::llround(window_seconds * sample_rate));
    if (w == 0) throw ValidationError("arousal window shorter than one sample");
    return n_samples / w;
}

std::vector<double> window_maxima(std::span<const double> phasic, double sample_rate, double window_seconds) {
    const std::size_t nw = window_count(phasic.size(), sample_rate, window_seconds);
    if (nw == 0) throw ValidationError("session shorter than one arousal window");
    const auto w = static_cast<std::size_t>(std::llround(window_seconds * sample_rate));
    std::vector<double> out(nw);
    for (std::size_t k = 0; k < nw; ++k) {
        const std::size_t lo = k * w;
        const std::size_t hi = k + 1 == nw ? phasic.size() : lo + w;
        out[k] = *std::max_element(phasic.begin() + static_cast<std::ptrdiff_t>(lo),
                                   phasic.begin() + static_cast<std::ptrdiff_t>(hi));
    }
    return out;
}

std::vector<double> level_thresholds(std::span<const double> values, std::size_t K) {
    if (K < 2) throw ValidationError("need at least two arousal levels");
    if (values.empty()) throw ValidationError("no values to derive arousal levels from");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    std::vector<double> cuts;
    for (std::size_t k = 1; k < K; ++k) {
        const double pos = static_cast<double>(k) / static_cast<double>(K) * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        cuts.push_back(v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]));
    }
    return cuts;
}

std::size_t level_of(double value, std::span<const double> thresholds) {
    return static_cast<std::size_t>(std::count_if(thresholds.begin(), thresholds.end(),
                                                  [&](double t) { return t < value; }));
}

ArousalProfile arousal_profile(std::span<const double> phasic, double sample_rate, std::span<const Peak> peaks,
                               std::size_t K, double window_seconds,
                               std::optional<std::span<const double>> thresholds) {
    if (K < 2) throw ValidationError("need at least two arousal levels");
    ArousalProfile p;
    p.window_seconds = window_seconds;
    p.window_max = window_maxima(phasic, sample_rate, window_seconds);
    const std::size_t nw = p.window_max.size();
    const auto w = static_cast<std::size_t>(std::llround(window_seconds * sample_rate));

    std::vector<bool> arousing(nw, false);
    for (const auto& pk : peaks) {
        if (pk.index >= phasic.size()) throw ValidationError("peak index outside the session");
        arousing[std::min(pk.index / w, nw - 1)] = true;
    }
    p.num_arouse = static_cast<std::size_t>(std::count(arousing.begin(), arousing.end(), true));
    p.num_unarouse = nw - p.num_arouse;
    p.ratio_arouse = static_cast<double>(p.num_arouse) / static_cast<double>(std::max<std::size_t>(1, p.num_unarouse));

    std::vector<double> cuts;
    if (thresholds) {
        if (thresholds->size() + 1 != K) throw ValidationError("expected K - 1 arousal thresholds");
        cuts.assign(thresholds->begin(), thresholds->end());
    } else {
        cuts = level_thresholds(p.window_max, K);
    }
    std::vector<std::size_t> counts(K, 0);
    for (double m : p.window_max) {
        const std::size_t lvl = level_of(m, cuts);
        p.labels.push_back(lvl);
        ++counts[lvl];
    }
    for (std::size_t c : counts) p.level_fractions.push_back(static_cast<double>(c) / static_cast<double>(nw));
    return p;
}

}  // namespace engage
