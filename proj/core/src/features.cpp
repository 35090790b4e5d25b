#include "engage/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "engage/errors.hpp"

namespace engage {
namespace {

std::vector<FeatureSpec> build_registry() {
    std::vector<FeatureSpec> r;
    const char* signals[] = {"eda", "tonic", "phasic"};
    for (const char* stat : {"avg", "std", "n_p", "a_p", "auc"}) {
        for (const char* s : signals) r.push_back({std::string(s) + "_" + stat, Family::EDA});
    }
    r.push_back({"num_arouse", Family::EDA});
    r.push_back({"ratio_arouse", Family::EDA});
    for (int k = 0; k < 4; ++k) r.push_back({"level_" + std::to_string(k), Family::EDA});
    for (const char* sync : {"pcct", "pccs", "dtwt", "dtws"}) {
        for (const char* s : signals) r.push_back({std::string(s) + "_" + sync, Family::EDA});
    }
    for (const char* h : {"bpm", "meani", "sdnn", "lf_power", "hf_power", "ratio_lf_hf", "rmssd", "sdsd", "pnn50",
                          "pnn20"}) {
        r.push_back({std::string("hrv_") + h, Family::HRV});
    }
    for (const char* a : {"avg", "std", "dtw_t", "dtw_s", "pcc_t", "pcc_s"}) {
        r.push_back({std::string("acc_") + a, Family::ACC});
    }
    for (const char* s : {"avg", "max", "min"}) r.push_back({std::string("sktemp_") + s, Family::ST});
    for (const char* v : {"co2", "temp", "humid", "sound"}) {
        for (const char* s : {"mean", "max", "min"}) r.push_back({std::string(s) + "_" + v, Family::ENV});
    }
    return r;
}

const std::unordered_map<std::string_view, std::size_t>& registry_index() {
    static const auto index = [] {
        std::unordered_map<std::string_view, std::size_t> m;
        const auto& reg = feature_registry();
        for (std::size_t i = 0; i < reg.size(); ++i) m.emplace(reg[i].name, i);
        return m;
    }();
    return index;
}

double mean_of(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double pop_std(std::span<const double> x) {
    const double m = mean_of(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size()));
}

}  // namespace

std::string_view to_string(Family f) {
    switch (f) {
        case Family::EDA: return "EDA";
        case Family::HRV: return "HRV";
        case Family::ACC: return "ACC";
        case Family::ST: return "ST";
        case Family::ENV: return "ENV";
    }
    return "?";
}

Family parse_family(std::string_view s) {
    for (Family f : all_families()) {
        if (to_string(f) == s) return f;
    }
    throw ValidationError("unknown sensor family '" + std::string(s) + "' (expected EDA, HRV, ACC, ST or ENV)");
}

const std::vector<Family>& all_families() {
    static const std::vector<Family> v = {Family::EDA, Family::HRV, Family::ACC, Family::ST, Family::ENV};
    return v;
}

const std::vector<FeatureSpec>& feature_registry() {
    static const std::vector<FeatureSpec> reg = build_registry();
    return reg;
}

std::size_t feature_index(std::string_view name) {
    const auto& idx = registry_index();
    const auto it = idx.find(name);
    if (it == idx.end()) throw ValidationError("unknown feature '" + std::string(name) + "'");
    return it->second;
}

void FeatureVector::set(std::string_view name, std::optional<double> v) {
    if (v && !std::isfinite(*v)) v.reset();
    values[feature_index(name)] = v;
}

std::optional<double> FeatureVector::get(std::string_view name) const { return values[feature_index(name)]; }

void FeatureVector::merge(const FeatureVector& other) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (other.values[i]) values[i] = other.values[i];
    }
}

double trapezoid_auc(std::span<const double> x, double sample_rate) {
    double area = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (x[i - 1] + x[i]);
    return area / sample_rate;
}

FeatureVector eda_session_features(const EdaDecomposition& normalized, const EdaDecomposition& raw,
                                   const ArousalProfile& profile, double min_peak_amplitude) {
    if (normalized.size() == 0) throw ValidationError("empty EDA decomposition");
    FeatureVector f;
    const std::pair<const char*, const std::vector<double>*> signals[] = {
        {"eda", &normalized.mixed}, {"tonic", &normalized.tonic}, {"phasic", &normalized.phasic}};
    const std::vector<double>* raw_signals[] = {&raw.mixed, &raw.tonic, &raw.phasic};
    for (std::size_t s = 0; s < 3; ++s) {
        const std::string name = signals[s].first;
        const auto& x = *signals[s].second;
        f.set(name + "_avg", mean_of(x));
        f.set(name + "_std", pop_std(x));
        const auto peaks = detect_scr_peaks(x, min_peak_amplitude);
        f.set(name + "_n_p", static_cast<double>(peaks.size()));
        if (!peaks.empty()) {
            double sum = 0.0;
            for (const auto& p : peaks) sum += p.amplitude;
            f.set(name + "_a_p", sum / static_cast<double>(peaks.size()));
        }
        f.set(name + "_auc", trapezoid_auc(*raw_signals[s], raw.sample_rate));
    }
    f.set("num_arouse", static_cast<double>(profile.num_arouse));
    f.set("ratio_arouse", profile.ratio_arouse);
    if (profile.level_fractions.size() != 4) throw ValidationError("feature registry expects 4 arousal levels");
    for (std::size_t k = 0; k < 4; ++k) f.set("level_" + std::to_string(k), profile.level_fractions[k]);
    return f;
}

std::optional<double> pearson_sync(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = std::min(a.size(), b.size());
    if (n < 3) return std::nullopt;
    a = a.first(n);
    b = b.first(n);
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::size_t dtw_band(std::size_t n, std::size_t m, double fraction) {
    const auto longest = static_cast<double>(std::max(n, m));
    const auto w = static_cast<std::size_t>(std::ceil(fraction * longest - 1e-12));
    return std::max(w, n > m ? n - m : m - n);
}

double dtw_distance(std::span<const double> a, std::span<const double> b, DtwMode mode, double band_fraction) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    if (n == 0 || m == 0) throw ValidationError("DTW of an empty series");
    const std::size_t w = mode == DtwMode::exact ? std::max(n, m) : dtw_band(n, m, band_fraction);
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf);
    std::vector<double> cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        std::fill(cur.begin(), cur.end(), inf);
        const std::size_t lo = i > w ? i - w : 1;
        const std::size_t hi = std::min(m, i + w);
        for (std::size_t j = lo; j <= hi; ++j) {
            const double cost = std::abs(a[i - 1] - b[j - 1]);
            cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

std::optional<std::vector<double>> peer_average(std::span<const NamedSeries> series, std::string_view exclude) {
    std::size_t len = std::numeric_limits<std::size_t>::max();
    std::size_t count = 0;
    for (const auto& s : series) {
        if (s.participant_id == exclude) continue;
        len = std::min(len, s.values.size());
        ++count;
    }
    if (count == 0 || len == 0) return std::nullopt;
    std::vector<double> avg(len, 0.0);
    for (const auto& s : series) {
        if (s.participant_id == exclude) continue;
        for (std::size_t i = 0; i < len; ++i) avg[i] += s.values[i];
    }
    for (double& v : avg) v /= static_cast<double>(count);
    return avg;
}

FeatureVector sync_features(std::string_view prefix, std::span<const double> student,
                            const std::optional<std::vector<double>>& teacher,
                            const std::optional<std::vector<double>>& peers, double band_fraction) {
    const bool acc = prefix == "acc";
    const std::string p(prefix);
    const std::string pcc_t = acc ? "acc_pcc_t" : p + "_pcct";
    const std::string pcc_s = acc ? "acc_pcc_s" : p + "_pccs";
    const std::string dtw_t = acc ? "acc_dtw_t" : p + "_dtwt";
    const std::string dtw_s = acc ? "acc_dtw_s" : p + "_dtws";

    FeatureVector f;
    if (student.empty()) return f;
    const std::vector<double> zs = zscore(student);
    if (teacher && !teacher->empty()) {
        const std::vector<double> zt = zscore(*teacher);
        f.set(pcc_t, pearson_sync(student, *teacher));
        f.set(dtw_t, dtw_distance(zs, zt, DtwMode::banded, band_fraction));
    }
    if (peers && !peers->empty()) {
        const std::vector<double> zp = zscore(*peers);
        f.set(pcc_s, pearson_sync(student, *peers));
        f.set(dtw_s, dtw_distance(zs, zp, DtwMode::banded, band_fraction));
    }
    return f;
}

FeatureVector hrv_feature_vector(const std::optional<HrvFeatures>& hrv) {
    FeatureVector f;
    if (!hrv) return f;
    const auto& t = hrv->time;
    f.set("hrv_bpm", t.bpm);
    f.set("hrv_meani", t.meani);
    f.set("hrv_sdnn", t.sdnn);
    f.set("hrv_rmssd", t.rmssd);
    f.set("hrv_sdsd", t.sdsd);
    f.set("hrv_pnn50", t.pnn50);
    f.set("hrv_pnn20", t.pnn20);
    if (hrv->freq) {
        f.set("hrv_lf_power", hrv->freq->lf_power);
        f.set("hrv_hf_power", hrv->freq->hf_power);
        f.set("hrv_ratio_lf_hf", hrv->freq->ratio_lf_hf);
    }
    return f;
}

FeatureVector context_features(const EnvTrace* env, const SensorTrace* st, const SensorTrace* acc_mag, double t0,
                               double t1) {
    FeatureVector f;
    if (env) {
        std::vector<double> co2, temp, humid, sound;
        for (const auto& s : env->samples) {
            if (s.timestamp < t0 || s.timestamp >= t1) continue;
            co2.push_back(s.co2_ppm);
            temp.push_back(s.temperature_c);
            humid.push_back(s.humidity_pct);
            sound.push_back(s.sound_db);
        }
        const std::pair<const char*, const std::vector<double>*> vars[] = {
            {"co2", &co2}, {"temp", &temp}, {"humid", &humid}, {"sound", &sound}};
        for (const auto& [name, v] : vars) {
            if (v->empty()) continue;
            f.set(std::string("mean_") + name, mean_of(*v));
            f.set(std::string("max_") + name, *std::max_element(v->begin(), v->end()));
            f.set(std::string("min_") + name, *std::min_element(v->begin(), v->end()));
        }
    }
    if (st && !st->empty()) {
        f.set("sktemp_avg", mean_of(st->values));
        f.set("sktemp_max", *std::max_element(st->values.begin(), st->values.end()));
        f.set("sktemp_min", *std::min_element(st->values.begin(), st->values.end()));
    }
    if (acc_mag && !acc_mag->empty()) {
        f.set("acc_avg", mean_of(acc_mag->values));
        f.set("acc_std", pop_std(acc_mag->values));
    }
    return f;
}

std::string_view to_string(Target t) {
    switch (t) {
        case Target::behavioural: return "behavioural";
        case Target::emotional: return "emotional";
        case Target::cognitive: return "cognitive";
        case Target::overall: return "overall";
    }
    return "?";
}

Target parse_target(std::string_view s) {
    for (Target t : kAllTargets) {
        if (to_string(t) == s) return t;
    }
    throw ValidationError("invalid target '" + std::string(s) +
                          "'; valid targets: behavioural, emotional, cognitive, overall, all");
}

double EngagementScores::get(Target t) const {
    switch (t) {
        case Target::behavioural: return behavioural;
        case Target::emotional: return emotional;
        case Target::cognitive: return cognitive;
        case Target::overall: return overall;
    }
    return overall;
}

EngagementScores engagement_scores(const SurveyResponse& s) {
    validate(s);
    const double q1 = s.q[0];
    const double r2 = -s.q[1];
    const double q3 = s.q[2];
    const double r4 = -s.q[3];
    const double q5 = s.q[4];
    EngagementScores e;
    e.behavioural = (q1 + r2) / 2.0 + 3.0;
    e.emotional = (q3 + r4) / 2.0 + 3.0;
    e.cognitive = q5 + 3.0;
    e.overall = (q1 + r2 + q3 + r4 + q5) / 5.0 + 3.0;
    return e;
}

}  // namespace engage
