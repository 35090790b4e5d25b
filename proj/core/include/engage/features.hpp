#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "engage/eda.hpp"
#include "engage/hrv.hpp"
#include "engage/types.hpp"

namespace engage {

enum class Family { EDA, HRV, ACC, ST, ENV };

std::string_view to_string(Family f);
Family parse_family(std::string_view s);
const std::vector<Family>& all_families();

struct FeatureSpec {
    std::string name;
    Family family;
};

/// Fixed, ordered feature registry (64 entries).
const std::vector<FeatureSpec>& feature_registry();
/// Index in the registry; throws ValidationError for unknown names.
std::size_t feature_index(std::string_view name);

/// Per-session feature values in registry order; absent values are std::nullopt.
struct FeatureVector {
    std::string participant_id;
    std::string class_id;
    std::vector<std::optional<double>> values = std::vector<std::optional<double>>(feature_registry().size());

    void set(std::string_view name, std::optional<double> v);
    std::optional<double> get(std::string_view name) const;
    /// Copies every present value of `other` over this vector.
    void merge(const FeatureVector& other);
};

/// avg/std/n_p/a_p for mixed, tonic and phasic (on the normalized decomposition), auc on the
/// raw decomposition (trapezoid, μS·s), plus the arousal counts and level fractions.
FeatureVector eda_session_features(const EdaDecomposition& normalized, const EdaDecomposition& raw,
                                   const ArousalProfile& profile, double min_peak_amplitude = 0.01);

/// Trapezoidal integral of a uniformly sampled series over time in seconds.
double trapezoid_auc(std::span<const double> x, double sample_rate);

/// Pearson correlation; missing when either input has zero variance or fewer than 3 points.
std::optional<double> pearson_sync(std::span<const double> a, std::span<const double> b);

enum class DtwMode { banded, exact };

/// Sakoe-Chiba half-width max(ceil(0.1 max(n, m)), |n - m|).
std::size_t dtw_band(std::size_t n, std::size_t m, double fraction = 0.1);

/// DTW with local cost |a_i - b_j| and steps (1,0), (0,1), (1,1).
double dtw_distance(std::span<const double> a, std::span<const double> b, DtwMode mode = DtwMode::banded,
                    double band_fraction = 0.1);

struct NamedSeries {
    std::string participant_id;
    std::vector<double> values;
};

/// Pointwise mean of all series except the excluded participant's, truncated to the shortest.
/// Missing when no other series is available.
std::optional<std::vector<double>> peer_average(std::span<const NamedSeries> series, std::string_view exclude);

/// Synchrony of one signal with the teacher and with the peer average. `prefix` selects the
/// feature names: "eda"/"tonic"/"phasic" give {prefix}_pcct, _pccs, _dtwt, _dtws and "acc"
/// gives acc_pcc_t, acc_pcc_s, acc_dtw_t, acc_dtw_s.
FeatureVector sync_features(std::string_view prefix, std::span<const double> student,
                            const std::optional<std::vector<double>>& teacher,
                            const std::optional<std::vector<double>>& peers, double band_fraction = 0.1);

FeatureVector hrv_feature_vector(const std::optional<HrvFeatures>& hrv);

/// Environment (samples with timestamps in [t0, t1)), skin temperature and ACC statistics.
FeatureVector context_features(const EnvTrace* env, const SensorTrace* st, const SensorTrace* acc_mag, double t0,
                               double t1);

enum class Target { behavioural, emotional, cognitive, overall };

inline constexpr std::array<Target, 4> kAllTargets = {Target::behavioural, Target::emotional, Target::cognitive,
                                                      Target::overall};

std::string_view to_string(Target t);
/// Throws ValidationError naming the valid targets.
Target parse_target(std::string_view s);

struct EngagementScores {
    double behavioural = 3.0;
    double emotional = 3.0;
    double cognitive = 3.0;
    double overall = 3.0;

    double get(Target t) const;
};

/// Items 2 and 4 are reversed; each dimension is the item mean shifted into [1, 5].
EngagementScores engagement_scores(const SurveyResponse& survey);

}  // namespace engage
