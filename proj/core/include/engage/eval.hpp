#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "engage/dataset.hpp"
#include "engage/model.hpp"

namespace engage {

/// Distinct groups shuffled by a seeded stream and dealt round-robin into k folds.
std::vector<std::vector<std::string>> make_group_folds(std::span<const std::string> group_ids, std::size_t k,
                                                       std::uint64_t seed);

/// Throws Error when a group appears on both sides of a split.
void check_disjoint(std::span<const std::string> train_groups, std::span<const std::string> test_groups);

struct Metrics {
    double mae = 0.0;
    double rmse = 0.0;
    std::size_t n = 0;
};

Metrics score_predictions(std::span<const double> y, std::span<const double> y_hat);

struct HyperGrid {
    std::vector<int> num_leaves{7, 15, 31};
    std::vector<double> learning_rates{0.05, 0.1};
    std::vector<int> n_rounds{100, 300};
    int min_samples_leaf = 5;

    std::size_t size() const noexcept { return num_leaves.size() * learning_rates.size() * n_rounds.size(); }
};

struct EvalOptions {
    std::size_t outer_k = 5;
    std::size_t inner_l = 3;
    std::size_t top_k = 10;
    HyperGrid grid{};
    std::uint64_t seed = 42;
};

struct PredictorMetrics {
    Metrics gbm;
    Metrics linear;
    Metrics average;
    Metrics random;
};

struct SplitRecord {
    std::size_t outer_fold = 0;
    std::optional<std::size_t> inner_fold;  // absent for the outer split itself
    std::vector<std::string> train_groups;
    std::vector<std::string> test_groups;
};

struct FoldResult {
    std::size_t fold = 0;
    GbmParams chosen{};
    double inner_mae = 0.0;
    std::size_t inner_fits = 0;  // grid points x inner folds
    std::vector<std::string> selected_features;
    std::vector<std::string> test_groups;
    PredictorMetrics metrics;
};

struct Prediction {
    std::string participant_id;
    std::string class_id;
    std::size_t fold = 0;
    double y = 0.0;
    double gbm = 0.0;
    double linear = 0.0;
    double average = 0.0;
    double random = 0.0;
};

struct ParticipantErrors {
    std::string participant_id;
    std::size_t n = 0;
    double mae = 0.0;
    double rmse = 0.0;
    double median = 0.0;  // of absolute model errors
    double q1 = 0.0;
    double q3 = 0.0;
    double min = 0.0;
    double max = 0.0;
    double average_mae = 0.0;  // average baseline on the same rows
};

struct EvalReport {
    std::string scheme;  // "nested_cv" or "loso"
    Target target = Target::overall;
    std::vector<Family> families;
    std::optional<Subject> subject;
    std::size_t n_rows = 0;
    std::size_t n_groups = 0;
    PredictorMetrics metrics;
    std::vector<FoldResult> folds;
    std::vector<Prediction> predictions;
    std::vector<SplitRecord> splits;
    std::vector<ParticipantErrors> per_participant;
    std::string feature_selection = "top-k by split count, chosen once per outer fold on outer-train";
};

/// Outer k-fold over participant groups; per outer fold an inner L-fold grid search, refit,
/// top-k feature selection by importance and a final retrain on the selected features.
/// The linear baseline uses the same selected features.
EvalReport nested_cv(const Dataset& data, Target target, const EvalOptions& options = {});

/// One fold per participant with fixed hyperparameters on all columns.
EvalReport loso_eval(const Dataset& data, Target target, const GbmParams& params, std::uint64_t seed = 42);

std::vector<ParticipantErrors> participant_breakdown(std::span<const Prediction> predictions);

struct Regime {
    std::string name;
    std::vector<Family> families;
    std::optional<Subject> subject;
};

/// One regime per non-empty, non-comment line: `name FAMILY[+FAMILY...] [subject=Subject]`.
std::vector<Regime> parse_regimes(std::string_view text, const std::string& source = "<regimes>");
std::vector<Regime> load_regimes(const std::filesystem::path& path);

struct RegimeResult {
    Regime regime;
    Target target = Target::overall;
    std::optional<EvalReport> report;  // absent when skipped
    std::string notice;
};

/// Nested CV for every regime x target. Subject regimes keep only that subject's rows and
/// are skipped (with a notice) below `min_subject_sessions` labelled sessions.
std::vector<RegimeResult> regime_sweep(std::span<const SessionRecord> sessions, std::span<const Regime> regimes,
                                       std::span<const Target> targets, const EvalOptions& options = {},
                                       std::size_t min_subject_sessions = 30);

}  // namespace engage
