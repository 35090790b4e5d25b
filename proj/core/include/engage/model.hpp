#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "engage/dataset.hpp"

namespace engage {

/// Column medians over the given rows, ignoring missing values (0 for an all-missing column).
std::vector<double> column_medians(const FeatureMatrix& X, std::span<const std::size_t> rows);
/// Dense copy of the given rows with missing values replaced by `fill`.
Eigen::MatrixXd impute(const FeatureMatrix& X, std::span<const std::size_t> rows, std::span<const double> fill);

struct GbmParams {
    int num_leaves = 15;
    double learning_rate = 0.1;
    int n_rounds = 100;
    int min_samples_leaf = 5;
    std::uint64_t seed = 0;
};

void validate(const GbmParams& p);

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // rows with x <= threshold go left
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output (mean residual)
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
    std::size_t n_leaves() const;
};

struct GbmModel {
    std::vector<std::string> columns;
    std::vector<double> medians;
    double base_score = 0.0;
    double learning_rate = 0.1;
    std::vector<RegressionTree> trees;
    GbmParams params;

    /// Uses the first `n_trees` trees (all by default).
    std::vector<double> predict(const Eigen::MatrixXd& X, std::size_t n_trees = static_cast<std::size_t>(-1)) const;
    /// Imputes missing values with the stored medians; `columns` must equal the training columns.
    std::vector<double> predict(const FeatureMatrix& X, std::span<const std::string> columns,
                                std::size_t n_trees = static_cast<std::size_t>(-1)) const;
    /// Split counts per column.
    std::vector<std::size_t> importance() const;
};

/// Leaf-wise squared-error gradient boosting with exact split search.
/// Stops early when a tree cannot split its root.
GbmModel fit_gbm(const Eigen::MatrixXd& X, std::span<const double> y, const GbmParams& params,
                 std::vector<std::string> columns = {});
/// Fits on the given rows of a matrix with missing values; medians come from those rows.
GbmModel fit_gbm(const FeatureMatrix& X, std::span<const std::size_t> rows, std::span<const double> y,
                 const GbmParams& params, std::vector<std::string> columns);

/// Columns by descending split count; ties keep column order.
std::vector<std::pair<std::string, std::size_t>> feature_importance(const GbmModel& model);
/// The first min(k, #non-zero) names of feature_importance.
std::vector<std::string> top_features(const GbmModel& model, std::size_t k = 10);

void save_model(const std::filesystem::path& path, const GbmModel& model);
GbmModel load_model(const std::filesystem::path& path);

/// Ordinary least squares on standardized columns with a small ridge term.
struct LinearModel {
    std::vector<double> mean;
    std::vector<double> scale;
    std::vector<double> beta;  // standardized units
    double intercept = 0.0;    // equals the training target mean

    std::vector<double> predict(const Eigen::MatrixXd& X) const;
    /// Coefficients and intercept in the original column units.
    std::pair<std::vector<double>, double> original_coefficients() const;
};

LinearModel fit_linear(const Eigen::MatrixXd& X, std::span<const double> y, double ridge = 1e-8);

struct AveragePredictor {
    double value = 0.0;
    std::vector<double> predict(std::size_t n) const { return std::vector<double>(n, value); }
};

AveragePredictor baseline_average(std::span<const double> y_train);

/// Draws uniformly from the training targets with its own seeded stream.
class RandomPredictor {
public:
    RandomPredictor(std::vector<double> pool, std::uint64_t seed);
    std::vector<double> predict(std::size_t n);

private:
    std::vector<double> pool_;
    std::mt19937_64 rng_;
};

RandomPredictor baseline_random(std::span<const double> y_train, std::uint64_t seed);

}  // namespace engage
