#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "engage/qp.hpp"
#include "engage/types.hpp"

namespace engage {

struct CvxEdaParams {
    double tau0 = 2.0;        // slow (decay) time constant, s
    double tau1 = 0.7;        // fast (rise) time constant, s
    double delta_knot = 10.0; // tonic spline knot spacing, s
    double alpha = 8e-4;      // sparsity weight on the driver
    double gamma = 1e-2;      // ridge weight on the spline coefficients
    QpSettings solver{};
};

/// All series share the 4 Hz grid of the input trace.
struct EdaDecomposition {
    double start_time = 0.0;
    double sample_rate = 4.0;
    std::vector<double> mixed;
    std::vector<double> tonic;
    std::vector<double> phasic;
    std::vector<double> driver;
    std::vector<double> residual;
    double objective = 0.0;

    std::size_t size() const noexcept { return mixed.size(); }
};

/// Convex tonic/phasic decomposition of a (median-filtered) 4 Hz EDA trace.
EdaDecomposition cvxeda_decompose(const SensorTrace& eda, const CvxEdaParams& params = {});

/// The quadratic program solved by cvxeda_decompose, over x = [q, d, l] where
/// phasic = Mq, driver = Aq and tonic = Cd + Bl. Exposed for testing.
struct CvxEdaProblem {
    QpProblem qp;
    SparseMatrix M;  // n x n, phasic from q
    SparseMatrix A;  // n x n, driver from q
    SparseMatrix B;  // n x nB, tonic spline basis
    Eigen::MatrixXd C;  // n x 2, offset and linear drift
};
CvxEdaProblem build_cvxeda_problem(std::span<const double> y, double sample_rate, const CvxEdaParams& params = {});

struct ZStats {
    double mean = 0.0;
    double sd = 0.0;  // population
};

ZStats zstats(std::span<const double> x);
/// (x - mean) / sd; all zeros when sd = 0.
std::vector<double> zscore(std::span<const double> x, const ZStats& stats);
std::vector<double> zscore(std::span<const double> x);

struct EdaNormalization {
    ZStats mixed;
    ZStats tonic;
    ZStats phasic;
};

/// Statistics of one session.
EdaNormalization normalization_stats(const EdaDecomposition& d);
/// Statistics pooled over several sessions (e.g. all sessions of one participant).
EdaNormalization normalization_stats(std::span<const EdaDecomposition* const> sessions);

/// Z-scores mixed, tonic and phasic with the session's own statistics.
EdaDecomposition normalize_eda(const EdaDecomposition& d);
/// Z-scores mixed, tonic and phasic with externally supplied statistics.
EdaDecomposition normalize_eda(const EdaDecomposition& d, const EdaNormalization& stats);

struct Peak {
    std::size_t index = 0;
    double amplitude = 0.0;
};

/// Strict local maxima with value >= min_amplitude; a plateau counts once, at its first index.
std::vector<Peak> detect_scr_peaks(std::span<const double> x, double min_amplitude = 0.01);

struct ArousalProfile {
    double window_seconds = 60.0;
    std::vector<std::size_t> labels;  // level per window
    std::vector<double> window_max;   // max phasic value per window
    std::size_t num_arouse = 0;
    std::size_t num_unarouse = 0;
    double ratio_arouse = 0.0;
    std::vector<double> level_fractions;
};

/// Number of full windows; the last window absorbs any remainder.
std::size_t window_count(std::size_t n_samples, double sample_rate, double window_seconds);
std::vector<double> window_maxima(std::span<const double> phasic, double sample_rate, double window_seconds);

/// K - 1 ascending cut points at the k/K quantiles (linear interpolation) of `values`.
std::vector<double> level_thresholds(std::span<const double> values, std::size_t K);
/// Number of thresholds strictly below `value`; ties fall into the lower level.
std::size_t level_of(double value, std::span<const double> thresholds);

/// Splits the session into windows, marks windows holding a peak as arousing and assigns
/// each window a level by its phasic maximum. Without `thresholds` the cut points are
/// the session's own window-maximum quantiles.
ArousalProfile arousal_profile(std::span<const double> phasic, double sample_rate, std::span<const Peak> peaks,
                               std::size_t K = 4, double window_seconds = 60.0,
                               std::optional<std::span<const double>> thresholds = std::nullopt);

}  // namespace engage
