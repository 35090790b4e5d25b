#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "engage/dataset.hpp"
#include "engage/eda.hpp"
#include "engage/hrv.hpp"
#include "engage/io.hpp"
#include "engage/preprocess.hpp"
#include "engage/segment.hpp"

namespace engage {

/// File locations; empty paths default to `<data>/schedule.csv`, `<data>/env.csv`,
/// `<data>/surveys.csv`. Recordings live in `<data>/participants/<id>/<YYYY-MM-DD>/`.
struct DatasetPaths {
    std::filesystem::path data;
    std::filesystem::path schedule;
    std::filesystem::path env;
    std::filesystem::path surveys;
};

enum class NormalizationScope { participant, session };

std::string_view to_string(NormalizationScope s);
NormalizationScope parse_normalization_scope(std::string_view s);

struct PipelineOptions {
    std::optional<TimeZone> tz;  // default: `timezone` in <data>/dataset.cfg, else UTC
    GateThresholds gate{};
    CvxEdaParams cvx{};
    double eda_median_seconds = 5.0;
    double acc_median_seconds = 0.2;
    double st_median_seconds = 0.5;
    bool estimate_boundaries = true;
    ClassBoundaryOptions boundary{};
    double sync_rate_hz = 1.0;
    double dtw_band = 0.1;
    double min_peak_amplitude = 0.01;
    double arousal_window_seconds = 60.0;
    NormalizationScope normalization = NormalizationScope::participant;
    BeatDetectionOptions beats{};
    IbiOptions ibi{};
    WelchOptions welch{};
};

using Logger = std::function<void(const std::string&)>;

struct DatasetIndex {
    DatasetPaths paths;
    TimeZone tz{};
    std::vector<ClassInfo> classes;
    std::vector<SurveyResponse> surveys;
    std::vector<EnvTrace> env;                              // empty when env.csv is absent
    std::map<std::string, std::filesystem::path> recordings;  // participant id -> directory

    const ClassInfo& find_class(std::string_view class_id) const;
    const EnvTrace* find_room(std::string_view room_id) const;
};

/// Reads `key = value` lines (`#` comments) of a dataset description file.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

/// Loads schedule, surveys and environment and lists the participant directories.
/// Throws IoError naming the path when the schedule or survey file is missing.
DatasetIndex open_dataset(const DatasetPaths& paths, std::optional<TimeZone> tz = std::nullopt);

struct ClassBoundaries {
    std::string class_id;
    BoundaryEstimate start;
    BoundaryEstimate end;
};

struct SessionQuality {
    std::string participant_id;
    std::string class_id;
    Role role = Role::student;
    QualityReport report;
};

/// Per-session signals inside the actual class window.
struct SessionAnalysis {
    std::string participant_id;
    std::string class_id;
    Role role = Role::student;
    QualityReport quality;
    EdaDecomposition eda;  // decomposition of the median-filtered window (raw μS)
    std::optional<IbiSeries> ibi;
    std::optional<HrvFeatures> hrv;
    std::optional<SensorTrace> st;
    std::optional<SensorTrace> acc_mag;
};

struct PipelineResult {
    std::vector<ClassInfo> classes;  // actual_start / actual_end filled in
    std::vector<ClassBoundaries> boundaries;
    std::vector<SessionQuality> quality;
    std::vector<SessionRecord> sessions;  // accepted student sessions, sorted by (participant, class)
};

enum class PipelineStage { segment, clean, features };

/// Runs the stages up to `until`, one school day at a time.
PipelineResult run_pipeline(const DatasetIndex& index, const PipelineOptions& options,
                            PipelineStage until = PipelineStage::features, const Logger& log = {});

/// Decomposition, HRV and context signals of one (participant, class) session.
/// Throws ValidationError when the session has no usable EDA in the class window.
SessionAnalysis analyze_session(const DatasetIndex& index, std::string_view participant_id, std::string_view class_id,
                                const PipelineOptions& options);

}  // namespace engage
