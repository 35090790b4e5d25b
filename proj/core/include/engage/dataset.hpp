#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "engage/features.hpp"
#include "engage/types.hpp"

namespace engage {

/// Row-major matrix with explicit missing values.
using FeatureMatrix = std::vector<std::vector<std::optional<double>>>;

/// One accepted (student, class) session.
struct SessionRecord {
    FeatureVector features;
    Subject subject = Subject::Maths;
    std::optional<EngagementScores> scores;  // absent when no survey was returned
};

struct Dataset {
    std::vector<std::string> columns;
    std::vector<Family> column_families;
    FeatureMatrix X;
    std::vector<EngagementScores> y;
    std::vector<std::string> groups;  // participant ids
    std::vector<std::string> class_ids;
    std::vector<Subject> subjects;

    std::size_t rows() const noexcept { return X.size(); }
    std::size_t cols() const noexcept { return columns.size(); }
    std::vector<double> target(Target t) const;
    Dataset subset(std::span<const std::size_t> rows) const;
    /// Keeps the named columns, in the given order; throws ValidationError for unknown names.
    Dataset select_columns(std::span<const std::string> names) const;
};

/// Labelled sessions only, sorted by (participant_id, class_id), restricted to the columns
/// of the selected families (registry order).
Dataset assemble_dataset(std::span<const SessionRecord> sessions, std::span<const Family> families);

/// Columns: participant_id, class_id, subject, the four scores (empty when unlabelled),
/// then every registry feature (empty when missing).
void write_features_csv(const std::filesystem::path& path, std::span<const SessionRecord> sessions);
std::vector<SessionRecord> read_features_csv(const std::filesystem::path& path);

}  // namespace engage
