#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "engage/eval.hpp"

namespace engage {

/// Everything one `engage eval` invocation produced.
struct EvalRun {
    std::string scheme = "nested_cv";
    EvalOptions options{};
    std::vector<EvalReport> reports;  // all selected families, one per target
    std::vector<RegimeResult> regimes;
};

/// Self-describing JSON document of the run (stable key order, shortest round-trip numbers).
std::string report_json(const EvalRun& run);

inline constexpr const char* kTable6Header =
    "dimension,gbm_mae,linear_mae,average_mae,random_mae,gbm_rmse,linear_rmse,average_rmse,random_rmse";
inline constexpr const char* kTable7Header =
    "regime,families,subject,n_rows,behavioural_mae,behavioural_rmse,emotional_mae,emotional_rmse,"
    "cognitive_mae,cognitive_rmse,overall_mae,overall_rmse,notice";
inline constexpr const char* kRegimeTableHeader =
    "regime,families,subject,target,predictor,mae,rmse,n_rows,n_groups,notice";
inline constexpr const char* kParticipantHeader =
    "scheme,regime,target,participant_id,n,mae,rmse,median,q1,q3,min,max,average_mae";

/// Writes table6.csv, table7.csv, regime_table.csv and per_participant_errors.csv from a
/// report document. Throws IoError when the directory cannot be written and
/// ValidationError when the document is not an engage report.
void emit_report_files(std::string_view json_text, const std::filesystem::path& out_dir);

/// report.json at `json_path` plus the companion tables in the same directory.
void write_report(const EvalRun& run, const std::filesystem::path& json_path);

}  // namespace engage
