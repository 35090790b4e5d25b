#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "engage/timeutil.hpp"
#include "engage/types.hpp"

namespace engage {

/// Local wall-clock interval in which recordings are retained.
struct SchoolDayWindow {
    double start_seconds = 9 * 3600.0;            // 09:00
    double end_seconds = 15 * 3600.0 + 35 * 60.0;  // 15:35
};

struct E4LoadOptions {
    TimeZone tz{};
    SchoolDayWindow window{};
    double min_segment_seconds = 15.0;
};

/// Reads one E4 export directory (EDA.csv, BVP.csv, TEMP.csv, ACC.csv; any subset) as-is.
Segment load_e4_segment(const std::filesystem::path& dir);

/// Loads a participant-day. `dir` either holds the channel files directly (one segment)
/// or one subdirectory per segment. Samples outside the school-day window are clipped and
/// segments shorter than `min_segment_seconds` are dropped.
ParticipantDay load_e4_day(const std::filesystem::path& dir, const std::string& participant_id, Role role,
                           const E4LoadOptions& options = {});

void write_e4_segment(const std::filesystem::path& dir, const Segment& segment);
/// Inverse of load_e4_day: single segment written flat, several as segment_NNN subdirectories.
void write_e4_day(const std::filesystem::path& dir, const ParticipantDay& day);

inline constexpr const char* kEnvHeader = "timestamp,room_id,temp_c,humidity_pct,co2_ppm,sound_db";
inline constexpr const char* kScheduleHeader =
    "class_id,room_id,subject,date,scheduled_start,scheduled_end,teacher_id,participant_ids";
inline constexpr const char* kSurveyHeader =
    "participant_id,class_id,submitted_at,q1,q2,q3,q4,q5,completion_seconds";

/// One EnvTrace per room, in order of first appearance.
std::vector<EnvTrace> load_env_csv(const std::filesystem::path& path);
void write_env_csv(const std::filesystem::path& path, std::span<const EnvTrace> rooms);

/// scheduled_start / scheduled_end accept UTC seconds or local "HH:MM[:SS]" on `date`.
std::vector<ClassInfo> load_schedule(const std::filesystem::path& path, TimeZone tz = {});
std::vector<SurveyResponse> load_surveys(const std::filesystem::path& path);
void write_schedule(const std::filesystem::path& path, std::span<const ClassInfo> classes);
void write_surveys(const std::filesystem::path& path, std::span<const SurveyResponse> surveys);

struct ScheduleAndSurveys {
    std::vector<ClassInfo> classes;
    std::vector<SurveyResponse> surveys;
};

/// Loads both files and checks that every survey refers to a scheduled class.
ScheduleAndSurveys load_schedule_and_surveys(const std::filesystem::path& schedule_path,
                                             const std::filesystem::path& survey_path, TimeZone tz = {});

}  // namespace engage
