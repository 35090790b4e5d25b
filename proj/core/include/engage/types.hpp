#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace engage {

enum class Channel { EDA, BVP, ACC_X, ACC_Y, ACC_Z, ACC_MAG, ST };

std::string_view to_string(Channel c);

/// Uniformly sampled single-channel recording.
/// Sample i is taken at start_time + i / sample_rate (UTC seconds).
struct SensorTrace {
    Channel channel = Channel::EDA;
    double start_time = 0.0;
    double sample_rate = 1.0;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    bool empty() const noexcept { return values.empty(); }
    double time_at(std::size_t i) const noexcept { return start_time + static_cast<double>(i) / sample_rate; }
    double duration() const noexcept { return static_cast<double>(values.size()) / sample_rate; }
    double end_time() const noexcept { return start_time + duration(); }
};

/// Throws ValidationError when the rate is not positive or a value is not finite.
void validate(const SensorTrace& trace);

/// Traces recorded together by one device power cycle.
struct Segment {
    std::vector<SensorTrace> traces;

    const SensorTrace* find(Channel c) const noexcept;
    double start_time() const noexcept;
    double end_time() const noexcept;
    double duration() const noexcept { return end_time() - start_time(); }
};

enum class Role { student, teacher };

std::string_view to_string(Role r);
Role parse_role(std::string_view s);

using Date = std::chrono::year_month_day;

struct ParticipantDay {
    std::string participant_id;
    Role role = Role::student;
    Date date{};
    std::vector<Segment> segments;

    /// Every trace of the given channel, in segment order.
    std::vector<SensorTrace> channel(Channel c) const;
};

enum class Subject { Maths, English, Language, Science, Politics, PE, Health, Chapel };

std::string_view to_string(Subject s);
Subject parse_subject(std::string_view s);
const std::vector<Subject>& all_subjects();

struct ClassInfo {
    std::string class_id;
    std::string room_id;
    Subject subject = Subject::Maths;
    Date date{};
    double scheduled_start = 0.0;
    double scheduled_end = 0.0;
    double actual_start = 0.0;
    double actual_end = 0.0;
    std::vector<std::string> enrolled;
    std::optional<std::string> teacher;
};

struct EnvSample {
    double timestamp = 0.0;
    double temperature_c = 0.0;
    double humidity_pct = 0.0;
    double co2_ppm = 0.0;
    double sound_db = 0.0;
};

struct EnvTrace {
    std::string room_id;
    std::vector<EnvSample> samples;
};

struct SurveyResponse {
    std::string participant_id;
    std::string class_id;
    double submitted_at = 0.0;
    int q[5] = {0, 0, 0, 0, 0};
    double completion_seconds = 0.0;
};

/// Throws ValidationError when an item lies outside {-2..2}.
void validate(const SurveyResponse& s);

}  // namespace engage
