#include "engage/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "engage/errors.hpp"

namespace engage {

std::string_view to_string(Channel c) {
    switch (c) {
        case Channel::EDA: return "EDA";
        case Channel::BVP: return "BVP";
        case Channel::ACC_X: return "ACC_X";
        case Channel::ACC_Y: return "ACC_Y";
        case Channel::ACC_Z: return "ACC_Z";
        case Channel::ACC_MAG: return "ACC_MAG";
        case Channel::ST: return "ST";
    }
    return "?";
}

void validate(const SensorTrace& trace) {
    if (!(trace.sample_rate > 0.0) || !std::isfinite(trace.sample_rate)) {
        throw ValidationError("sample rate must be positive, got " + std::to_string(trace.sample_rate));
    }
    if (!std::isfinite(trace.start_time)) throw ValidationError("start time is not finite");
    for (std::size_t i = 0; i < trace.values.size(); ++i) {
        if (!std::isfinite(trace.values[i])) {
            throw ValidationError(std::string(to_string(trace.channel)) + " sample " + std::to_string(i) +
                                  " is not finite");
        }
    }
}

const SensorTrace* Segment::find(Channel c) const noexcept {
    for (const auto& t : traces) {
        if (t.channel == c) return &t;
    }
    return nullptr;
}

double Segment::start_time() const noexcept {
    double s = std::numeric_limits<double>::infinity();
    for (const auto& t : traces) s = std::min(s, t.start_time);
    return traces.empty() ? 0.0 : s;
}

double Segment::end_time() const noexcept {
    double e = -std::numeric_limits<double>::infinity();
    for (const auto& t : traces) e = std::max(e, t.end_time());
    return traces.empty() ? 0.0 : e;
}

std::vector<SensorTrace> ParticipantDay::channel(Channel c) const {
    std::vector<SensorTrace> out;
    for (const auto& seg : segments) {
        if (const auto* t = seg.find(c)) out.push_back(*t);
    }
    return out;
}

std::string_view to_string(Role r) { return r == Role::student ? "student" : "teacher"; }

Role parse_role(std::string_view s) {
    if (s == "student") return Role::student;
    if (s == "teacher") return Role::teacher;
    throw ValidationError("unknown role '" + std::string(s) + "'");
}

namespace {
constexpr std::string_view kSubjectNames[] = {"Maths", "English", "Language", "Science",
                                              "Politics", "PE", "Health", "Chapel"};
}

std::string_view to_string(Subject s) { return kSubjectNames[static_cast<int>(s)]; }

Subject parse_subject(std::string_view s) {
    for (int i = 0; i < 8; ++i) {
        if (kSubjectNames[i] == s) return static_cast<Subject>(i);
    }
    throw ValidationError("unknown subject '" + std::string(s) + "'");
}

const std::vector<Subject>& all_subjects() {
    static const std::vector<Subject> subjects = {Subject::Maths,    Subject::English, Subject::Language,
                                                  Subject::Science,  Subject::Politics, Subject::PE,
                                                  Subject::Health,   Subject::Chapel};
    return subjects;
}

void validate(const SurveyResponse& s) {
    for (int i = 0; i < 5; ++i) {
        if (s.q[i] < -2 || s.q[i] > 2) {
            throw ValidationError("survey item q" + std::to_string(i + 1) + " = " + std::to_string(s.q[i]) +
                                  " outside {-2..2} for " + s.participant_id + "/" + s.class_id);
        }
    }
}

}  // namespace engage
