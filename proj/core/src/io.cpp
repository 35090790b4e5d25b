#include "engage/io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "engage/csv.hpp"
#include "engage/errors.hpp"

namespace engage {

namespace fs = std::filesystem;

namespace {

struct ChannelFile {
    const char* name;
    Channel channel;
};

constexpr ChannelFile kSingleChannelFiles[] = {
    {"EDA.csv", Channel::EDA}, {"BVP.csv", Channel::BVP}, {"TEMP.csv", Channel::ST}};

bool is_export_dir(const fs::path& dir) {
    for (const auto& f : kSingleChannelFiles) {
        if (fs::exists(dir / f.name)) return true;
    }
    return fs::exists(dir / "ACC.csv");
}

/// Header line: either a single value or `columns` identical comma-separated values.
double parse_header_value(std::string_view line, std::size_t columns, const std::string& file, std::size_t lineno) {
    auto fields = csv::split(line);
    if (fields.size() != 1 && fields.size() != columns) {
        throw ParseError(file, lineno, "malformed header row '" + std::string(line) + "'");
    }
    double v = 0.0;
    try {
        v = csv::parse_double(fields[0], file, lineno);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            if (csv::parse_double(fields[i], file, lineno) != v) {
                throw ParseError(file, lineno, "header columns disagree");
            }
        }
    } catch (const ParseError&) {
        throw ParseError(file, lineno, "malformed header row '" + std::string(line) + "'");
    }
    return v;
}

std::vector<SensorTrace> read_channel_file(const fs::path& path, std::span<const Channel> channels) {
    const std::string file = path.string();
    const std::string text = csv::read_file(path);
    csv::LineReader reader(text);
    std::string_view line;
    const std::size_t ncol = channels.size();

    if (!reader.next(line)) throw ParseError(file, 1, "missing start-time header row");
    const double start = parse_header_value(line, ncol, file, reader.line_number());
    if (!reader.next(line)) throw ParseError(file, 2, "missing sample-rate header row");
    const double rate = parse_header_value(line, ncol, file, reader.line_number());
    if (!(rate > 0.0)) throw ValidationError(file + ": declared sample rate must be positive, got " + csv::format_double(rate));

    std::vector<SensorTrace> traces(ncol);
    for (std::size_t c = 0; c < ncol; ++c) {
        traces[c].channel = channels[c];
        traces[c].start_time = start;
        traces[c].sample_rate = rate;
        traces[c].values.reserve(text.size() / (8 * ncol) + 1);
    }
    while (reader.next(line)) {
        if (csv::trim(line).empty()) continue;
        if (ncol == 1) {
            traces[0].values.push_back(csv::parse_double(line, file, reader.line_number()));
            continue;
        }
        auto fields = csv::split(line);
        if (fields.size() != ncol) {
            throw ParseError(file, reader.line_number(),
                             "expected " + std::to_string(ncol) + " columns, got " + std::to_string(fields.size()));
        }
        for (std::size_t c = 0; c < ncol; ++c) {
            traces[c].values.push_back(csv::parse_double(fields[c], file, reader.line_number()));
        }
    }
    return traces;
}

void write_channel_file(const fs::path& path, std::span<const SensorTrace* const> traces) {
    const std::size_t ncol = traces.size();
    const std::size_t n = traces[0]->values.size();
    std::string out;
    out.reserve(n * ncol * 10 + 64);
    for (int header = 0; header < 2; ++header) {
        const double v = header == 0 ? traces[0]->start_time : traces[0]->sample_rate;
        for (std::size_t c = 0; c < ncol; ++c) {
            if (c) out.push_back(',');
            csv::append_double(out, v);
        }
        out.push_back('\n');
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < ncol; ++c) {
            if (c) out.push_back(',');
            csv::append_double(out, traces[c]->values[i]);
        }
        out.push_back('\n');
    }
    csv::write_file(path, out);
}

/// Keeps samples whose timestamps fall in [w0, w1).
void clip_trace(SensorTrace& t, double w0, double w1) {
    const double n = static_cast<double>(t.values.size());
    const double i0 = std::clamp(std::ceil((w0 - t.start_time) * t.sample_rate - 1e-9), 0.0, n);
    const double i1 = std::clamp(std::ceil((w1 - t.start_time) * t.sample_rate - 1e-9), i0, n);
    const auto a = static_cast<std::size_t>(i0);
    const auto b = static_cast<std::size_t>(i1);
    if (a == 0 && b == t.values.size()) return;
    t.values = std::vector<double>(t.values.begin() + static_cast<std::ptrdiff_t>(a),
                                   t.values.begin() + static_cast<std::ptrdiff_t>(b));
    if (a > 0) t.start_time += static_cast<double>(a) / t.sample_rate;
}

}  // namespace

Segment load_e4_segment(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    Segment seg;
    for (const auto& f : kSingleChannelFiles) {
        const auto path = dir / f.name;
        if (!fs::exists(path)) continue;
        const Channel ch[] = {f.channel};
        auto traces = read_channel_file(path, ch);
        seg.traces.push_back(std::move(traces[0]));
    }
    if (fs::exists(dir / "ACC.csv")) {
        const Channel ch[] = {Channel::ACC_X, Channel::ACC_Y, Channel::ACC_Z};
        for (auto& t : read_channel_file(dir / "ACC.csv", ch)) seg.traces.push_back(std::move(t));
    }
    if (seg.traces.empty()) throw IoError("no E4 channel files in " + dir.string());
    return seg;
}

ParticipantDay load_e4_day(const fs::path& dir, const std::string& participant_id, Role role,
                           const E4LoadOptions& options) {
    if (!fs::is_directory(dir)) throw IoError("participant-day directory not found: " + dir.string());
    std::vector<Segment> raw;
    if (is_export_dir(dir)) {
        raw.push_back(load_e4_segment(dir));
    } else {
        std::vector<fs::path> subdirs;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_directory() && is_export_dir(entry.path())) subdirs.push_back(entry.path());
        }
        std::sort(subdirs.begin(), subdirs.end());
        for (const auto& sub : subdirs) raw.push_back(load_e4_segment(sub));
    }

    ParticipantDay day;
    day.participant_id = participant_id;
    day.role = role;
    for (auto& seg : raw) {
        const Date date = local_date(seg.start_time(), options.tz);
        const double w0 = utc_from_local(date, options.window.start_seconds, options.tz);
        const double w1 = utc_from_local(date, options.window.end_seconds, options.tz);
        for (auto& t : seg.traces) clip_trace(t, w0, w1);
        std::erase_if(seg.traces, [](const SensorTrace& t) { return t.values.empty(); });
        if (seg.traces.empty()) continue;
        if (seg.duration() < options.min_segment_seconds) continue;
        day.segments.push_back(std::move(seg));
    }
    std::sort(day.segments.begin(), day.segments.end(),
              [](const Segment& a, const Segment& b) { return a.start_time() < b.start_time(); });

    // Per-channel ordering check.
    std::map<Channel, double> last_end;
    for (const auto& seg : day.segments) {
        for (const auto& t : seg.traces) {
            auto it = last_end.find(t.channel);
            if (it != last_end.end() && t.start_time < it->second - 1e-6) {
                throw ValidationError(dir.string() + ": overlapping " + std::string(to_string(t.channel)) +
                                      " segments");
            }
            last_end[t.channel] = t.end_time();
        }
    }

    if (!day.segments.empty()) {
        day.date = local_date(day.segments.front().start_time(), options.tz);
    } else {
        try {
            day.date = parse_date(dir.filename().string());
        } catch (const ValidationError&) {
            day.date = Date{};
        }
    }
    return day;
}

void write_e4_segment(const fs::path& dir, const Segment& segment) {
    for (const auto& f : kSingleChannelFiles) {
        if (const auto* t = segment.find(f.channel)) {
            const SensorTrace* ts[] = {t};
            write_channel_file(dir / f.name, ts);
        }
    }
    const auto* x = segment.find(Channel::ACC_X);
    const auto* y = segment.find(Channel::ACC_Y);
    const auto* z = segment.find(Channel::ACC_Z);
    if (x || y || z) {
        if (!(x && y && z)) throw ValidationError("ACC export requires all three axes");
        if (x->size() != y->size() || x->size() != z->size() || x->start_time != y->start_time ||
            x->start_time != z->start_time || x->sample_rate != y->sample_rate || x->sample_rate != z->sample_rate) {
            throw ValidationError("ACC axes must share start, rate and length");
        }
        const SensorTrace* ts[] = {x, y, z};
        write_channel_file(dir / "ACC.csv", ts);
    }
}

void write_e4_day(const fs::path& dir, const ParticipantDay& day) {
    if (day.segments.size() == 1) {
        write_e4_segment(dir, day.segments.front());
        return;
    }
    for (std::size_t i = 0; i < day.segments.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "segment_%03zu", i);
        write_e4_segment(dir / name, day.segments[i]);
    }
}

std::vector<EnvTrace> load_env_csv(const fs::path& path) {
    const std::string file = path.string();
    const std::string text = csv::read_file(path);
    csv::LineReader reader(text);
    std::string_view line;
    if (!reader.next(line)) throw ParseError(file, 1, "empty file");
    csv::expect_header(line, kEnvHeader, file);

    std::vector<EnvTrace> rooms;
    std::unordered_map<std::string, std::size_t> index;
    while (reader.next(line)) {
        if (csv::trim(line).empty()) continue;
        const auto ln = reader.line_number();
        auto f = csv::split(line);
        if (f.size() != 6) throw ParseError(file, ln, "expected 6 columns, got " + std::to_string(f.size()));
        EnvSample s;
        s.timestamp = csv::parse_double(f[0], file, ln);
        const std::string room(csv::trim(f[1]));
        if (room.empty()) throw ParseError(file, ln, "empty room_id");
        s.temperature_c = csv::parse_double(f[2], file, ln);
        s.humidity_pct = csv::parse_double(f[3], file, ln);
        s.co2_ppm = csv::parse_double(f[4], file, ln);
        s.sound_db = csv::parse_double(f[5], file, ln);
        if (s.humidity_pct < 0.0 || s.humidity_pct > 100.0) {
            throw ParseError(file, ln, "humidity " + csv::format_double(s.humidity_pct) + " outside [0, 100]");
        }
        if (s.co2_ppm < 0.0) throw ParseError(file, ln, "negative co2");

        auto [it, inserted] = index.try_emplace(room, rooms.size());
        if (inserted) rooms.push_back(EnvTrace{room, {}});
        auto& samples = rooms[it->second].samples;
        if (!samples.empty() && !(s.timestamp > samples.back().timestamp)) {
            throw ParseError(file, ln, "non-monotonic timestamp for room " + room);
        }
        samples.push_back(s);
    }
    return rooms;
}

void write_env_csv(const fs::path& path, std::span<const EnvTrace> rooms) {
    std::string out = std::string(kEnvHeader) + "\n";
    for (const auto& room : rooms) {
        for (const auto& s : room.samples) {
            csv::append_double(out, s.timestamp);
            out += ',' + room.room_id + ',';
            csv::append_double(out, s.temperature_c);
            out += ',';
            csv::append_double(out, s.humidity_pct);
            out += ',';
            csv::append_double(out, s.co2_ppm);
            out += ',';
            csv::append_double(out, s.sound_db);
            out += '\n';
        }
    }
    csv::write_file(path, out);
}

std::vector<ClassInfo> load_schedule(const fs::path& path, TimeZone tz) {
    const std::string file = path.string();
    const std::string text = csv::read_file(path);
    csv::LineReader reader(text);
    std::string_view line;
    if (!reader.next(line)) throw ParseError(file, 1, "empty file");
    csv::expect_header(line, kScheduleHeader, file);

    std::vector<ClassInfo> classes;
    std::set<std::string> seen;
    while (reader.next(line)) {
        if (csv::trim(line).empty()) continue;
        const auto ln = reader.line_number();
        auto f = csv::split(line);
        if (f.size() != 8) throw ParseError(file, ln, "expected 8 columns, got " + std::to_string(f.size()));
        ClassInfo c;
        c.class_id = std::string(csv::trim(f[0]));
        if (c.class_id.empty()) throw ParseError(file, ln, "empty class_id");
        if (!seen.insert(c.class_id).second) throw ParseError(file, ln, "duplicate class_id " + c.class_id);
        c.room_id = std::string(csv::trim(f[1]));
        try {
            c.subject = parse_subject(csv::trim(f[2]));
            c.date = parse_date(csv::trim(f[3]));
        } catch (const ValidationError& e) {
            throw ParseError(file, ln, e.what());
        }
        auto parse_time = [&](std::string_view field) {
            if (auto clock = parse_clock(csv::trim(field))) return utc_from_local(c.date, *clock, tz);
            return csv::parse_double(field, file, ln);
        };
        c.scheduled_start = parse_time(f[4]);
        c.scheduled_end = parse_time(f[5]);
        if (!(c.scheduled_end > c.scheduled_start)) throw ParseError(file, ln, "scheduled_end must exceed scheduled_start");
        c.actual_start = c.scheduled_start;
        c.actual_end = c.scheduled_end;
        if (auto t = csv::trim(f[6]); !t.empty()) c.teacher = std::string(t);
        for (auto p : csv::split(csv::trim(f[7]), ';')) {
            p = csv::trim(p);
            if (!p.empty()) c.enrolled.emplace_back(p);
        }
        classes.push_back(std::move(c));
    }
    return classes;
}

std::vector<SurveyResponse> load_surveys(const fs::path& path) {
    const std::string file = path.string();
    const std::string text = csv::read_file(path);
    csv::LineReader reader(text);
    std::string_view line;
    if (!reader.next(line)) throw ParseError(file, 1, "empty file");
    csv::expect_header(line, kSurveyHeader, file);

    std::vector<SurveyResponse> out;
    while (reader.next(line)) {
        if (csv::trim(line).empty()) continue;
        const auto ln = reader.line_number();
        auto f = csv::split(line);
        if (f.size() != 9) throw ParseError(file, ln, "expected 9 columns, got " + std::to_string(f.size()));
        SurveyResponse s;
        s.participant_id = std::string(csv::trim(f[0]));
        s.class_id = std::string(csv::trim(f[1]));
        s.submitted_at = csv::parse_double(f[2], file, ln);
        for (int i = 0; i < 5; ++i) {
            const auto v = csv::parse_int(f[3 + i], file, ln);
            if (v < -2 || v > 2) {
                throw ParseError(file, ln, "q" + std::to_string(i + 1) + " = " + std::to_string(v) + " outside {-2..2}");
            }
            s.q[i] = static_cast<int>(v);
        }
        s.completion_seconds = csv::parse_double(f[8], file, ln);
        out.push_back(std::move(s));
    }
    return out;
}

void write_schedule(const fs::path& path, std::span<const ClassInfo> classes) {
    std::string out = std::string(kScheduleHeader) + "\n";
    for (const auto& c : classes) {
        out += c.class_id + ',' + c.room_id + ',' + std::string(to_string(c.subject)) + ',' + format_date(c.date) + ',';
        csv::append_double(out, c.scheduled_start);
        out += ',';
        csv::append_double(out, c.scheduled_end);
        out += ',' + c.teacher.value_or("") + ',';
        for (std::size_t i = 0; i < c.enrolled.size(); ++i) {
            if (i) out += ';';
            out += c.enrolled[i];
        }
        out += '\n';
    }
    csv::write_file(path, out);
}

void write_surveys(const fs::path& path, std::span<const SurveyResponse> surveys) {
    std::string out = std::string(kSurveyHeader) + "\n";
    for (const auto& s : surveys) {
        out += s.participant_id + ',' + s.class_id + ',';
        csv::append_double(out, s.submitted_at);
        for (int q : s.q) out += ',' + std::to_string(q);
        out += ',';
        csv::append_double(out, s.completion_seconds);
        out += '\n';
    }
    csv::write_file(path, out);
}

ScheduleAndSurveys load_schedule_and_surveys(const fs::path& schedule_path, const fs::path& survey_path, TimeZone tz) {
    ScheduleAndSurveys out;
    out.classes = load_schedule(schedule_path, tz);
    out.surveys = load_surveys(survey_path);
    std::set<std::string> ids;
    for (const auto& c : out.classes) ids.insert(c.class_id);
    for (const auto& s : out.surveys) {
        if (!ids.contains(s.class_id)) {
            throw ValidationError(survey_path.string() + ": survey from " + s.participant_id +
                                  " references unknown class_id " + s.class_id);
        }
    }
    return out;
}

}  // namespace engage
