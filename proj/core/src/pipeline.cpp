#include "engage/pipeline.hpp"

#include <algorithm>
#include <set>

#include "engage/csv.hpp"
#include "engage/errors.hpp"
#include "engage/resample.hpp"

namespace engage {

namespace fs = std::filesystem;

namespace {

using SessionKey = std::pair<std::string, std::string>;  // (participant, class)

std::vector<SensorTrace> pieces_of(const ParticipantDay& day, Channel c) { return day.channel(c); }

std::vector<SensorTrace> acc_magnitudes(const ParticipantDay& day, double filter_seconds) {
    std::vector<SensorTrace> out;
    for (const auto& seg : day.segments) {
        const auto* x = seg.find(Channel::ACC_X);
        const auto* y = seg.find(Channel::ACC_Y);
        const auto* z = seg.find(Channel::ACC_Z);
        if (x && y && z && !x->empty()) out.push_back(acc_magnitude(*x, *y, *z, filter_seconds));
    }
    return out;
}

// Slice at the native rate of the first piece; nullopt when the window holds no samples.
std::optional<SensorTrace> window_of(std::span<const SensorTrace> pieces, double t0, double t1,
                                     std::optional<double> rate = std::nullopt) {
    if (pieces.empty()) return std::nullopt;
    try {
        return slice_resample(pieces, t0, t1, rate.value_or(pieces.front().sample_rate), Aggregator::mean);
    } catch (const ValidationError&) {
        return std::nullopt;
    }
}

struct DayData {
    std::map<std::string, ParticipantDay> days;
    std::map<std::string, std::vector<SensorTrace>> acc;
};

DayData load_day(const DatasetIndex& index, Date date, const std::set<std::string>& ids, const PipelineOptions& opt,
                 const std::set<std::string>& teachers) {
    DayData d;
    E4LoadOptions lo;
    lo.tz = index.tz;
    for (const auto& id : ids) {
        const auto it = index.recordings.find(id);
        if (it == index.recordings.end()) continue;
        const fs::path dir = it->second / format_date(date);
        if (!fs::is_directory(dir)) continue;
        ParticipantDay day = load_e4_day(dir, id, teachers.count(id) ? Role::teacher : Role::student, lo);
        d.acc[id] = acc_magnitudes(day, opt.acc_median_seconds);
        d.days.emplace(id, std::move(day));
    }
    return d;
}

ClassBoundaries estimate_boundaries(const ClassInfo& c, const DayData& data, const PipelineOptions& opt) {
    ClassBoundaries b;
    b.class_id = c.class_id;
    std::vector<std::vector<SensorTrace>> mags;
    for (const auto& pid : c.enrolled) {
        const auto it = data.acc.find(pid);
        if (it != data.acc.end()) mags.push_back(it->second);
    }
    if (opt.estimate_boundaries) {
        b.start = class_boundary(mags, c.scheduled_start, BoundarySide::start, opt.boundary);
        b.end = class_boundary(mags, c.scheduled_end, BoundarySide::end, opt.boundary);
    } else {
        b.start = {BoundarySide::start, c.scheduled_start, 0, true, {}};
        b.end = {BoundarySide::end, c.scheduled_end, 0, true, {}};
    }
    if (!(b.end.time - b.start.time > 2.0 * opt.arousal_window_seconds)) {
        // Estimates collapsed the class; keep the timetable.
        b.start = {BoundarySide::start, c.scheduled_start, b.start.n_participants_used, true, b.start.per_participant};
        b.end = {BoundarySide::end, c.scheduled_end, b.end.n_participants_used, true, b.end.per_participant};
    }
    return b;
}

QualityReport missing_report(const std::string& reason) {
    QualityReport r;
    r.flat_fraction = 1.0;
    r.accepted = false;
    r.reasons.push_back(reason);
    return r;
}

// Gate plus decomposition for one participant; `quality` always filled, analysis only when accepted.
std::optional<SessionAnalysis> analyze(const ParticipantDay* day, const std::vector<SensorTrace>* acc,
                                       const ClassInfo& c, Role role, const std::string& pid,
                                       const PipelineOptions& opt, QualityReport& quality) {
    if (!day) {
        quality = missing_report("no recording");
        return std::nullopt;
    }
    const auto eda_pieces = pieces_of(*day, Channel::EDA);
    const auto eda = window_of(eda_pieces, c.actual_start, c.actual_end, 4.0);
    if (!eda) {
        quality = missing_report("no EDA in class window");
        return std::nullopt;
    }
    quality = eda_quality_gate(*eda, opt.gate);
    if (!quality.accepted) return std::nullopt;

    SessionAnalysis s;
    s.participant_id = pid;
    s.class_id = c.class_id;
    s.role = role;
    try {
        s.eda = cvxeda_decompose(median_filter(*eda, opt.eda_median_seconds), opt.cvx);
    } catch (const ConvergenceError&) {
        quality.accepted = false;
        quality.reasons.push_back("decomposition did not converge");
        return std::nullopt;
    } catch (const ValidationError& e) {
        quality.accepted = false;
        quality.reasons.push_back(e.what());
        return std::nullopt;
    }
    s.quality = quality;

    if (auto bvp = window_of(pieces_of(*day, Channel::BVP), c.actual_start, c.actual_end)) {
        try {
            s.ibi = ibi_from_beats(detect_beats(*bvp, opt.beats), opt.ibi);
            s.hrv = hrv_features(*s.ibi, opt.welch);
        } catch (const ValidationError&) {
            s.hrv.reset();
        }
    }
    if (auto st = window_of(pieces_of(*day, Channel::ST), c.actual_start, c.actual_end)) {
        s.st = median_filter(*st, opt.st_median_seconds);
    }
    if (acc) s.acc_mag = window_of(*acc, c.actual_start, c.actual_end);
    return s;
}

std::vector<double> at_rate(const std::vector<double>& x, double t0, double rate, double out_rate, double w0,
                            double w1) {
    SensorTrace t;
    t.start_time = t0;
    t.sample_rate = rate;
    t.values = x;
    try {
        return slice_resample(t, w0, w1, out_rate, Aggregator::mean).values;
    } catch (const ValidationError&) {
        return {};
    }
}

struct SyncSeries {
    std::vector<double> mixed, tonic, phasic, acc;
};

SyncSeries sync_series(const SessionAnalysis& s, const ClassInfo& c, const PipelineOptions& opt) {
    SyncSeries out;
    const double r = opt.sync_rate_hz;
    const auto& d = s.eda;
    out.mixed = at_rate(d.mixed, d.start_time, d.sample_rate, r, c.actual_start, c.actual_end);
    out.tonic = at_rate(d.tonic, d.start_time, d.sample_rate, r, c.actual_start, c.actual_end);
    out.phasic = at_rate(d.phasic, d.start_time, d.sample_rate, r, c.actual_start, c.actual_end);
    if (s.acc_mag) {
        out.acc = at_rate(s.acc_mag->values, s.acc_mag->start_time, s.acc_mag->sample_rate, r, c.actual_start,
                          c.actual_end);
    }
    return out;
}

// Synchrony, HRV and context features of every accepted student in one class.
std::map<std::string, FeatureVector> class_features(const ClassInfo& c, const std::vector<SessionAnalysis>& students,
                                                    const std::optional<SessionAnalysis>& teacher,
                                                    const EnvTrace* env, const PipelineOptions& opt) {
    std::vector<NamedSeries> mixed, tonic, phasic, acc;
    for (const auto& s : students) {
        SyncSeries ss = sync_series(s, c, opt);
        mixed.push_back({s.participant_id, std::move(ss.mixed)});
        tonic.push_back({s.participant_id, std::move(ss.tonic)});
        phasic.push_back({s.participant_id, std::move(ss.phasic)});
        if (!ss.acc.empty()) acc.push_back({s.participant_id, std::move(ss.acc)});
    }
    std::optional<SyncSeries> ts;
    if (teacher) ts = sync_series(*teacher, c, opt);
    auto teacher_of = [&](std::vector<double> SyncSeries::*m) -> std::optional<std::vector<double>> {
        if (!ts || (*ts.*m).empty()) return std::nullopt;
        return *ts.*m;
    };

    std::map<std::string, FeatureVector> out;
    for (std::size_t i = 0; i < students.size(); ++i) {
        const auto& s = students[i];
        FeatureVector f;
        f.participant_id = s.participant_id;
        f.class_id = c.class_id;
        f.merge(sync_features("eda", mixed[i].values, teacher_of(&SyncSeries::mixed),
                              peer_average(mixed, s.participant_id), opt.dtw_band));
        f.merge(sync_features("tonic", tonic[i].values, teacher_of(&SyncSeries::tonic),
                              peer_average(tonic, s.participant_id), opt.dtw_band));
        f.merge(sync_features("phasic", phasic[i].values, teacher_of(&SyncSeries::phasic),
                              peer_average(phasic, s.participant_id), opt.dtw_band));
        const auto own_acc = std::find_if(acc.begin(), acc.end(),
                                          [&](const NamedSeries& n) { return n.participant_id == s.participant_id; });
        if (own_acc != acc.end()) {
            f.merge(sync_features("acc", own_acc->values, teacher_of(&SyncSeries::acc),
                                  peer_average(acc, s.participant_id), opt.dtw_band));
        }
        f.merge(hrv_feature_vector(s.hrv));
        f.merge(context_features(env, s.st ? &*s.st : nullptr, s.acc_mag ? &*s.acc_mag : nullptr, c.actual_start,
                                 c.actual_end));
        out.emplace(s.participant_id, std::move(f));
    }
    return out;
}

// EDA features need every session of a participant for pooled normalization and level thresholds.
FeatureVector eda_features(const EdaDecomposition& raw, const EdaNormalization& norm,
                           std::span<const double> thresholds, const PipelineOptions& opt) {
    const EdaDecomposition z = normalize_eda(raw, norm);
    const auto peaks = detect_scr_peaks(z.phasic, opt.min_peak_amplitude);
    const ArousalProfile profile =
        arousal_profile(z.phasic, z.sample_rate, peaks, 4, opt.arousal_window_seconds, thresholds);
    return eda_session_features(z, raw, profile, opt.min_peak_amplitude);
}

std::vector<Date> class_dates(const std::vector<ClassInfo>& classes) {
    std::set<std::chrono::sys_days> s;
    for (const auto& c : classes) s.insert(std::chrono::sys_days{c.date});
    std::vector<Date> out;
    for (auto d : s) out.emplace_back(d);
    return out;
}

}  // namespace

std::string_view to_string(NormalizationScope s) {
    return s == NormalizationScope::participant ? "participant" : "session";
}

NormalizationScope parse_normalization_scope(std::string_view s) {
    if (s == "participant") return NormalizationScope::participant;
    if (s == "session") return NormalizationScope::session;
    throw ValidationError("unknown normalization scope '" + std::string(s) + "' (expected participant or session)");
}

const ClassInfo& DatasetIndex::find_class(std::string_view class_id) const {
    for (const auto& c : classes) {
        if (c.class_id == class_id) return c;
    }
    throw ValidationError("unknown class_id '" + std::string(class_id) + "'");
}

const EnvTrace* DatasetIndex::find_room(std::string_view room_id) const {
    for (const auto& e : env) {
        if (e.room_id == room_id) return &e;
    }
    return nullptr;
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
    const std::string text = csv::read_file(path);
    std::map<std::string, std::string> out;
    csv::LineReader reader(text);
    std::string_view line;
    while (reader.next(line)) {
        line = csv::trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(path.string(), reader.line_number(), "expected key = value");
        std::string value(csv::trim(line.substr(eq + 1)));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        out[std::string(csv::trim(line.substr(0, eq)))] = value;
    }
    return out;
}

DatasetIndex open_dataset(const DatasetPaths& paths, std::optional<TimeZone> tz) {
    DatasetIndex index;
    index.paths = paths;
    if (index.paths.schedule.empty()) index.paths.schedule = paths.data / "schedule.csv";
    if (index.paths.env.empty()) index.paths.env = paths.data / "env.csv";
    if (index.paths.surveys.empty()) index.paths.surveys = paths.data / "surveys.csv";
    if (!paths.data.empty() && !fs::is_directory(paths.data)) {
        throw IoError("data directory not found: " + paths.data.string());
    }
    for (const auto* p : {&index.paths.schedule, &index.paths.surveys}) {
        if (!fs::exists(*p)) throw IoError("file not found: " + p->string());
    }

    if (tz) {
        index.tz = *tz;
    } else if (fs::exists(paths.data / "dataset.cfg")) {
        const auto kv = read_key_values(paths.data / "dataset.cfg");
        if (const auto it = kv.find("timezone"); it != kv.end()) {
            index.tz.offset_hours = csv::parse_double(it->second, (paths.data / "dataset.cfg").string(), 0);
        }
    }

    auto ss = load_schedule_and_surveys(index.paths.schedule, index.paths.surveys, index.tz);
    index.classes = std::move(ss.classes);
    index.surveys = std::move(ss.surveys);
    if (fs::exists(index.paths.env)) index.env = load_env_csv(index.paths.env);

    const fs::path root = paths.data / "participants";
    if (fs::is_directory(root)) {
        for (const auto& entry : fs::directory_iterator(root)) {
            if (entry.is_directory()) index.recordings[entry.path().filename().string()] = entry.path();
        }
    }
    return index;
}

PipelineResult run_pipeline(const DatasetIndex& index, const PipelineOptions& opt, PipelineStage until,
                            const Logger& log) {
    PipelineResult result;
    std::set<std::string> teachers;
    for (const auto& c : index.classes) {
        if (c.teacher) teachers.insert(*c.teacher);
    }
    std::map<SessionKey, const SurveyResponse*> surveys;
    for (const auto& s : index.surveys) surveys[{s.participant_id, s.class_id}] = &s;

    // Student analyses kept across days for participant-level normalization.
    std::map<SessionKey, FeatureVector> partial;
    std::map<SessionKey, EdaDecomposition> decomps;
    std::map<std::string, Subject> subject_of;

    for (const Date date : class_dates(index.classes)) {
        std::vector<ClassInfo> todays;
        std::set<std::string> ids;
        for (const auto& c : index.classes) {
            if (c.date != date) continue;
            todays.push_back(c);
            ids.insert(c.enrolled.begin(), c.enrolled.end());
            if (c.teacher) ids.insert(*c.teacher);
        }
        if (log) log("day " + format_date(date) + ": " + std::to_string(todays.size()) + " classes");
        const DayData data = load_day(index, date, ids, opt, teachers);

        for (auto& c : todays) {
            ClassBoundaries b = estimate_boundaries(c, data, opt);
            c.actual_start = b.start.time;
            c.actual_end = b.end.time;
            result.boundaries.push_back(std::move(b));
            result.classes.push_back(c);
            if (until == PipelineStage::segment) continue;

            std::vector<SessionAnalysis> students;
            std::optional<SessionAnalysis> teacher;
            auto run = [&](const std::string& pid, Role role) {
                const auto dit = data.days.find(pid);
                const auto ait = data.acc.find(pid);
                SessionQuality q{pid, c.class_id, role, {}};
                const ParticipantDay* day = dit == data.days.end() ? nullptr : &dit->second;
                const std::vector<SensorTrace>* acc = ait == data.acc.end() ? nullptr : &ait->second;
                if (until == PipelineStage::clean) {
                    q.report = [&] {
                        if (!day) return missing_report("no recording");
                        const auto eda = window_of(pieces_of(*day, Channel::EDA), c.actual_start, c.actual_end, 4.0);
                        return eda ? eda_quality_gate(*eda, opt.gate) : missing_report("no EDA in class window");
                    }();
                    result.quality.push_back(std::move(q));
                    return;
                }
                auto s = analyze(day, acc, c, role, pid, opt, q.report);
                result.quality.push_back(std::move(q));
                if (!s) return;
                if (role == Role::teacher) {
                    teacher = std::move(s);
                } else {
                    students.push_back(std::move(*s));
                }
            };
            for (const auto& pid : c.enrolled) run(pid, Role::student);
            if (c.teacher) run(*c.teacher, Role::teacher);
            if (until == PipelineStage::clean) continue;

            auto feats = class_features(c, students, teacher, index.find_room(c.room_id), opt);
            for (auto& s : students) {
                const SessionKey key{s.participant_id, c.class_id};
                partial[key] = std::move(feats.at(s.participant_id));
                decomps[key] = std::move(s.eda);
            }
            subject_of[c.class_id] = c.subject;
        }
    }
    if (until != PipelineStage::features) return result;

    // Participant-pooled EDA statistics and arousal level thresholds.
    std::map<std::string, std::vector<const EdaDecomposition*>> by_participant;
    for (const auto& [key, d] : decomps) by_participant[key.first].push_back(&d);
    std::map<std::string, EdaNormalization> norms;
    std::map<std::string, std::vector<double>> thresholds;
    for (const auto& [pid, ds] : by_participant) {
        norms[pid] = normalization_stats(ds);
        std::vector<double> maxima;
        for (const auto* d : ds) {
            const EdaDecomposition z = normalize_eda(*d, norms[pid]);
            const auto m = window_maxima(z.phasic, z.sample_rate, opt.arousal_window_seconds);
            maxima.insert(maxima.end(), m.begin(), m.end());
        }
        thresholds[pid] = level_thresholds(maxima, 4);
    }

    for (auto& [key, f] : partial) {
        const auto& d = decomps.at(key);
        FeatureVector e;
        if (opt.normalization == NormalizationScope::participant) {
            e = eda_features(d, norms.at(key.first), thresholds.at(key.first), opt);
        } else {
            const EdaDecomposition z = normalize_eda(d);
            const auto peaks = detect_scr_peaks(z.phasic, opt.min_peak_amplitude);
            e = eda_session_features(z, d, arousal_profile(z.phasic, z.sample_rate, peaks, 4, opt.arousal_window_seconds),
                                     opt.min_peak_amplitude);
        }
        f.merge(e);
        SessionRecord r;
        r.features = std::move(f);
        r.subject = subject_of.at(key.second);
        if (const auto it = surveys.find(key); it != surveys.end()) r.scores = engagement_scores(*it->second);
        result.sessions.push_back(std::move(r));
    }
    return result;
}

SessionAnalysis analyze_session(const DatasetIndex& index, std::string_view participant_id, std::string_view class_id,
                                const PipelineOptions& opt) {
    ClassInfo c = index.find_class(class_id);
    const std::string pid(participant_id);
    Role role = Role::student;
    if (c.teacher && *c.teacher == pid) {
        role = Role::teacher;
    } else if (std::find(c.enrolled.begin(), c.enrolled.end(), pid) == c.enrolled.end()) {
        throw ValidationError("participant '" + pid + "' is not enrolled in class " + c.class_id);
    }
    std::set<std::string> ids(c.enrolled.begin(), c.enrolled.end());
    ids.insert(pid);
    std::set<std::string> teachers;
    if (c.teacher) teachers.insert(*c.teacher);
    const DayData data = load_day(index, c.date, ids, opt, teachers);
    const ClassBoundaries b = estimate_boundaries(c, data, opt);
    c.actual_start = b.start.time;
    c.actual_end = b.end.time;

    const auto dit = data.days.find(pid);
    const auto ait = data.acc.find(pid);
    QualityReport q;
    auto s = analyze(dit == data.days.end() ? nullptr : &dit->second, ait == data.acc.end() ? nullptr : &ait->second,
                     c, role, pid, opt, q);
    if (!s) {
        std::string why;
        for (const auto& r : q.reasons) why += (why.empty() ? "" : "; ") + r;
        throw ValidationError("session " + pid + "/" + c.class_id + " rejected: " + why);
    }
    return *s;
}

}  // namespace engage
