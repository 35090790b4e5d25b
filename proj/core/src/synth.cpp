#include "engage/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "engage/csv.hpp"
#include "engage/errors.hpp"
#include "engage/io.hpp"

namespace engage {

namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kEdaRate = 4.0;
constexpr double kBvpRate = 64.0;
constexpr double kAccRate = 32.0;
constexpr double kStRate = 4.0;
constexpr double kScrBaseRate = 2.0;       // per minute
constexpr double kSharedEventRate = 0.5;   // per minute
constexpr double kBurstBaseRate = 1.0;     // per minute
constexpr double kEnvPeriod = 300.0;

// Week template of subjects by (weekday, period); wraps when there are more periods.
constexpr Subject kWeek[5][5] = {
    {Subject::Maths, Subject::English, Subject::Science, Subject::Language, Subject::Chapel},
    {Subject::English, Subject::Maths, Subject::Politics, Subject::PE, Subject::Science},
    {Subject::Maths, Subject::Language, Subject::English, Subject::Health, Subject::Maths},
    {Subject::Science, Subject::English, Subject::Maths, Subject::Politics, Subject::PE},
    {Subject::Maths, Subject::Health, Subject::English, Subject::Science, Subject::Language},
};

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform(double a = 0.0, double b = 1.0) { return std::uniform_real_distribution<double>(a, b)(eng_); }
    double normal(double sd = 1.0) { return sd > 0.0 ? std::normal_distribution<double>(0.0, sd)(eng_) : 0.0; }
    bool bernoulli(double p) { return uniform() < p; }
    std::uint64_t next() { return eng_(); }
    double exponential(double rate) { return std::exponential_distribution<double>(rate)(eng_); }

    // Event times of a homogeneous Poisson process on [t0, t1), rate per second.
    std::vector<double> poisson_times(double t0, double t1, double rate) {
        std::vector<double> out;
        if (!(rate > 0.0)) return out;
        for (double t = t0 + exponential(rate); t < t1; t += exponential(rate)) out.push_back(t);
        return out;
    }

    double truncated_normal(double mean, double sd, double lo, double hi) {
        for (int i = 0; i < 100; ++i) {
            const double v = mean + normal(sd);
            if (v >= lo && v <= hi) return v;
        }
        return std::clamp(mean, lo, hi);
    }

private:
    std::mt19937_64 eng_;
};

double round_to(double v, double step) { return std::round(v / step) * step; }

std::string two_digit(std::size_t i) {
    return (i < 10 ? "0" : "") + std::to_string(i);
}

std::string student_id(std::size_t i) { return "S" + two_digit(i + 1); }
std::string teacher_id(std::size_t i) { return "T" + std::to_string(i + 1); }
std::string room_id(std::size_t g) { return "R" + std::to_string(g + 1); }

constexpr double kTau0 = 2.0;
constexpr double kTau1 = 0.7;

// Bateman SCR shape normalised to a unit peak.
double scr_shape(double t) {
    if (t <= 0.0) return 0.0;
    static const double peak = [] {
        const double tp = kTau0 * kTau1 / (kTau0 - kTau1) * std::log(kTau0 / kTau1);
        return std::exp(-tp / kTau0) - std::exp(-tp / kTau1);
    }();
    return (std::exp(-t / kTau0) - std::exp(-t / kTau1)) / peak;
}

SensorTrace make_trace(Channel c, double t0, double rate, std::size_t n) {
    SensorTrace t;
    t.channel = c;
    t.start_time = t0;
    t.sample_rate = rate;
    t.values.assign(n, 0.0);
    return t;
}

struct Window {
    double t0 = 0.0;
    double t1 = 0.0;
    double in = 0.0;   // when this participant's class activity starts
    double out = 0.0;  // and ends
    bool inside(double t) const { return t >= in && t < out; }
};

struct Drives {
    double scr_rate_class = kScrBaseRate / 60.0;
    double shared_response = 0.5;
    double hf_amplitude_class = 25.0;
    double burst_rate_class = kBurstBaseRate / 60.0;
};

Drives drives_for(const Latent& l, const SynthCouplings& c) {
    Drives d;
    d.scr_rate_class = kScrBaseRate / 60.0 * std::max(0.1, 1.0 + c.c_eda * (l.emotional - 3.0));
    d.shared_response = std::clamp(0.5 + 0.5 * c.c_eda * (l.emotional - 3.0) / 2.0, 0.0, 1.0);
    d.hf_amplitude_class = 25.0 * std::max(0.1, 1.0 + 0.5 * c.c_hrv * (l.cognitive - 3.0));
    d.burst_rate_class = kBurstBaseRate / 60.0 * std::max(0.0, 1.0 + c.c_acc * (l.behavioural - 3.0));
    return d;
}

SensorTrace simulate_eda(const StudentTrait& trait, const Drives& d, const ClassPlan& plan, const Window& w,
                         const SynthConfig& cfg, Rng& rng, std::size_t& n_scr, bool artifact) {
    const auto n = static_cast<std::size_t>((w.t1 - w.t0) * kEdaRate);
    SensorTrace eda = make_trace(Channel::EDA, w.t0, kEdaRate, n);

    const double a1 = rng.uniform(0.03, 0.12);
    const double p1 = rng.uniform(300.0, 900.0);
    const double ph1 = rng.uniform(0.0, kTwoPi);
    const double slope = rng.normal(0.05) / 600.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kEdaRate;
        eda.values[i] = trait.tonic_us + a1 * std::sin(kTwoPi * t / p1 + ph1) + slope * t;
    }

    std::vector<double> onsets;
    for (double t : rng.poisson_times(w.t0, w.in, kScrBaseRate / 60.0)) onsets.push_back(t);
    for (double t : rng.poisson_times(w.in, w.out, d.scr_rate_class)) onsets.push_back(t);
    for (double t : rng.poisson_times(w.out, w.t1, kScrBaseRate / 60.0)) onsets.push_back(t);
    for (double t : plan.shared_events) {
        if (w.inside(t) && rng.bernoulli(d.shared_response)) onsets.push_back(t + rng.uniform(0.5, 2.0));
    }
    std::sort(onsets.begin(), onsets.end());

    const double kernel_span = 30.0;
    for (double on : onsets) {
        const double amp = rng.uniform(0.05, 0.3);
        if (w.inside(on)) ++n_scr;
        const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil((on - w.t0) * kEdaRate)));
        const auto last = std::min(n, static_cast<std::size_t>((on + kernel_span - w.t0) * kEdaRate));
        for (std::size_t i = first; i < last; ++i) {
            eda.values[i] += amp * scr_shape(eda.time_at(i) - on);
        }
    }

    for (double& v : eda.values) v = std::max(0.0, round_to(v + rng.normal(cfg.noise.eda_us), 1e-4));

    if (artifact) {
        // Wristband loses skin contact for 2.5 minutes in the middle of the class.
        const double a = 0.5 * (w.in + w.out) - 75.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = eda.time_at(i);
            if (t >= a && t < a + 150.0) eda.values[i] = 0.0;
        }
    }
    return eda;
}

SensorTrace simulate_bvp(const StudentTrait& trait, const Drives& d, const Window& w, const SynthConfig& cfg,
                         Rng& rng) {
    const auto n = static_cast<std::size_t>((w.t1 - w.t0) * kBvpRate);
    SensorTrace bvp = make_trace(Channel::BVP, w.t0, kBvpRate, n);

    const double lf_phase = rng.uniform(0.0, kTwoPi);
    const double hf_phase = rng.uniform(0.0, kTwoPi);
    const double hf_freq = rng.uniform(0.22, 0.3);
    std::vector<double> beats;
    for (double t = w.t0 + rng.uniform(0.0, trait.rr_ms / 1000.0); t < w.t1;) {
        beats.push_back(t);
        const double hf = w.inside(t) ? d.hf_amplitude_class : 25.0;
        double rr = trait.rr_ms + 30.0 * std::sin(kTwoPi * 0.1 * t + lf_phase) +
                    hf * std::sin(kTwoPi * hf_freq * t + hf_phase) + rng.normal(cfg.noise.rr_ms);
        rr = std::clamp(rr, 400.0, 1500.0);
        t += rr / 1000.0;
    }

    // Asymmetric systolic pulse: fast rise, slower decay.
    for (double tb : beats) {
        const double amp = 50.0 * (1.0 + rng.normal(0.05));
        const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil((tb - 0.3 - w.t0) * kBvpRate)));
        const auto last = std::min(n, static_cast<std::size_t>((tb + 0.6 - w.t0) * kBvpRate));
        for (std::size_t i = first; i < last; ++i) {
            const double dt = bvp.time_at(i) - tb;
            const double s = dt < 0.0 ? 0.05 : 0.12;
            bvp.values[i] += amp * std::exp(-0.5 * (dt / s) * (dt / s));
        }
    }
    for (double& v : bvp.values) v = round_to(v - 15.0 + 50.0 * rng.normal(cfg.noise.bvp), 0.01);
    return bvp;
}

std::array<SensorTrace, 3> simulate_acc(const Drives& d, const Window& w, const SynthConfig& cfg, Rng& rng) {
    const auto n = static_cast<std::size_t>((w.t1 - w.t0) * kAccRate);
    std::array<SensorTrace, 3> acc = {make_trace(Channel::ACC_X, w.t0, kAccRate, n),
                                      make_trace(Channel::ACC_Y, w.t0, kAccRate, n),
                                      make_trace(Channel::ACC_Z, w.t0, kAccRate, n)};
    // Wrist orientation: gravity direction tilted away from z.
    const double tilt = rng.uniform(0.1, 0.6);
    const double az = rng.uniform(0.0, kTwoPi);
    const double g[3] = {std::sin(tilt) * std::cos(az), std::sin(tilt) * std::sin(az), std::cos(tilt)};

    std::vector<double> intensity(n, 0.0);
    const double step_freq = rng.uniform(1.6, 2.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = acc[0].time_at(i);
        if (!w.inside(t)) intensity[i] = 0.3 * (0.5 + 0.5 * std::sin(kTwoPi * step_freq * t)) + std::abs(rng.normal(0.05));
    }
    for (double on : rng.poisson_times(w.in, w.out, d.burst_rate_class)) {
        const double len = rng.uniform(2.0, 6.0);
        const double amp = rng.uniform(0.05, 0.2);
        const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil((on - w.t0) * kAccRate)));
        const auto last = std::min(n, static_cast<std::size_t>((on + len - w.t0) * kAccRate));
        for (std::size_t i = first; i < last; ++i) {
            intensity[i] += amp * std::sin(std::numbers::pi * (acc[0].time_at(i) - on) / len);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) {
            acc[static_cast<std::size_t>(k)].values[i] =
                round_to(g[k] * (1.0 + intensity[i]) + rng.normal(cfg.noise.acc_g), 1e-3);
        }
    }
    return acc;
}

SensorTrace simulate_st(const StudentTrait& trait, const Window& w, const SynthConfig& cfg, Rng& rng) {
    const auto n = static_cast<std::size_t>((w.t1 - w.t0) * kStRate);
    SensorTrace st = make_trace(Channel::ST, w.t0, kStRate, n);
    const double ph = rng.uniform(0.0, kTwoPi);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kStRate;
        st.values[i] = round_to(trait.skin_c + 0.3 * std::sin(kTwoPi * t / 1800.0 + ph) + rng.normal(cfg.noise.st_c), 0.01);
    }
    return st;
}

SessionSignals simulate(const StudentTrait& trait, const Drives& d, const ClassPlan& plan, const SynthConfig& cfg,
                        Rng& rng, bool artifact) {
    Window w;
    w.t0 = plan.info.scheduled_start - cfg.margin_seconds;
    w.t1 = plan.info.scheduled_end + cfg.margin_seconds;
    w.in = std::max(w.t0, plan.actual_start + rng.uniform(-15.0, 15.0));
    w.out = std::min(w.t1, plan.actual_end + rng.uniform(-15.0, 15.0));

    SessionSignals s;
    s.segment.traces.push_back(simulate_eda(trait, d, plan, w, cfg, rng, s.n_scr, artifact));
    s.segment.traces.push_back(simulate_bvp(trait, d, w, cfg, rng));
    for (auto& a : simulate_acc(d, w, cfg, rng)) s.segment.traces.push_back(std::move(a));
    s.segment.traces.push_back(simulate_st(trait, w, cfg, rng));
    return s;
}

StudentTrait draw_trait(Rng& rng) {
    StudentTrait t;
    t.mean.behavioural = std::clamp(3.5 + rng.normal(0.6), 1.5, 4.8);
    t.mean.emotional = std::clamp(3.4 + rng.normal(0.6), 1.5, 4.8);
    t.mean.cognitive = std::clamp(3.5 + rng.normal(0.6), 1.5, 4.8);
    t.tonic_us = rng.uniform(0.4, 3.0);
    t.rr_ms = rng.uniform(700.0, 950.0);
    t.skin_c = rng.uniform(32.0, 34.5);
    return t;
}

Latent draw_latent(const StudentTrait& trait, double sd, Rng& rng) {
    return {rng.truncated_normal(trait.mean.behavioural, sd, 1.0, 5.0),
            rng.truncated_normal(trait.mean.emotional, sd, 1.0, 5.0),
            rng.truncated_normal(trait.mean.cognitive, sd, 1.0, 5.0)};
}

int likert(double dimension, double step_prob, Rng& rng) {
    int q = static_cast<int>(std::lround(dimension - 3.0));
    if (step_prob > 0.0 && rng.bernoulli(step_prob)) q += rng.bernoulli(0.5) ? 1 : -1;
    return std::clamp(q, -2, 2);
}

SurveyResponse draw_survey(const std::string& pid, const ClassPlan& plan, const Latent& l, double step, Rng& rng) {
    SurveyResponse s;
    s.participant_id = pid;
    s.class_id = plan.info.class_id;
    s.submitted_at = std::round(plan.actual_end + rng.uniform(60.0, 900.0));
    s.q[0] = likert(l.behavioural, step, rng);
    s.q[1] = -likert(l.behavioural, step, rng);
    s.q[2] = likert(l.emotional, step, rng);
    s.q[3] = -likert(l.emotional, step, rng);
    s.q[4] = likert(l.cognitive, step, rng);
    s.completion_seconds = std::round(rng.uniform(20.0, 120.0));
    return s;
}

EnvTrace simulate_env(const std::string& room, Date date, std::span<const ClassPlan> classes,
                      const std::map<std::string, Latent>& class_mean, const SynthConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    const double day0 = utc_from_local(date, 9 * 3600.0, cfg.tz);
    const double day1 = utc_from_local(date, 15 * 3600.0 + 35 * 60.0, cfg.tz);
    const double offset = std::floor(rng.uniform(0.0, 60.0));
    const double noise = cfg.noise.env;

    EnvTrace env;
    env.room_id = room;
    double co2 = 430.0 + rng.uniform(0.0, 30.0);
    double next_sample = day0 + offset;
    for (double t = day0; t < day1; t += 60.0) {
        std::size_t occupants = 0;
        const ClassPlan* active = nullptr;
        for (const auto& c : classes) {
            if (c.info.room_id == room && t >= c.actual_start && t < c.actual_end) {
                occupants = c.info.enrolled.size() + 1;
                active = &c;
            }
        }
        co2 += cfg.couplings.c_env * static_cast<double>(occupants) - (co2 - 420.0) / 25.0;
        while (next_sample < t + 60.0 && next_sample < day1) {
            EnvSample s;
            s.timestamp = next_sample;
            s.co2_ppm = round_to(std::max(0.0, co2 + rng.normal(5.0 * noise)), 1.0);
            s.temperature_c = round_to(21.0 + 0.004 * (co2 - 420.0) + rng.normal(0.1 * noise), 0.1);
            s.humidity_pct = round_to(std::clamp(45.0 + 0.01 * (co2 - 420.0) + rng.normal(0.5 * noise), 0.0, 100.0), 0.1);
            double sound = 38.0;
            if (active) {
                const auto it = class_mean.find(active->info.class_id);
                const double b = it == class_mean.end() ? 3.0 : it->second.behavioural;
                sound = 58.0 - 3.0 * (b - 3.0);
            }
            s.sound_db = round_to(sound + rng.normal(2.0 * noise), 0.1);
            env.samples.push_back(s);
            next_sample += kEnvPeriod;
        }
    }
    return env;
}

}  // namespace

void validate(const SynthConfig& c) {
    if (c.n_students == 0 || c.n_teachers == 0 || c.n_groups == 0 || c.days == 0 || c.classes_per_day == 0) {
        throw ValidationError("synth counts must all be >= 1");
    }
    if (c.n_groups > c.n_students) throw ValidationError("more groups than students");
    if (c.couplings.c_acc > 0.0) throw ValidationError("c_acc must be <= 0");
    if (c.survey_rate < 0.0 || c.survey_rate > 1.0) throw ValidationError("survey_rate must lie in [0, 1]");
    if (c.artifact_rate < 0.0 || c.artifact_rate > 1.0) throw ValidationError("artifact_rate must lie in [0, 1]");
    if (c.noise.survey_step < 0.0 || c.noise.survey_step > 1.0) throw ValidationError("survey_step must lie in [0, 1]");
    if (!(c.class_minutes >= 2.0)) throw ValidationError("class_minutes must be >= 2");
    if (c.margin_seconds < 0.0 || c.boundary_jitter_seconds < 0.0) throw ValidationError("negative margin or jitter");
    if (c.boundary_jitter_seconds > c.margin_seconds) throw ValidationError("boundary jitter exceeds recording margin");
    const auto starts = period_starts(c);
    const double first = starts.front() - c.margin_seconds;
    const double last = starts.back() + c.class_minutes * 60.0 + c.margin_seconds;
    if (first < 9 * 3600.0 || last > 15 * 3600.0 + 35 * 60.0) {
        throw ValidationError("timetable with margins does not fit between 09:00 and 15:35");
    }
    for (std::size_t i = 1; i < starts.size(); ++i) {
        if (starts[i] - starts[i - 1] < c.class_minutes * 60.0 + 2.0 * c.margin_seconds) {
            throw ValidationError("classes too long for " + std::to_string(c.classes_per_day) + " periods per day");
        }
    }
}

std::uint64_t substream_seed(std::uint64_t root, std::string_view key, std::uint64_t index) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : key) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return splitmix(splitmix(root) ^ h ^ splitmix(index + 1));
}

std::vector<double> period_starts(const SynthConfig& c) {
    const double first = 9.5 * 3600.0;
    const double last = 14.5 * 3600.0;
    std::vector<double> out;
    for (std::size_t p = 0; p < c.classes_per_day; ++p) {
        const double frac = c.classes_per_day == 1 ? 0.0 : static_cast<double>(p) / static_cast<double>(c.classes_per_day - 1);
        out.push_back(std::round((first + frac * (last - first)) / 60.0) * 60.0);
    }
    return out;
}

std::vector<Date> school_days(Date start, std::size_t n) {
    std::vector<Date> out;
    std::chrono::sys_days d{start};
    while (out.size() < n) {
        const std::chrono::weekday wd{d};
        if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) out.emplace_back(d);
        d += std::chrono::days{1};
    }
    return out;
}

SessionSignals simulate_session(const StudentTrait& trait, const Latent& latent, const ClassPlan& plan,
                                const SynthConfig& config, std::uint64_t rng_seed, bool artifact) {
    Rng rng(rng_seed);
    return simulate(trait, drives_for(latent, config.couplings), plan, config, rng, artifact);
}

SessionSignals simulate_teacher(const ClassPlan& plan, const SynthConfig& config, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    StudentTrait trait;
    trait.tonic_us = rng.uniform(1.0, 4.0);
    trait.rr_ms = rng.uniform(750.0, 1000.0);
    trait.skin_c = rng.uniform(32.5, 34.0);
    Drives d = drives_for(Latent{}, SynthCouplings{0.0, 0.0, 0.0, 0.0});
    d.shared_response = 0.8;
    return simulate(trait, d, plan, config, rng, false);
}

CohortSummary generate_cohort(const SynthConfig& cfg, const fs::path& out_dir) {
    validate(cfg);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());
    fs::remove_all(out_dir / "participants", ec);

    std::vector<StudentTrait> traits;
    for (std::size_t s = 0; s < cfg.n_students; ++s) {
        Rng rng(substream_seed(cfg.seed, "trait/" + student_id(s)));
        traits.push_back(draw_trait(rng));
    }
    std::vector<std::vector<std::string>> groups(cfg.n_groups);
    for (std::size_t s = 0; s < cfg.n_students; ++s) groups[s % cfg.n_groups].push_back(student_id(s));

    const auto days = school_days(cfg.start_date, cfg.days);
    const auto starts = period_starts(cfg);

    CohortSummary summary;
    std::vector<ClassInfo> schedule;
    std::vector<SurveyResponse> surveys;
    std::vector<EnvTrace> env_all;
    std::string latents = "participant_id,class_id,behavioural,emotional,cognitive\n";

    for (std::size_t di = 0; di < days.size(); ++di) {
        const Date date = days[di];
        const unsigned weekday = std::chrono::weekday{std::chrono::sys_days{date}}.iso_encoding() - 1;

        std::vector<ClassPlan> plans;
        for (std::size_t p = 0; p < starts.size(); ++p) {
            ClassPlan plan;
            const std::size_t g = (di * cfg.classes_per_day + p) % cfg.n_groups;
            char id[16];
            std::snprintf(id, sizeof id, "C%04zu", schedule.size() + plans.size() + 1);
            plan.info.class_id = id;
            plan.info.room_id = room_id(g);
            plan.info.subject = kWeek[weekday % 5][p % 5];
            plan.info.date = date;
            plan.info.scheduled_start = utc_from_local(date, starts[p], cfg.tz);
            plan.info.scheduled_end = plan.info.scheduled_start + cfg.class_minutes * 60.0;
            plan.info.enrolled = groups[g];
            plan.info.teacher = teacher_id(static_cast<std::size_t>(plan.info.subject) % cfg.n_teachers);

            Rng rng(substream_seed(cfg.seed, "class/" + plan.info.class_id));
            const double j = cfg.boundary_jitter_seconds;
            plan.actual_start = std::round(plan.info.scheduled_start + rng.uniform(-j, j));
            plan.actual_end = std::round(plan.info.scheduled_end + rng.uniform(-j, j));
            plan.shared_events = rng.poisson_times(plan.actual_start, plan.actual_end, kSharedEventRate / 60.0);
            plans.push_back(std::move(plan));
        }

        std::map<std::string, ParticipantDay> recordings;
        std::map<std::string, Latent> class_mean;
        for (std::size_t p = 0; p < plans.size(); ++p) {
            const ClassPlan& plan = plans[p];
            Latent mean{0.0, 0.0, 0.0};
            for (const auto& pid : plan.info.enrolled) {
                const std::size_t s = static_cast<std::size_t>(std::stoul(pid.substr(1))) - 1;
                const std::string key = pid + "/" + format_date(date);
                Rng rng(substream_seed(cfg.seed, key, p));
                const Latent l = draw_latent(traits[s], cfg.noise.latent_sd, rng);
                const bool artifact = rng.bernoulli(cfg.artifact_rate);
                const bool surveyed = rng.bernoulli(cfg.survey_rate);
                if (surveyed) surveys.push_back(draw_survey(pid, plan, l, cfg.noise.survey_step, rng));
                SessionSignals sig = simulate_session(traits[s], l, plan, cfg, rng.next(), artifact);

                auto& day = recordings[pid];
                day.participant_id = pid;
                day.date = date;
                day.segments.push_back(std::move(sig.segment));
                mean.behavioural += l.behavioural;
                summary.n_sessions += 1;
                summary.n_artifacts += artifact ? 1 : 0;

                latents += pid + "," + plan.info.class_id + ",";
                csv::append_double(latents, l.behavioural);
                latents += ',';
                csv::append_double(latents, l.emotional);
                latents += ',';
                csv::append_double(latents, l.cognitive);
                latents += '\n';
            }
            mean.behavioural /= static_cast<double>(plan.info.enrolled.size());
            class_mean[plan.info.class_id] = mean;

            const std::string& tid = *plan.info.teacher;
            auto& tday = recordings[tid];
            tday.participant_id = tid;
            tday.role = Role::teacher;
            tday.date = date;
            tday.segments.push_back(
                simulate_teacher(plan, cfg, substream_seed(cfg.seed, tid + "/" + format_date(date), p)).segment);
        }

        for (const auto& [pid, day] : recordings) {
            write_e4_day(out_dir / "participants" / pid / format_date(date), day);
        }
        for (std::size_t g = 0; g < cfg.n_groups; ++g) {
            const std::string room = room_id(g);
            env_all.push_back(simulate_env(room, date, plans, class_mean, cfg,
                                           substream_seed(cfg.seed, "env/" + room + "/" + format_date(date))));
        }
        for (auto& plan : plans) schedule.push_back(std::move(plan.info));
    }

    // One trace per room across all days.
    std::vector<EnvTrace> rooms;
    for (std::size_t g = 0; g < cfg.n_groups; ++g) {
        EnvTrace r;
        r.room_id = room_id(g);
        for (const auto& e : env_all) {
            if (e.room_id == r.room_id) r.samples.insert(r.samples.end(), e.samples.begin(), e.samples.end());
        }
        rooms.push_back(std::move(r));
    }

    write_schedule(out_dir / "schedule.csv", schedule);
    write_surveys(out_dir / "surveys.csv", surveys);
    write_env_csv(out_dir / "env.csv", rooms);
    csv::write_file(out_dir / "latents.csv", latents);
    std::string cfg_text = "# synthetic cohort\ntimezone = ";
    csv::append_double(cfg_text, cfg.tz.offset_hours);
    cfg_text += "\nseed = " + std::to_string(cfg.seed) + "\n";
    csv::write_file(out_dir / "dataset.cfg", cfg_text);

    summary.n_classes = schedule.size();
    summary.n_surveys = surveys.size();
    return summary;
}

}  // namespace engage
