#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "engage/timeutil.hpp"
#include "engage/types.hpp"

namespace engage {

struct SynthNoise {
    double eda_us = 0.003;      // white noise on EDA
    double bvp = 0.05;          // relative to pulse amplitude
    double rr_ms = 15.0;        // beat-to-beat jitter
    double acc_g = 0.01;
    double st_c = 0.02;
    double env = 1.0;           // scales all environment noise
    double survey_step = 0.25;  // probability of a +-1 Likert step per item
    double latent_sd = 0.5;     // session latent spread around the student trait
};

struct SynthCouplings {
    double c_eda = 0.6;   // emotional -> SCR rate
    double c_hrv = 0.6;   // cognitive -> HF amplitude of RR modulation
    double c_acc = -0.6;  // behavioural -> in-class movement (<= 0)
    double c_env = 0.8;   // CO2 ppm per occupied student-minute
};

struct SynthConfig {
    std::size_t n_students = 23;
    std::size_t n_teachers = 6;
    std::size_t n_groups = 3;
    std::size_t days = 16;
    std::size_t classes_per_day = 5;
    double class_minutes = 10.0;
    double margin_seconds = 330.0;      // recording before/after the scheduled class
    double boundary_jitter_seconds = 180.0;
    double survey_rate = 0.353;
    double artifact_rate = 0.02;        // sessions with a contact-loss stretch
    Date start_date{std::chrono::year{2019}, std::chrono::month{9}, std::chrono::day{9}};
    TimeZone tz{10.0};
    std::uint64_t seed = 42;
    SynthCouplings couplings{};
    SynthNoise noise{};
};

/// Throws ValidationError for zero counts, c_acc > 0, rates outside [0, 1] or a timetable
/// that does not fit the school day.
void validate(const SynthConfig& config);

struct Latent {
    double behavioural = 3.0;
    double emotional = 3.0;
    double cognitive = 3.0;
};

struct StudentTrait {
    Latent mean;
    double tonic_us = 1.0;   // EDA baseline
    double rr_ms = 800.0;
    double skin_c = 33.0;
};

struct ClassPlan {
    ClassInfo info;
    double actual_start = 0.0;
    double actual_end = 0.0;
    std::vector<double> shared_events;  // class-wide stimulus times (UTC)
};

/// Sensor recordings of one participant over one class window with margins.
struct SessionSignals {
    Segment segment;
    std::size_t n_scr = 0;  // planted SCR count inside the class
};

/// One (student, class) recording. `rng_seed` fixes every random draw.
SessionSignals simulate_session(const StudentTrait& trait, const Latent& latent, const ClassPlan& plan,
                                const SynthConfig& config, std::uint64_t rng_seed, bool artifact = false);

/// Teacher recording (neutral latent, responds to the shared class events).
SessionSignals simulate_teacher(const ClassPlan& plan, const SynthConfig& config, std::uint64_t rng_seed);

struct LatentRow {
    std::string participant_id;
    std::string class_id;
    Latent latent;
};

struct CohortSummary {
    std::size_t n_classes = 0;
    std::size_t n_sessions = 0;
    std::size_t n_surveys = 0;
    std::size_t n_artifacts = 0;
};

/// Writes schedule.csv, surveys.csv, env.csv, latents.csv, dataset.cfg and
/// participants/<id>/<date>/segment_NNN/ under `out_dir`. Output is a pure function of the config.
CohortSummary generate_cohort(const SynthConfig& config, const std::filesystem::path& out_dir);

/// Substream seed for (root, participant, date) style keys.
std::uint64_t substream_seed(std::uint64_t root, std::string_view key, std::uint64_t index = 0);

/// Scheduled local start (seconds after midnight) of each period.
std::vector<double> period_starts(const SynthConfig& config);

/// Weekdays from start_date, skipping Saturdays and Sundays.
std::vector<Date> school_days(Date start, std::size_t n);

}  // namespace engage
