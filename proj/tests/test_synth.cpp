#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "engage/errors.hpp"
#include "engage/io.hpp"
#include "engage/preprocess.hpp"
#include "engage/resample.hpp"
#include "engage/synth.hpp"
#include "testutil.hpp"

using namespace engage;
namespace fs = std::filesystem;

namespace {

SynthConfig small_config(std::size_t days = 2) {
    SynthConfig c;
    c.days = days;
    return c;
}

ClassPlan plan_at(double start, double minutes = 10.0) {
    ClassPlan p;
    p.info.class_id = "C0001";
    p.info.scheduled_start = start;
    p.info.scheduled_end = start + minutes * 60.0;
    p.actual_start = start;
    p.actual_end = p.info.scheduled_end;
    return p;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = csv::read_file(e.path());
    }
    return out;
}

// In-class ACC magnitude mean of a simulated session.
double class_movement(const SessionSignals& s, const ClassPlan& plan) {
    const auto* x = s.segment.find(Channel::ACC_X);
    const auto* y = s.segment.find(Channel::ACC_Y);
    const auto* z = s.segment.find(Channel::ACC_Z);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < x->size(); ++i) {
        const double t = x->time_at(i);
        if (t < plan.actual_start + 30 || t >= plan.actual_end - 30) continue;
        const double m = std::sqrt(x->values[i] * x->values[i] + y->values[i] * y->values[i] + z->values[i] * z->values[i]);
        sum += std::abs(m - 1.0);
        ++n;
    }
    return sum / static_cast<double>(n);
}

}  // namespace

TEST(SynthConfig, Validation) {
    EXPECT_NO_THROW(validate(SynthConfig{}));
    SynthConfig c;
    c.couplings.c_acc = 0.2;
    EXPECT_THROW(validate(c), ValidationError);
    c = {};
    c.n_students = 0;
    EXPECT_THROW(validate(c), ValidationError);
    c = {};
    c.survey_rate = 1.5;
    EXPECT_THROW(validate(c), ValidationError);
    c = {};
    c.classes_per_day = 40;
    EXPECT_THROW(validate(c), ValidationError);
    c = {};
    c.n_groups = 30;
    EXPECT_THROW(validate(c), ValidationError);
}

TEST(SynthCalendar, SkipsWeekends) {
    const auto d = school_days(parse_date("2019-09-13"), 3);  // a Friday
    ASSERT_EQ(d.size(), 3u);
    EXPECT_EQ(format_date(d[0]), "2019-09-13");
    EXPECT_EQ(format_date(d[1]), "2019-09-16");
    EXPECT_EQ(format_date(d[2]), "2019-09-17");
    const auto p = period_starts(SynthConfig{});
    EXPECT_EQ(p.size(), 5u);
    EXPECT_GE(p.front() - 330.0, 9 * 3600.0);
    EXPECT_LE(p.back() + 600.0 + 330.0, 15 * 3600.0 + 35 * 60.0);
}

TEST(SynthSeeds, SubstreamsDiffer) {
    EXPECT_EQ(substream_seed(42, "S01/2019-09-09", 0), substream_seed(42, "S01/2019-09-09", 0));
    EXPECT_NE(substream_seed(42, "S01/2019-09-09", 0), substream_seed(42, "S01/2019-09-09", 1));
    EXPECT_NE(substream_seed(42, "S01/2019-09-09", 0), substream_seed(42, "S02/2019-09-09", 0));
    EXPECT_NE(substream_seed(42, "S01/2019-09-09", 0), substream_seed(43, "S01/2019-09-09", 0));
}

TEST(SynthCohort, ShapeAndRoundTrip) {
    engage::test::TempDir dir;
    const auto cfg = small_config(3);
    const auto summary = generate_cohort(cfg, dir.path());
    EXPECT_EQ(summary.n_classes, 15u);

    for (const auto& day : school_days(cfg.start_date, cfg.days)) {
        std::size_t students = 0;
        for (const auto& e : fs::directory_iterator(dir / "participants")) {
            const auto name = e.path().filename().string();
            if (name[0] == 'S' && fs::is_directory(e.path() / format_date(day))) ++students;
        }
        EXPECT_EQ(students, 23u);
    }

    const auto ss = load_schedule_and_surveys(dir / "schedule.csv", dir / "surveys.csv", cfg.tz);
    EXPECT_EQ(ss.classes.size(), summary.n_classes);
    EXPECT_EQ(ss.surveys.size(), summary.n_surveys);
    const double rate = static_cast<double>(summary.n_surveys) / static_cast<double>(summary.n_sessions);
    EXPECT_NEAR(rate, 0.353, 0.1);
    const auto env = load_env_csv(dir / "env.csv");
    EXPECT_EQ(env.size(), cfg.n_groups);

    std::size_t sessions = 0;
    for (const auto& e : fs::directory_iterator(dir / "participants")) {
        const auto pid = e.path().filename().string();
        for (const auto& d : fs::directory_iterator(e.path())) {
            const auto day = load_e4_day(d.path(), pid, pid[0] == 'T' ? Role::teacher : Role::student, {cfg.tz});
            for (const auto& seg : day.segments) {
                for (auto c : {Channel::EDA, Channel::BVP, Channel::ACC_X, Channel::ACC_Y, Channel::ACC_Z, Channel::ST}) {
                    EXPECT_NE(seg.find(c), nullptr);
                }
            }
            if (pid[0] == 'S') sessions += day.segments.size();
        }
    }
    EXPECT_EQ(sessions, summary.n_sessions);

    const auto latents = csv::read_file(dir / "latents.csv");
    EXPECT_EQ(latents.substr(0, latents.find('\n')), "participant_id,class_id,behavioural,emotional,cognitive");
}

TEST(SynthCohort, ByteIdenticalForSameSeed) {
    engage::test::TempDir a, b, c;
    auto cfg = small_config(1);
    generate_cohort(cfg, a.path());
    generate_cohort(cfg, b.path());
    EXPECT_EQ(tree_contents(a.path()), tree_contents(b.path()));
    cfg.seed = 7;
    generate_cohort(cfg, c.path());
    EXPECT_NE(tree_contents(a.path()), tree_contents(c.path()));
}

TEST(SynthCohort, UnwritableDirectory) {
    engage::test::TempDir dir;
    engage::test::write(dir / "file", "x");
    EXPECT_THROW(generate_cohort(small_config(1), dir / "file" / "sub"), IoError);
}

TEST(SynthSession, EmotionRaisesScrCount) {
    const SynthConfig cfg;
    const auto plan = plan_at(1568165400.0);
    StudentTrait trait;
    double low = 0.0;
    double high = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        low += static_cast<double>(simulate_session(trait, Latent{3, 1, 3}, plan, cfg, 1000 + s).n_scr);
        high += static_cast<double>(simulate_session(trait, Latent{3, 5, 3}, plan, cfg, 2000 + s).n_scr);
    }
    EXPECT_GT(high / 50.0, low / 50.0);
}

TEST(SynthSession, ZeroCouplingsDecouple) {
    SynthConfig cfg;
    cfg.couplings = {0.0, 0.0, 0.0, 0.0};
    const auto plan = plan_at(1568165400.0);
    StudentTrait trait;
    std::vector<double> e, b, scr, move;
    for (std::uint64_t s = 0; s < 300; ++s) {
        const Latent l{1.0 + 4.0 * static_cast<double>((s * 7) % 300) / 299.0,
                       1.0 + 4.0 * static_cast<double>((s * 13) % 300) / 299.0, 3.0};
        const auto sig = simulate_session(trait, l, plan, cfg, substream_seed(5, "zero", s));
        e.push_back(l.emotional);
        b.push_back(l.behavioural);
        scr.push_back(static_cast<double>(sig.n_scr));
        move.push_back(class_movement(sig, plan));
    }
    EXPECT_LT(std::abs(correlation(e, scr)), 0.1);
    EXPECT_LT(std::abs(correlation(b, move)), 0.1);
}

TEST(SynthSession, BehaviourReducesMovement) {
    const SynthConfig cfg;
    const auto plan = plan_at(1568165400.0);
    StudentTrait trait;
    double low = 0.0;
    double high = 0.0;
    for (std::uint64_t s = 0; s < 30; ++s) {
        low += class_movement(simulate_session(trait, Latent{1.5, 3, 3}, plan, cfg, 3000 + s), plan);
        high += class_movement(simulate_session(trait, Latent{4.5, 3, 3}, plan, cfg, 4000 + s), plan);
    }
    EXPECT_GT(low, high);
}

TEST(SynthSession, PassesQualityGate) {
    const SynthConfig cfg;
    const auto plan = plan_at(1568165400.0, 40.0);
    std::size_t accepted = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        StudentTrait trait;
        trait.tonic_us = 0.4 + 2.6 * static_cast<double>(s) / 99.0;
        const auto sig = simulate_session(trait, Latent{3, 1.0 + 0.04 * s, 3}, plan, cfg, 5000 + s);
        const auto eda = slice(*sig.segment.find(Channel::EDA), plan.actual_start, plan.actual_end);
        accepted += eda_quality_gate(eda).accepted;
    }
    EXPECT_GE(accepted, 95u);
}

TEST(SynthSession, ArtifactIsRejected) {
    const SynthConfig cfg;
    const auto plan = plan_at(1568165400.0);
    const auto sig = simulate_session(StudentTrait{}, Latent{}, plan, cfg, 77, true);
    const auto eda = slice(*sig.segment.find(Channel::EDA), plan.actual_start, plan.actual_end);
    EXPECT_FALSE(eda_quality_gate(eda).accepted);
}
