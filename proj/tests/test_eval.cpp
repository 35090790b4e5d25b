#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "engage/errors.hpp"
#include "engage/eval.hpp"
#include "engage/report.hpp"
#include "testutil.hpp"

using namespace engage;

namespace {

std::vector<std::string> group_names(std::size_t n) {
    std::vector<std::string> g;
    for (std::size_t i = 0; i < n; ++i) g.push_back((i < 9 ? "S0" : "S") + std::to_string(i + 1));
    return g;
}

// Overall engagement driven by eda_avg plus noise, with a few distractor columns.
std::vector<SessionRecord> planted_sessions(std::size_t n_participants, std::size_t per, std::uint64_t seed,
                                            double noise = 0.2) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<SessionRecord> out;
    const auto groups = group_names(n_participants);
    const Subject subjects[] = {Subject::Maths, Subject::English, Subject::Science};
    for (std::size_t p = 0; p < n_participants; ++p) {
        for (std::size_t s = 0; s < per; ++s) {
            SessionRecord r;
            r.features.participant_id = groups[p];
            r.features.class_id = "C" + std::to_string(1000 + s);
            r.subject = subjects[s % 3];
            const double x = n(rng);
            r.features.set("eda_avg", x);
            r.features.set("tonic_avg", n(rng));
            r.features.set("hrv_bpm", 70.0 + 5.0 * n(rng));
            r.features.set("acc_avg", n(rng));
            r.features.set("mean_co2", 600.0 + 50.0 * n(rng));
            const double y = std::clamp(3.0 + 0.8 * x + noise * n(rng), 1.0, 5.0);
            r.scores = EngagementScores{y, y, y, y};
            out.push_back(r);
        }
    }
    return out;
}

EvalOptions small_options() {
    EvalOptions o;
    o.grid.num_leaves = {3, 7};
    o.grid.learning_rates = {0.1};
    o.grid.n_rounds = {20, 60};
    return o;
}

}  // namespace

TEST(Folds, TwentyThreeIntoFive) {
    const auto g = group_names(23);
    const auto folds = make_group_folds(g, 5, 42);
    std::vector<std::size_t> sizes;
    for (const auto& f : folds) sizes.push_back(f.size());
    std::sort(sizes.rbegin(), sizes.rend());
    EXPECT_EQ(sizes, (std::vector<std::size_t>{5, 5, 5, 4, 4}));
}

TEST(Folds, KEqualsGroupsIsLoso) {
    const auto g = group_names(7);
    for (const auto& f : make_group_folds(g, 7, 3)) EXPECT_EQ(f.size(), 1u);
}

TEST(Folds, Deterministic) {
    const auto g = group_names(23);
    EXPECT_EQ(make_group_folds(g, 5, 42), make_group_folds(g, 5, 42));
    EXPECT_NE(make_group_folds(g, 5, 42), make_group_folds(g, 5, 43));
}

TEST(Folds, TooManyFolds) {
    const auto g = group_names(4);
    EXPECT_THROW(make_group_folds(g, 5, 1), ValidationError);
}

TEST(Folds, RepeatedIdsCollapse) {
    const std::vector<std::string> ids = {"a", "b", "a", "c", "b", "d"};
    const auto folds = make_group_folds(ids, 2, 9);
    std::size_t total = 0;
    for (const auto& f : folds) total += f.size();
    EXPECT_EQ(total, 4u);
}

TEST(FoldsProperty, ThousandPlansNoLeakage) {
    const auto g = group_names(23);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const std::size_t k = 2 + seed % 10;
        const auto folds = make_group_folds(g, k, seed);
        ASSERT_EQ(folds.size(), k);
        std::multiset<std::string> seen;
        for (const auto& f : folds) seen.insert(f.begin(), f.end());
        ASSERT_EQ(seen.size(), 23u);
        ASSERT_EQ(std::set<std::string>(seen.begin(), seen.end()).size(), 23u);
        for (std::size_t i = 0; i < k; ++i) {
            std::vector<std::string> train;
            for (std::size_t j = 0; j < k; ++j) {
                if (j != i) train.insert(train.end(), folds[j].begin(), folds[j].end());
            }
            EXPECT_NO_THROW(check_disjoint(train, folds[i]));
        }
    }
}

TEST(Folds, LeakageDetected) {
    const std::vector<std::string> a = {"S01", "S02"};
    const std::vector<std::string> b = {"S02"};
    EXPECT_THROW(check_disjoint(a, b), Error);
}

TEST(Metrics, Examples) {
    const auto m = score_predictions(std::vector<double>{1, 2}, std::vector<double>{1, 4});
    EXPECT_EQ(m.mae, 1.0);
    EXPECT_NEAR(m.rmse, std::sqrt(2.0), 1e-12);
    const auto z = score_predictions(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3});
    EXPECT_EQ(z.mae, 0.0);
    EXPECT_EQ(z.rmse, 0.0);
    EXPECT_THROW(score_predictions(std::vector<double>{1}, std::vector<double>{1, 2}), ValidationError);
}

TEST(MetricsProperty, MaeBelowRmse) {
    std::mt19937_64 rng(157);
    std::normal_distribution<double> n(0, 2);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> y(1 + rng() % 40), p(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] = n(rng);
            p[i] = n(rng);
        }
        const auto m = score_predictions(y, p);
        EXPECT_LE(m.mae, m.rmse + 1e-12);
    }
}

TEST(BaselineProperty, AverageRmseBelowRandomInExpectation) {
    std::mt19937_64 rng(163);
    std::uniform_int_distribution<int> likert(1, 5);
    double avg_total = 0.0;
    double rnd_total = 0.0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        std::vector<double> train(60), test(30);
        for (auto& v : train) v = likert(rng);
        for (auto& v : test) v = likert(rng);
        avg_total += score_predictions(test, baseline_average(train).predict(test.size())).rmse;
        auto r = baseline_random(train, trial);
        rnd_total += score_predictions(test, r.predict(test.size())).rmse;
    }
    EXPECT_LE(avg_total, rnd_total);
}

TEST(NestedCv, PlantedSignalAndCounts) {
    const auto sessions = planted_sessions(23, 10, 167);
    const auto data = assemble_dataset(sessions, all_families());
    const EvalOptions opt;  // default grid: 12 combinations
    const auto r = nested_cv(data, Target::overall, opt);
    ASSERT_EQ(r.folds.size(), 5u);
    for (const auto& f : r.folds) {
        EXPECT_EQ(f.inner_fits, 36u);
        EXPECT_LE(f.selected_features.size(), 10u);
        EXPECT_FALSE(f.selected_features.empty());
    }
    EXPECT_EQ(r.n_rows, 230u);
    EXPECT_EQ(r.n_groups, 23u);
    EXPECT_EQ(r.predictions.size(), 230u);
    EXPECT_LT(r.metrics.gbm.mae, r.metrics.random.mae);
    EXPECT_LT(r.metrics.gbm.mae, 0.75 * r.metrics.random.mae);
    EXPECT_LE(r.metrics.gbm.mae, r.metrics.gbm.rmse);
    EXPECT_EQ(r.folds[0].selected_features.front(), "eda_avg");
}

TEST(NestedCv, EverySplitDisjoint) {
    const auto sessions = planted_sessions(12, 8, 173);
    const auto data = assemble_dataset(sessions, all_families());
    const auto r = nested_cv(data, Target::overall, small_options());
    EXPECT_EQ(r.splits.size(), 5u + 5u * 3u);
    for (const auto& s : r.splits) {
        std::set<std::string> train(s.train_groups.begin(), s.train_groups.end());
        for (const auto& g : s.test_groups) EXPECT_FALSE(train.count(g)) << g;
    }
    std::set<std::string> tested;
    for (const auto& f : r.folds) tested.insert(f.test_groups.begin(), f.test_groups.end());
    EXPECT_EQ(tested.size(), 12u);
}

TEST(NestedCv, Deterministic) {
    const auto sessions = planted_sessions(10, 8, 179);
    const auto data = assemble_dataset(sessions, all_families());
    EvalRun a;
    a.options = small_options();
    a.reports.push_back(nested_cv(data, Target::overall, a.options));
    EvalRun b = a;
    b.reports = {nested_cv(data, Target::overall, b.options)};
    EXPECT_EQ(report_json(a), report_json(b));
}

TEST(NestedCv, MetricsAggregateTestRows) {
    const auto sessions = planted_sessions(10, 6, 181);
    const auto data = assemble_dataset(sessions, all_families());
    const auto r = nested_cv(data, Target::overall, small_options());
    std::vector<double> y, p;
    for (const auto& pr : r.predictions) {
        y.push_back(pr.y);
        p.push_back(pr.gbm);
    }
    const auto m = score_predictions(y, p);
    EXPECT_DOUBLE_EQ(m.mae, r.metrics.gbm.mae);
    EXPECT_DOUBLE_EQ(m.rmse, r.metrics.gbm.rmse);
}

TEST(Loso, OneIterationPerParticipant) {
    const auto sessions = planted_sessions(23, 6, 191);
    const auto data = assemble_dataset(sessions, all_families());
    const auto r = loso_eval(data, Target::overall, GbmParams{7, 0.1, 50, 5, 0});
    EXPECT_EQ(r.folds.size(), 23u);
    EXPECT_EQ(r.per_participant.size(), 23u);
    for (const auto& pp : r.per_participant) {
        EXPECT_EQ(pp.n, 6u);
        EXPECT_LE(pp.q1, pp.median);
        EXPECT_LE(pp.median, pp.q3);
        EXPECT_LE(pp.min, pp.q1);
        EXPECT_LE(pp.q3, pp.max);
    }
}

TEST(Loso, SingleGroupRejected) {
    const auto sessions = planted_sessions(1, 12, 193);
    const auto data = assemble_dataset(sessions, all_families());
    EXPECT_THROW(loso_eval(data, Target::overall, GbmParams{}), ValidationError);
}

TEST(Breakdown, AverageBaselineAlignment) {
    std::vector<Prediction> preds;
    for (int i = 0; i < 4; ++i) preds.push_back({"S01", "C" + std::to_string(i), 0, 3.0, 3.0, 3.5, 3.0, 2.0});
    const auto b = participant_breakdown(preds);
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0].mae, b[0].average_mae);
    EXPECT_EQ(b[0].median, 0.0);
}

TEST(Regimes, Parse) {
    const auto r = parse_regimes("# comment\nall all\neda EDA\n\nboth EDA+HRV\nmaths all subject=Maths\n");
    ASSERT_EQ(r.size(), 4u);
    EXPECT_EQ(r[0].families.size(), 5u);
    EXPECT_EQ(r[1].families, (std::vector<Family>{Family::EDA}));
    EXPECT_EQ(r[2].families.size(), 2u);
    EXPECT_EQ(*r[3].subject, Subject::Maths);
    EXPECT_THROW(parse_regimes("x BOGUS\n"), ValidationError);
    EXPECT_THROW(parse_regimes("x EDA subject=Art\n"), ValidationError);
}

TEST(Regimes, SweepShapes) {
    const auto sessions = planted_sessions(12, 12, 197);
    const auto regimes = parse_regimes("eda EDA\nboth EDA+HRV\nall all\n");
    const auto res = regime_sweep(sessions, regimes, kAllTargets, small_options());
    EXPECT_EQ(res.size(), 12u);
    for (const auto& r : res) {
        ASSERT_TRUE(r.report.has_value());
        EXPECT_TRUE(r.notice.empty());
    }
    EXPECT_EQ(res[0].report->families, (std::vector<Family>{Family::EDA}));
}

TEST(Regimes, SmallSubjectSkipped) {
    auto sessions = planted_sessions(12, 12, 199);
    for (std::size_t i = 0; i < 10; ++i) sessions[i * 12].subject = Subject::Chapel;
    const auto regimes = parse_regimes("chapel all subject=Chapel\nmaths all subject=Maths\n");
    const std::vector<Target> t = {Target::overall};
    const auto res = regime_sweep(sessions, regimes, t, small_options());
    ASSERT_EQ(res.size(), 2u);
    EXPECT_FALSE(res[0].report.has_value());
    EXPECT_NE(res[0].notice.find("30"), std::string::npos);
    ASSERT_TRUE(res[1].report.has_value());
    EXPECT_EQ(*res[1].report->subject, Subject::Maths);
    for (const auto& p : res[1].report->predictions) {
        EXPECT_NE(std::find_if(sessions.begin(), sessions.end(),
                               [&](const SessionRecord& s) {
                                   return s.features.participant_id == p.participant_id &&
                                          s.features.class_id == p.class_id && s.subject == Subject::Maths;
                               }),
                  sessions.end());
    }
}

TEST(Regimes, EmptyListRejected) {
    const auto sessions = planted_sessions(6, 6, 211);
    EXPECT_THROW(regime_sweep(sessions, std::vector<Regime>{}, kAllTargets, small_options()), ValidationError);
}

TEST(Report, TableShapes) {
    engage::test::TempDir dir;
    const auto sessions = planted_sessions(8, 8, 223);
    const auto data = assemble_dataset(sessions, all_families());
    EvalRun run;
    run.options = small_options();
    for (Target t : kAllTargets) run.reports.push_back(nested_cv(data, t, run.options));
    write_report(run, dir / "report.json");

    const auto t6 = csv::read_file(dir / "table6.csv");
    csv::LineReader lines(t6);
    std::string_view line;
    ASSERT_TRUE(lines.next(line));
    EXPECT_EQ(line, kTable6Header);
    std::size_t rows = 0;
    std::size_t mae_cells = 0;
    while (lines.next(line)) {
        const auto f = csv::split(line);
        ASSERT_EQ(f.size(), 9u);
        for (std::size_t i = 1; i <= 4; ++i) mae_cells += !f[i].empty();
        ++rows;
    }
    EXPECT_EQ(rows, 4u);
    EXPECT_EQ(mae_cells, 16u);

    EXPECT_EQ(csv::read_file(dir / "table7.csv"), std::string(kTable7Header) + "\n");

    const auto pp = csv::read_file(dir / "per_participant_errors.csv");
    csv::LineReader pl(pp);
    pl.next(line);
    std::size_t pp_rows = 0;
    while (pl.next(line)) ++pp_rows;
    EXPECT_EQ(pp_rows, 8u * 4u);
}

TEST(Report, RegenerationIsIdentical) {
    engage::test::TempDir dir;
    const auto sessions = planted_sessions(8, 8, 227);
    EvalRun run;
    run.options = small_options();
    run.reports.push_back(nested_cv(assemble_dataset(sessions, all_families()), Target::overall, run.options));
    const std::vector<Target> t = {Target::overall};
    run.regimes = regime_sweep(sessions, parse_regimes("eda EDA\n"), t, run.options);
    write_report(run, dir / "a" / "report.json");
    emit_report_files(csv::read_file(dir / "a" / "report.json"), dir / "b");
    for (const char* f : {"table6.csv", "table7.csv", "regime_table.csv", "per_participant_errors.csv"}) {
        EXPECT_EQ(csv::read_file(dir / "a" / f), csv::read_file(dir / "b" / f)) << f;
    }
}

TEST(Report, RejectsForeignJson) {
    engage::test::TempDir dir;
    EXPECT_THROW(emit_report_files("{\"a\": 1}", dir.path()), ValidationError);
    EXPECT_THROW(emit_report_files("not json", dir.path()), ValidationError);
}
