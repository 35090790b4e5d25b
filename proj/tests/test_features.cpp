#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <set>

#include "engage/dataset.hpp"
#include "engage/errors.hpp"
#include "engage/features.hpp"
#include "testutil.hpp"

using namespace engage;

namespace {

// Unconstrained DTW by memoised recursion over (i, j).
double dtw_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    std::vector<double> memo(n * m, -1.0);
    std::function<double(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t j) -> double {
        double& slot = memo[i * m + j];
        if (slot >= 0.0) return slot;
        const double c = std::abs(a[i] - b[j]);
        double best;
        if (i == 0 && j == 0) {
            best = 0.0;
        } else {
            best = std::numeric_limits<double>::infinity();
            if (i > 0) best = std::min(best, rec(i - 1, j));
            if (j > 0) best = std::min(best, rec(i, j - 1));
            if (i > 0 && j > 0) best = std::min(best, rec(i - 1, j - 1));
        }
        return slot = c + best;
    };
    return rec(n - 1, m - 1);
}

EdaDecomposition flat_decomp(std::size_t n, double v) {
    EdaDecomposition d;
    d.mixed.assign(n, v);
    d.tonic.assign(n, v);
    d.phasic.assign(n, 0.0);
    d.driver.assign(n, 0.0);
    d.residual.assign(n, 0.0);
    return d;
}

SurveyResponse survey(std::array<int, 5> q) {
    SurveyResponse s;
    for (int i = 0; i < 5; ++i) s.q[i] = q[static_cast<std::size_t>(i)];
    return s;
}

SessionRecord session(const std::string& pid, const std::string& cid, double eda, std::optional<double> hrv,
                      bool labelled) {
    SessionRecord r;
    r.features.participant_id = pid;
    r.features.class_id = cid;
    r.features.set("eda_avg", eda);
    r.features.set("hrv_bpm", hrv);
    r.features.set("mean_co2", 700.0);
    if (labelled) r.scores = engagement_scores(survey({1, 0, 1, 0, 1}));
    return r;
}

}  // namespace

TEST(Registry, SixtyFourUniqueNames) {
    const auto& reg = feature_registry();
    EXPECT_EQ(reg.size(), 64u);
    std::set<std::string> names;
    for (const auto& f : reg) names.insert(f.name);
    EXPECT_EQ(names.size(), reg.size());
    for (const char* n : {"eda_avg", "tonic_a_p", "hrv_rmssd", "acc_pcc_s", "mean_co2", "level_3", "sktemp_min"}) {
        EXPECT_TRUE(names.count(n)) << n;
    }
    EXPECT_THROW(feature_index("nope"), ValidationError);
}

TEST(EdaFeatures, ZeroPhasic) {
    const auto d = flat_decomp(240, 0.0);
    const ArousalProfile p = arousal_profile(d.phasic, 4.0, {});
    const auto f = eda_session_features(d, d, p);
    EXPECT_EQ(*f.get("phasic_n_p"), 0.0);
    EXPECT_FALSE(f.get("phasic_a_p").has_value());
}

TEST(EdaFeatures, TonicAreaIsRectangle) {
    EXPECT_DOUBLE_EQ(trapezoid_auc(std::vector<double>(241, 1.0), 4.0), 60.0);
    const auto raw = flat_decomp(241, 1.0);
    const auto p = arousal_profile(raw.phasic, 4.0, {});
    const auto f = eda_session_features(normalize_eda(raw), raw, p);
    EXPECT_DOUBLE_EQ(*f.get("tonic_auc"), 60.0);
}

TEST(EdaFeatures, MeanPeakAmplitude) {
    auto d = flat_decomp(480, 0.0);
    d.phasic[100] = 0.1;
    d.phasic[300] = 0.3;
    const auto peaks = detect_scr_peaks(d.phasic);
    const auto p = arousal_profile(d.phasic, 4.0, peaks);
    const auto f = eda_session_features(d, d, p);
    EXPECT_EQ(*f.get("phasic_n_p"), 2.0);
    EXPECT_NEAR(*f.get("phasic_a_p"), 0.2, 1e-12);
    EXPECT_EQ(*f.get("num_arouse"), 2.0);
}

TEST(Pearson, Examples) {
    const std::vector<double> x = {1, 2, 3};
    EXPECT_NEAR(*pearson_sync(x, x), 1.0, 1e-12);
    EXPECT_NEAR(*pearson_sync(x, std::vector<double>{3, 2, 1}), -1.0, 1e-12);
    EXPECT_NEAR(*pearson_sync(x, std::vector<double>{1, 3, 2}), 0.5, 1e-12);
    EXPECT_FALSE(pearson_sync(x, std::vector<double>{2, 2, 2}).has_value());
    EXPECT_FALSE(pearson_sync(std::vector<double>{1, 2}, std::vector<double>{2, 1}).has_value());
}

TEST(PearsonProperty, BoundsAndAffineInvariance) {
    std::mt19937_64 rng(101);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(3 + rng() % 50), b(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = n(rng);
            b[i] = 0.5 * a[i] + n(rng);
        }
        const double r = *pearson_sync(a, b);
        EXPECT_LE(std::abs(r), 1.0 + 1e-12);
        const double s = std::exp(n(rng));
        std::vector<double> a2(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) a2[i] = s * a[i] - 3.0;
        EXPECT_NEAR(*pearson_sync(a2, b), r, 1e-9);
    }
}

TEST(Dtw, Examples) {
    const std::vector<double> x = {0.3, -1.0, 2.0, 0.5};
    EXPECT_EQ(dtw_distance(x, x), 0.0);
    EXPECT_EQ(dtw_distance(std::vector<double>{0, 0, 1}, std::vector<double>{0, 1}), 0.0);
    EXPECT_EQ(dtw_distance(std::vector<double>{0, 1}, std::vector<double>{2, 3}), 4.0);
}

TEST(Dtw, BandWidth) {
    EXPECT_EQ(dtw_band(100, 100), 10u);
    EXPECT_EQ(dtw_band(101, 100), 11u);
    EXPECT_EQ(dtw_band(10, 40), 30u);
    EXPECT_EQ(dtw_band(1, 1), 1u);
}

TEST(DtwProperty, ExactModeMatchesOracle) {
    std::mt19937_64 rng(103);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(1 + rng() % 50), b(1 + rng() % 50);
        for (auto& v : a) v = n(rng);
        for (auto& v : b) v = n(rng);
        EXPECT_NEAR(dtw_distance(a, b, DtwMode::exact), dtw_oracle(a, b), 1e-12);
        EXPECT_GE(dtw_distance(a, b), dtw_distance(a, b, DtwMode::exact) - 1e-12);
    }
}

TEST(DtwProperty, SymmetryAndIdentity) {
    std::mt19937_64 rng(107);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(1 + rng() % 80), b(1 + rng() % 80);
        for (auto& v : a) v = n(rng);
        for (auto& v : b) v = n(rng);
        EXPECT_NEAR(dtw_distance(a, b), dtw_distance(b, a), 1e-9);
        EXPECT_EQ(dtw_distance(a, a), 0.0);
    }
}

TEST(Peers, Average) {
    const std::vector<NamedSeries> s = {{"S1", {1, 1}}, {"S2", {3, 3}}, {"S3", {100, 100, 100}}};
    EXPECT_EQ(*peer_average(s, "S3"), (std::vector<double>{2, 2}));
    const std::vector<NamedSeries> one = {{"S1", {1, 4}}, {"S2", {5, 5}}};
    EXPECT_EQ(*peer_average(one, "S2"), (std::vector<double>{1, 4}));
    const std::vector<NamedSeries> self = {{"S1", {1, 4}}};
    EXPECT_FALSE(peer_average(self, "S1").has_value());
}

TEST(Sync, MissingPeersAndTeacher) {
    const std::vector<double> s = {1, 2, 3, 2, 1};
    const auto f = sync_features("eda", s, std::nullopt, std::nullopt);
    for (const char* n : {"eda_pcct", "eda_pccs", "eda_dtwt", "eda_dtws"}) EXPECT_FALSE(f.get(n).has_value());
    const auto g = sync_features("acc", s, std::vector<double>{1, 2, 3, 2, 1}, std::vector<double>{3, 2, 1, 2, 3});
    EXPECT_NEAR(*g.get("acc_pcc_t"), 1.0, 1e-12);
    EXPECT_NEAR(*g.get("acc_pcc_s"), -1.0, 1e-12);
    EXPECT_EQ(*g.get("acc_dtw_t"), 0.0);
}

TEST(Context, EnvStats) {
    EnvTrace env{"R1", {}};
    for (int i = 0; i < 3; ++i) env.samples.push_back({100.0 + 300.0 * i, 21.0, 50.0, 600.0 + 200.0 * i, 40.0});
    env.samples.push_back({1000.0, 30.0, 90.0, 5000.0, 90.0});  // outside the window
    SensorTrace st{Channel::ST, 0.0, 4.0, std::vector<double>(4000, 33.0)};
    const auto f = context_features(&env, &st, nullptr, 0.0, 1000.0);
    EXPECT_EQ(*f.get("mean_co2"), 800.0);
    EXPECT_EQ(*f.get("max_co2"), 1000.0);
    EXPECT_EQ(*f.get("min_co2"), 600.0);
    EXPECT_EQ(*f.get("sktemp_avg"), 33.0);
    EXPECT_EQ(*f.get("sktemp_max"), 33.0);
    EXPECT_EQ(*f.get("sktemp_min"), 33.0);
    EXPECT_FALSE(f.get("acc_avg").has_value());
}

TEST(Context, FortyMinuteClassHasEightSamples) {
    EnvTrace env{"R1", {}};
    for (int i = -3; i < 12; ++i) env.samples.push_back({300.0 * i, 21.0, 50.0, 500.0 + i, 40.0});
    const auto f = context_features(&env, nullptr, nullptr, 0.0, 2400.0);
    EXPECT_DOUBLE_EQ(*f.get("mean_co2"), 500.0 + 3.5);
    EXPECT_EQ(*f.get("min_co2"), 500.0);
    EXPECT_EQ(*f.get("max_co2"), 507.0);
}

TEST(Context, NoEnvSamplesGivesMissing) {
    EnvTrace env{"R1", {{5000.0, 21.0, 50.0, 600.0, 40.0}}};
    const auto f = context_features(&env, nullptr, nullptr, 0.0, 1000.0);
    EXPECT_FALSE(f.get("mean_co2").has_value());
    EXPECT_FALSE(f.get("mean_sound").has_value());
}

TEST(Scores, Examples) {
    const auto top = engagement_scores(survey({2, -2, 2, -2, 2}));
    for (Target t : kAllTargets) EXPECT_EQ(top.get(t), 5.0);
    const auto mid = engagement_scores(survey({0, 0, 0, 0, 0}));
    for (Target t : kAllTargets) EXPECT_EQ(mid.get(t), 3.0);
    const auto s = engagement_scores(survey({1, 0, -1, 1, 2}));
    EXPECT_DOUBLE_EQ(s.behavioural, 3.5);
    EXPECT_DOUBLE_EQ(s.emotional, 2.0);
    EXPECT_DOUBLE_EQ(s.cognitive, 5.0);
    EXPECT_DOUBLE_EQ(s.overall, 3.2);
}

TEST(ScoresProperty, ExhaustiveRangeAndMonotonicity) {
    auto decode = [](int code) {
        std::array<int, 5> q{};
        for (auto& v : q) {
            v = code % 5 - 2;
            code /= 5;
        }
        return q;
    };
    for (int code = 0; code < 3125; ++code) {
        const auto q = decode(code);
        const auto s = engagement_scores(survey(q));
        for (Target t : kAllTargets) {
            EXPECT_GE(s.get(t), 1.0);
            EXPECT_LE(s.get(t), 5.0);
        }
        for (int item = 0; item < 5; ++item) {
            if (q[static_cast<std::size_t>(item)] == 2) continue;
            auto up = q;
            ++up[static_cast<std::size_t>(item)];
            const auto u = engagement_scores(survey(up));
            const bool reversed = item == 1 || item == 3;
            if (reversed) {
                EXPECT_LE(u.overall, s.overall);
                EXPECT_LE(u.behavioural, s.behavioural);
                EXPECT_LE(u.emotional, s.emotional);
            } else {
                EXPECT_GE(u.overall, s.overall);
                EXPECT_GE(u.behavioural, s.behavioural);
                EXPECT_GE(u.emotional, s.emotional);
                EXPECT_GE(u.cognitive, s.cognitive);
            }
        }
    }
}

TEST(Targets, ParseListsValidNames) {
    EXPECT_EQ(parse_target("emotional"), Target::emotional);
    try {
        parse_target("foo");
        FAIL();
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        for (const char* n : {"behavioural", "emotional", "cognitive", "overall", "all"}) {
            EXPECT_NE(msg.find(n), std::string::npos) << n;
        }
    }
}

TEST(Dataset, FamilySelectionAndOrder) {
    const std::vector<SessionRecord> rows = {session("S2", "C1", 0.5, 70.0, true), session("S1", "C2", 0.1, {}, true),
                                             session("S1", "C1", 0.3, 65.0, false)};
    const Family eda_only[] = {Family::EDA};
    const auto d = assemble_dataset(rows, eda_only);
    EXPECT_EQ(d.rows(), 2u);
    for (auto f : d.column_families) EXPECT_EQ(f, Family::EDA);
    EXPECT_EQ(d.groups, (std::vector<std::string>{"S1", "S2"}));
    EXPECT_EQ(*d.X[0][0], 0.1);

    const auto all = assemble_dataset(rows, all_families());
    EXPECT_EQ(all.cols(), feature_registry().size());
    const auto hrv_col = static_cast<std::size_t>(
        std::find(all.columns.begin(), all.columns.end(), "hrv_bpm") - all.columns.begin());
    EXPECT_FALSE(all.X[0][hrv_col].has_value());
    EXPECT_EQ(*all.X[1][hrv_col], 70.0);
}

TEST(Dataset, EmptySelectionRejected) {
    const std::vector<SessionRecord> rows = {session("S1", "C1", 0.5, 70.0, true)};
    EXPECT_THROW(assemble_dataset(rows, std::vector<Family>{}), ValidationError);
    const std::vector<SessionRecord> unlabelled = {session("S1", "C1", 0.5, 70.0, false)};
    EXPECT_THROW(assemble_dataset(unlabelled, all_families()), ValidationError);
}

TEST(Dataset, FeatureCsvRoundTrip) {
    engage::test::TempDir dir;
    std::vector<SessionRecord> rows = {session("S1", "C1", 0.123456789012345, 70.0, true),
                                       session("S2", "C1", -4.5e-7, {}, false)};
    rows[1].subject = Subject::Chapel;
    write_features_csv(dir / "f.csv", rows);
    const auto back = read_features_csv(dir / "f.csv");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].features.values, rows[0].features.values);
    EXPECT_EQ(back[1].features.values, rows[1].features.values);
    EXPECT_EQ(back[1].subject, Subject::Chapel);
    EXPECT_FALSE(back[1].scores.has_value());
    EXPECT_EQ(back[0].scores->overall, rows[0].scores->overall);
}
