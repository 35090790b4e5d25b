// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

#include "engage/csv.hpp"
#include "engage/dataset.hpp"
#include "engage/eda.hpp"
#include "engage/errors.hpp"
#include "engage/eval.hpp"
#include "engage/features.hpp"
#include "engage/hrv.hpp"
#include "engage/model.hpp"
#include "engage/pipeline.hpp"
#include "engage/report.hpp"
#include "engage/segment.hpp"
#include "engage/synth.hpp"

using namespace engage;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = true;
    std::string detail;
};

void require(Outcome& o, bool ok, const std::string& what) {
    if (!ok) {
        o.pass = false;
        if (!o.detail.empty()) o.detail += "; ";
        o.detail += what;
    }
}

std::string num(double v) {
    std::ostringstream s;
    s << std::setprecision(4) << v;
    return s.str();
}

SurveyResponse survey(const std::array<int, 5>& q) {
    SurveyResponse s;
    for (std::size_t i = 0; i < 5; ++i) s.q[i] = q[i];
    return s;
}

Outcome scores() {
    Outcome o;
    for (int code = 0; code < 3125; ++code) {
        std::array<int, 5> q{};
        int c = code;
        for (auto& v : q) {
            v = c % 5 - 2;
            c /= 5;
        }
        const auto s = engagement_scores(survey(q));
        for (Target t : kAllTargets) {
            if (s.get(t) < 1.0 || s.get(t) > 5.0) require(o, false, "score out of range");
        }
        for (std::size_t item = 0; item < 5; ++item) {
            if (q[item] == 2) continue;
            auto up = q;
            ++up[item];
            const auto u = engagement_scores(survey(up));
            const bool reversed = item == 1 || item == 3;
            for (Target t : kAllTargets) {
                if (reversed && u.get(t) > s.get(t)) require(o, false, "reversed item not antitone");
                if (!reversed && u.get(t) < s.get(t)) require(o, false, "item not monotone");
            }
        }
    }
    const auto top = engagement_scores(survey({2, -2, 2, -2, 2}));
    const auto mid = engagement_scores(survey({0, 0, 0, 0, 0}));
    const auto ex = engagement_scores(survey({1, 0, -1, 1, 2}));
    for (Target t : kAllTargets) {
        require(o, top.get(t) == 5.0, "top survey");
        require(o, mid.get(t) == 3.0, "neutral survey");
    }
    require(o, ex.behavioural == 3.5 && ex.emotional == 2.0 && ex.cognitive == 5.0 && std::abs(ex.overall - 3.2) < 1e-12,
            "mixed survey");
    if (o.pass) o.detail = "3125 surveys";
    return o;
}

double dtw_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t m = b.size();
    std::vector<double> memo(a.size() * m, -1.0);
    std::function<double(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t j) -> double {
        double& slot = memo[i * m + j];
        if (slot >= 0.0) return slot;
        double best = 0.0;
        if (i || j) {
            best = std::numeric_limits<double>::infinity();
            if (i) best = std::min(best, rec(i - 1, j));
            if (j) best = std::min(best, rec(i, j - 1));
            if (i && j) best = std::min(best, rec(i - 1, j - 1));
        }
        return slot = std::abs(a[i] - b[j]) + best;
    };
    return rec(a.size() - 1, m - 1);
}

Outcome dtw() {
    Outcome o;
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> n(0, 1);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(1 + rng() % 50), b(1 + rng() % 50);
        for (auto& v : a) v = n(rng);
        for (auto& v : b) v = n(rng);
        worst = std::max(worst, std::abs(dtw_distance(a, b, DtwMode::exact) - dtw_oracle(a, b)));
    }
    require(o, worst <= 1e-12, "max deviation " + num(worst));
    if (o.pass) o.detail = "200 pairs, max deviation " + num(worst);
    return o;
}

double bateman(double t) { return t <= 0.0 ? 0.0 : std::exp(-t / 2.0) - std::exp(-t / 0.7); }

std::vector<double> scr_signal(std::size_t n, const std::vector<std::pair<double, double>>& events, double base,
                               double slope) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / 4.0;
        y[i] = base + slope * t;
        for (const auto& [at, a] : events) y[i] += a * bateman(t - at);
    }
    return y;
}

double rms(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s / static_cast<double>(x.size()));
}

Outcome cvxeda() {
    Outcome o;
    double worst = 0.0;
    for (double c : {0.3, 2.0, 7.5}) {
        const auto d = cvxeda_decompose(SensorTrace{Channel::EDA, 0.0, 4.0, std::vector<double>(240, c)});
        for (double v : d.tonic) worst = std::max(worst, std::abs(v - c));
    }
    require(o, worst <= 1e-3, "constant tonic error " + num(worst));

    const auto impulse = cvxeda_decompose(SensorTrace{Channel::EDA, 0.0, 4.0, scr_signal(240, {{10.0, 0.5}}, 0.5, 0.0)});
    double total = 0.0;
    double near = 0.0;
    for (std::size_t i = 0; i < impulse.size(); ++i) {
        const double t = static_cast<double>(i) / 4.0;
        total += std::max(0.0, impulse.driver[i]);
        if (t >= 9.5 && t <= 10.5) near += std::max(0.0, impulse.driver[i]);
    }
    const double share = total > 0.0 ? near / total : 0.0;
    require(o, share >= 0.9, "driver share " + num(share));

    const auto y = scr_signal(2400, {{40.0, 0.4}, {230.0, 0.8}, {410.0, 0.3}, {520.0, 0.5}}, 0.8, 4e-4);
    const auto t0 = std::chrono::steady_clock::now();
    const auto d = cvxeda_decompose(SensorTrace{Channel::EDA, 0.0, 4.0, y});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double ratio = rms(d.residual) / rms(y);
    require(o, ratio <= 0.05, "residual ratio " + num(ratio));
    require(o, secs < 30.0, "10-minute session took " + num(secs) + " s");
    if (o.pass) o.detail = "driver share " + num(share) + ", residual " + num(ratio) + ", 10 min in " + num(secs) + " s";
    return o;
}

Outcome igts() {
    Outcome o;
    std::size_t worst = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t T = 100 + rng() % 501;
        const std::size_t cut = T / 5 + rng() % (3 * T / 5);
        std::uniform_real_distribution<double> noise(-0.1, 0.1);
        Multichannel X(2, std::vector<double>(T));
        for (std::size_t t = 0; t < T; ++t) {
            const bool before = t < cut;
            X[0][t] = (before ? 1.0 : 0.3) + noise(rng);
            X[1][t] = (before ? 0.3 : 1.0) + noise(rng);
        }
        const auto r = igts_topdown(shift_nonnegative(X), 1);
        const std::size_t err = r.boundaries[0] > cut ? r.boundaries[0] - cut : cut - r.boundaries[0];
        worst = std::max(worst, err);
        double prev = 0.0;
        for (std::size_t k = 1; k <= 4; ++k) {
            const double ig = igts_topdown(shift_nonnegative(X), k).information_gain;
            if (ig < prev - 1e-12) require(o, false, "IG decreased at k=" + std::to_string(k));
            prev = ig;
        }
    }
    require(o, worst <= 2, "boundary error " + std::to_string(worst) + " samples");
    if (o.pass) o.detail = "50 instances, max error " + std::to_string(worst) + " samples";
    return o;
}

IbiSeries modulated_ibi(double seconds, double freq, double amp_ms) {
    std::vector<double> beats = {0.0};
    while (beats.back() < seconds) {
        const double t = beats.back();
        beats.push_back(t + (1000.0 + amp_ms * std::sin(2.0 * kPi * freq * t)) / 1000.0);
    }
    return ibi_from_beats(beats);
}

Outcome hrv() {
    Outcome o;
    const auto c = hrv_time_features(std::vector<double>(20, 1000.0));
    require(o, c.sdnn == 0.0 && c.rmssd == 0.0 && c.bpm == 60.0, "constant RR");
    const auto alt = hrv_time_features(std::vector<double>{1000, 1050, 1000, 1050, 1000, 1050});
    require(o, alt.pnn50 == 0.0 && alt.pnn20 == 100.0 && std::abs(alt.rmssd - 50.0) < 1e-9, "alternating RR");
    const auto lf = hrv_freq_features(modulated_ibi(600.0, 0.1, 50.0));
    const auto hf = hrv_freq_features(modulated_ibi(600.0, 0.3, 50.0));
    const double lf_share = lf.lf_power / (lf.lf_power + lf.hf_power);
    const double hf_share = hf.hf_power / (hf.lf_power + hf.hf_power);
    require(o, lf_share >= 0.8, "LF share " + num(lf_share));
    require(o, hf_share >= 0.8, "HF share " + num(hf_share));
    if (o.pass) o.detail = "LF share " + num(lf_share) + ", HF share " + num(hf_share);
    return o;
}

Outcome beats() {
    Outcome o;
    std::mt19937_64 rng(72);
    std::normal_distribution<double> n(0.0, 0.05);
    SensorTrace bvp{Channel::BVP, 1568160000.0, 64.0, {}};
    const double period = 60.0 / 72.0;
    for (std::size_t i = 0; i < 64 * 120; ++i) {
        const double phase = std::fmod(static_cast<double>(i) / 64.0, period) / period;
        const double wave = std::exp(-std::pow((phase - 0.2) / 0.06, 2.0)) + 0.3 * std::exp(-std::pow((phase - 0.5) / 0.08, 2.0));
        bvp.values.push_back(100.0 * wave * (1.0 + n(rng)) - 40.0);
    }
    const double bpm = hrv_time_features(ibi_from_beats(detect_beats(bvp))).bpm;
    require(o, std::abs(bpm - 72.0) <= 2.0, "bpm " + num(bpm));
    if (o.pass) o.detail = "bpm " + num(bpm);
    return o;
}

struct Xy {
    Eigen::MatrixXd X;
    std::vector<double> y;
};

Xy friedman(std::size_t n, std::uint64_t seed, double noise) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::normal_distribution<double> e(0, noise);
    Xy f{Eigen::MatrixXd(static_cast<Eigen::Index>(n), 10), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (Eigen::Index c = 0; c < 10; ++c) f.X(r, c) = u(rng);
        f.y[i] = 10.0 * std::sin(kPi * f.X(r, 0) * f.X(r, 1)) + 20.0 * std::pow(f.X(r, 2) - 0.5, 2) + 10.0 * f.X(r, 3) +
                 5.0 * f.X(r, 4) + e(rng);
    }
    return f;
}

double rmse(const std::vector<double>& y, const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - p[i]) * (y[i] - p[i]);
    return std::sqrt(s / static_cast<double>(y.size()));
}

Outcome boosting() {
    Outcome o;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const auto f = friedman(50 + rng() % 150, 500 + seed, 0.2 + 0.1 * static_cast<double>(seed % 5));
        const GbmParams p{static_cast<int>(2 + rng() % 30), 0.05 + 0.05 * static_cast<double>(rng() % 4), 50, 3, seed};
        const auto m = fit_gbm(f.X, f.y, p);
        double prev = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k <= m.trees.size(); ++k) {
            const double loss = rmse(f.y, m.predict(f.X, k));
            if (loss > prev + 1e-12) require(o, false, "loss rose on dataset " + std::to_string(seed));
            prev = loss;
        }
    }
    const auto train = friedman(500, 11, 1.0);
    const auto test = friedman(500, 12, 1.0);
    double best = std::numeric_limits<double>::infinity();
    const HyperGrid grid;
    for (int leaves : grid.num_leaves) {
        for (double lr : grid.learning_rates) {
            for (int rounds : grid.n_rounds) {
                const auto m = fit_gbm(train.X, train.y, GbmParams{leaves, lr, rounds, grid.min_samples_leaf, 0});
                best = std::min(best, rmse(test.y, m.predict(test.X)));
            }
        }
    }
    const double lin = rmse(test.y, fit_linear(train.X, train.y).predict(test.X));
    require(o, best <= 0.7 * lin, "gbm " + num(best) + " vs linear " + num(lin));
    if (o.pass) o.detail = "held-out RMSE gbm " + num(best) + ", linear " + num(lin);
    return o;
}

Outcome folds() {
    Outcome o;
    std::mt19937_64 rng(8);
    for (int plan = 0; plan < 1000; ++plan) {
        std::vector<std::string> rows;
        for (int i = 0; i < 23; ++i) {
            const std::size_t copies = 1 + rng() % 20;
            for (std::size_t c = 0; c < copies; ++c) rows.push_back("S" + std::to_string(i));
        }
        std::shuffle(rows.begin(), rows.end(), rng);
        const std::size_t k = 2 + rng() % 22;
        const auto f = make_group_folds(rows, k, rng());
        std::map<std::string, int> owner;
        for (std::size_t i = 0; i < f.size(); ++i) {
            for (const auto& g : f[i]) {
                if (!owner.emplace(g, static_cast<int>(i)).second) require(o, false, "group in two folds");
            }
        }
        if (owner.size() != 23) require(o, false, "groups lost");
        for (std::size_t i = 0; i < f.size(); ++i) {
            std::vector<std::string> train;
            for (std::size_t j = 0; j < f.size(); ++j) {
                if (j != i) train.insert(train.end(), f[j].begin(), f[j].end());
            }
            try {
                check_disjoint(train, f[i]);
            } catch (const Error&) {
                require(o, false, "leakage in plan " + std::to_string(plan));
            }
        }
    }
    std::vector<std::string> groups;
    for (int i = 0; i < 23; ++i) groups.push_back("S" + std::to_string(i));
    std::multiset<std::size_t> sizes;
    for (const auto& f : make_group_folds(groups, 5, 42)) sizes.insert(f.size());
    require(o, sizes == std::multiset<std::size_t>{4, 4, 5, 5, 5}, "fold sizes");
    if (o.pass) o.detail = "1000 plans, no leakage";
    return o;
}

struct RunOutput {
    EvalRun run;
    fs::path dir;
};

// synth -> pipeline -> nested CV on overall (all families) plus the EDA-only regime
RunOutput end_to_end(const fs::path& root) {
    RunOutput out;
    out.dir = root;
    const SynthConfig cfg;
    generate_cohort(cfg, root / "data");
    const auto index = open_dataset(DatasetPaths{root / "data", {}, {}, {}});
    const auto result = run_pipeline(index, PipelineOptions{});
    write_features_csv(root / "features.csv", result.sessions);
    const auto sessions = read_features_csv(root / "features.csv");

    out.run.options = EvalOptions{};
    const Target overall[] = {Target::overall};
    const Dataset d = assemble_dataset(sessions, all_families());
    out.run.reports.push_back(nested_cv(d, Target::overall, out.run.options));
    const auto regimes = parse_regimes("eda EDA\n");
    out.run.regimes = regime_sweep(sessions, regimes, overall, out.run.options);
    fs::create_directories(root / "report");
    write_report(out.run, root / "report" / "report.json");
    return out;
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = csv::read_file(e.path());
    }
    return out;
}

struct Scratch {
    fs::path path;
    Scratch() : path(fs::temp_directory_path() / ("engage_acceptance_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

}  // namespace

int main() {
    Scratch scratch;
    std::optional<RunOutput> first;
    std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 engagement-score arithmetic", scores},
        {"2 DTW oracle equivalence", dtw},
        {"3 cvxEDA decomposition", cvxeda},
        {"4 IGTS step recovery", igts},
        {"5 HRV closed forms", hrv},
        {"6 beat detection", beats},
        {"7 boosting", boosting},
        {"8 fold hygiene", folds},
        {"9 end-to-end synthetic",
         [&] {
             Outcome o;
             first = end_to_end(scratch.path / "run1");
             const auto& overall = first->run.reports.front().metrics;
             const auto& eda = first->run.regimes.front().report->metrics;
             require(o, overall.gbm.mae <= 0.75 * overall.random.mae,
                     "gbm MAE " + num(overall.gbm.mae) + " > 0.75 x random " + num(overall.random.mae));
             require(o, overall.gbm.mae <= eda.gbm.mae,
                     "all-sensors MAE " + num(overall.gbm.mae) + " > EDA-only " + num(eda.gbm.mae));
             o.detail = (o.pass ? "" : o.detail + "; ") + "MAE all " + num(overall.gbm.mae) + ", EDA " +
                        num(eda.gbm.mae) + ", random " + num(overall.random.mae) + ", linear " +
                        num(overall.linear.mae);
             return o;
         }},
        {"10 determinism",
         [&] {
             Outcome o;
             if (!first) first = end_to_end(scratch.path / "run1");
             const auto second = end_to_end(scratch.path / "run2");
             const auto a = tree(first->dir / "report");
             const auto b = tree(second.dir / "report");
             require(o, !a.empty() && a == b, "report files differ");
             require(o, csv::read_file(first->dir / "features.csv") == csv::read_file(second.dir / "features.csv"),
                     "features differ");
             if (o.pass) o.detail = std::to_string(a.size()) + " report files byte-identical";
             return o;
         }},
    };

    int failures = 0;
    for (auto& [name, run] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  (" << std::fixed << std::setprecision(1) << secs
                  << " s)  " << o.detail << std::defaultfloat << std::endl;
    }
    std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
    return failures ? 1 : 0;
}
