#include "engage/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "engage/csv.hpp"
#include "engage/errors.hpp"

namespace engage {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix(splitmix(seed ^ splitmix(a)) ^ splitmix(b + 0x51ED270B27ULL));
}

std::vector<std::size_t> rows_of(std::span<const std::string> row_groups, const std::vector<std::string>& groups) {
    const std::set<std::string> g(groups.begin(), groups.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < row_groups.size(); ++i) {
        if (g.count(row_groups[i])) out.push_back(i);
    }
    return out;
}

std::vector<std::string> complement_groups(const std::vector<std::vector<std::string>>& folds, std::size_t skip) {
    std::vector<std::string> out;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        if (f != skip) out.insert(out.end(), folds[f].begin(), folds[f].end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> pick(std::span<const double> v, std::span<const std::size_t> idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(v[i]);
    return out;
}

std::vector<std::size_t> column_ids(const Dataset& d, std::span<const std::string> names) {
    std::vector<std::size_t> out;
    for (const auto& n : names) {
        out.push_back(static_cast<std::size_t>(std::find(d.columns.begin(), d.columns.end(), n) - d.columns.begin()));
    }
    return out;
}

FeatureMatrix project_columns(const FeatureMatrix& X, std::span<const std::size_t> cols) {
    FeatureMatrix out(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) {
        out[i].reserve(cols.size());
        for (std::size_t j : cols) out[i].push_back(X[i][j]);
    }
    return out;
}

struct Fitted {
    std::vector<double> gbm;
    std::vector<double> linear;
    std::vector<double> average;
    std::vector<double> random;
};

// Fits the model and all baselines on `train` rows (using `cols`) and predicts `test` rows.
Fitted fit_and_predict(const Dataset& d, std::span<const double> y, std::span<const std::size_t> train,
                       std::span<const std::size_t> test, std::span<const std::size_t> cols, const GbmParams& params,
                       std::uint64_t random_seed) {
    const FeatureMatrix X = project_columns(d.X, cols);
    std::vector<std::string> names;
    for (std::size_t j : cols) names.push_back(d.columns[j]);
    const std::vector<double> ytr = pick(y, train);

    Fitted f;
    const GbmModel model = fit_gbm(X, train, ytr, params, names);
    f.gbm = model.predict(impute(X, test, model.medians));
    if (cols.empty()) {
        f.linear.assign(test.size(), baseline_average(ytr).value);
    } else {
        const LinearModel lin = fit_linear(impute(X, train, model.medians), ytr);
        f.linear = lin.predict(impute(X, test, model.medians));
    }
    f.average = baseline_average(ytr).predict(test.size());
    RandomPredictor rnd = baseline_random(ytr, random_seed);
    f.random = rnd.predict(test.size());
    return f;
}

PredictorMetrics score_all(std::span<const Prediction> preds) {
    std::vector<double> y, g, l, a, r;
    for (const auto& p : preds) {
        y.push_back(p.y);
        g.push_back(p.gbm);
        l.push_back(p.linear);
        a.push_back(p.average);
        r.push_back(p.random);
    }
    return {score_predictions(y, g), score_predictions(y, l), score_predictions(y, a), score_predictions(y, r)};
}

struct GridChoice {
    GbmParams params;
    double mae = 0.0;
    std::size_t evaluations = 0;
};

GridChoice grid_search(const Dataset& d, std::span<const double> y, std::span<const std::size_t> outer_train,
                       std::size_t outer_fold, const EvalOptions& opt, std::vector<SplitRecord>& splits) {
    const HyperGrid& g = opt.grid;
    if (g.size() == 0) throw ValidationError("empty hyperparameter grid");
    std::vector<std::string> train_groups;
    for (std::size_t i : outer_train) train_groups.push_back(d.groups[i]);
    const auto inner = make_group_folds(train_groups, opt.inner_l, derive_seed(opt.seed, 1 + outer_fold));

    const FeatureMatrix& X = d.X;
    std::vector<int> rounds = g.n_rounds;
    std::sort(rounds.begin(), rounds.end());
    const int max_rounds = rounds.back();

    // mae_sum[leaves][lr][rounds]
    std::vector<double> mae_sum(g.size(), 0.0);
    auto slot = [&](std::size_t a, std::size_t b, std::size_t c) {
        return (a * g.learning_rates.size() + b) * rounds.size() + c;
    };
    for (std::size_t f = 0; f < inner.size(); ++f) {
        std::vector<std::string> tr_groups = complement_groups(inner, f);
        check_disjoint(tr_groups, inner[f]);
        splits.push_back({outer_fold, f, tr_groups, inner[f]});
        std::vector<std::size_t> tr;
        std::vector<std::size_t> va;
        {
            const std::set<std::string> vg(inner[f].begin(), inner[f].end());
            for (std::size_t i : outer_train) (vg.count(d.groups[i]) ? va : tr).push_back(i);
        }
        if (tr.size() < 2 * static_cast<std::size_t>(g.min_samples_leaf)) {
            throw ValidationError("inner fold has fewer than 2 * min_samples_leaf training rows");
        }
        const std::vector<double> ytr = pick(y, tr);
        const std::vector<double> yva = pick(y, va);
        const std::vector<double> med = column_medians(X, tr);
        const Eigen::MatrixXd Xtr = impute(X, tr, med);
        const Eigen::MatrixXd Xva = impute(X, va, med);
        for (std::size_t a = 0; a < g.num_leaves.size(); ++a) {
            for (std::size_t b = 0; b < g.learning_rates.size(); ++b) {
                GbmParams p;
                p.num_leaves = g.num_leaves[a];
                p.learning_rate = g.learning_rates[b];
                p.n_rounds = max_rounds;
                p.min_samples_leaf = g.min_samples_leaf;
                p.seed = opt.seed;
                const GbmModel m = fit_gbm(Xtr, ytr, p);
                for (std::size_t c = 0; c < rounds.size(); ++c) {
                    const auto pred = m.predict(Xva, static_cast<std::size_t>(rounds[c]));
                    mae_sum[slot(a, b, c)] += score_predictions(yva, pred).mae;
                }
            }
        }
    }

    // Lowest mean MAE; ties prefer fewer rounds, then fewer leaves, then grid order.
    GridChoice best;
    bool have = false;
    for (std::size_t c = 0; c < rounds.size(); ++c) {
        for (std::size_t a = 0; a < g.num_leaves.size(); ++a) {
            for (std::size_t b = 0; b < g.learning_rates.size(); ++b) {
                const double mae = mae_sum[slot(a, b, c)] / static_cast<double>(inner.size());
                GbmParams p;
                p.num_leaves = g.num_leaves[a];
                p.learning_rate = g.learning_rates[b];
                p.n_rounds = rounds[c];
                p.min_samples_leaf = g.min_samples_leaf;
                p.seed = opt.seed;
                const bool better = !have || mae < best.mae ||
                                    (mae == best.mae && (p.n_rounds < best.params.n_rounds ||
                                                         (p.n_rounds == best.params.n_rounds &&
                                                          p.num_leaves < best.params.num_leaves)));
                if (better) {
                    best.params = p;
                    best.mae = mae;
                    have = true;
                }
            }
        }
    }
    best.evaluations = g.size() * inner.size();
    return best;
}

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

std::vector<std::vector<std::string>> make_group_folds(std::span<const std::string> group_ids, std::size_t k,
                                                       std::uint64_t seed) {
    std::vector<std::string> groups(group_ids.begin(), group_ids.end());
    std::sort(groups.begin(), groups.end());
    groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
    if (k < 2) throw ValidationError("need at least 2 folds");
    if (k > groups.size()) {
        throw ValidationError("cannot split " + std::to_string(groups.size()) + " groups into " + std::to_string(k) +
                              " folds");
    }
    std::mt19937_64 rng(seed);
    for (std::size_t i = groups.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(groups[i], groups[j]);
    }
    std::vector<std::vector<std::string>> folds(k);
    for (std::size_t i = 0; i < groups.size(); ++i) folds[i % k].push_back(groups[i]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

void check_disjoint(std::span<const std::string> train_groups, std::span<const std::string> test_groups) {
    const std::set<std::string> train(train_groups.begin(), train_groups.end());
    for (const auto& g : test_groups) {
        if (train.count(g)) throw Error("group leakage: '" + g + "' appears in both train and test");
    }
}

Metrics score_predictions(std::span<const double> y, std::span<const double> y_hat) {
    if (y.size() != y_hat.size()) throw ValidationError("prediction length differs from target length");
    if (y.empty()) throw ValidationError("no predictions to score");
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y_hat[i] - y[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
    }
    const auto n = static_cast<double>(y.size());
    return {abs_sum / n, std::sqrt(sq_sum / n), y.size()};
}

EvalReport nested_cv(const Dataset& d, Target target, const EvalOptions& opt) {
    if (d.rows() == 0) throw ValidationError("empty dataset");
    EvalReport rep;
    rep.scheme = "nested_cv";
    rep.target = target;
    rep.families = {};
    for (Family f : d.column_families) {
        if (std::find(rep.families.begin(), rep.families.end(), f) == rep.families.end()) rep.families.push_back(f);
    }
    rep.n_rows = d.rows();
    const std::vector<double> y = d.target(target);
    const auto outer = make_group_folds(d.groups, opt.outer_k, opt.seed);
    for (const auto& f : outer) rep.n_groups += f.size();

    std::vector<std::size_t> all_cols(d.cols());
    std::iota(all_cols.begin(), all_cols.end(), 0);

    for (std::size_t k = 0; k < outer.size(); ++k) {
        const std::vector<std::string> train_groups = complement_groups(outer, k);
        check_disjoint(train_groups, outer[k]);
        rep.splits.push_back({k, std::nullopt, train_groups, outer[k]});
        const auto train = rows_of(d.groups, train_groups);
        const auto test = rows_of(d.groups, outer[k]);
        if (train.size() < 2 * static_cast<std::size_t>(opt.grid.min_samples_leaf)) {
            throw ValidationError("outer fold " + std::to_string(k) + " has too few training rows");
        }
        if (test.empty()) continue;

        FoldResult fr;
        fr.fold = k;
        fr.test_groups = outer[k];
        const GridChoice choice = grid_search(d, y, train, k, opt, rep.splits);
        fr.chosen = choice.params;
        fr.inner_mae = choice.mae;
        fr.inner_fits = choice.evaluations;

        const std::vector<double> ytr = pick(y, train);
        const GbmModel full = fit_gbm(d.X, train, ytr, choice.params, d.columns);
        fr.selected_features = top_features(full, opt.top_k);
        const auto cols = fr.selected_features.empty() ? all_cols : column_ids(d, fr.selected_features);
        if (fr.selected_features.empty()) fr.selected_features = d.columns;

        const Fitted fit = fit_and_predict(d, y, train, test, cols, choice.params, derive_seed(opt.seed, 100 + k));
        std::vector<Prediction> fold_preds;
        for (std::size_t t = 0; t < test.size(); ++t) {
            const std::size_t i = test[t];
            fold_preds.push_back({d.groups[i], d.class_ids[i], k, y[i], fit.gbm[t], fit.linear[t], fit.average[t],
                                  fit.random[t]});
        }
        fr.metrics = score_all(fold_preds);
        rep.predictions.insert(rep.predictions.end(), fold_preds.begin(), fold_preds.end());
        rep.folds.push_back(std::move(fr));
    }
    rep.metrics = score_all(rep.predictions);
    rep.per_participant = participant_breakdown(rep.predictions);
    return rep;
}

EvalReport loso_eval(const Dataset& d, Target target, const GbmParams& params, std::uint64_t seed) {
    std::vector<std::string> groups(d.groups.begin(), d.groups.end());
    std::sort(groups.begin(), groups.end());
    groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
    if (groups.size() < 2) throw ValidationError("LOSO needs at least 2 participants");

    EvalReport rep;
    rep.scheme = "loso";
    rep.target = target;
    for (Family f : d.column_families) {
        if (std::find(rep.families.begin(), rep.families.end(), f) == rep.families.end()) rep.families.push_back(f);
    }
    rep.n_rows = d.rows();
    rep.n_groups = groups.size();
    rep.feature_selection = "all columns";
    const std::vector<double> y = d.target(target);
    std::vector<std::size_t> all_cols(d.cols());
    std::iota(all_cols.begin(), all_cols.end(), 0);

    for (std::size_t k = 0; k < groups.size(); ++k) {
        const std::vector<std::string> test_groups{groups[k]};
        std::vector<std::string> train_groups = groups;
        train_groups.erase(train_groups.begin() + static_cast<std::ptrdiff_t>(k));
        check_disjoint(train_groups, test_groups);
        rep.splits.push_back({k, std::nullopt, train_groups, test_groups});
        const auto train = rows_of(d.groups, train_groups);
        const auto test = rows_of(d.groups, test_groups);
        if (train.size() < 2 * static_cast<std::size_t>(params.min_samples_leaf)) {
            throw ValidationError("LOSO fold has too few training rows");
        }
        const Fitted fit = fit_and_predict(d, y, train, test, all_cols, params, derive_seed(seed, 200 + k));
        FoldResult fr;
        fr.fold = k;
        fr.chosen = params;
        fr.test_groups = test_groups;
        fr.selected_features = d.columns;
        std::vector<Prediction> fold_preds;
        for (std::size_t t = 0; t < test.size(); ++t) {
            const std::size_t i = test[t];
            fold_preds.push_back({d.groups[i], d.class_ids[i], k, y[i], fit.gbm[t], fit.linear[t], fit.average[t],
                                  fit.random[t]});
        }
        fr.metrics = score_all(fold_preds);
        rep.predictions.insert(rep.predictions.end(), fold_preds.begin(), fold_preds.end());
        rep.folds.push_back(std::move(fr));
    }
    rep.metrics = score_all(rep.predictions);
    rep.per_participant = participant_breakdown(rep.predictions);
    return rep;
}

std::vector<ParticipantErrors> participant_breakdown(std::span<const Prediction> predictions) {
    std::map<std::string, std::vector<const Prediction*>> by;
    for (const auto& p : predictions) by[p.participant_id].push_back(&p);
    std::vector<ParticipantErrors> out;
    for (const auto& [id, preds] : by) {
        ParticipantErrors e;
        e.participant_id = id;
        e.n = preds.size();
        std::vector<double> abs_err;
        double sq = 0.0;
        double avg_abs = 0.0;
        for (const auto* p : preds) {
            abs_err.push_back(std::abs(p->gbm - p->y));
            sq += (p->gbm - p->y) * (p->gbm - p->y);
            avg_abs += std::abs(p->average - p->y);
        }
        const auto n = static_cast<double>(preds.size());
        e.mae = std::accumulate(abs_err.begin(), abs_err.end(), 0.0) / n;
        e.rmse = std::sqrt(sq / n);
        e.median = quantile(abs_err, 0.5);
        e.q1 = quantile(abs_err, 0.25);
        e.q3 = quantile(abs_err, 0.75);
        e.min = *std::min_element(abs_err.begin(), abs_err.end());
        e.max = *std::max_element(abs_err.begin(), abs_err.end());
        e.average_mae = avg_abs / n;
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<Regime> parse_regimes(std::string_view text, const std::string& source) {
    std::vector<Regime> out;
    csv::LineReader reader(text);
    std::string_view line;
    while (reader.next(line)) {
        line = csv::trim(line);
        if (line.empty() || line.front() == '#') continue;
        std::istringstream in{std::string(line)};
        std::string name;
        std::string fams;
        in >> name >> fams;
        if (fams.empty()) throw ParseError(source, reader.line_number(), "expected `name families [subject=...]`");
        Regime r;
        r.name = name;
        try {
            if (fams == "all") {
                r.families = all_families();
            } else {
                for (auto part : csv::split(fams, '+')) r.families.push_back(parse_family(part));
            }
            std::string extra;
            while (in >> extra) {
                if (extra.rfind("subject=", 0) != 0) throw ValidationError("unexpected token '" + extra + "'");
                r.subject = parse_subject(extra.substr(8));
            }
        } catch (const ValidationError& e) {
            throw ParseError(source, reader.line_number(), e.what());
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<Regime> load_regimes(const std::filesystem::path& path) {
    return parse_regimes(csv::read_file(path), path.string());
}

std::vector<RegimeResult> regime_sweep(std::span<const SessionRecord> sessions, std::span<const Regime> regimes,
                                       std::span<const Target> targets, const EvalOptions& opt,
                                       std::size_t min_subject_sessions) {
    if (regimes.empty()) throw ValidationError("empty regime list");
    std::vector<RegimeResult> out;
    for (const auto& regime : regimes) {
        std::vector<SessionRecord> rows;
        for (const auto& s : sessions) {
            if (!s.scores) continue;
            if (regime.subject && s.subject != *regime.subject) continue;
            rows.push_back(s);
        }
        std::string notice;
        if (regime.subject && rows.size() < min_subject_sessions) {
            notice = "skipped: " + std::string(to_string(*regime.subject)) + " has " + std::to_string(rows.size()) +
                     " labelled sessions (< " + std::to_string(min_subject_sessions) + ")";
        }
        std::optional<Dataset> data;
        if (notice.empty()) {
            data = assemble_dataset(rows, regime.families);
            std::set<std::string> groups(data->groups.begin(), data->groups.end());
            if (groups.size() < opt.outer_k) {
                notice = "skipped: only " + std::to_string(groups.size()) + " participants for " +
                         std::to_string(opt.outer_k) + " outer folds";
            }
        }
        for (Target t : targets) {
            RegimeResult res;
            res.regime = regime;
            res.target = t;
            res.notice = notice;
            if (notice.empty()) {
                res.report = nested_cv(*data, t, opt);
                res.report->subject = regime.subject;
            }
            out.push_back(std::move(res));
        }
    }
    return out;
}

}  // namespace engage
