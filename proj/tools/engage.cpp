// engage: command-line front end for the classroom engagement pipeline.
//
// Exit codes: 0 success, 1 validation error, 2 I/O error.

#include <algorithm>
#include <numeric>
#include <cstdlib>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "engage/csv.hpp"
#include "engage/dataset.hpp"
#include "engage/errors.hpp"
#include "engage/eval.hpp"
#include "engage/model.hpp"
#include "engage/pipeline.hpp"
#include "engage/report.hpp"
#include "engage/synth.hpp"

namespace {

using namespace engage;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kIo = 2;

struct DataArgs {
    std::string data = "data";
    std::string schedule;
    std::string env;
    std::string surveys;
    std::optional<double> timezone;
    std::string normalization = "participant";
    bool estimate_boundaries = true;
    bool verbose = false;
    PipelineOptions opt;
};

void add_data_options(CLI::App* sub, DataArgs& a) {
    sub->add_option("--data", a.data, "Dataset directory")->capture_default_str();
    sub->add_option("--schedule", a.schedule, "Schedule CSV (default <data>/schedule.csv)");
    sub->add_option("--env", a.env, "Environment CSV (default <data>/env.csv)");
    sub->add_option("--surveys", a.surveys, "Survey CSV (default <data>/surveys.csv)");
    sub->add_option("--timezone", a.timezone, "Local offset from UTC in hours (default from <data>/dataset.cfg)");
    sub->add_flag("--verbose", a.verbose, "Progress messages on stderr");

    auto& o = a.opt;
    sub->add_option("--gate-flat-level", o.gate.flat_level_us)->capture_default_str();
    sub->add_option("--gate-flat-run", o.gate.flat_run_seconds)->capture_default_str();
    sub->add_option("--gate-max-flat", o.gate.max_flat_fraction)->capture_default_str();
    sub->add_option("--gate-drop", o.gate.drop_us)->capture_default_str();
    sub->add_option("--gate-max-drops", o.gate.max_drops)->capture_default_str();
    sub->add_option("--gate-quant-window", o.gate.quantization_window_seconds)->capture_default_str();
    sub->add_option("--gate-min-distinct", o.gate.min_distinct_values)->capture_default_str();

    sub->add_option("--cvx-tau0", o.cvx.tau0)->capture_default_str();
    sub->add_option("--cvx-tau1", o.cvx.tau1)->capture_default_str();
    sub->add_option("--cvx-delta-knot", o.cvx.delta_knot)->capture_default_str();
    sub->add_option("--cvx-alpha", o.cvx.alpha)->capture_default_str();
    sub->add_option("--cvx-gamma", o.cvx.gamma)->capture_default_str();
    sub->add_option("--cvx-max-iter", o.cvx.solver.max_iter)->capture_default_str();
    sub->add_option("--cvx-eps-abs", o.cvx.solver.eps_abs)->capture_default_str();
    sub->add_option("--cvx-eps-rel", o.cvx.solver.eps_rel)->capture_default_str();

    sub->add_option("--eda-median", o.eda_median_seconds)->capture_default_str();
    sub->add_option("--acc-median", o.acc_median_seconds)->capture_default_str();
    sub->add_option("--st-median", o.st_median_seconds)->capture_default_str();
    sub->add_option("--boundaries", a.estimate_boundaries, "Estimate class boundaries from ACC (else timetable)")
        ->capture_default_str();
    sub->add_option("--boundary-half-window", o.boundary.half_window_seconds)->capture_default_str();
    sub->add_option("--boundary-rate", o.boundary.rate_hz)->capture_default_str();
    sub->add_option("--sync-rate", o.sync_rate_hz)->capture_default_str();
    sub->add_option("--dtw-band", o.dtw_band)->capture_default_str();
    sub->add_option("--min-peak", o.min_peak_amplitude)->capture_default_str();
    sub->add_option("--arousal-window", o.arousal_window_seconds)->capture_default_str();
    sub->add_option("--normalization", a.normalization)
        ->check(CLI::IsMember({"participant", "session"}))
        ->capture_default_str();
    sub->add_option("--beat-window", o.beats.window_seconds)->capture_default_str();
    sub->add_option("--refractory", o.beats.refractory_seconds)->capture_default_str();
    sub->add_option("--min-prominence", o.beats.min_relative_prominence)->capture_default_str();
    sub->add_option("--ibi-min", o.ibi.min_ms)->capture_default_str();
    sub->add_option("--ibi-max", o.ibi.max_ms)->capture_default_str();
    sub->add_option("--welch-rate", o.welch.resample_hz)->capture_default_str();
    sub->add_option("--welch-segment", o.welch.segment_seconds)->capture_default_str();
    sub->add_option("--welch-overlap", o.welch.overlap)->capture_default_str();
    sub->add_option("--welch-min-seconds", o.welch.min_duration_seconds)->capture_default_str();
}

PipelineOptions pipeline_options(const DataArgs& a) {
    PipelineOptions o = a.opt;
    if (a.timezone) o.tz = TimeZone{*a.timezone};
    o.estimate_boundaries = a.estimate_boundaries;
    o.normalization = parse_normalization_scope(a.normalization);
    return o;
}

DatasetIndex open(const DataArgs& a, const PipelineOptions& o) {
    DatasetPaths p;
    p.data = a.data;
    p.schedule = a.schedule;
    p.env = a.env;
    p.surveys = a.surveys;
    return open_dataset(p, o.tz);
}

Logger logger(bool verbose) {
    if (!verbose) return {};
    return [](const std::string& m) { std::cerr << m << '\n'; };
}

std::pair<std::string, std::string> split_session(const std::string& s) {
    const auto sep = s.find_first_of(":/");
    if (sep == std::string::npos || sep == 0 || sep + 1 == s.size()) {
        throw ValidationError("--session expects <participant_id>:<class_id>, got '" + s + "'");
    }
    return {s.substr(0, sep), s.substr(sep + 1)};
}

std::vector<Family> parse_families(const std::string& s) {
    if (s == "all") return all_families();
    std::vector<Family> out;
    for (auto part : csv::split(s, '+')) out.push_back(parse_family(csv::trim(part)));
    return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& s, const char* what) {
    std::vector<T> out;
    for (auto part : csv::split(s, ',')) {
        const double v = csv::parse_double(csv::trim(part), what, 1);
        out.push_back(static_cast<T>(v));
        if (static_cast<double>(out.back()) != v) throw ValidationError(std::string(what) + ": expected integers");
    }
    if (out.empty()) throw ValidationError(std::string(what) + ": empty list");
    return out;
}

std::vector<Target> parse_targets(const std::string& s) {
    if (s == "all") return {kAllTargets.begin(), kAllTargets.end()};
    return {parse_target(s)};
}

// ---- config file handling -------------------------------------------------

std::string flag_of(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return "--" + key;
}

// Turns TOML items into command-line tokens for `sub`. Top-level keys apply to every
// subcommand that defines them; `[name]` sections apply to that subcommand only.
std::vector<std::string> config_tokens(const std::string& path, const CLI::App& app, const CLI::App& sub) {
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_file(path);
    } catch (const CLI::FileError&) {
        throw IoError("config file not found: " + path);
    }
    std::vector<std::string> out;
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;
        const std::string flag = flag_of(item.name);
        const CLI::App* scope = &sub;
        if (!item.parents.empty()) {
            if (item.parents.size() != 1) throw ValidationError(path + ": nested section for key '" + item.name + "'");
            const CLI::App* owner = nullptr;
            for (const auto* s : app.get_subcommands({})) {
                if (s->get_name() == item.parents[0]) owner = s;
            }
            if (!owner) throw ValidationError(path + ": unknown section [" + item.parents[0] + "]");
            if (!owner->get_option_no_throw(flag)) {
                throw ValidationError(path + ": unknown key '" + item.name + "' in [" + item.parents[0] + "]");
            }
            if (owner != &sub) continue;
        } else {
            bool known = false;
            for (const auto* s : app.get_subcommands({})) {
                if (s->get_option_no_throw(flag)) known = true;
            }
            if (!known) throw ValidationError(path + ": unknown key '" + item.name + "'");
            if (!scope->get_option_no_throw(flag)) continue;
        }
        std::string value;
        for (const auto& v : item.inputs) value += (value.empty() ? "" : ",") + v;
        out.push_back(flag + "=" + value);
    }
    return out;
}

// ---- subcommands -----------------------------------------------------------

struct SynthArgs {
    std::string out = "data";
    SynthConfig cfg;
    std::string start_date = "2019-09-09";
    double timezone = 10.0;
};

int run_synth(SynthArgs& a, std::uint64_t seed) {
    a.cfg.seed = seed;
    a.cfg.start_date = parse_date(a.start_date);
    a.cfg.tz = TimeZone{a.timezone};
    const CohortSummary s = generate_cohort(a.cfg, a.out);
    std::cerr << "synth: " << s.n_classes << " classes, " << s.n_sessions << " sessions, " << s.n_surveys
              << " surveys written to " << a.out << '\n';
    return kOk;
}

int run_clean(const DataArgs& a, const std::string& out) {
    const auto o = pipeline_options(a);
    const auto index = open(a, o);
    const auto r = run_pipeline(index, o, PipelineStage::clean, logger(a.verbose));
    std::string text = "participant_id,class_id,role,flat_fraction,n_abrupt_drops,quantization_flag,accepted,reasons\n";
    std::size_t accepted = 0;
    for (const auto& q : r.quality) {
        text += q.participant_id + "," + q.class_id + "," + std::string(to_string(q.role)) + ",";
        csv::append_double(text, q.report.flat_fraction);
        text += "," + std::to_string(q.report.n_abrupt_drops) + "," + (q.report.quantization_flag ? "1" : "0") + "," +
                (q.report.accepted ? "1" : "0") + ",";
        std::string reasons;
        for (const auto& why : q.report.reasons) reasons += (reasons.empty() ? "" : ";") + why;
        text += reasons + "\n";
        accepted += q.report.accepted ? 1 : 0;
    }
    csv::write_file(out, text);
    std::cerr << "clean: " << accepted << " of " << r.quality.size() << " sessions accepted\n";
    return kOk;
}

int run_segment(const DataArgs& a, const std::string& out) {
    const auto o = pipeline_options(a);
    const auto index = open(a, o);
    const auto r = run_pipeline(index, o, PipelineStage::segment, logger(a.verbose));
    std::string text = "class_id,actual_start,actual_end,n_participants_used\n";
    for (const auto& b : r.boundaries) {
        text += b.class_id + ",";
        csv::append_double(text, b.start.time);
        text += ",";
        csv::append_double(text, b.end.time);
        text += "," + std::to_string(std::min(b.start.n_participants_used, b.end.n_participants_used)) + "\n";
        if (b.start.fallback || b.end.fallback) {
            std::cerr << "segment: warning: class " << b.class_id << " uses the scheduled time\n";
        }
    }
    csv::write_file(out, text);
    return kOk;
}

int run_eda(const DataArgs& a, const std::string& session, const std::string& out) {
    const auto o = pipeline_options(a);
    const auto index = open(a, o);
    const auto [pid, cid] = split_session(session);
    const auto s = analyze_session(index, pid, cid, o);
    std::string text = "t,mixed,tonic,phasic,driver,residual\n";
    const auto& d = s.eda;
    for (std::size_t i = 0; i < d.size(); ++i) {
        csv::append_double(text, d.start_time + static_cast<double>(i) / d.sample_rate);
        for (const auto* v : {&d.mixed, &d.tonic, &d.phasic, &d.driver, &d.residual}) {
            text += ',';
            csv::append_double(text, (*v)[i]);
        }
        text += '\n';
    }
    csv::write_file(out, text);
    return kOk;
}

int run_hrv(const DataArgs& a, const std::string& session, const std::string& out) {
    const auto o = pipeline_options(a);
    const auto index = open(a, o);
    const auto [pid, cid] = split_session(session);
    const auto s = analyze_session(index, pid, cid, o);
    const FeatureVector f = hrv_feature_vector(s.hrv);
    std::string header = "participant_id,class_id";
    std::string row = pid + "," + cid;
    for (const auto& spec : feature_registry()) {
        if (spec.family != Family::HRV) continue;
        header += "," + spec.name;
        row += ",";
        if (const auto v = f.get(spec.name)) csv::append_double(row, *v);
    }
    csv::write_file(out, header + "\n" + row + "\n");
    if (!s.hrv) std::cerr << "hrv: warning: no usable beats in " << pid << "/" << cid << '\n';
    return kOk;
}

int run_features(const DataArgs& a, const std::string& out, const std::string& quality_out) {
    const auto o = pipeline_options(a);
    const auto index = open(a, o);
    const auto r = run_pipeline(index, o, PipelineStage::features, logger(a.verbose));
    write_features_csv(out, r.sessions);
    std::size_t labelled = 0;
    for (const auto& s : r.sessions) labelled += s.scores ? 1 : 0;
    if (!quality_out.empty()) {
        std::string text = "participant_id,class_id,role,accepted\n";
        for (const auto& q : r.quality) {
            text += q.participant_id + "," + q.class_id + "," + std::string(to_string(q.role)) + "," +
                    (q.report.accepted ? "1" : "0") + "\n";
        }
        csv::write_file(quality_out, text);
    }
    std::cerr << "features: " << r.sessions.size() << " sessions (" << labelled << " labelled) written to " << out
              << '\n';
    return kOk;
}

struct ModelArgs {
    std::string features = "features.csv";
    std::string target = "overall";
    std::string families = "all";
    std::string out = "model.ngage";
    GbmParams params;
};

int run_train(ModelArgs& a, std::uint64_t seed) {
    const Target target = parse_target(a.target);
    const auto fams = parse_families(a.families);
    a.params.seed = seed;
    validate(a.params);
    const auto sessions = read_features_csv(a.features);
    const Dataset d = assemble_dataset(sessions, fams);
    std::vector<std::size_t> rows(d.rows());
    std::iota(rows.begin(), rows.end(), 0);
    const auto y = d.target(target);
    const GbmModel m = fit_gbm(d.X, rows, y, a.params, d.columns);
    save_model(a.out, m);
    std::cerr << "train: " << m.trees.size() << " trees on " << d.rows() << " sessions, " << d.cols()
              << " features\n";
    return kOk;
}

struct EvalArgs {
    std::string features = "features.csv";
    std::string target = "all";
    std::string families = "all";
    std::string regimes;
    std::string out = "report.json";
    std::string scheme = "nested";
    std::size_t outer_k = 5;
    std::size_t inner_l = 3;
    std::size_t top_k = 10;
    std::string grid_leaves = "7,15,31";
    std::string grid_lr = "0.05,0.1";
    std::string grid_rounds = "100,300";
    int min_samples_leaf = 5;
    std::size_t min_subject_sessions = 30;
    GbmParams loso;
};

int run_eval(EvalArgs& a, std::uint64_t seed) {
    const auto targets = parse_targets(a.target);
    const auto fams = parse_families(a.families);
    EvalRun run;
    run.scheme = a.scheme == "loso" ? "loso" : "nested_cv";
    auto& o = run.options;
    o.outer_k = a.outer_k;
    o.inner_l = a.inner_l;
    o.top_k = a.top_k;
    o.seed = seed;
    o.grid.num_leaves = parse_list<int>(a.grid_leaves, "--grid-leaves");
    o.grid.learning_rates.clear();
    for (auto part : csv::split(a.grid_lr, ',')) o.grid.learning_rates.push_back(csv::parse_double(csv::trim(part), "--grid-lr", 1));
    o.grid.n_rounds = parse_list<int>(a.grid_rounds, "--grid-rounds");
    o.grid.min_samples_leaf = a.min_samples_leaf;
    for (int l : o.grid.num_leaves) {
        for (double lr : o.grid.learning_rates) {
            for (int r : o.grid.n_rounds) validate(GbmParams{l, lr, r, a.min_samples_leaf, seed});
        }
    }

    const auto sessions = read_features_csv(a.features);
    std::vector<Regime> regimes;
    if (!a.regimes.empty()) regimes = load_regimes(a.regimes);

    const Dataset d = assemble_dataset(sessions, fams);
    for (Target t : targets) {
        if (run.scheme == "loso") {
            a.loso.seed = seed;
            run.reports.push_back(loso_eval(d, t, a.loso, seed));
        } else {
            run.reports.push_back(nested_cv(d, t, o));
        }
    }
    if (!regimes.empty()) run.regimes = regime_sweep(sessions, regimes, targets, o, a.min_subject_sessions);
    for (const auto& r : run.regimes) {
        if (!r.notice.empty()) std::cerr << "eval: regime " << r.regime.name << " (" << to_string(r.target) << "): " << r.notice << '\n';
    }
    write_report(run, a.out);
    for (const auto& r : run.reports) {
        std::cerr << "eval: " << to_string(r.target) << " MAE gbm " << r.metrics.gbm.mae << ", linear "
                  << r.metrics.linear.mae << ", average " << r.metrics.average.mae << ", random "
                  << r.metrics.random.mae << '\n';
    }
    return kOk;
}

int run_report(const std::string& in, const std::string& out) {
    emit_report_files(csv::read_file(in), out);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Classroom engagement pipeline: synthetic cohorts, signal processing, features and evaluation."};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    std::string config;
    app.add_option("--config", config, "TOML config file (or `default`); flags win over config values");
    app.fallthrough();

    std::uint64_t seed = 42;
    auto add_seed = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "Root seed (environment: ENGAGE_SEED)")->envname("ENGAGE_SEED")->capture_default_str();
    };

    SynthArgs synth;
    auto* s_synth = app.add_subcommand("synth", "Generate a synthetic cohort");
    s_synth->add_option("--out", synth.out, "Output directory")->capture_default_str();
    add_seed(s_synth);
    s_synth->add_option("--students", synth.cfg.n_students)->capture_default_str();
    s_synth->add_option("--teachers", synth.cfg.n_teachers)->capture_default_str();
    s_synth->add_option("--groups", synth.cfg.n_groups)->capture_default_str();
    s_synth->add_option("--days", synth.cfg.days)->capture_default_str();
    s_synth->add_option("--classes-per-day", synth.cfg.classes_per_day)->capture_default_str();
    s_synth->add_option("--class-minutes", synth.cfg.class_minutes)->capture_default_str();
    s_synth->add_option("--margin-seconds", synth.cfg.margin_seconds)->capture_default_str();
    s_synth->add_option("--boundary-jitter", synth.cfg.boundary_jitter_seconds)->capture_default_str();
    s_synth->add_option("--survey-rate", synth.cfg.survey_rate)->capture_default_str();
    s_synth->add_option("--artifact-rate", synth.cfg.artifact_rate)->capture_default_str();
    s_synth->add_option("--start-date", synth.start_date)->capture_default_str();
    s_synth->add_option("--timezone", synth.timezone)->capture_default_str();
    s_synth->add_option("--c-eda", synth.cfg.couplings.c_eda)->capture_default_str();
    s_synth->add_option("--c-hrv", synth.cfg.couplings.c_hrv)->capture_default_str();
    s_synth->add_option("--c-acc", synth.cfg.couplings.c_acc)->capture_default_str();
    s_synth->add_option("--c-env", synth.cfg.couplings.c_env)->capture_default_str();
    s_synth->add_option("--noise-eda", synth.cfg.noise.eda_us)->capture_default_str();
    s_synth->add_option("--noise-bvp", synth.cfg.noise.bvp)->capture_default_str();
    s_synth->add_option("--noise-rr", synth.cfg.noise.rr_ms)->capture_default_str();
    s_synth->add_option("--noise-acc", synth.cfg.noise.acc_g)->capture_default_str();
    s_synth->add_option("--noise-st", synth.cfg.noise.st_c)->capture_default_str();
    s_synth->add_option("--noise-env", synth.cfg.noise.env)->capture_default_str();
    s_synth->add_option("--noise-survey", synth.cfg.noise.survey_step)->capture_default_str();
    s_synth->add_option("--latent-sd", synth.cfg.noise.latent_sd)->capture_default_str();

    DataArgs data;
    std::string clean_out = "quality.csv";
    auto* s_clean = app.add_subcommand("clean", "EDA quality gate per (participant, class) session");
    add_data_options(s_clean, data);
    s_clean->add_option("--out", clean_out)->capture_default_str();

    std::string segment_out = "boundaries.csv";
    auto* s_segment = app.add_subcommand("segment", "Estimate actual class start and end times");
    add_data_options(s_segment, data);
    s_segment->add_option("--out", segment_out)->capture_default_str();

    std::string session;
    std::string eda_out = "decomp.csv";
    auto* s_eda = app.add_subcommand("eda", "Decompose one session's EDA");
    add_data_options(s_eda, data);
    s_eda->add_option("--session", session, "<participant_id>:<class_id>")->required();
    s_eda->add_option("--out", eda_out)->capture_default_str();

    std::string hrv_out = "hrv.csv";
    auto* s_hrv = app.add_subcommand("hrv", "HRV features of one session");
    add_data_options(s_hrv, data);
    s_hrv->add_option("--session", session, "<participant_id>:<class_id>")->required();
    s_hrv->add_option("--out", hrv_out)->capture_default_str();

    std::string features_out = "features.csv";
    std::string quality_out;
    auto* s_features = app.add_subcommand("features", "Per-session feature table");
    add_data_options(s_features, data);
    s_features->add_option("--out", features_out)->capture_default_str();
    s_features->add_option("--quality", quality_out, "Also write the session acceptance list");

    ModelArgs model;
    auto* s_train = app.add_subcommand("train", "Fit a boosted model on a feature table");
    s_train->add_option("--features", model.features)->capture_default_str();
    s_train->add_option("--target", model.target)->capture_default_str();
    s_train->add_option("--families", model.families, "all or FAMILY[+FAMILY...]")->capture_default_str();
    s_train->add_option("--out", model.out)->capture_default_str();
    s_train->add_option("--num-leaves", model.params.num_leaves)->capture_default_str();
    s_train->add_option("--learning-rate", model.params.learning_rate)->capture_default_str();
    s_train->add_option("--n-rounds", model.params.n_rounds)->capture_default_str();
    s_train->add_option("--min-samples-leaf", model.params.min_samples_leaf)->capture_default_str();
    add_seed(s_train);

    EvalArgs ev;
    auto* s_eval = app.add_subcommand("eval", "Nested cross-validation or LOSO evaluation");
    s_eval->add_option("--features", ev.features)->capture_default_str();
    s_eval->add_option("--target", ev.target, "behavioural, emotional, cognitive, overall or all")->capture_default_str();
    s_eval->add_option("--families", ev.families, "all or FAMILY[+FAMILY...]")->capture_default_str();
    s_eval->add_option("--regimes", ev.regimes, "Regime list file");
    s_eval->add_option("--out", ev.out)->capture_default_str();
    s_eval->add_option("--scheme", ev.scheme)->check(CLI::IsMember({"nested", "loso"}))->capture_default_str();
    s_eval->add_option("--outer-k", ev.outer_k)->capture_default_str();
    s_eval->add_option("--inner-l", ev.inner_l)->capture_default_str();
    s_eval->add_option("--top-k", ev.top_k)->capture_default_str();
    s_eval->add_option("--grid-leaves", ev.grid_leaves)->capture_default_str();
    s_eval->add_option("--grid-lr", ev.grid_lr)->capture_default_str();
    s_eval->add_option("--grid-rounds", ev.grid_rounds)->capture_default_str();
    s_eval->add_option("--min-samples-leaf", ev.min_samples_leaf)->capture_default_str();
    s_eval->add_option("--min-subject-sessions", ev.min_subject_sessions)->capture_default_str();
    s_eval->add_option("--loso-leaves", ev.loso.num_leaves)->capture_default_str();
    s_eval->add_option("--loso-lr", ev.loso.learning_rate)->capture_default_str();
    s_eval->add_option("--loso-rounds", ev.loso.n_rounds)->capture_default_str();
    add_seed(s_eval);

    std::string report_in = "report.json";
    std::string report_out = ".";
    auto* s_report = app.add_subcommand("report", "Regenerate the CSV tables from report.json");
    s_report->add_option("--in", report_in)->capture_default_str();
    s_report->add_option("--out", report_out, "Output directory")->capture_default_str();

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        // First pass finds the subcommand and the config file; the second parses config
        // tokens followed by the real arguments so that flags win.
        app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
        if (!config.empty() && config != "default") {
            CLI::App* active = app.get_subcommands().front();
            std::vector<std::string> merged;
            const auto pos = std::find(args.begin(), args.end(), active->get_name());
            merged.insert(merged.end(), args.begin(), pos + 1);
            const auto tokens = config_tokens(config, app, *active);
            merged.insert(merged.end(), tokens.begin(), tokens.end());
            merged.insert(merged.end(), pos + 1, args.end());
            app.clear();
            app.parse(std::vector<std::string>(merged.rbegin(), merged.rend()));
        }
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    } catch (const IoError& e) {
        std::cerr << "engage: " << e.what() << '\n';
        return kIo;
    } catch (const Error& e) {
        std::cerr << "engage: " << e.what() << '\n';
        return kValidation;
    }

    try {
        if (*s_synth) return run_synth(synth, seed);
        if (*s_clean) return run_clean(data, clean_out);
        if (*s_segment) return run_segment(data, segment_out);
        if (*s_eda) return run_eda(data, session, eda_out);
        if (*s_hrv) return run_hrv(data, session, hrv_out);
        if (*s_features) return run_features(data, features_out, quality_out);
        if (*s_train) return run_train(model, seed);
        if (*s_eval) return run_eval(ev, seed);
        if (*s_report) return run_report(report_in, report_out);
    } catch (const IoError& e) {
        std::cerr << "engage: " << e.what() << '\n';
        return kIo;
    } catch (const Error& e) {
        std::cerr << "engage: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "engage: " << e.what() << '\n';
        return kValidation;
    }
    return kValidation;
}
