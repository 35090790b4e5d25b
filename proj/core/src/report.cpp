#include "engage/report.hpp"

#include <algorithm>
#include <map>

#include "engage/csv.hpp"
#include "engage/errors.hpp"
#include "json.hpp"

namespace engage {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kPredictors[] = {"gbm", "linear", "average", "random"};

json metrics_json(const Metrics& m) { return {{"mae", m.mae}, {"rmse", m.rmse}, {"n", m.n}}; }

json predictor_json(const PredictorMetrics& p) {
    return {{"gbm", metrics_json(p.gbm)},
            {"linear", metrics_json(p.linear)},
            {"average", metrics_json(p.average)},
            {"random", metrics_json(p.random)}};
}

json families_json(const std::vector<Family>& fs) {
    json a = json::array();
    for (Family f : fs) a.push_back(std::string(to_string(f)));
    return a;
}

json params_json(const GbmParams& p) {
    return {{"num_leaves", p.num_leaves},
            {"learning_rate", p.learning_rate},
            {"n_rounds", p.n_rounds},
            {"min_samples_leaf", p.min_samples_leaf}};
}

json report_obj(const EvalReport& r) {
    json j;
    j["scheme"] = r.scheme;
    j["target"] = std::string(to_string(r.target));
    j["families"] = families_json(r.families);
    j["subject"] = r.subject ? json(std::string(to_string(*r.subject))) : json(nullptr);
    j["n_rows"] = r.n_rows;
    j["n_groups"] = r.n_groups;
    j["feature_selection"] = r.feature_selection;
    j["metrics"] = predictor_json(r.metrics);
    json folds = json::array();
    for (const auto& f : r.folds) {
        folds.push_back({{"fold", f.fold},
                         {"chosen", params_json(f.chosen)},
                         {"inner_mae", f.inner_mae},
                         {"inner_fits", f.inner_fits},
                         {"selected_features", f.selected_features},
                         {"test_groups", f.test_groups},
                         {"metrics", predictor_json(f.metrics)}});
    }
    j["folds"] = std::move(folds);
    json pp = json::array();
    for (const auto& p : r.per_participant) {
        pp.push_back({{"participant_id", p.participant_id},
                      {"n", p.n},
                      {"mae", p.mae},
                      {"rmse", p.rmse},
                      {"median", p.median},
                      {"q1", p.q1},
                      {"q3", p.q3},
                      {"min", p.min},
                      {"max", p.max},
                      {"average_mae", p.average_mae}});
    }
    j["per_participant"] = std::move(pp);
    json splits = json::array();
    for (const auto& s : r.splits) {
        splits.push_back({{"outer_fold", s.outer_fold},
                          {"inner_fold", s.inner_fold ? json(*s.inner_fold) : json(nullptr)},
                          {"train_groups", s.train_groups},
                          {"test_groups", s.test_groups}});
    }
    j["splits"] = std::move(splits);
    json preds = json::array();
    for (const auto& p : r.predictions) {
        preds.push_back({{"participant_id", p.participant_id},
                         {"class_id", p.class_id},
                         {"fold", p.fold},
                         {"y", p.y},
                         {"gbm", p.gbm},
                         {"linear", p.linear},
                         {"average", p.average},
                         {"random", p.random}});
    }
    j["predictions"] = std::move(preds);
    return j;
}

void add_num(std::string& out, const json& v) {
    if (v.is_number_float()) {
        csv::append_double(out, v.get<double>());
    } else if (v.is_number()) {
        out += v.dump();
    }
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string families_text(const json& fams) {
    std::string s;
    for (const auto& f : fams) s += (s.empty() ? "" : "+") + f.get<std::string>();
    return s;
}

std::string subject_text(const json& s) { return s.is_null() ? "" : s.get<std::string>(); }

void participant_rows(std::string& out, const json& scheme, const std::string& regime, const json& report) {
    for (const auto& p : report.at("per_participant")) {
        out += scheme.get<std::string>() + "," + csv_field(regime) + "," + report.at("target").get<std::string>() + "," +
               csv_field(p.at("participant_id").get<std::string>()) + ",";
        add_num(out, p.at("n"));
        for (const char* k : {"mae", "rmse", "median", "q1", "q3", "min", "max", "average_mae"}) {
            out += ',';
            add_num(out, p.at(k));
        }
        out += '\n';
    }
}

}  // namespace

std::string report_json(const EvalRun& run) {
    json j;
    j["format"] = "engage-report";
    j["version"] = 1;
    j["scheme"] = run.scheme;
    const auto& o = run.options;
    j["options"] = {{"outer_k", o.outer_k},
                    {"inner_l", o.inner_l},
                    {"top_k", o.top_k},
                    {"seed", o.seed},
                    {"grid",
                     {{"num_leaves", o.grid.num_leaves},
                      {"learning_rates", o.grid.learning_rates},
                      {"n_rounds", o.grid.n_rounds},
                      {"min_samples_leaf", o.grid.min_samples_leaf}}}};
    json reports = json::array();
    for (const auto& r : run.reports) reports.push_back(report_obj(r));
    j["reports"] = std::move(reports);
    json regimes = json::array();
    for (const auto& r : run.regimes) {
        regimes.push_back({{"regime", r.regime.name},
                           {"families", families_json(r.regime.families)},
                           {"subject", r.regime.subject ? json(std::string(to_string(*r.regime.subject))) : json(nullptr)},
                           {"target", std::string(to_string(r.target))},
                           {"notice", r.notice},
                           {"report", r.report ? report_obj(*r.report) : json(nullptr)}});
    }
    j["regimes"] = std::move(regimes);
    return j.dump(1) + "\n";
}

void emit_report_files(std::string_view json_text, const fs::path& out_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("report is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || j.value("format", "") != "engage-report") {
        throw ValidationError("not an engage report document");
    }
    try {
        std::string t6 = std::string(kTable6Header) + "\n";
        for (const auto& r : j.at("reports")) {
            t6 += r.at("target").get<std::string>();
            for (const char* stat : {"mae", "rmse"}) {
                for (const char* p : kPredictors) {
                    t6 += ',';
                    add_num(t6, r.at("metrics").at(p).at(stat));
                }
            }
            t6 += '\n';
        }

        std::string t7 = std::string(kTable7Header) + "\n";
        std::string long_table = std::string(kRegimeTableHeader) + "\n";
        std::string pp = std::string(kParticipantHeader) + "\n";
        for (const auto& r : j.at("reports")) participant_rows(pp, j.at("scheme"), "main", r);

        // table7 rows in order of first appearance of each regime name.
        std::vector<std::string> order;
        for (const auto& r : j.at("regimes")) {
            const auto name = r.at("regime").get<std::string>();
            if (std::find(order.begin(), order.end(), name) == order.end()) order.push_back(name);
        }
        for (const auto& name : order) {
            std::string fams;
            std::string subject;
            std::string n_rows;
            std::string notice;
            std::map<std::string, std::pair<std::string, std::string>> cells;
            for (const auto& r : j.at("regimes")) {
                if (r.at("regime").get<std::string>() != name) continue;
                fams = families_text(r.at("families"));
                subject = subject_text(r.at("subject"));
                const std::string target = r.at("target").get<std::string>();
                if (notice.empty()) notice = r.at("notice").get<std::string>();
                const auto& rep = r.at("report");
                if (rep.is_null()) {
                    long_table += csv_field(name) + "," + fams + "," + subject + "," + target + ",,,,,," +
                                  csv_field(r.at("notice").get<std::string>()) + "\n";
                    continue;
                }
                n_rows.clear();
                add_num(n_rows, rep.at("n_rows"));
                std::string mae;
                std::string rmse;
                add_num(mae, rep.at("metrics").at("gbm").at("mae"));
                add_num(rmse, rep.at("metrics").at("gbm").at("rmse"));
                cells[target] = {mae, rmse};
                for (const char* p : kPredictors) {
                    long_table += csv_field(name) + "," + fams + "," + subject + "," + target + "," + p + ",";
                    add_num(long_table, rep.at("metrics").at(p).at("mae"));
                    long_table += ',';
                    add_num(long_table, rep.at("metrics").at(p).at("rmse"));
                    long_table += ',';
                    add_num(long_table, rep.at("n_rows"));
                    long_table += ',';
                    add_num(long_table, rep.at("n_groups"));
                    long_table += ",\n";
                }
                participant_rows(pp, j.at("scheme"), name, rep);
            }
            t7 += csv_field(name) + "," + fams + "," + subject + "," + n_rows;
            for (Target t : kAllTargets) {
                const auto it = cells.find(std::string(to_string(t)));
                t7 += it == cells.end() ? ",," : "," + it->second.first + "," + it->second.second;
            }
            t7 += "," + csv_field(notice) + "\n";
        }

        csv::write_file(out_dir / "table6.csv", t6);
        csv::write_file(out_dir / "table7.csv", t7);
        csv::write_file(out_dir / "regime_table.csv", long_table);
        csv::write_file(out_dir / "per_participant_errors.csv", pp);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed engage report: ") + e.what());
    }
}

void write_report(const EvalRun& run, const fs::path& json_path) {
    const std::string text = report_json(run);
    csv::write_file(json_path, text);
    emit_report_files(text, json_path.parent_path().empty() ? fs::path(".") : json_path.parent_path());
}

}  // namespace engage
