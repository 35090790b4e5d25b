#include "engage/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

#include "engage/csv.hpp"
#include "engage/errors.hpp"

namespace engage {

std::vector<double> Dataset::target(Target t) const {
    std::vector<double> out;
    out.reserve(y.size());
    for (const auto& s : y) out.push_back(s.get(t));
    return out;
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
    Dataset d;
    d.columns = columns;
    d.column_families = column_families;
    for (std::size_t i : idx) {
        if (i >= rows()) throw ValidationError("row index out of range");
        d.X.push_back(X[i]);
        d.y.push_back(y[i]);
        d.groups.push_back(groups[i]);
        d.class_ids.push_back(class_ids[i]);
        d.subjects.push_back(subjects[i]);
    }
    return d;
}

Dataset Dataset::select_columns(std::span<const std::string> names) const {
    std::vector<std::size_t> pick;
    for (const auto& n : names) {
        const auto it = std::find(columns.begin(), columns.end(), n);
        if (it == columns.end()) throw ValidationError("column '" + n + "' not in dataset");
        pick.push_back(static_cast<std::size_t>(it - columns.begin()));
    }
    Dataset d = *this;
    d.columns.clear();
    d.column_families.clear();
    for (std::size_t j : pick) {
        d.columns.push_back(columns[j]);
        d.column_families.push_back(column_families[j]);
    }
    for (std::size_t i = 0; i < rows(); ++i) {
        d.X[i].clear();
        for (std::size_t j : pick) d.X[i].push_back(X[i][j]);
    }
    return d;
}

Dataset assemble_dataset(std::span<const SessionRecord> sessions, std::span<const Family> families) {
    if (families.empty()) throw ValidationError("no sensor family selected");
    Dataset d;
    std::vector<std::size_t> cols;
    const auto& reg = feature_registry();
    for (std::size_t j = 0; j < reg.size(); ++j) {
        if (std::find(families.begin(), families.end(), reg[j].family) == families.end()) continue;
        cols.push_back(j);
        d.columns.push_back(reg[j].name);
        d.column_families.push_back(reg[j].family);
    }

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        if (sessions[i].scores) order.push_back(i);
    }
    if (order.empty()) throw ValidationError("no labelled session to assemble");
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& fa = sessions[a].features;
        const auto& fb = sessions[b].features;
        return std::tie(fa.participant_id, fa.class_id) < std::tie(fb.participant_id, fb.class_id);
    });
    for (std::size_t i : order) {
        const auto& s = sessions[i];
        std::vector<std::optional<double>> row;
        row.reserve(cols.size());
        for (std::size_t j : cols) row.push_back(s.features.values[j]);
        d.X.push_back(std::move(row));
        d.y.push_back(*s.scores);
        d.groups.push_back(s.features.participant_id);
        d.class_ids.push_back(s.features.class_id);
        d.subjects.push_back(s.subject);
    }
    return d;
}

namespace {

constexpr const char* kFixedColumns = "participant_id,class_id,subject,behavioural,emotional,cognitive,overall";

std::string features_header() {
    std::string h = kFixedColumns;
    for (const auto& spec : feature_registry()) h += "," + spec.name;
    return h;
}

}  // namespace

void write_features_csv(const std::filesystem::path& path, std::span<const SessionRecord> sessions) {
    std::string out = features_header() + "\n";
    for (const auto& s : sessions) {
        out += s.features.participant_id + "," + s.features.class_id + "," + std::string(to_string(s.subject));
        for (Target t : kAllTargets) {
            out += ",";
            if (s.scores) csv::append_double(out, s.scores->get(t));
        }
        for (const auto& v : s.features.values) {
            out += ",";
            if (v) csv::append_double(out, *v);
        }
        out += "\n";
    }
    csv::write_file(path, out);
}

std::vector<SessionRecord> read_features_csv(const std::filesystem::path& path) {
    const std::string text = csv::read_file(path);
    const std::string file = path.string();
    csv::LineReader reader(text);
    std::string_view line;
    if (!reader.next(line)) throw ParseError(file, 1, "missing header");
    csv::expect_header(line, features_header(), file);
    const std::size_t nfeat = feature_registry().size();

    std::vector<SessionRecord> out;
    while (reader.next(line)) {
        if (csv::trim(line).empty()) continue;
        const auto fields = csv::split(line);
        if (fields.size() != 7 + nfeat) {
            throw ParseError(file, reader.line_number(), "expected " + std::to_string(7 + nfeat) + " fields");
        }
        SessionRecord r;
        r.features.participant_id = std::string(fields[0]);
        r.features.class_id = std::string(fields[1]);
        try {
            r.subject = parse_subject(fields[2]);
        } catch (const ValidationError& e) {
            throw ParseError(file, reader.line_number(), e.what());
        }
        const bool labelled = !fields[3].empty();
        if (labelled) {
            EngagementScores sc;
            sc.behavioural = csv::parse_double(fields[3], file, reader.line_number());
            sc.emotional = csv::parse_double(fields[4], file, reader.line_number());
            sc.cognitive = csv::parse_double(fields[5], file, reader.line_number());
            sc.overall = csv::parse_double(fields[6], file, reader.line_number());
            r.scores = sc;
        }
        for (std::size_t j = 0; j < nfeat; ++j) {
            const auto f = fields[7 + j];
            if (!f.empty()) r.features.values[j] = csv::parse_double(f, file, reader.line_number());
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace engage
