#include "engage/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "engage/csv.hpp"
#include "engage/errors.hpp"

namespace engage {

std::vector<double> column_medians(const FeatureMatrix& X, std::span<const std::size_t> rows) {
    if (X.empty()) return {};
    const std::size_t p = X.front().size();
    std::vector<double> med(p, 0.0);
    std::vector<double> v;
    for (std::size_t j = 0; j < p; ++j) {
        v.clear();
        for (std::size_t i : rows) {
            if (X[i][j]) v.push_back(*X[i][j]);
        }
        if (v.empty()) continue;
        std::sort(v.begin(), v.end());
        const std::size_t m = v.size();
        med[j] = m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
    }
    return med;
}

Eigen::MatrixXd impute(const FeatureMatrix& X, std::span<const std::size_t> rows, std::span<const double> fill) {
    const auto p = static_cast<Eigen::Index>(fill.size());
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), p);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = X[rows[r]];
        if (row.size() != fill.size()) throw ValidationError("row width differs from the imputation vector");
        for (Eigen::Index j = 0; j < p; ++j) {
            const auto& v = row[static_cast<std::size_t>(j)];
            out(static_cast<Eigen::Index>(r), j) = v ? *v : fill[static_cast<std::size_t>(j)];
        }
    }
    return out;
}

void validate(const GbmParams& p) {
    if (p.num_leaves < 2) throw ValidationError("num_leaves must be at least 2");
    if (!(p.learning_rate > 0.0 && p.learning_rate <= 1.0)) throw ValidationError("learning_rate must lie in (0, 1]");
    if (p.n_rounds < 1) throw ValidationError("n_rounds must be at least 1");
    if (p.min_samples_leaf < 1) throw ValidationError("min_samples_leaf must be at least 1");
}

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
        const auto& nd = nodes[i];
        i = static_cast<std::size_t>(row[nd.feature] <= nd.threshold ? nd.left : nd.right);
    }
    return nodes[i].value;
}

std::size_t RegressionTree::n_leaves() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

std::vector<double> GbmModel::predict(const Eigen::MatrixXd& X, std::size_t n_trees) const {
    if (static_cast<std::size_t>(X.cols()) != columns.size()) throw ValidationError("column count differs from the model");
    const std::size_t nt = std::min(n_trees, trees.size());
    std::vector<double> out(static_cast<std::size_t>(X.rows()), base_score);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double s = 0.0;
        for (std::size_t t = 0; t < nt; ++t) s += trees[t].predict(X.row(i));
        out[static_cast<std::size_t>(i)] += learning_rate * s;
    }
    return out;
}

std::vector<double> GbmModel::predict(const FeatureMatrix& X, std::span<const std::string> cols, std::size_t n_trees) const {
    if (!std::equal(cols.begin(), cols.end(), columns.begin(), columns.end())) {
        throw ValidationError("feature columns do not match the model's training columns");
    }
    std::vector<std::size_t> rows(X.size());
    std::iota(rows.begin(), rows.end(), 0);
    return predict(impute(X, rows, medians), n_trees);
}

std::vector<std::size_t> GbmModel::importance() const {
    std::vector<std::size_t> imp(columns.size(), 0);
    for (const auto& t : trees) {
        for (const auto& n : t.nodes) {
            if (n.feature >= 0) ++imp[static_cast<std::size_t>(n.feature)];
        }
    }
    return imp;
}

namespace {

struct Split {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

struct Leaf {
    int node = 0;
    std::vector<std::vector<int>> rows;  // per feature, row ids sorted by that feature
    Split best;
};

class TreeGrower {
public:
    TreeGrower(const Eigen::MatrixXd& X, const std::vector<std::vector<int>>& presorted, int min_leaf)
        : X_(X), presorted_(presorted), min_leaf_(min_leaf), goes_left_(static_cast<std::size_t>(X.rows())) {}

    RegressionTree grow(const std::vector<double>& r, int num_leaves, std::vector<int>& leaf_of_row) {
        r_ = &r;
        RegressionTree tree;
        tree.nodes.emplace_back();
        std::vector<Leaf> leaves;
        leaves.push_back({0, presorted_, {}});
        leaves.back().best = best_split(leaves.back());

        while (static_cast<int>(leaves.size()) < num_leaves) {
            std::size_t pick = leaves.size();
            for (std::size_t i = 0; i < leaves.size(); ++i) {
                if (leaves[i].best.gain > 0.0 && (pick == leaves.size() || leaves[i].best.gain > leaves[pick].best.gain)) pick = i;
            }
            if (pick == leaves.size()) break;
            Leaf parent = std::move(leaves[pick]);
            const Split s = parent.best;
            const int left_node = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            auto& pn = tree.nodes[static_cast<std::size_t>(parent.node)];
            pn.feature = s.feature;
            pn.threshold = s.threshold;
            pn.left = left_node;
            pn.right = left_node + 1;

            for (int row : parent.rows[0]) goes_left_[static_cast<std::size_t>(row)] = X_(row, s.feature) <= s.threshold;
            Leaf left{left_node, {}, {}};
            Leaf right{left_node + 1, {}, {}};
            left.rows.resize(parent.rows.size());
            right.rows.resize(parent.rows.size());
            for (std::size_t f = 0; f < parent.rows.size(); ++f) {
                for (int row : parent.rows[f]) {
                    (goes_left_[static_cast<std::size_t>(row)] ? left.rows[f] : right.rows[f]).push_back(row);
                }
            }
            left.best = best_split(left);
            right.best = best_split(right);
            leaves[pick] = std::move(left);
            leaves.push_back(std::move(right));
        }

        for (const auto& leaf : leaves) {
            double sum = 0.0;
            for (int row : leaf.rows[0]) sum += r[static_cast<std::size_t>(row)];
            const double value = sum / static_cast<double>(leaf.rows[0].size());
            tree.nodes[static_cast<std::size_t>(leaf.node)].value = value;
            for (int row : leaf.rows[0]) leaf_of_row[static_cast<std::size_t>(row)] = leaf.node;
        }
        return tree;
    }

private:
    Split best_split(const Leaf& leaf) const {
        Split best;
        const auto& r = *r_;
        const auto n = static_cast<int>(leaf.rows[0].size());
        if (n < 2 * min_leaf_) return best;
        double total = 0.0;
        for (int row : leaf.rows[0]) total += r[static_cast<std::size_t>(row)];
        for (std::size_t f = 0; f < leaf.rows.size(); ++f) {
            const auto& rows = leaf.rows[f];
            const auto fi = static_cast<Eigen::Index>(f);
            double left_sum = 0.0;
            for (int k = 1; k < n; ++k) {
                left_sum += r[static_cast<std::size_t>(rows[static_cast<std::size_t>(k - 1)])];
                if (k < min_leaf_ || n - k < min_leaf_) continue;
                const double a = X_(rows[static_cast<std::size_t>(k - 1)], fi);
                const double b = X_(rows[static_cast<std::size_t>(k)], fi);
                if (!(a < b)) continue;
                const double nl = k;
                const double nr = n - k;
                const double diff = left_sum / nl - (total - left_sum) / nr;
                const double gain = diff * diff * nl * nr / static_cast<double>(n);
                if (gain > best.gain) {
                    best.gain = gain;
                    best.feature = static_cast<int>(f);
                    double t = a + 0.5 * (b - a);
                    if (!(t < b)) t = a;
                    best.threshold = t;
                }
            }
        }
        return best;
    }

    const Eigen::MatrixXd& X_;
    const std::vector<std::vector<int>>& presorted_;
    int min_leaf_;
    std::vector<char> goes_left_;
    const std::vector<double>* r_ = nullptr;
};

}  // namespace

GbmModel fit_gbm(const Eigen::MatrixXd& X, std::span<const double> y, const GbmParams& params,
                 std::vector<std::string> columns) {
    validate(params);
    const auto n = static_cast<std::size_t>(X.rows());
    const auto p = static_cast<std::size_t>(X.cols());
    if (y.size() != n) throw ValidationError("target length differs from the number of rows");
    if (n < 2 * static_cast<std::size_t>(params.min_samples_leaf)) {
        throw ValidationError("need at least 2 * min_samples_leaf training rows");
    }
    if (!X.allFinite()) throw ValidationError("training matrix contains non-finite values");
    if (columns.empty()) {
        for (std::size_t j = 0; j < p; ++j) columns.push_back("f" + std::to_string(j));
    }
    if (columns.size() != p) throw ValidationError("column names do not match the matrix width");

    GbmModel model;
    model.columns = std::move(columns);
    model.medians.assign(p, 0.0);
    model.learning_rate = params.learning_rate;
    model.params = params;
    const bool constant = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    model.base_score = constant ? y[0] : std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

    std::vector<std::vector<int>> presorted(p);
    for (std::size_t f = 0; f < p; ++f) {
        auto& idx = presorted[f];
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), 0);
        const auto fi = static_cast<Eigen::Index>(f);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return X(a, fi) < X(b, fi); });
    }

    std::vector<double> pred(n, model.base_score);
    std::vector<double> r(n);
    std::vector<int> leaf_of_row(n, 0);
    TreeGrower grower(X, presorted, params.min_samples_leaf);
    for (int round = 0; round < params.n_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - pred[i];
        RegressionTree tree = grower.grow(r, params.num_leaves, leaf_of_row);
        if (tree.nodes.size() == 1) break;
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] += params.learning_rate * tree.nodes[static_cast<std::size_t>(leaf_of_row[i])].value;
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

GbmModel fit_gbm(const FeatureMatrix& X, std::span<const std::size_t> rows, std::span<const double> y,
                 const GbmParams& params, std::vector<std::string> columns) {
    std::vector<double> med = column_medians(X, rows);
    GbmModel m = fit_gbm(impute(X, rows, med), y, params, std::move(columns));
    m.medians = std::move(med);
    return m;
}

std::vector<std::pair<std::string, std::size_t>> feature_importance(const GbmModel& model) {
    const auto imp = model.importance();
    std::vector<std::size_t> order(imp.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return imp[a] > imp[b]; });
    std::vector<std::pair<std::string, std::size_t>> out;
    for (std::size_t j : order) out.emplace_back(model.columns[j], imp[j]);
    return out;
}

std::vector<std::string> top_features(const GbmModel& model, std::size_t k) {
    std::vector<std::string> out;
    for (const auto& [name, count] : feature_importance(model)) {
        if (out.size() == k || count == 0) break;
        out.push_back(name);
    }
    return out;
}

void save_model(const std::filesystem::path& path, const GbmModel& m) {
    nlohmann::json j;
    j["format"] = "engage-gbm";
    j["version"] = 1;
    j["columns"] = m.columns;
    j["medians"] = m.medians;
    j["base_score"] = m.base_score;
    j["learning_rate"] = m.learning_rate;
    j["params"] = {{"num_leaves", m.params.num_leaves},
                   {"learning_rate", m.params.learning_rate},
                   {"n_rounds", m.params.n_rounds},
                   {"min_samples_leaf", m.params.min_samples_leaf},
                   {"seed", m.params.seed}};
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : m.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : t.nodes) {
            if (n.feature < 0) {
                nodes.push_back({{"value", n.value}});
            } else {
                nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
            }
        }
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    csv::write_file(path, j.dump(1) + "\n");
}

GbmModel load_model(const std::filesystem::path& path) {
    const std::string text = csv::read_file(path);
    GbmModel m;
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format") != "engage-gbm") throw ValidationError("not an engage model file: " + path.string());
        m.columns = j.at("columns").get<std::vector<std::string>>();
        m.medians = j.at("medians").get<std::vector<double>>();
        m.base_score = j.at("base_score").get<double>();
        m.learning_rate = j.at("learning_rate").get<double>();
        const auto& p = j.at("params");
        m.params.num_leaves = p.at("num_leaves").get<int>();
        m.params.learning_rate = p.at("learning_rate").get<double>();
        m.params.n_rounds = p.at("n_rounds").get<int>();
        m.params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
        m.params.seed = p.at("seed").get<std::uint64_t>();
        for (const auto& jt : j.at("trees")) {
            RegressionTree t;
            for (const auto& jn : jt) {
                TreeNode n;
                if (jn.contains("value")) {
                    n.value = jn.at("value").get<double>();
                } else {
                    n.feature = jn.at("feature").get<int>();
                    n.threshold = jn.at("threshold").get<double>();
                    n.left = jn.at("left").get<int>();
                    n.right = jn.at("right").get<int>();
                }
                t.nodes.push_back(n);
            }
            m.trees.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed model file " + path.string() + ": " + e.what());
    }
    if (m.medians.size() != m.columns.size()) throw ValidationError("model file has inconsistent column metadata");
    for (const auto& t : m.trees) {
        for (const auto& n : t.nodes) {
            const auto nn = static_cast<int>(t.nodes.size());
            if (n.feature >= static_cast<int>(m.columns.size()) ||
                (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= nn || n.right >= nn))) {
                throw ValidationError("model file has an invalid tree node");
            }
        }
    }
    return m;
}

std::vector<double> LinearModel::predict(const Eigen::MatrixXd& X) const {
    if (static_cast<std::size_t>(X.cols()) != beta.size()) throw ValidationError("column count differs from the model");
    std::vector<double> out(static_cast<std::size_t>(X.rows()), intercept);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (std::size_t j = 0; j < beta.size(); ++j) {
            out[static_cast<std::size_t>(i)] += beta[j] * (X(i, static_cast<Eigen::Index>(j)) - mean[j]) / scale[j];
        }
    }
    return out;
}

std::pair<std::vector<double>, double> LinearModel::original_coefficients() const {
    std::vector<double> c(beta.size());
    double b0 = intercept;
    for (std::size_t j = 0; j < beta.size(); ++j) {
        c[j] = beta[j] / scale[j];
        b0 -= c[j] * mean[j];
    }
    return {c, b0};
}

LinearModel fit_linear(const Eigen::MatrixXd& X, std::span<const double> y, double ridge) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (n < 2) throw ValidationError("linear regression needs at least 2 rows");
    if (static_cast<std::size_t>(n) != y.size()) throw ValidationError("target length differs from the number of rows");
    LinearModel m;
    Eigen::MatrixXd Z = X;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double mu = Z.col(j).mean();
        const double sd = std::sqrt((Z.col(j).array() - mu).square().mean());
        m.mean.push_back(mu);
        m.scale.push_back(sd > 0.0 ? sd : 1.0);
        Z.col(j) = (Z.col(j).array() - mu) / m.scale.back();
    }
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
    m.intercept = yv.mean();
    const Eigen::VectorXd yc = yv.array() - m.intercept;
    Eigen::MatrixXd G = Z.transpose() * Z;
    G.diagonal().array() += ridge;
    const Eigen::VectorXd b = G.ldlt().solve(Z.transpose() * yc);
    m.beta.assign(b.data(), b.data() + b.size());
    return m;
}

AveragePredictor baseline_average(std::span<const double> y) {
    if (y.empty()) throw ValidationError("empty training targets");
    return {std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size())};
}

RandomPredictor::RandomPredictor(std::vector<double> pool, std::uint64_t seed) : pool_(std::move(pool)), rng_(seed) {
    if (pool_.empty()) throw ValidationError("empty training targets");
}

std::vector<double> RandomPredictor::predict(std::size_t n) {
    std::vector<double> out(n);
    for (double& v : out) v = pool_[static_cast<std::size_t>(rng_() % pool_.size())];
    return out;
}

RandomPredictor baseline_random(std::span<const double> y, std::uint64_t seed) {
    return RandomPredictor({y.begin(), y.end()}, seed);
}

}  // namespace engage
