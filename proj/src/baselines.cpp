#include "doust/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <tuple>

#include "doust/random.hpp"

namespace doust::baselines {

namespace {

constexpr double kEulerGamma = 0.5772156649015329;

std::span<const double> row_span(const Matrix& x, Eigen::Index r) {
    return {x.row(r).data(), static_cast<std::size_t>(x.cols())};
}

// ---- isolation tree construction -----------------------------------------

class IsolationBuilder {
public:
    IsolationBuilder(const Matrix& x, std::size_t limit, std::mt19937_64& rng) : x_(x), limit_(limit), rng_(rng) {}

    IsolationTree build(std::vector<std::size_t> rows) {
        IsolationTree tree;
        grow(tree, rows, 0);
        return tree;
    }

private:
    std::int32_t grow(IsolationTree& tree, std::vector<std::size_t>& rows, std::size_t depth) {
        const auto id = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes[static_cast<std::size_t>(id)].size = rows.size();
        tree.nodes[static_cast<std::size_t>(id)].depth = depth;
        if (depth >= limit_ || rows.size() <= 1) return id;

        std::vector<int> candidates;
        std::vector<std::pair<double, double>> ranges;
        for (Eigen::Index f = 0; f < x_.cols(); ++f) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (auto r : rows) {
                const double v = x_(static_cast<Eigen::Index>(r), f);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi > lo) {
                candidates.push_back(static_cast<int>(f));
                ranges.emplace_back(lo, hi);
            }
        }
        if (candidates.empty()) return id;

        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        const std::size_t c = pick(rng_);
        const auto [lo, hi] = ranges[c];
        std::uniform_real_distribution<double> cut(lo, hi);
        double threshold = cut(rng_);
        while (!(threshold > lo)) threshold = cut(rng_);

        const int feature = candidates[c];
        std::vector<std::size_t> left, right;
        for (auto r : rows) {
            (x_(static_cast<Eigen::Index>(r), feature) < threshold ? left : right).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        const auto l = grow(tree, left, depth + 1);
        const auto rr = grow(tree, right, depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = feature;
        node.threshold = threshold;
        node.left = l;
        node.right = rr;
        return id;
    }

    const Matrix& x_;
    std::size_t limit_;
    std::mt19937_64& rng_;
};

// ---- classification tree construction ------------------------------------

struct SplitChoice {
    double impurity = std::numeric_limits<double>::infinity();
    int feature = -1;
    double threshold = 0.0;

    [[nodiscard]] bool better_than(const SplitChoice& o) const {
        return std::tie(impurity, feature, threshold) < std::tie(o.impurity, o.feature, o.threshold);
    }
};

class ClassificationBuilder {
public:
    ClassificationBuilder(const Matrix& x, std::span<const int> y, std::size_t max_features, std::mt19937_64& rng)
        : x_(x), y_(y), max_features_(max_features), rng_(rng) {}

    ClassificationTree build(std::vector<std::size_t> rows) {
        ClassificationTree tree;
        grow(tree, rows);
        return tree;
    }

private:
    std::int32_t grow(ClassificationTree& tree, std::vector<std::size_t>& rows) {
        const auto id = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back({});
        std::size_t pos = 0;
        for (auto r : rows) pos += y_[r] == 1 ? 1 : 0;
        tree.nodes[static_cast<std::size_t>(id)].positive_fraction =
            static_cast<double>(pos) / static_cast<double>(rows.size());
        if (rows.size() < 2 || pos == 0 || pos == rows.size()) return id;

        const SplitChoice best = best_split(rows, pos);
        if (best.feature < 0) return id;

        std::vector<std::size_t> left, right;
        for (auto r : rows) {
            (x_(static_cast<Eigen::Index>(r), best.feature) <= best.threshold ? left : right).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        const auto l = grow(tree, left);
        const auto rr = grow(tree, right);
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = l;
        node.right = rr;
        return id;
    }

    // Draws features in random order until max_features non-constant ones
    // have been evaluated.
    SplitChoice best_split(const std::vector<std::size_t>& rows, std::size_t pos_total) {
        std::vector<int> features(static_cast<std::size_t>(x_.cols()));
        std::iota(features.begin(), features.end(), 0);
        std::shuffle(features.begin(), features.end(), rng_);

        const double n = static_cast<double>(rows.size());
        SplitChoice best;
        std::size_t evaluated = 0;
        std::vector<std::pair<double, int>> column(rows.size());
        for (int f : features) {
            if (evaluated >= max_features_) break;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                column[i] = {x_(static_cast<Eigen::Index>(rows[i]), f), y_[rows[i]]};
            }
            std::sort(column.begin(), column.end());
            if (column.front().first == column.back().first) continue;
            ++evaluated;

            std::size_t left_n = 0, left_pos = 0;
            for (std::size_t i = 0; i + 1 < column.size(); ++i) {
                ++left_n;
                left_pos += column[i].second == 1 ? 1 : 0;
                if (column[i].first == column[i + 1].first) continue;
                const double ln = static_cast<double>(left_n);
                const double rn = n - ln;
                const double lp = static_cast<double>(left_pos) / ln;
                const double rp = static_cast<double>(pos_total - left_pos) / rn;
                const double impurity = (ln * 2.0 * lp * (1.0 - lp) + rn * 2.0 * rp * (1.0 - rp)) / n;
                double threshold = 0.5 * (column[i].first + column[i + 1].first);
                if (!(threshold < column[i + 1].first)) threshold = column[i].first;
                const SplitChoice candidate{impurity, f, threshold};
                if (candidate.better_than(best)) best = candidate;
            }
        }
        return best;
    }

    const Matrix& x_;
    std::span<const int> y_;
    std::size_t max_features_;
    std::mt19937_64& rng_;
};

}  // namespace

// ---- kNN -------------------------------------------------------------------

KnnModel::KnnModel(Matrix train, std::size_t k) : train_(std::move(train)), k_(k) {
    if (train_.rows() == 0) throw ConfigError("kNN model has no training rows");
    if (k_ < 1 || k_ > static_cast<std::size_t>(train_.rows())) throw ConfigError("k must lie in [1, #train rows]");
}

Vector KnnModel::score(const Matrix& queries, kernels::Execution ex) const {
    return kernels::kth_nearest_distance(train_, queries, k_, ex);
}

// ---- isolation forest --------------------------------------------------------

double average_path_length(std::size_t n) noexcept {
    if (n <= 1) return 0.0;
    if (n == 2) return 1.0;
    const double m = static_cast<double>(n - 1);
    const double harmonic = std::log(m) + kEulerGamma;
    return 2.0 * harmonic - 2.0 * m / static_cast<double>(n);
}

double IsolationTree::path_length(std::span<const double> x) const {
    std::size_t id = 0;
    while (nodes[id].feature >= 0) {
        const auto& node = nodes[id];
        id = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] < node.threshold ? node.left : node.right);
    }
    return static_cast<double>(nodes[id].depth) + average_path_length(nodes[id].size);
}

std::size_t IsolationTree::max_depth() const noexcept {
    std::size_t d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
}

IsolationForestModel IsolationForestModel::fit(const Matrix& train, const IsolationForestOptions& options,
                                               kernels::Execution ex) {
    if (train.rows() == 0) throw ConfigError("isolation forest needs training rows");
    if (options.trees == 0 || options.subsample == 0) throw ConfigError("isolation forest options must be positive");
    IsolationForestModel model;
    model.dim_ = static_cast<std::size_t>(train.cols());
    model.psi_ = std::min<std::size_t>(options.subsample, static_cast<std::size_t>(train.rows()));
    model.height_limit_ =
        model.psi_ <= 1 ? 0 : static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(model.psi_))));
    model.trees_.resize(options.trees);

    const auto n = static_cast<std::size_t>(train.rows());
    kernels::for_each_index(options.trees, ex, [&](std::size_t t) {
        std::mt19937_64 rng(derive_seed(options.seed + t, Stream::baseline));
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        // Partial Fisher-Yates: uniform subsample without replacement.
        for (std::size_t i = 0; i < model.psi_; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(all[i], all[pick(rng)]);
        }
        all.resize(model.psi_);
        model.trees_[t] = IsolationBuilder(train, model.height_limit_, rng).build(std::move(all));
    });
    return model;
}

double IsolationForestModel::expected_path_length(std::span<const double> x) const {
    double acc = 0.0;
    for (const auto& t : trees_) acc += t.path_length(x);
    return acc / static_cast<double>(trees_.size());
}

Vector IsolationForestModel::score(const Matrix& queries, kernels::Execution ex) const {
    if (static_cast<std::size_t>(queries.cols()) != dim_) throw ConfigError("query width does not match forest");
    Vector out(queries.rows());
    const double norm = average_path_length(psi_);
    kernels::for_each_index(static_cast<std::size_t>(queries.rows()), ex, [&](std::size_t i) {
        const double h = expected_path_length(row_span(queries, static_cast<Eigen::Index>(i)));
        out[static_cast<Eigen::Index>(i)] = norm > 0.0 ? std::exp2(-h / norm) : 0.5;
    });
    return out;
}

// ---- random forest -----------------------------------------------------------

double ClassificationTree::predict(std::span<const double> x) const {
    std::size_t id = 0;
    while (nodes[id].feature >= 0) {
        const auto& node = nodes[id];
        id = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right);
    }
    return nodes[id].positive_fraction;
}

RandomForestModel RandomForestModel::fit(const Matrix& x, std::span<const int> labels,
                                         const RandomForestOptions& options, kernels::Execution ex) {
    if (x.rows() == 0) throw ConfigError("random forest needs training rows");
    if (static_cast<std::size_t>(x.rows()) != labels.size()) throw ConfigError("labels do not match rows");
    if (options.trees == 0) throw ConfigError("random forest needs at least one tree");
    RandomForestModel model;
    model.dim_ = static_cast<std::size_t>(x.cols());
    const std::size_t max_features =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(x.cols()))));
    model.trees_.resize(options.trees);
    const auto n = static_cast<std::size_t>(x.rows());
    kernels::for_each_index(options.trees, ex, [&](std::size_t t) {
        std::mt19937_64 rng(derive_seed(options.seed + t, Stream::baseline));
        std::vector<std::size_t> rows(n);
        if (options.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (auto& r : rows) r = pick(rng);
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        model.trees_[t] = ClassificationBuilder(x, labels, max_features, rng).build(std::move(rows));
    });
    return model;
}

Vector RandomForestModel::predict_proba(const Matrix& x) const {
    if (static_cast<std::size_t>(x.cols()) != dim_) throw ConfigError("feature width does not match forest");
    Vector out(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double acc = 0.0;
        for (const auto& t : trees_) acc += t.predict(row_span(x, r));
        out[r] = acc / static_cast<double>(trees_.size());
    }
    return out;
}

std::vector<std::size_t> stratified_fold_assignment(std::span<const int> labels, const CvFolds& folds) {
    if (folds.folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
    std::vector<std::size_t> assignment(labels.size());
    std::mt19937_64 rng(derive_seed(folds.seed, Stream::split));
    std::size_t offset = 0;
    for (int cls : {0, 1}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == cls) members.push_back(i);
        }
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t i = 0; i < members.size(); ++i) assignment[members[i]] = (offset + i) % folds.folds;
        offset = (offset + members.size()) % folds.folds;
    }
    return assignment;
}

Vector rf_fit_predict_cv(const Matrix& x, std::span<const int> labels, const CvFolds& folds,
                         const RandomForestOptions& options) {
    if (static_cast<std::size_t>(x.rows()) != labels.size()) throw ConfigError("labels do not match rows");
    for (int l : labels) {
        if (l != 0 && l != 1) throw ConfigError("labels must be 0 or 1");
    }
    const auto assignment = stratified_fold_assignment(labels, folds);
    Vector out(x.rows());
    for (std::size_t f = 0; f < folds.folds; ++f) {
        std::vector<Eigen::Index> fit_rows, held_rows;
        bool has0 = false, has1 = false;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (assignment[i] == f) {
                held_rows.push_back(static_cast<Eigen::Index>(i));
            } else {
                fit_rows.push_back(static_cast<Eigen::Index>(i));
                (labels[i] == 1 ? has1 : has0) = true;
            }
        }
        if (!has0 || !has1) {
            throw StratificationError("training complement of fold " + std::to_string(f) + " lacks a class");
        }
        if (held_rows.empty()) continue;
        Matrix fx(static_cast<Eigen::Index>(fit_rows.size()), x.cols());
        std::vector<int> fy(fit_rows.size());
        for (std::size_t i = 0; i < fit_rows.size(); ++i) {
            fx.row(static_cast<Eigen::Index>(i)) = x.row(fit_rows[i]);
            fy[i] = labels[static_cast<std::size_t>(fit_rows[i])];
        }
        RandomForestOptions fold_options = options;
        fold_options.seed = options.seed + 1000003ULL * (f + 1);
        const auto forest = RandomForestModel::fit(fx, fy, fold_options);
        Matrix hx(static_cast<Eigen::Index>(held_rows.size()), x.cols());
        for (std::size_t i = 0; i < held_rows.size(); ++i) hx.row(static_cast<Eigen::Index>(i)) = x.row(held_rows[i]);
        const Vector p = forest.predict_proba(hx);
        for (std::size_t i = 0; i < held_rows.size(); ++i) out[held_rows[i]] = p[static_cast<Eigen::Index>(i)];
    }
    return out;
}

}  // namespace doust::baselines
