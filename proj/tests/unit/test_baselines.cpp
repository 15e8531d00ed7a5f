#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "doust/baselines.hpp"
#include "doust/metrics.hpp"
#include "oracles.hpp"

using namespace doust;
using namespace doust::baselines;

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double shift, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = shift + z(rng);
    return m;
}

std::vector<std::vector<double>> rows_of(const Matrix& m) {
    std::vector<std::vector<double>> out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.emplace_back(m.row(r).data(), m.row(r).data() + m.cols());
    return out;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

double split_auc(const Vector& scores, std::span<const int> labels) {
    metrics::ScoredSet s{to_std(scores), {labels.begin(), labels.end()}};
    return metrics::roc_auc(s);
}

}  // namespace

TEST_CASE("knn distances") {
    Matrix train(2, 1);
    train << 0.0, 10.0;
    const KnnModel m(train, 1);
    Matrix q(3, 1);
    q << 4.0, 0.0, 12.0;
    const Vector s = m.score(q);
    CHECK(s[0] == 4.0);
    CHECK(s[1] == 0.0);
    CHECK(s[2] == 2.0);
    CHECK(KnnModel(train, 2).score(q)[0] == 6.0);

    CHECK_THROWS_AS(KnnModel(Matrix(0, 2), 1), ConfigError);
    CHECK_THROWS_AS(KnnModel(train, 3), ConfigError);
    CHECK_THROWS_AS(KnnModel(train, 0), ConfigError);
}

TEST_CASE("knn matches exhaustive distances") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix train = gaussian(seed == 0 ? 20 : 400, 4, 0.0, seed);
        const Matrix query = gaussian(60, 4, 0.5, seed + 100);
        const auto ref = rows_of(train);
        for (std::size_t k : {1, 3, 7}) {
            const Vector s = KnnModel(train, k).score(query);
            for (Eigen::Index r = 0; r < query.rows(); ++r) {
                const std::vector<double> q(query.row(r).data(), query.row(r).data() + 4);
                CHECK(s[r] == doctest::Approx(oracle::brute_kth_distance(ref, q, k)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("average path length") {
    CHECK(average_path_length(1) == 0.0);
    CHECK(average_path_length(2) == 1.0);
    // The harmonic number is replaced by ln(i) + Euler's gamma, as in the
    // reference algorithm; at n = 256 that is within 0.1% of the exact sum.
    const double gamma = 0.57721566490153286;
    for (std::size_t n : {3, 10, 256, 5000}) {
        const double m = static_cast<double>(n);
        CHECK(average_path_length(n) == doctest::Approx(2.0 * (std::log(m - 1.0) + gamma) - 2.0 * (m - 1.0) / m));
    }
    double h = 0.0;
    for (std::size_t i = 1; i < 256; ++i) h += 1.0 / static_cast<double>(i);
    CHECK(average_path_length(256) == doctest::Approx(2.0 * h - 2.0 * 255.0 / 256.0).epsilon(1e-3));
}

TEST_CASE("isolation forest on two points") {
    // With psi = 2 the height limit is 1: the root splits the two points and
    // each leaf holds one, so every query has path length exactly 1 and the
    // score is 2^(-1/c(2)) = 1/2.
    Matrix train(2, 1);
    train << 0.0, 1.0;
    const auto f = IsolationForestModel::fit(train, {.trees = 1, .subsample = 256, .seed = 3});
    CHECK(f.subsample_size() == 2);
    CHECK(f.height_limit() == 1);
    REQUIRE(f.trees().size() == 1);
    const auto& nodes = f.trees()[0].nodes;
    REQUIRE(nodes.size() == 3);
    CHECK(nodes[0].threshold > 0.0);
    CHECK(nodes[0].threshold < 1.0);
    Matrix q(3, 1);
    q << 0.0, 1.0, -5.0;
    for (Eigen::Index r = 0; r < 3; ++r) {
        CHECK(f.expected_path_length(std::span(q.row(r).data(), 1)) == 1.0);
        CHECK(f.score(q)[r] == 0.5);
    }

    // Duplicates cannot be split: one leaf of size 2, path length c(2) = 1.
    const auto dup = IsolationForestModel::fit(Matrix::Zero(2, 1), {.trees = 1, .subsample = 256, .seed = 3});
    CHECK(dup.trees()[0].nodes.size() == 1);
    CHECK(dup.score(q)[0] == 0.5);
}

TEST_CASE("isolation forest structure and ordering") {
    const Matrix train = gaussian(1000, 3, 0.0, 7);
    const auto f = IsolationForestModel::fit(train, {.trees = 100, .subsample = 256, .seed = 1});
    CHECK(f.trees().size() == 100);
    CHECK(f.height_limit() == 8);
    for (const auto& t : f.trees()) {
        CHECK(t.max_depth() <= 8);
        std::size_t leaf_total = 0;
        for (const auto& n : t.nodes) {
            if (n.feature < 0) {
                CHECK(n.size >= 1);
                leaf_total += n.size;
            }
        }
        CHECK(leaf_total == 256);
    }

    Matrix q(2, 3);
    q.row(0).setZero();
    q.row(1).setConstant(8.0);
    const Vector s = f.score(q);
    CHECK(s[1] > s[0]);
    CHECK(s[1] > 0.6);
    CHECK(s[0] < 0.5);

    const auto g = IsolationForestModel::fit(train, {.trees = 100, .subsample = 256, .seed = 1});
    CHECK(g.score(q) == s);
    CHECK(f.score(q, kernels::Execution::serial) == s);
    CHECK_THROWS_AS((void)f.score(Matrix::Zero(1, 2)), ConfigError);
    CHECK_THROWS_AS(IsolationForestModel::fit(Matrix(0, 3)), ConfigError);
}

TEST_CASE("random forest") {
    const Matrix x = [] {
        Matrix m(200, 2);
        m << gaussian(100, 2, 0.0, 1), gaussian(100, 2, 5.0, 2);
        return m;
    }();
    std::vector<int> y(200, 0);
    std::fill(y.begin() + 100, y.end(), 1);

    const auto rf = RandomForestModel::fit(x, y, {.trees = 50, .bootstrap = true, .seed = 4});
    const Vector p = rf.predict_proba(x);
    CHECK((p.array() >= 0.0).all());
    CHECK((p.array() <= 1.0).all());
    CHECK(split_auc(p, y) == 1.0);
    CHECK(RandomForestModel::fit(x, y, {.trees = 50, .bootstrap = true, .seed = 4}).predict_proba(x) == p);
    CHECK(RandomForestModel::fit(x, y, {.trees = 50, .bootstrap = true, .seed = 4}, kernels::Execution::serial)
              .predict_proba(x) == p);

    // A fully grown tree without bootstrap fits distinct training points exactly.
    const auto single = RandomForestModel::fit(x, y, {.trees = 1, .bootstrap = false, .seed = 0});
    const Vector ps = single.predict_proba(x);
    for (Eigen::Index i = 0; i < 200; ++i) CHECK(ps[i] == static_cast<double>(y[static_cast<std::size_t>(i)]));

    CHECK_THROWS_AS(RandomForestModel::fit(x, std::vector<int>(3, 0)), ConfigError);
    CHECK_THROWS_AS((void)rf.predict_proba(Matrix::Zero(1, 3)), ConfigError);
}

TEST_CASE("stratified folds") {
    std::vector<int> y(103, 0);
    for (std::size_t i = 0; i < 23; ++i) y[i * 4] = 1;
    const auto folds = stratified_fold_assignment(y, {.folds = 5, .seed = 9});
    REQUIRE(folds.size() == y.size());
    std::vector<std::size_t> total(5, 0), pos(5, 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        REQUIRE(folds[i] < 5);
        ++total[folds[i]];
        pos[folds[i]] += static_cast<std::size_t>(y[i]);
    }
    for (std::size_t f = 0; f < 5; ++f) {
        CHECK(std::abs(static_cast<double>(pos[f]) - 23.0 / 5.0) < 1.0);
        CHECK(std::abs(static_cast<double>(total[f]) - 103.0 / 5.0) < 1.0);
    }
    CHECK(stratified_fold_assignment(y, {.folds = 5, .seed = 9}) == folds);
    CHECK_THROWS_AS(stratified_fold_assignment(y, {.folds = 1, .seed = 9}), ConfigError);
}

TEST_CASE("out-of-fold random forest") {
    SUBCASE("separable data") {
        Matrix x(100, 2);
        x << gaussian(80, 2, 0.0, 3), gaussian(20, 2, 10.0, 4);
        std::vector<int> y(100, 0);
        std::fill(y.begin() + 80, y.end(), 1);
        const Vector p = rf_fit_predict_cv(x, y, {.folds = 5, .seed = 1}, {.trees = 30, .bootstrap = true, .seed = 2});
        CHECK(split_auc(p, y) == 1.0);
    }
    SUBCASE("shuffled labels are near chance") {
        const Matrix x = gaussian(100, 3, 0.0, 5);
        std::vector<int> y(100, 0);
        std::fill(y.begin(), y.begin() + 30, 1);
        std::mt19937_64 rng(6);
        double sum = 0.0;
        for (int rep = 0; rep < 20; ++rep) {
            std::shuffle(y.begin(), y.end(), rng);
            const Vector p = rf_fit_predict_cv(x, y, {.folds = 5, .seed = static_cast<std::uint64_t>(rep)},
                                               {.trees = 30, .bootstrap = true, .seed = 7});
            sum += split_auc(p, y);
        }
        CHECK(std::abs(sum / 20.0 - 0.5) < 0.1);
    }
    SUBCASE("a sample's own label never leaks into its score") {
        // Every sample sits on an identical feature vector, so any forest
        // that saw it would still predict the class mix of its training data.
        Matrix x = Matrix::Zero(50, 1);
        std::vector<int> y(50, 0);
        std::fill(y.begin(), y.begin() + 10, 1);
        const Vector p = rf_fit_predict_cv(x, y, {.folds = 5, .seed = 0}, {.trees = 5, .bootstrap = false, .seed = 0});
        const auto folds = stratified_fold_assignment(y, {.folds = 5, .seed = 0});
        for (std::size_t i = 0; i < 50; ++i) {
            double pos = 0.0, n = 0.0;
            for (std::size_t j = 0; j < 50; ++j) {
                if (folds[j] == folds[i]) continue;
                pos += y[j];
                n += 1.0;
            }
            CHECK(p[static_cast<Eigen::Index>(i)] == doctest::Approx(pos / n));
        }
    }
    SUBCASE("a missing class is reported") {
        const Matrix x = gaussian(20, 2, 0.0, 8);
        std::vector<int> y(20, 0);
        y[3] = 1;  // one positive: the complement of its fold has none
        CHECK_THROWS_AS(rf_fit_predict_cv(x, y, {.folds = 5, .seed = 0}), StratificationError);
        CHECK_THROWS_AS(rf_fit_predict_cv(x, std::vector<int>(20, 0), {.folds = 5, .seed = 0}), StratificationError);
    }
}
