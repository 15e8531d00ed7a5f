#include <doctest.h>

#include <cmath>
#include <random>

#include "doust/metrics.hpp"
#include "oracles.hpp"

using namespace doust;
using metrics::roc_auc;

namespace {

// Scores rounded to a coarse grid so ties are common.
std::vector<double> draw(std::mt19937_64& rng, std::size_t n, double shift, bool coarse) {
    std::normal_distribution<double> z(shift, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = coarse ? std::round(4.0 * z(rng)) / 4.0 : z(rng);
    return v;
}

std::size_t size_in(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace

TEST_CASE("roc_auc basics") {
    const std::vector<double> a{0.3, 0.1, 0.1, 0.9};
    CHECK(roc_auc(a, a) == 0.5);
    CHECK(roc_auc(std::vector<double>{0, 1}, std::vector<double>{2, 3}) == 1.0);
    CHECK(roc_auc(std::vector<double>{2, 3}, std::vector<double>{0, 1}) == 0.0);
    CHECK(roc_auc(std::vector<double>{1}, std::vector<double>{1}) == 0.5);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{}, a), ConfigError);
    CHECK_THROWS_AS(roc_auc(a, std::vector<double>{NAN}), ConfigError);
}

TEST_CASE("roc_auc matches pair counting") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        const bool coarse = trial % 2 == 0;
        const auto a = draw(rng, size_in(rng, 1, 300), 0.0, coarse);
        const auto b = draw(rng, size_in(rng, 1, 300), 0.5, coarse);
        const double got = roc_auc(a, b);
        CHECK(got == oracle::pair_count_auc(a, b));
        CHECK(got + roc_auc(b, a) == doctest::Approx(1.0).epsilon(1e-15));

        // Any strictly increasing map leaves the ranks alone.
        auto ea = a, eb = b;
        for (double& x : ea) x = std::exp(x) + 3.0;
        for (double& x : eb) x = std::exp(x) + 3.0;
        CHECK(roc_auc(ea, eb) == got);
    }
}

TEST_CASE("roc_auc is one exactly when separated") {
    std::mt19937_64 rng(5);
    auto a = draw(rng, 50, 0.0, false);
    auto b = draw(rng, 50, 0.0, false);
    const double top = *std::max_element(a.begin(), a.end());
    for (double& x : b) x = top + 1e-9 + std::abs(x);
    CHECK(roc_auc(a, b) == 1.0);
    b.push_back(top);
    CHECK(roc_auc(a, b) < 1.0);
}

TEST_CASE("mixture decomposition identity") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const bool coarse = trial % 3 == 0;
        const auto a = draw(rng, size_in(rng, 1, 200), 0.0, coarse);
        const auto b = draw(rng, size_in(rng, 1, 200), 0.7, coarse);
        const auto c = draw(rng, size_in(rng, 1, 200), -0.3, coarse);
        CHECK(metrics::roc_mixture_decomposition_check(a, b, c) < 1e-12);
        // Duplicating a set leaves the AUC unchanged.
        auto bb = b;
        bb.insert(bb.end(), b.begin(), b.end());
        CHECK(std::abs(roc_auc(a, bb) - roc_auc(a, b)) < 1e-12);
    }

    // Singleton B: (3 * 2/3 + 1 * 1) / 4 by hand.
    const std::vector<double> a{0.0, 1.0, 2.0};
    const std::vector<double> b{1.5};
    const std::vector<double> c{3.0, 0.5, 2.5};
    CHECK(roc_auc(a, b) == doctest::Approx(2.0 / 3.0));
    std::vector<double> bc{1.5, 3.0, 0.5, 2.5};
    CHECK(roc_auc(a, bc) == doctest::Approx((1.0 * 2.0 / 3.0 + 3.0 * roc_auc(a, c)) / 4.0));
    CHECK(metrics::roc_mixture_decomposition_check(a, b, c) < 1e-12);
}

TEST_CASE("worst case additions") {
    std::vector<double> a(9);
    std::iota(a.begin(), a.end(), 0.0);
    const std::vector<double> b{3.5, 7.5, 20.0};
    const double base = roc_auc(a, b);
    auto a10 = a;
    a10.push_back(21.0);
    CHECK(roc_auc(a10, b) == doctest::Approx(0.9 * base).epsilon(1e-15));

    const std::vector<double> single{4.5};
    const double one = roc_auc(a, single);
    CHECK(roc_auc(a, std::vector<double>{4.5, -1.0}) == doctest::Approx(one / 2.0).epsilon(1e-15));

    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto x = draw(rng, size_in(rng, 1, 100), 0.0, trial % 2 == 0);
        const auto y = draw(rng, size_in(rng, 1, 100), 1.0, trial % 2 == 0);
        const auto r = metrics::worst_case_addition_check(x, y);
        CHECK(r.appended_to_a < 1e-12);
        CHECK(r.appended_to_b < 1e-12);
    }
}

TEST_CASE("train-test to normal-abnormal conversion") {
    for (double nu : {0.01, 0.2, 0.5, 1.0}) {
        CHECK(metrics::traintest_to_normalabnormal(0.5, nu).value == doctest::Approx(0.5));
        for (double r : {0.0, 0.3, 0.77, 1.0}) {
            const double tt = metrics::normalabnormal_to_traintest(r, nu);
            CHECK(tt == doctest::Approx((1.0 - nu) / 2.0 + nu * r));
            CHECK(metrics::traintest_to_normalabnormal(tt, nu).value == doctest::Approx(r).epsilon(1e-12));
        }
    }
    CHECK(metrics::traintest_to_normalabnormal(0.83, 1.0).value == doctest::Approx(0.83));

    const auto clamped = metrics::traintest_to_normalabnormal(0.9, 0.1);
    CHECK(clamped.clamped);
    CHECK(clamped.value == 1.0);
    CHECK(clamped.raw == doctest::Approx(4.5));
    CHECK_THROWS_AS(metrics::traintest_to_normalabnormal(0.5, 0.0), DomainError);
    CHECK_THROWS_AS(metrics::normalabnormal_to_traintest(0.5, 1.5), DomainError);
}

TEST_CASE("finite-sample train-test decomposition") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const auto train = draw(rng, 150, 0.0, trial % 2 == 0);
        const auto normals = draw(rng, size_in(rng, 10, 200), 0.0, trial % 2 == 0);
        const auto abnormal = draw(rng, size_in(rng, 1, 50), 2.0, trial % 2 == 0);
        std::vector<double> test = normals;
        test.insert(test.end(), abnormal.begin(), abnormal.end());
        const double nu = static_cast<double>(abnormal.size()) / static_cast<double>(test.size());
        const double expanded =
            metrics::normalabnormal_to_traintest(oracle::pair_count_auc(train, abnormal), nu,
                                                 oracle::pair_count_auc(train, normals));
        CHECK(std::abs(roc_auc(train, test) - expanded) < 1e-12);
    }
}

TEST_CASE("scored set") {
    metrics::ScoredSet s{{0.1, 0.9, 0.4, 0.8}, {0, 1, 0, 1}};
    CHECK(roc_auc(s) == 1.0);
    s.labels[1] = 0;
    CHECK(roc_auc(s) == doctest::Approx(oracle::pair_count_auc(std::vector<double>{0.1, 0.9, 0.4},
                                                                std::vector<double>{0.8})));
    s.labels = {0, 0, 0, 0};
    CHECK_THROWS_AS(roc_auc(s), ConfigError);
    s.labels = {0, 2, 0, 1};
    CHECK_THROWS_AS(roc_auc(s), ConfigError);
    s.labels = {0, 1};
    CHECK_THROWS_AS(roc_auc(s), ConfigError);
}
