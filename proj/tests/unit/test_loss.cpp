#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doust/loss.hpp"

using namespace doust;

namespace {

const LossVariant kAll[] = {LossVariant::balanced_mse, LossVariant::raw_mse,  LossVariant::mse_plus_mae,
                            LossVariant::unmoving_normal, LossVariant::meanmax, LossVariant::max_independent};

// Minimizes a convex scalar function on [lo, hi] by ternary search.
template <typename F>
double argmin_convex(F f, double lo, double hi) {
    for (int i = 0; i < 60; ++i) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (f(m1) < f(m2)) hi = m2;
        else lo = m1;
    }
    // Value comparisons stall near sqrt(eps); finish with one parabolic
    // interpolation step, exact for the quadratic objectives used here.
    const double x = 0.5 * (lo + hi), h = 1e-2;
    const double fa = f(x - h), fb = f(x), fc = f(x + h);
    return x - 0.5 * h * (fc - fa) / (fa - 2.0 * fb + fc);
}

}  // namespace

TEST_CASE("loss values on hand examples") {
    const LossSpec bal{LossVariant::balanced_mse, 1.0};
    CHECK(loss_value(bal, std::vector{0.0, 0.0}, std::vector{1.0, 1.0}) == 0.0);
    CHECK(loss_value(bal, std::vector{0.5, 0.5}, std::vector{0.5, 0.5}) == doctest::Approx(0.5));

    const LossSpec mx{LossVariant::max_independent, 1.0};
    CHECK(loss_value(mx, std::vector{0.4, 0.5}, std::vector{0.9, 0.5}) == doctest::Approx(-0.4));

    const std::vector<double> tr{0.2, 0.6}, te{0.7, 0.9};
    CHECK(loss_value({LossVariant::raw_mse, 2.0}, tr, te) == doctest::Approx(0.04 + 0.36 + 2.0 * (0.09 + 0.01)));
    CHECK(loss_value({LossVariant::mse_plus_mae, 1.0}, tr, te) ==
          doctest::Approx((0.24 + 0.96) / 2.0 + (0.39 + 0.11) / 2.0));
    CHECK(loss_value({LossVariant::unmoving_normal, 1.0}, tr, te) == doctest::Approx((0.3 + 0.1) / 2.0 + 0.2));
    CHECK(loss_value({LossVariant::meanmax, 1.0}, tr, te) == doctest::Approx(0.6 + 0.2));
}

TEST_CASE("empty groups are omitted") {
    const std::vector<double> none;
    const std::vector<double> s{0.3, 0.8};
    for (auto v : kAll) {
        const LossSpec spec{v, 1.0};
        const double both = loss_value(spec, s, s);
        CHECK(std::isfinite(loss_value(spec, s, none)));
        CHECK(loss_value(spec, none, none) == 0.0);
        CHECK(loss_value(spec, s, none) + loss_value(spec, none, s) == doctest::Approx(both));
    }
}

TEST_CASE("non-finite scores name the group") {
    const LossSpec spec;
    const std::vector<double> ok{0.5};
    const std::vector<double> bad{std::numeric_limits<double>::quiet_NaN()};
    try {
        (void)loss_value(spec, ok, bad);
        FAIL("expected InvalidScoreError");
    } catch (const InvalidScoreError& e) {
        CHECK(e.group() == "test");
    }
    try {
        (void)loss_value(spec, bad, ok);
        FAIL("expected InvalidScoreError");
    } catch (const InvalidScoreError& e) {
        CHECK(e.group() == "train");
    }
    CHECK_THROWS_AS(LossSpec({LossVariant::balanced_mse, 0.0}).validate(), ConfigError);
    CHECK_THROWS_AS(loss_variant_from_string("nope"), ConfigError);
    for (auto v : kAll) CHECK(loss_variant_from_string(to_string(v)) == v);
}

TEST_CASE("loss gradients match central differences") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (auto v : kAll) {
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<double> tr(7), te(5);
            for (auto& x : tr) x = u(rng);
            for (auto& x : te) x = u(rng);
            const LossSpec spec{v, 0.7};
            const auto g = loss_gradient(spec, tr, te);
            CHECK(g.value == doctest::Approx(loss_value(spec, tr, te)).epsilon(1e-14));
            const double h = 1e-6;
            for (std::size_t i = 0; i < tr.size(); ++i) {
                auto up = tr, dn = tr;
                up[i] += h;
                dn[i] -= h;
                const double fd = (loss_value(spec, up, te) - loss_value(spec, dn, te)) / (2 * h);
                CHECK(g.train[i] == doctest::Approx(fd).epsilon(1e-6));
            }
            for (std::size_t i = 0; i < te.size(); ++i) {
                auto up = te, dn = te;
                up[i] += h;
                dn[i] -= h;
                const double fd = (loss_value(spec, tr, up) - loss_value(spec, tr, dn)) / (2 * h);
                CHECK(g.test[i] == doctest::Approx(fd).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("centering loss gradient") {
    const std::vector<double> s{0.1, 0.5, 0.9};
    const auto g = centering_loss_gradient(s);
    CHECK(g.value == doctest::Approx((0.16 + 0.0 + 0.16) / 3.0));
    CHECK(g.train[0] == doctest::Approx(2.0 * -0.4 / 3.0));
    CHECK(g.train[1] == 0.0);
}

TEST_CASE("balanced batches average to the full-set loss") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> tr(20), te(20);
    for (auto& x : tr) x = u(rng);
    for (auto& x : te) x = u(rng);
    const LossSpec spec;
    double acc = 0.0;
    for (int b = 0; b < 4; ++b) {
        acc += loss_value(spec, std::span(tr).subspan(b * 5, 5), std::span(te).subspan(b * 5, 5));
    }
    CHECK(acc / 4.0 == doctest::Approx(loss_value(spec, tr, te)).epsilon(1e-14));
}

TEST_CASE("group-size normalization") {
    const std::vector<double> tr{0.2, 0.4}, te{0.6};
    const auto g = loss_gradient_with_group_sizes({}, tr, te, 4.0, 2.0);
    CHECK(g.value == doctest::Approx((0.04 + 0.16) / 4.0 + 0.16 / 2.0));
    CHECK(g.train[1] == doctest::Approx(2.0 * 0.4 / 4.0));
}

TEST_CASE("population optimum") {
    CHECK(population_optimum(0.01).separation == doctest::Approx(0.503).epsilon(1e-3));
    CHECK(population_optimum(0.05).separation == doctest::Approx(0.513).epsilon(1e-3));
    const auto p = population_optimum(0.5);
    CHECK(p.normal_score == doctest::Approx(1.0 / 3.0));
    CHECK(p.abnormal_score == 1.0);

    SUBCASE("grid minimization of the library loss recovers it") {
        for (double nu : {0.01, 0.1, 0.5}) {
            for (double w : {0.25, 0.5, 1.0}) {
                const int n_test = static_cast<int>(std::lround(1.0 / std::min(nu, 1.0 - nu)));
                const int n_ab = static_cast<int>(std::lround(nu * n_test));
                const LossSpec spec{LossVariant::balanced_mse, w};
                double best = 1e300, ba = 0.0, bb = 0.0;
                std::vector<double> tr(1), te(static_cast<std::size_t>(n_test));
                for (int i = 0; i <= 1000; i += 1) {
                    const double a = i * 1e-3;
                    tr[0] = a;
                    for (int j = 0; j <= 1000; j += 1) {
                        const double b = j * 1e-3;
                        for (int k = 0; k < n_test; ++k) te[static_cast<std::size_t>(k)] = k < n_ab ? b : a;
                        const double l = loss_value(spec, tr, te);
                        if (l < best) {
                            best = l;
                            ba = a;
                            bb = b;
                        }
                    }
                }
                const auto opt = population_optimum(nu, w);
                CHECK(std::abs(ba - opt.normal_score) <= 1e-3);
                CHECK(std::abs(bb - opt.abnormal_score) <= 1e-3);
            }
        }
    }

    SUBCASE("separation shrinks as omega grows") {
        for (double nu : {0.01, 0.2, 0.7}) {
            double prev = 2.0;
            for (double w = 0.05; w < 20.0; w *= 1.3) {
                const double d = population_optimum(nu, w).separation;
                CHECK(d < prev);
                prev = d;
            }
        }
    }

    SUBCASE("contaminated optimum against numeric minimization") {
        for (double nu : {0.05, 0.3}) {
            for (double gamma : {0.0, 0.01, 0.04}) {
                for (double w : {0.3, 1.0, 3.0}) {
                    auto la = [&](double a) { return (1 - gamma) * a * a + w * (1 - nu) * (1 - a) * (1 - a); };
                    auto lb = [&](double b) { return gamma * b * b + w * nu * (1 - b) * (1 - b); };
                    const double a = argmin_convex(la, 0.0, 1.0);
                    const double b = argmin_convex(lb, 0.0, 1.0);
                    const auto opt = population_optimum(nu, w, gamma);
                    CHECK(opt.normal_score == doctest::Approx(a).epsilon(1e-9));
                    CHECK(opt.abnormal_score == doctest::Approx(b).epsilon(1e-9));
                    CHECK(opt.separation == doctest::Approx(b - a).epsilon(1e-9));
                }
            }
        }
    }

    CHECK(optimal_weight(0.1, 0.01) == doctest::Approx(std::sqrt(11.0) / 10.0).epsilon(1e-12));
    CHECK_THROWS_AS(population_optimum(0.0), DomainError);
    CHECK_THROWS_AS(population_optimum(1.0), DomainError);
    CHECK_THROWS_AS(population_optimum(0.1, 1.0, 0.2), DomainError);
    CHECK_THROWS_AS(optimal_weight(0.1, 0.0), DomainError);
}
