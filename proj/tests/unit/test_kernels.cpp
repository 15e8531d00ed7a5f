#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

#include "doust/kernels.hpp"
#include "oracles.hpp"

using namespace doust;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
    return m;
}

std::vector<std::vector<double>> rows_of(const Matrix& m) {
    std::vector<std::vector<double>> out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.emplace_back(m.row(r).data(), m.row(r).data() + m.cols());
    return out;
}

}  // namespace

TEST_CASE("k-th nearest distance matches brute force") {
    const Matrix ref = random_matrix(60, 4, 1);
    const Matrix q = random_matrix(25, 4, 2);
    const auto ref_rows = rows_of(ref);
    for (std::size_t k : {1u, 3u, 60u}) {
        const Vector d = kernels::serial::kth_nearest_distance(ref, q, k);
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
            const std::vector<double> qi(q.row(i).data(), q.row(i).data() + q.cols());
            CHECK(d[i] == doctest::Approx(oracle::brute_kth_distance(ref_rows, qi, k)).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(kernels::serial::kth_nearest_distance(ref, q, 0), ConfigError);
    CHECK_THROWS_AS(kernels::serial::kth_nearest_distance(ref, q, 61), ConfigError);
}

TEST_CASE("serial and OpenMP kernels are bit-identical") {
    const int saved = kernels::worker_count();
    kernels::set_worker_count(4);
    const Matrix ref = random_matrix(300, 7, 3);
    const Matrix q = random_matrix(211, 7, 4);
    CHECK(kernels::serial::kth_nearest_distance(ref, q, 2) == kernels::omp::kth_nearest_distance(ref, q, 2));

    const Matrix members = random_matrix(513, 37, 5);
    CHECK(kernels::serial::member_mean(members) == kernels::omp::member_mean(members));
    kernels::set_worker_count(saved);
}

TEST_CASE("member mean is order independent") {
    Matrix m = random_matrix(40, 9, 6);
    const Vector a = kernels::serial::member_mean(m);
    std::mt19937_64 rng(7);
    std::vector<Eigen::Index> perm(9);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix p(m.rows(), m.cols());
    for (Eigen::Index c = 0; c < 9; ++c) p.col(c) = m.col(perm[static_cast<std::size_t>(c)]);
    CHECK(kernels::serial::member_mean(p) == a);
    for (Eigen::Index r = 0; r < m.rows(); ++r) CHECK(a[r] == doctest::Approx(m.row(r).mean()).epsilon(1e-14));
}

TEST_CASE("for_each_index visits every index and rethrows") {
    for (auto ex : {kernels::Execution::serial, kernels::Execution::parallel}) {
        std::vector<int> hits(100, 0);
        kernels::for_each_index(hits.size(), ex, [&](std::size_t i) { hits[i] += 1; });
        CHECK(std::count(hits.begin(), hits.end(), 1) == 100);
        CHECK_THROWS_AS(kernels::for_each_index(10, ex,
                                                [](std::size_t i) {
                                                    if (i == 7) throw std::runtime_error("boom");
                                                }),
                        std::runtime_error);
    }
}

TEST_CASE("worker count override") {
    const int saved = kernels::worker_count();
    kernels::set_worker_count(3);
    CHECK(kernels::worker_count() == 3);
    CHECK_THROWS_AS(kernels::set_worker_count(0), ConfigError);
    kernels::set_worker_count(saved);
}
