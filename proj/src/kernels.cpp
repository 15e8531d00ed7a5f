#include "doust/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace doust::kernels {

namespace {

int initial_workers() {
    if (const char* env = std::getenv("DOUST_NUM_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

std::atomic<int>& workers() {
    static std::atomic<int> w{initial_workers()};
    return w;
}

void check_knn_args(const Matrix& reference, const Matrix& queries, std::size_t k) {
    if (reference.rows() == 0) throw ConfigError("nearest-neighbour reference set is empty");
    if (k == 0 || k > static_cast<std::size_t>(reference.rows())) {
        throw ConfigError("k must lie in [1, " + std::to_string(reference.rows()) + "]");
    }
    if (queries.cols() != reference.cols()) throw ConfigError("query width does not match reference width");
}

// Partial selection over squared distances; only the k-th value is needed.
double kth_distance_for_row(const Matrix& reference, const Matrix& queries, Eigen::Index q, std::size_t k,
                            std::vector<double>& scratch) {
    const Eigen::Index n = reference.rows();
    scratch.resize(static_cast<std::size_t>(n));
    const auto query = queries.row(q);
    for (Eigen::Index r = 0; r < n; ++r) scratch[static_cast<std::size_t>(r)] = (reference.row(r) - query).squaredNorm();
    auto kth = scratch.begin() + static_cast<std::ptrdiff_t>(k - 1);
    std::nth_element(scratch.begin(), kth, scratch.end());
    return std::sqrt(*kth);
}

double sorted_row_mean(const Matrix& scores, Eigen::Index row, std::vector<double>& scratch) {
    const Eigen::Index m = scores.cols();
    scratch.assign(scores.row(row).data(), scores.row(row).data() + m);
    std::sort(scratch.begin(), scratch.end());
    double acc = 0.0;
    for (double v : scratch) acc += v;
    return acc / static_cast<double>(m);
}

}  // namespace

int worker_count() noexcept { return workers().load(); }

void set_worker_count(int n) {
    if (n < 1) throw ConfigError("worker count must be positive");
    workers().store(n);
}

namespace serial {

Vector kth_nearest_distance(const Matrix& reference, const Matrix& queries, std::size_t k) {
    check_knn_args(reference, queries, k);
    Vector out(queries.rows());
    std::vector<double> scratch;
    for (Eigen::Index q = 0; q < queries.rows(); ++q) out[q] = kth_distance_for_row(reference, queries, q, k, scratch);
    return out;
}

Vector member_mean(const Matrix& member_scores) {
    if (member_scores.cols() == 0) throw ConfigError("member table has no columns");
    Vector out(member_scores.rows());
    std::vector<double> scratch;
    for (Eigen::Index r = 0; r < member_scores.rows(); ++r) out[r] = sorted_row_mean(member_scores, r, scratch);
    return out;
}

}  // namespace serial

namespace omp {

Vector kth_nearest_distance(const Matrix& reference, const Matrix& queries, std::size_t k) {
    check_knn_args(reference, queries, k);
    Vector out(queries.rows());
    const Eigen::Index n = queries.rows();
#pragma omp parallel num_threads(worker_count())
    {
        std::vector<double> scratch;
#pragma omp for schedule(static)
        for (Eigen::Index q = 0; q < n; ++q) out[q] = kth_distance_for_row(reference, queries, q, k, scratch);
    }
    return out;
}

Vector member_mean(const Matrix& member_scores) {
    if (member_scores.cols() == 0) throw ConfigError("member table has no columns");
    Vector out(member_scores.rows());
    const Eigen::Index n = member_scores.rows();
#pragma omp parallel num_threads(worker_count())
    {
        std::vector<double> scratch;
#pragma omp for schedule(static)
        for (Eigen::Index r = 0; r < n; ++r) out[r] = sorted_row_mean(member_scores, r, scratch);
    }
    return out;
}

}  // namespace omp

}  // namespace doust::kernels
