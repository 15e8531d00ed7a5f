#pragma once

// Data-parallel kernels. Each kernel has a serial reference and an OpenMP
// version; both must produce bit-identical results, which the unit tests and
// the benchmark target check.

#include <cstddef>
#include <exception>
#include <mutex>

#include "doust/types.hpp"

namespace doust::kernels {

enum class Execution { serial, parallel };

/// Number of OpenMP workers used by the parallel kernels. Initialized from the
/// DOUST_NUM_WORKERS environment variable when set.
int worker_count() noexcept;
void set_worker_count(int workers);

namespace serial {

/// Euclidean distance from each query row to its k-th nearest reference row.
Vector kth_nearest_distance(const Matrix& reference, const Matrix& queries, std::size_t k);

/// Row-wise mean of a (rows x members) score table. Each row is summed in
/// ascending value order so the result does not depend on member order.
Vector member_mean(const Matrix& member_scores);

}  // namespace serial

namespace omp {

Vector kth_nearest_distance(const Matrix& reference, const Matrix& queries, std::size_t k);
Vector member_mean(const Matrix& member_scores);

}  // namespace omp

inline Vector kth_nearest_distance(const Matrix& reference, const Matrix& queries, std::size_t k,
                                   Execution ex = Execution::parallel) {
    return ex == Execution::serial ? serial::kth_nearest_distance(reference, queries, k)
                                   : omp::kth_nearest_distance(reference, queries, k);
}

inline Vector member_mean(const Matrix& member_scores, Execution ex = Execution::parallel) {
    return ex == Execution::serial ? serial::member_mean(member_scores) : omp::member_mean(member_scores);
}

/// Runs body(i) for i in [0, n). Iterations must write only to their own
/// slot; the first exception thrown by any iteration is rethrown afterwards.
template <typename Body>
void for_each_index(std::size_t n, Execution ex, Body&& body) {
    if (ex == Execution::serial) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_count())
    for (long long i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace doust::kernels
