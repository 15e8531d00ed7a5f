#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "doust/kernels.hpp"
#include "doust/types.hpp"

namespace doust::baselines {

// ---------------------------------------------------------------------------
// k-nearest-neighbour distance scoring

class KnnModel {
public:
    explicit KnnModel(Matrix train, std::size_t k = 1);

    /// Euclidean distance to the k-th nearest training row.
    [[nodiscard]] Vector score(const Matrix& queries, kernels::Execution ex = kernels::Execution::parallel) const;
    [[nodiscard]] std::size_t k() const noexcept { return k_; }

private:
    Matrix train_;
    std::size_t k_;
};

// ---------------------------------------------------------------------------
// Isolation forest

/// Average unsuccessful-search path length of a binary search tree on n
/// points: 2 H(n-1) - 2 (n-1)/n with H(i) ~ ln(i) + gamma, and c(1) = 0,
/// c(2) = 1.
double average_path_length(std::size_t n) noexcept;

struct IsolationNode {
    // Internal nodes send x[feature] < threshold left. Leaves have feature < 0.
    int feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::size_t size = 0;
    std::size_t depth = 0;
};

struct IsolationTree {
    std::vector<IsolationNode> nodes;
    [[nodiscard]] double path_length(std::span<const double> x) const;
    [[nodiscard]] std::size_t max_depth() const noexcept;
};

struct IsolationForestOptions {
    std::size_t trees = 100;
    std::size_t subsample = 256;
    std::uint64_t seed = 0;
};

class IsolationForestModel {
public:
    static IsolationForestModel fit(const Matrix& train, const IsolationForestOptions& options = {},
                                    kernels::Execution ex = kernels::Execution::parallel);

    /// 2^(-E[h(x)] / c(psi)); higher is more anomalous.
    [[nodiscard]] Vector score(const Matrix& queries, kernels::Execution ex = kernels::Execution::parallel) const;
    [[nodiscard]] double expected_path_length(std::span<const double> x) const;

    [[nodiscard]] const std::vector<IsolationTree>& trees() const noexcept { return trees_; }
    [[nodiscard]] std::size_t subsample_size() const noexcept { return psi_; }
    [[nodiscard]] std::size_t height_limit() const noexcept { return height_limit_; }

private:
    std::vector<IsolationTree> trees_;
    std::size_t psi_ = 0;
    std::size_t height_limit_ = 0;
    std::size_t dim_ = 0;
};

// ---------------------------------------------------------------------------
// Random forest classifier (supervised reference)

struct ClassificationNode {
    int feature = -1;  ///< < 0 for leaves
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double positive_fraction = 0.0;
};

struct ClassificationTree {
    std::vector<ClassificationNode> nodes;
    [[nodiscard]] double predict(std::span<const double> x) const;
};

struct RandomForestOptions {
    std::size_t trees = 100;
    bool bootstrap = true;
    std::uint64_t seed = 0;
};

class RandomForestModel {
public:
    /// Gini splits, sqrt(d) candidate features per split, fully grown trees.
    static RandomForestModel fit(const Matrix& x, std::span<const int> labels, const RandomForestOptions& options = {},
                                 kernels::Execution ex = kernels::Execution::parallel);

    /// P(label = 1) averaged over trees.
    [[nodiscard]] Vector predict_proba(const Matrix& x) const;
    [[nodiscard]] const std::vector<ClassificationTree>& trees() const noexcept { return trees_; }

private:
    std::vector<ClassificationTree> trees_;
    std::size_t dim_ = 0;
};

class StratificationError : public Error {
public:
    using Error::Error;
};

struct CvFolds {
    std::size_t folds = 5;
    std::uint64_t seed = 0;
};

/// Fold index per sample; classes are dealt round-robin after shuffling so
/// every fold holds its share of each class to within one sample.
std::vector<std::size_t> stratified_fold_assignment(std::span<const int> labels, const CvFolds& folds);

/// Out-of-fold positive-class probabilities: every sample is scored by the
/// forest trained on the other folds. Throws StratificationError if some
/// training complement lacks a class.
Vector rf_fit_predict_cv(const Matrix& x, std::span<const int> labels, const CvFolds& folds,
                         const RandomForestOptions& options = {});

}  // namespace doust::baselines
