#pragma once

#include <span>
#include <vector>

#include "doust/types.hpp"

namespace doust::metrics {

/// Scores paired with binary labels (0 normal, 1 anomaly).
struct ScoredSet {
    std::vector<double> scores;
    std::vector<int> labels;

    void validate() const;
    [[nodiscard]] std::vector<double> group(int label) const;
};

/// roc(A, B): probability that a random element of B outranks a random element
/// of A, ties counting one half. Computed from exact pair counts, so the
/// mixture and duplication identities hold to rounding of a single division.
double roc_auc(std::span<const double> set_a, std::span<const double> set_b);

/// roc(normals, anomalies) of a labelled score vector.
double roc_auc(const ScoredSet& set);

/// |roc(A, B+C) - (|B| roc(A,B) + |C| roc(A,C)) / (|B| + |C|)|
double roc_mixture_decomposition_check(std::span<const double> a, std::span<const double> b,
                                       std::span<const double> c);

struct WorstCaseResiduals {
    double appended_to_a = 0.0;  ///< |roc(A + w_A, B) - N_A/(N_A+1) roc(A, B)|
    double appended_to_b = 0.0;  ///< |roc(A, B + w_B) - N_B/(N_B+1) roc(A, B)|
};

/// Appends w_A > max(B) to A and w_B < min(A) to B and checks both scalings.
WorstCaseResiduals worst_case_addition_check(std::span<const double> a, std::span<const double> b);

/// Expected roc(train, test) for a test set with anomaly fraction nu:
/// (1 - nu) * baseline + nu * roc_normal_abnormal, baseline = roc(train, test normals).
double normalabnormal_to_traintest(double roc_normal_abnormal, double nu, double baseline = 0.5);

struct ModelSelectionEstimate {
    double value = 0.0;  ///< estimate clamped into [0, 1]
    double raw = 0.0;    ///< unclamped inverse of the linear relation
    bool clamped = false;
};

/// Inverts the linear train/test relation to estimate the normal/abnormal AUC
/// without labels: (roc_tt - (1 - nu) * baseline) / nu.
ModelSelectionEstimate traintest_to_normalabnormal(double roc_traintest, double nu, double baseline = 0.5);

}  // namespace doust::metrics
