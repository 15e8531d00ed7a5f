#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "doust/types.hpp"

namespace doust {

/// Refinement objectives. All are written so that lower is better and the
/// optimizer pushes training scores down and test scores up.
enum class LossVariant {
    balanced_mse,     ///< mean(train^2) + w * mean((1 - test)^2)
    raw_mse,          ///< sum(train^2) + w * sum((1 - test)^2)
    mse_plus_mae,     ///< mean(train + train^2) + w * mean((1 - test) + (1 - test)^2)
    unmoving_normal,  ///< mean(|train - 1/2|) + w * mean(1 - test)
    meanmax,          ///< max(train) + w * mean(1 - test)
    max_independent,  ///< max(train) - w * max(test)
};

std::string_view to_string(LossVariant v) noexcept;
LossVariant loss_variant_from_string(std::string_view name);

struct LossSpec {
    LossVariant variant = LossVariant::balanced_mse;
    double weight = 1.0;

    void validate() const;
};

class InvalidScoreError : public Error {
public:
    InvalidScoreError(std::string group, const std::string& what) : Error(what), group_(std::move(group)) {}
    [[nodiscard]] const std::string& group() const noexcept { return group_; }

private:
    std::string group_;
};

/// Value of the refinement loss. An empty group contributes nothing.
/// Throws InvalidScoreError when a score is not finite.
double loss_value(const LossSpec& spec, std::span<const double> train_scores, std::span<const double> test_scores);

struct LossGradient {
    double value = 0.0;
    std::vector<double> train;  ///< dL / d train_scores[i]
    std::vector<double> test;   ///< dL / d test_scores[i]
};

/// Loss value plus its (sub)gradient. For max terms the whole gradient goes to
/// the first maximal element.
LossGradient loss_gradient(const LossSpec& spec, std::span<const double> train_scores,
                           std::span<const double> test_scores);

/// Same as loss_gradient but normalizes mean terms by externally supplied
/// group sizes instead of the span lengths. Used when the per-group means are
/// meant over a whole epoch rather than a single batch.
LossGradient loss_gradient_with_group_sizes(const LossSpec& spec, std::span<const double> train_scores,
                                            std::span<const double> test_scores, double train_group_size,
                                            double test_group_size);

/// Pretraining objective: mean((s - 1/2)^2) and its gradient.
LossGradient centering_loss_gradient(std::span<const double> scores);

struct PopulationOptimum {
    double normal_score = 0.0;
    double abnormal_score = 0.0;
    double separation = 0.0;
};

/// Infinite-sample minimizer of the weighted balanced loss, for test anomaly
/// fraction nu, test-term weight omega and training contamination gamma.
///   normal   = omega (1 - nu) / (1 + omega (1 - nu) - gamma)
///   abnormal = nu omega / (gamma + nu omega)
/// gamma = 0 gives normal = (1 - nu) / (1 + 1/omega - nu), abnormal = 1.
PopulationOptimum population_optimum(double nu, double omega = 1.0, double gamma = 0.0);

/// The omega maximizing the separation for fixed nu and gamma > 0:
/// sqrt(gamma (1 - gamma) / (nu (1 - nu))).
double optimal_weight(double nu, double gamma);

}  // namespace doust
