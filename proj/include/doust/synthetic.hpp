#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "doust/dataset.hpp"
#include "doust/ensemble.hpp"
#include "doust/types.hpp"

namespace doust {

// ---------------------------------------------------------------------------
// One-dimensional side-choice thought experiment

struct ThoughtConfig {
    std::size_t N = 1000;  ///< standard-normal samples
    std::size_t O = 20;    ///< outliers
    double f = 0.023;      ///< tail mass beyond each threshold
    double outlier_offset = 2.0;  ///< outlier centre sits this far beyond t
    double outlier_sd = 0.25;
    /// Place outliers alternately beyond both thresholds instead of only the right one.
    bool symmetric_outliers = false;
    std::uint64_t seed = 0;
    std::size_t reps = 1000;

    /// Threshold t with P(Z > t) = f.
    [[nodiscard]] double threshold() const;
    void validate() const;
};

struct ThoughtTrial {
    bool chose_right = false;
    std::size_t beyond_right = 0;  ///< points with x > t
    std::size_t beyond_left = 0;   ///< points with x < -t
    double auc_one_sided = 0.0;    ///< score x * sign(chosen side)
    double auc_two_sided = 0.0;    ///< score |x|
    std::size_t mistakes_one_sided = 0;
    std::size_t mistakes_two_sided = 0;
};

ThoughtTrial thought_trial(const ThoughtConfig& cfg, std::uint64_t seed);

struct ThoughtSummary {
    std::size_t N = 0;
    std::size_t O = 0;
    double f = 0.0;
    double p_right = 0.0;
    double mean_auc_one_sided = 0.0;
    double mean_auc_two_sided = 0.0;
    double mean_mistakes_one_sided = 0.0;
    double mean_mistakes_two_sided = 0.0;
    std::vector<ThoughtTrial> trials;
};

/// cfg.reps independent trials with seeds cfg.seed + rep.
ThoughtSummary thought_sweep(const ThoughtConfig& cfg, kernels::Execution ex = kernels::Execution::parallel);

/// N beyond which flagging both tails costs more mistakes than guessing a
/// side: N f > O / 2.
double guessing_mistake_bound(std::size_t O, double f);

struct ConditionMargin {
    double margin = 0.0;  ///< O / sqrt(N f (1 - f))
    double nu = 0.0;      ///< O / (N + O)
    double rule_of_thumb_n = 0.0;  ///< 1 / nu^2
    [[nodiscard]] bool detectable() const noexcept { return margin > 1.0; }
};

ConditionMargin condition_margin(double N, double O, double f);

// ---------------------------------------------------------------------------
// Gaussian study

enum class GaussianMethod { doust, supervised_oracle, bayes_oracle };
enum class Averaging { metric, prediction };

std::string to_string(GaussianMethod m);
GaussianMethod gaussian_method_from_string(const std::string& s);

struct GaussianSpec {
    std::size_t dims = 10;
    Vector normal_mean;    ///< empty: zeros
    Vector abnormal_mean;  ///< empty: ones
    Vector sigma;          ///< empty: ones
    double nu = 0.01;
    std::size_t n_train = 1000;
    std::size_t reps = 30;
    std::uint64_t seed = 0;
    Averaging averaging = Averaging::metric;

    [[nodiscard]] Vector mu_normal() const;
    [[nodiscard]] Vector mu_abnormal() const;
    [[nodiscard]] Vector sd() const;
    /// Test composition: round((1 - nu) N) normals and round(nu N) anomalies.
    [[nodiscard]] std::size_t test_normals() const;
    [[nodiscard]] std::size_t test_anomalies() const;
    void validate() const;
};

/// AUC of the optimal linear discriminant: Phi(delta / sqrt 2) where
/// delta is the Mahalanobis distance between the two means.
double bayes_auc_closed_form(const GaussianSpec& spec);

struct GaussianDraw {
    Matrix train;
    Matrix test;
    std::vector<int> test_labels;
};

GaussianDraw draw_gaussian(const GaussianSpec& spec, std::uint64_t seed);

struct GaussianResult {
    GaussianMethod method = GaussianMethod::doust;
    std::size_t n_train = 0;
    double nu = 0.0;
    double mean_auc = 0.0;
    double stderr_auc = 0.0;
    std::vector<double> aucs;  ///< per successful repetition (metric averaging)
    std::size_t failed = 0;
    std::vector<std::string> failures;
};

/// Mean AUC over repetitions. The DOUST method trains a single submodel per
/// repetition with `doust_cfg` (its ensemble size is overridden to 1).
GaussianResult gaussian_experiment(const GaussianSpec& spec, GaussianMethod method, const DoustConfig& doust_cfg = {},
                                   kernels::Execution ex = kernels::Execution::parallel);

// ---------------------------------------------------------------------------
// Contamination downsampling

struct DownsampleSpec {
    double target_nu = 0.5;
    std::uint64_t seed = 0;
    std::size_t min_outliers = 200;
    void validate() const;
};

struct DownsampleResult {
    Dataset data;
    double achieved_nu = 0.0;
    std::size_t removed = 0;
    bool excluded = false;     ///< fewer than min_outliers anomalies remain
    bool unreachable = false;  ///< already below target; returned unchanged
    std::string note;
};

/// Outliers to keep for a target fraction: floor(nu N / (1 - nu)).
std::size_t outliers_for_fraction(std::size_t normals, double nu);

/// Removes uniformly chosen anomalies (seeded, without replacement) until the
/// anomaly fraction is at most the target. Normals are never touched and row
/// order is preserved.
DownsampleResult nu_downsample(const Dataset& data, const DownsampleSpec& spec);

}  // namespace doust
