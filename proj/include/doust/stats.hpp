#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doust/types.hpp"

namespace doust::stats {

/// Average (mid) ranks, 1-based. With descending = true the largest value gets
/// rank 1.
std::vector<double> average_ranks(std::span<const double> values, bool descending = false);

struct FriedmanResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::vector<double> mean_ranks;  ///< rank 1 = best (highest) score
    std::size_t datasets = 0;
    std::size_t algorithms = 0;
};

/// Friedman test on a (datasets x algorithms) score matrix; higher scores are
/// better. Ranks are averaged within rows for ties, and the statistic
/// 12N/(k(k+1)) * sum_j (R_j - (k+1)/2)^2 is referred to chi-square(k-1).
FriedmanResult friedman_test(const Matrix& scores);

/// The Friedman statistic alone, for oracles that permute rows.
double friedman_statistic(const Matrix& scores);

enum class Alternative { two_sided, greater, less };
enum class ZeroMethod { drop, pratt };

struct WilcoxonOptions {
    Alternative alternative = Alternative::two_sided;
    ZeroMethod zeros = ZeroMethod::drop;
    std::size_t exact_limit = 25;  ///< exact null distribution up to this many nonzero pairs
    std::size_t min_pairs = 5;     ///< fewer nonzero pairs -> insufficient data
};

struct WilcoxonResult {
    std::size_t nonzero_pairs = 0;
    double w_plus = 0.0;   ///< rank sum of positive differences x - y
    double w_minus = 0.0;  ///< rank sum of negative differences
    std::optional<double> p_value;
    bool exact = false;
    bool insufficient = false;
};

/// Paired signed-rank test on x - y.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    const WilcoxonOptions& options = {});

/// Holm step-down adjustment, returned in input order.
std::vector<double> holm_adjust(std::span<const double> p_values);

struct PairComparison {
    std::size_t first = 0;
    std::size_t second = 0;
    WilcoxonResult test;
    std::optional<double> p_holm;
    bool significant = false;
};

/// Everything behind a critical-difference diagram.
struct SignificanceReport {
    std::vector<std::string> algorithms;
    std::size_t datasets = 0;
    double alpha = 0.05;
    FriedmanResult friedman;
    std::vector<PairComparison> pairs;
};

/// Friedman omnibus test plus all pairwise signed-rank tests, Holm-adjusted
/// over the pairs that had enough data.
SignificanceReport wilcoxon_holm(const Matrix& scores, const std::vector<std::string>& algorithms,
                                 double alpha = 0.05, const WilcoxonOptions& options = {});

nlohmann::json to_json(const SignificanceReport& report);

}  // namespace doust::stats
