#include "doust/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>

namespace doust::metrics {

namespace {

// Twice the number of (a, b) pairs with b > a, plus the number of ties.
std::uint64_t doubled_wins(std::span<const double> a, std::span<const double> b) {
    std::uint64_t total = 0;
    if (b.size() <= a.size()) {
        std::vector<double> sb(b.begin(), b.end());
        std::sort(sb.begin(), sb.end());
        for (double x : a) {
            const auto lo = std::lower_bound(sb.begin(), sb.end(), x);
            const auto hi = std::upper_bound(lo, sb.end(), x);
            total += 2 * static_cast<std::uint64_t>(sb.end() - hi) + static_cast<std::uint64_t>(hi - lo);
        }
    } else {
        std::vector<double> sa(a.begin(), a.end());
        std::sort(sa.begin(), sa.end());
        for (double y : b) {
            const auto lo = std::lower_bound(sa.begin(), sa.end(), y);
            const auto hi = std::upper_bound(lo, sa.end(), y);
            total += 2 * static_cast<std::uint64_t>(lo - sa.begin()) + static_cast<std::uint64_t>(hi - lo);
        }
    }
    return total;
}

void check_scores(std::span<const double> v, const char* name) {
    if (v.empty()) throw ConfigError(std::string("ROC-AUC operand ") + name + " is empty");
    for (double x : v) {
        if (std::isnan(x)) throw ConfigError(std::string("ROC-AUC operand ") + name + " contains NaN");
    }
}

}  // namespace

void ScoredSet::validate() const {
    if (scores.size() != labels.size()) throw ConfigError("scores and labels differ in length");
    for (int l : labels) {
        if (l != 0 && l != 1) throw ConfigError("labels must be 0 or 1");
    }
}

std::vector<double> ScoredSet::group(int label) const {
    std::vector<double> out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == label) out.push_back(scores[i]);
    }
    return out;
}

double roc_auc(std::span<const double> set_a, std::span<const double> set_b) {
    check_scores(set_a, "A");
    check_scores(set_b, "B");
    const double denom = 2.0 * static_cast<double>(set_a.size()) * static_cast<double>(set_b.size());
    return static_cast<double>(doubled_wins(set_a, set_b)) / denom;
}

double roc_auc(const ScoredSet& set) {
    set.validate();
    const auto normals = set.group(0);
    const auto anomalies = set.group(1);
    if (normals.empty() || anomalies.empty()) throw ConfigError("ROC-AUC needs both classes");
    return roc_auc(normals, anomalies);
}

double roc_mixture_decomposition_check(std::span<const double> a, std::span<const double> b,
                                       std::span<const double> c) {
    std::vector<double> bc(b.begin(), b.end());
    bc.insert(bc.end(), c.begin(), c.end());
    const double nb = static_cast<double>(b.size());
    const double nc = static_cast<double>(c.size());
    const double lhs = roc_auc(a, bc);
    const double rhs = (nb * roc_auc(a, b) + nc * roc_auc(a, c)) / (nb + nc);
    return std::abs(lhs - rhs);
}

WorstCaseResiduals worst_case_addition_check(std::span<const double> a, std::span<const double> b) {
    check_scores(a, "A");
    check_scores(b, "B");
    const double base = roc_auc(a, b);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());

    std::vector<double> a_plus(a.begin(), a.end());
    a_plus.push_back(*std::max_element(b.begin(), b.end()) + 1.0);
    std::vector<double> b_plus(b.begin(), b.end());
    b_plus.push_back(*std::min_element(a.begin(), a.end()) - 1.0);

    WorstCaseResiduals r;
    r.appended_to_a = std::abs(roc_auc(a_plus, b) - na / (na + 1.0) * base);
    r.appended_to_b = std::abs(roc_auc(a, b_plus) - nb / (nb + 1.0) * base);
    return r;
}

double normalabnormal_to_traintest(double roc_normal_abnormal, double nu, double baseline) {
    if (!(nu > 0.0 && nu <= 1.0)) throw DomainError("nu must lie in (0, 1]");
    return (1.0 - nu) * baseline + nu * roc_normal_abnormal;
}

ModelSelectionEstimate traintest_to_normalabnormal(double roc_traintest, double nu, double baseline) {
    if (!(nu > 0.0 && nu <= 1.0)) throw DomainError("nu must lie in (0, 1]");
    ModelSelectionEstimate e;
    e.raw = (roc_traintest - (1.0 - nu) * baseline) / nu;
    e.value = std::clamp(e.raw, 0.0, 1.0);
    // Rounding residue just past an end of the range is not worth a warning.
    e.clamped = std::abs(e.value - e.raw) > 1e-12;
    if (e.clamped) {
        std::cerr << "warning: label-free AUC estimate " << e.raw << " outside [0, 1], clamped\n";
    }
    return e;
}

}  // namespace doust::metrics
