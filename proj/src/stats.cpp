#include "doust/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace doust::stats {

namespace {

std::vector<double> row_ranks(const Matrix& scores, Eigen::Index r) {
    std::vector<double> row(scores.row(r).data(), scores.row(r).data() + scores.cols());
    return average_ranks(row, true);
}

// Null distribution of the (doubled) positive rank sum: counts[s] is the number
// of sign assignments whose doubled rank sum equals s.
std::vector<double> signed_rank_counts(const std::vector<long>& doubled_ranks) {
    const long total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), 0L);
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    long reach = 0;
    for (long r : doubled_ranks) {
        for (long s = reach; s >= 0; --s) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
        reach += r;
    }
    return counts;
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values, bool descending) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return descending ? values[a] > values[b] : values[a] < values[b];
    });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && values[order[j]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
        i = j;
    }
    return ranks;
}

double friedman_statistic(const Matrix& scores) {
    const auto n = static_cast<double>(scores.rows());
    const auto k = static_cast<double>(scores.cols());
    std::vector<double> sums(static_cast<std::size_t>(scores.cols()), 0.0);
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const auto ranks = row_ranks(scores, r);
        for (std::size_t c = 0; c < ranks.size(); ++c) sums[c] += ranks[c];
    }
    const double centre = (k + 1.0) / 2.0;
    double ss = 0.0;
    for (double s : sums) {
        const double d = s / n - centre;
        ss += d * d;
    }
    return 12.0 * n / (k * (k + 1.0)) * ss;
}

FriedmanResult friedman_test(const Matrix& scores) {
    if (scores.rows() < 2 || scores.cols() < 2) throw ConfigError("Friedman test needs at least 2 datasets and 2 algorithms");
    if (!scores.allFinite()) throw ConfigError("Friedman test input contains non-finite values");
    FriedmanResult res;
    res.datasets = static_cast<std::size_t>(scores.rows());
    res.algorithms = static_cast<std::size_t>(scores.cols());
    res.mean_ranks.assign(res.algorithms, 0.0);
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const auto ranks = row_ranks(scores, r);
        for (std::size_t c = 0; c < ranks.size(); ++c) res.mean_ranks[c] += ranks[c];
    }
    for (double& m : res.mean_ranks) m /= static_cast<double>(res.datasets);
    res.statistic = friedman_statistic(scores);
    // Guard the all-tied case against rounding residue below zero.
    if (res.statistic <= 1e-12) {
        res.statistic = 0.0;
        res.p_value = 1.0;
    } else {
        const boost::math::chi_squared chi2(static_cast<double>(res.algorithms - 1));
        res.p_value = boost::math::cdf(boost::math::complement(chi2, res.statistic));
    }
    return res;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    const WilcoxonOptions& options) {
    if (x.size() != y.size()) throw ConfigError("paired samples differ in length");
    std::vector<double> diffs(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) diffs[i] = x[i] - y[i];

    std::vector<double> kept = diffs;
    if (options.zeros == ZeroMethod::drop) {
        std::erase_if(kept, [](double d) { return d == 0.0; });
    }
    std::vector<double> magnitudes(kept.size());
    std::transform(kept.begin(), kept.end(), magnitudes.begin(), [](double d) { return std::abs(d); });
    const auto ranks = average_ranks(magnitudes);

    WilcoxonResult res;
    std::vector<double> nonzero_ranks;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (kept[i] > 0.0) res.w_plus += ranks[i];
        if (kept[i] < 0.0) res.w_minus += ranks[i];
        if (kept[i] != 0.0) nonzero_ranks.push_back(ranks[i]);
    }
    res.nonzero_pairs = nonzero_ranks.size();
    if (res.nonzero_pairs < options.min_pairs) {
        res.insufficient = true;
        return res;
    }

    double p_greater = 0.0;  // P(W+ >= observed)
    double p_less = 0.0;     // P(W+ <= observed)
    if (res.nonzero_pairs <= options.exact_limit) {
        res.exact = true;
        std::vector<long> doubled(nonzero_ranks.size());
        std::transform(nonzero_ranks.begin(), nonzero_ranks.end(), doubled.begin(),
                       [](double r) { return std::lround(2.0 * r); });
        const auto counts = signed_rank_counts(doubled);
        const double total = std::ldexp(1.0, static_cast<int>(doubled.size()));
        const long observed = std::lround(2.0 * res.w_plus);
        for (std::size_t s = 0; s < counts.size(); ++s) {
            if (static_cast<long>(s) >= observed) p_greater += counts[s];
            if (static_cast<long>(s) <= observed) p_less += counts[s];
        }
        p_greater /= total;
        p_less /= total;
    } else {
        double sum = 0.0, sum_sq = 0.0;
        for (double r : nonzero_ranks) {
            sum += r;
            sum_sq += r * r;
        }
        const double mean = sum / 2.0;
        const double sd = std::sqrt(sum_sq / 4.0);
        const boost::math::normal stdnorm;
        const double z = (res.w_plus - mean) / sd;
        p_greater = boost::math::cdf(boost::math::complement(stdnorm, z));
        p_less = boost::math::cdf(stdnorm, z);
    }
    switch (options.alternative) {
        case Alternative::greater: res.p_value = p_greater; break;
        case Alternative::less: res.p_value = p_less; break;
        case Alternative::two_sided: res.p_value = std::min(1.0, 2.0 * std::min(p_greater, p_less)); break;
    }
    return res;
}

std::vector<double> holm_adjust(std::span<const double> p_values) {
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
    std::vector<double> adjusted(m);
    double running = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double scaled = std::min(1.0, static_cast<double>(m - i) * p_values[order[i]]);
        running = std::max(running, scaled);
        adjusted[order[i]] = running;
    }
    return adjusted;
}

SignificanceReport wilcoxon_holm(const Matrix& scores, const std::vector<std::string>& algorithms, double alpha,
                                 const WilcoxonOptions& options) {
    if (static_cast<std::size_t>(scores.cols()) != algorithms.size()) {
        throw ConfigError("algorithm names do not match score columns");
    }
    SignificanceReport report;
    report.algorithms = algorithms;
    report.datasets = static_cast<std::size_t>(scores.rows());
    report.alpha = alpha;
    report.friedman = friedman_test(scores);

    std::vector<double> raw;
    std::vector<std::size_t> tested;
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        for (std::size_t b = a + 1; b < algorithms.size(); ++b) {
            const Vector ca = scores.col(static_cast<Eigen::Index>(a));
            const Vector cb = scores.col(static_cast<Eigen::Index>(b));
            PairComparison pc;
            pc.first = a;
            pc.second = b;
            pc.test = wilcoxon_signed_rank(std::span(ca.data(), static_cast<std::size_t>(ca.size())),
                                           std::span(cb.data(), static_cast<std::size_t>(cb.size())), options);
            if (pc.test.p_value) {
                raw.push_back(*pc.test.p_value);
                tested.push_back(report.pairs.size());
            }
            report.pairs.push_back(pc);
        }
    }
    const auto adjusted = holm_adjust(raw);
    for (std::size_t i = 0; i < tested.size(); ++i) {
        auto& pc = report.pairs[tested[i]];
        pc.p_holm = adjusted[i];
        pc.significant = adjusted[i] < alpha;
    }
    return report;
}

nlohmann::json to_json(const SignificanceReport& report) {
    const std::size_t k = report.algorithms.size();
    nlohmann::json raw = nlohmann::json::array();
    nlohmann::json adj = nlohmann::json::array();
    for (std::size_t i = 0; i < k; ++i) {
        raw.push_back(nlohmann::json::array());
        adj.push_back(nlohmann::json::array());
        for (std::size_t j = 0; j < k; ++j) {
            raw[i].push_back(nullptr);
            adj[i].push_back(nullptr);
        }
    }
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& pc : report.pairs) {
        nlohmann::json pj = {{"a", report.algorithms[pc.first]},
                             {"b", report.algorithms[pc.second]},
                             {"nonzero_pairs", pc.test.nonzero_pairs},
                             {"w_plus", pc.test.w_plus},
                             {"w_minus", pc.test.w_minus},
                             {"exact", pc.test.exact},
                             {"insufficient", pc.test.insufficient},
                             {"significant", pc.significant}};
        pj["p_raw"] = pc.test.p_value ? nlohmann::json(*pc.test.p_value) : nlohmann::json(nullptr);
        pj["p_holm"] = pc.p_holm ? nlohmann::json(*pc.p_holm) : nlohmann::json(nullptr);
        raw[pc.first][pc.second] = raw[pc.second][pc.first] = pj["p_raw"];
        adj[pc.first][pc.second] = adj[pc.second][pc.first] = pj["p_holm"];
        pairs.push_back(std::move(pj));
    }
    return {{"algorithms", report.algorithms},
            {"datasets", report.datasets},
            {"alpha", report.alpha},
            {"mean_ranks", report.friedman.mean_ranks},
            {"friedman", {{"statistic", report.friedman.statistic}, {"p_value", report.friedman.p_value}}},
            {"pairs", std::move(pairs)},
            {"p_raw", std::move(raw)},
            {"p_holm", std::move(adj)}};
}

}  // namespace doust::stats
