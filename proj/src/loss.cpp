#include "doust/loss.hpp"

#include <algorithm>
#include <cmath>

namespace doust {

namespace {

void require_finite(std::span<const double> scores, const char* group) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) {
            throw InvalidScoreError(group, std::string("non-finite score in ") + group + " group at index " +
                                               std::to_string(i));
        }
    }
}

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

LossGradient evaluate(const LossSpec& spec, std::span<const double> tr, std::span<const double> te, double n_tr,
                      double n_te) {
    spec.validate();
    require_finite(tr, "train");
    require_finite(te, "test");
    const double w = spec.weight;
    LossGradient out;
    out.train.assign(tr.size(), 0.0);
    out.test.assign(te.size(), 0.0);

    switch (spec.variant) {
        case LossVariant::balanced_mse:
        case LossVariant::raw_mse: {
            const bool mean = spec.variant == LossVariant::balanced_mse;
            const double ktr = mean ? 1.0 / n_tr : 1.0;
            const double kte = mean ? w / n_te : w;
            double a = 0.0, b = 0.0;
            for (std::size_t i = 0; i < tr.size(); ++i) {
                a += tr[i] * tr[i];
                out.train[i] = 2.0 * tr[i] * ktr;
            }
            for (std::size_t i = 0; i < te.size(); ++i) {
                const double r = 1.0 - te[i];
                b += r * r;
                out.test[i] = -2.0 * r * kte;
            }
            out.value = (tr.empty() ? 0.0 : a * ktr) + (te.empty() ? 0.0 : b * kte);
            break;
        }
        case LossVariant::mse_plus_mae: {
            double a = 0.0, b = 0.0;
            for (std::size_t i = 0; i < tr.size(); ++i) {
                a += tr[i] + tr[i] * tr[i];
                out.train[i] = (1.0 + 2.0 * tr[i]) / n_tr;
            }
            for (std::size_t i = 0; i < te.size(); ++i) {
                const double r = 1.0 - te[i];
                b += r + r * r;
                out.test[i] = -w * (1.0 + 2.0 * r) / n_te;
            }
            out.value = (tr.empty() ? 0.0 : a / n_tr) + (te.empty() ? 0.0 : w * b / n_te);
            break;
        }
        case LossVariant::unmoving_normal: {
            double a = 0.0, b = 0.0;
            for (std::size_t i = 0; i < tr.size(); ++i) {
                a += std::abs(tr[i] - 0.5);
                out.train[i] = sign(tr[i] - 0.5) / n_tr;
            }
            for (std::size_t i = 0; i < te.size(); ++i) {
                b += 1.0 - te[i];
                out.test[i] = -w / n_te;
            }
            out.value = (tr.empty() ? 0.0 : a / n_tr) + (te.empty() ? 0.0 : w * b / n_te);
            break;
        }
        case LossVariant::meanmax: {
            if (!tr.empty()) {
                const auto k = argmax(tr);
                out.value += tr[k];
                out.train[k] = 1.0;
            }
            double b = 0.0;
            for (std::size_t i = 0; i < te.size(); ++i) {
                b += 1.0 - te[i];
                out.test[i] = -w / n_te;
            }
            if (!te.empty()) out.value += w * b / n_te;
            break;
        }
        case LossVariant::max_independent: {
            if (!tr.empty()) {
                const auto k = argmax(tr);
                out.value += tr[k];
                out.train[k] = 1.0;
            }
            if (!te.empty()) {
                const auto k = argmax(te);
                out.value -= w * te[k];
                out.test[k] = -w;
            }
            break;
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(LossVariant v) noexcept {
    switch (v) {
        case LossVariant::balanced_mse: return "balanced_mse";
        case LossVariant::raw_mse: return "raw_mse";
        case LossVariant::mse_plus_mae: return "mse_plus_mae";
        case LossVariant::unmoving_normal: return "unmoving_normal";
        case LossVariant::meanmax: return "meanmax";
        case LossVariant::max_independent: return "max_independent";
    }
    return "unknown";
}

LossVariant loss_variant_from_string(std::string_view name) {
    for (auto v : {LossVariant::balanced_mse, LossVariant::raw_mse, LossVariant::mse_plus_mae,
                   LossVariant::unmoving_normal, LossVariant::meanmax, LossVariant::max_independent}) {
        if (to_string(v) == name) return v;
    }
    throw ConfigError("unknown loss variant '" + std::string(name) + "'");
}

void LossSpec::validate() const {
    if (!(weight > 0.0) || !std::isfinite(weight)) throw ConfigError("loss weight must be positive and finite");
}

double loss_value(const LossSpec& spec, std::span<const double> train_scores, std::span<const double> test_scores) {
    return loss_gradient(spec, train_scores, test_scores).value;
}

LossGradient loss_gradient(const LossSpec& spec, std::span<const double> train_scores,
                           std::span<const double> test_scores) {
    return evaluate(spec, train_scores, test_scores, static_cast<double>(train_scores.size()),
                    static_cast<double>(test_scores.size()));
}

LossGradient loss_gradient_with_group_sizes(const LossSpec& spec, std::span<const double> train_scores,
                                            std::span<const double> test_scores, double train_group_size,
                                            double test_group_size) {
    if (!(train_group_size > 0.0) || !(test_group_size > 0.0)) throw ConfigError("group sizes must be positive");
    return evaluate(spec, train_scores, test_scores, train_group_size, test_group_size);
}

LossGradient centering_loss_gradient(std::span<const double> scores) {
    require_finite(scores, "train");
    LossGradient out;
    out.train.assign(scores.size(), 0.0);
    if (scores.empty()) return out;
    const double n = static_cast<double>(scores.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double r = scores[i] - 0.5;
        acc += r * r;
        out.train[i] = 2.0 * r / n;
    }
    out.value = acc / n;
    return out;
}

PopulationOptimum population_optimum(double nu, double omega, double gamma) {
    if (!(nu > 0.0 && nu < 1.0)) throw DomainError("nu must lie in (0, 1)");
    if (!(omega > 0.0) || !std::isfinite(omega)) throw DomainError("omega must be positive");
    if (!(gamma >= 0.0 && gamma < nu)) throw DomainError("gamma must satisfy 0 <= gamma < nu");
    PopulationOptimum p;
    p.normal_score = omega * (1.0 - nu) / (1.0 + omega * (1.0 - nu) - gamma);
    p.abnormal_score = nu * omega / (gamma + nu * omega);
    p.separation = (nu - gamma) * omega / ((1.0 + omega - gamma - omega * nu) * (omega * nu + gamma));
    return p;
}

double optimal_weight(double nu, double gamma) {
    if (!(nu > 0.0 && nu < 1.0)) throw DomainError("nu must lie in (0, 1)");
    if (!(gamma > 0.0 && gamma < nu)) throw DomainError("optimal weight needs 0 < gamma < nu");
    return std::sqrt(gamma * (1.0 - gamma) / (nu * (1.0 - nu)));
}

}  // namespace doust
