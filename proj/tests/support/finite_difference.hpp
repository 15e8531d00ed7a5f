#pragma once
// Central finite differences of a scalar loss over every network weight.

#include <cmath>
#include <functional>
#include <vector>

#include "doust/nn.hpp"

namespace oracle {

struct FdResult {
    std::vector<doust::Matrix> gradients;
    /// Coordinates whose +h / -h perturbations changed some ReLU mask; the
    /// loss is not differentiable across such a kink so they are not compared.
    std::vector<std::vector<bool>> kinked;
};

inline std::vector<bool> relu_pattern(const doust::nn::MlpNetwork& net, const doust::Matrix& x) {
    std::vector<bool> pattern;
    doust::Matrix h = x;
    const auto& layers = net.layers();
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
        doust::Matrix z = h * layers[l].weights;
        for (Eigen::Index i = 0; i < z.size(); ++i) pattern.push_back(z.data()[i] > 0.0);
        h = z.cwiseMax(0.0);
    }
    return pattern;
}

inline FdResult central_differences(const doust::nn::MlpNetwork& net, const doust::Matrix& x,
                                    const std::function<double(const doust::Vector&)>& loss, double h = 1e-5) {
    FdResult out;
    doust::nn::MlpNetwork probe = net;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        auto& w = probe.layers()[l].weights;
        doust::Matrix g(w.rows(), w.cols());
        std::vector<bool> kinks(static_cast<std::size_t>(w.size()), false);
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            const double orig = w.data()[i];
            w.data()[i] = orig + h;
            const double up = loss(probe.forward(x));
            const auto p_up = relu_pattern(probe, x);
            w.data()[i] = orig - h;
            const double down = loss(probe.forward(x));
            const auto p_down = relu_pattern(probe, x);
            w.data()[i] = orig;
            g.data()[i] = (up - down) / (2.0 * h);
            kinks[static_cast<std::size_t>(i)] = p_up != p_down;
        }
        out.gradients.push_back(std::move(g));
        out.kinked.push_back(std::move(kinks));
    }
    return out;
}

/// |a - n| / max(|a|, |n|, floor)
inline double relative_error(double a, double n, double floor = 1e-8) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

}  // namespace oracle
