#include "doust/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace doust::nn {

namespace {

constexpr double kLowest = std::numeric_limits<double>::min();
const double kHighest = std::nextafter(1.0, 0.0);

void check_shapes(const MlpNetwork& net, const Gradients& grads) {
    if (grads.size() != net.depth()) {
        throw ConfigError("gradient count " + std::to_string(grads.size()) + " does not match depth " +
                          std::to_string(net.depth()));
    }
    for (std::size_t l = 0; l < grads.size(); ++l) {
        const auto& w = net.layers()[l].weights;
        if (grads[l].rows() != w.rows() || grads[l].cols() != w.cols()) {
            throw ConfigError("gradient shape mismatch at layer " + std::to_string(l));
        }
    }
}

}  // namespace

double shifted_sigmoid(double x) noexcept {
    const double t = x - 1.0;
    double s;
    if (t >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-t));
    } else {
        const double e = std::exp(t);
        s = e / (1.0 + e);
    }
    if (std::isnan(s)) return s;
    return std::clamp(s, kLowest, kHighest);
}

MlpNetwork::MlpNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ConfigError("network needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& w = layers_[l].weights;
        if (w.rows() == 0 || w.cols() == 0) throw ConfigError("layer " + std::to_string(l) + " has a zero dimension");
        if (l > 0 && layers_[l - 1].weights.cols() != w.rows()) {
            throw ConfigError("layer " + std::to_string(l) + " fan-in does not match previous fan-out");
        }
    }
    if (layers_.back().weights.cols() != 1) throw ConfigError("output layer must have exactly one node");
}

std::size_t MlpNetwork::input_dim() const noexcept {
    return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weights.rows());
}

std::size_t MlpNetwork::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size());
    return n;
}

bool MlpNetwork::all_finite() const noexcept {
    return std::all_of(layers_.begin(), layers_.end(), [](const DenseLayer& l) { return l.weights.allFinite(); });
}

Vector MlpNetwork::forward(const Matrix& batch) const {
    return forward_cached(*this, batch).scores;
}

ForwardCache forward_cached(const MlpNetwork& net, const Matrix& batch) {
    if (net.depth() == 0) throw ConfigError("forward on an empty network");
    if (static_cast<std::size_t>(batch.cols()) != net.input_dim()) {
        throw ConfigError("batch width " + std::to_string(batch.cols()) + " does not match network input " +
                          std::to_string(net.input_dim()));
    }
    ForwardCache cache;
    cache.layer_inputs.reserve(net.depth());
    cache.layer_inputs.push_back(batch);
    const auto& layers = net.layers();
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
        Matrix z = cache.layer_inputs.back() * layers[l].weights;
        cache.layer_inputs.push_back(z.cwiseMax(0.0));
    }
    const Matrix out = cache.layer_inputs.back() * layers.back().weights;
    cache.scores.resize(out.rows());
    for (Eigen::Index i = 0; i < out.rows(); ++i) cache.scores[i] = shifted_sigmoid(out(i, 0));
    return cache;
}

Gradients backward(const MlpNetwork& net, const ForwardCache& cache, const Vector& score_gradient) {
    const std::size_t depth = net.depth();
    if (cache.layer_inputs.size() != depth) throw ConfigError("forward cache does not match network depth");
    if (score_gradient.size() != cache.scores.size()) throw ConfigError("score gradient length mismatch");

    Gradients grads(depth);
    Matrix delta(score_gradient.size(), 1);
    for (Eigen::Index i = 0; i < score_gradient.size(); ++i) {
        delta(i, 0) = score_gradient[i] * shifted_sigmoid_derivative_from_output(cache.scores[i]);
    }
    for (std::size_t l = depth; l-- > 0;) {
        const Matrix& input = cache.layer_inputs[l];
        grads[l].noalias() = input.transpose() * delta;
        if (l == 0) break;
        Matrix upstream = delta * net.layers()[l].weights.transpose();
        // input is relu(z) of the previous layer, so input > 0 iff z > 0.
        delta = upstream.cwiseProduct((input.array() > 0.0).cast<double>().matrix());
    }
    return grads;
}

double init_variance(std::size_t fan_in) noexcept {
    // Var of U(-a, a) is a^2 / 3 with a = sqrt(6 / fan_in).
    return 2.0 / static_cast<double>(fan_in);
}

MlpNetwork init_weights(const Topology& topology, std::uint64_t seed) {
    if (topology.input_dim == 0) throw ConfigError("input dimension must be positive");
    for (auto w : topology.hidden) {
        if (w == 0) throw ConfigError("hidden layer width must be positive");
    }
    std::mt19937_64 rng(seed);
    std::vector<DenseLayer> layers;
    std::size_t fan_in = topology.input_dim;
    auto add_layer = [&](std::size_t fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Matrix w(fan_in, fan_out);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
        layers.push_back({std::move(w)});
        fan_in = fan_out;
    };
    for (auto width : topology.hidden) add_layer(width);
    add_layer(1);
    return MlpNetwork(std::move(layers));
}

AdamOptimizer::AdamOptimizer(const MlpNetwork& net, AdamOptions options) : options_(options) {
    if (!(options_.learning_rate > 0.0) || !(options_.epsilon > 0.0) || options_.beta1 < 0.0 || options_.beta1 >= 1.0 ||
        options_.beta2 < 0.0 || options_.beta2 >= 1.0) {
        throw ConfigError("invalid optimizer options");
    }
    for (const auto& l : net.layers()) {
        m_.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
        v_.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
    }
}

void AdamOptimizer::step(MlpNetwork& net, const Gradients& gradients) {
    check_shapes(net, gradients);
    if (m_.size() != net.depth()) throw ConfigError("optimizer state does not match network");
    ++steps_;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    const double lr = options_.learning_rate;
    const double eps = options_.epsilon;
    for (std::size_t l = 0; l < net.depth(); ++l) {
        auto& w = net.layers()[l].weights;
        auto& m = m_[l];
        auto& v = v_[l];
        const auto& g = gradients[l];
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
}

nlohmann::json to_json(const MlpNetwork& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers()) {
        const auto& w = l.weights;
        layers.push_back({{"fan_in", w.rows()},
                          {"fan_out", w.cols()},
                          {"weights", std::vector<double>(w.data(), w.data() + w.size())}});
    }
    return {{"format", "doust.mlp"}, {"version", kNetworkFormatVersion}, {"layers", std::move(layers)}};
}

MlpNetwork network_from_json(const nlohmann::json& j) {
    if (!j.contains("version")) throw ConfigError("network blob has no format version");
    if (j.at("version").get<int>() != kNetworkFormatVersion) {
        throw ConfigError("unsupported network format version " + j.at("version").dump());
    }
    std::vector<DenseLayer> layers;
    for (const auto& lj : j.at("layers")) {
        const auto rows = lj.at("fan_in").get<Eigen::Index>();
        const auto cols = lj.at("fan_out").get<Eigen::Index>();
        const auto values = lj.at("weights").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(values.size()) != rows * cols) throw ConfigError("weight count mismatch");
        Matrix w(rows, cols);
        std::copy(values.begin(), values.end(), w.data());
        layers.push_back({std::move(w)});
    }
    return MlpNetwork(std::move(layers));
}

}  // namespace doust::nn
