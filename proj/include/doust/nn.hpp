#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "doust/types.hpp"

namespace doust::nn {

/// Logistic sigmoid shifted right by one: 1 / (1 + e^(1 - x)).
/// The result is clamped into the open interval (0, 1) so saturated inputs
/// never produce an exact 0 or 1.
double shifted_sigmoid(double x) noexcept;

/// Derivative of shifted_sigmoid expressed through its output value s.
inline double shifted_sigmoid_derivative_from_output(double s) noexcept { return s * (1.0 - s); }

/// Bias-free fully connected layer; weights are (fan_in x fan_out).
struct DenseLayer {
    Matrix weights;
};

struct Topology {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden = {100, 100, 100};
};

enum class Group : std::uint8_t { train = 0, test = 1 };

struct TrainBatch {
    Matrix features;
    std::vector<Group> groups;
};

/// Rectifier hidden layers followed by a single shifted-sigmoid output node.
class MlpNetwork {
public:
    MlpNetwork() = default;
    explicit MlpNetwork(std::vector<DenseLayer> layers);

    [[nodiscard]] std::size_t input_dim() const noexcept;
    [[nodiscard]] std::size_t depth() const noexcept { return layers_.size(); }
    [[nodiscard]] std::size_t parameter_count() const noexcept;
    [[nodiscard]] const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    [[nodiscard]] std::vector<DenseLayer>& layers() noexcept { return layers_; }
    [[nodiscard]] bool all_finite() const noexcept;

    /// One score in (0, 1) per batch row.
    [[nodiscard]] Vector forward(const Matrix& batch) const;

private:
    std::vector<DenseLayer> layers_;
};

/// Activations recorded during a forward pass. layer_inputs[l] is the matrix
/// multiplied by layer l's weights; scores are the network outputs.
struct ForwardCache {
    std::vector<Matrix> layer_inputs;
    Vector scores;
};

using Gradients = std::vector<Matrix>;

ForwardCache forward_cached(const MlpNetwork& net, const Matrix& batch);

/// Reverse-mode gradient of sum_i L_i w.r.t. every weight, given dL_i/dscore_i.
Gradients backward(const MlpNetwork& net, const ForwardCache& cache, const Vector& score_gradient);

/// Uniform fan-in scaled initialization, U(-sqrt(6/fan_in), sqrt(6/fan_in)).
MlpNetwork init_weights(const Topology& topology, std::uint64_t seed);

[[nodiscard]] double init_variance(std::size_t fan_in) noexcept;

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adaptive moment estimation with bias correction.
class AdamOptimizer {
public:
    AdamOptimizer(const MlpNetwork& net, AdamOptions options = {});

    void step(MlpNetwork& net, const Gradients& gradients);

    [[nodiscard]] std::uint64_t steps() const noexcept { return steps_; }
    [[nodiscard]] const AdamOptions& options() const noexcept { return options_; }
    [[nodiscard]] const std::vector<Matrix>& first_moments() const noexcept { return m_; }
    [[nodiscard]] const std::vector<Matrix>& second_moments() const noexcept { return v_; }

private:
    AdamOptions options_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    std::uint64_t steps_ = 0;
};

inline constexpr int kNetworkFormatVersion = 1;

nlohmann::json to_json(const MlpNetwork& net);
MlpNetwork network_from_json(const nlohmann::json& j);

}  // namespace doust::nn
