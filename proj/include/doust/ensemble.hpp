#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doust/kernels.hpp"
#include "doust/loss.hpp"
#include "doust/nn.hpp"
#include "doust/types.hpp"

namespace doust {

/// How refinement batches are drawn from the train/test union.
enum class BatchComposition {
    shuffled_union,  ///< shuffle all rows together, consecutive slices
    stratified,      ///< every batch is half train rows, half test rows
};

/// Denominator of the per-group mean terms during refinement.
enum class GroupNormalization {
    per_batch,    ///< group sizes inside the current batch
    per_dataset,  ///< full group sizes; batch losses sum to the full-set loss
};

struct DoustConfig {
    std::vector<std::size_t> hidden = {100, 100, 100};
    std::size_t pretrain_epochs = 5;
    std::size_t refine_epochs = 50;
    /// Unset means 100, or 500 for the max_independent loss.
    std::optional<std::size_t> batch_size;
    std::size_t ensemble_size = 100;
    double feature_bag_fraction = 1.0;
    std::uint64_t seed = 0;
    LossSpec loss;
    BatchComposition batching = BatchComposition::shuffled_union;
    GroupNormalization normalization = GroupNormalization::per_batch;
    nn::AdamOptions optimizer;

    [[nodiscard]] std::size_t effective_batch_size() const noexcept;
    void validate() const;
};

nlohmann::json to_json(const DoustConfig& cfg);
DoustConfig doust_config_from_json(const nlohmann::json& j);

/// Per-feature z-scoring fitted on training rows only. Constant features map
/// to zero.
class FeatureScaler {
public:
    FeatureScaler() = default;
    FeatureScaler(Vector mean, Vector scale);

    static FeatureScaler fit(const Matrix& train);

    [[nodiscard]] Matrix transform(const Matrix& x) const;
    [[nodiscard]] const Vector& mean() const noexcept { return mean_; }
    [[nodiscard]] const Vector& scale() const noexcept { return scale_; }
    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(mean_.size()); }

private:
    Vector mean_;
    Vector scale_;
};

/// ceil(fraction * input_dim) distinct feature indices, ascending.
std::vector<std::size_t> feature_bag_mask(std::size_t input_dim, double fraction, std::uint64_t seed);

Matrix select_columns(const Matrix& x, const std::vector<std::size_t>& columns);

struct PhaseReport {
    double loss_before = 0.0;
    double loss_after = 0.0;
    std::size_t steps = 0;
    bool finite = true;
    std::string failure;
};

/// Teaches the network to map every training row to 1/2. Trains in place;
/// a non-finite loss stops training and is reported, never thrown.
PhaseReport pretrain(nn::MlpNetwork& net, const Matrix& train, const DoustConfig& cfg, std::uint64_t shuffle_seed);

/// Test-time refinement: pulls training rows towards 0 and test rows towards 1
/// with the configured loss. Trains in place; failures are reported.
PhaseReport refine(nn::MlpNetwork& net, const Matrix& train, const Matrix& test, const DoustConfig& cfg,
                   std::uint64_t shuffle_seed);

/// Forward pass over an arbitrarily large matrix in bounded-memory chunks.
Vector score_rows(const nn::MlpNetwork& net, const Matrix& x);

enum class SubmodelStatus { ok, failed };

struct SubmodelResult {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    nn::MlpNetwork network;
    SubmodelStatus status = SubmodelStatus::ok;
    std::string reason;
    std::vector<std::size_t> features;
    PhaseReport pretrain_report;
    PhaseReport refine_report;
    /// Pretraining did not lower the centering loss.
    bool degraded = false;

    [[nodiscard]] bool ok() const noexcept { return status == SubmodelStatus::ok; }
};

/// Raised when no submodel of an ensemble trained successfully.
class EnsembleFailure : public Error {
public:
    EnsembleFailure(const std::string& what, std::vector<std::string> reasons)
        : Error(what), reasons_(std::move(reasons)) {}
    [[nodiscard]] const std::vector<std::string>& reasons() const noexcept { return reasons_; }

private:
    std::vector<std::string> reasons_;
};

/// Averaged DOUST submodels. Immutable after construction.
class EnsembleModel {
public:
    EnsembleModel(std::vector<SubmodelResult> submodels, FeatureScaler scaler, DoustConfig config);

    /// Mean over ok submodels of their scores; higher is more anomalous.
    [[nodiscard]] Vector score(const Matrix& features, kernels::Execution ex = kernels::Execution::parallel) const;

    /// (rows x ok submodels) table of individual scores in index order.
    [[nodiscard]] Matrix member_scores(const Matrix& features,
                                       kernels::Execution ex = kernels::Execution::parallel) const;

    [[nodiscard]] const std::vector<SubmodelResult>& submodels() const noexcept { return submodels_; }
    [[nodiscard]] const FeatureScaler& scaler() const noexcept { return scaler_; }
    [[nodiscard]] const DoustConfig& config() const noexcept { return config_; }
    [[nodiscard]] std::size_t ok_count() const noexcept;
    [[nodiscard]] std::size_t input_dim() const noexcept { return scaler_.dim(); }

private:
    std::vector<SubmodelResult> submodels_;
    FeatureScaler scaler_;
    DoustConfig config_;
};

struct TrainHooks {
    /// Returning true corrupts submodel i's weights after training, which the
    /// failure detection must then catch.
    std::function<bool(std::size_t)> inject_failure;
};

/// Trains one submodel on already-scaled features.
SubmodelResult train_submodel(const Matrix& train, const Matrix& test, const DoustConfig& cfg, std::size_t index,
                              const TrainHooks& hooks = {});

/// Fits the scaler on train, then trains cfg.ensemble_size submodels with seeds
/// cfg.seed + i. Failed submodels are kept, flagged and excluded from scoring.
/// Throws EnsembleFailure when every submodel fails.
EnsembleModel train_ensemble(const Matrix& train, const Matrix& test, const DoustConfig& cfg,
                             const TrainHooks& hooks = {}, kernels::Execution ex = kernels::Execution::parallel);

inline constexpr int kEnsembleFormatVersion = 1;

nlohmann::json to_json(const EnsembleModel& model);
EnsembleModel ensemble_from_json(const nlohmann::json& j);

}  // namespace doust
