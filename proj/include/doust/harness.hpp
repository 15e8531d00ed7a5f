#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doust/baselines.hpp"
#include "doust/dataset.hpp"
#include "doust/ensemble.hpp"
#include "doust/stats.hpp"

namespace doust {

struct SplitSpec {
    double nu = 0.5;
    double train_fraction = 0.5;  ///< share of normals used for training
    std::uint64_t seed = 0;
    std::size_t min_outliers = 200;
    /// Exclude instead of warn when fewer than min_outliers anomalies remain.
    bool enforce_min_outliers = false;
    void validate() const;
};

/// Train rows are unlabelled normals; test labels are held apart so that
/// unsupervised code never receives them.
struct OneClassSplit {
    Matrix train;
    Matrix test;
    std::vector<int> test_labels;
    double achieved_nu = 0.0;
    std::size_t removed_outliers = 0;
    std::size_t removed_normals = 0;
    bool excluded = false;
    std::string note;
};

/// Seeded normal split, then the test set is brought to the target anomaly
/// fraction by dropping anomalies, or test normals when anomalies are short.
OneClassSplit make_oneclass_split(const Dataset& data, const SplitSpec& spec);

enum class Algorithm { doust, knn, iforest, rf_supervised };
std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct AlgorithmConfigs {
    DoustConfig doust;
    std::size_t knn_k = 1;
    baselines::IsolationForestOptions iforest;
    baselines::RandomForestOptions rf;
    std::size_t rf_folds = 5;
};

struct DatasetSource {
    std::string name;
    std::filesystem::path path;
};

struct BenchmarkProtocol {
    std::vector<DatasetSource> datasets;
    SplitSpec split;
    std::vector<Algorithm> algorithms = {Algorithm::doust, Algorithm::knn, Algorithm::iforest,
                                         Algorithm::rf_supervised};
    AlgorithmConfigs configs;
    std::size_t reps = 1;
    std::uint64_t seed = 0;
    double alpha = 0.05;
    /// Test-only fault injection for DOUST submodels.
    TrainHooks doust_hooks;

    void validate() const;
};

/// Relative dataset paths resolve against `base_dir`.
BenchmarkProtocol protocol_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const BenchmarkProtocol& p);

enum class RunStatus { ok, dataset_excluded, failed };
std::string to_string(RunStatus s);
RunStatus run_status_from_string(const std::string& s);

struct RunRecord {
    std::string dataset;
    std::string algorithm;
    double nu = 0.0;
    std::uint64_t seed = 0;
    std::size_t rep = 0;
    std::optional<double> auc;
    double wall_time_s = 0.0;
    RunStatus status = RunStatus::ok;
    std::string reason;
    std::string config_hash;
};

nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);
/// One JSON object per line, appended in the given order.
void write_records_jsonl(std::ostream& out, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_records_jsonl(std::istream& in);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& text);

/// Runs one algorithm on a prepared split. Failures are captured in the record.
RunRecord run_algorithm(const std::string& dataset, Algorithm algorithm, const OneClassSplit& split,
                        const BenchmarkProtocol& protocol, std::size_t rep);

struct BenchmarkOutcome {
    std::vector<RunRecord> records;
    /// Datasets on which every algorithm was ok, in protocol order.
    std::vector<std::string> compared_datasets;
    Matrix mean_auc;  ///< compared datasets x algorithms, rep-averaged
    std::optional<stats::SignificanceReport> report;
};

/// Rep-averaged AUC table and significance analysis over the datasets on
/// which every algorithm succeeded.
BenchmarkOutcome summarize_records(std::vector<RunRecord> records, const std::vector<std::string>& algorithms,
                                   double alpha = 0.05);

BenchmarkOutcome run_benchmark(const BenchmarkProtocol& protocol, const std::vector<Dataset>& datasets,
                               kernels::Execution ex = kernels::Execution::parallel);
/// Loads every dataset named in the protocol first.
BenchmarkOutcome run_benchmark(const BenchmarkProtocol& protocol,
                               kernels::Execution ex = kernels::Execution::parallel);

struct SweepCell {
    std::string dataset;
    std::string algorithm;
    double nu = 0.0;
    std::optional<double> mean_auc;
    std::size_t ok_runs = 0;
    bool excluded = false;
};

struct SweepResult {
    std::vector<RunRecord> records;
    std::vector<SweepCell> cells;
};

/// One benchmark per nu with the minimum-outlier rule enforced.
SweepResult sweep_nu(const BenchmarkProtocol& protocol, const std::vector<Dataset>& datasets,
                     const std::vector<double>& grid, kernels::Execution ex = kernels::Execution::parallel);
void write_sweep_csv(std::ostream& out, const SweepResult& result);

struct CdfPoint {
    double score = 0.0;
    double cdf = 0.0;
};

/// Sorted scores with F = (i + 1) / n.
std::vector<CdfPoint> empirical_cdf(std::vector<double> scores);

struct ScoreGroup {
    std::string name;
    std::vector<double> scores;
};

/// CSV with columns group,score,cdf.
void emit_score_cdf(std::ostream& out, const std::vector<ScoreGroup>& groups);

}  // namespace doust
