#include "doust/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <random>

#include "doust/metrics.hpp"
#include "doust/random.hpp"
#include "doust/synthetic.hpp"

namespace doust {

namespace {

using json = nlohmann::json;

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

json split_to_json(const SplitSpec& s) {
    return {{"nu", s.nu},
            {"train_fraction", s.train_fraction},
            {"min_outliers", s.min_outliers},
            {"enforce_min_outliers", s.enforce_min_outliers}};
}

json algorithm_config_json(Algorithm a, const AlgorithmConfigs& c) {
    switch (a) {
        case Algorithm::doust: return to_json(c.doust);
        case Algorithm::knn: return {{"k", c.knn_k}};
        case Algorithm::iforest: return {{"trees", c.iforest.trees}, {"subsample", c.iforest.subsample}};
        case Algorithm::rf_supervised:
            return {{"trees", c.rf.trees}, {"bootstrap", c.rf.bootstrap}, {"folds", c.rf_folds}};
    }
    return {};
}

std::string config_hash(const std::string& dataset, Algorithm a, const BenchmarkProtocol& p, std::uint64_t seed) {
    const json j = {{"dataset", dataset},
                    {"algorithm", to_string(a)},
                    {"config", algorithm_config_json(a, p.configs)},
                    {"split", split_to_json(p.split)},
                    {"seed", seed}};
    return fnv1a_hex(j.dump());
}

RunRecord base_record(const std::string& dataset, Algorithm a, const BenchmarkProtocol& p, std::size_t rep) {
    RunRecord r;
    r.dataset = dataset;
    r.algorithm = to_string(a);
    r.nu = p.split.nu;
    r.seed = p.seed + rep;
    r.rep = rep;
    r.config_hash = config_hash(dataset, a, p, r.seed);
    return r;
}

}  // namespace

// ---- split -------------------------------------------------------------------

void SplitSpec::validate() const {
    if (!(nu > 0.0 && nu < 1.0)) throw ConfigError("split nu must lie in (0, 1)");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
}

OneClassSplit make_oneclass_split(const Dataset& data, const SplitSpec& spec) {
    spec.validate();
    std::vector<std::size_t> normals, outliers;
    for (std::size_t i = 0; i < data.rows(); ++i) (data.labels[i] == 1 ? outliers : normals).push_back(i);
    if (normals.size() < 2) throw DatasetError(data.name + ": at least 2 normal rows are required");
    if (outliers.empty()) throw DatasetError(data.name + ": at least 1 anomaly is required");

    std::mt19937_64 rng(derive_seed(spec.seed, Stream::split));
    std::shuffle(normals.begin(), normals.end(), rng);
    std::shuffle(outliers.begin(), outliers.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(normals.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, normals.size() - 1);

    std::vector<std::size_t> train_rows(normals.begin(), normals.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test_normals(normals.begin() + static_cast<std::ptrdiff_t>(n_train), normals.end());

    OneClassSplit split;
    const std::size_t keep = outliers_for_fraction(test_normals.size(), spec.nu);
    if (keep >= outliers.size()) {
        // Too few anomalies: shrink the normal side of the test set instead.
        const auto needed = static_cast<std::size_t>(
            std::floor(static_cast<double>(outliers.size()) * (1.0 - spec.nu) / spec.nu + 1e-9));
        const std::size_t kept_normals = std::clamp<std::size_t>(needed, 1, test_normals.size());
        split.removed_normals = test_normals.size() - kept_normals;
        test_normals.resize(kept_normals);
    } else if (keep == 0) {
        split.excluded = true;
        split.note = "target nu unreachable: no anomaly can remain";
        outliers.clear();
    } else {
        split.removed_outliers = outliers.size() - keep;
        outliers.resize(keep);
    }

    std::vector<std::size_t> test_rows = test_normals;
    test_rows.insert(test_rows.end(), outliers.begin(), outliers.end());
    std::sort(test_rows.begin(), test_rows.end());
    std::sort(train_rows.begin(), train_rows.end());

    split.train = data.subset(train_rows).features;
    const Dataset test = data.subset(test_rows);
    split.test = test.features;
    split.test_labels = test.labels;
    split.achieved_nu = test.anomaly_fraction();

    if (!split.excluded && outliers.size() < spec.min_outliers) {
        const std::string msg = "only " + std::to_string(outliers.size()) + " anomalies in the test set (minimum " +
                                std::to_string(spec.min_outliers) + ")";
        if (spec.enforce_min_outliers) {
            split.excluded = true;
            split.note = msg;
        } else {
            split.note = msg;
        }
    }
    return split;
}

// ---- protocol ----------------------------------------------------------------

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::doust: return "doust";
        case Algorithm::knn: return "knn";
        case Algorithm::iforest: return "iforest";
        case Algorithm::rf_supervised: return "rf_supervised";
    }
    return "unknown";
}

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "doust") return Algorithm::doust;
    if (s == "knn") return Algorithm::knn;
    if (s == "iforest") return Algorithm::iforest;
    if (s == "rf_supervised") return Algorithm::rf_supervised;
    throw ConfigError("unknown algorithm '" + s + "'");
}

void BenchmarkProtocol::validate() const {
    split.validate();
    if (algorithms.empty()) throw ConfigError("protocol lists no algorithms");
    if (reps < 1) throw ConfigError("reps must be at least 1");
    configs.doust.validate();
    if (configs.knn_k < 1) throw ConfigError("knn k must be at least 1");
    if (configs.rf_folds < 2) throw ConfigError("rf folds must be at least 2");
}

BenchmarkProtocol protocol_from_json(const json& j, const std::filesystem::path& base_dir) {
    BenchmarkProtocol p;
    try {
        for (const auto& d : j.value("datasets", json::array())) {
            DatasetSource src;
            if (d.is_string()) {
                src.path = d.get<std::string>();
            } else {
                src.path = d.at("path").get<std::string>();
                src.name = d.value("name", std::string());
            }
            if (src.path.is_relative() && !base_dir.empty()) src.path = base_dir / src.path;
            if (src.name.empty()) src.name = src.path.stem().string();
            p.datasets.push_back(std::move(src));
        }
        if (j.contains("split")) {
            const auto& s = j["split"];
            p.split.nu = s.value("nu", p.split.nu);
            p.split.train_fraction = s.value("train_fraction", p.split.train_fraction);
            p.split.min_outliers = s.value("min_outliers", p.split.min_outliers);
            p.split.enforce_min_outliers = s.value("enforce_min_outliers", p.split.enforce_min_outliers);
        }
        if (j.contains("algorithms")) {
            p.algorithms.clear();
            for (const auto& a : j["algorithms"]) p.algorithms.push_back(algorithm_from_string(a.get<std::string>()));
        }
        p.reps = j.value("reps", p.reps);
        p.seed = j.value("seed", p.seed);
        p.alpha = j.value("alpha", p.alpha);
        if (j.contains("configs")) {
            const auto& c = j["configs"];
            if (c.contains("doust")) p.configs.doust = doust_config_from_json(c["doust"]);
            if (c.contains("knn")) p.configs.knn_k = c["knn"].value("k", p.configs.knn_k);
            if (c.contains("iforest")) {
                p.configs.iforest.trees = c["iforest"].value("trees", p.configs.iforest.trees);
                p.configs.iforest.subsample = c["iforest"].value("subsample", p.configs.iforest.subsample);
            }
            if (c.contains("rf_supervised")) {
                p.configs.rf.trees = c["rf_supervised"].value("trees", p.configs.rf.trees);
                p.configs.rf.bootstrap = c["rf_supervised"].value("bootstrap", p.configs.rf.bootstrap);
                p.configs.rf_folds = c["rf_supervised"].value("folds", p.configs.rf_folds);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed benchmark config: ") + e.what());
    }
    p.validate();
    return p;
}

json to_json(const BenchmarkProtocol& p) {
    json datasets = json::array();
    for (const auto& d : p.datasets) datasets.push_back({{"name", d.name}, {"path", d.path.string()}});
    json algorithms = json::array();
    json configs = json::object();
    for (auto a : p.algorithms) {
        algorithms.push_back(to_string(a));
        configs[to_string(a)] = algorithm_config_json(a, p.configs);
    }
    return {{"datasets", datasets}, {"split", split_to_json(p.split)}, {"algorithms", algorithms},
            {"configs", configs},   {"reps", p.reps},                  {"seed", p.seed},
            {"alpha", p.alpha}};
}

// ---- records -----------------------------------------------------------------

std::string to_string(RunStatus s) {
    switch (s) {
        case RunStatus::ok: return "ok";
        case RunStatus::dataset_excluded: return "dataset_excluded";
        case RunStatus::failed: return "failed";
    }
    return "unknown";
}

RunStatus run_status_from_string(const std::string& s) {
    if (s == "ok") return RunStatus::ok;
    if (s == "dataset_excluded") return RunStatus::dataset_excluded;
    if (s == "failed") return RunStatus::failed;
    throw ConfigError("unknown run status '" + s + "'");
}

json to_json(const RunRecord& r) {
    return {{"dataset", r.dataset},
            {"algorithm", r.algorithm},
            {"nu", r.nu},
            {"seed", r.seed},
            {"rep", r.rep},
            {"auc", r.auc ? json(*r.auc) : json(nullptr)},
            {"wall_time_s", r.wall_time_s},
            {"status", to_string(r.status)},
            {"reason", r.reason},
            {"config_hash", r.config_hash}};
}

RunRecord run_record_from_json(const json& j) {
    RunRecord r;
    try {
        r.dataset = j.at("dataset").get<std::string>();
        r.algorithm = j.at("algorithm").get<std::string>();
        r.nu = j.at("nu").get<double>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.rep = j.value("rep", std::size_t{0});
        if (!j.at("auc").is_null()) r.auc = j["auc"].get<double>();
        r.wall_time_s = j.value("wall_time_s", 0.0);
        r.status = run_status_from_string(j.at("status").get<std::string>());
        r.reason = j.value("reason", std::string());
        r.config_hash = j.value("config_hash", std::string());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed run record: ") + e.what());
    }
    return r;
}

void write_records_jsonl(std::ostream& out, const std::vector<RunRecord>& records) {
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<RunRecord> read_records_jsonl(std::istream& in) {
    std::vector<RunRecord> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(run_record_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw ConfigError("records line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---- running -------------------------------------------------------------------

RunRecord run_algorithm(const std::string& dataset, Algorithm algorithm, const OneClassSplit& split,
                        const BenchmarkProtocol& protocol, std::size_t rep) {
    RunRecord rec = base_record(dataset, algorithm, protocol, rep);
    rec.nu = split.achieved_nu;
    if (split.excluded) {
        rec.status = RunStatus::dataset_excluded;
        rec.reason = split.note;
        return rec;
    }
    const auto start = std::chrono::steady_clock::now();
    try {
        Vector scores;
        switch (algorithm) {
            case Algorithm::doust: {
                DoustConfig cfg = protocol.configs.doust;
                cfg.seed = rec.seed;
                const auto model = train_ensemble(split.train, split.test, cfg, protocol.doust_hooks);
                scores = model.score(split.test);
                break;
            }
            case Algorithm::knn: {
                const auto scaler = FeatureScaler::fit(split.train);
                scores = baselines::KnnModel(scaler.transform(split.train), protocol.configs.knn_k)
                             .score(scaler.transform(split.test));
                break;
            }
            case Algorithm::iforest: {
                auto opts = protocol.configs.iforest;
                opts.seed = rec.seed;
                scores = baselines::IsolationForestModel::fit(split.train, opts).score(split.test);
                break;
            }
            case Algorithm::rf_supervised: {
                auto opts = protocol.configs.rf;
                opts.seed = rec.seed;
                scores = baselines::rf_fit_predict_cv(split.test, split.test_labels,
                                                      {protocol.configs.rf_folds, rec.seed}, opts);
                break;
            }
        }
        rec.auc = metrics::roc_auc(metrics::ScoredSet{to_std(scores), split.test_labels});
    } catch (const EnsembleFailure& e) {
        rec.status = RunStatus::dataset_excluded;
        // Distinct causes only; a 100-member ensemble usually fails one way.
        std::vector<std::string> causes = e.reasons();
        std::sort(causes.begin(), causes.end());
        causes.erase(std::unique(causes.begin(), causes.end()), causes.end());
        rec.reason = std::string(e.what()) + " (" + std::to_string(e.reasons().size()) + " submodels)";
        for (const auto& r : causes) rec.reason += "; " + r;
    } catch (const std::exception& e) {
        rec.status = RunStatus::failed;
        rec.reason = e.what();
    }
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

BenchmarkOutcome summarize_records(std::vector<RunRecord> records, const std::vector<std::string>& algorithms,
                                   double alpha) {
    BenchmarkOutcome out;
    std::vector<std::string> order;
    for (const auto& r : records) {
        if (std::find(order.begin(), order.end(), r.dataset) == order.end()) order.push_back(r.dataset);
    }
    std::vector<std::vector<double>> rows;
    for (const auto& d : order) {
        std::vector<double> row;
        bool all_ok = true;
        for (const auto& a : algorithms) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& r : records) {
                if (r.dataset != d || r.algorithm != a) continue;
                if (r.status != RunStatus::ok || !r.auc) all_ok = false;
                else {
                    sum += *r.auc;
                    ++n;
                }
            }
            if (n == 0) all_ok = false;
            row.push_back(n ? sum / static_cast<double>(n) : 0.0);
        }
        if (all_ok) {
            out.compared_datasets.push_back(d);
            rows.push_back(std::move(row));
        }
    }
    out.mean_auc.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(algorithms.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < algorithms.size(); ++j) {
            out.mean_auc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    if (rows.size() >= 2 && algorithms.size() >= 2) out.report = stats::wilcoxon_holm(out.mean_auc, algorithms, alpha);
    out.records = std::move(records);
    return out;
}

BenchmarkOutcome run_benchmark(const BenchmarkProtocol& protocol, const std::vector<Dataset>& datasets,
                               kernels::Execution ex) {
    protocol.validate();
    const std::size_t jobs = datasets.size() * protocol.reps;
    std::vector<std::vector<RunRecord>> per_job(jobs);
    kernels::for_each_index(jobs, ex, [&](std::size_t job) {
        const auto& data = datasets[job / protocol.reps];
        const std::size_t rep = job % protocol.reps;
        SplitSpec spec = protocol.split;
        spec.seed = protocol.seed + rep;
        OneClassSplit split;
        std::string split_error;
        try {
            split = make_oneclass_split(data, spec);
        } catch (const std::exception& e) {
            split_error = e.what();
        }
        if (split_error.empty() && !split.excluded && !split.note.empty()) {
            std::cerr << "warning: " << data.name << ": " << split.note << '\n';
        }
        for (auto a : protocol.algorithms) {
            if (!split_error.empty()) {
                RunRecord r = base_record(data.name, a, protocol, rep);
                r.status = RunStatus::failed;
                r.reason = split_error;
                per_job[job].push_back(std::move(r));
            } else {
                per_job[job].push_back(run_algorithm(data.name, a, split, protocol, rep));
            }
        }
    });
    std::vector<RunRecord> records;
    for (auto& v : per_job) {
        for (auto& r : v) records.push_back(std::move(r));
    }
    std::vector<std::string> names;
    for (auto a : protocol.algorithms) names.push_back(to_string(a));
    return summarize_records(std::move(records), names, protocol.alpha);
}

BenchmarkOutcome run_benchmark(const BenchmarkProtocol& protocol, kernels::Execution ex) {
    std::vector<Dataset> loaded;
    std::vector<RunRecord> load_failures;
    for (const auto& src : protocol.datasets) {
        try {
            Dataset d = load_dataset(src.path);
            d.name = src.name;
            loaded.push_back(std::move(d));
        } catch (const std::exception& e) {
            for (std::size_t rep = 0; rep < protocol.reps; ++rep) {
                for (auto a : protocol.algorithms) {
                    RunRecord r = base_record(src.name, a, protocol, rep);
                    r.status = RunStatus::failed;
                    r.reason = e.what();
                    load_failures.push_back(std::move(r));
                }
            }
        }
    }
    auto outcome = run_benchmark(protocol, loaded, ex);
    if (load_failures.empty()) return outcome;
    auto records = std::move(outcome.records);
    records.insert(records.end(), load_failures.begin(), load_failures.end());
    std::vector<std::string> names;
    for (auto a : protocol.algorithms) names.push_back(to_string(a));
    return summarize_records(std::move(records), names, protocol.alpha);
}

SweepResult sweep_nu(const BenchmarkProtocol& protocol, const std::vector<Dataset>& datasets,
                     const std::vector<double>& grid, kernels::Execution ex) {
    SweepResult res;
    for (double nu : grid) {
        BenchmarkProtocol p = protocol;
        p.split.nu = nu;
        p.split.enforce_min_outliers = true;
        const auto outcome = run_benchmark(p, datasets, ex);
        for (const auto& d : datasets) {
            for (auto a : p.algorithms) {
                SweepCell cell;
                cell.dataset = d.name;
                cell.algorithm = to_string(a);
                cell.nu = nu;
                double sum = 0.0;
                for (const auto& r : outcome.records) {
                    if (r.dataset != d.name || r.algorithm != cell.algorithm) continue;
                    if (r.status == RunStatus::ok && r.auc) {
                        sum += *r.auc;
                        ++cell.ok_runs;
                    } else if (r.status == RunStatus::dataset_excluded) {
                        cell.excluded = true;
                    }
                }
                if (cell.ok_runs > 0) cell.mean_auc = sum / static_cast<double>(cell.ok_runs);
                res.cells.push_back(std::move(cell));
            }
        }
        res.records.insert(res.records.end(), outcome.records.begin(), outcome.records.end());
    }
    return res;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
    const auto old = out.precision(std::numeric_limits<double>::max_digits10);
    out << "dataset,algorithm,nu,mean_auc,ok_runs,excluded\n";
    for (const auto& c : result.cells) {
        out << c.dataset << ',' << c.algorithm << ',' << c.nu << ',';
        if (c.mean_auc) out << *c.mean_auc;
        out << ',' << c.ok_runs << ',' << (c.excluded ? 1 : 0) << '\n';
    }
    out.precision(old);
}

// ---- score CDFs -------------------------------------------------------------------

std::vector<CdfPoint> empirical_cdf(std::vector<double> scores) {
    std::sort(scores.begin(), scores.end());
    std::vector<CdfPoint> out(scores.size());
    const auto n = static_cast<double>(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = {scores[i], static_cast<double>(i + 1) / n};
    return out;
}

void emit_score_cdf(std::ostream& out, const std::vector<ScoreGroup>& groups) {
    const auto old = out.precision(std::numeric_limits<double>::max_digits10);
    out << "group,score,cdf\n";
    for (const auto& g : groups) {
        for (const auto& p : empirical_cdf(g.scores)) out << g.name << ',' << p.score << ',' << p.cdf << '\n';
    }
    out.precision(old);
}

}  // namespace doust
