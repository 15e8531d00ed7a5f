// doust: command-line front end for benchmarks, simulations and reports.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "doust/dataset.hpp"
#include "doust/ensemble.hpp"
#include "doust/harness.hpp"
#include "doust/stats.hpp"
#include "doust/synthetic.hpp"

namespace {

using json = nlohmann::json;

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw doust::ConfigError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw doust::ConfigError(path + ": " + e.what());
    }
}

// Writes to `path`, or stdout when it is empty or "-".
template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
    if (path.empty() || path == "-") {
        fn(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw doust::ConfigError("cannot write " + path);
    fn(out);
}

doust::BenchmarkProtocol load_protocol(const std::string& path) {
    const std::filesystem::path p(path);
    return doust::protocol_from_json(read_json_file(path), p.parent_path());
}

int exit_code(const std::vector<doust::RunRecord>& records) {
    for (const auto& r : records) {
        if (r.status == doust::RunStatus::failed) return 1;
    }
    return 0;
}

void print_table(const doust::BenchmarkOutcome& outcome, const std::vector<std::string>& algorithms) {
    std::cerr << "dataset";
    for (const auto& a : algorithms) std::cerr << '\t' << a;
    std::cerr << '\n';
    for (std::size_t i = 0; i < outcome.compared_datasets.size(); ++i) {
        std::cerr << outcome.compared_datasets[i];
        for (std::size_t j = 0; j < algorithms.size(); ++j) {
            std::cerr << '\t' << outcome.mean_auc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        std::cerr << '\n';
    }
}

std::vector<std::string> algorithm_names(const doust::BenchmarkProtocol& p) {
    std::vector<std::string> names;
    for (auto a : p.algorithms) names.push_back(doust::to_string(a));
    return names;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DOUST test-time-training outlier detection"};
    app.require_subcommand(1);

    // ---- bench ----
    auto* bench = app.add_subcommand("bench", "Run benchmark protocols");
    bench->require_subcommand(1);

    std::string config_path, records_out, report_out;
    std::uint64_t seed = 0;
    auto* run = bench->add_subcommand("run", "Score every algorithm on every dataset");
    run->add_option("--config", config_path, "Benchmark protocol (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--out", records_out, "Run records (JSON lines); default stdout");
    run->add_option("--report", report_out, "Significance report (JSON)");
    auto* run_seed = run->add_option("--seed", seed, "Base seed; overrides the config");

    std::vector<double> nu_grid;
    std::string sweep_csv;
    auto* sweep = bench->add_subcommand("sweep-nu", "Repeat the benchmark over a grid of anomaly fractions");
    sweep->add_option("--config", config_path, "Benchmark protocol (JSON)")->required()->check(CLI::ExistingFile);
    sweep->add_option("--grid", nu_grid, "Anomaly fractions")->required()->delimiter(',');
    sweep->add_option("--out", sweep_csv, "Sweep table (CSV); default stdout");
    sweep->add_option("--records", records_out, "Run records (JSON lines)");
    auto* sweep_seed = sweep->add_option("--seed", seed, "Base seed; overrides the config");

    // ---- simulate ----
    auto* simulate = app.add_subcommand("simulate", "Synthetic experiments");
    simulate->require_subcommand(1);

    std::vector<std::size_t> thought_n{500, 1000, 10000, 100000, 1000000};
    doust::ThoughtConfig thought;
    std::string sim_out;
    auto* th = simulate->add_subcommand("thought", "One-dimensional side-choice experiment");
    th->add_option("--N", thought_n, "Normal sample counts")->delimiter(',');
    th->add_option("--O", thought.O, "Outlier count")->capture_default_str();
    th->add_option("--f", thought.f, "Tail fraction beyond each threshold")->capture_default_str();
    th->add_option("--reps", thought.reps, "Repetitions per N")->capture_default_str();
    th->add_flag("--symmetric", thought.symmetric_outliers, "Place outliers beyond both thresholds");
    th->add_option("--seed", thought.seed, "Base seed");
    th->add_option("--out", sim_out, "Per-trial CSV; default stdout");

    doust::GaussianSpec gauss;
    std::vector<std::size_t> n_grid{1000, 10000, 100000};
    std::string method = "doust", averaging = "metric", doust_config_path;
    auto* ga = simulate->add_subcommand("gaussian", "Shifted-Gaussian study");
    ga->add_option("--n-grid", n_grid, "Training set sizes")->delimiter(',');
    ga->add_option("--nu", gauss.nu, "Test anomaly fraction")->capture_default_str();
    ga->add_option("--reps", gauss.reps, "Repetitions")->capture_default_str();
    ga->add_option("--dims", gauss.dims, "Dimensions")->capture_default_str();
    ga->add_option("--method", method, "doust | supervised_oracle | bayes_oracle")->capture_default_str();
    ga->add_option("--averaging", averaging, "metric | prediction")->capture_default_str();
    ga->add_option("--doust-config", doust_config_path, "DOUST configuration (JSON)")->check(CLI::ExistingFile);
    ga->add_option("--seed", gauss.seed, "Base seed");
    ga->add_option("--out", sim_out, "Summary CSV; default stdout");

    // ---- stats ----
    auto* stats_cmd = app.add_subcommand("stats", "Statistical analysis");
    stats_cmd->require_subcommand(1);
    std::string records_in;
    double alpha = 0.05;
    auto* report = stats_cmd->add_subcommand("report", "Friedman and Holm-corrected signed-rank tests");
    report->add_option("--records", records_in, "Run records (JSON lines)")->required()->check(CLI::ExistingFile);
    report->add_option("--alpha", alpha, "Significance level")->capture_default_str();
    report->add_option("--out", report_out, "Report (JSON); default stdout");
    report->add_option("--seed", seed, "Unused; accepted for uniformity");

    // ---- emit ----
    auto* emit = app.add_subcommand("emit", "Plot data");
    emit->require_subcommand(1);
    std::string model_path, cdf_out;
    std::vector<std::string> data_paths;
    auto* cdf = emit->add_subcommand("cdf", "Empirical score CDFs per data file");
    cdf->add_option("--model", model_path, "Trained ensemble (JSON)")->required()->check(CLI::ExistingFile);
    cdf->add_option("--data", data_paths, "Dataset CSVs, one group each")->required()->check(CLI::ExistingFile);
    cdf->add_option("--out", cdf_out, "CSV; default stdout");
    cdf->add_option("--seed", seed, "Unused; accepted for uniformity");

    // ---- train ----
    std::string data_path, model_out, split_dir;
    doust::SplitSpec split_spec;
    auto* train = app.add_subcommand("train", "Split a dataset and train a DOUST ensemble on it");
    train->add_option("--data", data_path, "Dataset CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--config", doust_config_path, "DOUST configuration (JSON)")->check(CLI::ExistingFile);
    train->add_option("--nu", split_spec.nu, "Test anomaly fraction")->capture_default_str();
    train->add_option("--model", model_out, "Output model (JSON)")->required();
    train->add_option("--split-dir", split_dir, "Directory for train.csv and test.csv");
    train->add_option("--seed", split_spec.seed, "Seed for split and training");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            auto protocol = load_protocol(config_path);
            if (run_seed->count()) protocol.seed = seed;
            const auto outcome = doust::run_benchmark(protocol);
            with_output(records_out, [&](std::ostream& o) { doust::write_records_jsonl(o, outcome.records); });
            print_table(outcome, algorithm_names(protocol));
            if (!report_out.empty()) {
                const json j = outcome.report ? doust::stats::to_json(*outcome.report) : json(nullptr);
                with_output(report_out, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
            }
            return exit_code(outcome.records);
        }
        if (sweep->parsed()) {
            auto protocol = load_protocol(config_path);
            if (sweep_seed->count()) protocol.seed = seed;
            std::vector<doust::Dataset> datasets;
            for (const auto& src : protocol.datasets) {
                auto d = doust::load_dataset(src.path);
                d.name = src.name;
                datasets.push_back(std::move(d));
            }
            const auto result = doust::sweep_nu(protocol, datasets, nu_grid);
            with_output(sweep_csv, [&](std::ostream& o) { doust::write_sweep_csv(o, result); });
            if (!records_out.empty()) {
                with_output(records_out, [&](std::ostream& o) { doust::write_records_jsonl(o, result.records); });
            }
            return exit_code(result.records);
        }
        if (th->parsed()) {
            with_output(sim_out, [&](std::ostream& o) {
                o << "N,O,repetition,method,auc,chosen_side,mistakes\n";
                o.precision(std::numeric_limits<double>::max_digits10);
                for (auto n : thought_n) {
                    doust::ThoughtConfig cfg = thought;
                    cfg.N = n;
                    const auto s = doust::thought_sweep(cfg);
                    for (std::size_t r = 0; r < s.trials.size(); ++r) {
                        const auto& t = s.trials[r];
                        const char* side = t.chose_right ? "right" : "left";
                        o << n << ',' << cfg.O << ',' << r << ",one_sided," << t.auc_one_sided << ',' << side << ','
                          << t.mistakes_one_sided << '\n';
                        o << n << ',' << cfg.O << ',' << r << ",two_sided," << t.auc_two_sided << ',' << side << ','
                          << t.mistakes_two_sided << '\n';
                    }
                    std::cerr << "N=" << n << " p_right=" << s.p_right << " auc_one=" << s.mean_auc_one_sided
                              << " auc_two=" << s.mean_auc_two_sided << " mistakes_one=" << s.mean_mistakes_one_sided
                              << " mistakes_two=" << s.mean_mistakes_two_sided << '\n';
                }
            });
            return 0;
        }
        if (ga->parsed()) {
            const auto m = doust::gaussian_method_from_string(method);
            if (averaging == "metric") gauss.averaging = doust::Averaging::metric;
            else if (averaging == "prediction") gauss.averaging = doust::Averaging::prediction;
            else throw doust::ConfigError("unknown averaging '" + averaging + "'");
            doust::DoustConfig cfg;
            if (!doust_config_path.empty()) cfg = doust::doust_config_from_json(read_json_file(doust_config_path));
            with_output(sim_out, [&](std::ostream& o) {
                o << "N,nu,method,mean_auc,stderr,reps_ok,reps_failed\n";
                o.precision(std::numeric_limits<double>::max_digits10);
                for (auto n : n_grid) {
                    doust::GaussianSpec spec = gauss;
                    spec.n_train = n;
                    const auto r = doust::gaussian_experiment(spec, m, cfg);
                    o << n << ',' << spec.nu << ',' << method << ',' << r.mean_auc << ',' << r.stderr_auc << ','
                      << r.aucs.size() << ',' << r.failed << '\n';
                }
            });
            return 0;
        }
        if (report->parsed()) {
            std::ifstream in(records_in);
            const auto records = doust::read_records_jsonl(in);
            std::vector<std::string> algorithms;
            for (const auto& r : records) {
                if (std::find(algorithms.begin(), algorithms.end(), r.algorithm) == algorithms.end()) {
                    algorithms.push_back(r.algorithm);
                }
            }
            const auto outcome = doust::summarize_records(records, algorithms, alpha);
            json j = outcome.report ? doust::stats::to_json(*outcome.report) : json{{"algorithms", algorithms}};
            j["compared_datasets"] = outcome.compared_datasets;
            with_output(report_out, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
            return exit_code(records);
        }
        if (cdf->parsed()) {
            const auto model = doust::ensemble_from_json(read_json_file(model_path));
            std::vector<doust::ScoreGroup> groups;
            for (const auto& p : data_paths) {
                const auto d = doust::load_dataset(p);
                const doust::Vector s = model.score(d.features);
                groups.push_back({d.name, {s.data(), s.data() + s.size()}});
            }
            with_output(cdf_out, [&](std::ostream& o) { doust::emit_score_cdf(o, groups); });
            return 0;
        }
        if (train->parsed()) {
            const auto data = doust::load_dataset(data_path);
            doust::DoustConfig cfg;
            if (!doust_config_path.empty()) cfg = doust::doust_config_from_json(read_json_file(doust_config_path));
            cfg.seed = split_spec.seed;
            const auto split = doust::make_oneclass_split(data, split_spec);
            if (!split.note.empty()) std::cerr << "warning: " << split.note << '\n';
            const auto model = doust::train_ensemble(split.train, split.test, cfg);
            with_output(model_out, [&](std::ostream& o) { o << doust::to_json(model).dump() << '\n'; });
            if (!split_dir.empty()) {
                std::filesystem::create_directories(split_dir);
                doust::Dataset tr{"train", data.feature_names, split.train,
                                  std::vector<int>(static_cast<std::size_t>(split.train.rows()), 0)};
                doust::Dataset te{"test", data.feature_names, split.test, split.test_labels};
                doust::save_dataset(std::filesystem::path(split_dir) / "train.csv", tr);
                doust::save_dataset(std::filesystem::path(split_dir) / "test.csv", te);
            }
            std::cerr << "trained " << model.ok_count() << '/' << model.submodels().size() << " submodels\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
