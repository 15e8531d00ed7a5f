#include "doust/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "doust/baselines.hpp"
#include "doust/metrics.hpp"
#include "doust/random.hpp"

namespace doust {

namespace {

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

void fill_gaussian_rows(Matrix& out, Eigen::Index first, Eigen::Index count, const Vector& mu, const Vector& sd,
                        std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    for (Eigen::Index r = first; r < first + count; ++r) {
        for (Eigen::Index c = 0; c < mu.size(); ++c) out(r, c) = mu[c] + sd[c] * z(rng);
    }
}

}  // namespace

// ---- thought experiment ------------------------------------------------------

double ThoughtConfig::threshold() const {
    const boost::math::normal stdnorm;
    return boost::math::quantile(boost::math::complement(stdnorm, f));
}

void ThoughtConfig::validate() const {
    if (O < 1) throw ConfigError("thought experiment needs at least one outlier");
    if (N < 1) throw ConfigError("thought experiment needs at least one normal sample");
    if (!(f > 0.0 && f < 0.5)) throw ConfigError("tail fraction f must lie in (0, 0.5)");
    if (!(outlier_sd >= 0.0)) throw ConfigError("outlier sd must be non-negative");
}

ThoughtTrial thought_trial(const ThoughtConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const double t = cfg.threshold();
    std::mt19937_64 rng(derive_seed(seed, Stream::data));
    std::normal_distribution<double> z(0.0, 1.0);
    std::normal_distribution<double> bump(t + cfg.outlier_offset, cfg.outlier_sd);

    std::vector<double> normals(cfg.N);
    for (auto& x : normals) x = z(rng);
    std::vector<double> outliers(cfg.O);
    for (std::size_t i = 0; i < cfg.O; ++i) {
        const double x = bump(rng);
        outliers[i] = cfg.symmetric_outliers && (i % 2 == 1) ? -x : x;
    }

    ThoughtTrial trial;
    for (const auto* group : {&normals, &outliers}) {
        for (double x : *group) {
            trial.beyond_right += x > t ? 1 : 0;
            trial.beyond_left += x < -t ? 1 : 0;
        }
    }
    if (trial.beyond_right != trial.beyond_left) {
        trial.chose_right = trial.beyond_right > trial.beyond_left;
    } else {
        std::bernoulli_distribution coin(0.5);
        trial.chose_right = coin(rng);
    }
    const double sign = trial.chose_right ? 1.0 : -1.0;

    std::vector<double> one_n(cfg.N), two_n(cfg.N), one_o(cfg.O), two_o(cfg.O);
    for (std::size_t i = 0; i < cfg.N; ++i) {
        one_n[i] = sign * normals[i];
        two_n[i] = std::abs(normals[i]);
        trial.mistakes_one_sided += one_n[i] > t ? 1 : 0;
        trial.mistakes_two_sided += two_n[i] > t ? 1 : 0;
    }
    for (std::size_t i = 0; i < cfg.O; ++i) {
        one_o[i] = sign * outliers[i];
        two_o[i] = std::abs(outliers[i]);
        trial.mistakes_one_sided += one_o[i] > t ? 0 : 1;
        trial.mistakes_two_sided += two_o[i] > t ? 0 : 1;
    }
    trial.auc_one_sided = metrics::roc_auc(one_n, one_o);
    trial.auc_two_sided = metrics::roc_auc(two_n, two_o);
    return trial;
}

ThoughtSummary thought_sweep(const ThoughtConfig& cfg, kernels::Execution ex) {
    cfg.validate();
    ThoughtSummary s;
    s.N = cfg.N;
    s.O = cfg.O;
    s.f = cfg.f;
    s.trials.resize(cfg.reps);
    kernels::for_each_index(cfg.reps, ex, [&](std::size_t rep) { s.trials[rep] = thought_trial(cfg, cfg.seed + rep); });
    if (cfg.reps == 0) return s;
    for (const auto& t : s.trials) {
        s.p_right += t.chose_right ? 1.0 : 0.0;
        s.mean_auc_one_sided += t.auc_one_sided;
        s.mean_auc_two_sided += t.auc_two_sided;
        s.mean_mistakes_one_sided += static_cast<double>(t.mistakes_one_sided);
        s.mean_mistakes_two_sided += static_cast<double>(t.mistakes_two_sided);
    }
    const auto n = static_cast<double>(cfg.reps);
    s.p_right /= n;
    s.mean_auc_one_sided /= n;
    s.mean_auc_two_sided /= n;
    s.mean_mistakes_one_sided /= n;
    s.mean_mistakes_two_sided /= n;
    return s;
}

double guessing_mistake_bound(std::size_t O, double f) {
    if (!(f > 0.0)) throw DomainError("f must be positive");
    return static_cast<double>(O) / (2.0 * f);
}

ConditionMargin condition_margin(double N, double O, double f) {
    if (!(N > 0.0) || !(O >= 0.0) || !(f > 0.0 && f < 1.0)) throw DomainError("condition margin needs N > 0, O >= 0, f in (0,1)");
    ConditionMargin m;
    m.margin = O / std::sqrt(N * f * (1.0 - f));
    m.nu = O / (N + O);
    m.rule_of_thumb_n = m.nu > 0.0 ? 1.0 / (m.nu * m.nu) : std::numeric_limits<double>::infinity();
    return m;
}

// ---- Gaussian study ------------------------------------------------------------

std::string to_string(GaussianMethod m) {
    switch (m) {
        case GaussianMethod::doust: return "doust";
        case GaussianMethod::supervised_oracle: return "supervised_oracle";
        case GaussianMethod::bayes_oracle: return "bayes_oracle";
    }
    return "unknown";
}

GaussianMethod gaussian_method_from_string(const std::string& s) {
    if (s == "doust") return GaussianMethod::doust;
    if (s == "supervised_oracle") return GaussianMethod::supervised_oracle;
    if (s == "bayes_oracle") return GaussianMethod::bayes_oracle;
    throw ConfigError("unknown Gaussian method '" + s + "'");
}

Vector GaussianSpec::mu_normal() const {
    return normal_mean.size() ? normal_mean : Vector::Zero(static_cast<Eigen::Index>(dims));
}

Vector GaussianSpec::mu_abnormal() const {
    return abnormal_mean.size() ? abnormal_mean : Vector::Ones(static_cast<Eigen::Index>(dims));
}

Vector GaussianSpec::sd() const {
    return sigma.size() ? sigma : Vector::Ones(static_cast<Eigen::Index>(dims));
}

std::size_t GaussianSpec::test_normals() const {
    return static_cast<std::size_t>(std::llround((1.0 - nu) * static_cast<double>(n_train)));
}

std::size_t GaussianSpec::test_anomalies() const {
    return static_cast<std::size_t>(std::llround(nu * static_cast<double>(n_train)));
}

void GaussianSpec::validate() const {
    if (dims < 1) throw ConfigError("dims must be at least 1");
    if (!(nu > 0.0 && nu < 1.0)) throw ConfigError("nu must lie in (0, 1)");
    const auto d = static_cast<Eigen::Index>(dims);
    if ((normal_mean.size() && normal_mean.size() != d) || (abnormal_mean.size() && abnormal_mean.size() != d) ||
        (sigma.size() && sigma.size() != d)) {
        throw ConfigError("mean and sigma vectors must have length dims");
    }
    if ((sd().array() <= 0.0).any()) throw ConfigError("sigma must be positive");
    if (n_train < 1 || test_normals() < 1 || test_anomalies() < 1) {
        throw ConfigError("N too small for nu: test set needs both classes");
    }
}

double bayes_auc_closed_form(const GaussianSpec& spec) {
    spec.validate();
    const Vector d = ((spec.mu_abnormal() - spec.mu_normal()).array() / spec.sd().array()).matrix();
    const boost::math::normal stdnorm;
    return boost::math::cdf(stdnorm, d.norm() / std::sqrt(2.0));
}

GaussianDraw draw_gaussian(const GaussianSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(derive_seed(seed, Stream::data));
    const auto d = static_cast<Eigen::Index>(spec.dims);
    const auto n = static_cast<Eigen::Index>(spec.n_train);
    const auto tn = static_cast<Eigen::Index>(spec.test_normals());
    const auto ta = static_cast<Eigen::Index>(spec.test_anomalies());
    GaussianDraw draw;
    draw.train.resize(n, d);
    fill_gaussian_rows(draw.train, 0, n, spec.mu_normal(), spec.sd(), rng);
    draw.test.resize(tn + ta, d);
    fill_gaussian_rows(draw.test, 0, tn, spec.mu_normal(), spec.sd(), rng);
    fill_gaussian_rows(draw.test, tn, ta, spec.mu_abnormal(), spec.sd(), rng);
    draw.test_labels.assign(static_cast<std::size_t>(tn), 0);
    draw.test_labels.resize(static_cast<std::size_t>(tn + ta), 1);
    return draw;
}

namespace {

Vector bayes_scores(const GaussianSpec& spec, const Matrix& x) {
    const Vector w = ((spec.mu_abnormal() - spec.mu_normal()).array() / spec.sd().array().square()).matrix();
    return x * w;
}

Vector method_scores(const GaussianSpec& spec, GaussianMethod method, const DoustConfig& doust_cfg,
                     const GaussianDraw& draw, std::uint64_t seed) {
    switch (method) {
        case GaussianMethod::bayes_oracle: return bayes_scores(spec, draw.test);
        case GaussianMethod::doust: {
            DoustConfig cfg = doust_cfg;
            cfg.ensemble_size = 1;
            cfg.seed = seed;
            const auto model = train_ensemble(draw.train, draw.test, cfg, {}, kernels::Execution::serial);
            return model.score(draw.test, kernels::Execution::serial);
        }
        case GaussianMethod::supervised_oracle: {
            // Labelled reference draw with the test composition, independent of the test set.
            const auto labelled = draw_gaussian(spec, seed ^ 0x5eed5eedULL);
            baselines::RandomForestOptions rf;
            rf.seed = seed;
            const auto forest = baselines::RandomForestModel::fit(labelled.test, labelled.test_labels, rf,
                                                                  kernels::Execution::serial);
            return forest.predict_proba(draw.test);
        }
    }
    throw ConfigError("unknown Gaussian method");
}

}  // namespace

GaussianResult gaussian_experiment(const GaussianSpec& spec, GaussianMethod method, const DoustConfig& doust_cfg,
                                   kernels::Execution ex) {
    spec.validate();
    if (spec.reps < 1) throw ConfigError("at least one repetition is required");
    GaussianResult res;
    res.method = method;
    res.n_train = spec.n_train;
    res.nu = spec.nu;

    std::vector<Vector> scores(spec.reps);
    std::vector<std::string> errors(spec.reps);
    std::vector<GaussianDraw> draws(spec.averaging == Averaging::metric ? 0 : 1);
    if (spec.averaging == Averaging::prediction) draws[0] = draw_gaussian(spec, spec.seed);

    std::vector<double> aucs(spec.reps, std::numeric_limits<double>::quiet_NaN());
    kernels::for_each_index(spec.reps, ex, [&](std::size_t rep) {
        const std::uint64_t seed = spec.seed + rep;
        try {
            if (spec.averaging == Averaging::metric) {
                const auto draw = draw_gaussian(spec, seed);
                const Vector s = method_scores(spec, method, doust_cfg, draw, seed);
                aucs[rep] = metrics::roc_auc({std::vector<double>(s.data(), s.data() + s.size()), draw.test_labels});
            } else {
                // Fresh training normals per repetition, shared test set.
                GaussianDraw draw = draw_gaussian(spec, seed);
                draw.test = draws[0].test;
                draw.test_labels = draws[0].test_labels;
                scores[rep] = method_scores(spec, method, doust_cfg, draw, seed);
            }
        } catch (const std::exception& e) {
            errors[rep] = e.what();
        }
    });

    for (std::size_t rep = 0; rep < spec.reps; ++rep) {
        if (!errors[rep].empty()) {
            ++res.failed;
            res.failures.push_back("rep " + std::to_string(rep) + ": " + errors[rep]);
            std::cerr << "warning: Gaussian repetition " << rep << " failed: " << errors[rep] << '\n';
        }
    }
    if (spec.averaging == Averaging::metric) {
        for (double a : aucs) {
            if (!std::isnan(a)) res.aucs.push_back(a);
        }
        res.mean_auc = mean_of(res.aucs);
        res.stderr_auc = stderr_of(res.aucs);
    } else {
        Vector acc = Vector::Zero(static_cast<Eigen::Index>(draws[0].test_labels.size()));
        std::size_t used = 0;
        for (std::size_t rep = 0; rep < spec.reps; ++rep) {
            if (errors[rep].empty()) {
                acc += scores[rep];
                ++used;
            }
        }
        if (used > 0) {
            acc /= static_cast<double>(used);
            res.mean_auc = metrics::roc_auc({std::vector<double>(acc.data(), acc.data() + acc.size()), draws[0].test_labels});
            res.aucs.push_back(res.mean_auc);
        }
    }
    if (res.aucs.empty()) throw Error("every Gaussian repetition failed");
    return res;
}

// ---- downsampling ----------------------------------------------------------------

void DownsampleSpec::validate() const {
    if (!(target_nu > 0.0 && target_nu < 1.0)) throw ConfigError("target nu must lie in (0, 1)");
}

std::size_t outliers_for_fraction(std::size_t normals, double nu) {
    // The small slack keeps exact ratios such as 0.5 from flooring one short.
    return static_cast<std::size_t>(std::floor(nu * static_cast<double>(normals) / (1.0 - nu) + 1e-9));
}

DownsampleResult nu_downsample(const Dataset& data, const DownsampleSpec& spec) {
    spec.validate();
    const std::size_t normals = data.count(0);
    const std::size_t outliers = data.count(1);
    if (outliers == 0) throw DatasetError(data.name + ": no labelled outliers to downsample");

    DownsampleResult res;
    const std::size_t keep = outliers_for_fraction(normals, spec.target_nu);
    if (keep >= outliers) {
        res.data = data;
        res.achieved_nu = data.anomaly_fraction();
        if (res.achieved_nu < spec.target_nu - 1e-12) {
            res.unreachable = true;
            res.note = "anomaly fraction already below target";
            std::cerr << "warning: " << data.name << ": anomaly fraction " << res.achieved_nu << " below target "
                      << spec.target_nu << ", left unchanged\n";
        }
    } else {
        std::vector<std::size_t> outlier_rows;
        for (std::size_t i = 0; i < data.rows(); ++i) {
            if (data.labels[i] == 1) outlier_rows.push_back(i);
        }
        std::mt19937_64 rng(derive_seed(spec.seed, Stream::split));
        std::shuffle(outlier_rows.begin(), outlier_rows.end(), rng);
        std::vector<bool> drop(data.rows(), false);
        for (std::size_t i = keep; i < outlier_rows.size(); ++i) drop[outlier_rows[i]] = true;
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < data.rows(); ++i) {
            if (!drop[i]) rows.push_back(i);
        }
        res.data = data.subset(rows);
        res.removed = outliers - keep;
        res.achieved_nu = res.data.anomaly_fraction();
    }
    if (res.data.count(1) < spec.min_outliers) {
        res.excluded = true;
        if (!res.note.empty()) res.note += "; ";
        res.note += "only " + std::to_string(res.data.count(1)) + " outliers remain (minimum " +
                    std::to_string(spec.min_outliers) + ")";
    }
    return res;
}

}  // namespace doust
