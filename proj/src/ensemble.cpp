#include "doust/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "doust/random.hpp"

namespace doust {

namespace {

constexpr Eigen::Index kScoreChunk = 4096;

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

bool all_finite(const Vector& v) { return v.allFinite(); }

double centering_loss(const nn::MlpNetwork& net, const Matrix& x) {
    const Vector s = score_rows(net, x);
    if (!all_finite(s)) return std::numeric_limits<double>::quiet_NaN();
    return (s.array() - 0.5).square().mean();
}

double refinement_loss(const nn::MlpNetwork& net, const Matrix& train, const Matrix& test, const LossSpec& spec) {
    const Vector a = score_rows(net, train);
    const Vector b = score_rows(net, test);
    if (!all_finite(a) || !all_finite(b)) return std::numeric_limits<double>::quiet_NaN();
    return loss_value(spec, std::span(a.data(), static_cast<std::size_t>(a.size())),
                      std::span(b.data(), static_cast<std::size_t>(b.size())));
}

std::string_view to_string(BatchComposition b) {
    return b == BatchComposition::stratified ? "stratified" : "shuffled_union";
}

std::string_view to_string(GroupNormalization g) {
    return g == GroupNormalization::per_dataset ? "per_dataset" : "per_batch";
}

// One refinement step on a tagged batch; returns false on a non-finite loss.
bool refine_step(nn::MlpNetwork& net, nn::AdamOptimizer& opt, const Matrix& batch, const std::vector<nn::Group>& groups,
                 const DoustConfig& cfg, double n_train_total, double n_test_total, std::string& failure) {
    const nn::ForwardCache cache = nn::forward_cached(net, batch);
    std::vector<double> tr, te;
    tr.reserve(groups.size());
    te.reserve(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) {
        (groups[i] == nn::Group::train ? tr : te).push_back(cache.scores[static_cast<Eigen::Index>(i)]);
    }
    LossGradient lg;
    try {
        lg = cfg.normalization == GroupNormalization::per_dataset
                 ? loss_gradient_with_group_sizes(cfg.loss, tr, te, n_train_total, n_test_total)
                 : loss_gradient(cfg.loss, tr, te);
    } catch (const InvalidScoreError& e) {
        failure = e.what();
        return false;
    }
    if (!std::isfinite(lg.value)) {
        failure = "non-finite refinement loss";
        return false;
    }
    Vector grad(static_cast<Eigen::Index>(groups.size()));
    std::size_t itr = 0, ite = 0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        grad[static_cast<Eigen::Index>(i)] = groups[i] == nn::Group::train ? lg.train[itr++] : lg.test[ite++];
    }
    opt.step(net, nn::backward(net, cache, grad));
    return true;
}

}  // namespace

std::size_t DoustConfig::effective_batch_size() const noexcept {
    if (batch_size) return *batch_size;
    return loss.variant == LossVariant::max_independent ? 500 : 100;
}

void DoustConfig::validate() const {
    if (hidden.empty()) throw ConfigError("at least one hidden layer is required");
    for (auto w : hidden) {
        if (w == 0) throw ConfigError("hidden width must be positive");
    }
    if (pretrain_epochs < 1 || refine_epochs < 1) throw ConfigError("epochs must be at least 1");
    if (effective_batch_size() < 2) throw ConfigError("batch size must be at least 2");
    if (ensemble_size < 1) throw ConfigError("ensemble size must be at least 1");
    if (!(feature_bag_fraction > 0.0 && feature_bag_fraction <= 1.0)) {
        throw ConfigError("feature-bag fraction must lie in (0, 1]");
    }
    loss.validate();
}

nlohmann::json to_json(const DoustConfig& cfg) {
    nlohmann::json j = {
        {"hidden", cfg.hidden},
        {"pretrain_epochs", cfg.pretrain_epochs},
        {"refine_epochs", cfg.refine_epochs},
        {"batch_size", cfg.effective_batch_size()},
        {"ensemble_size", cfg.ensemble_size},
        {"feature_bag_fraction", cfg.feature_bag_fraction},
        {"seed", cfg.seed},
        {"loss", {{"variant", std::string(to_string(cfg.loss.variant))}, {"weight", cfg.loss.weight}}},
        {"batching", std::string(to_string(cfg.batching))},
        {"normalization", std::string(to_string(cfg.normalization))},
        {"optimizer",
         {{"learning_rate", cfg.optimizer.learning_rate},
          {"beta1", cfg.optimizer.beta1},
          {"beta2", cfg.optimizer.beta2},
          {"epsilon", cfg.optimizer.epsilon}}},
    };
    return j;
}

DoustConfig doust_config_from_json(const nlohmann::json& j) {
    DoustConfig cfg;
    if (j.contains("hidden")) cfg.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    if (j.contains("pretrain_epochs")) cfg.pretrain_epochs = j.at("pretrain_epochs").get<std::size_t>();
    if (j.contains("refine_epochs")) cfg.refine_epochs = j.at("refine_epochs").get<std::size_t>();
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("ensemble_size")) cfg.ensemble_size = j.at("ensemble_size").get<std::size_t>();
    if (j.contains("feature_bag_fraction")) cfg.feature_bag_fraction = j.at("feature_bag_fraction").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        if (l.contains("variant")) cfg.loss.variant = loss_variant_from_string(l.at("variant").get<std::string>());
        if (l.contains("weight")) cfg.loss.weight = l.at("weight").get<double>();
    }
    if (j.contains("batching")) {
        const auto b = j.at("batching").get<std::string>();
        if (b == "stratified") cfg.batching = BatchComposition::stratified;
        else if (b == "shuffled_union") cfg.batching = BatchComposition::shuffled_union;
        else throw ConfigError("unknown batching '" + b + "'");
    }
    if (j.contains("normalization")) {
        const auto n = j.at("normalization").get<std::string>();
        if (n == "per_dataset") cfg.normalization = GroupNormalization::per_dataset;
        else if (n == "per_batch") cfg.normalization = GroupNormalization::per_batch;
        else throw ConfigError("unknown normalization '" + n + "'");
    }
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        cfg.optimizer.learning_rate = o.value("learning_rate", cfg.optimizer.learning_rate);
        cfg.optimizer.beta1 = o.value("beta1", cfg.optimizer.beta1);
        cfg.optimizer.beta2 = o.value("beta2", cfg.optimizer.beta2);
        cfg.optimizer.epsilon = o.value("epsilon", cfg.optimizer.epsilon);
    }
    cfg.validate();
    return cfg;
}

FeatureScaler::FeatureScaler(Vector mean, Vector scale) : mean_(std::move(mean)), scale_(std::move(scale)) {
    if (mean_.size() != scale_.size()) throw ConfigError("scaler mean/scale length mismatch");
}

FeatureScaler FeatureScaler::fit(const Matrix& train) {
    if (train.rows() == 0) throw ConfigError("cannot fit a scaler on zero rows");
    Vector mean = train.colwise().mean().transpose();
    Vector scale(train.cols());
    for (Eigen::Index c = 0; c < train.cols(); ++c) {
        const double var = (train.col(c).array() - mean[c]).square().mean();
        scale[c] = std::sqrt(var);
    }
    return FeatureScaler(std::move(mean), std::move(scale));
}

Matrix FeatureScaler::transform(const Matrix& x) const {
    if (x.cols() != mean_.size()) throw ConfigError("feature width does not match fitted scaler");
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (scale_[c] > 0.0) {
            out.col(c) = (x.col(c).array() - mean_[c]) / scale_[c];
        } else {
            out.col(c).setZero();
        }
    }
    return out;
}

std::vector<std::size_t> feature_bag_mask(std::size_t input_dim, double fraction, std::uint64_t seed) {
    if (input_dim == 0) throw ConfigError("input dimension must be positive");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("feature-bag fraction must lie in (0, 1]");
    std::vector<std::size_t> all(input_dim);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (fraction == 1.0) return all;
    // Guard against 0.5 * 10 landing on 5.0000000001.
    auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(input_dim) - 1e-9));
    keep = std::clamp<std::size_t>(keep, 1, input_dim);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < keep; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, input_dim - 1);
        std::swap(all[i], all[pick(rng)]);
    }
    all.resize(keep);
    std::sort(all.begin(), all.end());
    return all;
}

Matrix select_columns(const Matrix& x, const std::vector<std::size_t>& columns) {
    if (columns.size() == static_cast<std::size_t>(x.cols())) {
        bool identity = true;
        for (std::size_t i = 0; i < columns.size() && identity; ++i) identity = columns[i] == i;
        if (identity) return x;
    }
    Matrix out(x.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c] >= static_cast<std::size_t>(x.cols())) throw ConfigError("feature index out of range");
        out.col(static_cast<Eigen::Index>(c)) = x.col(static_cast<Eigen::Index>(columns[c]));
    }
    return out;
}

Vector score_rows(const nn::MlpNetwork& net, const Matrix& x) {
    Vector out(x.rows());
    for (Eigen::Index start = 0; start < x.rows(); start += kScoreChunk) {
        const Eigen::Index len = std::min(kScoreChunk, x.rows() - start);
        out.segment(start, len) = net.forward(x.middleRows(start, len));
    }
    return out;
}

PhaseReport pretrain(nn::MlpNetwork& net, const Matrix& train, const DoustConfig& cfg, std::uint64_t shuffle_seed) {
    PhaseReport report;
    report.loss_before = centering_loss(net, train);
    report.loss_after = report.loss_before;
    if (cfg.pretrain_epochs == 0 || train.rows() == 0) return report;

    nn::AdamOptimizer opt(net, cfg.optimizer);
    std::mt19937_64 rng(shuffle_seed);
    std::vector<std::size_t> order(static_cast<std::size_t>(train.rows()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batch = cfg.effective_batch_size();

    for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t len = std::min(batch, order.size() - start);
            const Matrix rows = gather_rows(train, std::span(order).subspan(start, len));
            const nn::ForwardCache cache = nn::forward_cached(net, rows);
            if (!all_finite(cache.scores)) {
                report.finite = false;
                report.failure = "non-finite score during pretraining";
                return report;
            }
            const LossGradient lg = centering_loss_gradient(std::span(cache.scores.data(), len));
            opt.step(net, nn::backward(net, cache, Eigen::Map<const Vector>(lg.train.data(), static_cast<Eigen::Index>(len))));
            ++report.steps;
        }
    }
    report.loss_after = centering_loss(net, train);
    if (!std::isfinite(report.loss_after) || !net.all_finite()) {
        report.finite = false;
        report.failure = "non-finite weights or loss after pretraining";
    }
    return report;
}

PhaseReport refine(nn::MlpNetwork& net, const Matrix& train, const Matrix& test, const DoustConfig& cfg,
                   std::uint64_t shuffle_seed) {
    PhaseReport report;
    try {
        report.loss_before = refinement_loss(net, train, test, cfg.loss);
    } catch (const InvalidScoreError& e) {
        report.finite = false;
        report.failure = e.what();
        return report;
    }
    report.loss_after = report.loss_before;
    const auto n_tr = static_cast<std::size_t>(train.rows());
    const auto n_te = static_cast<std::size_t>(test.rows());
    if (cfg.refine_epochs == 0 || n_tr + n_te == 0) return report;
    if (train.cols() != test.cols()) throw ConfigError("train and test widths differ");

    nn::AdamOptimizer opt(net, cfg.optimizer);
    std::mt19937_64 rng(shuffle_seed);
    const std::size_t batch = cfg.effective_batch_size();
    const double tot_tr = static_cast<double>(std::max<std::size_t>(n_tr, 1));
    const double tot_te = static_cast<double>(std::max<std::size_t>(n_te, 1));

    Matrix rows(static_cast<Eigen::Index>(batch), train.cols());
    std::vector<nn::Group> groups;
    auto run_batch = [&](const std::vector<std::pair<nn::Group, std::size_t>>& members) {
        rows.resize(static_cast<Eigen::Index>(members.size()), train.cols());
        groups.clear();
        for (std::size_t i = 0; i < members.size(); ++i) {
            const auto [g, r] = members[i];
            rows.row(static_cast<Eigen::Index>(i)) =
                g == nn::Group::train ? train.row(static_cast<Eigen::Index>(r)) : test.row(static_cast<Eigen::Index>(r));
            groups.push_back(g);
        }
        if (!refine_step(net, opt, rows, groups, cfg, tot_tr, tot_te, report.failure)) {
            report.finite = false;
            return false;
        }
        ++report.steps;
        return true;
    };

    std::vector<std::pair<nn::Group, std::size_t>> members;
    members.reserve(batch);
    if (cfg.batching == BatchComposition::shuffled_union) {
        std::vector<std::pair<nn::Group, std::size_t>> all;
        all.reserve(n_tr + n_te);
        for (std::size_t i = 0; i < n_tr; ++i) all.emplace_back(nn::Group::train, i);
        for (std::size_t i = 0; i < n_te; ++i) all.emplace_back(nn::Group::test, i);
        for (std::size_t epoch = 0; epoch < cfg.refine_epochs; ++epoch) {
            std::shuffle(all.begin(), all.end(), rng);
            for (std::size_t start = 0; start < all.size(); start += batch) {
                const std::size_t len = std::min(batch, all.size() - start);
                members.assign(all.begin() + static_cast<std::ptrdiff_t>(start),
                               all.begin() + static_cast<std::ptrdiff_t>(start + len));
                if (!run_batch(members)) return report;
            }
        }
    } else {
        if (n_tr == 0 || n_te == 0) throw ConfigError("stratified batches need both groups");
        const std::size_t half = std::max<std::size_t>(batch / 2, 1);
        std::vector<std::size_t> otr(n_tr), ote(n_te);
        std::iota(otr.begin(), otr.end(), std::size_t{0});
        std::iota(ote.begin(), ote.end(), std::size_t{0});
        const std::size_t batches = (std::max(n_tr, n_te) + half - 1) / half;
        for (std::size_t epoch = 0; epoch < cfg.refine_epochs; ++epoch) {
            std::shuffle(otr.begin(), otr.end(), rng);
            std::shuffle(ote.begin(), ote.end(), rng);
            for (std::size_t b = 0; b < batches; ++b) {
                members.clear();
                // The smaller group wraps around within the epoch.
                for (std::size_t k = 0; k < half; ++k) members.emplace_back(nn::Group::train, otr[(b * half + k) % n_tr]);
                for (std::size_t k = 0; k < half; ++k) members.emplace_back(nn::Group::test, ote[(b * half + k) % n_te]);
                if (!run_batch(members)) return report;
            }
        }
    }

    try {
        report.loss_after = refinement_loss(net, train, test, cfg.loss);
    } catch (const InvalidScoreError& e) {
        report.loss_after = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(report.loss_after) || !net.all_finite()) {
        report.finite = false;
        report.failure = "non-finite weights or loss after refinement";
    }
    return report;
}

SubmodelResult train_submodel(const Matrix& train, const Matrix& test, const DoustConfig& cfg, std::size_t index,
                              const TrainHooks& hooks) {
    SubmodelResult r;
    r.index = index;
    r.seed = cfg.seed + index;
    r.features = feature_bag_mask(static_cast<std::size_t>(train.cols()), cfg.feature_bag_fraction,
                                  derive_seed(r.seed, Stream::feature_bag));
    const Matrix tr = select_columns(train, r.features);
    const Matrix te = select_columns(test, r.features);

    r.network = nn::init_weights({r.features.size(), cfg.hidden}, derive_seed(r.seed, Stream::init));
    auto fail = [&](std::string why) {
        r.status = SubmodelStatus::failed;
        r.reason = std::move(why);
        return r;
    };

    r.pretrain_report = pretrain(r.network, tr, cfg, derive_seed(r.seed, Stream::shuffle_pretrain));
    if (!r.pretrain_report.finite) return fail(r.pretrain_report.failure);
    r.degraded = !(r.pretrain_report.loss_after < r.pretrain_report.loss_before);

    r.refine_report = refine(r.network, tr, te, cfg, derive_seed(r.seed, Stream::shuffle_refine));
    if (!r.refine_report.finite) return fail(r.refine_report.failure);

    if (hooks.inject_failure && hooks.inject_failure(index)) {
        r.network.layers().back().weights.setConstant(std::numeric_limits<double>::quiet_NaN());
    }

    // Probe: scores on a slice of the test rows must be finite.
    const Matrix& probe_src = te.rows() > 0 ? te : tr;
    const Eigen::Index probe_rows = std::min<Eigen::Index>(probe_src.rows(), 100);
    if (!r.network.all_finite() || !score_rows(r.network, probe_src.topRows(probe_rows)).allFinite()) {
        return fail("non-finite weights or probe scores");
    }
    return r;
}

EnsembleModel::EnsembleModel(std::vector<SubmodelResult> submodels, FeatureScaler scaler, DoustConfig config)
    : submodels_(std::move(submodels)), scaler_(std::move(scaler)), config_(std::move(config)) {
    if (ok_count() == 0) {
        std::vector<std::string> reasons;
        for (const auto& s : submodels_) reasons.push_back(s.reason);
        throw EnsembleFailure("every submodel failed", std::move(reasons));
    }
}

std::size_t EnsembleModel::ok_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(submodels_.begin(), submodels_.end(), [](const auto& s) { return s.ok(); }));
}

Matrix EnsembleModel::member_scores(const Matrix& features, kernels::Execution ex) const {
    if (static_cast<std::size_t>(features.cols()) != input_dim()) {
        throw ConfigError("feature width " + std::to_string(features.cols()) + " does not match model width " +
                          std::to_string(input_dim()));
    }
    const Matrix scaled = scaler_.transform(features);
    std::vector<const SubmodelResult*> ok;
    for (const auto& s : submodels_) {
        if (s.ok()) ok.push_back(&s);
    }
    Matrix table(features.rows(), static_cast<Eigen::Index>(ok.size()));
    kernels::for_each_index(ok.size(), ex, [&](std::size_t m) {
        table.col(static_cast<Eigen::Index>(m)) = score_rows(ok[m]->network, select_columns(scaled, ok[m]->features));
    });
    return table;
}

Vector EnsembleModel::score(const Matrix& features, kernels::Execution ex) const {
    return kernels::member_mean(member_scores(features, ex), ex);
}

EnsembleModel train_ensemble(const Matrix& train, const Matrix& test, const DoustConfig& cfg, const TrainHooks& hooks,
                             kernels::Execution ex) {
    cfg.validate();
    if (train.rows() == 0) throw ConfigError("training set is empty");
    if (train.cols() != test.cols()) throw ConfigError("train and test widths differ");
    FeatureScaler scaler = FeatureScaler::fit(train);
    const Matrix tr = scaler.transform(train);
    const Matrix te = scaler.transform(test);

    std::vector<SubmodelResult> results(cfg.ensemble_size);
    kernels::for_each_index(cfg.ensemble_size, ex,
                            [&](std::size_t i) { results[i] = train_submodel(tr, te, cfg, i, hooks); });
    return EnsembleModel(std::move(results), std::move(scaler), cfg);
}

nlohmann::json to_json(const EnsembleModel& model) {
    nlohmann::json subs = nlohmann::json::array();
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& s : model.submodels()) {
        nlohmann::json sj = {{"index", s.index},
                             {"seed", s.seed},
                             {"status", s.ok() ? "ok" : "failed"},
                             {"features", s.features},
                             {"degraded", s.degraded}};
        if (s.ok()) {
            sj["network"] = nn::to_json(s.network);
        } else {
            sj["reason"] = s.reason;
            failures.push_back({{"index", s.index}, {"reason", s.reason}});
        }
        subs.push_back(std::move(sj));
    }
    const auto& sc = model.scaler();
    return {{"format", "doust.ensemble"},
            {"version", kEnsembleFormatVersion},
            {"config", to_json(model.config())},
            {"normalization",
             {{"mean", std::vector<double>(sc.mean().data(), sc.mean().data() + sc.mean().size())},
              {"scale", std::vector<double>(sc.scale().data(), sc.scale().data() + sc.scale().size())}}},
            {"submodels", std::move(subs)},
            {"failures", std::move(failures)}};
}

EnsembleModel ensemble_from_json(const nlohmann::json& j) {
    if (!j.contains("version")) throw ConfigError("ensemble blob has no format version");
    if (j.at("version").get<int>() != kEnsembleFormatVersion) {
        throw ConfigError("unsupported ensemble format version " + j.at("version").dump());
    }
    DoustConfig cfg = doust_config_from_json(j.at("config"));
    const auto mean = j.at("normalization").at("mean").get<std::vector<double>>();
    const auto scale = j.at("normalization").at("scale").get<std::vector<double>>();
    FeatureScaler scaler(Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size())),
                         Eigen::Map<const Vector>(scale.data(), static_cast<Eigen::Index>(scale.size())));
    std::vector<SubmodelResult> subs;
    for (const auto& sj : j.at("submodels")) {
        SubmodelResult s;
        s.index = sj.at("index").get<std::size_t>();
        s.seed = sj.at("seed").get<std::uint64_t>();
        s.features = sj.at("features").get<std::vector<std::size_t>>();
        s.degraded = sj.value("degraded", false);
        if (sj.at("status").get<std::string>() == "ok") {
            s.network = nn::network_from_json(sj.at("network"));
        } else {
            s.status = SubmodelStatus::failed;
            s.reason = sj.value("reason", std::string("unknown"));
        }
        subs.push_back(std::move(s));
    }
    return EnsembleModel(std::move(subs), std::move(scaler), std::move(cfg));
}

}  // namespace doust
