#include "churn/pipeline.hpp"

#include "churn/error.hpp"
#include "churn/random.hpp"

#include <charconv>
#include <fstream>

namespace churn::pipeline {

using nlohmann::json;

std::vector<mlp::LayerSpec> ExperimentConfig::layers() const {
    auto out = hidden_layers;
    out.push_back({1, mlp::Activation::Sigmoid, 0.0});
    return out;
}

std::uint64_t ExperimentConfig::init_seed() const { return mix_seed(train.seed, 1); }

void ExperimentConfig::set_seed(std::uint64_t seed) {
    split.seed = seed;
    train.seed = seed;
}

void ExperimentConfig::validate() const {
    if (target_column.empty()) throw ConfigError("config: target_column is required");
    if (id_columns.contains(target_column)) throw ConfigError("config: target column is also an id column");
    if (!(drop_threshold > 0.0 && drop_threshold <= 1.0)) throw ConfigError("config: drop_threshold must be in (0, 1]");
    if (!(l2_lambda >= 0.0)) throw ConfigError("config: l2_lambda must be >= 0");
    split.validate();
    train.validate();
    for (const auto& l : hidden_layers) {
        if (l.size == 0) throw ConfigError("config: hidden layer of size 0");
        if (!(l.dropout_rate >= 0.0 && l.dropout_rate < 1.0)) throw ConfigError("config: dropout rate must be in [0, 1)");
    }
}

namespace {

struct Prepared {
    preprocess::SplitIndices split;
    preprocess::PreprocessPlan plan;
    preprocess::NumericDataset train;
    preprocess::NumericDataset validation;
    preprocess::NumericDataset test;
};

Prepared prepare(const ExperimentConfig& config, const tabular::Frame& frame) {
    Prepared p;
    const auto labels = preprocess::target_labels(frame, config.target_column, config.target_positive_value);
    p.split = preprocess::split_indices(labels, config.split);

    preprocess::FitOptions fit;
    fit.target_column = config.target_column;
    fit.target_positive_value = config.target_positive_value;
    fit.id_columns = config.id_columns;
    fit.drop_threshold = config.drop_threshold;
    fit.scaler_kind = config.scaler_kind;
    p.plan = preprocess::fit_plan(frame.select_rows(p.split.train), fit);

    const auto all = preprocess::apply_plan(p.plan, frame);
    p.train = all.subset(p.split.train);
    p.validation = all.subset(p.split.validation);
    p.test = all.subset(p.split.test);
    return p;
}

RunResult train_prepared(const ExperimentConfig& config, const Prepared& data) {
    auto model = mlp::init(data.plan.feature_columns.size(), config.layers(), config.l2_lambda, config.init_seed());
    auto [trained, history] = mlp::train(std::move(model), data.train, data.validation, config.train);

    RunResult result;
    const auto probabilities = mlp::predict_proba(trained, data.test.features);
    result.report = metrics::evaluate(probabilities, data.test.labels, config.train.classification_threshold);
    result.history = std::move(history);
    result.split = data.split;

    auto& a = result.artifact;
    a.plan = data.plan;
    a.config = config;
    for (Eigen::Index j = 0; j < data.test.features.cols(); ++j) {
        a.fingerprint.features.push_back(data.test.features(0, j));
    }
    a.fingerprint.probability = probabilities.front();
    a.model = std::move(trained);
    return result;
}

void write_number(std::ostream& out, double v) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, end - buf);
}

}  // namespace

RunResult run_train(const ExperimentConfig& config, const tabular::Frame& frame) {
    config.validate();
    return train_prepared(config, prepare(config, frame));
}

RunResult run_train(const ExperimentConfig& config) {
    config.validate();
    tabular::CsvOptions options;
    options.null_tokens = config.null_tokens;
    return run_train(config, tabular::load_csv(config.data_path, options));
}

std::string report_document(const metrics::EvalReport& report) {
    return metrics::to_json(report).dump(2) + "\n";
}

void save_history_csv(const std::filesystem::path& path, const mlp::TrainHistory& h) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (std::size_t e = 0; e < h.epochs(); ++e) {
        out << e + 1 << ',';
        write_number(out, h.train_loss[e]);
        out << ',';
        write_number(out, h.train_accuracy[e]);
        out << ',';
        write_number(out, h.validation_loss[e]);
        out << ',';
        write_number(out, h.validation_accuracy[e]);
        out << '\n';
    }
}

void write_run_outputs(const std::filesystem::path& dir, const RunResult& result) {
    std::filesystem::create_directories(dir);
    save_artifact(dir / "model.json", result.artifact);
    {
        std::ofstream out(dir / "report.json", std::ios::binary);
        if (!out) throw Error("cannot write '" + (dir / "report.json").string() + "'");
        out << report_document(result.report);
    }
    save_history_csv(dir / "history.csv", result.history);
    metrics::save_roc_csv(dir / "roc.csv", result.report.class1_positive.roc);
}

std::vector<double> predict(const ModelArtifact& artifact, const tabular::Frame& frame) {
    return mlp::predict_proba(artifact.model, preprocess::apply_features(artifact.plan, frame));
}

metrics::EvalReport evaluate(const ModelArtifact& artifact, const tabular::Frame& frame, double threshold) {
    const auto data = preprocess::apply_plan(artifact.plan, frame);
    return metrics::evaluate(mlp::predict_proba(artifact.model, data.features), data.labels, threshold);
}

metrics::EvalReport evaluate(const std::filesystem::path& artifact_path, const std::filesystem::path& data_path,
                             double threshold) {
    const auto artifact = load_artifact(artifact_path);
    return evaluate(artifact, load_for_plan(data_path, artifact), threshold);
}

// ---------------------------------------------------------------------------
// Sweep

std::size_t SweepSpec::grid_size() const {
    const std::size_t e = epochs.empty() ? 1 : epochs.size();
    return architectures.size() * dropout_rates.size() * l2_lambdas.size() * learning_rates.size() * e;
}

void SweepSpec::validate() const {
    if (grid_size() == 0) throw ConfigError("sweep: grid is empty");
    if (max_models == 0) throw ConfigError("sweep: max_models must be >= 1");
    for (const auto& arch : architectures) {
        for (auto s : arch) {
            if (s == 0) throw ConfigError("sweep: architecture contains a zero-size layer");
        }
    }
}

json to_json(const SweepSpec& s) {
    return {{"architectures", s.architectures},
            {"dropout_rates", s.dropout_rates},
            {"l2_lambdas", s.l2_lambdas},
            {"learning_rates", s.learning_rates},
            {"epochs", s.epochs},
            {"max_models", s.max_models},
            {"selection_metric", s.selection_metric == SelectionMetric::ValidationAuc ? "validation_auc"
                                                                                       : "validation_accuracy"},
            {"seed", s.seed}};
}

SweepSpec sweep_spec_from_json(const json& doc) {
    SweepSpec s;
    if (doc.is_null()) return s;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "architectures") s.architectures = value.get<std::vector<std::vector<std::size_t>>>();
            else if (key == "dropout_rates") s.dropout_rates = value.get<std::vector<double>>();
            else if (key == "l2_lambdas") s.l2_lambdas = value.get<std::vector<double>>();
            else if (key == "learning_rates") s.learning_rates = value.get<std::vector<double>>();
            else if (key == "epochs") s.epochs = value.get<std::vector<std::size_t>>();
            else if (key == "max_models") s.max_models = value.get<std::size_t>();
            else if (key == "seed") s.seed = value.get<std::uint64_t>();
            else if (key == "selection_metric") {
                const auto m = value.get<std::string>();
                if (m == "validation_auc") s.selection_metric = SelectionMetric::ValidationAuc;
                else if (m == "validation_accuracy") s.selection_metric = SelectionMetric::ValidationAccuracy;
                else throw ConfigError("sweep: unknown selection_metric '" + m + "'");
            } else {
                throw ConfigError("sweep: unknown key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("sweep: ") + e.what());
    }
    return s;
}

ExperimentConfig sweep_config(const ExperimentConfig& base, const SweepSpec& spec, std::size_t index) {
    // Lexicographic over (architecture, dropout, lambda, learning rate, epochs);
    // the last axis varies fastest.
    const std::vector<std::size_t> epoch_axis = spec.epochs.empty() ? std::vector{base.train.epochs} : spec.epochs;
    std::size_t rest = index;
    const std::size_t e = rest % epoch_axis.size();
    rest /= epoch_axis.size();
    const std::size_t lr = rest % spec.learning_rates.size();
    rest /= spec.learning_rates.size();
    const std::size_t lam = rest % spec.l2_lambdas.size();
    rest /= spec.l2_lambdas.size();
    const std::size_t drop = rest % spec.dropout_rates.size();
    rest /= spec.dropout_rates.size();
    if (rest >= spec.architectures.size()) throw ConfigError("sweep: grid index out of range");

    ExperimentConfig c = base;
    const auto activation = base.hidden_layers.empty() ? mlp::Activation::Sigmoid : base.hidden_layers.front().activation;
    c.hidden_layers.clear();
    for (auto size : spec.architectures[rest]) c.hidden_layers.push_back({size, activation, spec.dropout_rates[drop]});
    c.l2_lambda = spec.l2_lambdas[lam];
    c.train.learning_rate = spec.learning_rates[lr];
    c.train.epochs = epoch_axis[e];
    c.train.seed = mix_seed(spec.seed, index);
    return c;
}

SweepResult sweep(const ExperimentConfig& config, const SweepSpec& spec, const tabular::Frame& frame) {
    config.validate();
    spec.validate();
    // The split and plan are shared so every candidate sees the same validation rows.
    const Prepared data = prepare(config, frame);

    SweepResult result;
    const std::size_t count = std::min(spec.grid_size(), spec.max_models);
    std::optional<std::size_t> best;
    std::optional<mlp::Mlp> best_model;
    ExperimentConfig best_config;
    mlp::TrainHistory best_history;

    for (std::size_t i = 0; i < count; ++i) {
        const ExperimentConfig c = sweep_config(config, spec, i);
        LeaderboardEntry entry;
        entry.index = i;
        for (const auto& l : c.hidden_layers) entry.architecture.push_back(l.size);
        entry.dropout_rate = c.hidden_layers.empty() ? 0.0 : c.hidden_layers.front().dropout_rate;
        entry.l2_lambda = c.l2_lambda;
        entry.learning_rate = c.train.learning_rate;
        entry.epochs = c.train.epochs;
        entry.seed = c.train.seed;
        try {
            c.validate();
            auto model = mlp::init(data.plan.feature_columns.size(), c.layers(), c.l2_lambda, c.init_seed());
            auto [trained, history] = mlp::train(std::move(model), data.train, data.validation, c.train);
            const auto val_p = mlp::predict_proba(trained, data.validation.features);
            const auto val = metrics::evaluate(val_p, data.validation.labels, c.train.classification_threshold);
            entry.validation_auc = val.class1_positive.roc.auc;
            entry.validation_accuracy = val.class1_positive.scalars.accuracy;
            entry.final_train_loss = history.train_loss.back();
            entry.final_validation_loss = history.validation_loss.back();
            if (!best || entry.score(spec.selection_metric) > result.leaderboard[*best].score(spec.selection_metric)) {
                best = i;
                best_model = std::move(trained);
                best_config = c;
                best_history = std::move(history);
            }
        } catch (const DivergenceError&) {
            entry.diverged = true;
        }
        result.leaderboard.push_back(std::move(entry));
    }
    if (!best) throw Error("sweep: every model diverged");

    // Test-set metrics for the winner only.
    result.best_index = *best;
    auto& run = result.best;
    const auto test_p = mlp::predict_proba(*best_model, data.test.features);
    run.report = metrics::evaluate(test_p, data.test.labels, best_config.train.classification_threshold);
    run.history = std::move(best_history);
    run.split = data.split;
    run.artifact.plan = data.plan;
    run.artifact.config = best_config;
    for (Eigen::Index j = 0; j < data.test.features.cols(); ++j) {
        run.artifact.fingerprint.features.push_back(data.test.features(0, j));
    }
    run.artifact.fingerprint.probability = test_p.front();
    run.artifact.model = std::move(*best_model);
    return result;
}

SweepResult sweep(const ExperimentConfig& config, const SweepSpec& spec) {
    config.validate();
    tabular::CsvOptions options;
    options.null_tokens = config.null_tokens;
    return sweep(config, spec, tabular::load_csv(config.data_path, options));
}

void save_leaderboard_csv(const std::filesystem::path& path, const std::vector<LeaderboardEntry>& board) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "index,architecture,dropout_rate,l2_lambda,learning_rate,epochs,seed,diverged,validation_auc,"
           "validation_accuracy,final_train_loss,final_validation_loss\n";
    for (const auto& e : board) {
        out << e.index << ',';
        for (std::size_t k = 0; k < e.architecture.size(); ++k) out << (k ? "-" : "") << e.architecture[k];
        out << ',';
        write_number(out, e.dropout_rate);
        out << ',';
        write_number(out, e.l2_lambda);
        out << ',';
        write_number(out, e.learning_rate);
        out << ',' << e.epochs << ',' << e.seed << ',' << (e.diverged ? 1 : 0) << ',';
        write_number(out, e.validation_auc);
        out << ',';
        write_number(out, e.validation_accuracy);
        out << ',';
        write_number(out, e.final_train_loss);
        out << ',';
        write_number(out, e.final_validation_loss);
        out << '\n';
    }
}

}  // namespace churn::pipeline
