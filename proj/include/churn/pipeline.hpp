#pragma once

#include "churn/metrics.hpp"
#include "churn/mlp.hpp"
#include "churn/preprocess.hpp"
#include "churn/tabular.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace churn::pipeline {

/// Everything a train run needs. Defaults form the reference experiment.
struct ExperimentConfig {
    std::string data_path;
    std::set<std::string> null_tokens{"", "NULL", "null"};
    std::string target_column = "churn";
    std::string target_positive_value = "Yes";
    std::set<std::string> id_columns{"cust_id"};
    double drop_threshold = 0.30;
    preprocess::ScalerKind scaler_kind = preprocess::ScalerKind::ZScore;
    preprocess::SplitSpec split{.seed = 7};
    std::vector<mlp::LayerSpec> hidden_layers{{16, mlp::Activation::Sigmoid, 0.2},
                                              {8, mlp::Activation::Sigmoid, 0.2}};
    double l2_lambda = 1e-4;
    mlp::TrainConfig train{.epochs = 1000, .seed = 7};
    std::string output_dir = "out";

    /// Hidden layers followed by the single sigmoid output unit.
    std::vector<mlp::LayerSpec> layers() const;
    /// Seed for weight initialization, derived from the training seed.
    std::uint64_t init_seed() const;
    /// Sets the split and training seeds together.
    void set_seed(std::uint64_t seed);
    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticSpec {
    std::size_t n_rows = 5000;
    double churn_rate = 0.03;
    double null_rate = 0.05;
    std::uint64_t seed = 7;
};

/// Column forced to a high missing fraction so the drop rule has work to do.
inline constexpr const char* kHighNullColumn = "lga";
inline constexpr double kHighNullFraction = 0.40;

/// Bank-customer style table whose `churn` column (Yes/No) comes from a
/// logistic latent score over a subset of the features. Exactly
/// round(churn_rate * n_rows) rows are churners.
tabular::Frame gen_synthetic(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Artifacts

/// A processed feature row and the probability the model gave it at save time.
struct Fingerprint {
    std::vector<double> features;
    double probability = 0.0;
};

struct ModelArtifact {
    static constexpr int kFormatVersion = 1;

    preprocess::PreprocessPlan plan;
    mlp::Mlp model;
    ExperimentConfig config;
    Fingerprint fingerprint;
};

nlohmann::json to_json(const ModelArtifact& artifact);
/// Verifies the fingerprint; a mismatch is reported as an Error.
ModelArtifact artifact_from_json(const nlohmann::json& doc);
void save_artifact(const std::filesystem::path& path, const ModelArtifact& artifact);
ModelArtifact load_artifact(const std::filesystem::path& path);

/// Loads a CSV with column kinds pinned to what the plan expects.
tabular::Frame load_for_plan(const std::filesystem::path& path, const ModelArtifact& artifact);

// ---------------------------------------------------------------------------
// Runs

struct RunResult {
    ModelArtifact artifact;
    mlp::TrainHistory history;
    metrics::EvalReport report;
    preprocess::SplitIndices split;
};

/// load -> split -> fit plan on the train part -> train -> evaluate on test.
/// Does not touch the filesystem beyond reading `config.data_path`.
RunResult run_train(const ExperimentConfig& config);

/// Same as run_train on an already loaded frame.
RunResult run_train(const ExperimentConfig& config, const tabular::Frame& frame);

/// Writes model.json, report.json, history.csv and roc.csv into `dir`.
void write_run_outputs(const std::filesystem::path& dir, const RunResult& result);

std::string report_document(const metrics::EvalReport& report);
void save_history_csv(const std::filesystem::path& path, const mlp::TrainHistory& history);

metrics::EvalReport evaluate(const ModelArtifact& artifact, const tabular::Frame& frame, double threshold);
metrics::EvalReport evaluate(const std::filesystem::path& artifact_path, const std::filesystem::path& data_path,
                             double threshold);

/// Class-1 probabilities for every row; the target column is optional.
std::vector<double> predict(const ModelArtifact& artifact, const tabular::Frame& frame);

// ---------------------------------------------------------------------------
// Sweep

enum class SelectionMetric { ValidationAuc, ValidationAccuracy };

struct SweepSpec {
    std::vector<std::vector<std::size_t>> architectures{{16, 8}, {32, 16}, {16}, {8, 4}, {32}};
    std::vector<double> dropout_rates{0.0, 0.2};
    std::vector<double> l2_lambdas{0.0, 1e-4};
    std::vector<double> learning_rates{0.01, 0.05, 0.1};
    /// Empty means "use the base config's epoch count".
    std::vector<std::size_t> epochs;
    std::size_t max_models = 50;
    SelectionMetric selection_metric = SelectionMetric::ValidationAuc;
    std::uint64_t seed = 7;

    std::size_t grid_size() const;
    void validate() const;
};

nlohmann::json to_json(const SweepSpec& spec);
SweepSpec sweep_spec_from_json(const nlohmann::json& doc);

struct LeaderboardEntry {
    std::size_t index = 0;
    std::vector<std::size_t> architecture;
    double dropout_rate = 0.0;
    double l2_lambda = 0.0;
    double learning_rate = 0.0;
    std::size_t epochs = 0;
    std::uint64_t seed = 0;
    bool diverged = false;
    double validation_auc = 0.0;
    double validation_accuracy = 0.0;
    double final_train_loss = 0.0;
    double final_validation_loss = 0.0;

    double score(SelectionMetric metric) const {
        return metric == SelectionMetric::ValidationAuc ? validation_auc : validation_accuracy;
    }
};

struct SweepResult {
    RunResult best;
    std::size_t best_index = 0;
    std::vector<LeaderboardEntry> leaderboard;
};

/// Configuration for grid point `index` in enumeration order.
ExperimentConfig sweep_config(const ExperimentConfig& base, const SweepSpec& spec, std::size_t index);

SweepResult sweep(const ExperimentConfig& config, const SweepSpec& spec);
SweepResult sweep(const ExperimentConfig& config, const SweepSpec& spec, const tabular::Frame& frame);

void save_leaderboard_csv(const std::filesystem::path& path, const std::vector<LeaderboardEntry>& board);

}  // namespace churn::pipeline
