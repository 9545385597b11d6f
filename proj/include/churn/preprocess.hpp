#pragma once

#include "churn/tabular.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace churn::preprocess {

using Matrix = Eigen::MatrixXd;

enum class ScalerKind { ZScore, MinMax };

std::string_view to_string(ScalerKind kind);
ScalerKind scaler_kind_from_string(std::string_view text);

/// Fitted scaling parameters for one numeric feature. Both parameter pairs
/// are recorded; `ScalerKind` decides which one `apply_plan` uses.
struct ScalerParams {
    double mean = 0.0;
    double std = 1.0;  // population standard deviation
    double min = 0.0;
    double max = 1.0;

    bool operator==(const ScalerParams&) const = default;
};

/// Spreads (std or max-min) below this are treated as 1.0.
inline constexpr double kDegenerateSpread = 1e-12;

using ImputeValue = tabular::ColumnStat;

/// Everything needed to turn a raw Frame into model input. Produced by
/// `fit_plan` on training rows only; immutable afterwards.
struct PreprocessPlan {
    static constexpr int kFormatVersion = 1;

    std::string target_column;
    std::string target_positive_value;
    tabular::ColumnKind target_kind = tabular::ColumnKind::Categorical;
    std::set<std::string> id_columns;
    double drop_threshold = 0.30;
    ScalerKind scaler_kind = ScalerKind::ZScore;

    std::set<std::string> dropped_columns;
    /// Retained features in frame order; this is the model's input order.
    std::vector<std::string> feature_columns;
    std::map<std::string, ImputeValue> impute_values;
    std::map<std::string, std::map<std::string, int>> label_maps;
    std::map<std::string, ScalerParams> scaler;

    /// Non-fatal notes from fitting (e.g. all-missing columns that were dropped).
    std::vector<std::string> warnings;

    bool is_categorical(const std::string& feature) const { return label_maps.contains(feature); }
    bool operator==(const PreprocessPlan&) const = default;
};

struct FitOptions {
    std::string target_column;
    std::string target_positive_value;
    std::set<std::string> id_columns;
    double drop_threshold = 0.30;
    ScalerKind scaler_kind = ScalerKind::ZScore;
};

/// Model-ready data: no missing values, labels in {0,1}.
struct NumericDataset {
    Matrix features;  // n_rows x n_features
    std::vector<int> labels;
    std::vector<std::string> feature_names;

    std::size_t n_rows() const noexcept { return labels.size(); }
    std::size_t n_features() const noexcept { return static_cast<std::size_t>(features.cols()); }
    NumericDataset subset(std::span<const std::size_t> rows) const;
};

PreprocessPlan fit_plan(const tabular::Frame& frame, const FitOptions& options);

/// Features and labels. The target column must be present and complete.
NumericDataset apply_plan(const PreprocessPlan& plan, const tabular::Frame& frame);

/// Features only; the target column is not required (prediction on new data).
Matrix apply_features(const PreprocessPlan& plan, const tabular::Frame& frame);

/// Target cells mapped to {0,1} without a fitted plan; errors on missing cells.
std::vector<int> target_labels(const tabular::Frame& frame, const std::string& target_column,
                               const std::string& positive_value);

/// Target column mapped to {0,1}: 1 iff the cell equals the positive value.
std::vector<int> encode_labels(const PreprocessPlan& plan, const tabular::Frame& frame);

nlohmann::json to_json(const PreprocessPlan& plan);
PreprocessPlan plan_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
    double train_fraction = 0.8;
    double test_fraction = 0.1;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;
    bool stratified = true;

    /// Throws ConfigError unless each fraction is in (0,1) and they sum to 1.
    void validate() const;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::vector<std::size_t> validation;
};

/// Part sizes for n rows: floor(train*n), floor(validation*n), test gets the rest.
struct PartSizes {
    std::size_t train = 0;
    std::size_t test = 0;
    std::size_t validation = 0;
};
PartSizes part_sizes(std::size_t n, const SplitSpec& spec);

/// Seeded partition of row indices 0..labels.size()-1.
SplitIndices split_indices(std::span<const int> labels, const SplitSpec& spec);

struct DatasetSplit {
    NumericDataset train;
    NumericDataset test;
    NumericDataset validation;
};

DatasetSplit split(const NumericDataset& dataset, const SplitSpec& spec);

}  // namespace churn::preprocess
