#pragma once

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace churn::metrics {

/// 2x2 counts with respect to an explicit positive class (0 or 1).
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    int positive_class = 1;

    std::size_t total() const noexcept { return tp + fp + fn + tn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions, int positive_class);

struct ScalarMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
    // Set when tp+fp (precision) or tp+fn (recall) is zero; the metric is then 0.
    bool precision_degenerate = false;
    bool recall_degenerate = false;
};

ScalarMetrics scalar_metrics(const ConfusionMatrix& matrix);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // (0,0) first, (1,1) last
    double auc = 0.0;
};

/// Thresholds sweep the distinct scores from high to low; tied scores move
/// the curve in one (possibly diagonal) step, so the trapezoidal area equals
/// P(s+ > s-) + P(s+ = s-)/2. Rows whose label equals `positive_class` are
/// positives; higher scores are taken to indicate the positive class.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels, int positive_class);

/// Trapezoidal area under a list of points.
double trapezoid_area(std::span<const RocPoint> points);

/// One positive-class orientation of an evaluation.
struct OrientedReport {
    ConfusionMatrix matrix;
    ScalarMetrics scalars;
    RocCurve roc;
};

/// Evaluation of probability scores for class 1, reported with class 1
/// (churner) as positive and with class 0 as positive.
struct EvalReport {
    double threshold = 0.5;
    std::size_t n_rows = 0;
    std::size_t n_class1 = 0;
    double majority_baseline_accuracy = 0.0;
    OrientedReport class1_positive;
    OrientedReport class0_positive;
};

EvalReport evaluate(std::span<const double> probabilities, std::span<const int> labels, double threshold);

nlohmann::json to_json(const ConfusionMatrix& m);
nlohmann::json to_json(const ScalarMetrics& s);
nlohmann::json to_json(const EvalReport& report);

/// Two-column CSV: header `fpr,tpr` then one line per point.
void save_roc_csv(const std::filesystem::path& path, const RocCurve& roc);

}  // namespace churn::metrics
