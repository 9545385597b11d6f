#include "churn/metrics.hpp"

#include "churn/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

namespace churn::metrics {

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions, int positive_class) {
    if (labels.size() != predictions.size()) throw ConfigError("confusion: labels and predictions differ in length");
    if (labels.empty()) throw ConfigError("confusion: empty input");
    if (positive_class != 0 && positive_class != 1) throw ConfigError("confusion: positive class must be 0 or 1");

    ConfusionMatrix m;
    m.positive_class = positive_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool actual = labels[i] == positive_class;
        const bool predicted = predictions[i] == positive_class;
        if (actual && predicted) ++m.tp;
        else if (!actual && predicted) ++m.fp;
        else if (actual) ++m.fn;
        else ++m.tn;
    }
    return m;
}

ScalarMetrics scalar_metrics(const ConfusionMatrix& m) {
    if (m.total() == 0) throw ConfigError("scalar_metrics: empty confusion matrix");
    ScalarMetrics s;
    const auto d = [](std::size_t x) { return static_cast<double>(x); };
    s.accuracy = d(m.tp + m.tn) / d(m.total());
    if (m.tp + m.fp == 0) {
        s.precision_degenerate = true;
    } else {
        s.precision = d(m.tp) / d(m.tp + m.fp);
    }
    if (m.tp + m.fn == 0) {
        s.recall_degenerate = true;
    } else {
        s.recall = d(m.tp) / d(m.tp + m.fn);
    }
    if (s.precision + s.recall > 0.0) s.f_measure = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

double trapezoid_area(std::span<const RocPoint> points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
    }
    return area;
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels, int positive_class) {
    if (scores.size() != labels.size()) throw ConfigError("roc: scores and labels differ in length");
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += y == positive_class ? 1 : 0;
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw ConfigError("roc: undefined ROC, labels contain a single class");
    for (double s : scores) {
        if (!std::isfinite(s)) throw ConfigError("roc: non-finite score");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve roc;
    roc.points.push_back({0.0, 0.0});
    // Accumulate in integers; area from integer counts keeps it exact up to one division.
    std::size_t tp = 0, fp = 0;
    double area_twice = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        const std::size_t tp_before = tp, fp_before = fp;
        for (; i < order.size() && scores[order[i]] == s; ++i) {
            if (labels[order[i]] == positive_class) ++tp;
            else ++fp;
        }
        area_twice += static_cast<double>((fp - fp_before) * (tp + tp_before));
        roc.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                              static_cast<double>(tp) / static_cast<double>(n_pos)});
    }
    roc.auc = area_twice / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
    return roc;
}

EvalReport evaluate(std::span<const double> probabilities, std::span<const int> labels, double threshold) {
    if (probabilities.size() != labels.size()) throw ConfigError("evaluate: length mismatch");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must be in (0, 1)");
    EvalReport report;
    report.threshold = threshold;
    report.n_rows = labels.size();
    report.n_class1 = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const std::size_t majority = std::max(report.n_class1, report.n_rows - report.n_class1);
    report.majority_baseline_accuracy =
        report.n_rows ? static_cast<double>(majority) / static_cast<double>(report.n_rows) : 0.0;

    std::vector<int> predicted;
    predicted.reserve(probabilities.size());
    for (double p : probabilities) predicted.push_back(p >= threshold ? 1 : 0);

    // Class-0 scores are the negated probabilities: strictly order-reversing,
    // so no ties are introduced and the AUC matches the class-1 orientation.
    std::vector<double> class0_scores(probabilities.begin(), probabilities.end());
    for (double& s : class0_scores) s = -s;

    report.class1_positive.matrix = confusion(labels, predicted, 1);
    report.class1_positive.scalars = scalar_metrics(report.class1_positive.matrix);
    report.class1_positive.roc = roc_curve(probabilities, labels, 1);
    report.class0_positive.matrix = confusion(labels, predicted, 0);
    report.class0_positive.scalars = scalar_metrics(report.class0_positive.matrix);
    report.class0_positive.roc = roc_curve(class0_scores, labels, 0);
    return report;
}

nlohmann::json to_json(const ConfusionMatrix& m) {
    return {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}, {"positive_class", m.positive_class}};
}

nlohmann::json to_json(const ScalarMetrics& s) {
    return {{"accuracy", s.accuracy},
            {"precision", s.precision},
            {"recall", s.recall},
            {"f_measure", s.f_measure},
            {"precision_degenerate", s.precision_degenerate},
            {"recall_degenerate", s.recall_degenerate}};
}

namespace {

nlohmann::json oriented_json(const OrientedReport& r) {
    nlohmann::json doc = to_json(r.scalars);
    doc["confusion_matrix"] = to_json(r.matrix);
    doc["auc"] = r.roc.auc;
    doc["roc_points"] = r.roc.points.size();
    return doc;
}

}  // namespace

nlohmann::json to_json(const EvalReport& report) {
    return {{"threshold", report.threshold},
            {"n_rows", report.n_rows},
            {"n_class1", report.n_class1},
            {"majority_baseline_accuracy", report.majority_baseline_accuracy},
            {"positive_churner", oriented_json(report.class1_positive)},
            {"positive_non_churner", oriented_json(report.class0_positive)}};
}

void save_roc_csv(const std::filesystem::path& path, const RocCurve& roc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "fpr,tpr\n";
    char buf[64];
    const auto put = [&](double v) { out.write(buf, std::to_chars(buf, buf + sizeof(buf), v).ptr - buf); };
    for (const auto& p : roc.points) {
        put(p.fpr);
        out << ',';
        put(p.tpr);
        out << '\n';
    }
}

}  // namespace churn::metrics
