// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "churn/metrics.hpp"
#include "churn/mlp.hpp"
#include "churn/pipeline.hpp"
#include "churn/preprocess.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace churn;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kAccuracyTol = 1e-12;
constexpr double kGradientTol = 1e-5;
constexpr double kFiniteDiffStep = 1e-6;
constexpr double kAucTol = 1e-12;
constexpr double kMinAuc = 0.85;
constexpr double kMaxSeconds = 300.0;
constexpr double kMonotoneSlack = 1e-9;
constexpr double kStandardErrors = 3.0;
constexpr int kDropoutDraws = 100000;
constexpr int kGradientNets = 24;
constexpr int kAucInstances = 200;

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] %d. %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double round_percent_1dp(double x) { return std::round(x * 1000.0) / 10.0; }

void published_arithmetic() {
    const metrics::ConfusionMatrix m{4841, 112, 9, 38, 0};
    const auto s = metrics::scalar_metrics(m);
    const bool ok = round_percent_1dp(s.precision) == 97.7 && round_percent_1dp(s.recall) == 99.8 &&
                    round_percent_1dp(s.f_measure) == 98.8 && std::abs(s.accuracy - 0.9758) <= kAccuracyTol &&
                    std::round(s.precision * 1e4) == 9774 && std::round(s.recall * 1e4) == 9981 &&
                    std::round(s.f_measure * 1e4) == 9877;
    report(1, "published confusion matrix arithmetic", ok,
           fmt("precision %.4f recall %.4f f %.4f accuracy %.6f", s.precision, s.recall, s.f_measure, s.accuracy));
}

void gradient_oracle() {
    double worst = 0.0;
    std::size_t params = 0;
    int nets = 0;
    for (double lambda : {0.0, 0.1}) {
        for (int i = 0; i < kGradientNets; ++i) {
            const auto net = testing::random_net(1000 + static_cast<std::uint64_t>(i), lambda);
            Rng rng(7);
            const auto cache = mlp::forward(net.model, net.x, mlp::Mode::Train, &rng);
            const auto grads = mlp::backward(net.model, cache, net.y);
            const auto check = testing::finite_difference_check(net.model, grads, net.x, net.y, kFiniteDiffStep);
            worst = std::max(worst, check.max_relative_error);
            params += check.parameters;
            ++nets;
        }
    }
    report(2, "analytic gradients vs central differences", worst <= kGradientTol,
           fmt("%d nets, %zu parameters, max relative error %.3g (tol %.0e)", nets, params, worst, kGradientTol));
}

void auc_oracle() {
    Rng rng(2024);
    double worst = 0.0;
    int tied = 0;
    for (int i = 0; i < kAucInstances; ++i) {
        const auto n = 2 + static_cast<std::size_t>(uniform_index(rng, 199));
        const bool ties = i % 2 == 0;
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        for (std::size_t k = 0; k < n; ++k) {
            scores[k] = ties ? static_cast<double>(uniform_index(rng, 5)) / 4.0 : uniform01(rng);
            labels[k] = static_cast<int>(uniform_index(rng, 2));
        }
        labels[0] = 0;
        labels[1] = 1;
        tied += ties;
        for (int positive : {0, 1}) {
            const double trap = metrics::roc_curve(scores, labels, positive).auc;
            worst = std::max(worst, std::abs(trap - testing::pair_count_auc(scores, labels, positive)));
        }
    }
    const std::vector<double> s{0.9, 0.8, 0.3, 0.2};
    const std::vector<int> y{1, 0, 1, 0};
    const double fixed = metrics::roc_curve(s, y, 1).auc;
    report(3, "trapezoidal AUC vs pair counting", worst <= kAucTol && fixed == 0.75,
           fmt("%d instances (%d with ties), max difference %.3g, fixed example %.17g", kAucInstances, tied, worst,
               fixed));
}

bool valid_roc(const metrics::RocCurve& roc) {
    if (roc.points.empty()) return false;
    const auto& first = roc.points.front();
    const auto& last = roc.points.back();
    if (first.fpr != 0.0 || first.tpr != 0.0 || last.fpr != 1.0 || last.tpr != 1.0) return false;
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
        if (roc.points[i].fpr < roc.points[i - 1].fpr || roc.points[i].tpr < roc.points[i - 1].tpr) return false;
    }
    return roc.auc >= 0.0 && roc.auc <= 1.0;
}

bool monotone_full_batch() {
    const auto data = testing::separable(200, 1);
    mlp::TrainConfig config;
    config.epochs = 100;
    config.batch_size = data.n_rows();
    config.learning_rate = 0.01;
    const auto model = mlp::init(2, {{4, mlp::Activation::Sigmoid, 0.0}, {1}}, 0.0, 2);
    const auto history = mlp::train(model, data, data, config).second;
    for (std::size_t e = 1; e < history.epochs(); ++e) {
        if (history.train_loss[e] > history.train_loss[e - 1] + kMonotoneSlack) return false;
    }
    return true;
}

std::string report_text(const pipeline::RunResult& r) { return pipeline::report_document(r.report); }

void end_to_end(const tabular::Frame& frame, const pipeline::RunResult& run, double seconds) {
    const auto& r = run.report;
    const double auc = r.class1_positive.roc.auc;
    const double accuracy = r.class1_positive.scalars.accuracy;
    const bool roc_ok = valid_roc(r.class1_positive.roc) && valid_roc(r.class0_positive.roc);
    const bool mono = monotone_full_batch();
    const bool ok = frame.n_rows() == 5000 && seconds < kMaxSeconds && auc >= kMinAuc &&
                    accuracy > r.majority_baseline_accuracy && roc_ok && mono;
    report(4, "default pipeline on the 5000-row synthetic set", ok,
           fmt("%.1f s, test AUC %.4f, accuracy %.4f vs baseline %.4f, ROC %s, full-batch loss %s", seconds, auc,
               accuracy, r.majority_baseline_accuracy, roc_ok ? "valid" : "invalid",
               mono ? "non-increasing" : "increased"));
}

void regularization() {
    const auto model = mlp::init(3, {{5, mlp::Activation::Sigmoid, 0.3}, {1}}, 0.0, 4);
    mlp::Matrix x(1, 3);
    x << 0.5, -1.0, 2.0;
    const auto eval = mlp::forward(model, x, mlp::Mode::Eval);
    Rng rng(77);
    mlp::Vector sum = mlp::Vector::Zero(5), sum_sq = mlp::Vector::Zero(5);
    for (int i = 0; i < kDropoutDraws; ++i) {
        const auto cache = mlp::forward(model, x, mlp::Mode::Train, &rng);
        const mlp::Vector a = cache.activation[0].col(0);
        sum += a;
        sum_sq += a.cwiseProduct(a);
    }
    double worst_z = 0.0;
    for (Eigen::Index i = 0; i < 5; ++i) {
        const double mean = sum(i) / kDropoutDraws;
        const double var = sum_sq(i) / kDropoutDraws - mean * mean;
        const double se = std::sqrt(var / kDropoutDraws);
        worst_z = std::max(worst_z, std::abs(mean - eval.activation[0](i, 0)) / se);
    }

    const auto data = testing::separable(200, 4);
    mlp::TrainConfig config;
    config.epochs = 60;
    config.learning_rate = 0.5;
    config.seed = 5;
    const auto plain = mlp::init(2, {{4, mlp::Activation::Sigmoid, 0.0}, {1}}, 0.0, 6);
    const mlp::Mlp decayed(2, plain.layers(), plain.weights(), plain.biases(), 0.01);
    const double w_plain = mlp::train(plain, data, data, config).first.weight_norm_squared();
    const double w_decayed = mlp::train(decayed, data, data, config).first.weight_norm_squared();

    report(5, "dropout expectation and L2 shrinkage", worst_z <= kStandardErrors && w_decayed < w_plain,
           fmt("%d maskings, worst deviation %.2f standard errors; sum W^2 %.6g (lambda 0.01) vs %.6g (lambda 0)",
               kDropoutDraws, worst_z, w_decayed, w_plain));
}

void determinism(const tabular::Frame& frame, const pipeline::ExperimentConfig& config,
                 const pipeline::RunResult& first) {
    const auto second = pipeline::run_train(config, frame);
    const bool same_report = report_text(first) == report_text(second);

    const auto dir = fs::temp_directory_path() / "churn_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    pipeline::save_artifact(dir / "model.json", first.artifact);
    const auto loaded = pipeline::load_artifact(dir / "model.json");
    std::vector<std::size_t> rows(100);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i * 37;
    const auto sample = frame.select_rows(rows);
    const auto before = pipeline::predict(first.artifact, sample);
    const auto after = pipeline::predict(loaded, sample);
    const bool same_predictions = before.size() == 100 && before == after;
    fs::remove_all(dir);

    report(6, "determinism and persistence", same_report && same_predictions,
           fmt("report JSON %s across runs; %zu reloaded predictions %s", same_report ? "identical" : "differs",
               before.size(), same_predictions ? "bit-identical" : "differ"));
}

void split_arithmetic() {
    const preprocess::SplitSpec spec;
    std::vector<int> labels(50000, 0);
    for (std::size_t i = 0; i < labels.size(); i += 33) labels[i] = 1;
    const auto strat = preprocess::split_indices(labels, spec);
    auto plain_spec = spec;
    plain_spec.stratified = false;
    const auto plain = preprocess::split_indices(labels, plain_spec);
    const auto sized = [](const auto& s) {
        return s.train.size() == 40000 && s.validation.size() == 5000 && s.test.size() == 5000;
    };
    report(7, "50000-row split sizes", sized(strat) && sized(plain),
           fmt("stratified %zu/%zu/%zu, unstratified %zu/%zu/%zu", strat.train.size(), strat.validation.size(),
               strat.test.size(), plain.train.size(), plain.validation.size(), plain.test.size()));
}

}  // namespace

int main() {
    try {
        published_arithmetic();
        gradient_oracle();
        auc_oracle();

        const auto frame = pipeline::gen_synthetic({5000, 0.03, 0.05, 7});
        const pipeline::ExperimentConfig config;
        const auto start = std::chrono::steady_clock::now();
        const auto run = pipeline::run_train(config, frame);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        end_to_end(frame, run, seconds);

        regularization();
        determinism(frame, config, run);
        split_arithmetic();
    } catch (const std::exception& e) {
        std::printf("[FAIL] aborted: %s\n", e.what());
        return 2;
    }
    std::printf("%s: %d failing criteria\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
    return failures == 0 ? 0 : 1;
}
