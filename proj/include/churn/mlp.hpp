#pragma once

#include "churn/preprocess.hpp"
#include "churn/random.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace churn::mlp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Sigmoid, Relu };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view text);

struct LayerSpec {
    std::size_t size = 1;
    Activation activation = Activation::Sigmoid;
    double dropout_rate = 0.0;

    bool operator==(const LayerSpec&) const = default;
};

/// Logistic function, evaluated on the branch that cannot overflow.
inline double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

struct Gradients;

/// Fully connected feed-forward binary classifier.
///
/// Layer l maps its input a to act(W_l a + b_l); W_l is fan_out x fan_in.
/// The last layer has a single sigmoid unit and no dropout.
class Mlp {
public:
    static constexpr int kFormatVersion = 1;

    Mlp() = default;
    /// Takes explicit parameters; shapes and finiteness are validated.
    Mlp(std::size_t input_dim, std::vector<LayerSpec> layers, std::vector<Matrix> weights,
        std::vector<Vector> biases, double l2_lambda);

    std::size_t input_dim() const noexcept { return input_dim_; }
    const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
    const std::vector<Matrix>& weights() const noexcept { return weights_; }
    const std::vector<Vector>& biases() const noexcept { return biases_; }
    double l2_lambda() const noexcept { return l2_lambda_; }

    /// Sum over layers of the squared Frobenius norm of W (biases excluded).
    double weight_norm_squared() const;

    /// Bumped on every parameter update; forward caches remember it.
    std::uint64_t generation() const noexcept { return generation_; }

    /// In-place w <- w - lr * g for every weight and bias.
    void apply_gradient_step(const Gradients& grads, double learning_rate);

    bool operator==(const Mlp& other) const;

private:
    std::size_t input_dim_ = 0;
    std::vector<LayerSpec> layers_;
    std::vector<Matrix> weights_;
    std::vector<Vector> biases_;
    double l2_lambda_ = 0.0;
    std::uint64_t generation_ = 0;
};

/// Glorot-uniform weights, zero biases.
Mlp init(std::size_t input_dim, std::vector<LayerSpec> layers, double l2_lambda, std::uint64_t seed);

enum class Mode { Train, Eval };

/// Everything a backward pass needs from the forward pass over one batch.
/// Column j of every matrix belongs to batch row j.
struct ForwardCache {
    Mode mode = Mode::Eval;
    std::uint64_t generation = 0;
    Matrix input;                     // input_dim x batch
    std::vector<Matrix> pre_activation;  // S = W a + b, per layer
    std::vector<Matrix> activation;      // post-activation, post-dropout
    std::vector<Matrix> dropout_mask;    // 0 or 1/(1-p); empty when layer has no dropout

    std::size_t batch_size() const noexcept { return static_cast<std::size_t>(input.cols()); }
    /// Output probabilities, one per batch row.
    Vector probabilities() const;
};

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    double squared_norm() const;
};

/// Forward pass over a batch given row-wise (batch x input_dim). `rng` draws
/// the dropout masks and is required in Train mode.
ForwardCache forward(const Mlp& model, const Matrix& batch_rows, Mode mode, Rng* rng = nullptr);

/// Single-row convenience: returns (probability, cache).
std::pair<double, ForwardCache> forward(const Mlp& model, std::span<const double> x, Mode mode, Rng* rng = nullptr);

/// Probabilities are clamped to [1e-12, 1-1e-12] before the log.
inline constexpr double kProbabilityClamp = 1e-12;

/// Mean binary cross-entropy plus (lambda/2) * sum ||W||_F^2 / batch_size.
double loss(const Mlp& model, std::span<const double> probabilities, std::span<const int> labels);

/// Exact gradient of `loss` for the batch held in `cache`.
Gradients backward(const Mlp& model, const ForwardCache& cache, std::span<const int> labels);

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double learning_rate = 0.01;
    std::uint64_t seed = 0;
    bool shuffle_each_epoch = true;
    double classification_threshold = 0.5;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> train_accuracy;
    std::vector<double> validation_loss;
    std::vector<double> validation_accuracy;

    std::size_t epochs() const noexcept { return train_loss.size(); }
};

/// Mini-batch SGD. Deterministic in (model, data, config).
std::pair<Mlp, TrainHistory> train(Mlp model, const preprocess::NumericDataset& train_set,
                                   const preprocess::NumericDataset& validation_set, const TrainConfig& config);

/// Eval-mode probabilities for each row of `features` (n_rows x input_dim).
std::vector<double> predict_proba(const Mlp& model, const Matrix& features);

/// 1 iff probability >= threshold.
std::vector<int> predict_label(const Mlp& model, const Matrix& features, double threshold = 0.5);
std::vector<int> threshold_labels(std::span<const double> probabilities, double threshold);

nlohmann::json to_json(const Mlp& model);
Mlp mlp_from_json(const nlohmann::json& doc);

}  // namespace churn::mlp
