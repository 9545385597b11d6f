#include "churn/mlp.hpp"

#include "churn/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

namespace churn::mlp {
namespace {

std::uint64_t next_generation() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

Matrix activate(Activation a, const Matrix& z) {
    if (a == Activation::Relu) return z.cwiseMax(0.0);
    return z.unaryExpr([](double s) { return sigmoid(s); });
}

Matrix activation_derivative(Activation a, const Matrix& z) {
    if (a == Activation::Relu) return z.unaryExpr([](double s) { return s > 0.0 ? 1.0 : 0.0; });
    return z.unaryExpr([](double s) {
        const double p = sigmoid(s);
        return p * (1.0 - p);
    });
}

void validate_layers(std::size_t input_dim, const std::vector<LayerSpec>& layers) {
    if (input_dim == 0) throw ConfigError("mlp: input_dim must be >= 1");
    if (layers.empty()) throw ConfigError("mlp: at least one layer required");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].size == 0) throw ConfigError("mlp: layer " + std::to_string(l) + " has zero size");
        if (!(layers[l].dropout_rate >= 0.0 && layers[l].dropout_rate < 1.0)) {
            throw ConfigError("mlp: layer " + std::to_string(l) + " dropout rate must be in [0, 1)");
        }
    }
    const auto& out = layers.back();
    if (out.size != 1) throw ConfigError("mlp: final layer must have size 1, got " + std::to_string(out.size));
    if (out.activation != Activation::Sigmoid) throw ConfigError("mlp: final layer must use sigmoid");
    if (out.dropout_rate != 0.0) throw ConfigError("mlp: final layer cannot use dropout");
}

}  // namespace

std::string_view to_string(Activation a) { return a == Activation::Sigmoid ? "sigmoid" : "relu"; }

Activation activation_from_string(std::string_view text) {
    if (text == "sigmoid") return Activation::Sigmoid;
    if (text == "relu") return Activation::Relu;
    throw ConfigError("unknown activation '" + std::string(text) + "'");
}

Mlp::Mlp(std::size_t input_dim, std::vector<LayerSpec> layers, std::vector<Matrix> weights,
         std::vector<Vector> biases, double l2_lambda)
    : input_dim_(input_dim),
      layers_(std::move(layers)),
      weights_(std::move(weights)),
      biases_(std::move(biases)),
      l2_lambda_(l2_lambda),
      generation_(next_generation()) {
    validate_layers(input_dim_, layers_);
    if (!(l2_lambda_ >= 0.0) || !std::isfinite(l2_lambda_)) throw ConfigError("mlp: l2_lambda must be >= 0");
    if (weights_.size() != layers_.size() || biases_.size() != layers_.size()) {
        throw ConfigError("mlp: need one weight matrix and bias vector per layer");
    }
    std::size_t fan_in = input_dim_;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto fan_out = static_cast<Eigen::Index>(layers_[l].size);
        if (weights_[l].rows() != fan_out || weights_[l].cols() != static_cast<Eigen::Index>(fan_in) ||
            biases_[l].size() != fan_out) {
            throw ConfigError("mlp: parameter shapes of layer " + std::to_string(l) + " do not chain");
        }
        if (!weights_[l].allFinite() || !biases_[l].allFinite()) {
            throw ConfigError("mlp: non-finite parameter in layer " + std::to_string(l));
        }
        fan_in = layers_[l].size;
    }
}

double Mlp::weight_norm_squared() const {
    double total = 0.0;
    for (const auto& w : weights_) total += w.squaredNorm();
    return total;
}

void Mlp::apply_gradient_step(const Gradients& grads, double learning_rate) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        weights_[l] -= learning_rate * grads.weights[l];
        biases_[l] -= learning_rate * grads.biases[l];
    }
    generation_ = next_generation();
}

bool Mlp::operator==(const Mlp& other) const {
    return input_dim_ == other.input_dim_ && layers_ == other.layers_ && weights_ == other.weights_ &&
           biases_ == other.biases_ && l2_lambda_ == other.l2_lambda_;
}

Mlp init(std::size_t input_dim, std::vector<LayerSpec> layers, double l2_lambda, std::uint64_t seed) {
    validate_layers(input_dim, layers);
    Rng rng(seed);
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    std::size_t fan_in = input_dim;
    for (const auto& layer : layers) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + layer.size));
        Matrix w(static_cast<Eigen::Index>(layer.size), static_cast<Eigen::Index>(fan_in));
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = limit * (2.0 * uniform01(rng) - 1.0);
        }
        weights.push_back(std::move(w));
        biases.push_back(Vector::Zero(static_cast<Eigen::Index>(layer.size)));
        fan_in = layer.size;
    }
    return Mlp(input_dim, std::move(layers), std::move(weights), std::move(biases), l2_lambda);
}

Vector ForwardCache::probabilities() const {
    if (activation.empty()) throw Error("forward cache is empty");
    return activation.back().row(0).transpose();
}

double Gradients::squared_norm() const {
    double total = 0.0;
    for (const auto& w : weights) total += w.squaredNorm();
    for (const auto& b : biases) total += b.squaredNorm();
    return total;
}

ForwardCache forward(const Mlp& model, const Matrix& batch_rows, Mode mode, Rng* rng) {
    if (batch_rows.cols() != static_cast<Eigen::Index>(model.input_dim())) {
        throw SchemaError("forward: input has " + std::to_string(batch_rows.cols()) + " features, model expects " +
                          std::to_string(model.input_dim()));
    }
    if (!batch_rows.allFinite()) throw SchemaError("forward: non-finite input");
    if (mode == Mode::Train && rng == nullptr) throw ConfigError("forward: Train mode needs a random source");

    ForwardCache cache;
    cache.mode = mode;
    cache.generation = model.generation();
    cache.input = batch_rows.transpose();

    const auto& layers = model.layers();
    const Matrix* a = &cache.input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Matrix z = model.weights()[l] * *a;
        z.colwise() += model.biases()[l];
        Matrix out = activate(layers[l].activation, z);
        Matrix mask;
        const double p = layers[l].dropout_rate;
        if (mode == Mode::Train && p > 0.0) {
            // Inverted dropout: keep with probability 1-p, scale survivors.
            const double keep_scale = 1.0 / (1.0 - p);
            mask.resize(out.rows(), out.cols());
            for (Eigen::Index j = 0; j < mask.cols(); ++j) {
                for (Eigen::Index i = 0; i < mask.rows(); ++i) {
                    mask(i, j) = uniform01(*rng) < p ? 0.0 : keep_scale;
                }
            }
            out = out.cwiseProduct(mask);
        }
        cache.pre_activation.push_back(std::move(z));
        cache.activation.push_back(std::move(out));
        cache.dropout_mask.push_back(std::move(mask));
        a = &cache.activation.back();
    }
    return cache;
}

std::pair<double, ForwardCache> forward(const Mlp& model, std::span<const double> x, Mode mode, Rng* rng) {
    Matrix row(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = x[i];
    auto cache = forward(model, row, mode, rng);
    const double p = cache.activation.back()(0, 0);
    return {p, std::move(cache)};
}

double loss(const Mlp& model, std::span<const double> probabilities, std::span<const int> labels) {
    if (probabilities.empty()) throw ConfigError("loss: empty batch");
    if (probabilities.size() != labels.size()) throw ConfigError("loss: probabilities and labels differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        const double p = std::clamp(probabilities[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
        total += labels[i] == 1 ? std::log(p) : std::log1p(-p);
    }
    const auto m = static_cast<double>(probabilities.size());
    return -total / m + 0.5 * model.l2_lambda() * model.weight_norm_squared() / m;
}

Gradients backward(const Mlp& model, const ForwardCache& cache, std::span<const int> labels) {
    const auto& layers = model.layers();
    if (cache.activation.size() != layers.size() || cache.input.size() == 0) {
        throw Error("backward: forward cache is missing or incomplete");
    }
    if (cache.mode != Mode::Train) throw Error("backward: cache must come from a Train-mode forward pass");
    if (cache.generation != model.generation()) throw Error("backward: forward cache is stale (model changed)");
    const std::size_t m = cache.batch_size();
    if (labels.size() != m) throw ConfigError("backward: label count does not match batch size");

    const double inv_m = 1.0 / static_cast<double>(m);
    Matrix delta(1, static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        delta(0, col) = (cache.activation.back()(0, col) - static_cast<double>(labels[j])) * inv_m;
    }

    Gradients grads;
    grads.weights.resize(layers.size());
    grads.biases.resize(layers.size());
    const double l2_scale = model.l2_lambda() * inv_m;
    for (std::size_t l = layers.size(); l-- > 0;) {
        const Matrix& a_prev = l == 0 ? cache.input : cache.activation[l - 1];
        grads.weights[l] = delta * a_prev.transpose() + l2_scale * model.weights()[l];
        grads.biases[l] = delta.rowwise().sum();
        if (l == 0) break;
        Matrix upstream = model.weights()[l].transpose() * delta;
        if (cache.dropout_mask[l - 1].size() != 0) upstream = upstream.cwiseProduct(cache.dropout_mask[l - 1]);
        delta = upstream.cwiseProduct(activation_derivative(layers[l - 1].activation, cache.pre_activation[l - 1]));
    }
    return grads;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train: learning_rate must be > 0");
    if (!(classification_threshold > 0.0 && classification_threshold < 1.0)) {
        throw ConfigError("train: classification threshold must be in (0, 1)");
    }
}

namespace {

double accuracy(std::span<const double> probabilities, std::span<const int> labels, double threshold) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int predicted = probabilities[i] >= threshold ? 1 : 0;
        correct += predicted == labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace

std::pair<Mlp, TrainHistory> train(Mlp model, const preprocess::NumericDataset& train_set,
                                   const preprocess::NumericDataset& validation_set, const TrainConfig& config) {
    config.validate();
    const auto dim = static_cast<Eigen::Index>(model.input_dim());
    if (train_set.features.cols() != dim || validation_set.features.cols() != dim) {
        throw SchemaError("train: dataset width does not match model input_dim " + std::to_string(dim));
    }
    if (train_set.n_rows() == 0 || validation_set.n_rows() == 0) throw ConfigError("train: empty dataset");

    Rng rng(config.seed);
    const std::size_t n = train_set.n_rows();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainHistory history;
    Matrix batch;
    std::vector<int> batch_labels;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.shuffle_each_epoch) shuffle(std::span(order), rng);
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t count = std::min(config.batch_size, n - start);
            batch.resize(static_cast<Eigen::Index>(count), dim);
            batch_labels.resize(count);
            for (std::size_t i = 0; i < count; ++i) {
                const auto row = static_cast<Eigen::Index>(order[start + i]);
                batch.row(static_cast<Eigen::Index>(i)) = train_set.features.row(row);
                batch_labels[i] = train_set.labels[order[start + i]];
            }
            const auto cache = forward(model, batch, Mode::Train, &rng);
            const auto grads = backward(model, cache, batch_labels);
            model.apply_gradient_step(grads, config.learning_rate);
        }

        const auto train_p = predict_proba(model, train_set.features);
        const auto val_p = predict_proba(model, validation_set.features);
        const double train_loss = loss(model, train_p, train_set.labels);
        const double val_loss = loss(model, val_p, validation_set.labels);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
            throw DivergenceError(epoch + 1, "training diverged at epoch " + std::to_string(epoch + 1) +
                                                 " (non-finite loss)");
        }
        history.train_loss.push_back(train_loss);
        history.train_accuracy.push_back(accuracy(train_p, train_set.labels, config.classification_threshold));
        history.validation_loss.push_back(val_loss);
        history.validation_accuracy.push_back(
            accuracy(val_p, validation_set.labels, config.classification_threshold));
    }
    return {std::move(model), std::move(history)};
}

std::vector<double> predict_proba(const Mlp& model, const Matrix& features) {
    if (features.cols() != static_cast<Eigen::Index>(model.input_dim())) {
        throw SchemaError("predict: input has " + std::to_string(features.cols()) + " features, model expects " +
                          std::to_string(model.input_dim()));
    }
    // One row at a time so a row's probability never depends on its batch.
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(features.rows()));
    const auto& layers = model.layers();
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
        Vector a = features.row(r).transpose();
        if (!a.allFinite()) throw SchemaError("predict: non-finite input at row " + std::to_string(r));
        for (std::size_t l = 0; l < layers.size(); ++l) {
            Vector z = model.weights()[l] * a + model.biases()[l];
            a = activate(layers[l].activation, z);
        }
        out.push_back(a(0));
    }
    return out;
}

std::vector<int> threshold_labels(std::span<const double> probabilities, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must be in (0, 1)");
    std::vector<int> out;
    out.reserve(probabilities.size());
    for (double p : probabilities) out.push_back(p >= threshold ? 1 : 0);
    return out;
}

std::vector<int> predict_label(const Mlp& model, const Matrix& features, double threshold) {
    return threshold_labels(predict_proba(model, features), threshold);
}

nlohmann::json to_json(const Mlp& model) {
    using nlohmann::json;
    json layers = json::array();
    for (std::size_t l = 0; l < model.layers().size(); ++l) {
        const auto& spec = model.layers()[l];
        const auto& w = model.weights()[l];
        const auto& b = model.biases()[l];
        json rows = json::array();
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < w.cols(); ++c) row.push_back(w(r, c));
            rows.push_back(std::move(row));
        }
        json bias = json::array();
        for (Eigen::Index r = 0; r < b.size(); ++r) bias.push_back(b(r));
        layers.push_back({{"size", spec.size},
                          {"activation", to_string(spec.activation)},
                          {"dropout_rate", spec.dropout_rate},
                          {"weights", std::move(rows)},
                          {"bias", std::move(bias)}});
    }
    return {{"format_version", Mlp::kFormatVersion},
            {"input_dim", model.input_dim()},
            {"l2_lambda", model.l2_lambda()},
            {"layers", std::move(layers)}};
}

Mlp mlp_from_json(const nlohmann::json& doc) {
    try {
        const int version = doc.at("format_version").get<int>();
        if (version != Mlp::kFormatVersion) {
            throw VersionError("mlp format version " + std::to_string(version) + " is not supported (expected " +
                               std::to_string(Mlp::kFormatVersion) + ")");
        }
        const auto input_dim = doc.at("input_dim").get<std::size_t>();
        std::vector<LayerSpec> specs;
        std::vector<Matrix> weights;
        std::vector<Vector> biases;
        std::size_t fan_in = input_dim;
        for (const auto& layer : doc.at("layers")) {
            LayerSpec spec{layer.at("size").get<std::size_t>(),
                           activation_from_string(layer.at("activation").get<std::string>()),
                           layer.at("dropout_rate").get<double>()};
            const auto& rows = layer.at("weights");
            const auto& bias = layer.at("bias");
            if (rows.size() != spec.size || bias.size() != spec.size) {
                throw ParseError("mlp: layer shape does not match its size");
            }
            Matrix w(static_cast<Eigen::Index>(spec.size), static_cast<Eigen::Index>(fan_in));
            Vector b(static_cast<Eigen::Index>(spec.size));
            for (std::size_t r = 0; r < spec.size; ++r) {
                if (rows[r].size() != fan_in) throw ParseError("mlp: weight row width does not match fan-in");
                for (std::size_t c = 0; c < fan_in; ++c) {
                    w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
                }
                b(static_cast<Eigen::Index>(r)) = bias[r].get<double>();
            }
            specs.push_back(spec);
            weights.push_back(std::move(w));
            biases.push_back(std::move(b));
            fan_in = spec.size;
        }
        return Mlp(input_dim, std::move(specs), std::move(weights), std::move(biases),
                   doc.at("l2_lambda").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("mlp: ") + e.what());
    }
}

}  // namespace churn::mlp
