#include "churn/error.hpp"
#include "churn/pipeline.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

namespace churn::pipeline {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& doc, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!doc.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
    for (const auto& [key, value] : doc.items()) {
        bool known = false;
        for (auto a : allowed) known = known || key == a;
        if (!known) throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
    }
}

template <typename T>
void read_if(const json& doc, const char* key, T& out) {
    if (doc.contains(key)) out = doc.at(key).get<T>();
}

json layer_json(const mlp::LayerSpec& l) {
    return {{"size", l.size}, {"activation", mlp::to_string(l.activation)}, {"dropout_rate", l.dropout_rate}};
}

}  // namespace

json to_json(const ExperimentConfig& c) {
    json hidden = json::array();
    for (const auto& l : c.hidden_layers) hidden.push_back(layer_json(l));
    return {
        {"data_path", c.data_path},
        {"null_tokens", c.null_tokens},
        {"target_column", c.target_column},
        {"target_positive_value", c.target_positive_value},
        {"id_columns", c.id_columns},
        {"drop_threshold", c.drop_threshold},
        {"scaler", preprocess::to_string(c.scaler_kind)},
        {"split",
         {{"train_fraction", c.split.train_fraction},
          {"test_fraction", c.split.test_fraction},
          {"validation_fraction", c.split.validation_fraction},
          {"seed", c.split.seed},
          {"stratified", c.split.stratified}}},
        {"hidden_layers", hidden},
        {"l2_lambda", c.l2_lambda},
        {"train",
         {{"epochs", c.train.epochs},
          {"batch_size", c.train.batch_size},
          {"learning_rate", c.train.learning_rate},
          {"seed", c.train.seed},
          {"shuffle_each_epoch", c.train.shuffle_each_epoch},
          {"classification_threshold", c.train.classification_threshold}}},
        {"output_dir", c.output_dir},
    };
}

ExperimentConfig config_from_json(const json& doc) {
    try {
        reject_unknown_keys(doc, "config",
                            {"data_path", "null_tokens", "target_column", "target_positive_value", "id_columns",
                             "drop_threshold", "scaler", "split", "hidden_layers", "l2_lambda", "train", "output_dir",
                             "sweep"});
        ExperimentConfig c;
        read_if(doc, "data_path", c.data_path);
        read_if(doc, "null_tokens", c.null_tokens);
        read_if(doc, "target_column", c.target_column);
        read_if(doc, "target_positive_value", c.target_positive_value);
        read_if(doc, "id_columns", c.id_columns);
        read_if(doc, "drop_threshold", c.drop_threshold);
        read_if(doc, "l2_lambda", c.l2_lambda);
        read_if(doc, "output_dir", c.output_dir);
        if (doc.contains("scaler")) c.scaler_kind = preprocess::scaler_kind_from_string(doc.at("scaler").get<std::string>());
        if (doc.contains("split")) {
            const auto& s = doc.at("split");
            reject_unknown_keys(s, "config.split",
                                {"train_fraction", "test_fraction", "validation_fraction", "seed", "stratified"});
            read_if(s, "train_fraction", c.split.train_fraction);
            read_if(s, "test_fraction", c.split.test_fraction);
            read_if(s, "validation_fraction", c.split.validation_fraction);
            read_if(s, "seed", c.split.seed);
            read_if(s, "stratified", c.split.stratified);
        }
        if (doc.contains("hidden_layers")) {
            c.hidden_layers.clear();
            for (const auto& l : doc.at("hidden_layers")) {
                reject_unknown_keys(l, "config.hidden_layers[]", {"size", "activation", "dropout_rate"});
                mlp::LayerSpec spec;
                read_if(l, "size", spec.size);
                if (l.contains("activation")) spec.activation = mlp::activation_from_string(l.at("activation").get<std::string>());
                read_if(l, "dropout_rate", spec.dropout_rate);
                c.hidden_layers.push_back(spec);
            }
        }
        if (doc.contains("train")) {
            const auto& t = doc.at("train");
            reject_unknown_keys(t, "config.train",
                                {"epochs", "batch_size", "learning_rate", "seed", "shuffle_each_epoch",
                                 "classification_threshold"});
            read_if(t, "epochs", c.train.epochs);
            read_if(t, "batch_size", c.train.batch_size);
            read_if(t, "learning_rate", c.train.learning_rate);
            read_if(t, "seed", c.train.seed);
            read_if(t, "shuffle_each_epoch", c.train.shuffle_each_epoch);
            read_if(t, "classification_threshold", c.train.classification_threshold);
        }
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("config '" + path.string() + "': " + e.what());
    }
    return config_from_json(doc);
}

// ---------------------------------------------------------------------------

json to_json(const ModelArtifact& a) {
    return {{"format_version", ModelArtifact::kFormatVersion},
            {"plan", preprocess::to_json(a.plan)},
            {"model", mlp::to_json(a.model)},
            {"config", to_json(a.config)},
            {"fingerprint", {{"features", a.fingerprint.features}, {"probability", a.fingerprint.probability}}}};
}

ModelArtifact artifact_from_json(const json& doc) {
    try {
        if (!doc.is_object() || !doc.contains("format_version")) throw ParseError("artifact: missing format_version");
        const int version = doc.at("format_version").get<int>();
        if (version != ModelArtifact::kFormatVersion) {
            throw VersionError("artifact format version " + std::to_string(version) + " is not supported (expected " +
                               std::to_string(ModelArtifact::kFormatVersion) + ")");
        }
        ModelArtifact a;
        a.plan = preprocess::plan_from_json(doc.at("plan"));
        a.model = mlp::mlp_from_json(doc.at("model"));
        a.config = config_from_json(doc.at("config"));
        a.fingerprint.features = doc.at("fingerprint").at("features").get<std::vector<double>>();
        a.fingerprint.probability = doc.at("fingerprint").at("probability").get<double>();

        if (a.plan.feature_columns.size() != a.model.input_dim()) {
            throw SchemaError("artifact: plan has " + std::to_string(a.plan.feature_columns.size()) +
                              " features but model expects " + std::to_string(a.model.input_dim()));
        }
        if (a.fingerprint.features.size() != a.model.input_dim()) throw ParseError("artifact: fingerprint width mismatch");
        mlp::Matrix row(1, static_cast<Eigen::Index>(a.fingerprint.features.size()));
        for (std::size_t i = 0; i < a.fingerprint.features.size(); ++i) {
            row(0, static_cast<Eigen::Index>(i)) = a.fingerprint.features[i];
        }
        if (mlp::predict_proba(a.model, row)[0] != a.fingerprint.probability) {
            throw Error("artifact: fingerprint probability not reproduced; model parameters are corrupt");
        }
        return a;
    } catch (const json::exception& e) {
        throw ParseError(std::string("artifact: ") + e.what());
    }
}

void save_artifact(const std::filesystem::path& path, const ModelArtifact& artifact) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << to_json(artifact).dump(2) << '\n';
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

ModelArtifact load_artifact(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open artifact '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("artifact '" + path.string() + "': " + e.what());
    }
    return artifact_from_json(doc);
}

tabular::Frame load_for_plan(const std::filesystem::path& path, const ModelArtifact& artifact) {
    tabular::CsvOptions options;
    options.null_tokens = artifact.config.null_tokens;
    for (const auto& f : artifact.plan.feature_columns) {
        options.kind_overrides[f] =
            artifact.plan.is_categorical(f) ? tabular::ColumnKind::Categorical : tabular::ColumnKind::Numeric;
    }
    options.kind_overrides[artifact.plan.target_column] = artifact.plan.target_kind;
    return tabular::load_csv(path, options);
}

}  // namespace churn::pipeline
