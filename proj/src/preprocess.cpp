#include "churn/preprocess.hpp"

#include "churn/error.hpp"

#include <cmath>

namespace churn::preprocess {

using tabular::CellValue;
using tabular::ColumnKind;
using tabular::Frame;

std::string_view to_string(ScalerKind kind) {
    return kind == ScalerKind::ZScore ? "zscore" : "minmax";
}

ScalerKind scaler_kind_from_string(std::string_view text) {
    if (text == "zscore") return ScalerKind::ZScore;
    if (text == "minmax") return ScalerKind::MinMax;
    throw ConfigError("unknown scaler '" + std::string(text) + "' (expected zscore or minmax)");
}

NumericDataset NumericDataset::subset(std::span<const std::size_t> rows) const {
    NumericDataset out;
    out.feature_names = feature_names;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
        out.labels.push_back(labels.at(rows[i]));
    }
    return out;
}

namespace {

bool target_matches(const PreprocessPlan& plan, const CellValue& cell, double positive_number) {
    if (const auto* s = std::get_if<std::string>(&cell)) return *s == plan.target_positive_value;
    if (const double* d = std::get_if<double>(&cell)) return *d == positive_number;
    return false;
}

double positive_as_number(const PreprocessPlan& plan) {
    double value = 0.0;
    if (plan.target_kind == ColumnKind::Numeric && !tabular::parse_number(plan.target_positive_value, value)) {
        throw ConfigError("target '" + plan.target_column + "' is numeric but positive value '" +
                          plan.target_positive_value + "' is not a number");
    }
    return value;
}

double scale(const PreprocessPlan& plan, const ScalerParams& p, double x) {
    if (plan.scaler_kind == ScalerKind::ZScore) {
        const double spread = p.std < kDegenerateSpread ? 1.0 : p.std;
        return (x - p.mean) / spread;
    }
    const double range = p.max - p.min;
    const double spread = range < kDegenerateSpread ? 1.0 : range;
    return (x - p.min) / spread;
}

}  // namespace

PreprocessPlan fit_plan(const Frame& frame, const FitOptions& options) {
    if (!(options.drop_threshold > 0.0 && options.drop_threshold <= 1.0)) {
        throw ConfigError("drop_threshold must be in (0, 1]");
    }
    if (frame.n_rows() == 0) throw SchemaError("fit_plan: frame has no rows");

    PreprocessPlan plan;
    plan.target_column = options.target_column;
    plan.target_positive_value = options.target_positive_value;
    plan.id_columns = options.id_columns;
    plan.drop_threshold = options.drop_threshold;
    plan.scaler_kind = options.scaler_kind;

    const auto target_idx = frame.column_index(options.target_column);
    plan.target_kind = frame.kinds()[target_idx];
    positive_as_number(plan);  // validates the positive value for numeric targets
    for (std::size_t r = 0; r < frame.n_rows(); ++r) {
        const auto& cell = frame.at(r, target_idx);
        if (tabular::is_missing(cell)) {
            throw SchemaError("target column '" + plan.target_column + "' is missing at row " + std::to_string(r));
        }
        if (const double* d = std::get_if<double>(&cell); d && *d != 0.0 && *d != 1.0) {
            throw SchemaError("numeric target column '" + plan.target_column + "' must be binary 0/1");
        }
    }
    for (const auto& id : plan.id_columns) {
        if (id == plan.target_column) throw ConfigError("target column '" + id + "' is also listed as an id column");
        frame.column_index(id);
    }

    for (std::size_t c = 0; c < frame.n_cols(); ++c) {
        const auto& name = frame.column_names()[c];
        if (name == plan.target_column || plan.id_columns.contains(name)) continue;

        const double nulls = tabular::null_fraction(frame, name);
        if (nulls >= 1.0) {
            plan.dropped_columns.insert(name);
            plan.warnings.push_back("column '" + name + "' is entirely missing; dropped");
            continue;
        }
        if (nulls >= plan.drop_threshold) {
            plan.dropped_columns.insert(name);
            continue;
        }

        plan.feature_columns.push_back(name);
        plan.impute_values[name] = tabular::column_stats(frame, name);

        if (frame.kinds()[c] == ColumnKind::Categorical) {
            std::set<std::string> distinct;
            for (const auto& row : frame.rows()) {
                if (const auto* s = std::get_if<std::string>(&row[c])) distinct.insert(*s);
            }
            auto& codes = plan.label_maps[name];
            int next = 0;
            for (const auto& v : distinct) codes.emplace(v, next++);
            continue;
        }

        // Scaling statistics over the imputed column.
        const double fill = std::get<double>(plan.impute_values[name]);
        const auto n = static_cast<double>(frame.n_rows());
        ScalerParams p;
        p.min = std::numeric_limits<double>::infinity();
        p.max = -std::numeric_limits<double>::infinity();
        double sum = 0.0;
        for (const auto& row : frame.rows()) {
            const double* d = std::get_if<double>(&row[c]);
            const double x = d ? *d : fill;
            sum += x;
            p.min = std::min(p.min, x);
            p.max = std::max(p.max, x);
        }
        p.mean = sum / n;
        double ss = 0.0;
        for (const auto& row : frame.rows()) {
            const double* d = std::get_if<double>(&row[c]);
            const double dx = (d ? *d : fill) - p.mean;
            ss += dx * dx;
        }
        p.std = std::sqrt(ss / n);
        plan.scaler[name] = p;
    }

    if (plan.feature_columns.empty()) throw SchemaError("fit_plan: every feature column was dropped");
    return plan;
}

Matrix apply_features(const PreprocessPlan& plan, const Frame& frame) {
    const auto n = static_cast<Eigen::Index>(frame.n_rows());
    Matrix out(n, static_cast<Eigen::Index>(plan.feature_columns.size()));

    for (std::size_t j = 0; j < plan.feature_columns.size(); ++j) {
        const auto& name = plan.feature_columns[j];
        const auto c = frame.column_index(name);
        const auto col = static_cast<Eigen::Index>(j);
        const bool categorical = plan.is_categorical(name);
        const ColumnKind expected = categorical ? ColumnKind::Categorical : ColumnKind::Numeric;
        if (frame.kinds()[c] != expected) {
            throw SchemaError("column '" + name + "' is " + std::string(tabular::to_string(frame.kinds()[c])) +
                              " but the plan expects " + std::string(tabular::to_string(expected)));
        }

        if (categorical) {
            const auto& codes = plan.label_maps.at(name);
            const int fallback = codes.at(std::get<std::string>(plan.impute_values.at(name)));
            for (Eigen::Index r = 0; r < n; ++r) {
                const auto* s = std::get_if<std::string>(&frame.at(static_cast<std::size_t>(r), c));
                int code = fallback;
                if (s) {
                    if (auto it = codes.find(*s); it != codes.end()) code = it->second;
                }
                out(r, col) = code;
            }
        } else {
            const double fill = std::get<double>(plan.impute_values.at(name));
            const auto& params = plan.scaler.at(name);
            for (Eigen::Index r = 0; r < n; ++r) {
                const double* d = std::get_if<double>(&frame.at(static_cast<std::size_t>(r), c));
                out(r, col) = scale(plan, params, d ? *d : fill);
            }
        }
    }
    return out;
}

std::vector<int> target_labels(const Frame& frame, const std::string& target_column,
                               const std::string& positive_value) {
    PreprocessPlan plan;
    plan.target_column = target_column;
    plan.target_positive_value = positive_value;
    plan.target_kind = frame.kind(target_column);
    return encode_labels(plan, frame);
}

std::vector<int> encode_labels(const PreprocessPlan& plan, const Frame& frame) {
    const auto c = frame.column_index(plan.target_column);
    if (frame.kinds()[c] != plan.target_kind) {
        throw SchemaError("target column '" + plan.target_column + "' changed kind since fitting");
    }
    const double positive_number = positive_as_number(plan);
    std::vector<int> labels;
    labels.reserve(frame.n_rows());
    for (std::size_t r = 0; r < frame.n_rows(); ++r) {
        const auto& cell = frame.at(r, c);
        if (tabular::is_missing(cell)) {
            throw SchemaError("target column '" + plan.target_column + "' is missing at row " + std::to_string(r));
        }
        labels.push_back(target_matches(plan, cell, positive_number) ? 1 : 0);
    }
    return labels;
}

NumericDataset apply_plan(const PreprocessPlan& plan, const Frame& frame) {
    NumericDataset out;
    out.labels = encode_labels(plan, frame);
    out.features = apply_features(plan, frame);
    out.feature_names = plan.feature_columns;
    return out;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const PreprocessPlan& plan) {
    using nlohmann::json;
    json impute = json::object();
    for (const auto& [name, value] : plan.impute_values) {
        if (const double* d = std::get_if<double>(&value)) {
            impute[name] = {{"mean", *d}};
        } else {
            impute[name] = {{"mode", std::get<std::string>(value)}};
        }
    }
    json scaler = json::object();
    for (const auto& [name, p] : plan.scaler) {
        scaler[name] = {{"mean", p.mean}, {"std", p.std}, {"min", p.min}, {"max", p.max}};
    }
    return {
        {"format_version", PreprocessPlan::kFormatVersion},
        {"target_column", plan.target_column},
        {"target_positive_value", plan.target_positive_value},
        {"target_kind", tabular::to_string(plan.target_kind)},
        {"id_columns", plan.id_columns},
        {"drop_threshold", plan.drop_threshold},
        {"scaler_kind", to_string(plan.scaler_kind)},
        {"dropped_columns", plan.dropped_columns},
        {"feature_columns", plan.feature_columns},
        {"impute_values", impute},
        {"label_maps", plan.label_maps},
        {"scaler", scaler},
    };
}

PreprocessPlan plan_from_json(const nlohmann::json& doc) {
    try {
        const int version = doc.at("format_version").get<int>();
        if (version != PreprocessPlan::kFormatVersion) {
            throw VersionError("preprocess plan format version " + std::to_string(version) +
                               " is not supported (expected " + std::to_string(PreprocessPlan::kFormatVersion) + ")");
        }
        PreprocessPlan plan;
        plan.target_column = doc.at("target_column").get<std::string>();
        plan.target_positive_value = doc.at("target_positive_value").get<std::string>();
        plan.target_kind = tabular::column_kind_from_string(doc.at("target_kind").get<std::string>());
        plan.id_columns = doc.at("id_columns").get<std::set<std::string>>();
        plan.drop_threshold = doc.at("drop_threshold").get<double>();
        plan.scaler_kind = scaler_kind_from_string(doc.at("scaler_kind").get<std::string>());
        plan.dropped_columns = doc.at("dropped_columns").get<std::set<std::string>>();
        plan.feature_columns = doc.at("feature_columns").get<std::vector<std::string>>();
        for (const auto& [name, value] : doc.at("impute_values").items()) {
            if (value.contains("mean")) {
                plan.impute_values[name] = value.at("mean").get<double>();
            } else {
                plan.impute_values[name] = value.at("mode").get<std::string>();
            }
        }
        plan.label_maps = doc.at("label_maps").get<std::map<std::string, std::map<std::string, int>>>();
        for (const auto& [name, value] : doc.at("scaler").items()) {
            plan.scaler[name] = ScalerParams{value.at("mean").get<double>(), value.at("std").get<double>(),
                                             value.at("min").get<double>(), value.at("max").get<double>()};
        }
        for (const auto& f : plan.feature_columns) {
            if (!plan.impute_values.contains(f) || (plan.label_maps.contains(f) == plan.scaler.contains(f))) {
                throw ParseError("preprocess plan: feature '" + f + "' is incompletely described");
            }
        }
        return plan;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("preprocess plan: ") + e.what());
    }
}

}  // namespace churn::preprocess
