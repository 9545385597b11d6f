// churn: command-line front end for the churn prediction pipeline.
//
//   churn gen      --rows N --churn-rate R --null-rate R --seed S --out DIR
//   churn train    [--config FILE] [--data CSV] [--seed S] [--out DIR] [--threshold T]
//   churn evaluate --model FILE --data CSV [--threshold T] [--out DIR]
//   churn sweep    [--config FILE] [--data CSV] [--seed S] [--out DIR] [--threshold T]
//   churn predict  --model FILE --data CSV [--threshold T] [--out DIR]

#include "churn/error.hpp"
#include "churn/pipeline.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace churn;

struct RunFlags {
    std::string config_path;
    std::string data_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::optional<double> threshold;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--config", f.config_path, "Experiment configuration (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--data", f.data_path, "Input CSV (overrides data_path in the config)");
    cmd->add_option("--seed", f.seed, "Seed for the split and training (overrides the config)");
    cmd->add_option("--out", f.out_dir, "Output directory (overrides output_dir in the config)");
    cmd->add_option("--threshold", f.threshold, "Classification threshold in (0,1)");
}

pipeline::ExperimentConfig resolve_config(const RunFlags& f, nlohmann::json* raw = nullptr) {
    pipeline::ExperimentConfig config;
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("config '" + f.config_path + "': " + e.what());
        }
        config = pipeline::config_from_json(doc);
        if (raw) *raw = doc;
    }
    if (!f.data_path.empty()) config.data_path = f.data_path;
    if (f.seed) config.set_seed(*f.seed);
    if (!f.out_dir.empty()) config.output_dir = f.out_dir;
    if (f.threshold) config.train.classification_threshold = *f.threshold;
    if (config.data_path.empty()) throw ConfigError("no input data: pass --data or set data_path in the config");
    return config;
}

void print_summary(const metrics::EvalReport& r) {
    const auto line = [](const char* name, const metrics::OrientedReport& o) {
        const auto& m = o.matrix;
        const auto& s = o.scalars;
        std::cout << name << ": tp=" << m.tp << " fp=" << m.fp << " fn=" << m.fn << " tn=" << m.tn
                  << " accuracy=" << s.accuracy << " precision=" << s.precision << " recall=" << s.recall
                  << " f=" << s.f_measure << " auc=" << o.roc.auc << '\n';
    };
    std::cout << "rows=" << r.n_rows << " churners=" << r.n_class1 << " threshold=" << r.threshold
              << " majority_baseline=" << r.majority_baseline_accuracy << '\n';
    line("positive=churner    ", r.class1_positive);
    line("positive=non-churner", r.class0_positive);
}

int cmd_gen(const pipeline::SyntheticSpec& spec, const std::string& out_dir) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    const auto frame = pipeline::gen_synthetic(spec);
    tabular::save_csv(dir / "data.csv", frame);
    std::cout << "wrote " << (dir / "data.csv").string() << " (" << frame.n_rows() << " rows, " << frame.n_cols()
              << " columns)\n";
    return 0;
}

int cmd_train(const RunFlags& flags) {
    const auto config = resolve_config(flags);
    const auto result = pipeline::run_train(config);
    for (const auto& w : result.artifact.plan.warnings) std::cerr << "warning: " << w << '\n';
    pipeline::write_run_outputs(config.output_dir, result);
    print_summary(result.report);
    return 0;
}

int cmd_sweep(const RunFlags& flags) {
    nlohmann::json raw;
    const auto config = resolve_config(flags, &raw);
    auto spec = pipeline::sweep_spec_from_json(raw.is_object() && raw.contains("sweep") ? raw.at("sweep") : nlohmann::json());
    if (flags.seed) spec.seed = *flags.seed;
    const auto result = pipeline::sweep(config, spec);
    pipeline::write_run_outputs(config.output_dir, result.best);
    pipeline::save_leaderboard_csv(std::filesystem::path(config.output_dir) / "leaderboard.csv", result.leaderboard);
    std::cout << "models=" << result.leaderboard.size() << " best_index=" << result.best_index << '\n';
    print_summary(result.best.report);
    return 0;
}

int cmd_evaluate(const std::string& model, const std::string& data, std::optional<double> threshold,
                 const std::string& out_dir) {
    const auto artifact = pipeline::load_artifact(model);
    const double t = threshold.value_or(artifact.config.train.classification_threshold);
    const auto report = pipeline::evaluate(artifact, pipeline::load_for_plan(data, artifact), t);
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream(std::filesystem::path(out_dir) / "report.json", std::ios::binary) << pipeline::report_document(report);
        metrics::save_roc_csv(std::filesystem::path(out_dir) / "roc.csv", report.class1_positive.roc);
    }
    print_summary(report);
    return 0;
}

int cmd_predict(const std::string& model, const std::string& data, std::optional<double> threshold,
                const std::string& out_dir) {
    const auto artifact = pipeline::load_artifact(model);
    const auto frame = pipeline::load_for_plan(data, artifact);
    const auto probabilities = pipeline::predict(artifact, frame);
    const double t = threshold.value_or(artifact.config.train.classification_threshold);
    const auto labels = mlp::threshold_labels(probabilities, t);

    std::optional<std::size_t> id_col;
    for (const auto& id : artifact.plan.id_columns) {
        if (frame.has_column(id)) {
            id_col = frame.column_index(id);
            break;
        }
    }
    const std::filesystem::path dir(out_dir.empty() ? "." : out_dir);
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "predictions.csv", std::ios::binary);
    if (!out) throw Error("cannot write '" + (dir / "predictions.csv").string() + "'");
    out << (id_col ? frame.column_names()[*id_col] : std::string("row")) << ",probability,label\n";
    char buf[64];
    for (std::size_t r = 0; r < probabilities.size(); ++r) {
        if (id_col) {
            const auto& cell = frame.at(r, *id_col);
            if (const auto* s = std::get_if<std::string>(&cell)) out << *s;
            else if (const double* d = std::get_if<double>(&cell)) out << *d;
        } else {
            out << r;
        }
        const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), probabilities[r]);
        out << ',';
        out.write(buf, end - buf);
        out << ',' << labels[r] << '\n';
    }
    std::cout << "wrote " << (dir / "predictions.csv").string() << " (" << probabilities.size() << " rows)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Customer churn prediction with a multilayer perceptron"};
    app.require_subcommand(1);

    pipeline::SyntheticSpec gen_spec;
    std::string gen_out = ".";
    auto* gen = app.add_subcommand("gen", "Generate a synthetic customer table (data.csv)");
    gen->add_option("--rows", gen_spec.n_rows, "Number of customers")->capture_default_str();
    gen->add_option("--churn-rate", gen_spec.churn_rate, "Fraction of churners")->capture_default_str();
    gen->add_option("--null-rate", gen_spec.null_rate, "Per-cell missing rate for nullable columns")->capture_default_str();
    gen->add_option("--seed", gen_spec.seed, "Generator seed")->capture_default_str();
    gen->add_option("--out", gen_out, "Output directory")->capture_default_str();

    RunFlags train_flags, sweep_flags;
    auto* train = app.add_subcommand("train", "Fit, train and evaluate one model");
    add_run_flags(train, train_flags);
    auto* sweep = app.add_subcommand("sweep", "Grid search over architectures and hyperparameters");
    add_run_flags(sweep, sweep_flags);

    std::string model_path, data_path, out_dir;
    std::optional<double> threshold;
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a saved model on labelled data");
    auto* predict = app.add_subcommand("predict", "Score new data with a saved model (predictions.csv)");
    for (auto* cmd : {evaluate, predict}) {
        cmd->add_option("--model", model_path, "Saved model.json")->required();
        cmd->add_option("--data", data_path, "Input CSV")->required();
        cmd->add_option("--threshold", threshold, "Classification threshold in (0,1)");
        cmd->add_option("--out", out_dir, "Output directory");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*gen) return cmd_gen(gen_spec, gen_out);
        if (*train) return cmd_train(train_flags);
        if (*sweep) return cmd_sweep(sweep_flags);
        if (*evaluate) return cmd_evaluate(model_path, data_path, threshold, out_dir);
        if (*predict) return cmd_predict(model_path, data_path, threshold, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
