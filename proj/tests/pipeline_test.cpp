#include "churn/error.hpp"
#include "churn/pipeline.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace churn;
using namespace churn::pipeline;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t count_lines(const fs::path& p) {
    const auto text = slurp(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("churn_pipeline_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ExperimentConfig quick_config() {
    ExperimentConfig c;
    c.train.epochs = 15;
    c.train.learning_rate = 0.1;
    return c;
}

tabular::Frame quick_frame() { return gen_synthetic({1000, 0.1, 0.05, 11}); }

std::size_t count_value(const tabular::Frame& f, const std::string& column, const std::string& value) {
    const auto c = f.column_index(column);
    std::size_t n = 0;
    for (const auto& row : f.rows()) {
        if (const auto* s = std::get_if<std::string>(&row[c]); s && *s == value) ++n;
    }
    return n;
}

}  // namespace

TEST_CASE("gen_synthetic: churner count, nulls and determinism") {
    const auto f = gen_synthetic({5000, 0.03, 0.05, 7});
    CHECK(f.n_rows() == 5000);
    CHECK(count_value(f, "churn", "Yes") == 150);
    CHECK(tabular::null_fraction(f, kHighNullColumn) >= 0.35);
    CHECK(tabular::null_fraction(f, "gender") > 0.0);
    CHECK(tabular::null_fraction(f, "cust_id") == 0.0);
    CHECK(tabular::null_fraction(f, "churn") == 0.0);

    const auto dir = scratch("gen");
    tabular::save_csv(dir / "a.csv", f);
    tabular::save_csv(dir / "b.csv", gen_synthetic({5000, 0.03, 0.05, 7}));
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(tabular::load_csv(dir / "a.csv") == f);

    const auto clean = gen_synthetic({500, 0.03, 0.0, 3});
    for (const auto& name : clean.column_names()) {
        if (name == kHighNullColumn) continue;
        CHECK_MESSAGE(tabular::null_fraction(clean, name) == 0.0, name);
    }

    CHECK_THROWS_AS(gen_synthetic({9, 0.03, 0.05, 1}), ConfigError);
    CHECK_THROWS_AS(gen_synthetic({100, 1.0, 0.05, 1}), ConfigError);
    CHECK_THROWS_AS(gen_synthetic({100, 0.03, -0.1, 1}), ConfigError);
}

TEST_CASE("gen_synthetic: majority baseline matches the base rate") {
    const auto f = gen_synthetic({5000, 0.03, 0.05, 7});
    auto c = quick_config();
    const auto labels = preprocess::target_labels(f, c.target_column, c.target_positive_value);
    const auto idx = preprocess::split_indices(labels, c.split);
    std::size_t positives = 0;
    for (auto i : idx.test) positives += labels[i];
    const double baseline = 1.0 - static_cast<double>(positives) / static_cast<double>(idx.test.size());
    CHECK(baseline == doctest::Approx(0.97).epsilon(0.005));
}

TEST_CASE("config JSON round trip and validation") {
    ExperimentConfig c;
    c.data_path = "x.csv";
    c.hidden_layers = {{5, mlp::Activation::Relu, 0.1}};
    c.scaler_kind = preprocess::ScalerKind::MinMax;
    c.set_seed(99);
    const auto back = config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(back.split.seed == 99);
    CHECK(back.train.seed == 99);

    CHECK_THROWS_WITH_AS(config_from_json({{"epochs", 3}}), doctest::Contains("unknown key 'epochs'"), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"train", {{"epochs", "many"}}}}), ConfigError);
    const auto partial = config_from_json({{"train", {{"epochs", 3}}}});
    CHECK(partial.train.epochs == 3);
    CHECK(partial.train.batch_size == 32);

    ExperimentConfig bad;
    bad.id_columns.insert("churn");
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    const auto layers = ExperimentConfig{}.layers();
    REQUIRE(layers.size() == 3);
    CHECK(layers[0].size == 16);
    CHECK(layers[1].size == 8);
    CHECK(layers[2].size == 1);
}

TEST_CASE("run_train writes a complete, reproducible run") {
    const auto dir = scratch("train");
    tabular::save_csv(dir / "data.csv", quick_frame());
    auto config = quick_config();
    config.data_path = (dir / "data.csv").string();

    const auto result = run_train(config);
    write_run_outputs(dir / "run1", result);
    for (const char* name : {"model.json", "report.json", "history.csv", "roc.csv"}) CHECK(fs::exists(dir / "run1" / name));
    CHECK(count_lines(dir / "run1" / "history.csv") == config.train.epochs + 1);
    CHECK(slurp(dir / "run1" / "roc.csv").starts_with("fpr,tpr\n"));

    const auto report = nlohmann::json::parse(slurp(dir / "run1" / "report.json"));
    for (const char* orientation : {"positive_churner", "positive_non_churner"}) {
        for (const char* key : {"accuracy", "precision", "recall", "f_measure", "auc", "confusion_matrix"}) {
            CHECK_MESSAGE(report.at(orientation).contains(key), orientation << "." << key);
        }
    }
    CHECK(report.at("n_rows") == result.split.test.size());

    write_run_outputs(dir / "run2", run_train(config));
    for (const char* name : {"model.json", "report.json", "history.csv", "roc.csv"}) {
        CHECK_MESSAGE(slurp(dir / "run1" / name) == slurp(dir / "run2" / name), name);
    }
}

TEST_CASE("evaluate reproduces the training report on the test split") {
    const auto dir = scratch("evaluate");
    const auto frame = quick_frame();
    const auto config = quick_config();
    const auto result = run_train(config, frame);
    write_run_outputs(dir, result);
    tabular::save_csv(dir / "test.csv", frame.select_rows(result.split.test));

    const auto report = evaluate(dir / "model.json", dir / "test.csv", config.train.classification_threshold);
    CHECK(report_document(report) == report_document(result.report));
}

TEST_CASE("artifact persistence") {
    const auto dir = scratch("artifact");
    const auto frame = quick_frame();
    const auto result = run_train(quick_config(), frame);
    save_artifact(dir / "model.json", result.artifact);

    const auto loaded = load_artifact(dir / "model.json");
    const auto sample = frame.select_rows([] {
        std::vector<std::size_t> idx(100);
        for (std::size_t i = 0; i < 100; ++i) idx[i] = i * 7;
        return idx;
    }());
    CHECK(predict(loaded, sample) == predict(result.artifact, sample));
    CHECK(loaded.plan == result.artifact.plan);

    SUBCASE("truncated file") {
        const auto text = slurp(dir / "model.json");
        std::ofstream(dir / "cut.json", std::ios::binary) << text.substr(0, text.size() / 2);
        CHECK_THROWS_AS(load_artifact(dir / "cut.json"), ParseError);
    }
    SUBCASE("version mismatch") {
        auto doc = to_json(result.artifact);
        doc["format_version"] = ModelArtifact::kFormatVersion + 1;
        std::ofstream(dir / "future.json", std::ios::binary) << doc.dump();
        CHECK_THROWS_WITH_AS(load_artifact(dir / "future.json"), doctest::Contains("not supported"), VersionError);
    }
    SUBCASE("corrupted weights fail the fingerprint") {
        auto doc = to_json(result.artifact);
        doc["model"]["layers"][0]["weights"][0][0] = 123.0;
        CHECK_THROWS_WITH_AS(artifact_from_json(doc), doctest::Contains("fingerprint"), Error);
    }
    SUBCASE("missing plan column") {
        std::vector<std::string> names;
        std::vector<tabular::ColumnKind> kinds;
        std::vector<std::vector<tabular::CellValue>> rows(frame.n_rows());
        const auto drop = frame.column_index("tenure_months");
        for (std::size_t c = 0; c < frame.n_cols(); ++c) {
            if (c == drop) continue;
            names.push_back(frame.column_names()[c]);
            kinds.push_back(frame.kinds()[c]);
            for (std::size_t r = 0; r < frame.n_rows(); ++r) rows[r].push_back(frame.at(r, c));
        }
        tabular::save_csv(dir / "short.csv", tabular::Frame(names, kinds, rows));
        CHECK_THROWS_WITH_AS(evaluate(dir / "model.json", dir / "short.csv", 0.5), doctest::Contains("tenure_months"),
                             SchemaError);
    }
}

TEST_CASE("plan statistics come from the training part only") {
    // Shift the test rows of one numeric column; a plan fitted on train alone
    // must not see the shift, one fitted on train+test must.
    const auto frame = quick_frame();
    const auto config = quick_config();
    const auto labels = preprocess::target_labels(frame, config.target_column, config.target_positive_value);
    const auto idx = preprocess::split_indices(labels, config.split);

    auto rows = frame.rows();
    const auto col = frame.column_index("tenure_months");
    for (auto i : idx.test) {
        if (auto* d = std::get_if<double>(&rows[i][col])) *d += 1000.0;
    }
    const tabular::Frame shifted(frame.column_names(), frame.kinds(), rows);

    const auto via_run = run_train(config, shifted).artifact.plan;
    const auto clean_run = run_train(config, frame).artifact.plan;
    CHECK(via_run.scaler.at("tenure_months") == clean_run.scaler.at("tenure_months"));

    preprocess::FitOptions fit{config.target_column, config.target_positive_value, config.id_columns};
    std::vector<std::size_t> train_test = idx.train;
    train_test.insert(train_test.end(), idx.test.begin(), idx.test.end());
    const auto leaky = preprocess::fit_plan(shifted.select_rows(train_test), fit);
    CHECK(leaky.scaler.at("tenure_months").mean > via_run.scaler.at("tenure_months").mean + 50.0);
}

TEST_CASE("sweep enumeration") {
    SweepSpec spec;
    spec.architectures = {{4}, {8, 4}};
    spec.dropout_rates = {0.0};
    spec.l2_lambdas = {0.0, 0.1};
    spec.learning_rates = {0.01, 0.1, 1.0};
    CHECK(spec.grid_size() == 12);
    const auto base = quick_config();
    const auto first = sweep_config(base, spec, 0);
    CHECK(first.hidden_layers.size() == 1);
    CHECK(first.train.learning_rate == 0.01);
    const auto second = sweep_config(base, spec, 1);
    CHECK(second.train.learning_rate == 0.1);
    CHECK(second.train.seed != first.train.seed);
    const auto last = sweep_config(base, spec, 11);
    CHECK(last.hidden_layers.size() == 2);
    CHECK(last.l2_lambda == 0.1);
    CHECK(last.train.learning_rate == 1.0);
    CHECK_THROWS_AS(sweep_config(base, spec, 12), ConfigError);

    const auto doc = to_json(spec);
    CHECK(to_json(sweep_spec_from_json(doc)) == doc);
    CHECK_THROWS_AS(sweep_spec_from_json({{"bogus", 1}}), ConfigError);
}

TEST_CASE("sweep selects on validation and scores only the winner on test") {
    const auto frame = quick_frame();
    const auto config = quick_config();

    SUBCASE("grid of one") {
        SweepSpec spec;
        spec.architectures = {{4}};
        spec.dropout_rates = {0.0};
        spec.l2_lambdas = {0.0};
        spec.learning_rates = {0.1};
        const auto result = sweep(config, spec, frame);
        CHECK(result.leaderboard.size() == 1);
        CHECK(result.best_index == 0);
        CHECK(result.best.report.n_rows == result.best.split.test.size());
    }
    SUBCASE("leaderboard is capped and the winner dominates it") {
        SweepSpec spec;
        spec.architectures = {{4}, {6}};
        spec.dropout_rates = {0.0, 0.2};
        spec.l2_lambdas = {0.0};
        spec.learning_rates = {0.05, 0.2};
        spec.max_models = 5;
        const auto result = sweep(config, spec, frame);
        CHECK(result.leaderboard.size() == 5);
        const double best = result.leaderboard[result.best_index].validation_auc;
        for (const auto& e : result.leaderboard) CHECK(best >= e.validation_auc);
        for (std::size_t i = 0; i < result.leaderboard.size(); ++i) CHECK(result.leaderboard[i].index == i);
    }
}

TEST_CASE("sweep prefers a sane model over a crippled one") {
    // Separable data as a table so it can go through the whole pipeline.
    const auto data = testing::separable(400, 5);
    std::vector<std::vector<tabular::CellValue>> rows;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        rows.push_back({data.features(static_cast<Eigen::Index>(i), 0), data.features(static_cast<Eigen::Index>(i), 1),
                        std::string(data.labels[i] ? "Yes" : "No")});
    }
    const tabular::Frame frame({"x0", "x1", "churn"},
                               {tabular::ColumnKind::Numeric, tabular::ColumnKind::Numeric, tabular::ColumnKind::Categorical},
                               rows);
    ExperimentConfig config;
    config.id_columns.clear();
    config.hidden_layers = {{4, mlp::Activation::Sigmoid, 0.0}};

    SweepSpec spec;
    spec.architectures = {{4}};
    spec.dropout_rates = {0.0};
    spec.l2_lambdas = {0.0};
    spec.learning_rates = {1e-9, 0.5};
    spec.epochs = {1, 100};
    // Index 0 is (lr 1e-9, 1 epoch); index 3 is (lr 0.5, 100 epochs).
    const auto result = sweep(config, spec, frame);
    CHECK(result.leaderboard.size() == 4);
    CHECK(result.best_index == 3);
    CHECK(result.leaderboard[3].validation_auc > result.leaderboard[0].validation_auc);
}

TEST_CASE("sweep with every model diverging fails") {
    const auto frame = quick_frame();
    SweepSpec spec;
    spec.architectures = {{4}};
    spec.dropout_rates = {0.0};
    spec.l2_lambdas = {0.0};
    spec.learning_rates = {1e308};
    auto config = quick_config();
    config.hidden_layers = {{4, mlp::Activation::Relu, 0.0}};
    CHECK_THROWS_WITH_AS(sweep(config, spec, frame), doctest::Contains("diverged"), Error);
}
