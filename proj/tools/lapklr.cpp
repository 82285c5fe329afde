// lapklr: command-line front end for Laplacian-regularized kernel logistic
// regression.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "lapklr/config.hpp"
#include "lapklr/data_io.hpp"
#include "lapklr/error.hpp"
#include "lapklr/format.hpp"
#include "lapklr/pipeline.hpp"
#include "lapklr/synthetic.hpp"

namespace {

namespace fs = std::filesystem;
using namespace lapklr;

std::vector<double> parse_double_list(const std::string& s, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        double v = 0.0;
        if (!parse_double(trim(tok), v)) throw ConfigError(std::string(flag) + ": bad number '" + tok + "'");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError(std::string(flag) + ": empty list");
    return out;
}

std::vector<int> parse_int_list(const std::string& s, const char* flag) {
    std::vector<int> out;
    for (double v : parse_double_list(s, flag)) {
        if (v != static_cast<int>(v)) throw ConfigError(std::string(flag) + ": not an integer");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

/// Flags shared by every subcommand; unset ones leave the config untouched.
struct Overrides {
    std::string config;
    std::string features, labels, manifest, model_dir, output_dir;
    std::string method;
    std::string lambda1, lambda2, l_half;
    std::optional<int> k;
    std::optional<double> gamma;
    std::optional<std::uint64_t> seed;
    bool select = false;
    bool no_standardize = false;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", config, "JSON run configuration");
        app->add_option("--features", features, "feature file (text or binary)");
        app->add_option("--labels", labels, "label file (header + 0/1 columns)");
        app->add_option("--manifest", manifest, "split manifest path");
        app->add_option("--model-dir", model_dir, "model directory");
        app->add_option("--out-dir", output_dir, "output directory");
        app->add_option("--method", method, "lapklr or klr");
        app->add_option("--lambda1", lambda1, "lambda1 value or comma-separated candidates");
        app->add_option("--lambda2", lambda2, "lambda2 value or comma-separated candidates");
        app->add_option("--k", k, "neighbours per node in the kNN graph");
        app->add_option("--gamma", gamma, "rbf kernel width");
        app->add_option("--l-half", l_half, "labeled samples per class and label (comma-separated budgets)");
        app->add_option("--seed", seed, "random seed");
        app->add_flag("--select", select, "select (lambda1, lambda2) on a labeled validation carve-out");
        app->add_flag("--no-standardize", no_standardize, "use raw features");
    }

    RunConfig resolve() const {
        RunConfig cfg = config.empty() ? RunConfig{} : load_config(config);
        if (!features.empty()) cfg.features = features;
        if (!labels.empty()) cfg.labels = labels;
        if (!manifest.empty()) cfg.manifest = manifest;
        if (!model_dir.empty()) cfg.model_dir = model_dir;
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (!method.empty()) cfg.method = parse_method(method);
        if (!lambda1.empty()) cfg.lambda1_grid = parse_double_list(lambda1, "--lambda1");
        if (!lambda2.empty()) cfg.lambda2_grid = parse_double_list(lambda2, "--lambda2");
        if (!l_half.empty()) cfg.l_halves = parse_int_list(l_half, "--l-half");
        if (k) cfg.graph.k = *k;
        if (gamma) cfg.gamma = *gamma;
        if (seed) cfg.seed = *seed;
        if (select) cfg.select = true;
        if (no_standardize) cfg.standardize = false;
        cfg.validate();
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Laplacian-regularized kernel logistic regression"};
    app.require_subcommand(1);

    Overrides split_o, train_o, predict_o, eval_o, grid_o;
    auto* split = app.add_subcommand("split", "write a train/test split and balanced labeled samples");
    split_o.attach(split);
    auto* train = app.add_subcommand("train", "train models for every budget, class and grid point");
    train_o.attach(train);
    auto* predict = app.add_subcommand("predict", "score every row of a feature file");
    predict_o.attach(predict);
    std::string model_path, predict_out = "predictions.tsv";
    predict->add_option("--model", model_path, "model file")->required();
    predict->add_option("-o,--output", predict_out, "prediction table");
    auto* eval = app.add_subcommand("eval", "average precision of trained models on the test half");
    eval_o.attach(eval);
    auto* grid = app.add_subcommand("grid", "split, grid-select, train lapklr and klr, and evaluate");
    grid_o.attach(grid);

    auto* toy = app.add_subcommand("toy", "write the synthetic two-moons multi-label dataset");
    std::string toy_dir = "data/toy";
    long toy_n = 600;
    double toy_noise = 0.1;
    std::uint64_t toy_seed = 1;
    toy->add_option("--out-dir", toy_dir, "destination directory");
    toy->add_option("-n", toy_n, "number of samples");
    toy->add_option("--noise", toy_noise, "Gaussian noise standard deviation");
    toy->add_option("--seed", toy_seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (split->parsed()) {
            const RunConfig cfg = split_o.resolve();
            const auto m = pipeline::cmd_split(cfg);
            std::cout << "wrote " << pipeline::manifest_path(cfg).string() << ": " << m.train.size()
                      << " train, " << m.test.size() << " test, " << m.samples.size() << " labeled samples\n";
        } else if (train->parsed()) {
            const RunConfig cfg = train_o.resolve();
            const auto s = pipeline::cmd_train(cfg);
            std::cout << "wrote " << s.models_written << " models to " << cfg.model_dir.string() << '\n';
            if (s.failures > 0) {
                std::cerr << s.failures << " fits failed; see " << (cfg.model_dir / "train.log").string() << '\n';
                return 3;
            }
        } else if (predict->parsed()) {
            const RunConfig cfg = predict_o.resolve();
            pipeline::cmd_predict(cfg, model_path, predict_out);
            std::cout << "wrote " << predict_out << '\n';
        } else if (eval->parsed()) {
            const RunConfig cfg = eval_o.resolve();
            const auto s = pipeline::cmd_eval(cfg);
            for (const auto& [key, rep] : s.reports) {
                const auto& [method, l_half, group] = key;
                std::cout << method << " l_half=" << l_half << " " << group << " mAP=" << format_double(rep.map_value)
                          << '\n';
            }
        } else if (grid->parsed()) {
            const RunConfig cfg = grid_o.resolve();
            const auto g = pipeline::cmd_grid(cfg);
            for (const auto& [key, rep] : g.eval.reports) {
                const auto& [method, l_half, group] = key;
                std::cout << method << " l_half=" << l_half << " mAP=" << format_double(rep.map_value) << '\n';
            }
            if (g.lapklr.failures + g.klr.failures > 0) return 3;
        } else if (toy->parsed()) {
            const auto [X, labels] = make_toy_multilabel(toy_n, toy_noise, toy_seed);
            fs::create_directories(toy_dir);
            pipeline::write_file(fs::path(toy_dir) / "features.txt", [&](std::ostream& os) { write_features_text(os, X); });
            pipeline::write_file(fs::path(toy_dir) / "labels.txt", [&](std::ostream& os) { write_labels(os, labels); });
            std::cout << "wrote " << toy_n << " samples to " << toy_dir << '\n';
        }
    } catch (const lapklr::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
