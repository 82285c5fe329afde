#pragma once

// Run configuration for the command-line pipeline, loaded from a JSON file
// and then overridden by flags. Every key is optional:
//
//   {
//     "features": "data/toy/features.txt",
//     "labels": "data/toy/labels.txt",
//     "manifest": "out/split.manifest",
//     "model_dir": "out/models",
//     "output_dir": "out",
//     "method": "lapklr",                       // or "klr"
//     "standardize": true,
//     "select": false,
//     "validation_fraction": 0.2,
//     "kernel":  {"family": "rbf", "gamma": "auto", "degree": 3, "coef0": 1.0},
//     "graph":   {"k": 10, "weight_mode": "heat", "heat_t": "auto",
//                 "symmetrize": "max", "normalized": false, "scale_laplacian": false},
//     "grid":    {"lambda1": [1e-4, 1e-3, 1e-2, 1e-1], "lambda2": [1e-4, 1e-3, 1e-2, 1e-1]},
//     "split":   {"seed": 0, "l_half": [5, 10, 20, 50, 100], "test_fraction": 0.5},
//     "optimizer": {"beta_step": 1.0, "epsilon": 1e-6, "max_iters": 500,
//                   "line_search": "backtracking", "restart_every": "dimension",
//                   "grad_tol": 1e-5}
//   }

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lapklr/error.hpp"
#include "lapklr/graph.hpp"
#include "lapklr/kernel.hpp"
#include "lapklr/optimizer.hpp"

namespace lapklr {

enum class Method { lapklr, klr };

inline std::string_view to_string(Method m) { return m == Method::lapklr ? "lapklr" : "klr"; }

inline Method parse_method(std::string_view s) {
    if (s == "lapklr") return Method::lapklr;
    if (s == "klr") return Method::klr;
    throw ConfigError("unknown method '" + std::string(s) + "' (expected lapklr or klr)");
}

/// The candidate set {10^e : e = -4, -3, -2, -1}.
inline std::vector<double> default_lambda_grid() { return {1e-4, 1e-3, 1e-2, 1e-1}; }

/// Labeled-samples-per-class budgets swept by default.
inline std::vector<int> default_label_budgets() { return {5, 10, 20, 50, 100}; }

struct RunConfig {
    std::filesystem::path features;
    std::filesystem::path labels;
    std::filesystem::path manifest;
    std::filesystem::path model_dir = "models";
    std::filesystem::path output_dir = "out";

    Method method = Method::lapklr;
    bool standardize = true;
    bool select = false;
    double validation_fraction = 0.2;

    KernelSpec kernel;
    std::optional<double> gamma;  // unset: 1/(d var(X_train))
    GraphConfig graph;

    std::vector<double> lambda1_grid = default_lambda_grid();
    std::vector<double> lambda2_grid = default_lambda_grid();

    std::uint64_t seed = 0;
    std::vector<int> l_halves = default_label_budgets();
    double test_fraction = 0.5;

    OptimizerConfig optimizer;

    /// lambda2 candidates actually used: plain KLR pins lambda2 to 0.
    std::vector<double> effective_lambda2() const {
        return method == Method::klr ? std::vector<double>{0.0} : lambda2_grid;
    }

    void validate() const {
        if (lambda1_grid.empty()) throw ConfigError("lambda1 grid is empty");
        if (method == Method::lapklr && lambda2_grid.empty()) throw ConfigError("lambda2 grid is empty");
        for (double v : lambda1_grid)
            if (!(v >= 0.0)) throw ConfigError("lambda1 candidates must be >= 0");
        for (double v : lambda2_grid)
            if (!(v >= 0.0)) throw ConfigError("lambda2 candidates must be >= 0");
        if (l_halves.empty()) throw ConfigError("no l_half budgets given");
        for (int b : l_halves)
            if (b < 1) throw ConfigError("l_half budgets must be >= 1");
        if (!(test_fraction > 0.0 && test_fraction < 1.0))
            throw ConfigError("test_fraction must lie in (0, 1)");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
            throw ConfigError("validation_fraction must lie in (0, 1)");
        if (gamma && !(*gamma > 0.0)) throw ConfigError("gamma must be > 0");
        if (graph.k < 1) throw ConfigError("graph k must be >= 1");
        optimizer.validate();
    }
};

namespace detail {

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

/// Numbers, or the string "auto" (returned as nullopt).
inline std::optional<double> auto_or_number(const nlohmann::json& v, const char* key) {
    if (v.is_string()) {
        if (v.get<std::string>() == "auto") return std::nullopt;
        throw ConfigError(std::string(key) + " must be a number or \"auto\"");
    }
    return v.get<double>();
}

}  // namespace detail

inline void apply_json(const nlohmann::json& j, RunConfig& cfg) {
    using detail::get_if;
    try {
        if (j.contains("features")) cfg.features = j.at("features").get<std::string>();
        if (j.contains("labels")) cfg.labels = j.at("labels").get<std::string>();
        if (j.contains("manifest")) cfg.manifest = j.at("manifest").get<std::string>();
        if (j.contains("model_dir")) cfg.model_dir = j.at("model_dir").get<std::string>();
        if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("method")) cfg.method = parse_method(j.at("method").get<std::string>());
        get_if(j, "standardize", cfg.standardize);
        get_if(j, "select", cfg.select);
        get_if(j, "validation_fraction", cfg.validation_fraction);

        if (j.contains("kernel")) {
            const auto& k = j.at("kernel");
            if (k.contains("family")) cfg.kernel.family = parse_kernel_family(k.at("family").get<std::string>());
            if (k.contains("gamma")) cfg.gamma = detail::auto_or_number(k.at("gamma"), "gamma");
            get_if(k, "degree", cfg.kernel.degree);
            get_if(k, "coef0", cfg.kernel.coef0);
        }
        if (j.contains("graph")) {
            const auto& g = j.at("graph");
            get_if(g, "k", cfg.graph.k);
            if (g.contains("weight_mode")) cfg.graph.weight_mode = parse_weight_mode(g.at("weight_mode").get<std::string>());
            if (g.contains("heat_t")) cfg.graph.heat_t = detail::auto_or_number(g.at("heat_t"), "heat_t");
            if (g.contains("symmetrize")) cfg.graph.symmetrize = parse_symmetrize(g.at("symmetrize").get<std::string>());
            get_if(g, "normalized", cfg.graph.normalized);
            get_if(g, "scale_laplacian", cfg.graph.scale_laplacian);
        }
        if (j.contains("grid")) {
            get_if(j.at("grid"), "lambda1", cfg.lambda1_grid);
            get_if(j.at("grid"), "lambda2", cfg.lambda2_grid);
        }
        if (j.contains("split")) {
            const auto& s = j.at("split");
            get_if(s, "seed", cfg.seed);
            if (s.contains("l_half")) {
                const auto& b = s.at("l_half");
                cfg.l_halves = b.is_array() ? b.get<std::vector<int>>() : std::vector<int>{b.get<int>()};
            }
            get_if(s, "test_fraction", cfg.test_fraction);
        }
        if (j.contains("optimizer")) {
            const auto& o = j.at("optimizer");
            get_if(o, "beta_step", cfg.optimizer.beta_step);
            get_if(o, "epsilon", cfg.optimizer.epsilon);
            get_if(o, "max_iters", cfg.optimizer.max_iters);
            get_if(o, "grad_tol", cfg.optimizer.grad_tol);
            if (o.contains("line_search"))
                cfg.optimizer.line_search = parse_line_search(o.at("line_search").get<std::string>());
            if (o.contains("restart_every")) {
                const auto& r = o.at("restart_every");
                if (r.is_null() || (r.is_string() && r.get<std::string>() == "none"))
                    cfg.optimizer.restart_every.reset();
                else if (r.is_string() && r.get<std::string>() == "dimension")
                    cfg.optimizer.restart_every = 0;
                else
                    cfg.optimizer.restart_every = r.get<std::size_t>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path.string() + "'");
    RunConfig cfg;
    try {
        apply_json(nlohmann::json::parse(is, nullptr, true, true), cfg);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    // Relative data paths in a config file are relative to the file itself.
    const auto base = path.parent_path();
    for (auto* p : {&cfg.features, &cfg.labels})
        if (!p->empty() && p->is_relative()) *p = base / *p;
    return cfg;
}

}  // namespace lapklr
