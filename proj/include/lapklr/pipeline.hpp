#pragma once

// The split / train / predict / eval / grid pipeline behind the CLI.
//
// Output layout under a model directory:
//
//   <model_dir>/train.log                                   (only timestamped file)
//   <model_dir>/<method>/lhalf_<L>/<class>/l1_<a>_l2_<b>.model   one per grid point
//   <model_dir>/<method>/lhalf_<L>/<class>/l1_<a>_l2_<b>.trace
//   <model_dir>/<method>/lhalf_<L>/<class>/selected.model        with --select
//   <model_dir>/<method>/selection.tsv                           with --select
//
// and under an output directory after eval:
//
//   <output_dir>/eval/<method>_lhalf<L>_<group>.txt / .kv
//   <output_dir>/ap_table.tsv    l_half class AP method lambda1 lambda2 group
//   <output_dir>/map_table.tsv   l_half method group mAP classes

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "lapklr/config.hpp"
#include "lapklr/data_io.hpp"
#include "lapklr/error.hpp"
#include "lapklr/eval.hpp"
#include "lapklr/format.hpp"
#include "lapklr/graph.hpp"
#include "lapklr/kernel.hpp"
#include "lapklr/manifest.hpp"
#include "lapklr/model.hpp"
#include "lapklr/model_io.hpp"
#include "lapklr/random.hpp"

namespace lapklr::pipeline {

namespace fs = std::filesystem;

inline void require_path(const fs::path& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string("no ") + what + " given");
}

inline void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
    ensure_parent(path);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
    writer(os);
    if (!os) throw DataError("failed writing '" + path.string() + "'");
}

inline fs::path manifest_path(const RunConfig& cfg) {
    return cfg.manifest.empty() ? cfg.output_dir / "split.manifest" : cfg.manifest;
}

// ---------------------------------------------------------------------------
// split

inline SplitManifest cmd_split(const RunConfig& cfg) {
    cfg.validate();
    require_path(cfg.features, "feature file");
    require_path(cfg.labels, "label file");
    const Matrix X = load_features(cfg.features);
    const LabelTable labels = load_labels(cfg.labels);
    if (labels.values.rows() != X.rows())
        throw DataError("feature file has " + std::to_string(X.rows()) + " rows but label file has " +
                        std::to_string(labels.values.rows()));
    SplitManifest m = make_manifest(labels, cfg.seed, cfg.l_halves, cfg.test_fraction);
    m.check();
    const fs::path out = manifest_path(cfg);
    write_file(out, [&](std::ostream& os) { write_manifest(os, m); });
    return m;
}

// ---------------------------------------------------------------------------
// shared data preparation

struct Prepared {
    SplitManifest manifest;
    LabelTable labels;
    std::shared_ptr<const Matrix> X_train;   // rows in manifest.train order
    Matrix X_test;                           // rows in manifest.test order
    Matrix X_all;                            // every row, standardized like the others
    std::vector<Index> train_position;       // feature row -> train position, -1 for test
    KernelSpec kernel;                       // gamma resolved
};

inline Prepared prepare(const RunConfig& cfg, SplitManifest manifest) {
    require_path(cfg.features, "feature file");
    require_path(cfg.labels, "label file");
    Prepared p;
    p.X_all = load_features(cfg.features);
    p.labels = load_labels(cfg.labels);
    if (p.X_all.rows() != manifest.n || p.labels.values.rows() != manifest.n)
        throw DataError("manifest covers " + std::to_string(manifest.n) +
                        " samples but the data has " + std::to_string(p.X_all.rows()) +
                        " feature rows and " + std::to_string(p.labels.values.rows()) + " label rows");
    if (p.labels.names != manifest.classes)
        throw DataError("label file classes differ from the manifest's classes");
    if (cfg.standardize) Standardizer::fit(p.X_all, manifest.train).apply(p.X_all);

    Matrix train(static_cast<Index>(manifest.train.size()), p.X_all.cols());
    for (std::size_t i = 0; i < manifest.train.size(); ++i)
        train.row(static_cast<Index>(i)) = p.X_all.row(manifest.train[i]);
    p.X_test.resize(static_cast<Index>(manifest.test.size()), p.X_all.cols());
    for (std::size_t i = 0; i < manifest.test.size(); ++i)
        p.X_test.row(static_cast<Index>(i)) = p.X_all.row(manifest.test[i]);

    p.train_position.assign(static_cast<std::size_t>(manifest.n), -1);
    for (std::size_t i = 0; i < manifest.train.size(); ++i)
        p.train_position[static_cast<std::size_t>(manifest.train[i])] = static_cast<Index>(i);

    p.kernel = cfg.kernel;
    if (p.kernel.family == KernelFamily::rbf) p.kernel.gamma = cfg.gamma ? *cfg.gamma : default_rbf_gamma(train);
    p.kernel.validate();
    p.X_train = std::make_shared<const Matrix>(std::move(train));
    p.manifest = std::move(manifest);
    return p;
}

/// Gram and Laplacian over the training rows, shared by every model of a run.
struct Structures {
    std::shared_ptr<const GramMatrix> K;
    GraphLaplacian L;  // empty when no method needs it
};

inline Structures build_structures(const Prepared& p, const RunConfig& cfg, bool need_graph) {
    Structures s;
    s.K = std::make_shared<const GramMatrix>(gram_matrix(p.kernel, *p.X_train));
    s.L = need_graph ? build_laplacian(*p.X_train, clamp_graph_config(cfg.graph, p.X_train->rows()))
                     : empty_laplacian(p.X_train->rows());
    return s;
}

// ---------------------------------------------------------------------------
// train

inline std::string lambda_tag(double l1, double l2) {
    return "l1_" + format_double(l1) + "_l2_" + format_double(l2);
}

inline fs::path class_dir(const fs::path& model_dir, Method method, int l_half, const std::string& cls) {
    return model_dir / std::string(to_string(method)) / ("lhalf_" + std::to_string(l_half)) / cls;
}

inline bool trace_non_increasing(const OptTrace& t) {
    for (std::size_t i = 1; i < t.objective_per_iter.size(); ++i)
        if (t.objective_per_iter[i] > t.objective_per_iter[i - 1]) return false;
    return true;
}

struct TrainSummary {
    std::size_t models_written = 0;
    std::size_t failures = 0;
};

namespace detail {

struct Task {
    int l_half;
    std::size_t class_index;
    const ClassSample* sample;
    std::vector<Index> rows;  // train positions: positives then negatives
    Vector y;
};

inline std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

inline void log_fit(std::ostream& log, Method method, const Task& t, const std::string& what,
                    const Hyperparams& h, const TrainedModel& m) {
    log << to_string(method) << " l_half=" << t.l_half << " class=" << t.sample->name
        << " model=" << what << " lambda1=" << format_double(h.lambda1)
        << " lambda2=" << format_double(h.lambda2) << " iterations=" << m.iterations
        << " stop=" << to_string(m.trace.stop_reason)
        << " objective=" << format_double(m.final_objective)
        << " monotone=" << (trace_non_increasing(m.trace) ? "yes" : "no") << '\n';
}

/// Validation carve-out: v positives and v negatives drawn from the labeled
/// sample, v = round(fraction * l_half) clamped to [1, l_half - 1].
inline std::pair<Task, Task> carve_validation(const Task& t, double fraction, std::uint64_t seed) {
    const int v = std::clamp(static_cast<int>(std::lround(fraction * t.l_half)), 1, t.l_half - 1);
    Rng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(t.l_half)),
                        0x5E1EC7ULL + t.class_index));
    const auto half = static_cast<std::size_t>(t.l_half);
    std::vector<Index> pos(t.rows.begin(), t.rows.begin() + static_cast<std::ptrdiff_t>(half));
    std::vector<Index> neg(t.rows.begin() + static_cast<std::ptrdiff_t>(half), t.rows.end());
    auto take = [&](std::vector<Index>& pool) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(v); ++i)
            std::swap(pool[i], pool[i + static_cast<std::size_t>(rng.below(pool.size() - i))]);
    };
    take(pos);
    take(neg);
    Task fit_part = t, val_part = t;
    fit_part.rows.clear();
    val_part.rows.clear();
    std::vector<double> fit_y, val_y;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        (i < static_cast<std::size_t>(v) ? val_part.rows : fit_part.rows).push_back(pos[i]);
        (i < static_cast<std::size_t>(v) ? val_y : fit_y).push_back(1.0);
    }
    for (std::size_t i = 0; i < neg.size(); ++i) {
        (i < static_cast<std::size_t>(v) ? val_part.rows : fit_part.rows).push_back(neg[i]);
        (i < static_cast<std::size_t>(v) ? val_y : fit_y).push_back(0.0);
    }
    fit_part.y = Eigen::Map<Vector>(fit_y.data(), static_cast<Index>(fit_y.size()));
    val_part.y = Eigen::Map<Vector>(val_y.data(), static_cast<Index>(val_y.size()));
    return {fit_part, val_part};
}

inline void save_with_trace(const fs::path& base, const TrainedModel& m) {
    fs::create_directories(base.parent_path());
    // append rather than replace: tags such as l1_0.01_l2_0.01 contain dots
    save_model(fs::path(base.string() + ".model"), m);
    write_file(fs::path(base.string() + ".trace"), [&](std::ostream& os) { write_trace(os, m.trace); });
}

}  // namespace detail

/// Train every (budget, class) task of the manifest for one method.
inline TrainSummary train_models(const RunConfig& cfg, const Prepared& p, const Structures& s,
                                 Method method, std::ostream& log) {
    TrainSummary summary;
    std::vector<std::tuple<double, double>> grid;
    const std::vector<double> l2s = method == Method::klr ? std::vector<double>{0.0} : cfg.lambda2_grid;
    for (double l1 : cfg.lambda1_grid)
        for (double l2 : l2s) grid.emplace_back(l1, l2);

    std::ostringstream selection;
    selection << "l_half\tclass\tlambda1\tlambda2\tvalidation_ap\n";

    for (int l_half : p.manifest.l_halves) {
        for (std::size_t c = 0; c < p.manifest.classes.size(); ++c) {
            const std::string& name = p.manifest.classes[c];
            const ClassSample* sample = p.manifest.find(l_half, name);
            if (!sample) {
                log << to_string(method) << " l_half=" << l_half << " class=" << name
                    << " SKIPPED no labeled sample in manifest\n";
                continue;
            }
            detail::Task task{l_half, c, sample, {}, {}};
            std::vector<double> ys;
            for (Index g : sample->positives) {
                task.rows.push_back(p.train_position[static_cast<std::size_t>(g)]);
                ys.push_back(1.0);
            }
            for (Index g : sample->negatives) {
                task.rows.push_back(p.train_position[static_cast<std::size_t>(g)]);
                ys.push_back(0.0);
            }
            for (Index r : task.rows)
                if (r < 0) throw DataError("manifest labels a test sample for class '" + name + "'");
            task.y = Eigen::Map<Vector>(ys.data(), static_cast<Index>(ys.size()));
            const fs::path dir = class_dir(cfg.model_dir, method, l_half, name);

            auto try_fit = [&](const detail::Task& t, const Hyperparams& h,
                               const std::string& what) -> std::optional<TrainedModel> {
                try {
                    TrainedModel m = fit_prepared(p.X_train, s.K, s.L, t.rows, t.y, h, cfg.optimizer);
                    detail::log_fit(log, method, t, what, h, m);
                    return m;
                } catch (const NumericalError& e) {
                    log << to_string(method) << " l_half=" << t.l_half << " class=" << name
                        << " model=" << what << " FAILED " << e.what() << '\n';
                    ++summary.failures;
                    return std::nullopt;
                }
            };

            if (!cfg.select) {
                for (const auto& [l1, l2] : grid) {
                    const std::string tag = lambda_tag(l1, l2);
                    if (auto m = try_fit(task, Hyperparams{l1, l2}, tag)) {
                        detail::save_with_trace(dir / tag, *m);
                        ++summary.models_written;
                    }
                }
                continue;
            }

            // Grid selection on a labeled-only validation carve-out, then a
            // refit on the full labeled sample.
            Hyperparams best{std::get<0>(grid.front()), std::get<1>(grid.front())};
            double best_ap = -1.0;
            if (l_half >= 2) {
                const auto [fit_part, val_part] = detail::carve_validation(task, cfg.validation_fraction, cfg.seed);
                for (const auto& [l1, l2] : grid) {
                    const Hyperparams h{l1, l2};
                    const auto m = try_fit(fit_part, h, "validation/" + lambda_tag(l1, l2));
                    if (!m) continue;
                    RankedPredictions rp;
                    for (std::size_t i = 0; i < val_part.rows.size(); ++i) {
                        rp.scores.push_back(s.K->values.row(val_part.rows[i]).dot(m->theta));
                        rp.relevance.push_back(val_part.y(static_cast<Index>(i)) == 1.0 ? 1 : 0);
                    }
                    const double ap = average_precision_11pt(rp);
                    if (ap > best_ap) {
                        best_ap = ap;
                        best = h;
                    }
                }
            } else {
                log << to_string(method) << " l_half=" << l_half << " class=" << name
                    << " selection skipped (l_half < 2), using first grid point\n";
            }
            if (auto m = try_fit(task, best, "selected")) {
                detail::save_with_trace(dir / "selected", *m);
                ++summary.models_written;
                selection << l_half << '\t' << name << '\t' << format_double(best.lambda1) << '\t'
                          << format_double(best.lambda2) << '\t'
                          << (best_ap >= 0.0 ? format_double(best_ap) : std::string("nan")) << '\n';
            }
        }
    }
    if (cfg.select)
        write_file(cfg.model_dir / std::string(to_string(method)) / "selection.tsv",
                   [&](std::ostream& os) { os << selection.str(); });
    return summary;
}

inline TrainSummary cmd_train(const RunConfig& cfg) {
    cfg.validate();
    const Prepared p = prepare(cfg, load_manifest(manifest_path(cfg)));
    const Structures s = build_structures(p, cfg, cfg.method == Method::lapklr);
    fs::create_directories(cfg.model_dir);
    std::ofstream log(cfg.model_dir / "train.log", std::ios::app);
    log << "# train started " << detail::timestamp() << '\n';
    return train_models(cfg, p, s, cfg.method, log);
}

// ---------------------------------------------------------------------------
// predict

/// Scores for every row of the feature file. When a manifest is available
/// and standardization is on, rows are standardized with training statistics.
inline void cmd_predict(const RunConfig& cfg, const fs::path& model_path, const fs::path& out_path) {
    require_path(cfg.features, "feature file");
    const TrainedModel model = load_model(model_path);
    Matrix X = load_features(cfg.features);
    const fs::path mpath = manifest_path(cfg);
    if (cfg.standardize && fs::exists(mpath)) {
        const SplitManifest m = load_manifest(mpath);
        if (m.n != X.rows()) throw DataError("manifest and feature file disagree on the number of rows");
        Standardizer::fit(X, m.train).apply(X);
    }
    const Vector scores = predict_score(model, X);
    const Vector proba = proba_from_scores(scores);
    write_file(out_path, [&](std::ostream& os) {
        os << "index\tscore\tprobability\tlabel\n";
        for (Index i = 0; i < scores.size(); ++i)
            os << i << '\t' << format_double(scores(i)) << '\t' << format_double(proba(i)) << '\t'
               << (proba(i) > 0.5 ? 1 : 0) << '\n';
    });
}

// ---------------------------------------------------------------------------
// eval

struct ApRow {
    int l_half;
    std::string cls;
    double ap;
    Method method;
    double lambda1;
    double lambda2;
    std::string group;
};

struct EvalSummary {
    std::vector<ApRow> rows;
    std::map<std::tuple<std::string, int, std::string>, EvalReport> reports;  // (method, l_half, group)
};

/// Evaluate every model under cfg.model_dir on the test half. A class
/// directory with selected.model contributes only that model (group
/// "selected"); otherwise every grid model contributes (group = its tag).
inline EvalSummary evaluate_models(const RunConfig& cfg, const Prepared& p) {
    EvalSummary out;
    std::optional<std::pair<KernelSpec, Matrix>> cross;  // cached test x train kernel

    for (Method method : {Method::lapklr, Method::klr}) {
        const fs::path mdir = cfg.model_dir / std::string(to_string(method));
        if (!fs::exists(mdir)) continue;
        for (int l_half : p.manifest.l_halves) {
            std::map<std::string, std::vector<std::pair<std::string, RankedPredictions>>> groups;
            std::map<std::string, std::vector<std::pair<std::string, std::string>>> missing;
            std::vector<std::tuple<std::string, std::string, double, double>> lambdas;  // group, class, l1, l2
            for (std::size_t c = 0; c < p.manifest.classes.size(); ++c) {
                const std::string& name = p.manifest.classes[c];
                const fs::path dir = class_dir(cfg.model_dir, method, l_half, name);
                std::vector<fs::path> files;
                if (fs::exists(dir / "selected.model")) {
                    files.push_back(dir / "selected.model");
                } else if (fs::exists(dir)) {
                    for (const auto& e : fs::directory_iterator(dir))
                        if (e.path().extension() == ".model") files.push_back(e.path());
                    std::sort(files.begin(), files.end());
                }
                if (files.empty()) {
                    missing["*"].emplace_back(name, "no model");
                    continue;
                }
                std::vector<int> relevance;
                for (Index g : p.manifest.test) relevance.push_back(p.labels.values(g, static_cast<Index>(c)));
                for (const auto& f : files) {
                    const TrainedModel m = load_model(f);
                    if (m.support_points->rows() != p.X_train->rows() ||
                        m.support_points->cols() != p.X_train->cols() ||
                        *m.support_points != *p.X_train)
                        throw DataError(f.string() + ": support points do not match this split's training set");
                    if (!cross || !(cross->first == m.kernel))
                        cross.emplace(m.kernel, cross_kernel(m.kernel, *p.X_train, p.X_test));
                    const Vector scores = cross->second * m.theta;
                    RankedPredictions rp{std::vector<double>(scores.data(), scores.data() + scores.size()), relevance};
                    const std::string group = f.stem().string();
                    groups[group].emplace_back(name, std::move(rp));
                    lambdas.emplace_back(group, name, m.hyper.lambda1, m.hyper.lambda2);
                }
            }
            for (auto& [group, classes] : groups) {
                EvalReport rep = evaluate(classes);
                for (const auto& miss : missing["*"]) rep.skipped_classes.push_back(miss);
                for (const auto& [cls, ap] : rep.per_class_ap) {
                    for (const auto& [g, lc, l1, l2] : lambdas)
                        if (g == group && lc == cls) {
                            out.rows.push_back({l_half, cls, ap, method, l1, l2, group});
                            break;
                        }
                }
                out.reports[{std::string(to_string(method)), l_half, group}] = std::move(rep);
            }
        }
    }
    return out;
}

inline void write_eval_outputs(const fs::path& out_dir, const EvalSummary& s) {
    for (const auto& [key, rep] : s.reports) {
        const auto& [method, l_half, group] = key;
        const std::string stem = method + "_lhalf" + std::to_string(l_half) + "_" + group;
        write_file(out_dir / "eval" / (stem + ".txt"), [&](std::ostream& os) { write_report_table(os, rep); });
        write_file(out_dir / "eval" / (stem + ".kv"), [&](std::ostream& os) { write_report_kv(os, rep); });
    }
    write_file(out_dir / "ap_table.tsv", [&](std::ostream& os) {
        os << "l_half\tclass\tAP\tmethod\tlambda1\tlambda2\tgroup\n";
        for (const auto& r : s.rows)
            os << r.l_half << '\t' << r.cls << '\t' << format_double(r.ap) << '\t' << to_string(r.method)
               << '\t' << format_double(r.lambda1) << '\t' << format_double(r.lambda2) << '\t' << r.group
               << '\n';
    });
    write_file(out_dir / "map_table.tsv", [&](std::ostream& os) {
        os << "l_half\tmethod\tgroup\tmAP\tclasses\n";
        for (const auto& [key, rep] : s.reports) {
            const auto& [method, l_half, group] = key;
            os << l_half << '\t' << method << '\t' << group << '\t' << format_double(rep.map_value) << '\t'
               << rep.per_class_ap.size() << '\n';
        }
    });
}

inline EvalSummary cmd_eval(const RunConfig& cfg) {
    cfg.validate();
    const Prepared p = prepare(cfg, load_manifest(manifest_path(cfg)));
    EvalSummary s = evaluate_models(cfg, p);
    if (s.reports.empty()) throw DataError("no models found under '" + cfg.model_dir.string() + "'");
    write_eval_outputs(cfg.output_dir, s);
    return s;
}

// ---------------------------------------------------------------------------
// grid: the full protocol in one go

struct GridSummary {
    SplitManifest manifest;
    std::vector<std::pair<double, double>> lapklr_grid;
    std::vector<std::pair<double, double>> klr_grid;
    TrainSummary lapklr;
    TrainSummary klr;
    EvalSummary eval;
};

/// split -> train (lapklr and klr, grid-selected) -> eval, all under
/// cfg.output_dir. Also writes grid.tsv (enumerated candidates) and
/// budgets.tsv (labeled counts per budget and class).
inline GridSummary cmd_grid(RunConfig cfg) {
    cfg.validate();
    cfg.select = true;
    if (cfg.manifest.empty()) cfg.manifest = cfg.output_dir / "split.manifest";
    cfg.model_dir = cfg.output_dir / "models";

    GridSummary g;
    g.manifest = cmd_split(cfg);
    for (double l1 : cfg.lambda1_grid) {
        for (double l2 : cfg.lambda2_grid) g.lapklr_grid.emplace_back(l1, l2);
        g.klr_grid.emplace_back(l1, 0.0);
    }
    write_file(cfg.output_dir / "grid.tsv", [&](std::ostream& os) {
        os << "method\tlambda1\tlambda2\n";
        for (const auto& [a, b] : g.lapklr_grid) os << "lapklr\t" << format_double(a) << '\t' << format_double(b) << '\n';
        for (const auto& [a, b] : g.klr_grid) os << "klr\t" << format_double(a) << '\t' << format_double(b) << '\n';
    });
    write_file(cfg.output_dir / "budgets.tsv", [&](std::ostream& os) {
        os << "l_half\tclass\tpositives\tnegatives\tunlabeled\n";
        for (const auto& s : g.manifest.samples)
            os << s.l_half << '\t' << s.name << '\t' << s.positives.size() << '\t' << s.negatives.size()
               << '\t' << s.unlabeled.size() << '\n';
    });

    const Prepared p = prepare(cfg, g.manifest);
    const Structures s = build_structures(p, cfg, true);
    fs::create_directories(cfg.model_dir);
    std::ofstream log(cfg.model_dir / "train.log", std::ios::app);
    log << "# grid started " << detail::timestamp() << '\n';
    g.lapklr = train_models(cfg, p, s, Method::lapklr, log);
    g.klr = train_models(cfg, p, s, Method::klr, log);
    g.eval = evaluate_models(cfg, p);
    write_eval_outputs(cfg.output_dir, g.eval);
    return g;
}

}  // namespace lapklr::pipeline
