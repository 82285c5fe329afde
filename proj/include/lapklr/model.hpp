#pragma once

// Laplacian-regularized kernel logistic regression.
//
// With f = K theta over all l+u training points, the trained objective is
//
//   J(theta) = -(1/l) sum_{i<l} [ y_i log s(f_i) + (1 - y_i) log(1 - s(f_i)) ]
//              + lambda1 theta' K theta + lambda2 theta' K L K theta
//
// where s is the logistic sigmoid, labels are coded {0,1}, and only the
// labeled rows enter the data term. Predictions use the kernel expansion
// f(x) = sum_i theta_i K(x_i, x).

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lapklr/error.hpp"
#include "lapklr/graph.hpp"
#include "lapklr/kernel.hpp"
#include "lapklr/optimizer.hpp"

namespace lapklr {

using Index = Eigen::Index;

struct Hyperparams {
    double lambda1 = 1e-2;
    double lambda2 = 1e-2;

    void validate() const {
        if (!(lambda1 >= 0.0) || !std::isfinite(lambda1))
            throw ConfigError("lambda1 must be a finite value >= 0");
        if (!(lambda2 >= 0.0) || !std::isfinite(lambda2))
            throw ConfigError("lambda2 must be a finite value >= 0");
    }
};

// ---------------------------------------------------------------------------
// Numerically stable logistic helpers.

/// log(1 + e^x) without overflow.
inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// 1 / (1 + e^-x), evaluated on the branch where exp cannot overflow.
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Map a {+1,-1} or {1,0} label onto the {1,0} Bernoulli coding.
inline double to_label01(double y) {
    if (y == 1.0) return 1.0;
    if (y == 0.0 || y == -1.0) return 0.0;
    throw DataError("label must be one of {+1,-1} or {1,0}, got " + std::to_string(y));
}

// ---------------------------------------------------------------------------

/// Training data with the labeled samples stored first.
class LabeledSet {
public:
    /// `features` rows [0, labels.size()) are labeled, the rest unlabeled.
    LabeledSet(Matrix features, std::span<const double> labels) : features_(std::move(features)) {
        if (labels.empty()) throw DataError("a labeled set needs at least one labeled sample");
        if (static_cast<Index>(labels.size()) > features_.rows())
            throw DataError("more labels (" + std::to_string(labels.size()) + ") than samples (" +
                            std::to_string(features_.rows()) + ")");
        labels01_.resize(static_cast<Index>(labels.size()));
        for (std::size_t i = 0; i < labels.size(); ++i)
            labels01_(static_cast<Index>(i)) = to_label01(labels[i]);
    }

    /// Gather rows so that `labeled` come first (in order) followed by `unlabeled`.
    static LabeledSet from_indices(const Matrix& X, std::span<const Index> labeled,
                                   std::span<const double> labels,
                                   std::span<const Index> unlabeled) {
        if (labeled.size() != labels.size())
            throw DataError("labeled index and label counts differ");
        Matrix rows(static_cast<Index>(labeled.size() + unlabeled.size()), X.cols());
        Index r = 0;
        for (Index i : labeled) rows.row(r++) = X.row(i);
        for (Index i : unlabeled) rows.row(r++) = X.row(i);
        return LabeledSet(std::move(rows), labels);
    }

    const Matrix& features() const { return features_; }
    const Vector& labels01() const { return labels01_; }
    Index labeled_count() const { return labels01_.size(); }
    Index unlabeled_count() const { return features_.rows() - labels01_.size(); }
    Index size() const { return features_.rows(); }

    /// Row indices of the labeled samples: 0..l-1.
    std::vector<Index> labeled_rows() const {
        std::vector<Index> rows(static_cast<std::size_t>(labeled_count()));
        std::iota(rows.begin(), rows.end(), Index{0});
        return rows;
    }

private:
    Matrix features_;
    Vector labels01_;
};

/// The LapKLR objective and gradient over a fixed Gram matrix and Laplacian.
/// Labeled samples are addressed by row index into K, so several label
/// assignments can share one K and one L. K and L must outlive this object.
class LapKlrObjective {
public:
    LapKlrObjective(const Matrix& K, const SparseMatrix& L, std::vector<Index> labeled_rows,
                    Vector labels01, Hyperparams hyper)
        : K_(K), L_(L), rows_(std::move(labeled_rows)), y_(std::move(labels01)), hyper_(hyper) {
        hyper_.validate();
        if (K_.rows() != K_.cols()) throw DataError("Gram matrix must be square");
        if (L_.rows() != K_.rows() || L_.cols() != K_.cols())
            throw DataError("Gram matrix (n=" + std::to_string(K_.rows()) +
                            ") and Laplacian (n=" + std::to_string(L_.rows()) +
                            ") cover different point sets");
        if (rows_.empty()) throw DataError("objective needs at least one labeled sample");
        if (static_cast<Index>(rows_.size()) != y_.size())
            throw DataError("labeled row and label counts differ");
        for (Index r : rows_)
            if (r < 0 || r >= K_.rows()) throw DataError("labeled row index out of range");
    }

    Index dim() const { return K_.rows(); }
    const Hyperparams& hyper() const { return hyper_; }

    double value(const Vector& theta) const {
        const Vector& f = scores(theta);
        double loss = 0.0;
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            const double z = f(rows_[i]);
            const double y = y_(static_cast<Index>(i));
            // -log s(z) = softplus(-z), -log(1 - s(z)) = softplus(z)
            loss += y * softplus(-z) + (1.0 - y) * softplus(z);
        }
        double total = loss / static_cast<double>(rows_.size());
        if (hyper_.lambda1 != 0.0) total += hyper_.lambda1 * theta.dot(f);
        if (hyper_.lambda2 != 0.0) total += hyper_.lambda2 * f.dot(L_ * f);
        return total;
    }

    /// Exact gradient. K and L are exactly symmetric by construction, so
    /// (K + K')theta = 2 K theta and (KLK + (KLK)')theta = 2 K L K theta.
    Vector gradient(const Vector& theta) const {
        const Vector& f = scores(theta);
        Vector g = Vector::Zero(theta.size());
        const double inv_l = 1.0 / static_cast<double>(rows_.size());
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            const Index r = rows_[i];
            const double resid = sigmoid(f(r)) - y_(static_cast<Index>(i));
            g.noalias() += (inv_l * resid) * K_.col(r);
        }
        if (hyper_.lambda1 != 0.0) g.noalias() += (2.0 * hyper_.lambda1) * f;
        if (hyper_.lambda2 != 0.0) {
            const Vector Lf = L_ * f;
            g.noalias() += (2.0 * hyper_.lambda2) * (K_ * Lf);
        }
        return g;
    }

    void check_finite(const Vector& theta) const {
        if (theta.size() != dim())
            throw DataError("theta has length " + std::to_string(theta.size()) + ", expected " +
                            std::to_string(dim()));
        if (!theta.allFinite()) throw NumericalError("theta is not finite");
    }

private:
    /// K theta, memoized for the most recent theta (value and gradient are
    /// usually requested at the same point).
    const Vector& scores(const Vector& theta) const {
        if (cached_theta_.size() != theta.size() || cached_theta_ != theta) {
            cached_theta_ = theta;
            cached_f_.noalias() = K_ * theta;
        }
        return cached_f_;
    }

    const Matrix& K_;
    const SparseMatrix& L_;
    std::vector<Index> rows_;
    Vector y_;
    Hyperparams hyper_;
    mutable Vector cached_theta_;
    mutable Vector cached_f_;
};

inline void check_same_points(const GramMatrix& K, const GraphLaplacian& L, const LabeledSet& data) {
    if (K.n() != data.size() || L.n() != data.size())
        throw DataError("Gram (n=" + std::to_string(K.n()) + "), Laplacian (n=" +
                        std::to_string(L.n()) + ") and data (n=" + std::to_string(data.size()) +
                        ") disagree on the number of points");
}

inline double objective(const Vector& theta, const GramMatrix& K, const GraphLaplacian& L,
                        const LabeledSet& data, const Hyperparams& hyper) {
    check_same_points(K, L, data);
    LapKlrObjective obj(K.values, L.L, data.labeled_rows(), data.labels01(), hyper);
    obj.check_finite(theta);
    return obj.value(theta);
}

inline Vector gradient(const Vector& theta, const GramMatrix& K, const GraphLaplacian& L,
                       const LabeledSet& data, const Hyperparams& hyper) {
    check_same_points(K, L, data);
    LapKlrObjective obj(K.values, L.L, data.labeled_rows(), data.labels01(), hyper);
    obj.check_finite(theta);
    return obj.gradient(theta);
}

/// Plain (graph-free) kernel logistic regression objective:
/// mean cross-entropy over the labeled rows plus lambda1 theta' K theta.
inline double klr_objective(const Vector& theta, const Matrix& K, std::span<const Index> labeled_rows,
                            const Vector& labels01, double lambda1) {
    double loss = 0.0;
    for (std::size_t i = 0; i < labeled_rows.size(); ++i) {
        const double z = K.row(labeled_rows[i]).dot(theta);
        loss += labels01(static_cast<Index>(i)) == 1.0 ? softplus(-z) : softplus(z);
    }
    return loss / static_cast<double>(labeled_rows.size()) + lambda1 * theta.dot(K * theta);
}

// ---------------------------------------------------------------------------

struct TrainedModel {
    Vector theta;
    std::shared_ptr<const Matrix> support_points;
    KernelSpec kernel;
    Hyperparams hyper;
    double final_objective = 0.0;
    int iterations = 0;
    OptTrace trace;
    /// Gram over the support points, kept so training-point predictions
    /// need no kernel evaluations. Not serialized.
    std::shared_ptr<const GramMatrix> gram;
    std::vector<std::string> warnings;
};

/// Train against an already-built Gram matrix and Laplacian. The support
/// points are the rows K was built from.
inline TrainedModel fit_prepared(std::shared_ptr<const Matrix> support,
                                 std::shared_ptr<const GramMatrix> K, const GraphLaplacian& L,
                                 std::vector<Index> labeled_rows, const Vector& labels01,
                                 const Hyperparams& hyper, const OptimizerConfig& opt) {
    TrainedModel model;
    if (labels01.size() >= 2) {
        const double pos = labels01.sum();
        if (pos == 0.0 || pos == static_cast<double>(labels01.size()))
            model.warnings.push_back("all labeled samples belong to one class");
    }

    LapKlrObjective obj(K->values, L.L, std::move(labeled_rows), labels01, hyper);
    auto f = [&obj](const Vector& t) { return obj.value(t); };
    auto g = [&obj](const Vector& t) { return obj.gradient(t); };
    OptResult res = cg_minimize(f, g, obj.dim(), opt);

    model.theta = std::move(res.theta);
    model.support_points = std::move(support);
    model.kernel = K->spec;
    model.hyper = hyper;
    model.final_objective = res.objective;
    model.iterations = res.trace.iterations;
    model.trace = std::move(res.trace);
    model.gram = std::move(K);
    return model;
}

/// Graph config usable on n points: k is clamped to n - 1.
inline GraphConfig clamp_graph_config(GraphConfig cfg, Index n) {
    if (n >= 2 && cfg.k >= n) cfg.k = static_cast<int>(n - 1);
    return cfg;
}

/// Build K and L over all points of `data` and train. With lambda2 = 0 the
/// graph is skipped, which makes this plain kernel logistic regression.
inline TrainedModel fit(const LabeledSet& data, const KernelSpec& kernel,
                        const GraphConfig& graph_cfg, const Hyperparams& hyper,
                        const OptimizerConfig& opt) {
    hyper.validate();
    auto support = std::make_shared<const Matrix>(data.features());
    auto K = std::make_shared<const GramMatrix>(gram_matrix(kernel, *support));
    const GraphLaplacian L = hyper.lambda2 != 0.0
                                 ? build_laplacian(*support, clamp_graph_config(graph_cfg, data.size()))
                                 : empty_laplacian(data.size());
    return fit_prepared(std::move(support), std::move(K), L, data.labeled_rows(),
                        data.labels01(), hyper, opt);
}

/// f(x_q) = sum_i theta_i K(x_i, x_q).
inline Vector predict_score(const TrainedModel& model, const Matrix& X_query) {
    if (!model.support_points) throw DataError("model has no support points");
    if (X_query.cols() != model.support_points->cols())
        throw DataError("query dimension " + std::to_string(X_query.cols()) +
                        " does not match model dimension " +
                        std::to_string(model.support_points->cols()));
    return cross_kernel(model.kernel, *model.support_points, X_query) * model.theta;
}

/// Scores at the support points themselves, using the cached Gram if present.
inline Vector predict_score_support(const TrainedModel& model) {
    if (model.gram) return model.gram->values * model.theta;
    return predict_score(model, *model.support_points);
}

/// Sigmoid of the scores, kept strictly inside (0, 1): for scores beyond
/// about +/-37 the double nearest to s(f) is 0 or 1, so results are clamped
/// one ulp inside. Use predict_proba_complement for the exact 1 - p tail.
inline Vector proba_from_scores(const Vector& scores) {
    constexpr double lo = std::numeric_limits<double>::denorm_min();
    const double hi = std::nextafter(1.0, 0.0);
    return scores.unaryExpr([&](double f) { return std::clamp(sigmoid(f), lo, hi); });
}

inline Vector predict_proba(const TrainedModel& model, const Matrix& X_query) {
    return proba_from_scores(predict_score(model, X_query));
}

/// 1 - s(f) computed as s(-f), accurate where s(f) rounds to 1.
inline Vector predict_proba_complement(const TrainedModel& model, const Matrix& X_query) {
    return predict_score(model, X_query).unaryExpr([](double f) { return sigmoid(-f); });
}

/// Hard labels: 1 when the probability exceeds 0.5, ties go to 0.
inline std::vector<int> predict_label(const TrainedModel& model, const Matrix& X_query) {
    const Vector p = predict_proba(model, X_query);
    std::vector<int> out(static_cast<std::size_t>(p.size()));
    for (Index i = 0; i < p.size(); ++i) out[static_cast<std::size_t>(i)] = p(i) > 0.5 ? 1 : 0;
    return out;
}

// ---------------------------------------------------------------------------
// One-vs-rest.

/// Labeled rows (indices into the shared feature matrix) for one class.
struct ClassTask {
    std::string name;
    std::vector<Index> labeled_rows;
    std::vector<double> labels;  // {+1,-1} or {1,0}, parallel to labeled_rows
};

struct OneVsRestResult {
    std::vector<std::pair<std::string, TrainedModel>> models;
    std::vector<std::pair<std::string, std::string>> skipped;  // class, reason
};

/// Train one binary model per task over a Gram and Laplacian shared by all.
inline OneVsRestResult fit_one_vs_rest_prepared(std::shared_ptr<const Matrix> support,
                                                std::shared_ptr<const GramMatrix> K,
                                                const GraphLaplacian& L,
                                                const std::vector<ClassTask>& tasks,
                                                const Hyperparams& hyper,
                                                const OptimizerConfig& opt) {
    OneVsRestResult out;
    for (const auto& task : tasks) {
        if (task.labeled_rows.empty()) {
            out.skipped.emplace_back(task.name, "no labeled samples");
            continue;
        }
        if (task.labeled_rows.size() != task.labels.size())
            throw DataError("class '" + task.name + "': labeled row and label counts differ");
        Vector y(static_cast<Index>(task.labels.size()));
        for (std::size_t i = 0; i < task.labels.size(); ++i)
            y(static_cast<Index>(i)) = to_label01(task.labels[i]);
        out.models.emplace_back(task.name, fit_prepared(support, K, L, task.labeled_rows, y, hyper, opt));
    }
    return out;
}

inline OneVsRestResult fit_one_vs_rest(const Matrix& features, const std::vector<ClassTask>& tasks,
                                       const KernelSpec& kernel, const GraphConfig& graph_cfg,
                                       const Hyperparams& hyper, const OptimizerConfig& opt) {
    if (tasks.empty()) throw ConfigError("one-vs-rest needs at least one class");
    hyper.validate();
    auto support = std::make_shared<const Matrix>(features);
    auto K = std::make_shared<const GramMatrix>(gram_matrix(kernel, *support));
    const GraphLaplacian L = hyper.lambda2 != 0.0
                                 ? build_laplacian(*support, clamp_graph_config(graph_cfg, features.rows()))
                                 : empty_laplacian(features.rows());
    return fit_one_vs_rest_prepared(std::move(support), std::move(K), L, tasks, hyper, opt);
}

/// Every row labeled: column c of `multilabels` ({0,1}) is class c.
inline OneVsRestResult fit_one_vs_rest(const Matrix& features, const Eigen::MatrixXi& multilabels,
                                       const std::vector<std::string>& class_names,
                                       const KernelSpec& kernel, const GraphConfig& graph_cfg,
                                       const Hyperparams& hyper, const OptimizerConfig& opt) {
    if (multilabels.rows() != features.rows())
        throw DataError("label matrix and features have different row counts");
    if (static_cast<Index>(class_names.size()) != multilabels.cols())
        throw DataError("class name count does not match label columns");
    std::vector<ClassTask> tasks;
    for (Index c = 0; c < multilabels.cols(); ++c) {
        ClassTask t{class_names[static_cast<std::size_t>(c)], {}, {}};
        for (Index r = 0; r < multilabels.rows(); ++r) {
            t.labeled_rows.push_back(r);
            t.labels.push_back(static_cast<double>(multilabels(r, c)));
        }
        tasks.push_back(std::move(t));
    }
    return fit_one_vs_rest(features, tasks, kernel, graph_cfg, hyper, opt);
}

}  // namespace lapklr
