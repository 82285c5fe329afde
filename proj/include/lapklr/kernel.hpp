#pragma once

// Kernel functions and dense Gram / cross-kernel matrices.
//
// Gram matrices are dense: an n x n Gram costs n*n*8 bytes (about 1.25 GB at
// n = 12500), which bounds the practical training-set size.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "lapklr/error.hpp"

namespace lapklr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class KernelFamily { rbf, linear, polynomial };

inline std::string_view to_string(KernelFamily f) {
    switch (f) {
        case KernelFamily::rbf: return "rbf";
        case KernelFamily::linear: return "linear";
        case KernelFamily::polynomial: return "polynomial";
    }
    return "?";
}

inline KernelFamily parse_kernel_family(std::string_view s) {
    if (s == "rbf") return KernelFamily::rbf;
    if (s == "linear") return KernelFamily::linear;
    if (s == "polynomial" || s == "poly") return KernelFamily::polynomial;
    throw ConfigError("unknown kernel family '" + std::string(s) + "'");
}

struct KernelSpec {
    KernelFamily family = KernelFamily::rbf;
    double gamma = 1.0;  // rbf width, 1/feature-distance^2
    int degree = 3;      // polynomial only
    double coef0 = 1.0;  // polynomial only

    static KernelSpec rbf(double gamma) { return {KernelFamily::rbf, gamma, 3, 1.0}; }
    static KernelSpec linear() { return {KernelFamily::linear, 1.0, 3, 1.0}; }
    static KernelSpec polynomial(int degree, double coef0) {
        return {KernelFamily::polynomial, 1.0, degree, coef0};
    }

    void validate() const {
        if (family == KernelFamily::rbf && !(gamma > 0.0 && std::isfinite(gamma)))
            throw ConfigError("rbf kernel requires gamma > 0, got " + std::to_string(gamma));
        if (family == KernelFamily::polynomial && degree < 1)
            throw ConfigError("polynomial kernel requires degree >= 1, got " +
                              std::to_string(degree));
        if (family == KernelFamily::polynomial && !std::isfinite(coef0))
            throw ConfigError("polynomial kernel requires a finite coef0");
    }

    friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Default rbf width 1/(d * var(X)), with the variance taken over all
/// entries of X. Falls back to 1/d when X is constant.
inline double default_rbf_gamma(const Matrix& X) {
    const double d = static_cast<double>(X.cols());
    const double count = static_cast<double>(X.size());
    if (X.size() == 0) throw DataError("cannot derive rbf gamma from an empty feature matrix");
    const double mean = X.sum() / count;
    const double var = (X.array() - mean).square().sum() / count;
    return var > 0.0 ? 1.0 / (d * var) : 1.0 / d;
}

template <typename DerivedX, typename DerivedZ>
double eval_kernel(const KernelSpec& spec, const Eigen::MatrixBase<DerivedX>& x,
                   const Eigen::MatrixBase<DerivedZ>& z) {
    if (x.size() != z.size())
        throw DataError("kernel dimension mismatch: " + std::to_string(x.size()) + " vs " +
                        std::to_string(z.size()));
    switch (spec.family) {
        case KernelFamily::rbf: {
            double sq = 0.0;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                const double diff = x(i) - z(i);
                sq += diff * diff;
            }
            return std::exp(-spec.gamma * sq);
        }
        case KernelFamily::linear: {
            double dot = 0.0;
            for (Eigen::Index i = 0; i < x.size(); ++i) dot += x(i) * z(i);
            return dot;
        }
        case KernelFamily::polynomial: {
            double dot = 0.0;
            for (Eigen::Index i = 0; i < x.size(); ++i) dot += x(i) * z(i);
            return std::pow(dot + spec.coef0, spec.degree);
        }
    }
    return 0.0;
}

struct GramMatrix {
    Matrix values;
    KernelSpec spec;

    Eigen::Index n() const { return values.rows(); }
};

namespace detail {
inline std::atomic<std::size_t>& gram_build_counter() {
    static std::atomic<std::size_t> counter{0};
    return counter;
}

inline void require_finite_rows(const Matrix& X, std::string_view what) {
    for (Eigen::Index r = 0; r < X.rows(); ++r)
        if (!X.row(r).allFinite())
            throw DataError(std::string(what) + ": non-finite feature in row " +
                            std::to_string(r));
}
}  // namespace detail

/// Number of gram_matrix() calls made by this process. Used to verify
/// that one-vs-rest training shares a single Gram across classes.
inline std::size_t gram_build_count() { return detail::gram_build_counter().load(); }

inline GramMatrix gram_matrix(const KernelSpec& spec, const Matrix& X) {
    spec.validate();
    if (X.rows() < 1 || X.cols() < 1) throw DataError("gram_matrix: empty feature matrix");
    detail::require_finite_rows(X, "gram_matrix");
    detail::gram_build_counter().fetch_add(1);

    const Eigen::Index n = X.rows();
    // Row-major copy so each sample is contiguous.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = X;
    GramMatrix gram{Matrix(n, n), spec};
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = eval_kernel(spec, rows.row(i), rows.row(j));
            gram.values(i, j) = v;
            gram.values(j, i) = v;
        }
    }
    return gram;
}

/// Kernel between query rows and training rows: entry (q, i) = K(query_q, train_i).
inline Matrix cross_kernel(const KernelSpec& spec, const Matrix& X_train, const Matrix& X_query) {
    spec.validate();
    if (X_train.cols() != X_query.cols())
        throw DataError("cross_kernel dimension mismatch: train d=" +
                        std::to_string(X_train.cols()) + ", query d=" +
                        std::to_string(X_query.cols()));
    detail::require_finite_rows(X_query, "cross_kernel query");
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> train = X_train;
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> query = X_query;
    Matrix out(query.rows(), train.rows());
    for (Eigen::Index q = 0; q < query.rows(); ++q)
        for (Eigen::Index i = 0; i < train.rows(); ++i)
            out(q, i) = eval_kernel(spec, query.row(q), train.row(i));
    return out;
}

}  // namespace lapklr
