#pragma once

// kNN data-adjacency graphs and the unnormalized graph Laplacian L = D - W.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "lapklr/error.hpp"
#include "lapklr/kernel.hpp"

namespace lapklr {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class WeightMode { binary, heat };
enum class Symmetrize { max, mean };

inline WeightMode parse_weight_mode(std::string_view s) {
    if (s == "binary") return WeightMode::binary;
    if (s == "heat") return WeightMode::heat;
    throw ConfigError("unknown graph weight mode '" + std::string(s) + "'");
}

inline Symmetrize parse_symmetrize(std::string_view s) {
    if (s == "max") return Symmetrize::max;
    if (s == "mean") return Symmetrize::mean;
    throw ConfigError("unknown symmetrization '" + std::string(s) + "'");
}

struct GraphConfig {
    int k = 10;
    WeightMode weight_mode = WeightMode::heat;
    /// Heat-kernel temperature. Unset means the mean squared kNN distance.
    std::optional<double> heat_t;
    Symmetrize symmetrize = Symmetrize::max;
    /// Use D^{-1/2} L D^{-1/2} instead of L.
    bool normalized = false;
    /// Multiply L by 1/n^2, a common manifold-regularization scaling.
    bool scale_laplacian = false;

    void validate(Eigen::Index n) const {
        if (k < 1) throw ConfigError("graph k must be >= 1, got " + std::to_string(k));
        if (k >= n)
            throw ConfigError("graph k must be < n (k=" + std::to_string(k) +
                              ", n=" + std::to_string(n) + ")");
        if (weight_mode == WeightMode::heat && heat_t && !(*heat_t > 0.0))
            throw ConfigError("heat_t must be > 0");
    }
};

struct GraphLaplacian {
    SparseMatrix W;
    Vector degrees;
    SparseMatrix L;

    Eigen::Index n() const { return L.rows(); }

    double quadratic_form(const Vector& f) const { return f.dot(L * f); }
};

namespace detail {

struct Neighbor {
    Eigen::Index index;
    double sq_dist;
};

/// Exact brute-force k nearest neighbours of every row, excluding the row
/// itself. Ties in distance go to the lower index.
inline std::vector<std::vector<Neighbor>> knn_lists(const Matrix& X, int k) {
    const Eigen::Index n = X.rows();
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = X;
    std::vector<std::vector<Neighbor>> out(static_cast<std::size_t>(n));
    std::vector<Neighbor> cand;
    cand.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        cand.clear();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            cand.push_back({j, (rows.row(i) - rows.row(j)).squaredNorm()});
        }
        auto closer = [](const Neighbor& a, const Neighbor& b) {
            return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
        };
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), closer);
        out[static_cast<std::size_t>(i)].assign(cand.begin(), cand.begin() + k);
    }
    return out;
}

}  // namespace detail

/// Symmetric kNN weight matrix W with zero diagonal.
inline SparseMatrix knn_adjacency(const Matrix& X, const GraphConfig& cfg) {
    const Eigen::Index n = X.rows();
    if (n < 2) throw DataError("knn_adjacency needs at least 2 points");
    cfg.validate(n);
    detail::require_finite_rows(X, "knn_adjacency");

    const auto lists = detail::knn_lists(X, cfg.k);

    double heat_t = 1.0;
    if (cfg.weight_mode == WeightMode::heat) {
        if (cfg.heat_t) {
            heat_t = *cfg.heat_t;
        } else {
            double sum = 0.0;
            std::size_t count = 0;
            for (const auto& l : lists)
                for (const auto& nb : l) {
                    sum += nb.sq_dist;
                    ++count;
                }
            const double mean = sum / static_cast<double>(count);
            heat_t = mean > 0.0 ? mean : 1.0;
        }
    }

    std::vector<Eigen::Triplet<double>> directed;
    directed.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(cfg.k));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (const auto& nb : lists[static_cast<std::size_t>(i)]) {
            const double w = cfg.weight_mode == WeightMode::binary
                                 ? 1.0
                                 : std::exp(-nb.sq_dist / heat_t);
            directed.emplace_back(i, nb.index, w);
        }
    }
    SparseMatrix A(n, n);
    A.setFromTriplets(directed.begin(), directed.end());
    const SparseMatrix At = A.transpose();

    SparseMatrix W;
    if (cfg.symmetrize == Symmetrize::mean) {
        W = 0.5 * (A + At);
    } else {
        W = A.binaryExpr(At, [](double a, double b) { return std::max(a, b); });
    }
    W.prune(0.0);
    W.makeCompressed();
    return W;
}

/// L = D - W with D_ii = sum_j W_ij.
inline GraphLaplacian laplacian(const SparseMatrix& W) {
    if (W.rows() != W.cols()) throw DataError("laplacian: W must be square");
    const Eigen::Index n = W.rows();
    const SparseMatrix Wt = W.transpose();
    const SparseMatrix diff = W - Wt;
    const double asym = diff.nonZeros() == 0 ? 0.0 : diff.coeffs().cwiseAbs().maxCoeff();
    if (asym > 1e-12)
        throw DataError("laplacian: W is not symmetric (max |W - W^T| = " +
                        std::to_string(asym) + ")");

    Vector degrees = Vector::Zero(n);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(W.nonZeros()) + static_cast<std::size_t>(n));
    for (Eigen::Index c = 0; c < W.outerSize(); ++c) {
        for (SparseMatrix::InnerIterator it(W, c); it; ++it) {
            if (it.value() < 0.0) throw DataError("laplacian: W has a negative weight");
            if (it.row() == it.col() && it.value() != 0.0)
                throw DataError("laplacian: W has a nonzero diagonal entry");
            degrees(it.row()) += it.value();
            if (it.value() != 0.0) trips.emplace_back(it.row(), it.col(), -it.value());
        }
    }
    for (Eigen::Index i = 0; i < n; ++i)
        if (degrees(i) != 0.0) trips.emplace_back(i, i, degrees(i));

    GraphLaplacian out;
    out.W = W;
    out.degrees = std::move(degrees);
    out.L.resize(n, n);
    out.L.setFromTriplets(trips.begin(), trips.end());
    out.L.makeCompressed();
    return out;
}

/// An all-zero Laplacian over n points (no graph).
inline GraphLaplacian empty_laplacian(Eigen::Index n) {
    GraphLaplacian out;
    out.W.resize(n, n);
    out.degrees = Vector::Zero(n);
    out.L.resize(n, n);
    return out;
}

/// D^{-1/2} L D^{-1/2}; rows of isolated nodes stay zero.
inline GraphLaplacian normalize(GraphLaplacian g) {
    Vector inv_sqrt = g.degrees.unaryExpr([](double d) { return d > 0.0 ? 1.0 / std::sqrt(d) : 0.0; });
    g.L = inv_sqrt.asDiagonal() * g.L * inv_sqrt.asDiagonal();
    g.L.makeCompressed();
    return g;
}

/// kNN graph over X followed by the Laplacian, honouring the normalization
/// and scaling switches in cfg. Fewer than two points give an empty graph.
inline GraphLaplacian build_laplacian(const Matrix& X, const GraphConfig& cfg) {
    const Eigen::Index n = X.rows();
    if (n < 2) return empty_laplacian(n);
    GraphLaplacian g = laplacian(knn_adjacency(X, cfg));
    if (cfg.normalized) g = normalize(std::move(g));
    if (cfg.scale_laplacian) {
        g.L *= 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    }
    return g;
}

/// Coordinate-triplet dump, one "row col value" line per stored entry.
inline void write_triplets(std::ostream& os, const SparseMatrix& M) {
    std::vector<std::tuple<Eigen::Index, Eigen::Index, double>> entries;
    for (Eigen::Index c = 0; c < M.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(M, c); it; ++it)
            entries.emplace_back(it.row(), it.col(), it.value());
    std::sort(entries.begin(), entries.end());
    os.precision(17);
    for (const auto& [r, c, v] : entries) os << r << ' ' << c << ' ' << v << '\n';
}

}  // namespace lapklr
