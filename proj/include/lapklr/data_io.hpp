#pragma once

// Feature and label ingestion, standardization, train/test splitting and
// balanced labeled-set sampling.
//
// Randomness: the split permutation uses Rng(derive_seed(seed, 0)); the
// labeled sample for class c at budget l_half uses
// Rng(derive_seed(derive_seed(seed, l_half), c + 1)). See random.hpp for the
// engine and stream-derivation constants.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lapklr/error.hpp"
#include "lapklr/format.hpp"
#include "lapklr/kernel.hpp"
#include "lapklr/random.hpp"

namespace lapklr {

using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Feature files

inline constexpr std::string_view kFeatureMagic = "LAPKLR-FEATURES";

namespace detail {

inline std::vector<std::string> split_tokens(const std::string& line, bool comma) {
    std::vector<std::string> out;
    if (comma) {
        std::string tok;
        std::istringstream ss(line);
        while (std::getline(ss, tok, ',')) out.push_back(trim(tok));
    } else {
        std::istringstream ss(line);
        std::string tok;
        while (ss >> tok) out.push_back(tok);
    }
    return out;
}

inline bool skippable(const std::string& line) {
    const std::string t = trim(line);
    return t.empty() || t.front() == '#';
}

}  // namespace detail

/// Parse delimited text: one sample per line, comma- or whitespace-separated
/// (decided from the first data line). Blank and '#' lines are ignored.
inline Matrix read_features_text(std::istream& is) {
    std::vector<double> values;
    std::size_t d = 0;
    std::size_t n = 0;
    bool comma = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (detail::skippable(line)) continue;
        if (n == 0) comma = line.find(',') != std::string::npos;
        const auto toks = detail::split_tokens(line, comma);
        if (n == 0) {
            d = toks.size();
            if (d == 0) throw DataError("line " + std::to_string(lineno) + ": no values");
        } else if (toks.size() != d) {
            throw DataError("line " + std::to_string(lineno) + ": expected " + std::to_string(d) +
                            " values, found " + std::to_string(toks.size()) + " (ragged row)");
        }
        for (const auto& t : toks) {
            double v = 0.0;
            if (!parse_double(t, v))
                throw DataError("line " + std::to_string(lineno) + ": non-numeric token '" + t + "'");
            if (!std::isfinite(v))
                throw DataError("line " + std::to_string(lineno) + ": non-finite value '" + t + "'");
            values.push_back(v);
        }
        ++n;
    }
    if (n == 0) throw DataError("feature file has no samples");
    Matrix X(static_cast<Index>(n), static_cast<Index>(d));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c)
            X(static_cast<Index>(r), static_cast<Index>(c)) = values[r * d + c];
    return X;
}

/// Binary layout: "LAPKLR-FEATURES 1\nrows <n>\ncols <d>\nend_header\n"
/// followed by n*d little-endian float64 values, row-major.
inline void write_features_binary(std::ostream& os, const Matrix& X) {
    os << kFeatureMagic << " 1\nrows " << X.rows() << "\ncols " << X.cols() << "\nend_header\n";
    for (Index r = 0; r < X.rows(); ++r)
        for (Index c = 0; c < X.cols(); ++c) write_f64_le(os, X(r, c));
}

inline void write_features_text(std::ostream& os, const Matrix& X) {
    for (Index r = 0; r < X.rows(); ++r) {
        for (Index c = 0; c < X.cols(); ++c) os << (c ? " " : "") << format_double(X(r, c));
        os << '\n';
    }
}

inline Matrix read_features_binary(std::istream& is) {
    std::string line;
    std::getline(is, line);
    long long rows = -1, cols = -1;
    while (std::getline(is, line) && line != "end_header") {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "rows") ss >> rows;
        else if (key == "cols") ss >> cols;
    }
    if (rows < 1 || cols < 1) throw DataError("binary feature header lacks rows/cols");
    Matrix X(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) {
            X(r, c) = read_f64_le(is);
            if (!std::isfinite(X(r, c)))
                throw DataError("non-finite value in binary feature row " + std::to_string(r));
        }
    return X;
}

inline Matrix load_features(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open feature file '" + path.string() + "'");
    try {
        std::string first(kFeatureMagic.size(), '\0');
        is.read(first.data(), static_cast<std::streamsize>(first.size()));
        const bool binary = is.gcount() == static_cast<std::streamsize>(first.size()) && first == kFeatureMagic;
        is.clear();
        is.seekg(0);
        return binary ? read_features_binary(is) : read_features_text(is);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

/// Per-column affine map x -> (x - mean) / scale, fitted on a subset of rows.
struct Standardizer {
    Vector mean;
    Vector scale;

    /// Population statistics over `rows` of X; constant columns get scale 1.
    static Standardizer fit(const Matrix& X, std::span<const Index> rows) {
        if (rows.empty()) throw DataError("cannot standardize on zero rows");
        Standardizer s{Vector::Zero(X.cols()), Vector::Ones(X.cols())};
        for (Index r : rows) s.mean += X.row(r).transpose();
        s.mean /= static_cast<double>(rows.size());
        Vector var = Vector::Zero(X.cols());
        for (Index r : rows) var += (X.row(r).transpose() - s.mean).array().square().matrix();
        var /= static_cast<double>(rows.size());
        for (Index c = 0; c < X.cols(); ++c)
            s.scale(c) = var(c) > 0.0 ? std::sqrt(var(c)) : 1.0;
        return s;
    }

    void apply(Matrix& X) const {
        X = ((X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
    }
};

// ---------------------------------------------------------------------------
// Label files

struct LabelTable {
    std::vector<std::string> names;
    Eigen::MatrixXi values;  // n x classes, entries 0/1

    Index class_index(const std::string& name) const {
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw DataError("unknown class '" + name + "'");
        return it - names.begin();
    }
};

/// Header row of class names, then one {0,1} row per sample.
inline LabelTable read_labels(std::istream& is) {
    LabelTable t;
    std::string line;
    std::size_t lineno = 0;
    bool comma = false;
    std::vector<std::vector<int>> rows;
    while (std::getline(is, line)) {
        ++lineno;
        if (detail::skippable(line)) continue;
        if (t.names.empty()) {
            comma = line.find(',') != std::string::npos;
            t.names = detail::split_tokens(line, comma);
            continue;
        }
        const auto toks = detail::split_tokens(line, comma);
        if (toks.size() != t.names.size())
            throw DataError("line " + std::to_string(lineno) + ": expected " +
                            std::to_string(t.names.size()) + " labels, found " +
                            std::to_string(toks.size()));
        std::vector<int> row;
        for (const auto& tok : toks) {
            if (tok != "0" && tok != "1")
                throw DataError("line " + std::to_string(lineno) + ": label '" + tok +
                                "' is not 0 or 1");
            row.push_back(tok == "1");
        }
        rows.push_back(std::move(row));
    }
    if (t.names.empty()) throw DataError("label file has no header");
    t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(t.names.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < t.names.size(); ++c)
            t.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    return t;
}

inline LabelTable load_labels(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open label file '" + path.string() + "'");
    try {
        return read_labels(is);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

inline void write_labels(std::ostream& os, const LabelTable& t) {
    for (std::size_t c = 0; c < t.names.size(); ++c) os << (c ? " " : "") << t.names[c];
    os << '\n';
    for (Index r = 0; r < t.values.rows(); ++r) {
        for (Index c = 0; c < t.values.cols(); ++c) os << (c ? " " : "") << t.values(r, c);
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Splits

struct SplitSpec {
    std::uint64_t seed = 0;
    int l_half = 5;
    double test_fraction = 0.5;

    void validate() const {
        if (l_half < 1) throw ConfigError("l_half must be >= 1");
        if (!(test_fraction > 0.0 && test_fraction < 1.0))
            throw ConfigError("test_fraction must lie in (0, 1)");
    }
};

struct TrainTestSplit {
    std::vector<Index> train;  // ascending
    std::vector<Index> test;   // ascending
};

/// Number of training samples: ceil(n (1 - test_fraction)), with a 1e-9
/// guard so that exact products are not pushed up by rounding.
inline Index train_size(Index n, double test_fraction) {
    const double raw = static_cast<double>(n) * (1.0 - test_fraction);
    return std::clamp<Index>(static_cast<Index>(std::ceil(raw - 1e-9)), 0, n);
}

inline TrainTestSplit train_test_split(Index n, const SplitSpec& spec) {
    spec.validate();
    if (n < 2) throw DataError("train/test split needs at least 2 samples");
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng rng(derive_seed(spec.seed, 0));
    rng.shuffle(std::span<Index>(perm));
    const auto n_train = static_cast<std::size_t>(train_size(n, spec.test_fraction));
    TrainTestSplit s;
    s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

struct LabelSample {
    std::vector<Index> labeled;    // l_half positives (ascending) then l_half negatives (ascending)
    std::vector<Index> unlabeled;  // ascending
};

/// Choose l_half positives and l_half negatives uniformly without
/// replacement. Indices are positions in `labels` (the training set).
inline LabelSample balanced_label_sample(std::span<const int> labels, const SplitSpec& spec,
                                         std::uint64_t class_stream = 0,
                                         const std::string& class_name = "class") {
    spec.validate();
    std::vector<Index> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) pos.push_back(static_cast<Index>(i));
        else if (labels[i] == 0) neg.push_back(static_cast<Index>(i));
        else throw DataError("class '" + class_name + "': label values must be 0 or 1");
    }
    const auto need = static_cast<std::size_t>(spec.l_half);
    if (pos.size() < need)
        throw DataError("class '" + class_name + "': insufficient positives (" +
                        std::to_string(pos.size()) + " < " + std::to_string(need) + ")");
    if (neg.size() < need)
        throw DataError("class '" + class_name + "': insufficient negatives (" +
                        std::to_string(neg.size()) + " < " + std::to_string(need) + ")");

    Rng rng(derive_seed(derive_seed(spec.seed, static_cast<std::uint64_t>(spec.l_half)),
                        class_stream + 1));
    auto pick = [&](std::vector<Index>& pool) {
        // partial Fisher-Yates: the first `need` slots become the sample
        for (std::size_t i = 0; i < need; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        std::vector<Index> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(need));
        std::sort(chosen.begin(), chosen.end());
        return chosen;
    };
    LabelSample s;
    const auto p = pick(pos);
    const auto q = pick(neg);
    s.labeled.insert(s.labeled.end(), p.begin(), p.end());
    s.labeled.insert(s.labeled.end(), q.begin(), q.end());

    std::vector<char> used(labels.size(), 0);
    for (Index i : s.labeled) used[static_cast<std::size_t>(i)] = 1;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (!used[i]) s.unlabeled.push_back(static_cast<Index>(i));
    return s;
}

}  // namespace lapklr
