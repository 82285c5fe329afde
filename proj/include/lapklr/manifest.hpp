#pragma once

// Split manifest: the train/test partition plus, for every label budget and
// class, the sampled labeled positives/negatives and the remaining unlabeled
// training samples. All indices are row numbers of the feature file.
//
//   LAPKLR-SPLIT 1
//   seed <u64>
//   test_fraction <double>
//   n <rows>
//   l_half <b1> <b2> ...
//   classes <name1> <name2> ...
//   train <count> <idx>...
//   test <count> <idx>...
//   positives <l_half> <class> <idx>...
//   negatives <l_half> <class> <idx>...
//   unlabeled <l_half> <class> <idx>...

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lapklr/data_io.hpp"
#include "lapklr/error.hpp"
#include "lapklr/format.hpp"

namespace lapklr {

inline constexpr std::string_view kManifestMagic = "LAPKLR-SPLIT";

struct ClassSample {
    int l_half = 0;
    std::string name;
    std::vector<Index> positives;
    std::vector<Index> negatives;
    std::vector<Index> unlabeled;
};

struct SplitManifest {
    std::uint64_t seed = 0;
    double test_fraction = 0.5;
    Index n = 0;
    std::vector<int> l_halves;
    std::vector<std::string> classes;
    std::vector<Index> train;
    std::vector<Index> test;
    std::vector<ClassSample> samples;

    const ClassSample* find(int l_half, const std::string& name) const {
        for (const auto& s : samples)
            if (s.l_half == l_half && s.name == name) return &s;
        return nullptr;
    }

    /// Partition checks: train/test cover 0..n-1 disjointly, and every
    /// sample splits the training set into labeled and unlabeled.
    void check() const {
        std::vector<int> seen(static_cast<std::size_t>(n), 0);
        for (Index i : train) {
            if (i < 0 || i >= n) throw DataError("manifest: train index out of range");
            ++seen[static_cast<std::size_t>(i)];
        }
        for (Index i : test) {
            if (i < 0 || i >= n) throw DataError("manifest: test index out of range");
            ++seen[static_cast<std::size_t>(i)];
        }
        if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; }))
            throw DataError("manifest: train/test do not partition the samples");

        std::vector<Index> sorted_train = train;
        std::sort(sorted_train.begin(), sorted_train.end());
        for (const auto& s : samples) {
            std::vector<Index> all;
            all.insert(all.end(), s.positives.begin(), s.positives.end());
            all.insert(all.end(), s.negatives.begin(), s.negatives.end());
            all.insert(all.end(), s.unlabeled.begin(), s.unlabeled.end());
            std::sort(all.begin(), all.end());
            if (all != sorted_train)
                throw DataError("manifest: sample for class '" + s.name + "' at l_half " +
                                std::to_string(s.l_half) + " does not partition the training set");
            if (static_cast<int>(s.positives.size()) != s.l_half ||
                static_cast<int>(s.negatives.size()) != s.l_half)
                throw DataError("manifest: sample for class '" + s.name + "' is not balanced");
        }
    }
};

/// Split n samples and draw every (budget, class) labeled sample.
/// Fails on the first class that cannot supply l_half of each label.
inline SplitManifest make_manifest(const LabelTable& labels, std::uint64_t seed,
                                   const std::vector<int>& l_halves, double test_fraction) {
    if (l_halves.empty()) throw ConfigError("at least one l_half budget is required");
    for (const auto& name : labels.names)
        if (name.empty() || name.find_first_of(" \t\r\n") != std::string::npos)
            throw DataError("class name '" + name + "' must be non-empty without whitespace");

    SplitManifest m;
    m.seed = seed;
    m.test_fraction = test_fraction;
    m.n = labels.values.rows();
    m.l_halves = l_halves;
    m.classes = labels.names;
    const auto split = train_test_split(m.n, SplitSpec{seed, l_halves.front(), test_fraction});
    m.train = split.train;
    m.test = split.test;

    for (int l_half : l_halves) {
        const SplitSpec spec{seed, l_half, test_fraction};
        for (Index c = 0; c < labels.values.cols(); ++c) {
            std::vector<int> train_labels;
            train_labels.reserve(m.train.size());
            for (Index i : m.train) train_labels.push_back(labels.values(i, c));
            const std::string& name = labels.names[static_cast<std::size_t>(c)];
            const auto s = balanced_label_sample(train_labels, spec, static_cast<std::uint64_t>(c), name);
            ClassSample cs{l_half, name, {}, {}, {}};
            const auto half = static_cast<std::size_t>(l_half);
            for (std::size_t k = 0; k < s.labeled.size(); ++k) {
                const Index global = m.train[static_cast<std::size_t>(s.labeled[k])];
                (k < half ? cs.positives : cs.negatives).push_back(global);
            }
            for (Index u : s.unlabeled) cs.unlabeled.push_back(m.train[static_cast<std::size_t>(u)]);
            m.samples.push_back(std::move(cs));
        }
    }
    return m;
}

inline void write_manifest(std::ostream& os, const SplitManifest& m) {
    auto list = [&os](const std::vector<Index>& v) {
        for (Index i : v) os << ' ' << i;
        os << '\n';
    };
    os << kManifestMagic << " 1\n"
       << "seed " << m.seed << '\n'
       << "test_fraction " << format_double(m.test_fraction) << '\n'
       << "n " << m.n << '\n'
       << "l_half";
    for (int b : m.l_halves) os << ' ' << b;
    os << "\nclasses";
    for (const auto& c : m.classes) os << ' ' << c;
    os << "\ntrain " << m.train.size();
    list(m.train);
    os << "test " << m.test.size();
    list(m.test);
    for (const auto& s : m.samples) {
        os << "positives " << s.l_half << ' ' << s.name;
        list(s.positives);
        os << "negatives " << s.l_half << ' ' << s.name;
        list(s.negatives);
        os << "unlabeled " << s.l_half << ' ' << s.name;
        list(s.unlabeled);
    }
}

inline SplitManifest read_manifest(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != std::string(kManifestMagic) + " 1")
        throw DataError("not a split manifest (bad magic line)");
    SplitManifest m;
    std::map<std::pair<int, std::string>, std::size_t> where;
    auto sample_for = [&](int l_half, const std::string& name) -> ClassSample& {
        const auto key = std::make_pair(l_half, name);
        auto it = where.find(key);
        if (it == where.end()) {
            it = where.emplace(key, m.samples.size()).first;
            m.samples.push_back(ClassSample{l_half, name, {}, {}, {}});
        }
        return m.samples[it->second];
    };
    auto read_indices = [](std::istringstream& ss) {
        std::vector<Index> out;
        long long v;
        while (ss >> v) out.push_back(static_cast<Index>(v));
        return out;
    };
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "seed") ss >> m.seed;
        else if (key == "test_fraction") {
            std::string v;
            ss >> v;
            if (!parse_double(v, m.test_fraction)) throw DataError("manifest: bad test_fraction");
        } else if (key == "n") ss >> m.n;
        else if (key == "l_half") {
            int b;
            while (ss >> b) m.l_halves.push_back(b);
        } else if (key == "classes") {
            std::string c;
            while (ss >> c) m.classes.push_back(c);
        } else if (key == "train" || key == "test") {
            std::size_t count = 0;
            ss >> count;
            auto idx = read_indices(ss);
            if (idx.size() != count)
                throw DataError("manifest line " + std::to_string(lineno) + ": count mismatch");
            (key == "train" ? m.train : m.test) = std::move(idx);
        } else if (key == "positives" || key == "negatives" || key == "unlabeled") {
            int l_half = 0;
            std::string name;
            ss >> l_half >> name;
            auto& s = sample_for(l_half, name);
            auto idx = read_indices(ss);
            (key == "positives" ? s.positives : key == "negatives" ? s.negatives : s.unlabeled) =
                std::move(idx);
        } else {
            throw DataError("manifest line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    m.check();
    return m;
}

inline void save_manifest(const std::filesystem::path& path, const SplitManifest& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
    write_manifest(os, m);
}

inline SplitManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open manifest '" + path.string() + "'");
    try {
        return read_manifest(is);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace lapklr
