#pragma once

// Seeded synthetic datasets for tests, demos and the bundled toy set.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lapklr/data_io.hpp"
#include "lapklr/kernel.hpp"
#include "lapklr/random.hpp"

namespace lapklr {

struct TwoMoons {
    Matrix X;               // n x 2
    std::vector<int> y;     // 1 = upper moon, 0 = lower moon
};

/// Two interleaving half circles: the upper moon (cos t, sin t) and the
/// lower moon (1 - cos t, 0.5 - sin t), t evenly spaced on [0, pi], with
/// isotropic Gaussian noise of standard deviation `noise`. The first
/// ceil(n/2) rows are the upper moon.
inline TwoMoons make_two_moons(Index n, double noise, std::uint64_t seed) {
    const Index n_upper = (n + 1) / 2;
    const Index n_lower = n - n_upper;
    TwoMoons out{Matrix(n, 2), std::vector<int>(static_cast<std::size_t>(n))};
    Rng rng(seed);
    auto t_at = [](Index i, Index count) {
        return count > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1)
                         : 0.0;
    };
    for (Index i = 0; i < n_upper; ++i) {
        const double t = t_at(i, n_upper);
        out.X(i, 0) = std::cos(t);
        out.X(i, 1) = std::sin(t);
        out.y[static_cast<std::size_t>(i)] = 1;
    }
    for (Index i = 0; i < n_lower; ++i) {
        const double t = t_at(i, n_lower);
        out.X(n_upper + i, 0) = 1.0 - std::cos(t);
        out.X(n_upper + i, 1) = 0.5 - std::sin(t);
        out.y[static_cast<std::size_t>(n_upper + i)] = 0;
    }
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < 2; ++c) out.X(r, c) += noise * rng.normal();
    return out;
}

/// Multi-label toy set built on two moons: classes "upper_moon",
/// "lower_moon", and "right_side" (x > 0.5 before noise).
inline std::pair<Matrix, LabelTable> make_toy_multilabel(Index n, double noise, std::uint64_t seed) {
    const Index n_upper = (n + 1) / 2;
    TwoMoons m = make_two_moons(n, noise, seed);
    LabelTable t{{"upper_moon", "lower_moon", "right_side"}, Eigen::MatrixXi(n, 3)};
    auto t_at = [](Index i, Index count) {
        return count > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1)
                         : 0.0;
    };
    for (Index r = 0; r < n; ++r) {
        const bool upper = m.y[static_cast<std::size_t>(r)] == 1;
        const double x_clean = upper ? std::cos(t_at(r, n_upper))
                                     : 1.0 - std::cos(t_at(r - n_upper, n - n_upper));
        t.values(r, 0) = upper ? 1 : 0;
        t.values(r, 1) = upper ? 0 : 1;
        t.values(r, 2) = x_clean > 0.5 ? 1 : 0;
    }
    return {std::move(m.X), std::move(t)};
}

}  // namespace lapklr
