#pragma once

// Fletcher-Reeves nonlinear conjugate gradient.
//
//   theta_{k+1} = theta_k + beta * d_k
//   d_{k+1}     = -g_{k+1} + (|g_{k+1}|^2 / |g_k|^2) d_k
//
// stopping when |f(theta_{k+1}) - f(theta_k)| < epsilon, |g|_inf < grad_tol,
// or after max_iters. The step beta is either fixed or chosen by Armijo
// backtracking from beta_step.

#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lapklr/error.hpp"

namespace lapklr {

enum class LineSearch { fixed, backtracking };
enum class StopReason { delta_f, grad_tol, max_iters };

inline std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::delta_f: return "delta_f";
        case StopReason::grad_tol: return "grad_tol";
        case StopReason::max_iters: return "max_iters";
    }
    return "?";
}

inline std::string_view to_string(LineSearch s) {
    return s == LineSearch::fixed ? "fixed" : "backtracking";
}

inline LineSearch parse_line_search(std::string_view s) {
    if (s == "fixed") return LineSearch::fixed;
    if (s == "backtracking") return LineSearch::backtracking;
    throw ConfigError("unknown line search '" + std::string(s) + "'");
}

struct OptimizerConfig {
    double beta_step = 1.0;
    double epsilon = 1e-6;
    int max_iters = 500;
    /// Starting point; unset means the zero vector.
    std::optional<Eigen::VectorXd> theta0;
    LineSearch line_search = LineSearch::backtracking;
    /// Reset the direction to steepest descent every N iterations.
    /// 0 means N = dim(theta); unset means never restart.
    std::optional<std::size_t> restart_every = 0;
    double grad_tol = 1e-5;

    static constexpr double armijo_c1 = 1e-4;
    static constexpr int max_halvings = 60;

    void validate() const {
        if (!(beta_step > 0.0) || !std::isfinite(beta_step))
            throw ConfigError("optimizer beta_step must be > 0");
        if (!(epsilon > 0.0 && epsilon < 0.1))
            throw ConfigError("optimizer epsilon must satisfy 0 < epsilon < 0.1");
        if (max_iters < 1) throw ConfigError("optimizer max_iters must be >= 1");
        if (!(grad_tol > 0.0)) throw ConfigError("optimizer grad_tol must be > 0");
    }
};

struct OptTrace {
    std::vector<double> objective_per_iter;  // iterations + 1 entries
    std::vector<double> grad_norm_per_iter;  // infinity norm
    int iterations = 0;
    StopReason stop_reason = StopReason::max_iters;
};

struct OptResult {
    Eigen::VectorXd theta;
    double objective = 0.0;
    OptTrace trace;
};

/// Accepted step size and the objective value it produced.
struct Step {
    double size;
    double objective;
};

/// Fixed step: always take beta_step.
template <typename F>
std::optional<Step> fixed_step(F& f, const Eigen::VectorXd& theta, const Eigen::VectorXd& d,
                               double beta) {
    return Step{beta, f(Eigen::VectorXd(theta + beta * d))};
}

/// Largest beta * 2^-m (m <= 60) meeting the Armijo condition
/// f(theta + s d) <= f(theta) + c1 s g.d. Non-finite trial values are
/// rejected like any other failed trial.
template <typename F>
std::optional<Step> armijo_step(F& f, const Eigen::VectorXd& theta, double f_theta,
                                const Eigen::VectorXd& g, const Eigen::VectorXd& d, double beta) {
    const double slope = g.dot(d);
    double s = beta;
    for (int m = 0; m <= OptimizerConfig::max_halvings; ++m, s *= 0.5) {
        const double trial = f(Eigen::VectorXd(theta + s * d));
        if (std::isfinite(trial) && trial <= f_theta + OptimizerConfig::armijo_c1 * s * slope)
            return Step{s, trial};
    }
    return std::nullopt;
}

/// CG driver with a caller-supplied step rule
/// `std::optional<Step>(const Vector& theta, double f_theta, const Vector& g, const Vector& d)`.
/// An empty optional means no acceptable step exists; the run stops there.
template <typename F, typename G, typename StepRule>
OptResult cg_minimize_with(F&& f, G&& grad, Eigen::Index dim, const OptimizerConfig& cfg,
                           StepRule&& step_rule) {
    cfg.validate();
    using Vec = Eigen::VectorXd;

    Vec theta = cfg.theta0 ? *cfg.theta0 : Vec::Zero(dim);
    if (theta.size() != dim)
        throw ConfigError("theta0 has length " + std::to_string(theta.size()) + ", expected " +
                          std::to_string(dim));
    if (!theta.allFinite()) throw NumericalError("theta0 is not finite");

    OptResult res;
    double fk = f(theta);
    if (!std::isfinite(fk)) throw DivergenceError("objective is not finite at theta0", theta);
    Vec g = grad(theta);
    res.trace.objective_per_iter.push_back(fk);
    res.trace.grad_norm_per_iter.push_back(g.size() ? g.template lpNorm<Eigen::Infinity>() : 0.0);

    Vec best = theta;
    double best_f = fk;
    auto finish = [&](StopReason why) {
        res.trace.stop_reason = why;
        res.theta = best;
        res.objective = best_f;
        return res;
    };

    if (g.size() == 0 || g.template lpNorm<Eigen::Infinity>() < cfg.grad_tol)
        return finish(StopReason::grad_tol);

    const std::size_t restart_period =
        !cfg.restart_every ? 0 : (*cfg.restart_every == 0 ? static_cast<std::size_t>(dim)
                                                          : *cfg.restart_every);
    Vec d = -g;
    for (int k = 0; k < cfg.max_iters; ++k) {
        const auto step = step_rule(theta, fk, g, d);
        if (!step) return finish(StopReason::delta_f);

        Vec next = theta + step->size * d;
        const double f_next = step->objective;
        if (!std::isfinite(f_next))
            throw DivergenceError("objective became non-finite at iteration " +
                                      std::to_string(k + 1),
                                  best);
        Vec g_next = grad(next);
        if (!g_next.allFinite())
            throw DivergenceError("gradient became non-finite at iteration " +
                                      std::to_string(k + 1),
                                  best);

        ++res.trace.iterations;
        const double g_next_inf = g_next.template lpNorm<Eigen::Infinity>();
        res.trace.objective_per_iter.push_back(f_next);
        res.trace.grad_norm_per_iter.push_back(g_next_inf);
        if (f_next < best_f) {
            best = next;
            best_f = f_next;
        }

        const bool small_change = std::abs(f_next - fk) < cfg.epsilon;
        const double fr = g_next.squaredNorm() / g.squaredNorm();
        theta = std::move(next);
        fk = f_next;

        if (g_next_inf < cfg.grad_tol) return finish(StopReason::grad_tol);
        if (small_change) return finish(StopReason::delta_f);

        d = -g_next + fr * d;
        if (restart_period != 0 &&
            static_cast<std::size_t>(res.trace.iterations) % restart_period == 0)
            d = -g_next;
        g = std::move(g_next);
    }
    return finish(StopReason::max_iters);
}

/// Minimize f from cfg.theta0 (or zeros of length dim) with the step rule
/// chosen by cfg.line_search. Returns the best iterate seen.
template <typename F, typename G>
OptResult cg_minimize(F&& f, G&& grad, Eigen::Index dim, const OptimizerConfig& cfg) {
    if (cfg.line_search == LineSearch::fixed) {
        return cg_minimize_with(f, grad, dim, cfg,
                                [&](const Eigen::VectorXd& theta, double, const Eigen::VectorXd&,
                                    const Eigen::VectorXd& d) {
                                    return fixed_step(f, theta, d, cfg.beta_step);
                                });
    }
    return cg_minimize_with(
        f, grad, dim, cfg,
        [&](const Eigen::VectorXd& theta, double f_theta, const Eigen::VectorXd& g,
            Eigen::VectorXd& d) {
            // FR directions can stop being descent directions under an
            // inexact search; fall back to steepest descent when that happens.
            if (g.dot(d) >= 0.0) d = -g;
            return armijo_step(f, theta, f_theta, g, d, cfg.beta_step);
        });
}

/// Two-column "iteration objective" table.
inline void write_trace(std::ostream& os, const OptTrace& trace) {
    os << "# iteration objective\n";
    os.precision(17);
    for (std::size_t i = 0; i < trace.objective_per_iter.size(); ++i)
        os << i << ' ' << trace.objective_per_iter[i] << '\n';
}

}  // namespace lapklr
