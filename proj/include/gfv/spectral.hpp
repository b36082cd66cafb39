#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gfv/dynamics.hpp"
#include "gfv/eigenpair.hpp"
#include "gfv/errors.hpp"
#include "gfv/operator.hpp"

namespace gfv {

// ---------------------------------------------------------------------------
// Trajectory-based estimators of the Malthus parameter
// ---------------------------------------------------------------------------

/// Slope of the log total number over [t/2, t].
inline double estimate_lambda_n(const Trajectory& traj, double t)
{
    std::size_t count = 0;
    for (const auto& r : traj.rows) {
        if (r.t >= 0.5 * t - 1e-12 && r.t <= t + 1e-12) {
            if (!std::isfinite(r.log_mass)) {
                throw NumericalError("lambda_n: undefined for a vanishing population");
            }
            ++count;
        }
    }
    if (count < 10) {
        throw NumericalError("lambda_n: need at least 10 samples in [t/2, t], have " + std::to_string(count));
    }
    return *log_mass_slope(traj.rows, t);
}

/// int tau n / int x n. Identifies lambda only without death (p = 1).
inline double estimate_lambda_tau(const Population& pop, const SemiDiscreteOperator& op)
{
    const double den = moment(pop, op, MomentWeight::power, 1.0);
    if (!(den > 0.0)) {
        throw NumericalError("lambda_tau: first moment vanishes");
    }
    return moment(pop, op, MomentWeight::tau) / den;
}

/// int gamma n / int n. Identifies lambda only without death (p = 1).
inline double estimate_lambda_gamma(const Population& pop, const SemiDiscreteOperator& op)
{
    const double den = moment(pop, op, MomentWeight::one);
    if (!(den > 0.0)) {
        throw NumericalError("lambda_gamma: total number vanishes");
    }
    return moment(pop, op, MomentWeight::gamma) / den;
}

/// Same estimator read on the transported state, where the scheme applies division.
inline double estimate_lambda_gamma(const Population& pop, const SplitStep& stepper)
{
    Population moved{pop.values, pop.time, pop.log_scale};
    stepper.transport(moved.values);
    return estimate_lambda_gamma(moved, stepper.op());
}

/// Mean of a per-row quantity over the recorded rows with time in [t/2, t].
template <class Get>
double window_mean(const Trajectory& traj, double t, Get get)
{
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& r : traj.rows) {
        if (r.t >= 0.5 * t - 1e-12 && r.t <= t + 1e-12) {
            acc += get(r);
            ++count;
        }
    }
    if (count == 0) {
        throw NumericalError("window_mean: no samples in [t/2, t]");
    }
    return acc / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Power iteration on the split-step map
// ---------------------------------------------------------------------------

enum class Direction { direct, adjoint };

struct PowerOptions {
    double tol = 1e-10;
    std::size_t max_iter = 1'000'000;
    std::size_t window = 100;
    /// Lazy shift: iterate (S + shift I). Removes the cyclic peripheral
    /// eigenvalues that appear when the fastest feature moves exactly one node
    /// per step.
    double shift = 1.0;
    std::optional<std::uint64_t> seed;  // random nonnegative start instead of the flat one
    std::optional<Field> start;
};

struct PowerResult {
    double lambda = 0.0;
    double growth_factor = 1.0;
    Field vector;
    double residual = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
    /// Spread of lambda over the last windows relative to its scale; large
    /// values flag a cyclic or otherwise non-settling iteration.
    double oscillation = 0.0;
};

/// Scale used to make lambda tolerances relative while staying meaningful at lambda = 0.
inline double lambda_scale(const SemiDiscreteOperator& op, double lambda)
{
    return std::max(std::abs(lambda), 1e-2 * op.max_speed());
}

namespace detail {

inline Field start_vector(const SplitStep& step, Direction which, const PowerOptions& opt)
{
    const Grid& grid = step.grid();
    Field v(step.op().features(), grid.size(), 1.0);
    if (opt.start) {
        v = *opt.start;
        step.op().check(v);
    } else if (opt.seed) {
        std::mt19937_64 rng(*opt.seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (double& x : v.flat()) {
            x = u(rng);
        }
    }
    if (which == Direction::direct) {
        // Nothing is born below half the division threshold.
        const double floor = 0.5 * step.model().division().threshold(grid);
        for (std::size_t i = 0; i < v.features(); ++i) {
            for (std::size_t m = 0; m < grid.size() && grid.node(m) < floor; ++m) {
                v(i, m) = 0.0;
            }
        }
    }
    return v;
}

} // namespace detail

/// Dominant eigenvalue and eigenvector of the split-step map S (direct) or of
/// its transpose for the quadrature inner product (adjoint).
///
/// Iterates y <- (S y + shift y) / (mu + shift) with sum w y = 1. Every
/// `window` iterations the growth factor mu = sum w S y and the residual
/// ||S y - mu y|| / (mu dt) (in units of lambda) are checked; the iteration
/// stops once both the change of lambda and the residual are below
/// tol * scale.
inline PowerResult power_iterate(const SplitStep& step, Direction which, const PowerOptions& opt = {})
{
    const Grid& grid = step.grid();
    const double dt = step.dt();
    PowerResult res;
    Field y = detail::start_vector(step, which, opt);
    for (double x : y.flat()) {
        if (x < 0.0) {
            throw ValidationError("power iteration: start vector must be nonnegative");
        }
    }
    double norm = total(grid, y);
    if (!(norm > 0.0)) {
        throw ValidationError("power iteration: start vector vanishes");
    }
    y *= 1.0 / norm;

    const auto apply = [&](Field& f) {
        if (which == Direction::direct) {
            step.apply_in_place(f);
        } else {
            step.apply_adjoint_in_place(f);
        }
    };

    Field z;
    double previous = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> history;
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        z = y;
        apply(z);
        const double mu = total(grid, z);
        if (!(mu > 0.0) || !std::isfinite(mu)) {
            throw NumericalError("power iteration: growth factor is not positive");
        }
        res.iterations = it;
        if (it % opt.window == 0 || it == opt.max_iter) {
            double r = 0.0;
            for (std::size_t i = 0; i < y.features(); ++i) {
                for (std::size_t m = 0; m < y.nodes(); ++m) {
                    r += grid.weight(m) * std::abs(z(i, m) - mu * y(i, m));
                }
            }
            const double lambda = std::log(mu) / dt;
            const double scale = lambda_scale(step.op(), lambda);
            res.lambda = lambda;
            res.growth_factor = mu;
            res.residual = r / (mu * dt);
            history.push_back(lambda);
            if (history.size() > 10) {
                history.erase(history.begin());
            }
            const double lo = *std::min_element(history.begin(), history.end());
            const double hi = *std::max_element(history.begin(), history.end());
            res.oscillation = (hi - lo) / scale;
            if (std::isfinite(previous) && std::abs(lambda - previous) <= opt.tol * scale
                && res.residual <= opt.tol * scale) {
                res.converged = true;
                res.vector = y;
                return res;
            }
            previous = lambda;
        }
        // y <- (z + shift y) / (mu + shift)
        const double inv = 1.0 / (mu + opt.shift);
        auto zs = z.flat();
        auto ys = y.flat();
        for (std::size_t q = 0; q < ys.size(); ++q) {
            ys[q] = (zs[q] + opt.shift * ys[q]) * inv;
        }
    }
    res.vector = y;
    return res;
}

struct EigenOptions {
    PowerOptions power;
    /// Allowed |lambda_direct - lambda_adjoint| in units of tol * scale.
    double agreement = 10.0;
};

/// Direct and adjoint solves with the normalizations sum w N = 1 and
/// sum w N phi = 1. Throws when both solves converge to different eigenvalues.
inline EigenPair solve_eigenproblem(const SplitStep& step, const EigenOptions& opt = {})
{
    const Grid& grid = step.grid();
    PowerResult direct = power_iterate(step, Direction::direct, opt.power);
    PowerOptions adj_opt = opt.power;
    adj_opt.start.reset();
    PowerResult adjoint = power_iterate(step, Direction::adjoint, adj_opt);

    EigenPair pair;
    pair.dt = step.dt();
    pair.lambda = direct.lambda;
    pair.lambda_adjoint = adjoint.lambda;
    pair.growth_factor = direct.growth_factor;
    pair.residual_direct = direct.residual;
    pair.residual_adjoint = adjoint.residual;
    pair.iterations_direct = direct.iterations;
    pair.iterations_adjoint = adjoint.iterations;
    pair.converged = direct.converged && adjoint.converged;
    pair.N = std::move(direct.vector);
    pair.phi = std::move(adjoint.vector);

    const double mass = total(grid, pair.N);
    pair.N *= 1.0 / mass;
    const double dual = inner(grid, pair.N, pair.phi);
    if (!(dual > 0.0)) {
        throw NumericalError("eigenproblem: direct and adjoint eigenvectors are orthogonal");
    }
    pair.phi *= 1.0 / dual;

    if (pair.converged) {
        const double scale = lambda_scale(step.op(), pair.lambda);
        if (std::abs(pair.lambda - pair.lambda_adjoint) > opt.agreement * opt.power.tol * scale) {
            throw NumericalError("eigenproblem: direct lambda " + std::to_string(pair.lambda)
                                 + " and adjoint lambda " + std::to_string(pair.lambda_adjoint) + " disagree");
        }
    }
    return pair;
}

} // namespace gfv
