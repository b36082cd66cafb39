#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "gfv/analytics.hpp"
#include "gfv/config.hpp"
#include "gfv/dynamics.hpp"
#include "gfv/entropy.hpp"
#include "gfv/spectral.hpp"

namespace gfv {

/// Linear growth tau = v x, beta = x^2, the given kernel and grid.
inline RunConfig standard_config(const std::string& kernel, std::vector<double> features, double p, GridConfig grid,
                                 double t_end)
{
    RunConfig cfg;
    cfg.preset = "custom";
    cfg.grid = grid;
    cfg.model.features = std::move(features);
    cfg.model.kernel.name = kernel;
    cfg.model.kernel.p = p;
    cfg.schedule.t_end = t_end;
    cfg.schedule.record_dt = 0.01;
    return cfg;
}

struct Estimates {
    double lambda_n = 0.0;
    double lambda_tau = 0.0;
    double lambda_gamma = 0.0;
};

/// lambda_n by regression over [t/2, t]; lambda_tau and lambda_gamma averaged
/// over the same window (both oscillate when the dynamics are periodic).
inline Estimates estimates_at(const Trajectory& traj, double t)
{
    return {estimate_lambda_n(traj, t), window_mean(traj, t, [](const DiagnosticRow& r) { return r.lambda_tau; }),
            window_mean(traj, t, [](const DiagnosticRow& r) { return r.lambda_gamma; })};
}

struct Table1Case {
    std::string name;
    std::string kernel;
    std::array<double, 3> reference;  // lambda_n, lambda_tau, lambda_gamma
};

inline std::vector<Table1Case> table1_cases()
{
    return {{"non-mixing", "reducible", {3.005, 3.000, 3.007}}, {"mixing", "irreducible", {1.469, 1.465, 1.470}}};
}

inline constexpr double table1_t_end = 40.0;

/// Density at the node nearest x = 1 summed over features.
inline std::vector<double> total_slice(const Trajectory& traj)
{
    return traj.column([](const DiagnosticRow& r) {
        double s = 0.0;
        for (double v : r.slices) s += v;
        return s;
    });
}

/// Largest Courant number of each feature.
inline std::vector<double> feature_courant(const SplitStep& step)
{
    std::vector<double> out(step.op().features(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t m = 0; m < step.grid().size(); ++m) {
            out[i] = std::max(out[i], step.courant(i, m));
        }
    }
    return out;
}

/// Summary of a two-feature run for the conjecture comparison. Behaviors are
/// read from the per-feature slices at x = 1 over the second half of the run.
inline ConjectureRun conjecture_run(const SplitStep& step, const Trajectory& traj, double t_end)
{
    ConjectureRun run;
    run.lambda = estimate_lambda_n(traj, t_end);
    run.final_shares = traj.rows.back().shares;
    run.courant = feature_courant(step);
    const auto times = traj.times();
    for (std::size_t i = 0; i < step.op().features(); ++i) {
        const auto xs = traj.column([i](const DiagnosticRow& r) { return r.slices[i]; });
        run.behaviors.push_back(detect_oscillation(times, xs, 0.5 * t_end));
    }
    return run;
}

struct ConjectureCase {
    std::string label;
    std::string kernel;
    double p;
};

/// Mutation-kernel experiments with v = (1, 2): fast-to-slow around the
/// threshold p0 +- 0.05, and the three panels slow-to-fast p = 0.5,
/// fast-to-slow p = 0.2 and p = 0.8.
inline std::vector<ConjectureCase> threshold_cases()
{
    const double p0 = critical_p0(1.0, 2.0);
    return {{"fast_to_slow_below_p0", "fast_to_slow", p0 - 0.05}, {"fast_to_slow_above_p0", "fast_to_slow", p0 + 0.05}};
}

inline std::vector<ConjectureCase> panel_cases()
{
    return {{"slow_to_fast_p0.5", "slow_to_fast", 0.5},
            {"fast_to_slow_p0.2", "fast_to_slow", 0.2},
            {"fast_to_slow_p0.8", "fast_to_slow", 0.8}};
}

inline constexpr double conjecture_t_end = 60.0;

} // namespace gfv
