#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gfv/eigenpair.hpp"
#include "gfv/entropy.hpp"
#include "gfv/errors.hpp"
#include "gfv/field.hpp"
#include "gfv/operator.hpp"

namespace gfv {

/// Density per feature and node. The true density is values * exp(log_scale).
struct Population {
    Field values;
    double time = 0.0;
    double log_scale = 0.0;
};

struct InitialShape {
    double a = 30.0;
    double b_exp = 60.0;
};

/// n_in(v, x) = C x^a exp(-b x^2) on every feature, with total number 1.
inline Population initial_profile(const Grid& grid, std::size_t features, InitialShape shape)
{
    if (!(shape.a >= 0.0) || !(shape.b_exp > 0.0) || !std::isfinite(shape.a) || !std::isfinite(shape.b_exp)) {
        throw ValidationError("initial: need a >= 0 and b_exp > 0");
    }
    if (features == 0) {
        throw ValidationError("initial: at least one feature is required");
    }
    std::vector<double> logs(grid.size());
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < grid.size(); ++m) {
        const double x = grid.node(m);
        logs[m] = shape.a * std::log(x) - shape.b_exp * x * x;
        peak = std::max(peak, logs[m]);
    }
    Population pop{Field(features, grid.size()), 0.0, 0.0};
    for (std::size_t i = 0; i < features; ++i) {
        for (std::size_t m = 0; m < grid.size(); ++m) {
            pop.values(i, m) = std::exp(logs[m] - peak);
        }
    }
    const double mass = total(grid, pop.values);
    if (!(mass > 0.0) || !std::isfinite(mass)) {
        throw ValidationError("initial: profile vanishes on the grid");
    }
    pop.values *= 1.0 / mass;
    return pop;
}

/// Advances the population by one split step.
inline void step(Population& pop, const SplitStep& stepper)
{
    stepper.op().check(pop.values);
    stepper.apply_in_place(pop.values);
    pop.time += stepper.dt();
}

enum class MomentWeight { one, tau, gamma, power };

/// sum_i int weight * n_i. With true_scale the factored-out growth is restored.
inline double moment(const Population& pop, const SemiDiscreteOperator& op, MomentWeight weight, double alpha = 1.0,
                     bool true_scale = false)
{
    const Grid& grid = op.grid();
    const Model& model = op.model();
    double acc = 0.0;
    for (std::size_t i = 0; i < pop.values.features(); ++i) {
        for (std::size_t m = 0; m < grid.size(); ++m) {
            double f = 1.0;
            switch (weight) {
            case MomentWeight::one:
                break;
            case MomentWeight::tau:
                f = model.tau(grid, i, m);
                break;
            case MomentWeight::gamma:
                f = model.gamma_at(grid, i, m);
                break;
            case MomentWeight::power:
                f = std::pow(grid.node(m), alpha);
                break;
            }
            acc += grid.weight(m) * f * pop.values(i, m);
        }
    }
    return true_scale ? acc * std::exp(pop.log_scale) : acc;
}

struct Schedule {
    double t_end = 10.0;
    double record_dt = 0.05;
    std::vector<double> snapshot_times;
};

struct DiagnosticRow {
    double t = 0.0;
    double log_mass = 0.0;
    double lambda_n = std::numeric_limits<double>::quiet_NaN();
    double lambda_tau = std::numeric_limits<double>::quiet_NaN();
    double lambda_gamma = std::numeric_limits<double>::quiet_NaN();
    double entropy_sq = std::numeric_limits<double>::quiet_NaN();
    double dissipation_sq = std::numeric_limits<double>::quiet_NaN();
    double l1_phi = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> slices;   // density at x = 1 per feature, number-normalized
    std::vector<double> shares;   // fraction of the total number per feature
};

struct Snapshot {
    double t = 0.0;
    double log_scale = 0.0;
    Field density;
};

struct Trajectory {
    std::vector<DiagnosticRow> rows;
    std::vector<Snapshot> snapshots;
    double dt = 0.0;
    std::size_t slice_node = 0;
    Population final_state;

    std::vector<double> times() const
    {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r.t);
        return out;
    }
    template <class Get>
    std::vector<double> column(Get get) const
    {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(get(r));
        return out;
    }
};

/// Least-squares slope of log_mass against t over the rows with t in [t/2, t].
/// Returns nullopt with fewer than `min_samples` rows or a non-finite log mass.
inline std::optional<double> log_mass_slope(const std::vector<DiagnosticRow>& rows, double t,
                                            std::size_t min_samples = 10)
{
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    std::size_t count = 0;
    const double lo = 0.5 * t - 1e-12;
    for (const auto& r : rows) {
        if (r.t < lo || r.t > t + 1e-12) {
            continue;
        }
        if (!std::isfinite(r.log_mass)) {
            return std::nullopt;
        }
        st += r.t;
        sy += r.log_mass;
        stt += r.t * r.t;
        sty += r.t * r.log_mass;
        ++count;
    }
    if (count < min_samples || count < 2) {
        return std::nullopt;
    }
    const double n = static_cast<double>(count);
    const double den = n * stt - st * st;
    if (!(den > 0.0)) {
        return std::nullopt;
    }
    return (n * sty - st * sy) / den;
}

/// Runs the split scheme to t_end, renormalizing by the total number at every
/// record point. With an eigenpair the entropy columns are filled in the frame
/// n e^{-lambda t}.
inline Trajectory simulate(const SplitStep& stepper, const Schedule& schedule, Population state,
                           const EigenPair* eig = nullptr)
{
    if (!(schedule.t_end > 0.0)) {
        throw ValidationError("simulate: t_end must be positive");
    }
    if (!(schedule.record_dt > 0.0)) {
        throw ValidationError("simulate: record_dt must be positive");
    }
    const SemiDiscreteOperator& op = stepper.op();
    const Grid& grid = op.grid();
    op.check(state.values);
    const double dt = stepper.dt();
    const auto steps = static_cast<std::size_t>(std::ceil(schedule.t_end / dt - 1e-9));
    const auto stride = static_cast<std::size_t>(std::max<long long>(1, std::llround(schedule.record_dt / dt)));

    std::vector<double> snaps = schedule.snapshot_times;
    std::sort(snaps.begin(), snaps.end());
    std::size_t next_snap = 0;

    Trajectory traj;
    traj.dt = dt;
    traj.slice_node = grid.nearest(1.0);
    const double t0 = state.time;
    std::optional<double> rho;

    const auto record = [&] {
        const double number = total(grid, state.values);
        if (number < 0.0 || !std::isfinite(number)) {
            throw NumericalError("simulate: total number became invalid at t = " + std::to_string(state.time));
        }
        for (double v : state.values.flat()) {
            if (v < 0.0) {
                throw NumericalError("simulate: negative density at t = " + std::to_string(state.time));
            }
        }
        DiagnosticRow row;
        row.t = state.time;
        if (number > 0.0) {
            state.values *= 1.0 / number;
            state.log_scale += std::log(number);
            row.log_mass = state.log_scale;
            const double xm = moment(state, op, MomentWeight::power, 1.0);
            if (xm > 0.0) {
                row.lambda_tau = moment(state, op, MomentWeight::tau) / xm;
            }
            // Division acts on the transported state within a step, so the
            // division-rate estimator is read there.
            Field moved = state.values;
            stepper.transport(moved);
            const double moved_number = total(grid, moved);
            if (moved_number > 0.0) {
                row.lambda_gamma = moment(Population{std::move(moved), 0.0, 0.0}, op, MomentWeight::gamma) / moved_number;
            }
        } else {
            row.log_mass = -std::numeric_limits<double>::infinity();
        }
        row.slices.resize(state.values.features());
        row.shares.resize(state.values.features());
        for (std::size_t i = 0; i < state.values.features(); ++i) {
            row.slices[i] = state.values(i, traj.slice_node);
            row.shares[i] = number > 0.0 ? grid.integrate(state.values.feature(i)) : 0.0;
        }
        if (eig != nullptr && number > 0.0) {
            Field renorm = state.values;
            renorm *= std::exp(state.log_scale - eig->lambda * (state.time - t0));
            if (!rho) {
                rho = projection(grid, renorm, *eig);
            }
            if (within_support(renorm, *eig)) {
                row.entropy_sq = gre(grid, renorm, *eig, EntropyFunction::square());
                row.dissipation_sq = dissipation(op, renorm, *eig);
            }
            row.l1_phi = l1_phi_distance(grid, renorm, *eig, *rho);
        }
        traj.rows.push_back(std::move(row));
        if (state.time > 0.0) {
            if (auto slope = log_mass_slope(traj.rows, state.time)) {
                traj.rows.back().lambda_n = *slope;
            }
        }
    };

    const auto maybe_snapshot = [&] {
        while (next_snap < snaps.size() && state.time >= snaps[next_snap] - 0.5 * dt) {
            const double number = total(grid, state.values);
            Snapshot s{state.time, state.log_scale, state.values};
            if (number > 0.0) {
                s.density *= 1.0 / number;
                s.log_scale += std::log(number);
            }
            traj.snapshots.push_back(std::move(s));
            ++next_snap;
        }
    };

    record();
    maybe_snapshot();
    for (std::size_t s = 1; s <= steps; ++s) {
        stepper.apply_in_place(state.values);
        state.time = t0 + static_cast<double>(s) * dt;
        if (!state.values.all_finite()) {
            throw NumericalError("simulate: non-finite state at t = " + std::to_string(state.time));
        }
        if (s % stride == 0 || s == steps) {
            record();
        }
        maybe_snapshot();
    }
    traj.final_state = state;
    return traj;
}

} // namespace gfv
