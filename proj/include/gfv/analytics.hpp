#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gfv/entropy.hpp"
#include "gfv/errors.hpp"
#include "gfv/model.hpp"
#include "gfv/operator.hpp"
#include "gfv/spectral.hpp"

namespace gfv {

/// Malthus parameter of the single-feature death model with tau = tau0 x.
inline double lambda_with_death(double tau0, double p)
{
    if (!(tau0 > 0.0) || !std::isfinite(tau0)) {
        throw ValidationError("lambda_with_death: tau0 must be positive");
    }
    if (!(p > 0.0 && p <= 1.0)) {
        throw ValidationError("lambda_with_death: p must lie in (0, 1]");
    }
    return tau0 * (std::log2(p) + 1.0);
}

/// Proportion of fast daughters staying fast at which the fast line alone
/// grows exactly as fast as the slow one.
inline double critical_p0(double v1, double v2)
{
    if (!(v1 > 0.0) || !(v2 >= v1) || !std::isfinite(v2)) {
        throw ValidationError("critical_p0: need 0 < v1 <= v2");
    }
    return std::exp2(v1 / v2 - 1.0);
}

/// Growth rate of the fast subpopulation alone when a fraction p of its daughters stays fast.
inline double lambda_fast_subpop(double v2, double p)
{
    if (!(v2 > 0.0) || !std::isfinite(v2)) {
        throw ValidationError("lambda_fast_subpop: v2 must be positive");
    }
    if (!(p > 0.0 && p <= 1.0)) {
        throw ValidationError("lambda_fast_subpop: p must lie in (0, 1]");
    }
    return v2 * (std::log2(p) + 1.0);
}

// ---------------------------------------------------------------------------
// Monotonicity sandwich
// ---------------------------------------------------------------------------

struct SandwichReport {
    double lambda_slow = 0.0;
    double lambda = 0.0;
    double lambda_fast = 0.0;
    double epsilon = 0.0;
    bool holds = false;
};

/// Same growth and division laws restricted to one feature value, no variability.
inline Model frozen_model(const Model& model, std::size_t feature)
{
    if (model.growth().kind() == GrowthLaw::Kind::tabulated) {
        return Model(FeatureSet({model.features()[feature]}),
                     GrowthLaw::tabulated({model.growth().table().at(feature)}), model.division(),
                     Kernel(std::vector<std::vector<double>>{{1.0}}), model.death_factor());
    }
    return Model(FeatureSet({model.features()[feature]}), model.growth(), model.division(), Kernel(std::vector<std::vector<double>>{{1.0}}),
                 model.death_factor());
}

/// Solves the frozen slowest and fastest single-feature problems with the same
/// time step and checks lambda_slow - eps <= lambda <= lambda_fast + eps with
/// eps = 2 (tol + 0.01) * scale.
inline SandwichReport check_sandwich(const SplitStep& step, const EigenPair& eig, const EigenOptions& opt = {})
{
    const Model& model = step.model();
    if (model.feature_count() < 1) {
        throw ValidationError("sandwich: model has no features");
    }
    const auto solve_frozen = [&](std::size_t feature) {
        SplitStep frozen(SemiDiscreteOperator(step.grid(), frozen_model(model, feature)), step.dt());
        return power_iterate(frozen, Direction::direct, opt.power);
    };
    const PowerResult slow = solve_frozen(0);
    const PowerResult fast = solve_frozen(model.feature_count() - 1);
    if (!slow.converged || !fast.converged) {
        throw NumericalError("sandwich: frozen single-feature problem did not converge");
    }
    SandwichReport r;
    r.lambda_slow = slow.lambda;
    r.lambda_fast = fast.lambda;
    r.lambda = eig.lambda;
    r.epsilon = 2.0 * (opt.power.tol + 0.01) * lambda_scale(step.op(), eig.lambda);
    r.holds = r.lambda_slow - r.epsilon <= r.lambda && r.lambda <= r.lambda_fast + r.epsilon;
    return r;
}

// ---------------------------------------------------------------------------
// Duality residual
// ---------------------------------------------------------------------------

/// |<G n, phi> - g <n, phi>| / |g| for the step generator G = (S - I) / dt and
/// g = (mu - 1) / dt. When |g| is below the solver scale the residual is
/// reported in absolute terms.
inline double duality_residual(const SplitStep& step, const Field& n, const Field& phi, double growth_factor)
{
    const Grid& grid = step.grid();
    const double dt = step.dt();
    const Field sn = step.apply(n);
    const double lhs = (inner(grid, sn, phi) - inner(grid, n, phi)) / dt;
    const double g = (growth_factor - 1.0) / dt;
    const double diff = std::abs(lhs - g * inner(grid, n, phi));
    const double floor = 1e-2 * step.op().max_speed();
    return std::abs(g) >= floor ? diff / std::abs(g) : diff;
}

inline double duality_residual(const SplitStep& step, const EigenPair& eig)
{
    return duality_residual(step, eig.N, eig.phi, eig.growth_factor);
}

// ---------------------------------------------------------------------------
// Long-time behavior of the two-feature mutation kernels
// ---------------------------------------------------------------------------

enum class ComponentBehavior { zero, periodic };

inline const char* to_string(ComponentBehavior b)
{
    return b == ComponentBehavior::zero ? "zero" : "periodic";
}

enum class PredictedRate { v1, v2, fast_subpop };

struct ConjectureRow {
    KernelFamily family = KernelFamily::slow_to_fast;
    double p_low = 0.0;
    double p_high = 1.0;
    ComponentBehavior slow = ComponentBehavior::periodic;
    ComponentBehavior fast = ComponentBehavior::periodic;
    PredictedRate rate = PredictedRate::v2;

    double predicted_lambda(double v1, double v2, double p) const
    {
        switch (rate) {
        case PredictedRate::v1:
            return v1;
        case PredictedRate::v2:
            return v2;
        case PredictedRate::fast_subpop:
            return lambda_fast_subpop(v2, p);
        }
        return v2;
    }
};

/// Predicted rows for features v1 < v2. The fast-to-slow threshold is p0(v1, v2).
inline std::vector<ConjectureRow> conjecture_table(double v1, double v2)
{
    const double p0 = critical_p0(v1, v2);
    return {
        {KernelFamily::slow_to_fast, 0.0, 1.0, ComponentBehavior::zero, ComponentBehavior::periodic, PredictedRate::v2},
        {KernelFamily::fast_to_slow, 0.0, p0, ComponentBehavior::periodic, ComponentBehavior::zero, PredictedRate::v1},
        {KernelFamily::fast_to_slow, p0, 1.0, ComponentBehavior::periodic, ComponentBehavior::periodic,
         PredictedRate::fast_subpop},
    };
}

inline const ConjectureRow& conjecture_row(const std::vector<ConjectureRow>& table, KernelFamily family, double p)
{
    for (const auto& row : table) {
        if (row.family == family && p > row.p_low && p < row.p_high) {
            return row;
        }
    }
    throw ValidationError("conjecture: no prediction for this family and p (p must avoid the threshold itself)");
}

/// What a finished two-feature run showed.
struct ConjectureRun {
    double lambda = 0.0;
    std::vector<double> final_shares;       // per-feature fraction of the total number
    std::vector<BehaviorVerdict> behaviors;  // per-feature slice verdicts
    std::vector<double> courant;             // per-feature Courant number of the scheme
};

enum class ConjectureOutcome { agrees, disagrees, inconclusive };

inline const char* to_string(ConjectureOutcome o)
{
    switch (o) {
    case ConjectureOutcome::agrees:
        return "agrees";
    case ConjectureOutcome::disagrees:
        return "disagrees";
    case ConjectureOutcome::inconclusive:
        return "inconclusive";
    }
    return "inconclusive";
}

struct ConjectureComparison {
    ConjectureRow predicted;
    double predicted_lambda = 0.0;
    double measured_lambda = 0.0;
    double lambda_error = 0.0;  // relative
    std::vector<ComponentBehavior> measured;
    /// Features whose upwind step is diffusive (Courant number below 1); a
    /// converged verdict there may be numerical rather than genuine.
    std::vector<bool> diffusion_limited;
    ConjectureOutcome outcome = ConjectureOutcome::inconclusive;
};

inline constexpr double negligible_share = 1e-3;
inline constexpr double conjecture_lambda_tolerance = 0.02;

/// Compares a run with its row of the conjecture table. A component counts as
/// zero when its share of the population is below 1e-3; otherwise it is
/// expected to oscillate. An undecided oscillation verdict on a present
/// component makes the comparison inconclusive, as does a converged verdict on
/// a diffusion-limited component.
inline ConjectureComparison evaluate_conjecture(KernelFamily family, double p, double v1, double v2,
                                                const ConjectureRun& run)
{
    if (run.final_shares.size() != 2 || run.behaviors.size() != 2 || run.courant.size() != 2) {
        throw ValidationError("conjecture: runs must have exactly two features");
    }
    const auto table = conjecture_table(v1, v2);
    ConjectureComparison c;
    c.predicted = conjecture_row(table, family, p);
    c.predicted_lambda = c.predicted.predicted_lambda(v1, v2, p);
    c.measured_lambda = run.lambda;
    c.lambda_error = std::abs(run.lambda - c.predicted_lambda) / std::abs(c.predicted_lambda);

    bool inconclusive = false;
    bool matches = c.lambda_error <= conjecture_lambda_tolerance;
    const ComponentBehavior expected[2] = {c.predicted.slow, c.predicted.fast};
    for (std::size_t i = 0; i < 2; ++i) {
        c.diffusion_limited.push_back(run.courant[i] < 1.0 - 1e-12);
        ComponentBehavior got = ComponentBehavior::periodic;
        if (run.final_shares[i] < negligible_share) {
            got = ComponentBehavior::zero;
        } else {
            switch (run.behaviors[i].kind) {
            case BehaviorVerdict::Class::oscillating:
                break;
            case BehaviorVerdict::Class::undecided:
                inconclusive = true;
                break;
            case BehaviorVerdict::Class::converged:
                // Numerical diffusion damps the oscillation of slow features.
                if (c.diffusion_limited.back()) {
                    inconclusive = true;
                } else {
                    matches = false;
                }
                break;
            }
        }
        c.measured.push_back(got);
        if (got != expected[i]) {
            matches = false;
        }
    }
    if (!matches) {
        c.outcome = ConjectureOutcome::disagrees;
    } else {
        c.outcome = inconclusive ? ConjectureOutcome::inconclusive : ConjectureOutcome::agrees;
    }
    return c;
}

} // namespace gfv
