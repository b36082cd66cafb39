#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "gfv/analytics.hpp"

using namespace gfv;

namespace {

using Matrix = std::vector<std::vector<double>>;

SplitStep make_step(const Grid& g, std::vector<double> v, Kernel k, double p = 1.0,
                    GrowthLaw growth = GrowthLaw::linear())
{
    return SplitStep(SemiDiscreteOperator(
        g, Model(FeatureSet(std::move(v)), std::move(growth), DivisionLaw::power(1.0, 2.0), std::move(k), p)));
}

BehaviorVerdict verdict(BehaviorVerdict::Class c)
{
    BehaviorVerdict v;
    v.kind = c;
    return v;
}

constexpr auto osc = BehaviorVerdict::Class::oscillating;
constexpr auto conv = BehaviorVerdict::Class::converged;
constexpr auto undec = BehaviorVerdict::Class::undecided;

} // namespace

TEST(ClosedForms, DeathModelRate)
{
    EXPECT_EQ(lambda_with_death(2.0, 0.5), 0.0);
    EXPECT_EQ(lambda_with_death(2.0, 1.0), 2.0);
    EXPECT_NEAR(lambda_with_death(1.0, 0.3), std::log2(0.3) + 1.0, 1e-15);
    double previous = -INFINITY;
    for (int q = 1; q <= 20; ++q) {
        const double p = q / 20.0;
        const double l = lambda_with_death(1.5, p);
        EXPECT_GT(l, previous);
        EXPECT_EQ(l < 0.0, q < 10);
        previous = l;
    }
    EXPECT_THROW(lambda_with_death(1.0, 0.0), ValidationError);
    EXPECT_THROW(lambda_with_death(1.0, 1.1), ValidationError);
    EXPECT_THROW(lambda_with_death(-1.0, 0.5), ValidationError);
}

TEST(ClosedForms, CriticalProportion)
{
    EXPECT_NEAR(critical_p0(1.0, 2.0), std::sqrt(0.5), 1e-15);
    EXPECT_NEAR(critical_p0(1.0, 2.0), 0.7071, 1e-4);
    EXPECT_EQ(critical_p0(2.0, 2.0), 1.0);
    for (const auto& [v1, v2] : std::vector<std::pair<double, double>>{{1, 2}, {1, 3}, {0.4, 5}, {2.5, 2.6}}) {
        EXPECT_NEAR(lambda_fast_subpop(v2, critical_p0(v1, v2)), v1, 4e-16 * v2);
    }
    EXPECT_NEAR(lambda_fast_subpop(2.0, 0.8), 1.356, 1e-3);
    EXPECT_THROW(critical_p0(2.0, 1.0), ValidationError);
    EXPECT_THROW(lambda_fast_subpop(2.0, 0.0), ValidationError);
}

TEST(ConjectureTable, Rows)
{
    const auto table = conjecture_table(1.0, 2.0);
    ASSERT_EQ(table.size(), 3u);
    const double p0 = critical_p0(1.0, 2.0);

    const auto& stf = conjecture_row(table, KernelFamily::slow_to_fast, 0.5);
    EXPECT_EQ(stf.slow, ComponentBehavior::zero);
    EXPECT_EQ(stf.fast, ComponentBehavior::periodic);
    EXPECT_EQ(stf.predicted_lambda(1.0, 2.0, 0.5), 2.0);

    const auto& low = conjecture_row(table, KernelFamily::fast_to_slow, 0.2);
    EXPECT_EQ(low.slow, ComponentBehavior::periodic);
    EXPECT_EQ(low.fast, ComponentBehavior::zero);
    EXPECT_EQ(low.p_high, p0);
    EXPECT_EQ(low.predicted_lambda(1.0, 2.0, 0.2), 1.0);

    const auto& high = conjecture_row(table, KernelFamily::fast_to_slow, 0.8);
    EXPECT_EQ(high.slow, ComponentBehavior::periodic);
    EXPECT_EQ(high.fast, ComponentBehavior::periodic);
    EXPECT_EQ(high.p_low, p0);
    EXPECT_NEAR(high.predicted_lambda(1.0, 2.0, 0.8), 2.0 * (std::log2(0.8) + 1.0), 1e-15);

    EXPECT_THROW(conjecture_row(table, KernelFamily::fast_to_slow, p0), ValidationError);
    EXPECT_THROW(conjecture_row(table, KernelFamily::irreducible, 0.5), ValidationError);
}

TEST(ConjectureComparison, Outcomes)
{
    ConjectureRun run;
    run.courant = {0.5, 1.0};

    // Slow-to-fast: slow share vanishes, fast oscillates at rate v2.
    run.lambda = 2.001;
    run.final_shares = {1e-40, 1.0};
    run.behaviors = {verdict(undec), verdict(osc)};
    auto c = evaluate_conjecture(KernelFamily::slow_to_fast, 0.5, 1.0, 2.0, run);
    EXPECT_EQ(c.outcome, ConjectureOutcome::agrees);
    EXPECT_EQ(c.measured[0], ComponentBehavior::zero);
    EXPECT_TRUE(c.diffusion_limited[0]);
    EXPECT_FALSE(c.diffusion_limited[1]);

    // Wrong rate.
    run.lambda = 1.9;
    EXPECT_EQ(evaluate_conjecture(KernelFamily::slow_to_fast, 0.5, 1.0, 2.0, run).outcome, ConjectureOutcome::disagrees);

    // A present slow component contradicts the prediction.
    run.lambda = 2.0;
    run.final_shares = {0.2, 0.8};
    run.behaviors = {verdict(osc), verdict(osc)};
    EXPECT_EQ(evaluate_conjecture(KernelFamily::slow_to_fast, 0.5, 1.0, 2.0, run).outcome, ConjectureOutcome::disagrees);

    // Fast-to-slow above p0: both periodic; a converged verdict on the diffusive slow feature is inconclusive.
    const double p = 0.8, expected = lambda_fast_subpop(2.0, p);
    run.lambda = expected;
    run.final_shares = {0.3, 0.7};
    run.behaviors = {verdict(conv), verdict(osc)};
    EXPECT_EQ(evaluate_conjecture(KernelFamily::fast_to_slow, p, 1.0, 2.0, run).outcome, ConjectureOutcome::inconclusive);
    run.behaviors = {verdict(osc), verdict(osc)};
    EXPECT_EQ(evaluate_conjecture(KernelFamily::fast_to_slow, p, 1.0, 2.0, run).outcome, ConjectureOutcome::agrees);
    // Converged on an exactly transported feature is a genuine contradiction.
    run.behaviors = {verdict(osc), verdict(conv)};
    EXPECT_EQ(evaluate_conjecture(KernelFamily::fast_to_slow, p, 1.0, 2.0, run).outcome, ConjectureOutcome::disagrees);
    run.behaviors = {verdict(osc), verdict(undec)};
    EXPECT_EQ(evaluate_conjecture(KernelFamily::fast_to_slow, p, 1.0, 2.0, run).outcome, ConjectureOutcome::inconclusive);

    // The share threshold is 1e-3.
    run.lambda = 1.0;
    run.behaviors = {verdict(osc), verdict(undec)};
    run.final_shares = {1.0 - 9e-4, 9e-4};
    EXPECT_EQ(evaluate_conjecture(KernelFamily::fast_to_slow, 0.2, 1.0, 2.0, run).outcome, ConjectureOutcome::agrees);
    run.final_shares = {1.0 - 2e-3, 2e-3};
    EXPECT_NE(evaluate_conjecture(KernelFamily::fast_to_slow, 0.2, 1.0, 2.0, run).outcome, ConjectureOutcome::agrees);

    run.final_shares = {1.0};
    EXPECT_THROW(evaluate_conjecture(KernelFamily::fast_to_slow, 0.2, 1.0, 2.0, run), ValidationError);
}

TEST(DeathModel, EigenvalueMatchesClosedForm)
{
    const Grid g(150, 50);
    for (double p : {0.3, 0.5, 0.7, 0.9, 1.0}) {
        const auto step = make_step(g, {1.5}, Kernel(Matrix{{1.0}}), p);
        const EigenPair pair = solve_eigenproblem(step);
        ASSERT_TRUE(pair.converged) << p;
        const double expected = lambda_with_death(1.5, p);
        if (expected == 0.0) {
            EXPECT_NEAR(pair.lambda, 0.0, 0.02 * 1.5);
        } else {
            EXPECT_NEAR(pair.lambda, expected, 0.02 * std::abs(expected)) << p;
        }
    }
}

TEST(Sandwich, FrozenModels)
{
    const Model m(FeatureSet({1, 2, 3}), GrowthLaw::linear(), DivisionLaw::power(1.0, 2.0),
                  build_named_kernel(KernelFamily::irreducible, 3), 0.9);
    const Model fast = frozen_model(m, 2);
    EXPECT_EQ(fast.feature_count(), 1u);
    EXPECT_EQ(fast.features()[0], 3.0);
    EXPECT_EQ(fast.death_factor(), 0.9);
    const Grid g(10, 5);
    EXPECT_EQ(fast.tau(g, 0, 10), 3.0);
}

TEST(Sandwich, HoldsOnModelSuite)
{
    const Grid g(100, 25);
    std::vector<SplitStep> suite;
    suite.push_back(make_step(g, {1, 2}, build_named_kernel(KernelFamily::irreducible, 2)));
    suite.push_back(make_step(g, {1, 2, 3}, build_named_kernel(KernelFamily::irreducible, 3)));
    suite.push_back(make_step(g, {1, 2, 3}, build_named_kernel(KernelFamily::homogeneous, 3), 0.8));
    suite.push_back(make_step(g, {0.5, 1, 4}, Kernel(Matrix{{0.1, 0.8, 0.1}, {0.3, 0.3, 0.4}, {0.5, 0.0, 0.5}})));
    suite.push_back(make_step(g, {1, 1.2, 1.4, 1.6}, build_named_kernel(KernelFamily::homogeneous, 4)));
    suite.push_back(make_step(g, {1, 2}, Kernel(Matrix{{0.9, 0.1}, {0.1, 0.9}}), 1.0, GrowthLaw::power(1.5)));
    for (const auto& step : suite) {
        const EigenPair pair = solve_eigenproblem(step);
        ASSERT_TRUE(pair.converged);
        const SandwichReport r = check_sandwich(step, pair);
        EXPECT_TRUE(r.holds) << r.lambda_slow << " <= " << r.lambda << " <= " << r.lambda_fast << " (eps " << r.epsilon
                             << ")";
        EXPECT_LT(r.lambda_slow, r.lambda_fast);
    }
}

TEST(Duality, ResidualSmallAtEigenpairOnly)
{
    const Grid g(80, 20);
    const auto step = make_step(g, {1, 2, 3}, build_named_kernel(KernelFamily::irreducible, 3), 0.9);
    const EigenPair pair = solve_eigenproblem(step);
    ASSERT_TRUE(pair.converged);
    EXPECT_LE(duality_residual(step, pair), 1e-8);

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Field n = step.op().zeros(), phi = step.op().zeros();
    for (double& x : n.flat()) x = u(rng);
    for (double& x : phi.flat()) x = u(rng);
    EXPECT_GT(duality_residual(step, n, phi, pair.growth_factor), 1e-2);
}
