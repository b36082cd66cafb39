#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gfv/eigenpair.hpp"
#include "gfv/errors.hpp"
#include "gfv/field.hpp"
#include "gfv/operator.hpp"

namespace gfv {

/// Convex function H used in the general relative entropy.
struct EntropyFunction {
    enum class Kind { square, abs, clipped_square };
    Kind kind = Kind::square;
    double level = 0.0;  // C, for clipped_square

    static EntropyFunction square() { return {Kind::square, 0.0}; }
    static EntropyFunction absolute() { return {Kind::abs, 0.0}; }
    static EntropyFunction clipped_square(double level) { return {Kind::clipped_square, level}; }

    double operator()(double u) const noexcept
    {
        switch (kind) {
        case Kind::square:
            return u * u;
        case Kind::abs:
            return std::abs(u);
        case Kind::clipped_square: {
            const double e = std::max(std::abs(u) - level, 0.0);
            return e * e;
        }
        }
        return 0.0;
    }
};

/// Nodes where the profile vanishes may still carry denormal leftovers of n.
inline constexpr double support_floor = 1e-290;

namespace detail {

inline bool outside_support(double n, double profile, std::size_t i, std::size_t m)
{
    if (profile > 0.0) {
        return false;
    }
    if (std::abs(n) > support_floor) {
        throw ValidationError("entropy: n is nonzero outside the support of N (feature " + std::to_string(i)
                              + ", node " + std::to_string(m) + ")");
    }
    return true;
}

} // namespace detail

/// True when n vanishes (up to support_floor) wherever N does.
inline bool within_support(const Field& n, const EigenPair& pair)
{
    n.require_shape(pair.N);
    const auto ns = n.flat();
    const auto ps = pair.N.flat();
    for (std::size_t q = 0; q < ns.size(); ++q) {
        if (!(ps[q] > 0.0) && std::abs(ns[q]) > support_floor) {
            return false;
        }
    }
    return true;
}

namespace detail {

inline void require_support(const Field& n, const EigenPair& pair)
{
    if (!within_support(n, pair)) {
        throw ValidationError("entropy: n is nonzero outside the support of N");
    }
}

} // namespace detail

/// E^H[n | N] = sum w phi N H(n / N), with 0/0 := 0.
inline double gre(const Grid& grid, const Field& n, const EigenPair& pair, const EntropyFunction& H)
{
    n.require_shape(pair.N);
    double acc = 0.0;
    for (std::size_t i = 0; i < n.features(); ++i) {
        for (std::size_t m = 0; m < n.nodes(); ++m) {
            const double profile = pair.N(i, m);
            if (detail::outside_support(n(i, m), profile, i, m)) {
                continue;
            }
            acc += grid.weight(m) * pair.phi(i, m) * profile * H(n(i, m) / profile);
        }
    }
    return acc;
}

/// Fragmentation dissipation of the square entropy:
///   D = sum_{i,j,m} 2p w_{m+k} phi_i(x_m) K_ji gamma_j(x_{m+k}) N_j(x_{m+k}) [u_j(x_{m+k}) - u_i(x_m)]^2
/// with u = n / N. Away from the grid ends 2p w_{m+k} = 4p w_m.
inline double dissipation(const SemiDiscreteOperator& op, const Field& n, const EigenPair& pair)
{
    detail::require_support(n, pair);
    const Grid& grid = op.grid();
    const std::size_t k = grid.resolution();
    const auto& kernel = op.model().kernel();
    const double p2 = 2.0 * op.model().death_factor();
    const auto ratio = [&](std::size_t i, std::size_t m) {
        const double profile = pair.N(i, m);
        return detail::outside_support(n(i, m), profile, i, m) ? 0.0 : n(i, m) / profile;
    };
    double acc = 0.0;
    for (std::size_t m = 0; m + k < grid.size(); ++m) {
        for (std::size_t j = 0; j < n.features(); ++j) {
            const double source = op.division_rate(j, m + k) * pair.N(j, m + k);
            if (!(source > 0.0)) {
                continue;
            }
            const double uj = ratio(j, m + k);
            for (std::size_t i = 0; i < n.features(); ++i) {
                const double kij = kernel(j, i);
                if (!(kij > 0.0)) {
                    continue;
                }
                const double d = uj - ratio(i, m);
                acc += p2 * grid.weight(m + k) * pair.phi(i, m) * kij * source * d * d;
            }
        }
    }
    return acc;
}

/// Dissipation of the square entropy by one full split step, per unit time:
///   (E[n] - E[S n / mu]) / dt = sum_a w_a phi_a N_a Var_a(u) / dt,
/// where Var_a is the variance of u under the weights S_ab N_b / (mu N_a).
/// Unlike the fragmentation term alone, this includes the upwind transport
/// coupling between neighbouring nodes.
inline double step_dissipation(const SplitStep& step, const Field& n, const EigenPair& pair)
{
    detail::require_support(n, pair);
    const Grid& grid = step.grid();
    const SemiDiscreteOperator& op = step.op();
    const std::size_t k = grid.resolution();
    const std::size_t nodes = grid.size();
    const std::size_t features = n.features();
    const auto& kernel = step.model().kernel();
    const double p2 = 2.0 * step.model().death_factor();
    const double dt = step.dt();
    const auto ratio = [&](std::size_t i, std::size_t m) {
        const double profile = pair.N(i, m);
        return detail::outside_support(n(i, m), profile, i, m) ? 0.0 : n(i, m) / profile;
    };

    struct Entry {
        double weight;  // S_ab N_b
        double u;
    };
    std::vector<Entry> row;
    double acc = 0.0;
    for (std::size_t m = 0; m < nodes; ++m) {
        for (std::size_t i = 0; i < features; ++i) {
            row.clear();
            const double kept = 1.0 - step.divided(i, m);
            // transport row of (i, m), then kept fraction
            const auto push_transport = [&](std::size_t f, std::size_t node, double scale) {
                const double stay = 1.0 - step.courant(f, node);
                if (stay > 0.0 && pair.N(f, node) > 0.0) {
                    row.push_back({scale * stay * pair.N(f, node), ratio(f, node)});
                }
                if (node >= 1) {
                    const double in = step.courant(f, node - 1) * op.inflow_ratio(node);
                    if (in > 0.0 && pair.N(f, node - 1) > 0.0) {
                        row.push_back({scale * in * pair.N(f, node - 1), ratio(f, node - 1)});
                    }
                }
            };
            push_transport(i, m, kept);
            if (m + k < nodes) {
                for (std::size_t j = 0; j < features; ++j) {
                    const double g = p2 * op.gain_ratio(m) * kernel(j, i) * step.divided(j, m + k);
                    if (g > 0.0) {
                        push_transport(j, m + k, g);
                    }
                }
            }
            double mass = 0.0, mean = 0.0;
            for (const auto& e : row) {
                mass += e.weight;
                mean += e.weight * e.u;
            }
            if (!(mass > 0.0)) {
                continue;
            }
            mean /= mass;
            double var = 0.0;
            for (const auto& e : row) {
                var += e.weight * (e.u - mean) * (e.u - mean);
            }
            // sum_b S_ab N_b / mu = N_a at the eigenvector; use the row mass to stay exact in u.
            acc += grid.weight(m) * pair.phi(i, m) * var / pair.growth_factor;
        }
    }
    return acc / dt;
}

/// rho = sum w n_in phi, the conserved projection of the initial data.
inline double projection(const Grid& grid, const Field& n, const EigenPair& pair)
{
    return inner(grid, n, pair.phi);
}

/// sum_i int |n_i - rho N_i| phi_i
inline double l1_phi_distance(const Grid& grid, const Field& n, const EigenPair& pair, double rho)
{
    n.require_shape(pair.N);
    double acc = 0.0;
    for (std::size_t i = 0; i < n.features(); ++i) {
        for (std::size_t m = 0; m < n.nodes(); ++m) {
            acc += grid.weight(m) * std::abs(n(i, m) - rho * pair.N(i, m)) * pair.phi(i, m);
        }
    }
    return acc;
}

struct BehaviorVerdict {
    enum class Class { converged, oscillating, undecided };
    Class kind = Class::undecided;
    double period = std::numeric_limits<double>::quiet_NaN();
    double relative_amplitude = 0.0;
    double autocorrelation_peak = 0.0;
    std::optional<double> final_distance;
};

inline const char* to_string(BehaviorVerdict::Class c)
{
    switch (c) {
    case BehaviorVerdict::Class::converged:
        return "converged";
    case BehaviorVerdict::Class::oscillating:
        return "oscillating";
    case BehaviorVerdict::Class::undecided:
        return "undecided";
    }
    return "undecided";
}

struct OscillationThresholds {
    double min_peak = 0.5;             // secondary autocorrelation peak
    double oscillating_amplitude = 1e-2;
    double converged_amplitude = 1e-3;
    std::size_t min_samples = 16;
};

/// Classifies the trailing `window` of a uniformly sampled series.
///
/// Relative amplitude is half the peak-to-peak range over |mean|. The period
/// is the lag of the first autocorrelation maximum after the autocorrelation
/// first turns negative, refined by a parabola through the neighbouring lags.
inline BehaviorVerdict detect_oscillation(std::span<const double> times, std::span<const double> values, double window,
                                          const OscillationThresholds& thr = {})
{
    if (times.size() != values.size() || times.empty()) {
        throw ValidationError("oscillation: times and values must be non-empty and of equal length");
    }
    const double t_end = times.back();
    std::size_t first = times.size();
    while (first > 0 && times[first - 1] >= t_end - window - 1e-12) {
        --first;
    }
    const std::size_t n = times.size() - first;
    if (n < thr.min_samples) {
        throw ValidationError("oscillation: window holds " + std::to_string(n) + " samples, need at least "
                              + std::to_string(thr.min_samples));
    }
    const auto xs = values.subspan(first);
    const auto ts = times.subspan(first);
    const double spacing = (ts.back() - ts.front()) / static_cast<double>(n - 1);

    BehaviorVerdict verdict;
    double lo = xs[0], hi = xs[0], mean = 0.0;
    for (double v : xs) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        mean += v;
    }
    mean /= static_cast<double>(n);
    const double half_range = 0.5 * (hi - lo);
    if (half_range == 0.0) {
        verdict.relative_amplitude = 0.0;
    } else {
        verdict.relative_amplitude = mean == 0.0 ? std::numeric_limits<double>::infinity() : half_range / std::abs(mean);
    }
    if (verdict.relative_amplitude <= thr.converged_amplitude) {
        verdict.kind = BehaviorVerdict::Class::converged;
        return verdict;
    }

    // Linear detrend.
    double st = 0.0, sx = 0.0, stt = 0.0, stx = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
        const double t = static_cast<double>(q);
        st += t;
        sx += xs[q];
        stt += t * t;
        stx += t * xs[q];
    }
    const double dn = static_cast<double>(n);
    const double slope = (dn * stx - st * sx) / (dn * stt - st * st);
    const double icept = (sx - slope * st) / dn;
    std::vector<double> d(n);
    double energy = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
        d[q] = xs[q] - (icept + slope * static_cast<double>(q));
        energy += d[q] * d[q];
    }
    if (!(energy > 0.0)) {
        verdict.kind = BehaviorVerdict::Class::converged;
        return verdict;
    }
    energy /= dn;
    const std::size_t max_lag = n / 2;
    std::vector<double> acf(max_lag + 1, 0.0);
    for (std::size_t lag = 0; lag <= max_lag; ++lag) {
        double s = 0.0;
        for (std::size_t q = 0; q + lag < n; ++q) {
            s += d[q] * d[q + lag];
        }
        acf[lag] = s / static_cast<double>(n - lag) / energy;
    }
    std::size_t lag = 1;
    while (lag <= max_lag && acf[lag] >= 0.0) {
        ++lag;
    }
    std::size_t best = 0;
    for (; lag + 1 <= max_lag; ++lag) {
        if (acf[lag] >= acf[lag - 1] && acf[lag] >= acf[lag + 1]) {
            best = lag;
            break;
        }
    }
    if (best == 0) {
        return verdict;
    }
    verdict.autocorrelation_peak = acf[best];
    const double a = acf[best - 1], b = acf[best], c = acf[best + 1];
    const double curv = a - 2.0 * b + c;
    const double offset = curv != 0.0 ? 0.5 * (a - c) / curv : 0.0;
    verdict.period = (static_cast<double>(best) + std::clamp(offset, -0.5, 0.5)) * spacing;
    if (verdict.autocorrelation_peak >= thr.min_peak && verdict.relative_amplitude >= thr.oscillating_amplitude) {
        verdict.kind = BehaviorVerdict::Class::oscillating;
    }
    return verdict;
}

} // namespace gfv
