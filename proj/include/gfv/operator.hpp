#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "gfv/errors.hpp"
#include "gfv/field.hpp"
#include "gfv/grid.hpp"
#include "gfv/model.hpp"

namespace gfv {

/// Largest problem for which dense matrices are exported.
inline constexpr std::size_t dense_export_limit = 4096;

/// Semi-discrete growth-fragmentation operator, dn/dt = A n.
///
/// Transport is first-order upwind in log-size on the geometric grid. Written
/// with the number per node q_m = w_m n_m it reads
///   dq_m/dt = (a_{m-1} q_{m-1} - a_m q_m) / h,   a = tau / x,  h = ln 2 / k,
/// with zero inflow at the bottom node and free outflow at the top node.
///
/// Fragmentation: node m divides at the rate gamma = beta tau and sends 2p
/// daughters per division to node m-k, distributed over features by the
/// kernel row. Daughters of nodes m < k would fall below the grid, so those
/// nodes do not divide. The factor w_{m+k}/w_m (= 2 away from the endpoints)
/// converts daughter counts back into density, which makes both the mass
/// balance and the number balance of fragmentation hold exactly.
class SemiDiscreteOperator {
public:
    SemiDiscreteOperator(Grid grid, Model model) : grid_(std::move(grid)), model_(std::move(model))
    {
        model_.validate(grid_);
        const std::size_t features = model_.feature_count();
        const std::size_t nodes = grid_.size();
        const std::size_t k = grid_.resolution();
        speed_ = Field(features, nodes);
        division_ = Field(features, nodes);
        for (std::size_t i = 0; i < features; ++i) {
            for (std::size_t m = 0; m < nodes; ++m) {
                speed_(i, m) = model_.tau(grid_, i, m) / grid_.node(m);
                division_(i, m) = m >= k ? model_.gamma_at(grid_, i, m) : 0.0;
            }
        }
        inflow_ratio_.assign(nodes, 0.0);
        for (std::size_t m = 1; m < nodes; ++m) {
            inflow_ratio_[m] = grid_.weight(m - 1) / grid_.weight(m);
        }
        gain_ratio_.assign(nodes, 0.0);
        for (std::size_t m = 0; m + k < nodes; ++m) {
            gain_ratio_[m] = grid_.weight(m + k) / grid_.weight(m);
        }
    }

    const Grid& grid() const noexcept { return grid_; }
    const Model& model() const noexcept { return model_; }
    std::size_t features() const noexcept { return model_.feature_count(); }
    std::size_t unknowns() const noexcept { return features() * grid_.size(); }

    /// Growth speed in log-size, tau / x.
    double speed(std::size_t i, std::size_t m) const noexcept { return speed_(i, m); }
    /// Division rate actually used by the discretization (0 on nodes m < k).
    double division_rate(std::size_t i, std::size_t m) const noexcept { return division_(i, m); }
    double inflow_ratio(std::size_t m) const noexcept { return inflow_ratio_[m]; }
    double gain_ratio(std::size_t m) const noexcept { return gain_ratio_[m]; }
    double max_speed() const noexcept
    {
        double v = 0.0;
        for (double s : speed_.flat()) {
            v = std::max(v, s);
        }
        return v;
    }

    Field zeros() const { return Field(features(), grid_.size()); }

    void apply_transport(const Field& n, Field& out) const
    {
        check(n);
        out = zeros();
        const double h = grid_.log_step();
        for (std::size_t i = 0; i < features(); ++i) {
            out(i, 0) = -speed_(i, 0) * n(i, 0) / h;
            for (std::size_t m = 1; m < grid_.size(); ++m) {
                out(i, m) = (speed_(i, m - 1) * inflow_ratio_[m] * n(i, m - 1) - speed_(i, m) * n(i, m)) / h;
            }
        }
    }

    void apply_fragmentation(const Field& n, Field& out) const
    {
        check(n);
        out = zeros();
        const std::size_t k = grid_.resolution();
        const double p2 = 2.0 * model_.death_factor();
        const auto& kernel = model_.kernel();
        for (std::size_t m = 0; m < grid_.size(); ++m) {
            for (std::size_t i = 0; i < features(); ++i) {
                double gain = 0.0;
                if (m + k < grid_.size()) {
                    for (std::size_t j = 0; j < features(); ++j) {
                        gain += kernel(j, i) * division_(j, m + k) * n(j, m + k);
                    }
                    gain *= p2 * gain_ratio_[m];
                }
                out(i, m) = gain - division_(i, m) * n(i, m);
            }
        }
    }

    Field apply(const Field& n) const
    {
        Field transport, fragmentation;
        apply_transport(n, transport);
        apply_fragmentation(n, fragmentation);
        return transport += fragmentation;
    }

    /// Transpose of apply with respect to the quadrature inner product.
    Field apply_adjoint(const Field& phi) const
    {
        check(phi);
        Field out = zeros();
        const double h = grid_.log_step();
        const std::size_t k = grid_.resolution();
        const double p2 = 2.0 * model_.death_factor();
        const auto& kernel = model_.kernel();
        const std::size_t top = grid_.last();
        for (std::size_t j = 0; j < features(); ++j) {
            for (std::size_t m = 0; m <= top; ++m) {
                const double ahead = m < top ? phi(j, m + 1) : 0.0;
                double value = speed_(j, m) * (ahead - phi(j, m)) / h - division_(j, m) * phi(j, m);
                if (m >= k) {
                    double mix = 0.0;
                    for (std::size_t i = 0; i < features(); ++i) {
                        mix += kernel(j, i) * phi(i, m - k);
                    }
                    value += p2 * division_(j, m) * mix;
                }
                out(j, m) = value;
            }
        }
        return out;
    }

    /// Number leaving through the top node per unit time.
    double number_outflux(const Field& n) const
    {
        const std::size_t top = grid_.last();
        double acc = 0.0;
        for (std::size_t i = 0; i < features(); ++i) {
            acc += speed_(i, top) * grid_.weight(top) * n(i, top);
        }
        return acc / grid_.log_step();
    }

    /// Mass (first moment) leaving through the top node per unit time.
    double mass_outflux(const Field& n) const
    {
        return number_outflux(n) * grid_.node(grid_.last()) * std::exp2(1.0 / static_cast<double>(grid_.resolution()));
    }

    /// Ratio (2^{1/k} - 1) / h by which the upwind transport overstates the
    /// first-moment growth: d/dt int x n = upwind_mass_factor * int tau n - outflux.
    double upwind_mass_factor() const noexcept
    {
        return std::expm1(grid_.log_step()) / grid_.log_step();
    }

    /// Row-major dense matrix of A (unknown index i * nodes + m).
    std::vector<double> dense() const
    {
        const std::size_t n = unknowns();
        if (n > dense_export_limit) {
            throw ValidationError("dense export is limited to " + std::to_string(dense_export_limit) + " unknowns");
        }
        std::vector<double> matrix(n * n, 0.0);
        Field basis = zeros();
        for (std::size_t col = 0; col < n; ++col) {
            basis.flat()[col] = 1.0;
            const Field column = apply(basis);
            basis.flat()[col] = 0.0;
            for (std::size_t row = 0; row < n; ++row) {
                matrix[row * n + col] = column.flat()[row];
            }
        }
        return matrix;
    }

    void check(const Field& n) const
    {
        if (n.features() != features() || n.nodes() != grid_.size()) {
            throw ValidationError("operator: state shape does not match the operator");
        }
        if (!n.all_finite()) {
            throw NumericalError("operator: non-finite input");
        }
    }

private:
    Grid grid_;
    Model model_;
    Field speed_;
    Field division_;
    std::vector<double> inflow_ratio_;
    std::vector<double> gain_ratio_;
};

/// Time step of the splitting scheme for which the fastest individuals move
/// exactly one node per step: h / max(tau / x). For linear growth this is
/// ln 2 / (k v_max).
inline double canonical_dt(const SemiDiscreteOperator& op)
{
    return op.grid().log_step() / op.max_speed();
}

/// One step of the splitting scheme: an upwind transport substep followed by
/// a fragmentation substep.
///
/// Transport: q_m <- (1 - c_m) q_m + c_{m-1} q_{m-1} on node numbers with
/// Courant numbers c = a dt / h. At the canonical time step the fastest feature
/// has c = 1 exactly and is shifted by one node with no numerical diffusion.
///
/// Fragmentation: explicit Euler per node. A fraction min(gamma dt, 1) of each
/// node divides during the step and its daughters are placed at the half-size
/// node; the rest is kept. The cap keeps the step positive where gamma dt > 1,
/// which only happens near the top of the grid where division is near-certain.
class SplitStep {
public:
    SplitStep(SemiDiscreteOperator op, double dt) : op_(std::move(op)), dt_(dt)
    {
        if (!(dt_ > 0.0) || !std::isfinite(dt_)) {
            throw ValidationError("step: dt must be positive and finite");
        }
        const double ref = canonical_dt(op_);
        const double ratio = dt_ / ref;
        const double vmax = op_.max_speed();
        const std::size_t features = op_.features();
        const std::size_t nodes = op_.grid().size();
        courant_ = Field(features, nodes);
        kept_ = Field(features, nodes);
        divided_ = Field(features, nodes);
        for (std::size_t i = 0; i < features; ++i) {
            for (std::size_t m = 0; m < nodes; ++m) {
                const double c = (op_.speed(i, m) / vmax) * ratio;
                if (c > 1.0 + 1e-12) {
                    throw CflViolation(i, m, c);
                }
                // tau / x rounds a ulp away from v; keep the exact shift.
                courant_(i, m) = std::abs(c - 1.0) <= 1e-12 ? 1.0 : c;
                const double g = op_.division_rate(i, m) * dt_;
                divided_(i, m) = std::min(g, 1.0);
                kept_(i, m) = 1.0 - divided_(i, m);
                max_division_dt_ = std::max(max_division_dt_, g);
            }
        }
    }

    explicit SplitStep(SemiDiscreteOperator op) : SplitStep(op, canonical_dt(op)) {}

    const SemiDiscreteOperator& op() const noexcept { return op_; }
    const Grid& grid() const noexcept { return op_.grid(); }
    const Model& model() const noexcept { return op_.model(); }
    double dt() const noexcept { return dt_; }
    double courant(std::size_t i, std::size_t m) const noexcept { return courant_(i, m); }
    /// Fraction of node (i, m) that divides during one step.
    double divided(std::size_t i, std::size_t m) const noexcept { return divided_(i, m); }
    /// Largest gamma * dt on the grid; above 1 an explicit Euler reaction step would lose positivity.
    double max_division_dt() const noexcept { return max_division_dt_; }

    void transport(Field& n) const
    {
        const std::size_t top = grid().last();
        for (std::size_t i = 0; i < n.features(); ++i) {
            auto row = n.feature(i);
            for (std::size_t m = top; m >= 1; --m) {
                const double stay = courant_(i, m) == 1.0 ? 0.0 : (1.0 - courant_(i, m)) * row[m];
                row[m] = stay + courant_(i, m - 1) * op_.inflow_ratio(m) * row[m - 1];
            }
            row[0] = courant_(i, 0) == 1.0 ? 0.0 : (1.0 - courant_(i, 0)) * row[0];
        }
    }

    void fragmentation(Field& n) const
    {
        const std::size_t nodes = grid().size();
        const std::size_t k = grid().resolution();
        const std::size_t features = n.features();
        const double p2 = 2.0 * model().death_factor();
        const auto& kernel = model().kernel();
        // Ascending sweep: node m reads node m + k, which is not yet updated.
        for (std::size_t m = 0; m < nodes; ++m) {
            for (std::size_t i = 0; i < features; ++i) {
                double gain = 0.0;
                if (m + k < nodes) {
                    for (std::size_t j = 0; j < features; ++j) {
                        gain += kernel(j, i) * divided_(j, m + k) * n(j, m + k);
                    }
                    gain *= p2 * op_.gain_ratio(m);
                }
                n(i, m) = kept_(i, m) * n(i, m) + gain;
            }
        }
    }

    void apply_in_place(Field& n) const
    {
        transport(n);
        fragmentation(n);
    }

    Field apply(Field n) const
    {
        op_.check(n);
        apply_in_place(n);
        return n;
    }

    /// Transpose of the step with respect to the quadrature inner product.
    void apply_adjoint_in_place(Field& phi) const
    {
        const std::size_t nodes = grid().size();
        const std::size_t k = grid().resolution();
        const std::size_t features = phi.features();
        const double p2 = 2.0 * model().death_factor();
        const auto& kernel = model().kernel();
        // Fragmentation adjoint, descending sweep: node m reads node m - k.
        for (std::size_t m = nodes; m-- > 0;) {
            for (std::size_t j = 0; j < features; ++j) {
                double mix = 0.0;
                if (m >= k) {
                    for (std::size_t i = 0; i < features; ++i) {
                        mix += kernel(j, i) * phi(i, m - k);
                    }
                }
                phi(j, m) = kept_(j, m) * phi(j, m) + p2 * divided_(j, m) * mix;
            }
        }
        // Transport adjoint, ascending sweep: node m reads node m + 1.
        const std::size_t top = grid().last();
        for (std::size_t j = 0; j < features; ++j) {
            auto row = phi.feature(j);
            for (std::size_t m = 0; m < top; ++m) {
                row[m] = (1.0 - courant_(j, m)) * row[m] + courant_(j, m) * row[m + 1];
            }
            row[top] = (1.0 - courant_(j, top)) * row[top];
        }
    }

    Field apply_adjoint(Field phi) const
    {
        op_.check(phi);
        apply_adjoint_in_place(phi);
        return phi;
    }

    /// Row-major dense matrix of the step map.
    std::vector<double> dense() const
    {
        const std::size_t n = op_.unknowns();
        if (n > dense_export_limit) {
            throw ValidationError("dense export is limited to " + std::to_string(dense_export_limit) + " unknowns");
        }
        std::vector<double> matrix(n * n, 0.0);
        Field basis = op_.zeros();
        for (std::size_t col = 0; col < n; ++col) {
            Field column = basis;
            column.flat()[col] = 1.0;
            apply_in_place(column);
            for (std::size_t row = 0; row < n; ++row) {
                matrix[row * n + col] = column.flat()[row];
            }
        }
        return matrix;
    }

private:
    SemiDiscreteOperator op_;
    double dt_;
    Field courant_;
    Field kept_;
    Field divided_;
    double max_division_dt_ = 0.0;
};

/// Text dump: first line "rows cols", then one row per line, 17 significant digits.
inline void write_dense(std::ostream& os, const std::vector<double>& matrix, std::size_t n)
{
    os << n << ' ' << n << '\n';
    char buf[40];
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", matrix[r * n + c]);
            os << (c ? " " : "") << buf;
        }
        os << '\n';
    }
}

} // namespace gfv
