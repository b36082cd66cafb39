#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gfv/errors.hpp"
#include "gfv/grid.hpp"

namespace gfv {

/// Growth-rate traits v_1 < ... < v_M.
class FeatureSet {
public:
    explicit FeatureSet(std::vector<double> values) : values_(std::move(values))
    {
        if (values_.empty()) {
            throw ValidationError("features: at least one feature is required");
        }
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!(values_[i] > 0.0) || !std::isfinite(values_[i])) {
                throw ValidationError("features: value " + std::to_string(i) + " must be positive and finite");
            }
            if (i > 0 && !(values_[i] > values_[i - 1])) {
                throw ValidationError("features: values must be strictly increasing");
            }
        }
    }

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_.at(i); }
    const std::vector<double>& values() const noexcept { return values_; }
    double min() const noexcept { return values_.front(); }
    double max() const noexcept { return values_.back(); }

private:
    std::vector<double> values_;
};

/// Individual growth speed tau(v, x).
class GrowthLaw {
public:
    enum class Kind { linear, power, tabulated };

    static GrowthLaw linear() { return GrowthLaw(Kind::linear, 1.0, {}); }
    static GrowthLaw power(double exponent)
    {
        if (!std::isfinite(exponent)) {
            throw ValidationError("growth: exponent must be finite");
        }
        return GrowthLaw(Kind::power, exponent, {});
    }
    /// table[i][m] = tau(v_i, x_m) on a specific grid.
    static GrowthLaw tabulated(std::vector<std::vector<double>> table)
    {
        return GrowthLaw(Kind::tabulated, 1.0, std::move(table));
    }

    Kind kind() const noexcept { return kind_; }
    double exponent() const noexcept { return exponent_; }
    const std::vector<std::vector<double>>& table() const noexcept { return table_; }

    double operator()(std::size_t feature, double v, std::size_t node, double x) const
    {
        switch (kind_) {
        case Kind::linear:
            return v * x;
        case Kind::power:
            return v * std::pow(x, exponent_);
        case Kind::tabulated:
            return table_.at(feature).at(node);
        }
        return 0.0;
    }

    /// Same law, evaluated off-grid (tabulated laws cannot be).
    std::optional<double> at_size(double v, double x) const
    {
        switch (kind_) {
        case Kind::linear:
            return v * x;
        case Kind::power:
            return v * std::pow(x, exponent_);
        case Kind::tabulated:
            return std::nullopt;
        }
        return std::nullopt;
    }

private:
    GrowthLaw(Kind kind, double exponent, std::vector<std::vector<double>> table)
        : kind_(kind), exponent_(exponent), table_(std::move(table))
    {
    }

    Kind kind_;
    double exponent_;
    std::vector<std::vector<double>> table_;
};

/// Division rate per unit of size beta(x).
class DivisionLaw {
public:
    enum class Kind { power, power_cutoff, tabulated };

    static DivisionLaw power(double coefficient, double exponent)
    {
        check(coefficient, exponent);
        return DivisionLaw(Kind::power, coefficient, exponent, 0.0, {});
    }
    static DivisionLaw power_cutoff(double coefficient, double exponent, double threshold)
    {
        check(coefficient, exponent);
        if (!(threshold >= 0.0) || !std::isfinite(threshold)) {
            throw ValidationError("division: threshold must be finite and >= 0");
        }
        return DivisionLaw(Kind::power_cutoff, coefficient, exponent, threshold, {});
    }
    static DivisionLaw tabulated(std::vector<double> table)
    {
        for (double b : table) {
            if (!(b >= 0.0) || !std::isfinite(b)) {
                throw ValidationError("division: tabulated values must be finite and >= 0");
            }
        }
        return DivisionLaw(Kind::tabulated, 1.0, 0.0, 0.0, std::move(table));
    }

    Kind kind() const noexcept { return kind_; }
    double coefficient() const noexcept { return coefficient_; }
    double exponent() const noexcept { return exponent_; }
    const std::vector<double>& table() const noexcept { return table_; }

    /// Support threshold b: beta vanishes on [0, b). For tables, the first node with beta > 0.
    double threshold(const Grid& grid) const
    {
        if (kind_ != Kind::tabulated) {
            return threshold_;
        }
        for (std::size_t m = 0; m < table_.size(); ++m) {
            if (table_[m] > 0.0) {
                return m == 0 ? 0.0 : grid.node(m);
            }
        }
        return grid.node(grid.last()) * 2.0;
    }

    double operator()(std::size_t node, double x) const
    {
        switch (kind_) {
        case Kind::power:
            return coefficient_ * std::pow(x, exponent_);
        case Kind::power_cutoff:
            return x >= threshold_ ? coefficient_ * std::pow(x, exponent_) : 0.0;
        case Kind::tabulated:
            return table_.at(node);
        }
        return 0.0;
    }

private:
    DivisionLaw(Kind kind, double coefficient, double exponent, double threshold, std::vector<double> table)
        : kind_(kind), coefficient_(coefficient), exponent_(exponent), threshold_(threshold),
          table_(std::move(table))
    {
    }

    static void check(double coefficient, double exponent)
    {
        if (!(coefficient >= 0.0) || !std::isfinite(coefficient) || !std::isfinite(exponent)) {
            throw ValidationError("division: coefficient must be finite and >= 0, exponent finite");
        }
    }

    Kind kind_;
    double coefficient_;
    double exponent_;
    double threshold_;
    std::vector<double> table_;
};

/// Row-stochastic variability kernel: entry (i, j) is the probability that a
/// daughter of a feature-i mother has feature j.
class Kernel {
public:
    static constexpr double row_sum_tolerance = 1e-12;

    explicit Kernel(std::vector<std::vector<double>> rows) : rows_(std::move(rows))
    {
        if (rows_.empty()) {
            throw ValidationError("kernel: empty matrix");
        }
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            if (rows_[i].size() != rows_.size()) {
                throw ValidationError("kernel: matrix must be square (row " + std::to_string(i) + " has "
                                      + std::to_string(rows_[i].size()) + " entries, expected "
                                      + std::to_string(rows_.size()) + ")");
            }
            for (double e : rows_[i]) {
                if (!(e >= 0.0) || !std::isfinite(e)) {
                    throw ValidationError("kernel: entries must be finite and >= 0 (row " + std::to_string(i) + ")");
                }
            }
        }
    }

    std::size_t size() const noexcept { return rows_.size(); }
    double operator()(std::size_t i, std::size_t j) const { return rows_.at(i).at(j); }
    const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }

    double max_row_deviation() const noexcept
    {
        double worst = 0.0;
        for (const auto& row : rows_) {
            double s = 0.0;
            for (double e : row) {
                s += e;
            }
            worst = std::max(worst, std::abs(s - 1.0));
        }
        return worst;
    }

    bool stochastic() const noexcept { return max_row_deviation() <= row_sum_tolerance; }

private:
    std::vector<std::vector<double>> rows_;
};

enum class KernelFamily { reducible, irreducible, homogeneous, slow_to_fast, fast_to_slow };

/// Kernels used in the numerical experiments.
inline Kernel build_named_kernel(KernelFamily family, std::size_t features, double p = 0.5)
{
    const auto check_p = [&] {
        if (!(p > 0.0 && p < 1.0)) {
            throw ValidationError("kernel: p must lie in (0, 1), got " + std::to_string(p));
        }
        if (features != 2) {
            throw ValidationError("kernel: slow_to_fast / fast_to_slow are defined for 2 features");
        }
    };
    if (features == 0) {
        throw ValidationError("kernel: at least one feature is required");
    }
    switch (family) {
    case KernelFamily::reducible: {
        std::vector<std::vector<double>> id(features, std::vector<double>(features, 0.0));
        for (std::size_t i = 0; i < features; ++i) {
            id[i][i] = 1.0;
        }
        return Kernel(std::move(id));
    }
    case KernelFamily::irreducible:
        if (features == 2) {
            return Kernel({{0.0, 1.0}, {1.0, 0.0}});
        }
        if (features == 3) {
            return Kernel({{0.7, 0.2, 0.1}, {0.5, 0.4, 0.1}, {0.3, 0.3, 0.4}});
        }
        throw ValidationError("kernel: named 'irreducible' kernel exists for 2 or 3 features");
    case KernelFamily::homogeneous:
        return Kernel(std::vector<std::vector<double>>(features, std::vector<double>(features, 1.0 / features)));
    case KernelFamily::slow_to_fast:
        check_p();
        return Kernel({{p, 1.0 - p}, {0.0, 1.0}});
    case KernelFamily::fast_to_slow:
        check_p();
        return Kernel({{1.0, 0.0}, {1.0 - p, p}});
    }
    throw ValidationError("kernel: unknown family");
}

inline std::optional<KernelFamily> parse_kernel_family(const std::string& name)
{
    if (name == "reducible") return KernelFamily::reducible;
    if (name == "irreducible") return KernelFamily::irreducible;
    if (name == "homogeneous") return KernelFamily::homogeneous;
    if (name == "slow_to_fast") return KernelFamily::slow_to_fast;
    if (name == "fast_to_slow") return KernelFamily::fast_to_slow;
    return std::nullopt;
}

/// Strongly connected components of the graph with an edge i -> j iff K_ij > 0.
/// Returns component id per vertex; ids are assigned in Tarjan completion order.
inline std::vector<std::size_t> strongly_connected_components(const Kernel& kernel, std::size_t& count)
{
    const std::size_t n = kernel.size();
    constexpr std::size_t unvisited = static_cast<std::size_t>(-1);
    std::vector<std::size_t> index(n, unvisited), low(n, 0), comp(n, unvisited);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::size_t next = 0;
    count = 0;

    // Iterative Tarjan: frames hold (vertex, next successor to visit).
    std::vector<std::pair<std::size_t, std::size_t>> frames;
    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != unvisited) {
            continue;
        }
        frames.emplace_back(root, 0);
        index[root] = low[root] = next++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!frames.empty()) {
            auto& [v, succ] = frames.back();
            if (succ < n) {
                const std::size_t w = succ++;
                if (!(kernel(v, w) > 0.0)) {
                    continue;
                }
                if (index[w] == unvisited) {
                    index[w] = low[w] = next++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    frames.emplace_back(w, 0);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            const std::size_t done = v;
            frames.pop_back();
            if (!frames.empty()) {
                const std::size_t parent = frames.back().first;
                low[parent] = std::min(low[parent], low[done]);
            }
            if (low[done] == index[done]) {
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp[w] = count;
                } while (w != done);
                ++count;
            }
        }
    }
    return comp;
}

struct KernelReport {
    bool stochastic = false;
    bool irreducible = false;
    std::size_t scc_count = 0;
    std::vector<std::size_t> scc_membership;
    bool heterogeneity_ok = false;
    double max_row_deviation = 0.0;
    std::vector<std::string> warnings;
};

/// Full growth-fragmentation model. gamma is never supplied directly: it is
/// always beta(x) * tau(v, x).
class Model {
public:
    Model(FeatureSet features, GrowthLaw growth, DivisionLaw division, Kernel kernel, double death_factor = 1.0)
        : features_(std::move(features)), growth_(std::move(growth)), division_(std::move(division)),
          kernel_(std::move(kernel)), death_factor_(death_factor)
    {
        if (kernel_.size() != features_.size()) {
            throw ValidationError("model: kernel is " + std::to_string(kernel_.size()) + "x"
                                  + std::to_string(kernel_.size()) + " but there are "
                                  + std::to_string(features_.size()) + " features");
        }
        if (!kernel_.stochastic()) {
            throw ValidationError("model: kernel rows must sum to 1 (max deviation "
                                  + std::to_string(kernel_.max_row_deviation()) + ")");
        }
        if (!(death_factor_ > 0.0 && death_factor_ <= 1.0)) {
            throw ValidationError("model: death factor must lie in (0, 1], got " + std::to_string(death_factor_));
        }
    }

    const FeatureSet& features() const noexcept { return features_; }
    const GrowthLaw& growth() const noexcept { return growth_; }
    const DivisionLaw& division() const noexcept { return division_; }
    const Kernel& kernel() const noexcept { return kernel_; }
    double death_factor() const noexcept { return death_factor_; }
    std::size_t feature_count() const noexcept { return features_.size(); }

    double tau(const Grid& grid, std::size_t i, std::size_t m) const
    {
        return growth_(i, features_[i], m, grid.node(m));
    }
    double beta(const Grid& grid, std::size_t m) const { return division_(m, grid.node(m)); }
    double gamma_at(const Grid& grid, std::size_t i, std::size_t m) const
    {
        return beta(grid, m) * tau(grid, i, m);
    }

    /// Checks the discrete coefficient hypotheses on the grid; throws on hard
    /// failures and returns soft warnings.
    std::vector<std::string> validate(const Grid& grid) const
    {
        std::vector<std::string> warnings;
        if (growth_.kind() == GrowthLaw::Kind::tabulated) {
            const auto& t = growth_.table();
            if (t.size() != feature_count()) {
                throw ValidationError("growth: tabulated law needs one row per feature");
            }
            for (const auto& row : t) {
                if (row.size() != grid.size()) {
                    throw ValidationError("growth: tabulated row length does not match the grid");
                }
            }
        }
        if (division_.kind() == DivisionLaw::Kind::tabulated && division_.table().size() != grid.size()) {
            throw ValidationError("division: tabulated length does not match the grid");
        }
        for (std::size_t i = 0; i < feature_count(); ++i) {
            for (std::size_t m = 0; m < grid.size(); ++m) {
                const double t = tau(grid, i, m);
                if (!(t > 0.0) || !std::isfinite(t)) {
                    throw ValidationError("growth: tau must be positive and finite (feature " + std::to_string(i)
                                          + ", node " + std::to_string(m) + ")");
                }
            }
        }
        for (std::size_t m = 0; m < grid.size(); ++m) {
            const double b = beta(grid, m);
            if (!(b >= 0.0) || !std::isfinite(b)) {
                throw ValidationError("division: beta must be finite and >= 0 (node " + std::to_string(m) + ")");
            }
        }
        const double top = grid.node(grid.last());
        if (beta(grid, grid.last()) * top < 10.0) {
            warnings.emplace_back("division: beta(x_max) * x_max = " + std::to_string(beta(grid, grid.last()) * top)
                                  + " is small; cells may leave the grid before dividing");
        }
        return warnings;
    }

private:
    FeatureSet features_;
    GrowthLaw growth_;
    DivisionLaw division_;
    Kernel kernel_;
    double death_factor_;
};

/// Stochasticity, irreducibility (via SCCs) and a node-sampled heterogeneity
/// check 2 tau(v_j, x) != tau(v_i, 2x) for every transition i -> j, i != j.
inline KernelReport validate_kernel(const Kernel& kernel, const Model& model, const Grid& grid)
{
    if (kernel.size() != model.feature_count()) {
        throw ValidationError("kernel: dimension " + std::to_string(kernel.size()) + " does not match "
                              + std::to_string(model.feature_count()) + " features");
    }
    KernelReport report;
    report.max_row_deviation = kernel.max_row_deviation();
    report.stochastic = report.max_row_deviation <= Kernel::row_sum_tolerance;
    report.scc_membership = strongly_connected_components(kernel, report.scc_count);
    report.irreducible = report.scc_count == 1;
    if (!report.irreducible) {
        report.warnings.emplace_back("kernel is reducible (" + std::to_string(report.scc_count)
                                     + " strongly connected components); uniqueness and convergence are not guaranteed");
    }

    const std::size_t k = grid.resolution();
    report.heterogeneity_ok = true;
    for (std::size_t i = 0; i < kernel.size() && report.heterogeneity_ok; ++i) {
        for (std::size_t j = 0; j < kernel.size() && report.heterogeneity_ok; ++j) {
            if (i == j || !(kernel(i, j) > 0.0)) {
                continue;
            }
            for (std::size_t m = 0; m + k <= grid.last(); ++m) {
                const double lhs = 2.0 * model.tau(grid, j, m);
                const double rhs = model.tau(grid, i, m + k);
                if (std::abs(lhs - rhs) <= 1e-12 * std::max(std::abs(lhs), std::abs(rhs))) {
                    report.heterogeneity_ok = false;
                    report.warnings.emplace_back("heterogeneity: 2 tau(v_" + std::to_string(j) + ", x) = tau(v_"
                                                 + std::to_string(i) + ", 2x) at node " + std::to_string(m));
                    break;
                }
            }
        }
    }
    return report;
}

} // namespace gfv
