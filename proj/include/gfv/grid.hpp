#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gfv {

/// Geometric size grid x_m = 2^{(m-N)/k}, m = 0..2N.
///
/// Nodes are closed under doubling: node m+k is exactly twice node m, so the
/// equal-mitosis gain term needs no interpolation. Weights follow the midpoint
/// rule in log-size, w_m = x_m (2^{1/(2k)} - 2^{-1/(2k)}), with both endpoint
/// weights halved.
class Grid {
public:
    Grid(std::size_t half_count, std::size_t resolution)
        : half_count_(half_count), resolution_(resolution)
    {
        if (resolution_ == 0 || half_count_ == 0) {
            throw std::invalid_argument("grid: N and k must be positive");
        }
        if (half_count_ < resolution_) {
            throw std::invalid_argument("grid: N must be >= k (got N=" + std::to_string(half_count_)
                                        + ", k=" + std::to_string(resolution_) + ")");
        }
        const std::size_t count = 2 * half_count_ + 1;
        nodes_.resize(count);
        weights_.resize(count);
        const double kk = static_cast<double>(resolution_);
        const double cell = std::exp2(0.5 / kk) - std::exp2(-0.5 / kk);
        for (std::size_t m = 0; m < count; ++m) {
            const double e = (static_cast<double>(m) - static_cast<double>(half_count_)) / kk;
            nodes_[m] = std::exp2(e);
            weights_[m] = nodes_[m] * cell;
        }
        weights_.front() *= 0.5;
        weights_.back() *= 0.5;
    }

    std::size_t half_count() const noexcept { return half_count_; }
    std::size_t resolution() const noexcept { return resolution_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t last() const noexcept { return nodes_.size() - 1; }

    double node(std::size_t m) const { return nodes_.at(m); }
    double weight(std::size_t m) const { return weights_.at(m); }
    std::span<const double> nodes() const noexcept { return nodes_; }
    std::span<const double> weights() const noexcept { return weights_; }

    /// Spacing in log-size, ln 2 / k.
    double log_step() const noexcept { return std::numbers::ln2 / static_cast<double>(resolution_); }

    /// Index of the node holding 2 x_m, or nullopt once doubling leaves the grid.
    std::optional<std::size_t> double_index(std::size_t m) const
    {
        if (m > last()) {
            throw std::out_of_range("grid: node index out of range");
        }
        if (m + resolution_ > last()) {
            return std::nullopt;
        }
        return m + resolution_;
    }

    /// Node closest to x in log distance.
    std::size_t nearest(double x) const
    {
        if (!(x > 0.0)) {
            throw std::invalid_argument("grid: nearest() needs a positive size");
        }
        const double pos = std::log2(x) * static_cast<double>(resolution_) + static_cast<double>(half_count_);
        if (pos <= 0.0) {
            return 0;
        }
        const auto m = static_cast<std::size_t>(std::llround(pos));
        return m > last() ? last() : m;
    }

    /// Quadrature sum_m w_m f_m.
    double integrate(std::span<const double> f) const
    {
        if (f.size() != size()) {
            throw std::invalid_argument("grid: integrand size does not match grid");
        }
        double acc = 0.0;
        for (std::size_t m = 0; m < f.size(); ++m) {
            if (!std::isfinite(f[m])) {
                throw std::domain_error("grid: non-finite integrand at node " + std::to_string(m));
            }
            acc += weights_[m] * f[m];
        }
        return acc;
    }

private:
    std::size_t half_count_;
    std::size_t resolution_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

} // namespace gfv
