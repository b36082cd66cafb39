#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "gfv/grid.hpp"

namespace gfv {

/// Values indexed by (feature, node), feature-major contiguous storage.
class Field {
public:
    Field() = default;
    Field(std::size_t features, std::size_t nodes, double fill = 0.0)
        : features_(features), nodes_(nodes), values_(features * nodes, fill)
    {
    }

    std::size_t features() const noexcept { return features_; }
    std::size_t nodes() const noexcept { return nodes_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(std::size_t i, std::size_t m) noexcept { return values_[i * nodes_ + m]; }
    double operator()(std::size_t i, std::size_t m) const noexcept { return values_[i * nodes_ + m]; }

    std::span<double> feature(std::size_t i) { return {values_.data() + i * nodes_, nodes_}; }
    std::span<const double> feature(std::size_t i) const { return {values_.data() + i * nodes_, nodes_}; }

    std::span<double> flat() noexcept { return values_; }
    std::span<const double> flat() const noexcept { return values_; }

    bool same_shape(const Field& other) const noexcept
    {
        return features_ == other.features_ && nodes_ == other.nodes_;
    }

    bool all_finite() const noexcept
    {
        for (double v : values_) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        return true;
    }

    Field& operator*=(double s) noexcept
    {
        for (double& v : values_) {
            v *= s;
        }
        return *this;
    }

    Field& operator+=(const Field& other)
    {
        require_shape(other);
        for (std::size_t q = 0; q < values_.size(); ++q) {
            values_[q] += other.values_[q];
        }
        return *this;
    }

    Field& operator-=(const Field& other)
    {
        require_shape(other);
        for (std::size_t q = 0; q < values_.size(); ++q) {
            values_[q] -= other.values_[q];
        }
        return *this;
    }

    friend Field operator*(double s, Field f) { return f *= s; }
    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }

    void require_shape(const Field& other) const
    {
        if (!same_shape(other)) {
            throw std::invalid_argument("field: shape mismatch");
        }
    }

private:
    std::size_t features_ = 0;
    std::size_t nodes_ = 0;
    std::vector<double> values_;
};

/// Quadrature inner product sum_{i,m} w_m f_{i,m} g_{i,m}.
inline double inner(const Grid& grid, const Field& f, const Field& g)
{
    f.require_shape(g);
    double acc = 0.0;
    for (std::size_t i = 0; i < f.features(); ++i) {
        for (std::size_t m = 0; m < f.nodes(); ++m) {
            acc += grid.weight(m) * f(i, m) * g(i, m);
        }
    }
    return acc;
}

/// sum_{i,m} w_m f_{i,m}
inline double total(const Grid& grid, const Field& f)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < f.features(); ++i) {
        for (std::size_t m = 0; m < f.nodes(); ++m) {
            acc += grid.weight(m) * f(i, m);
        }
    }
    return acc;
}

/// sum_{i,m} w_m |f_{i,m}|
inline double l1_norm(const Grid& grid, const Field& f)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < f.features(); ++i) {
        for (std::size_t m = 0; m < f.nodes(); ++m) {
            acc += grid.weight(m) * std::abs(f(i, m));
        }
    }
    return acc;
}

} // namespace gfv
