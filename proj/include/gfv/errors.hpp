#pragma once

#include <stdexcept>
#include <string>

namespace gfv {

/// Bad input: configuration, model coefficients, kernel, grid parameters.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CflViolation : public NumericalError {
public:
    CflViolation(std::size_t feature, std::size_t node, double cfl)
        : NumericalError("CFL violation: feature " + std::to_string(feature) + ", node "
                         + std::to_string(node) + ", Courant number " + std::to_string(cfl)),
          feature_(feature), node_(node), cfl_(cfl)
    {
    }
    std::size_t feature() const noexcept { return feature_; }
    std::size_t node() const noexcept { return node_; }
    double courant() const noexcept { return cfl_; }

private:
    std::size_t feature_;
    std::size_t node_;
    double cfl_;
};

} // namespace gfv
