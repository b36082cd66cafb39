#pragma once

#include <cstddef>

#include "gfv/field.hpp"

namespace gfv {

/// Dominant eigenelements of the discrete problem.
///
/// N is normalized by sum w N = 1 and phi by sum w N phi = 1. growth_factor is
/// the Perron root of the split-step map, lambda = ln(growth_factor) / dt.
struct EigenPair {
    double lambda = 0.0;
    double lambda_adjoint = 0.0;
    double growth_factor = 1.0;
    double dt = 0.0;
    Field N;
    Field phi;
    double residual_direct = 0.0;
    double residual_adjoint = 0.0;
    std::size_t iterations_direct = 0;
    std::size_t iterations_adjoint = 0;
    bool converged = false;
};

} // namespace gfv
