#pragma once

// Finite-difference oracle for gradient checks. Lives in test code only and
// never calls into the reverse-mode path it is checking: it re-evaluates the
// forward function at perturbed parameter values.

#include <algorithm>
#include <cmath>
#include <functional>

#include "cfa/tensor.hpp"

namespace cfa::testing {

/// Central difference d(eval)/d(t[i]) with step h.
inline double fd_gradient(cfa::Tensor t, std::size_t i,
                          const std::function<double()>& eval, double h = 1e-5) {
    const double orig = t.values()[i];
    t.values()[i] = orig + h;
    const double up = eval();
    t.values()[i] = orig - h;
    const double down = eval();
    t.values()[i] = orig;
    return (up - down) / (2.0 * h);
}

/// Relative error with an absolute floor so near-zero gradients do not
/// amplify finite-difference noise.
inline double rel_err(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-5});
    return std::abs(a - b) / scale;
}

}  // namespace cfa::testing
