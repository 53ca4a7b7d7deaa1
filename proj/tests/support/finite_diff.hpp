#pragma once
// Test-only central finite-difference helpers. These stay independent of the
// analytic gradient paths they are used to verify.

#include <cmath>
#include <cstddef>

namespace descgen::testsupport {

// Central difference of eval() with respect to *coord.
template <typename Eval>
double central_diff(double* coord, double h, Eval&& eval) {
    const double saved = *coord;
    *coord = saved + h;
    const double fp = eval();
    *coord = saved - h;
    const double fm = eval();
    *coord = saved;
    return (fp - fm) / (2.0 * h);
}

inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

}  // namespace descgen::testsupport
