#pragma once

// Test-only oracles, kept independent of the library code paths they check:
// adaptive Simpson quadrature and the substitution that regularizes the
// Caputo kernel.

#include <cmath>
#include <functional>

namespace oracles {

inline double simpson(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    return (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b));
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                               int depth = 24) {
    const double c = 0.5 * (a + b);
    const double whole = simpson(f, a, b);
    const double left = simpson(f, a, c), right = simpson(f, c, b);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
        return left + right + (left + right - whole) / 15.0;
    }
    return adaptive_simpson(f, a, c, 0.5 * tol, depth - 1) + adaptive_simpson(f, c, b, 0.5 * tol, depth - 1);
}

// Caputo derivative of order a in (0,1) of a function with derivative dv,
// via the substitution s = (t - tau)^(1-a) that removes the kernel
// singularity:
//   (1/Gamma(1-a)) int_0^t dv(tau) (t-tau)^(-a) dtau
//     = (1/((1-a) Gamma(1-a))) int_0^{t^(1-a)} dv(t - s^(1/(1-a))) ds.
inline double caputo_by_quadrature(const std::function<double(double)>& dv, double alpha, double t,
                                   double tol = 1e-12) {
    const double e = 1.0 - alpha;
    const auto integrand = [&](double s) { return dv(t - std::pow(s, 1.0 / e)); };
    return adaptive_simpson(integrand, 0.0, std::pow(t, e), tol) / (e * std::tgamma(e));
}

}  // namespace oracles
