#pragma once

// Weighted geometry on (0,b): cell-centered grid with the weight x baked
// into the quadrature, weighted L2 and H1 inner products, the cumulative
// integral operators J_x and J_x^2, and the weighted-mean (nonlocal
// constraint) projector.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "fphs/frac_ops.hpp"

namespace fphs {

// Cell-centered mesh: x_i = (i + 1/2) h with h = b/nx, so the singular
// point x = 0 and the Neumann boundary x = b are faces, never nodes.
// Quadrature weight per cell is q_i = x_i h (midpoint rule for the measure
// x dx).
struct Grid {
    double b;
    std::size_t nx;
    double h;

    Grid(double length, std::size_t cells) : b(length), nx(cells), h(length / static_cast<double>(cells)) {
        if (!(length > 0.0) || !std::isfinite(length))
            throw std::invalid_argument("Grid: domain length must be positive and finite");
        if (cells < 3) throw std::invalid_argument("Grid: need at least three cells");
    }

    double center(std::size_t i) const { return (static_cast<double>(i) + 0.5) * h; }
    double weight(std::size_t i) const { return center(i) * h; }
};

// Values at cell centers, aligned to a Grid.
using Field = std::vector<double>;

namespace detail {

inline void check_field(const Field& u, const Grid& g, const char* who) {
    if (u.size() != g.nx)
        throw std::invalid_argument(std::string(who) + ": field length " + std::to_string(u.size()) +
                                    " does not match grid with " + std::to_string(g.nx) + " cells");
}

}  // namespace detail

// Weighted inner product (u,w) = sum_i x_i h u_i w_i  ~ int_0^b x u w dx.
inline double inner_rho(const Field& u, const Field& w, const Grid& g) {
    detail::check_field(u, g, "inner_rho");
    detail::check_field(w, g, "inner_rho");
    double acc = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i) acc += g.weight(i) * (u[i] * w[i]);
    return acc;
}

inline double norm_rho_sq(const Field& u, const Grid& g) { return inner_rho(u, u, g); }
inline double norm_rho(const Field& u, const Grid& g) { return std::sqrt(norm_rho_sq(u, g)); }

// Unweighted companion, used for norms of the J_x fields.
inline double inner_plain(const Field& u, const Field& w, const Grid& g) {
    detail::check_field(u, g, "inner_plain");
    detail::check_field(w, g, "inner_plain");
    double acc = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i) acc += g.h * u[i] * w[i];
    return acc;
}

inline double norm_plain_sq(const Field& u, const Grid& g) { return inner_plain(u, u, g); }

// Discrete gradient: centered differences in the interior, one-sided at the
// two boundary cells.
inline Field gradient(const Field& u, const Grid& g) {
    detail::check_field(u, g, "gradient");
    const std::size_t n = g.nx;
    Field d(n);
    d[0] = (u[1] - u[0]) / g.h;
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (u[i + 1] - u[i - 1]) / (2.0 * g.h);
    d[n - 1] = (u[n - 1] - u[n - 2]) / g.h;
    return d;
}

inline double h1rho_sq(const Field& u, const Grid& g) {
    return norm_rho_sq(u, g) + norm_rho_sq(gradient(u, g), g);
}
inline double h1rho(const Field& u, const Grid& g) { return std::sqrt(h1rho_sq(u, g)); }

// Cumulative integral operators evaluated at the cell centers:
//   depth 1:  J_x(xi u)(x_i)   = int_0^{x_i} xi u(xi) dxi
//   depth 2:  J_x^2(xi u)(x_i) = int_0^{x_i} J_x(xi u)(s) ds
// Midpoint rule over whole cells plus a half-cell closing rectangle; note
// the depth-2 outer integral carries no weight.
inline Field jx(const Field& u, const Grid& g, int depth = 1) {
    detail::check_field(u, g, "jx");
    if (depth != 1 && depth != 2) throw std::invalid_argument("jx: depth must be 1 or 2");
    Field first(g.nx);
    double run = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i) {
        const double cell = g.weight(i) * u[i];
        first[i] = run + 0.5 * cell;
        run += cell;
    }
    if (depth == 1) return first;
    Field second(g.nx);
    run = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i) {
        const double cell = g.h * first[i];
        second[i] = run + 0.5 * cell;
        run += cell;
    }
    return second;
}

// Removes the weighted mean so the discrete nonlocal condition
// sum_i q_i u_i = 0 holds to machine precision. Idempotent; identity on
// fields already satisfying the constraint.
inline Field weighted_mean_project(const Field& u, const Grid& g) {
    detail::check_field(u, g, "weighted_mean_project");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i) {
        num += g.weight(i) * u[i];
        den += g.weight(i);
    }
    const double c = num / den;
    Field out(u);
    for (double& x : out) x -= c;
    return out;
}

inline double weighted_mean_defect(const Field& u, const Grid& g) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i) acc += g.weight(i) * u[i];
    return acc;
}

// Trapezoid-in-time accumulation of per-node squared norms; the L2(0,T;...)
// norms of trajectories are built from this.
inline double trapezoid_time(const std::vector<double>& samples, const TimeGrid& g) {
    if (samples.size() != g.nt + 1)
        throw std::invalid_argument("trapezoid_time: sample length does not match grid nodes");
    double acc = 0.0;
    for (std::size_t n = 1; n <= g.nt; ++n) acc += 0.5 * g.dt * (samples[n] + samples[n - 1]);
    return acc;
}

}  // namespace fphs
