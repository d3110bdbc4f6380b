#pragma once

// Implicit time marching for the coupled linear system. Per step the L1
// Caputo history of the rate sequences, the damping backward differences,
// and the previous elliptic image form the right-hand side; the bordered
// block system then produces the new pair together with its constraint
// multipliers. A single solve is strictly sequential in n (the Caputo
// history never forgets); distinct solves share nothing.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fphs/assembly.hpp"
#include "fphs/problem.hpp"

namespace fphs {

// Source samples at every node and cell.
struct SourceTable {
    std::vector<Field> f, g;  // [node][cell]
};

inline SourceTable sample_sources(const LinearSources& src, const Grid& grid, const TimeGrid& tgrid) {
    SourceTable tab;
    tab.f.resize(tgrid.nt + 1, Field(grid.nx));
    tab.g.resize(tgrid.nt + 1, Field(grid.nx));
    for (std::size_t n = 0; n <= tgrid.nt; ++n) {
        const double t = tgrid.node(n);
        for (std::size_t i = 0; i < grid.nx; ++i) {
            tab.f[n][i] = src.f(grid.center(i), t);
            tab.g[n][i] = src.g(grid.center(i), t);
        }
    }
    return tab;
}

inline SourceTable zero_sources(const Grid& grid, const TimeGrid& tgrid) {
    SourceTable tab;
    tab.f.resize(tgrid.nt + 1, Field(grid.nx, 0.0));
    tab.g.resize(tgrid.nt + 1, Field(grid.nx, 0.0));
    return tab;
}

// Time-indexed discrete solution pair with the retained rate histories the
// Caputo convolutions need, per-step source snapshots, and the constraint
// multipliers of every solve.
struct Trajectory {
    Grid grid;
    TimeGrid tgrid;
    std::vector<Field> u, v;    // nodes 0..nt
    std::vector<Field> du, dv;  // du[0] seeded with the initial rate datum
    SourceTable sources;
    std::vector<double> lambda_u, lambda_v;  // [0] unused

    Trajectory(const Grid& g, const TimeGrid& tg) : grid(g), tgrid(tg) {}
};

inline double data_scale(const DiscreteProblem& p, const SourceTable& tab) {
    double s = 0.0;
    for (const Field* f : {&p.phi1, &p.phi2, &p.psi1, &p.psi2}) s = std::max(s, h1rho(*f, p.grid));
    for (const auto& f : tab.f) s = std::max(s, norm_rho(f, p.grid));
    for (const auto& g : tab.g) s = std::max(s, norm_rho(g, p.grid));
    return s;
}

namespace detail {

// L1 weight over history cell k for evaluation at node m, divided by dt:
//   [(t_m - t_k)^(2-beta) - (t_m - t_{k+1})^(2-beta)] / (dt Gamma(3-beta)).
struct CaputoHistory {
    double exponent, inv_gamma;

    CaputoHistory(double beta) : exponent(2.0 - beta), inv_gamma(1.0 / std::tgamma(3.0 - beta)) {}

    // Accumulates sum_{k=0}^{m-2} (w_k/dt)(rates[k+1] - rates[k]) into hist.
    void accumulate(const std::vector<Field>& rates, const TimeGrid& g, std::size_t m, Field& hist) const {
        std::fill(hist.begin(), hist.end(), 0.0);
        const double tm = g.node(m);
        double upper = std::pow(tm, exponent);
        for (std::size_t k = 0; k + 1 < m; ++k) {
            const double lower = std::pow(tm - g.node(k + 1), exponent);
            const double c = (upper - lower) * inv_gamma / g.dt;
            const Field& hi = rates[k + 1];
            const Field& lo = rates[k];
            for (std::size_t i = 0; i < hist.size(); ++i) hist[i] += c * (hi[i] - lo[i]);
            upper = lower;
        }
    }
};

}  // namespace detail

// Marches the coupled system from the ingested data. Deterministic:
// identical inputs give bit-identical trajectories.
inline Trajectory solve_linear(const DiscreteProblem& p, const SourceTable& tab) {
    const Grid& grid = p.grid;
    const TimeGrid& tg = p.tgrid;
    if (tab.f.size() != tg.nt + 1 || tab.g.size() != tg.nt + 1)
        throw std::invalid_argument("solve_linear: source table does not match the time grid");

    const BandedOperator op = bessel_operator(grid);
    const double rdt = 1.0 / tg.dt;
    const double head_u = caputo_head_weight(p.beta, tg.dt);
    const double head_v = caputo_head_weight(p.gamma, tg.dt);
    const StepCoefficients coeffs{head_u + rdt, head_v + rdt, 1.0 + rdt, 1.0 + rdt};
    const StepSystem sys =
        assemble_step_system(grid, op, tg.dt, p.beta, p.gamma, p.z1, p.z2, coeffs);

    Trajectory traj(grid, tg);
    traj.sources = tab;
    traj.u.assign(tg.nt + 1, Field(grid.nx, 0.0));
    traj.v.assign(tg.nt + 1, Field(grid.nx, 0.0));
    traj.du.assign(tg.nt + 1, Field(grid.nx, 0.0));
    traj.dv.assign(tg.nt + 1, Field(grid.nx, 0.0));
    traj.lambda_u.assign(tg.nt + 1, 0.0);
    traj.lambda_v.assign(tg.nt + 1, 0.0);
    traj.u[0] = p.phi1;
    traj.du[0] = p.phi2;
    traj.v[0] = p.psi1;
    traj.dv[0] = p.psi2;

    const double guard = 1e12 * (1.0 + data_scale(p, tab));
    const detail::CaputoHistory conv_u(p.beta), conv_v(p.gamma);
    Field hist_u(grid.nx), hist_v(grid.nx), bu(grid.nx), bv(grid.nx), rhs_u(grid.nx), rhs_v(grid.nx);

    for (std::size_t n = 0; n < tg.nt; ++n) {
        const std::size_t m = n + 1;
        conv_u.accumulate(traj.du, tg, m, hist_u);
        conv_v.accumulate(traj.dv, tg, m, hist_v);
        op.apply(traj.u[n], bu);
        op.apply(traj.v[n], bv);
        for (std::size_t i = 0; i < grid.nx; ++i) {
            rhs_u[i] = tab.f[m][i] + (head_u + rdt) * traj.u[n][i] + head_u * tg.dt * traj.du[n][i] -
                       hist_u[i] - rdt * bu[i];
            rhs_v[i] = tab.g[m][i] + (head_v + rdt) * traj.v[n][i] + head_v * tg.dt * traj.dv[n][i] -
                       hist_v[i] - rdt * bv[i];
        }
        StepSystem::Solution sol = sys.solve(rhs_u, rhs_v);
        for (std::size_t i = 0; i < grid.nx; ++i) {
            traj.du[m][i] = (sol.u[i] - traj.u[n][i]) * rdt;
            traj.dv[m][i] = (sol.v[i] - traj.v[n][i]) * rdt;
        }
        traj.u[m] = std::move(sol.u);
        traj.v[m] = std::move(sol.v);
        traj.lambda_u[m] = sol.lambda_u;
        traj.lambda_v[m] = sol.lambda_v;

        const double nu = norm_rho(traj.u[m], grid), nv = norm_rho(traj.v[m], grid);
        if (!std::isfinite(nu) || !std::isfinite(nv) || nu > guard || nv > guard)
            throw NumericsError("solve_linear: blow-up detected at step " + std::to_string(m) +
                                " (|u| = " + std::to_string(nu) + ", |v| = " + std::to_string(nv) + ")");
    }
    return traj;
}

// Convenience wrapper: ingest a spec in linear source mode and march.
inline Trajectory solve_linear(const ProblemSpec& spec) {
    IngestResult in = ingest(spec);
    const SourceTable tab = sample_sources(linear_sources(spec), in.problem.grid, in.problem.tgrid);
    return solve_linear(in.problem, tab);
}

// Recomputed discrete residual of the marching equations at step n, as
// fields; fresh trajectories sit at the linear-solve rounding floor.
inline void residual_fields(const Trajectory& traj, const DiscreteProblem& p, std::size_t n, Field& res_u,
                            Field& res_v) {
    if (n < 1 || n > traj.tgrid.nt) throw std::out_of_range("residual: step index out of range");
    const Grid& grid = traj.grid;
    const TimeGrid& tg = traj.tgrid;
    const BandedOperator op = bessel_operator(grid);
    const double rdt = 1.0 / tg.dt;

    Field cap_u(grid.nx, 0.0), cap_v(grid.nx, 0.0);
    const detail::CaputoHistory conv_u(p.beta), conv_v(p.gamma);
    conv_u.accumulate(traj.du, tg, n, cap_u);
    conv_v.accumulate(traj.dv, tg, n, cap_v);
    const double head_u = caputo_head_weight(p.beta, tg.dt);
    const double head_v = caputo_head_weight(p.gamma, tg.dt);
    for (std::size_t i = 0; i < grid.nx; ++i) {
        cap_u[i] += head_u * tg.dt * (traj.du[n][i] - traj.du[n - 1][i]);
        cap_v[i] += head_v * tg.dt * (traj.dv[n][i] - traj.dv[n - 1][i]);
    }

    const Field bu = op.apply(traj.u[n]), bu_prev = op.apply(traj.u[n - 1]);
    const Field bv = op.apply(traj.v[n]), bv_prev = op.apply(traj.v[n - 1]);
    res_u.resize(grid.nx);
    res_v.resize(grid.nx);
    for (std::size_t i = 0; i < grid.nx; ++i) {
        res_u[i] = cap_u[i] - bu[i] - (bu[i] - bu_prev[i]) * rdt + p.z1 * traj.v[n][i] +
                   (traj.u[n][i] - traj.u[n - 1][i]) * rdt + traj.lambda_u[n] - traj.sources.f[n][i];
        res_v[i] = cap_v[i] - bv[i] - (bv[i] - bv_prev[i]) * rdt + p.z2 * traj.u[n][i] +
                   (traj.v[n][i] - traj.v[n - 1][i]) * rdt + traj.lambda_v[n] - traj.sources.g[n][i];
    }
}

inline double residual(const Trajectory& traj, const DiscreteProblem& p, std::size_t n) {
    Field ru, rv;
    residual_fields(traj, p, n, ru, rv);
    return std::sqrt(norm_rho_sq(ru, traj.grid) + norm_rho_sq(rv, traj.grid));
}

}  // namespace fphs
