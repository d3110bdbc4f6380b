#pragma once

// Nonlinear engine: homogeneous split, successive linearization with the
// sources frozen at the previous iterate, contraction bookkeeping against
// the theoretical constant, and the empirical uniqueness probe.
//
// The iteration solves, for n = 1, 2, ...,
//   (system) applied to (U^n, V^n) = (F, G)(x, t, shifted previous iterate)
// with zero initial data, where the shift adds the homogeneous solution so
// the composed pair U + psi solves the original nonlinear problem.

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fphs/energy_audit.hpp"
#include "fphs/linear_stepper.hpp"
#include "fphs/problem.hpp"

namespace fphs {

// Catalog nonlinear source with analytically certified Lipschitz constants:
// each entry is (delta/4) times a sum of four unit-Lipschitz maps of the
// four arguments, so the stated delta bounds the increment by construction.
struct NonlinearSource {
    std::string id = "zero";
    double delta1 = 0.0, delta2 = 0.0;

    double F(double x, double t, double a, double b, double c, double d) const {
        return delta1 * 0.25 * mix(x, t, a, b, c, d);
    }
    double G(double x, double t, double a, double b, double c, double d) const {
        return delta2 * 0.25 * mix(x, t, a, b, c, d);
    }

  private:
    // paired grouping keeps the sum bitwise invariant under the u/v swap
    double mix(double, double, double a, double b, double c, double d) const {
        if (id == "zero") return 0.0;
        if (id == "sat_mix") return (std::tanh(a) + std::tanh(b)) + (std::tanh(c) + std::tanh(d));
        if (id == "lin_mix") return (a + b) + (c + d);
        throw ConfigError("unknown nonlinear source catalog id: " + id);
    }
};

inline NonlinearSource make_nonlinear_source(const SourceSpec& s) {
    if (s.mode != "nonlinear") throw ConfigError("make_nonlinear_source: source mode is not nonlinear");
    if (s.id != "zero" && s.id != "sat_mix" && s.id != "lin_mix")
        throw ConfigError("unknown nonlinear source catalog id: " + s.id);
    return NonlinearSource{s.id, s.delta1, s.delta2};
}

// L2(0,T;H1_rho) norm of a node-indexed field sequence.
inline double l2t_h1rho(const std::vector<Field>& fields, const Grid& g, const TimeGrid& tg) {
    std::vector<double> sq(tg.nt + 1);
    for (std::size_t n = 0; n <= tg.nt; ++n) sq[n] = h1rho_sq(fields[n], g);
    return std::sqrt(trapezoid_time(sq, tg));
}

struct PairFields {
    std::vector<Field> u, v;

    static PairFields zero(const Grid& g, const TimeGrid& tg) {
        return {std::vector<Field>(tg.nt + 1, Field(g.nx, 0.0)),
                std::vector<Field>(tg.nt + 1, Field(g.nx, 0.0))};
    }
};

struct PicardReport {
    std::vector<double> increments;        // e_n, n = 1..
    std::vector<double> ratios;            // r_n = e_n/e_{n-1}, n = 2..
    LogValue Kstar;
    bool hypothesis = false;               // K* < 1/4
    bool empirical_contraction = false;    // all recorded ratios below one
    std::size_t iterations = 0;
    bool converged = false;
    bool diverged = false;
    double solution_norm = 0.0;

    void write_csv(const std::string& path) const {
        CsvWriter w(path, {"n", "increment_norm", "ratio"});
        for (std::size_t i = 0; i < increments.size(); ++i)
            w.row({std::to_string(i + 1), fmt17(increments[i]),
                   i == 0 ? std::string("") : fmt17(ratios[i - 1])});
    }

    std::string verdict() const {
        std::string s;
        s += "picard iteration report\n";
        s += "  iterations      : " + std::to_string(iterations) + "\n";
        s += std::string("  converged       : ") + (converged ? "yes" : "no") + "\n";
        s += std::string("  diverged        : ") + (diverged ? "yes" : "no") + "\n";
        s += "  K*              : " + fmt17(Kstar.value) + " (log " + fmt17(Kstar.log_value) + ")\n";
        if (hypothesis)
            s += "  contraction     : proved (K* < 1/4)\n";
        else if (empirical_contraction)
            s += "  contraction     : empirical, outside the K* < 1/4 hypothesis\n";
        else
            s += "  contraction     : not observed\n";
        s += "  solution norm   : " + fmt17(solution_norm) + "\n";
        return s;
    }
};

// Homogeneous companion: the linear solve with the given initial data and
// zero sources.
inline Trajectory solve_homogeneous(const DiscreteProblem& p) {
    return solve_linear(p, zero_sources(p.grid, p.tgrid));
}

// Theoretical contraction constant and whether the sufficient condition of
// the convergence theorem holds. K* at or beyond 1/4 does not block the
// engine; the report just labels convergence as empirical.
inline std::pair<LogValue, bool> contraction_constant(const ConstantsParams& p) {
    const Constants c = constants(p);
    return {c.Kstar, c.Kstar.log_value < std::log(0.25)};
}

namespace detail {

inline DiscreteProblem zero_data_copy(const DiscreteProblem& p) {
    DiscreteProblem q = p;
    q.phi1.assign(p.grid.nx, 0.0);
    q.phi2.assign(p.grid.nx, 0.0);
    q.psi1.assign(p.grid.nx, 0.0);
    q.psi2.assign(p.grid.nx, 0.0);
    return q;
}

// Samples the frozen sources at the previous iterate, shifted by the
// homogeneous pair.
inline SourceTable frozen_sources(const NonlinearSource& src, const PairFields& prev, const Trajectory& hom,
                                  const Grid& g, const TimeGrid& tg) {
    SourceTable tab;
    tab.f.resize(tg.nt + 1, Field(g.nx));
    tab.g.resize(tg.nt + 1, Field(g.nx));
    for (std::size_t n = 0; n <= tg.nt; ++n) {
        const Field ugrad = gradient(prev.u[n], g), vgrad = gradient(prev.v[n], g);
        const Field hgu = gradient(hom.u[n], g), hgv = gradient(hom.v[n], g);
        const double t = tg.node(n);
        for (std::size_t i = 0; i < g.nx; ++i) {
            const double a = prev.u[n][i] + hom.u[n][i];
            const double b = prev.v[n][i] + hom.v[n][i];
            const double c = ugrad[i] + hgu[i];
            const double d = vgrad[i] + hgv[i];
            const double x = g.center(i);
            tab.f[n][i] = src.F(x, t, a, b, c, d);
            tab.g[n][i] = src.G(x, t, a, b, c, d);
        }
    }
    return tab;
}

}  // namespace detail

struct PicardResult {
    Trajectory iterate;  // last (U, V), zero initial data
    PicardReport report;
};

// Successive approximation from the given initial iterate (zero by
// default). Convergence: increment norm within tol of the solution scale.
// Divergence: three consecutive increment increases abort the run with the
// report marked accordingly.
inline PicardResult picard_iterate(const DiscreteProblem& p, const NonlinearSource& src,
                                   const Trajectory& hom, double tol, std::size_t max_iter,
                                   std::optional<PairFields> seed = std::nullopt) {
    if (!(tol >= 0.0)) throw std::invalid_argument("picard_iterate: tol must be nonnegative");
    if (max_iter < 1) throw std::invalid_argument("picard_iterate: need at least one iteration");
    const Grid& g = p.grid;
    const TimeGrid& tg = p.tgrid;
    const DiscreteProblem zero_data = detail::zero_data_copy(p);

    PairFields prev = seed ? std::move(*seed) : PairFields::zero(g, tg);
    PicardResult out{Trajectory(g, tg), {}};
    out.report.Kstar = contraction_constant({p.grid.b, tg.T, p.beta, p.gamma, p.z1, p.z2, src.delta1,
                                             src.delta2})
                           .first;
    out.report.hypothesis = out.report.Kstar.log_value < std::log(0.25);

    std::size_t rising = 0;
    for (std::size_t n = 1; n <= max_iter; ++n) {
        const SourceTable tab = detail::frozen_sources(src, prev, hom, g, tg);
        Trajectory next = solve_linear(zero_data, tab);

        std::vector<double> usq(tg.nt + 1), vsq(tg.nt + 1);
        Field diff(g.nx);
        for (std::size_t m = 0; m <= tg.nt; ++m) {
            for (std::size_t i = 0; i < g.nx; ++i) diff[i] = next.u[m][i] - prev.u[m][i];
            usq[m] = h1rho_sq(diff, g);
            for (std::size_t i = 0; i < g.nx; ++i) diff[i] = next.v[m][i] - prev.v[m][i];
            vsq[m] = h1rho_sq(diff, g);
        }
        const double e = std::sqrt(trapezoid_time(usq, tg)) + std::sqrt(trapezoid_time(vsq, tg));
        out.report.increments.push_back(e);
        if (out.report.increments.size() >= 2) {
            const auto& inc = out.report.increments;
            out.report.ratios.push_back(e / inc[inc.size() - 2]);
            rising = e > inc[inc.size() - 2] ? rising + 1 : 0;
        }
        out.report.iterations = n;

        const double sol_norm = l2t_h1rho(next.u, g, tg) + l2t_h1rho(next.v, g, tg);
        out.report.solution_norm = sol_norm;
        prev.u = next.u;
        prev.v = next.v;
        out.iterate = std::move(next);

        if (e <= tol * (1.0 + sol_norm)) {
            out.report.converged = true;
            break;
        }
        if (rising >= 3) {
            out.report.diverged = true;
            break;
        }
    }

    bool contracting = !out.report.ratios.empty() || out.report.converged;
    for (double r : out.report.ratios) contracting = contracting && r < 1.0;
    out.report.empirical_contraction = contracting && out.report.converged;
    return out;
}

inline PicardResult picard_iterate(const DiscreteProblem& p, const NonlinearSource& src, double tol,
                                   std::size_t max_iter, std::optional<PairFields> seed = std::nullopt) {
    return picard_iterate(p, src, solve_homogeneous(p), tol, max_iter, std::move(seed));
}

// (u, v) = (U + psi, V + phi). Rate histories, multipliers and the frozen
// source tables add linearly.
inline Trajectory compose_solution(const Trajectory& UV, const Trajectory& hom) {
    if (UV.grid.nx != hom.grid.nx || UV.tgrid.nt != hom.tgrid.nt)
        throw std::invalid_argument("compose_solution: trajectory shapes do not match");
    Trajectory out = UV;
    for (std::size_t n = 0; n <= out.tgrid.nt; ++n) {
        for (std::size_t i = 0; i < out.grid.nx; ++i) {
            out.u[n][i] += hom.u[n][i];
            out.v[n][i] += hom.v[n][i];
            out.du[n][i] += hom.du[n][i];
            out.dv[n][i] += hom.dv[n][i];
            out.sources.f[n][i] += hom.sources.f[n][i];
            out.sources.g[n][i] += hom.sources.g[n][i];
        }
        out.lambda_u[n] += hom.lambda_u[n];
        out.lambda_v[n] += hom.lambda_v[n];
    }
    return out;
}

// Residual of a composed trajectory against the nonlinear system itself:
// the sources are re-evaluated at the composed fields, not the frozen ones.
inline double nonlinear_residual(const Trajectory& composed, const DiscreteProblem& p,
                                 const NonlinearSource& src, std::size_t n) {
    const Grid& g = composed.grid;
    Trajectory probe = composed;
    const Field ugrad = gradient(composed.u[n], g), vgrad = gradient(composed.v[n], g);
    const double t = composed.tgrid.node(n);
    for (std::size_t i = 0; i < g.nx; ++i) {
        const double x = g.center(i);
        probe.sources.f[n][i] = src.F(x, t, composed.u[n][i], composed.v[n][i], ugrad[i], vgrad[i]);
        probe.sources.g[n][i] = src.G(x, t, composed.u[n][i], composed.v[n][i], ugrad[i], vgrad[i]);
    }
    return residual(probe, p, n);
}

// Runs the iteration from two distinct initial iterates and returns the
// L2(0,T;H1_rho) distance between the two fixed points.
inline double uniqueness_check(const DiscreteProblem& p, const NonlinearSource& src, double tol,
                               std::size_t max_iter) {
    const Trajectory hom = solve_homogeneous(p);
    PicardResult a = picard_iterate(p, src, hom, tol, max_iter);
    PairFields second_seed{hom.u, hom.v};
    PicardResult b = picard_iterate(p, src, hom, tol, max_iter, second_seed);
    if (!a.report.converged || !b.report.converged)
        throw NumericsError("uniqueness_check: a run failed to converge");

    const Grid& g = p.grid;
    const TimeGrid& tg = p.tgrid;
    std::vector<Field> diff_u(tg.nt + 1, Field(g.nx)), diff_v(tg.nt + 1, Field(g.nx));
    for (std::size_t n = 0; n <= tg.nt; ++n)
        for (std::size_t i = 0; i < g.nx; ++i) {
            diff_u[n][i] = a.iterate.u[n][i] - b.iterate.u[n][i];
            diff_v[n][i] = a.iterate.v[n][i] - b.iterate.v[n][i];
        }
    return l2t_h1rho(diff_u, g, tg) + l2t_h1rho(diff_v, g, tg);
}

}  // namespace fphs
