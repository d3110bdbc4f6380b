#pragma once

// Randomized audit of the pointwise/integral inequalities the energy
// argument leans on:
//
//   jx_bound           |J_x(xi u)|^2           <= (b^3/2) |u|_rho^2
//   jx2_bound          |J_x^2(xi u)|^2         <= (b^2/2) |J_x(xi u)|^2
//   poincare_projected |u|_rho^2               <= (b^2/4) |u_x|_rho^2   (zero weighted mean)
//   rl_kernel_bound    D^{-a} P(t)             <= t^(a-1)/Gamma(a) int_0^t P,  a in (1,2)
//   caputo_square_rule v d^a v - (1/2) d^a v^2 >= -10 dt                (smooth v, a in (0,1))
//
// Draws are admissible by construction: cosine modes satisfy the Neumann
// condition at x = b analytically.

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "fphs/csv.hpp"
#include "fphs/frac_ops.hpp"
#include "fphs/weighted_space.hpp"

namespace fphs {

// u(x) = sum_{k<=8} a_k cos(k pi x / b), a_k uniform in [-1,1].
inline Field random_admissible_field(const Grid& g, std::mt19937& rng) {
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    double a[8];
    for (double& c : a) c = coef(rng);
    Field u(g.nx, 0.0);
    const double pi = 3.14159265358979323846;
    for (std::size_t i = 0; i < g.nx; ++i) {
        const double x = g.center(i);
        for (int k = 1; k <= 8; ++k) u[i] += a[k - 1] * std::cos(k * pi * x / g.b);
    }
    return u;
}

// Smooth time signal from cosine modes on [0,T].
inline SampleSeq random_smooth_samples(const TimeGrid& g, std::mt19937& rng) {
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    double a[8];
    for (double& c : a) c = coef(rng);
    SampleSeq s(g.nt + 1, 0.0);
    const double pi = 3.14159265358979323846;
    for (std::size_t n = 0; n <= g.nt; ++n) {
        const double t = g.node(n);
        for (int k = 1; k <= 8; ++k) s[n] += a[k - 1] * std::cos(k * pi * t / g.T);
    }
    return s;
}

struct InequalityCheck {
    std::string id;
    std::size_t draws = 0;
    std::size_t violations = 0;
    double worst_margin = std::numeric_limits<double>::infinity();  // min over draws of (rhs-lhs)/scale

    void record(double lhs, double rhs, double rel_tol) {
        ++draws;
        const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
        const double margin = (rhs - lhs) / scale;
        if (margin < worst_margin) worst_margin = margin;
        if (margin < -rel_tol) ++violations;
    }
};

struct InequalityAuditReport {
    std::vector<InequalityCheck> checks;

    bool pass() const {
        for (const auto& c : checks)
            if (c.violations > 0) return false;
        return true;
    }

    void write_csv(const std::string& path) const {
        CsvWriter w(path, {"inequality_id", "draws", "violations", "worst_margin"});
        for (const auto& c : checks)
            w.row({c.id, std::to_string(c.draws), std::to_string(c.violations), fmt17(c.worst_margin)});
    }
};

// Runs `draws` random admissible fields through the spatial inequalities and
// as many time-signal draws through the kernel bound; the Caputo square rule
// is checked on the canonical smooth functions t^2, sin t, exp t. Fails fast
// on ensembles too small to mean anything.
inline InequalityAuditReport audit_inequalities(const Grid& g, const TimeGrid& tg, std::size_t draws,
                                                std::mt19937& rng, double rel_tol = 1e-8) {
    if (draws < 100) throw std::invalid_argument("audit_inequalities: ensemble of at least 100 draws required");

    InequalityCheck jx1{"jx_bound"}, jx2{"jx2_bound"}, poin{"poincare_projected"}, rlk{"rl_kernel_bound"},
        csq{"caputo_square_rule"};

    const double b = g.b;
    for (std::size_t d = 0; d < draws; ++d) {
        const Field u = random_admissible_field(g, rng);
        const Field j1 = jx(u, g, 1);
        const Field j2 = jx(u, g, 2);
        jx1.record(norm_plain_sq(j1, g), 0.5 * b * b * b * norm_rho_sq(u, g), rel_tol);
        jx2.record(norm_plain_sq(j2, g), 0.5 * b * b * norm_plain_sq(j1, g), rel_tol);

        const Field up = weighted_mean_project(u, g);
        poin.record(norm_rho_sq(up, g), 0.25 * b * b * norm_rho_sq(gradient(up, g), g), rel_tol);
    }

    std::uniform_real_distribution<double> high_band(1.05, 1.95);
    for (std::size_t d = 0; d < draws; ++d) {
        const SampleSeq s = random_smooth_samples(tg, rng);
        SampleSeq p(s.size());
        for (std::size_t n = 0; n < s.size(); ++n) p[n] = s[n] * s[n];
        const double alpha = high_band(rng);
        const double c = std::tgamma(alpha);
        double running = 0.0;
        for (std::size_t n = 1; n <= tg.nt; ++n) {
            running += 0.5 * tg.dt * (p[n] + p[n - 1]);
            const double t = tg.node(n);
            rlk.record(rl_integral(p, alpha, tg, n), std::pow(t, alpha - 1.0) / c * running, rel_tol);
        }
    }

    // Square rule on fixed smooth functions, random order per draw. The
    // discrete analog carries an O(dt) defect, hence the absolute slack.
    std::uniform_real_distribution<double> low_band(0.05, 0.95);
    const std::size_t fn_draws = std::max<std::size_t>(draws / 10, 10);
    for (std::size_t d = 0; d < fn_draws; ++d) {
        const double alpha = low_band(rng);
        for (int which = 0; which < 3; ++which) {
            SampleSeq v(tg.nt + 1), v2(tg.nt + 1);
            for (std::size_t n = 0; n <= tg.nt; ++n) {
                const double t = tg.node(n);
                v[n] = which == 0 ? t * t : which == 1 ? std::sin(t) : std::exp(t);
                v2[n] = v[n] * v[n];
            }
            for (std::size_t n = 1; n <= tg.nt; ++n) {
                const double lhs_gap =
                    v[n] * caputo_low(v, alpha, tg, n) - 0.5 * caputo_low(v2, alpha, tg, n);
                // record as: -10 dt <= lhs_gap, i.e. lhs = -lhs_gap, rhs = 10 dt
                csq.record(-lhs_gap, 10.0 * tg.dt, rel_tol);
            }
        }
    }

    return InequalityAuditReport{{jx1, jx2, poin, rlk, csq}};
}

}  // namespace fphs
