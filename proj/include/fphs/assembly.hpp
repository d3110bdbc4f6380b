#pragma once

// Discrete singular spatial operator B u = (1/x)(x u_x)_x in conservative
// flux form, and the per-step implicit block system for the coupled pair
// (u, v) with the two nonlocal integral constraints attached through
// Lagrange multipliers in the constant direction.
//
// The core matrix is block-tridiagonal over per-cell 2-vectors (u_i, v_i)
// and is factorized by block elimination with explicit 2x2 adjugate
// inverses; the two constraint rows/columns are folded in afterwards by a
// rank-2 Schur complement. All 2x2 arithmetic is written so that swapping
// the two components everywhere maps the computation onto itself exactly in
// floating point, which is what makes the u/v swap symmetry of the solver
// hold bitwise.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "fphs/frac_ops.hpp"
#include "fphs/weighted_space.hpp"

namespace fphs {

// Tridiagonal flux-form discretization of u -> (1/x)(x u_x)_x. The flux
// through the axis face x = 0 vanishes identically (the face coordinate
// multiplies it) and the flux through the outer face is zeroed by the
// Neumann condition, so constants are annihilated exactly and the operator
// is symmetric under the weighted inner product.
struct BandedOperator {
    std::size_t nx = 0;
    std::vector<double> lower, diag, upper;

    void apply(const Field& u, Field& out) const {
        if (u.size() != nx) throw std::invalid_argument("BandedOperator::apply: field length mismatch");
        out.resize(nx);
        for (std::size_t i = 0; i < nx; ++i) {
            double acc = diag[i] * u[i];
            if (i > 0) acc += lower[i] * u[i - 1];
            if (i + 1 < nx) acc += upper[i] * u[i + 1];
            out[i] = acc;
        }
    }

    Field apply(const Field& u) const {
        Field out;
        apply(u, out);
        return out;
    }
};

inline BandedOperator bessel_operator(const Grid& g) {
    BandedOperator op;
    op.nx = g.nx;
    op.lower.assign(g.nx, 0.0);
    op.diag.assign(g.nx, 0.0);
    op.upper.assign(g.nx, 0.0);
    for (std::size_t i = 0; i < g.nx; ++i) {
        const double xlo = static_cast<double>(i) * g.h;        // face below; 0 at the axis
        const double xhi = static_cast<double>(i + 1) * g.h;    // face above
        const double scale = 1.0 / (g.center(i) * g.h * g.h);
        if (i > 0) {
            op.lower[i] = xlo * scale;
            op.diag[i] -= xlo * scale;
        }
        if (i + 1 < g.nx) {
            op.upper[i] = xhi * scale;
            op.diag[i] -= xhi * scale;
        }
    }
    return op;
}

namespace detail {

struct Vec2 {
    double u, v;
};

struct Mat2 {
    // [ a  b ]
    // [ c  d ]
    double a, b, c, d;

    Mat2 operator*(const Mat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }
    Vec2 operator*(const Vec2& x) const { return {a * x.u + b * x.v, c * x.u + d * x.v}; }
    Mat2 operator-(const Mat2& o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }
};

inline double det(const Mat2& m) { return m.a * m.d - m.b * m.c; }

// Solve M x = r through the adjugate; the formula pattern is its own image
// under the component swap.
inline Vec2 solve2(const Mat2& m, const Vec2& r, double det_guard) {
    const double dd = det(m);
    if (!(std::abs(dd) > det_guard))
        throw NumericsError("step system: 2x2 pivot block is singular (factorization breakdown)");
    return {(m.d * r.u - m.b * r.v) / dd, (m.a * r.v - m.c * r.u) / dd};
}

inline Mat2 solve2(const Mat2& m, const Mat2& r, double det_guard) {
    const double dd = det(m);
    if (!(std::abs(dd) > det_guard))
        throw NumericsError("step system: 2x2 pivot block is singular (factorization breakdown)");
    return {(m.d * r.a - m.b * r.c) / dd, (m.d * r.b - m.b * r.d) / dd,
            (m.a * r.c - m.c * r.a) / dd, (m.a * r.d - m.c * r.b) / dd};
}

}  // namespace detail

// Implicit step system
//   (a_u I - m_u B) u + z1 v + lambda_u 1 = rhs_u
//   z2 u + (a_v I - m_v B) v + lambda_v 1 = rhs_v
//   sum_i q_i u_i = 0,   sum_i q_i v_i = 0,
// factorized once and solved for many right-hand sides.
class StepSystem {
  public:
    struct Solution {
        Field u, v;
        double lambda_u = 0.0, lambda_v = 0.0;
    };

    StepSystem(const Grid& g, const BandedOperator& op, double a_u, double a_v, double m_u, double m_v,
               double z1, double z2)
        : grid_(g), nx_(g.nx) {
        if (op.nx != g.nx) throw std::invalid_argument("StepSystem: operator does not match grid");
        diag_.resize(nx_);
        lower_.resize(nx_);
        upper_.resize(nx_);
        for (std::size_t i = 0; i < nx_; ++i) {
            diag_[i] = {a_u - m_u * op.diag[i], z1, z2, a_v - m_v * op.diag[i]};
            lower_[i] = {-m_u * op.lower[i], -m_v * op.lower[i]};  // scalar per component
            upper_[i] = {-m_u * op.upper[i], -m_v * op.upper[i]};
        }
        factorize();
    }

    // Exact solve of the bordered block system; the residual against the
    // assembled rows is at rounding level and is what the tests check.
    Solution solve(const Field& rhs_u, const Field& rhs_v) const {
        detail::check_field(rhs_u, grid_, "StepSystem::solve");
        detail::check_field(rhs_v, grid_, "StepSystem::solve");
        std::vector<detail::Vec2> r(nx_);
        for (std::size_t i = 0; i < nx_; ++i) r[i] = {rhs_u[i], rhs_v[i]};
        std::vector<detail::Vec2> y = core_solve(r);

        // Rank-2 bordering: columns are the constant direction per
        // component, rows are the weighted-mean functionals.
        detail::Vec2 ry{0.0, 0.0};
        detail::Mat2 schur{0.0, 0.0, 0.0, 0.0};
        for (std::size_t i = 0; i < nx_; ++i) {
            const double q = grid_.weight(i);
            ry.u += q * y[i].u;
            ry.v += q * y[i].v;
            schur.a += q * border_[i].a;
            schur.b += q * border_[i].b;
            schur.c += q * border_[i].c;
            schur.d += q * border_[i].d;
        }
        const detail::Vec2 lambda = detail::solve2(schur, ry, guard_);

        Solution s;
        s.u.resize(nx_);
        s.v.resize(nx_);
        for (std::size_t i = 0; i < nx_; ++i) {
            const detail::Vec2 corr = border_[i] * lambda;
            s.u[i] = y[i].u - corr.u;
            s.v[i] = y[i].v - corr.v;
        }
        s.lambda_u = lambda.u;
        s.lambda_v = lambda.v;
        return s;
    }

    // Residual of a solution against the assembled rows, reported relative
    // to the right-hand side scale.
    double residual(const Solution& s, const Field& rhs_u, const Field& rhs_v) const {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < nx_; ++i) {
            detail::Vec2 row = diag_[i] * detail::Vec2{s.u[i], s.v[i]};
            if (i > 0) {
                row.u += lower_[i].u * s.u[i - 1];
                row.v += lower_[i].v * s.v[i - 1];
            }
            if (i + 1 < nx_) {
                row.u += upper_[i].u * s.u[i + 1];
                row.v += upper_[i].v * s.v[i + 1];
            }
            row.u += s.lambda_u - rhs_u[i];
            row.v += s.lambda_v - rhs_v[i];
            num += row.u * row.u + row.v * row.v;
            den += rhs_u[i] * rhs_u[i] + rhs_v[i] * rhs_v[i];
        }
        return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
    }

    std::size_t nx() const { return nx_; }

  private:
    struct ScalarPair {
        double u, v;
    };

    void factorize() {
        // Block elimination: pivots_[i] holds the eliminated diagonal block
        //   P_i = D_i - L_i P_{i-1}^{-1} U_{i-1}.
        pivots_.resize(nx_);
        pivots_[0] = diag_[0];
        for (std::size_t i = 1; i < nx_; ++i) {
            const detail::Mat2 pinv_upper = detail::solve2(
                pivots_[i - 1],
                detail::Mat2{upper_[i - 1].u, 0.0, 0.0, upper_[i - 1].v}, guard_);
            const detail::Mat2 lower{lower_[i].u, 0.0, 0.0, lower_[i].v};
            pivots_[i] = diag_[i] - lower * pinv_upper;
        }

        // Border columns: solve K Y = C with C_i = I (the multiplier enters
        // every cell of its component with coefficient one).
        std::vector<detail::Mat2> c(nx_, detail::Mat2{1.0, 0.0, 0.0, 1.0});
        border_ = core_solve_mat(c);
    }

    std::vector<detail::Vec2> core_solve(std::vector<detail::Vec2> r) const {
        for (std::size_t i = 1; i < nx_; ++i) {
            const detail::Mat2 lower{lower_[i].u, 0.0, 0.0, lower_[i].v};
            const detail::Vec2 w = detail::solve2(pivots_[i - 1], r[i - 1], guard_);
            const detail::Vec2 lw = lower * w;
            r[i].u -= lw.u;
            r[i].v -= lw.v;
        }
        std::vector<detail::Vec2> x(nx_);
        x[nx_ - 1] = detail::solve2(pivots_[nx_ - 1], r[nx_ - 1], guard_);
        for (std::size_t ii = nx_ - 1; ii-- > 0;) {
            detail::Vec2 rhs = r[ii];
            rhs.u -= upper_[ii].u * x[ii + 1].u;
            rhs.v -= upper_[ii].v * x[ii + 1].v;
            x[ii] = detail::solve2(pivots_[ii], rhs, guard_);
        }
        return x;
    }

    std::vector<detail::Mat2> core_solve_mat(std::vector<detail::Mat2> r) const {
        for (std::size_t i = 1; i < nx_; ++i) {
            const detail::Mat2 lower{lower_[i].u, 0.0, 0.0, lower_[i].v};
            const detail::Mat2 w = detail::solve2(pivots_[i - 1], r[i - 1], guard_);
            r[i] = r[i] - lower * w;
        }
        std::vector<detail::Mat2> x(nx_);
        x[nx_ - 1] = detail::solve2(pivots_[nx_ - 1], r[nx_ - 1], guard_);
        for (std::size_t ii = nx_ - 1; ii-- > 0;) {
            const detail::Mat2 up{upper_[ii].u, 0.0, 0.0, upper_[ii].v};
            x[ii] = detail::solve2(pivots_[ii], r[ii] - up * x[ii + 1], guard_);
        }
        return x;
    }

    Grid grid_;
    std::size_t nx_;
    std::vector<detail::Mat2> diag_, pivots_, border_;
    std::vector<ScalarPair> lower_, upper_;
    double guard_ = 1e-280;
};

// Coefficients of the implicit step for one field: the identity part
// collects the newest Caputo difference and the damping backward
// difference, the operator part collects the elliptic and mixed terms.
struct StepCoefficients {
    double identity_u, identity_v;  // caputo head weight + 1/dt per field
    double operator_u, operator_v;  // 1 + 1/dt on B per field
};

inline StepSystem assemble_step_system(const Grid& g, const BandedOperator& op, double dt, double beta,
                                       double gamma, double z1, double z2, const StepCoefficients& c) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("assemble_step_system: degenerate dt");
    if (classify_order(beta, true) != OrderBand::caputo_high)
        throw std::invalid_argument("assemble_step_system: beta must lie in (1,2)");
    if (classify_order(gamma, true) != OrderBand::caputo_high)
        throw std::invalid_argument("assemble_step_system: gamma must lie in (1,2)");
    return StepSystem(g, op, c.identity_u, c.identity_v, c.operator_u, c.operator_v, z1, z2);
}

// L1 head weight for a Caputo order in (1,2): the coefficient dt^-beta /
// Gamma(3-beta) on the newest backward difference of the rate sequence.
inline double caputo_head_weight(double beta, double dt) {
    return std::pow(dt, -beta) / std::tgamma(3.0 - beta);
}

}  // namespace fphs
