#pragma once

// Discrete fractional calculus on uniform time grids: left Caputo
// derivatives via the L1 scheme, Riemann-Liouville integrals via exact
// kernel integration against piecewise-constant data, and Mittag-Leffler
// functions by direct series summation.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fphs {

// Thrown when a computation fails numerically (divergence, blow-up,
// factorization breakdown, series out of range).
struct NumericsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Uniform grid on [0,T] with nt steps. The last node is pinned to T rather
// than accumulated, so node(nt) == T exactly.
struct TimeGrid {
    double T;
    std::size_t nt;
    double dt;

    TimeGrid(double final_time, std::size_t steps)
        : T(final_time), nt(steps), dt(final_time / static_cast<double>(steps)) {
        if (!(final_time > 0.0) || !std::isfinite(final_time))
            throw std::invalid_argument("TimeGrid: final time must be positive and finite");
        if (steps < 1) throw std::invalid_argument("TimeGrid: need at least one step");
    }

    double node(std::size_t n) const { return n == nt ? T : static_cast<double>(n) * dt; }
};

// Sequence of samples aligned to the nodes of a TimeGrid (length nt+1).
using SampleSeq = std::vector<double>;

enum class OrderBand { rl_integral, caputo_low, caputo_high };

// Sidedness of the Caputo derivative. Only the left derivative has runtime
// operations here; the right-sided variant exists solely in duality
// arguments and is carried as a symbol.
enum class CaputoSide { left, right };

// Classifies a fractional order into the band an operation accepts.
// Caputo orders must lie strictly inside (0,1) or (1,2); integer endpoints
// and anything outside (0,2) are rejected for Caputo use.
inline OrderBand classify_order(double order, bool for_caputo) {
    if (!std::isfinite(order) || order <= 0.0)
        throw std::invalid_argument("fractional order must be positive, got " + std::to_string(order));
    if (!for_caputo) return OrderBand::rl_integral;
    if (order < 1.0) return OrderBand::caputo_low;
    if (order > 1.0 && order < 2.0) return OrderBand::caputo_high;
    throw std::invalid_argument("Caputo order must lie in (0,1) or (1,2), got " + std::to_string(order));
}

namespace detail {

inline void check_samples(const SampleSeq& v, const TimeGrid& g, const char* who) {
    if (v.size() != g.nt + 1)
        throw std::invalid_argument(std::string(who) + ": sample length " + std::to_string(v.size()) +
                                    " does not match grid nodes " + std::to_string(g.nt + 1));
}

inline void check_node(std::size_t n, const TimeGrid& g, const char* who) {
    if (n > g.nt) throw std::out_of_range(std::string(who) + ": node index past end of grid");
}

}  // namespace detail

// L1 value of the left Caputo derivative of order alpha in (0,1) at node n:
// the sample sequence is interpolated piecewise-linearly and the kernel
// integrated exactly on each cell, giving
//   sum_k [(t_n-t_k)^(1-a) - (t_n-t_{k+1})^(1-a)] (v_{k+1}-v_k) / (dt Gamma(2-a)).
// Exactly zero for constant samples. Evaluation at n = 0 is an error, not 0.
inline double caputo_low(const SampleSeq& v, double alpha, const TimeGrid& g, std::size_t n) {
    if (classify_order(alpha, true) != OrderBand::caputo_low)
        throw std::invalid_argument("caputo_low: order must lie in (0,1), got " + std::to_string(alpha));
    detail::check_samples(v, g, "caputo_low");
    detail::check_node(n, g, "caputo_low");
    if (n == 0) throw std::invalid_argument("caputo_low: derivative undefined at the left endpoint");

    const double tn = g.node(n);
    const double e = 1.0 - alpha;
    double acc = 0.0;
    double upper = std::pow(tn, e);  // (t_n - t_0)^(1-a)
    for (std::size_t k = 0; k < n; ++k) {
        const double lower = (k + 1 == n) ? 0.0 : std::pow(tn - g.node(k + 1), e);
        acc += (upper - lower) * (v[k + 1] - v[k]);
        upper = lower;
    }
    return acc / (g.dt * std::tgamma(2.0 - alpha));
}

// Backward-difference rate sequence of u: d_k = (u_k - u_{k-1})/dt for
// k >= 1. The k = 0 entry is the initial rate; callers that know the true
// initial slope (an initial condition) pass it, otherwise the forward
// difference (u_1 - u_0)/dt is used.
inline SampleSeq backward_difference_rates(const SampleSeq& u, const TimeGrid& g,
                                           std::optional<double> initial_rate = std::nullopt) {
    detail::check_samples(u, g, "backward_difference_rates");
    SampleSeq d(g.nt + 1);
    for (std::size_t k = 1; k <= g.nt; ++k) d[k] = (u[k] - u[k - 1]) / g.dt;
    d[0] = initial_rate ? *initial_rate : d[1];
    return d;
}

// Caputo derivative of order beta in (1,2) at node n, realized as the
// order-(beta-1) Caputo derivative of the backward-difference rates. An
// affine sequence has constant rates and yields exactly zero.
inline double caputo_high(const SampleSeq& u, double beta, const TimeGrid& g, std::size_t n,
                          std::optional<double> initial_rate = std::nullopt) {
    if (classify_order(beta, true) != OrderBand::caputo_high)
        throw std::invalid_argument("caputo_high: order must lie in (1,2), got " + std::to_string(beta));
    return caputo_low(backward_difference_rates(u, g, initial_rate), beta - 1.0, g, n);
}

// Riemann-Liouville integral D^{-alpha} v at node n: the kernel
// (t_n - tau)^(alpha-1)/Gamma(alpha) is integrated exactly per cell against
// the cell-average value of v. Returns 0 at n = 0. alpha = 1 reduces to the
// running trapezoid integral.
inline double rl_integral(const SampleSeq& v, double alpha, const TimeGrid& g, std::size_t n) {
    classify_order(alpha, false);
    detail::check_samples(v, g, "rl_integral");
    detail::check_node(n, g, "rl_integral");
    if (n == 0) return 0.0;

    const double tn = g.node(n);
    double acc = 0.0;
    double upper = std::pow(tn, alpha);
    for (std::size_t k = 0; k < n; ++k) {
        const double lower = (k + 1 == n) ? 0.0 : std::pow(tn - g.node(k + 1), alpha);
        acc += (upper - lower) * 0.5 * (v[k] + v[k + 1]);
        upper = lower;
    }
    return acc / std::tgamma(alpha + 1.0);
}

namespace detail {

// Largest series argument for E_{beta,alpha}: the sum grows like
// exp(x^(1/beta)), so x^(1/beta) is capped below the overflow threshold of
// double. Larger arguments are an error for the value-level evaluator;
// the constants chain switches to log space instead.
inline double ml_series_limit(double beta) { return std::pow(690.0, beta); }

constexpr std::size_t ml_term_cap = 10000;

}  // namespace detail

// Partial sums of the two-parameter Mittag-Leffler series
//   E_{beta,alpha}(x) = sum_n x^n / Gamma(beta n + alpha),
// terms formed in log space to avoid overflow of x^n. Summation stops when
// two consecutive terms fall below 1e-16 of the running sum.
inline std::vector<double> mittag_leffler_partial_sums(double beta, double alpha, double x,
                                                       std::size_t max_terms = detail::ml_term_cap) {
    if (!(beta > 0.0) || !(alpha > 0.0))
        throw std::invalid_argument("mittag_leffler: both parameters must be positive");
    if (!(std::abs(x) <= detail::ml_series_limit(beta)))
        throw NumericsError("mittag_leffler: argument too large for series evaluation");

    std::vector<double> sums;
    if (x == 0.0) {
        sums.push_back(1.0 / std::tgamma(alpha));
        return sums;
    }
    const double lax = std::log(std::abs(x));
    double sum = 0.0;
    std::size_t small_streak = 0;
    for (std::size_t nterm = 0; nterm < max_terms; ++nterm) {
        const double nd = static_cast<double>(nterm);
        double term = std::exp(nd * lax - std::lgamma(beta * nd + alpha));
        if (x < 0.0 && (nterm % 2 == 1)) term = -term;
        sum += term;
        sums.push_back(sum);
        if (std::abs(term) <= 1e-16 * std::abs(sum)) {
            if (++small_streak >= 2) return sums;
        } else {
            small_streak = 0;
        }
    }
    throw NumericsError("mittag_leffler: series did not converge within the term cap");
}

// E_{beta,alpha}(x). The one-parameter function E_beta is the alpha = 1 case.
inline double mittag_leffler(double beta, double alpha, double x) {
    return mittag_leffler_partial_sums(beta, alpha, x).back();
}

// log E_{beta,alpha}(exp(log_x)) for log_x possibly far beyond the range of
// double-valued arguments. Uses the series when the argument is small
// enough, otherwise the leading exponential asymptotic
//   E_{beta,alpha}(x) ~ (1/beta) x^((1-alpha)/beta) exp(x^(1/beta)),
// whose dropped corrections are algebraically small against exp(x^(1/beta)).
// Returns +inf when even the logarithm overflows.
inline double log_mittag_leffler(double beta, double alpha, double log_x) {
    if (!(beta > 0.0) || !(alpha > 0.0))
        throw std::invalid_argument("log_mittag_leffler: both parameters must be positive");
    if (log_x == -std::numeric_limits<double>::infinity())
        return -std::lgamma(alpha);
    if (log_x <= std::log(detail::ml_series_limit(beta)))
        return std::log(mittag_leffler(beta, alpha, std::exp(log_x)));
    const double root = std::exp(log_x / beta);  // x^(1/beta), may overflow to inf
    return root + (1.0 - alpha) / beta * log_x - std::log(beta);
}

}  // namespace fphs
