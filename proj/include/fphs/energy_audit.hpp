#pragma once

// Evaluation of the named constants of the a priori energy bound, the
// fractional solution norms, the bound audit itself, and the discrete
// Gronwall-type lemma checks. The constant chain explodes doubly
// exponentially in T, so every constant carries both its value (which may
// overflow to inf) and its natural logarithm; the bound is compared in log
// space whenever the value is gone, and a documented fallback kicks in when
// even the logarithm overflows.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "fphs/csv.hpp"
#include "fphs/frac_ops.hpp"
#include "fphs/linear_stepper.hpp"

namespace fphs {

struct LogValue {
    double value = 0.0;
    double log_value = -std::numeric_limits<double>::infinity();

    static LogValue from_value(double v) { return {v, std::log(v)}; }
    static LogValue from_log(double l) { return {std::exp(l), l}; }
    bool finite_value() const { return std::isfinite(value); }
    bool finite_log() const { return std::isfinite(log_value); }
};

namespace detail {

inline double logsumexp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b), lo = std::min(a, b);
    if (!std::isfinite(hi)) return hi;
    return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace detail

struct ConstantsParams {
    double b, T, beta, gamma, z1, z2;
    double delta1 = 0.0, delta2 = 0.0;
};

// Every named constant of the a priori bound and of the contraction
// estimate, evaluated in dependency order. `astronomical` flags the point
// where even log-space evaluation overflowed; the partial results up to
// that point are still meaningful.
struct Constants {
    LogValue Dstar, Dstarstar, chi, chi_star, Y, Ystar, Ystarstar, M, Kstar;
    bool value_overflow = false;
    bool astronomical = false;

    std::vector<std::pair<std::string, LogValue>> named() const {
        return {{"Dstar", Dstar},   {"Dstarstar", Dstarstar}, {"chi", chi},
                {"chi_star", chi_star}, {"Y", Y},             {"Ystar", Ystar},
                {"Ystarstar", Ystarstar}, {"M", M},           {"Kstar", Kstar}};
    }

    void write_csv(const std::string& path) const {
        CsvWriter w(path, {"name", "value", "log_value"});
        for (const auto& [name, lv] : named()) w.row({name, fmt17(lv.value), fmt17(lv.log_value)});
    }
};

namespace detail {

// One band term of the two-band constant: Gamma(mu) E_{mu,mu}(chi T^mu)
// max{1, T^mu/(mu Gamma(mu))} with mu = order - 1, in log form.
inline double log_band_term(double order, double T, double log_chi) {
    const double mu = order - 1.0;
    const double log_arg = log_chi + mu * std::log(T);
    const double log_e = log_mittag_leffler(mu, mu, log_arg);
    const double band_max = std::max(1.0, std::pow(T, mu) / (mu * std::tgamma(mu)));
    return std::lgamma(mu) + log_e + std::log(band_max);
}

}  // namespace detail

inline Constants constants(const ConstantsParams& p) {
    if (!(p.b > 0.0) || !(p.T > 0.0)) throw std::invalid_argument("constants: b and T must be positive");
    if (!(p.beta > 1.0 && p.beta < 2.0) || !(p.gamma > 1.0 && p.gamma < 2.0))
        throw std::invalid_argument("constants: orders must lie in (1,2)");
    const double b = p.b, T = p.T;

    Constants c;
    const double b2 = b * b, b4 = b2 * b2, b6 = b4 * b2;
    c.Dstar = LogValue::from_value(
        2.0 * std::max({3.0, b6 / 8.0 + 1.5, (p.z1 * p.z1 + p.z2 * p.z2) * b4 / 8.0 + 2.5}));

    auto order_factor = [&](double order) {
        return std::pow(T, 2.0 - order) / ((2.0 - order) * std::tgamma(2.0 - order));
    };
    c.Dstarstar = LogValue::from_value(
        c.Dstar.value * std::max({1.0, b4 / 2.0, order_factor(p.beta), order_factor(p.gamma)}));

    // chi = D** (1 + D** e^{D** T}) in log form, exact in both regimes
    const double log_dss = c.Dstarstar.log_value;
    c.chi = LogValue::from_log(log_dss + detail::logsumexp(0.0, log_dss + c.Dstarstar.value * T));

    const double term_beta = detail::log_band_term(p.beta, T, c.chi.log_value);
    const double term_gamma = detail::log_band_term(p.gamma, T, c.chi.log_value);
    c.chi_star = LogValue::from_log(detail::logsumexp(term_beta, term_gamma));

    const double growth =
        std::max(std::pow(T, p.beta - 1.0) / std::tgamma(p.beta), std::pow(T, p.gamma - 1.0) / std::tgamma(p.gamma));
    c.Y = LogValue::from_log(c.chi_star.log_value + c.chi.log_value + std::log(growth));
    c.Ystar = LogValue::from_log(c.Y.log_value - std::log(std::min(1.0, b2 / 4.0)));
    c.Ystarstar = LogValue::from_log(std::max(0.0, c.Ystar.log_value));

    // M = Y** e^{T Y**}: needs the value of Y**; once that is gone the
    // logarithm of M is gone too.
    if (c.Ystarstar.finite_value() && std::isfinite(T * c.Ystarstar.value))
        c.M = LogValue::from_log(c.Ystarstar.log_value + T * c.Ystarstar.value);
    else
        c.M = LogValue::from_log(std::numeric_limits<double>::infinity());

    const double dsq = p.delta1 * p.delta1 + p.delta2 * p.delta2;
    if (dsq == 0.0) {
        c.Kstar = LogValue{0.0, -std::numeric_limits<double>::infinity()};
    } else if (c.M.finite_value()) {
        // value-space product: scaling delta by a power of two scales K*
        // exactly, which the formula promises
        c.Kstar.value = 4.0 * c.M.value * T * dsq;
        c.Kstar.log_value = std::log(c.Kstar.value);
    } else {
        c.Kstar = LogValue::from_log(std::log(4.0) + c.M.log_value + std::log(T) + std::log(dsq));
    }

    for (const auto& [name, lv] : c.named()) {
        if (!lv.finite_value()) c.value_overflow = true;
    }
    c.astronomical = !c.M.finite_log();
    return c;
}

enum class Component { u, v };

// Squared fractional solution norm: the time-L2 of the per-node weighted H1
// norm of the field plus the same of its Caputo derivative of the given
// order, the latter rebuilt from the stored rate history (trapezoid in
// time; the Caputo term vanishes at t = 0).
inline double wbeta_norm_sq(const Trajectory& traj, double order, Component comp) {
    if (classify_order(order, true) != OrderBand::caputo_high)
        throw std::invalid_argument("wbeta_norm_sq: order must lie in (1,2)");
    const auto& field = comp == Component::u ? traj.u : traj.v;
    const auto& rates = comp == Component::u ? traj.du : traj.dv;
    if (field.size() != traj.tgrid.nt + 1) throw std::invalid_argument("wbeta_norm_sq: incomplete trajectory");

    const Grid& g = traj.grid;
    const TimeGrid& tg = traj.tgrid;
    const detail::CaputoHistory conv(order);
    const double head = caputo_head_weight(order, tg.dt);

    std::vector<double> field_sq(tg.nt + 1), cap_sq(tg.nt + 1, 0.0);
    Field cap(g.nx);
    for (std::size_t n = 0; n <= tg.nt; ++n) {
        field_sq[n] = h1rho_sq(field[n], g);
        if (n == 0) continue;
        conv.accumulate(rates, tg, n, cap);
        for (std::size_t i = 0; i < g.nx; ++i)
            cap[i] += head * tg.dt * (rates[n][i] - rates[n - 1][i]);
        cap_sq[n] = h1rho_sq(cap, g);
    }
    return trapezoid_time(field_sq, tg) + trapezoid_time(cap_sq, tg);
}

inline double wbeta_norm(const Trajectory& traj, double order, Component comp) {
    return std::sqrt(wbeta_norm_sq(traj, order, comp));
}

struct EnergyReport {
    double lhs = 0.0, rhs_data = 0.0;
    double log_M = 0.0;
    double ratio = std::numeric_limits<double>::quiet_NaN();  // lhs / (M rhs), when representable
    enum class Mode { direct, log_space, fallback } mode = Mode::direct;
    bool pass = false;

    static const char* mode_name(Mode m) {
        switch (m) {
            case Mode::direct: return "direct";
            case Mode::log_space: return "log_space";
            default: return "fallback";
        }
    }

    void write_csv(const std::string& path) const {
        CsvWriter w(path, {"name", "value"});
        w.row({"lhs", fmt17(lhs)});
        w.row({"rhs_data", fmt17(rhs_data)});
        w.row({"log_M", fmt17(log_M)});
        w.row({"ratio", fmt17(ratio)});
        w.row({"mode", mode_name(mode)});
        w.row({"pass", pass ? "1" : "0"});
    }

    std::string text() const {
        std::string s;
        s += "energy bound audit (" + std::string(mode_name(mode)) + " comparison)\n";
        s += "  lhs composite norm : " + fmt17(lhs) + "\n";
        s += "  rhs data norm      : " + fmt17(rhs_data) + "\n";
        s += "  log M              : " + fmt17(log_M) + "\n";
        s += "  ratio lhs/(M rhs)  : " + fmt17(ratio) + "\n";
        s += std::string("  verdict            : ") + (pass ? "PASS" : "FAIL") + "\n";
        return s;
    }
};

// Checks the discrete a priori bound on a computed trajectory: composite
// left norm against M times the data norm. When M overflows double the
// comparison moves to log space; when even log M overflows the report
// falls back to the documented sanity check lhs <= 1e6 rhs.
inline EnergyReport audit_energy(const Trajectory& traj, const DiscreteProblem& p, const Constants& c) {
    const Grid& g = traj.grid;
    const TimeGrid& tg = traj.tgrid;

    EnergyReport r;
    double sup_u = 0.0, sup_v = 0.0;
    for (std::size_t n = 0; n <= tg.nt; ++n) {
        sup_u = std::max(sup_u, h1rho_sq(traj.u[n], g));
        sup_v = std::max(sup_v, h1rho_sq(traj.v[n], g));
    }
    r.lhs = wbeta_norm_sq(traj, p.beta, Component::u) + wbeta_norm_sq(traj, p.gamma, Component::v) +
            sup_u + sup_v;

    std::vector<double> fsq(tg.nt + 1), gsq(tg.nt + 1);
    for (std::size_t n = 0; n <= tg.nt; ++n) {
        fsq[n] = norm_rho_sq(traj.sources.f[n], g);
        gsq[n] = norm_rho_sq(traj.sources.g[n], g);
    }
    r.rhs_data = trapezoid_time(fsq, tg) + trapezoid_time(gsq, tg) + h1rho_sq(traj.u[0], g) +
                 h1rho_sq(traj.v[0], g) + h1rho_sq(traj.du[0], g) + h1rho_sq(traj.dv[0], g);

    r.log_M = c.M.log_value;
    if (r.rhs_data == 0.0) {
        r.ratio = r.lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        r.pass = r.lhs == 0.0;
        r.mode = EnergyReport::Mode::direct;
        return r;
    }
    if (c.M.finite_value()) {
        r.mode = EnergyReport::Mode::direct;
        r.ratio = r.lhs / (c.M.value * r.rhs_data);
        r.pass = r.ratio <= 1.0 + 1e-9;
    } else if (c.M.finite_log()) {
        r.mode = EnergyReport::Mode::log_space;
        const double log_gap = std::log(r.lhs) - (c.M.log_value + std::log(r.rhs_data));
        r.ratio = std::exp(log_gap);
        r.pass = log_gap <= 1e-9;
    } else {
        r.mode = EnergyReport::Mode::fallback;
        r.pass = r.lhs <= 1e6 * r.rhs_data;
    }
    return r;
}

struct GronwallReport {
    bool hypothesis_ok = true;
    std::size_t first_hypothesis_violation = 0;
    bool conclusion_ok = true;
    double worst_margin = std::numeric_limits<double>::infinity();

    bool pass() const { return hypothesis_ok && conclusion_ok; }
};

// Discrete check of the fractional Gronwall lemma: whenever the sampled
// function satisfies caputo(P) <= C P + k at every node, it must obey
//   P(t) <= P(0) E_b(C t^b) + Gamma(b) E_{b,b}(C t^b) D^{-b} k(t)
// within a slack proportional to dt. beta close to 1 recovers the classical
// Gronwall-Bellman statement.
inline GronwallReport audit_frac_gronwall(const SampleSeq& P, double C, const SampleSeq& k, double beta,
                                          const TimeGrid& g, double slack_factor = 10.0) {
    if (classify_order(beta, true) != OrderBand::caputo_low)
        throw std::invalid_argument("audit_frac_gronwall: order must lie in (0,1)");
    detail::check_samples(P, g, "audit_frac_gronwall");
    detail::check_samples(k, g, "audit_frac_gronwall");
    if (!std::isfinite(P[0])) throw std::invalid_argument("audit_frac_gronwall: P(0) must be finite");
    if (!(C >= 0.0)) throw std::invalid_argument("audit_frac_gronwall: C must be nonnegative");
    for (double pv : P)
        if (!std::isfinite(pv)) throw std::invalid_argument("audit_frac_gronwall: P has nonfinite samples");
    for (double kv : k)
        if (!(kv >= 0.0)) throw std::invalid_argument("audit_frac_gronwall: k must be nonnegative and finite");

    GronwallReport r;
    double scale = 0.0;
    for (std::size_t n = 0; n <= g.nt; ++n) scale = std::max(scale, std::abs(P[n]));
    for (double kv : k) scale = std::max(scale, kv);
    scale = std::max(scale, 1e-300);

    for (std::size_t n = 1; n <= g.nt; ++n) {
        if (caputo_low(P, beta, g, n) > C * P[n] + k[n] + 1e-10 * scale) {
            r.hypothesis_ok = false;
            r.first_hypothesis_violation = n;
            break;
        }
    }

    const double tol = slack_factor * g.dt * scale;
    for (std::size_t n = 0; n <= g.nt; ++n) {
        const double arg = C * std::pow(g.node(n), beta);
        const double rhs = P[0] * mittag_leffler(beta, 1.0, arg) +
                           std::tgamma(beta) * mittag_leffler(beta, beta, arg) * rl_integral(k, beta, g, n);
        const double margin = (rhs + tol - P[n]) / scale;
        r.worst_margin = std::min(r.worst_margin, margin);
        if (margin < 0.0) r.conclusion_ok = false;
    }
    return r;
}

}  // namespace fphs
