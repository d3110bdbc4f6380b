#pragma once

// Problem description: geometry, fractional orders, couplings, the catalogs
// of initial profiles and sources, and ingestion of a ProblemSpec into
// discrete data. Catalog profiles satisfy the Neumann condition at x = b
// analytically; the weighted-mean constraint is enforced at ingestion by
// projection, with a warning recorded whenever the correction is
// non-trivial.

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "fphs/frac_ops.hpp"
#include "fphs/weighted_space.hpp"

namespace fphs {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using ParamMap = std::map<std::string, double>;

inline double param_or(const ParamMap& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

struct ProfileSpec {
    std::string id = "zero";
    ParamMap params;

    bool operator==(const ProfileSpec&) const = default;
};

struct SourceSpec {
    std::string mode = "linear";  // linear | nonlinear
    std::string id = "zero";
    double delta1 = 0.0, delta2 = 0.0;
    ParamMap params;

    bool operator==(const SourceSpec&) const = default;
};

// Full description of one problem instance.
struct ProblemSpec {
    double b = 1.0, T = 1.0;
    double beta = 1.5, gamma = 1.5;
    double z1 = 0.0, z2 = 0.0;
    ProfileSpec phi1, phi2, psi1, psi2;
    SourceSpec source;
    std::size_t nx = 64, nt = 256;
    double tol = 1e-10;
    std::size_t max_iter = 20;
    std::string output_dir = "out";

    bool operator==(const ProblemSpec&) const = default;
};

// The cosine mode with its mean-balancing constant: zero weighted mean and
// zero slope at both faces for odd k.
inline double admissible_mode(int k, double x, double b) {
    const double kpi = static_cast<double>(k) * std::numbers::pi;
    return 4.0 / (kpi * kpi) + std::cos(kpi * x / b);
}

namespace detail {

inline int odd_mode_number(const ParamMap& p, const char* who) {
    const double kd = param_or(p, "k", 1.0);
    const int k = static_cast<int>(kd);
    if (k < 1 || static_cast<double>(k) != kd || k % 2 == 0)
        throw ConfigError(std::string(who) + ": mode number k must be a positive odd integer");
    return k;
}

inline void require_params(const ParamMap& p, std::initializer_list<const char*> allowed,
                           const std::string& who) {
    for (const auto& [key, value] : p) {
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) throw ConfigError(who + ": unknown parameter '" + key + "'");
    }
}

}  // namespace detail

inline void validate_profile(const ProfileSpec& p) {
    if (p.id == "zero") {
        detail::require_params(p.params, {}, "zero profile");
        return;
    }
    if (p.id == "admissible_mode") {
        detail::require_params(p.params, {"k", "amp"}, "admissible_mode");
        detail::odd_mode_number(p.params, "admissible_mode");
        return;
    }
    if (p.id == "poly_projected") {  // any cubic is admissible after the slope fix
        detail::require_params(p.params, {"c0", "c1", "c2", "c3"}, "poly_projected");
        return;
    }
    throw ConfigError("unknown profile catalog id: " + p.id);
}

inline double profile_value(const ProfileSpec& p, double x, double b) {
    if (p.id == "zero") return 0.0;
    if (p.id == "admissible_mode") {
        const int k = detail::odd_mode_number(p.params, "admissible_mode");
        return param_or(p.params, "amp", 1.0) * admissible_mode(k, x, b);
    }
    if (p.id == "poly_projected") {
        const double c0 = param_or(p.params, "c0", 0.0);
        const double c1 = param_or(p.params, "c1", 0.0);
        const double c2 = param_or(p.params, "c2", 0.0);
        const double c3 = param_or(p.params, "c3", 0.0);
        const double slope_b = c1 + 2.0 * c2 * b + 3.0 * c3 * b * b;
        // subtract slope_b * x^2/(2b): kills the slope at b, keeps slope 0 at 0
        return c0 + c1 * x + c2 * x * x + c3 * x * x * x - slope_b * x * x / (2.0 * b);
    }
    throw ConfigError("unknown profile catalog id: " + p.id);
}

// Analytic slope of a catalog profile at the outer boundary. Every catalog
// entry is built to make this vanish; the check in ingest() guards future
// catalog additions.
inline double profile_slope_at_b(const ProfileSpec& p, double b) {
    if (p.id == "zero") return 0.0;
    if (p.id == "admissible_mode") {
        const int k = detail::odd_mode_number(p.params, "admissible_mode");
        const double kpi = static_cast<double>(k) * std::numbers::pi;
        return -param_or(p.params, "amp", 1.0) * kpi / b * std::sin(kpi);
    }
    // the x^2/(2b) correction cancels the cubic's slope at b identically
    if (p.id == "poly_projected") return 0.0;
    throw ConfigError("unknown profile catalog id: " + p.id);
}

struct LinearSources {
    std::function<double(double, double)> f, g;  // (x, t)
};

// Manufactured target u*(x,t) = (1+t^2) p(x) with p the k = 1 admissible
// mode and v* = 0; the sources are derived in closed form, with
// d^beta t^2 = 2 t^(2-beta) / Gamma(3-beta).
struct ManufacturedCase {
    double b, beta, gamma, z1, z2;

    double p(double x) const { return admissible_mode(1, x, b); }
    double lap_p(double x) const {
        const double pi = std::numbers::pi;
        return -pi / (b * x) * std::sin(pi * x / b) - (pi / b) * (pi / b) * std::cos(pi * x / b);
    }
    double exact_u(double x, double t) const { return (1.0 + t * t) * p(x); }
    double exact_v(double, double) const { return 0.0; }
    double f(double x, double t) const {
        const double cap = 2.0 * std::pow(t, 2.0 - beta) / std::tgamma(3.0 - beta);
        return p(x) * cap - (1.0 + t * t) * lap_p(x) - 2.0 * t * lap_p(x) + 2.0 * t * p(x);
    }
    double g(double x, double t) const { return z2 * exact_u(x, t); }
};

inline void validate_linear_source(const SourceSpec& s) {
    if (s.id == "zero" || s.id == "manufactured_quadratic") {
        detail::require_params(s.params, {}, s.id + " source");
        return;
    }
    if (s.id == "modal") {
        detail::require_params(s.params, {"fk", "fa0", "fa1", "fa2", "gk", "ga0", "ga1", "ga2"},
                               "modal source");
        detail::odd_mode_number({{"k", param_or(s.params, "fk", 1.0)}}, "modal source (fk)");
        detail::odd_mode_number({{"k", param_or(s.params, "gk", 1.0)}}, "modal source (gk)");
        return;
    }
    throw ConfigError("unknown linear source catalog id: " + s.id);
}

inline LinearSources linear_sources(const ProblemSpec& spec) {
    const SourceSpec& s = spec.source;
    if (s.mode != "linear") throw ConfigError("linear_sources: source mode is not linear");
    validate_linear_source(s);
    if (s.id == "zero") {
        return {[](double, double) { return 0.0; }, [](double, double) { return 0.0; }};
    }
    if (s.id == "manufactured_quadratic") {
        const ManufacturedCase mc{spec.b, spec.beta, spec.gamma, spec.z1, spec.z2};
        return {[mc](double x, double t) { return mc.f(x, t); },
                [mc](double x, double t) { return mc.g(x, t); }};
    }
    // modal: separable polynomial-in-time times an admissible mode
    const double b = spec.b;
    const int fk = static_cast<int>(param_or(s.params, "fk", 1.0));
    const int gk = static_cast<int>(param_or(s.params, "gk", 1.0));
    const double fa0 = param_or(s.params, "fa0", 0.0), fa1 = param_or(s.params, "fa1", 0.0),
                 fa2 = param_or(s.params, "fa2", 0.0);
    const double ga0 = param_or(s.params, "ga0", 0.0), ga1 = param_or(s.params, "ga1", 0.0),
                 ga2 = param_or(s.params, "ga2", 0.0);
    return {[=](double x, double t) { return (fa0 + fa1 * t + fa2 * t * t) * admissible_mode(fk, x, b); },
            [=](double x, double t) { return (ga0 + ga1 * t + ga2 * t * t) * admissible_mode(gk, x, b); }};
}

inline void validate_spec(const ProblemSpec& s) {
    if (!(s.b > 0.0) || !std::isfinite(s.b)) throw ConfigError("b must be positive");
    if (!(s.T > 0.0) || !std::isfinite(s.T)) throw ConfigError("T must be positive");
    if (!(s.beta > 1.0 && s.beta < 2.0)) throw ConfigError("order out of (1,2): beta");
    if (!(s.gamma > 1.0 && s.gamma < 2.0)) throw ConfigError("order out of (1,2): gamma");
    if (s.z1 < 0.0 || s.z2 < 0.0) throw ConfigError("couplings z1, z2 must be nonnegative");
    if (s.nx < 3) throw ConfigError("nx must be at least 3");
    if (s.nt < 1) throw ConfigError("nt must be at least 1");
    if (s.nx > (1u << 16)) throw ConfigError("nx beyond the desk-scale cap 65536");
    if (s.nt > (1u << 20)) throw ConfigError("nt beyond the desk-scale cap 1048576");
    if (!(s.tol > 0.0)) throw ConfigError("tol must be positive");
    if (s.max_iter < 1) throw ConfigError("max_iter must be at least 1");
    validate_profile(s.phi1);
    validate_profile(s.phi2);
    validate_profile(s.psi1);
    validate_profile(s.psi2);
    if (s.source.mode != "linear" && s.source.mode != "nonlinear")
        throw ConfigError("source mode must be linear or nonlinear");
    if (s.source.mode == "linear") validate_linear_source(s.source);
    if (s.source.delta1 < 0.0 || s.source.delta2 < 0.0)
        throw ConfigError("Lipschitz constants delta1, delta2 must be nonnegative");
}

// Discrete data the stepper consumes: grids plus the four projected
// initial fields.
struct DiscreteProblem {
    Grid grid;
    TimeGrid tgrid;
    double beta, gamma, z1, z2;
    Field phi1, phi2, psi1, psi2;
};

struct IngestResult {
    DiscreteProblem problem;
    std::vector<std::string> warnings;  // one entry per nontrivially projected profile
};

inline IngestResult ingest(const ProblemSpec& spec) {
    validate_spec(spec);
    Grid grid(spec.b, spec.nx);
    TimeGrid tgrid(spec.T, spec.nt);

    auto sample = [&](const ProfileSpec& p) {
        Field f(grid.nx);
        for (std::size_t i = 0; i < grid.nx; ++i) f[i] = profile_value(p, grid.center(i), spec.b);
        return f;
    };

    IngestResult out{{grid, tgrid, spec.beta, spec.gamma, spec.z1, spec.z2, {}, {}, {}, {}}, {}};
    const char* names[4] = {"phi1", "phi2", "psi1", "psi2"};
    const ProfileSpec* specs[4] = {&spec.phi1, &spec.phi2, &spec.psi1, &spec.psi2};
    Field* dest[4] = {&out.problem.phi1, &out.problem.phi2, &out.problem.psi1, &out.problem.psi2};
    // Catalog profiles satisfy the integral condition analytically, so only
    // quadrature dust (O(h^2)) remains after sampling; anything above that
    // means the data genuinely violates the constraint and the projection
    // is flagged.
    const double quad_floor = grid.h * grid.h;
    for (int j = 0; j < 4; ++j) {
        const double slope = profile_slope_at_b(*specs[j], spec.b);
        if (std::abs(slope) > 1e-12 * (1.0 + std::abs(profile_value(*specs[j], spec.b, spec.b))))
            throw ConfigError(std::string(names[j]) + ": profile violates the Neumann condition at b");
        Field raw = sample(*specs[j]);
        const double defect = weighted_mean_defect(raw, grid);
        Field projected = weighted_mean_project(raw, grid);
        if (std::abs(defect) > quad_floor * (1.0 + norm_rho(raw, grid)))
            out.warnings.push_back(std::string(names[j]) + ": weighted mean " + std::to_string(defect) +
                                   " projected out");
        *dest[j] = std::move(projected);
    }
    return out;
}

}  // namespace fphs
