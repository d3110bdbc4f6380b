#pragma once

// Batch front end: the sectioned key-value scenario format, canned
// scenarios, artifact emission, and the manufactured-solution convergence
// study. Parsing is strict: unknown keys, missing keys and malformed values
// are reported with the key name and line number, and nothing is written
// unless the whole document validates.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fphs/csv.hpp"
#include "fphs/energy_audit.hpp"
#include "fphs/inequality_audit.hpp"
#include "fphs/linear_stepper.hpp"
#include "fphs/picard.hpp"
#include "fphs/problem.hpp"

namespace fphs {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_number(const std::string& value, const std::string& key, std::size_t line) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(value, &used);
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": value of '" + key + "' is not a number: " + value);
    }
    if (used != value.size())
        throw ConfigError("line " + std::to_string(line) + ": trailing junk in value of '" + key + "': " + value);
    return x;
}

inline std::size_t parse_count(const std::string& value, const std::string& key, std::size_t line) {
    const double x = parse_number(value, key, line);
    if (x < 0.0 || x != std::floor(x))
        throw ConfigError("line " + std::to_string(line) + ": '" + key + "' must be a nonnegative integer");
    return static_cast<std::size_t>(x);
}

// "catalog_id k=v k=v" -> id + parameter map
inline void parse_catalog_value(const std::string& value, const std::string& key, std::size_t line,
                                std::string& id, ParamMap& params) {
    std::istringstream in(value);
    std::string tok;
    if (!(in >> id)) throw ConfigError("line " + std::to_string(line) + ": '" + key + "' needs a catalog id");
    params.clear();
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("line " + std::to_string(line) + ": bad parameter '" + tok + "' for '" + key +
                              "' (expected name=value)");
        params[tok.substr(0, eq)] = parse_number(tok.substr(eq + 1), key, line);
    }
}

inline std::string catalog_value_text(const std::string& id, const ParamMap& params) {
    std::string s = id;
    for (const auto& [k, v] : params) s += " " + k + "=" + fmt17(v);
    return s;
}

}  // namespace detail

// Parses the sectioned scenario document into a validated ProblemSpec.
inline ProblemSpec parse_config_text(const std::string& text) {
    static const std::map<std::string, std::set<std::string>> layout = {
        {"problem", {"b", "T", "beta", "gamma", "z1", "z2"}},
        {"data", {"phi1", "phi2", "psi1", "psi2"}},
        {"source", {"mode", "id", "delta1", "delta2"}},
        {"discretization", {"nx", "nt"}},
        {"run", {"tol", "max_iter", "output_dir"}},
    };
    static const std::vector<std::pair<std::string, std::string>> required = {
        {"problem", "b"},        {"problem", "T"},    {"problem", "beta"}, {"problem", "gamma"},
        {"problem", "z1"},       {"problem", "z2"},   {"data", "phi1"},    {"data", "phi2"},
        {"data", "psi1"},        {"data", "psi2"},    {"source", "mode"},  {"source", "id"},
        {"discretization", "nx"}, {"discretization", "nt"}, {"run", "tol"}, {"run", "max_iter"},
        {"run", "output_dir"},
    };

    std::map<std::string, std::map<std::string, std::pair<std::string, std::size_t>>> doc;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
            section = line.substr(1, line.size() - 2);
            if (!layout.count(section))
                throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' outside any section");
        if (!layout.at(section).count(key))
            throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "' in [" + section +
                              "]");
        if (doc[section].count(key))
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        doc[section][key] = {value, lineno};
    }
    for (const auto& [sec, key] : required)
        if (!doc.count(sec) || !doc.at(sec).count(key))
            throw ConfigError("missing required key '" + key + "' in section [" + sec + "]");

    auto entry = [&](const std::string& sec, const std::string& key) -> const std::pair<std::string, std::size_t>& {
        return doc.at(sec).at(key);
    };
    auto number = [&](const std::string& sec, const std::string& key) {
        const auto& [value, ln] = entry(sec, key);
        return detail::parse_number(value, key, ln);
    };
    auto profile = [&](const std::string& key) {
        const auto& [value, ln] = entry("data", key);
        ProfileSpec p;
        detail::parse_catalog_value(value, key, ln, p.id, p.params);
        return p;
    };

    auto order_in_band = [&](const std::string& key) {
        const double val = number("problem", key);
        if (!(val > 1.0 && val < 2.0))
            throw ConfigError("line " + std::to_string(entry("problem", key).second) +
                              ": order out of (1,2): " + key);
        return val;
    };

    ProblemSpec spec;
    spec.b = number("problem", "b");
    spec.T = number("problem", "T");
    spec.beta = order_in_band("beta");
    spec.gamma = order_in_band("gamma");
    spec.z1 = number("problem", "z1");
    spec.z2 = number("problem", "z2");
    spec.phi1 = profile("phi1");
    spec.phi2 = profile("phi2");
    spec.psi1 = profile("psi1");
    spec.psi2 = profile("psi2");

    {
        const auto& [value, ln] = entry("source", "mode");
        spec.source.mode = value;
        (void)ln;
    }
    {
        const auto& [value, ln] = entry("source", "id");
        detail::parse_catalog_value(value, "id", ln, spec.source.id, spec.source.params);
    }
    if (doc.at("source").count("delta1")) spec.source.delta1 = number("source", "delta1");
    if (doc.at("source").count("delta2")) spec.source.delta2 = number("source", "delta2");

    {
        const auto& [value, ln] = entry("discretization", "nx");
        spec.nx = detail::parse_count(value, "nx", ln);
    }
    {
        const auto& [value, ln] = entry("discretization", "nt");
        spec.nt = detail::parse_count(value, "nt", ln);
    }
    spec.tol = number("run", "tol");
    {
        const auto& [value, ln] = entry("run", "max_iter");
        spec.max_iter = detail::parse_count(value, "max_iter", ln);
    }
    spec.output_dir = entry("run", "output_dir").first;

    validate_spec(spec);
    return spec;
}

inline ProblemSpec parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

inline std::string emit_config(const ProblemSpec& s) {
    std::string out;
    out += "[problem]\n";
    out += "b = " + fmt17(s.b) + "\n";
    out += "T = " + fmt17(s.T) + "\n";
    out += "beta = " + fmt17(s.beta) + "\n";
    out += "gamma = " + fmt17(s.gamma) + "\n";
    out += "z1 = " + fmt17(s.z1) + "\n";
    out += "z2 = " + fmt17(s.z2) + "\n\n";
    out += "[data]\n";
    out += "phi1 = " + detail::catalog_value_text(s.phi1.id, s.phi1.params) + "\n";
    out += "phi2 = " + detail::catalog_value_text(s.phi2.id, s.phi2.params) + "\n";
    out += "psi1 = " + detail::catalog_value_text(s.psi1.id, s.psi1.params) + "\n";
    out += "psi2 = " + detail::catalog_value_text(s.psi2.id, s.psi2.params) + "\n\n";
    out += "[source]\n";
    out += "mode = " + s.source.mode + "\n";
    out += "id = " + detail::catalog_value_text(s.source.id, s.source.params) + "\n";
    out += "delta1 = " + fmt17(s.source.delta1) + "\n";
    out += "delta2 = " + fmt17(s.source.delta2) + "\n\n";
    out += "[discretization]\n";
    out += "nx = " + std::to_string(s.nx) + "\n";
    out += "nt = " + std::to_string(s.nt) + "\n\n";
    out += "[run]\n";
    out += "tol = " + fmt17(s.tol) + "\n";
    out += "max_iter = " + std::to_string(s.max_iter) + "\n";
    out += "output_dir = " + s.output_dir + "\n";
    return out;
}

// The decoupled special case: no coupling, no sources, two independent
// fractional equations driven by their initial data.
inline ProblemSpec oldroyd_scenario() {
    ProblemSpec s;
    s.b = 1.0;
    s.T = 0.5;
    s.beta = 1.5;
    s.gamma = 1.5;
    s.z1 = 0.0;
    s.z2 = 0.0;
    s.phi1 = {"admissible_mode", {{"k", 1.0}, {"amp", 1.0}}};
    s.phi2 = {"zero", {}};
    s.psi1 = {"admissible_mode", {{"k", 3.0}, {"amp", 0.5}}};
    s.psi2 = {"zero", {}};
    s.source = {"linear", "zero", 0.0, 0.0, {}};
    s.nx = 64;
    s.nt = 256;
    s.tol = 1e-10;
    s.max_iter = 20;
    s.output_dir = "out_oldroyd";
    return s;
}

namespace detail {

inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    CsvWriter w(path, {"step", "t", "x", "u", "v"});
    for (std::size_t n = 0; n <= traj.tgrid.nt; ++n) {
        const std::string t = fmt17(traj.tgrid.node(n));
        for (std::size_t i = 0; i < traj.grid.nx; ++i)
            w.row({std::to_string(n), t, fmt17(traj.grid.center(i)), fmt17(traj.u[n][i]),
                   fmt17(traj.v[n][i])});
    }
}

inline void write_norms_csv(const Trajectory& traj, const DiscreteProblem& p, const std::string& path) {
    CsvWriter w(path, {"step", "t", "norm_u_h1rho", "norm_v_h1rho", "caputo_u", "caputo_v"});
    const Grid& g = traj.grid;
    const TimeGrid& tg = traj.tgrid;
    const CaputoHistory conv_u(p.beta), conv_v(p.gamma);
    const double head_u = caputo_head_weight(p.beta, tg.dt), head_v = caputo_head_weight(p.gamma, tg.dt);
    Field cap(g.nx);
    for (std::size_t n = 0; n <= tg.nt; ++n) {
        double cu = 0.0, cv = 0.0;
        if (n >= 1) {
            conv_u.accumulate(traj.du, tg, n, cap);
            for (std::size_t i = 0; i < g.nx; ++i)
                cap[i] += head_u * tg.dt * (traj.du[n][i] - traj.du[n - 1][i]);
            cu = norm_rho(cap, g);
            conv_v.accumulate(traj.dv, tg, n, cap);
            for (std::size_t i = 0; i < g.nx; ++i)
                cap[i] += head_v * tg.dt * (traj.dv[n][i] - traj.dv[n - 1][i]);
            cv = norm_rho(cap, g);
        }
        w.row({std::to_string(n), fmt17(tg.node(n)), fmt17(h1rho(traj.u[n], g)), fmt17(h1rho(traj.v[n], g)),
               fmt17(cu), fmt17(cv)});
    }
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace detail

struct RunOutcome {
    int exit_code = 0;  // 0 success, 1 numerical failure, 2 configuration error
    std::string message;
    std::vector<std::string> artifacts;
};

// Dispatches a parsed scenario: solves, audits, writes the artifact set
// into the configured output directory. Numerical failures yield exit code
// 1 with whatever diagnostics were computed.
inline RunOutcome run_scenario(const ProblemSpec& spec) {
    RunOutcome out;
    IngestResult in = ingest(spec);
    for (const std::string& wmsg : in.warnings) out.message += "warning: " + wmsg + "\n";

    namespace fs = std::filesystem;
    fs::create_directories(spec.output_dir);
    auto emit = [&](const std::string& name) {
        out.artifacts.push_back((fs::path(spec.output_dir) / name).string());
        return out.artifacts.back();
    };

    const ConstantsParams cp{spec.b, spec.T, spec.beta, spec.gamma, spec.z1, spec.z2, spec.source.delta1,
                             spec.source.delta2};
    const Constants cs = constants(cp);
    cs.write_csv(emit("constants.csv"));

    try {
        if (spec.source.mode == "linear") {
            const Trajectory traj = solve_linear(in.problem, sample_sources(linear_sources(spec),
                                                                            in.problem.grid, in.problem.tgrid));
            detail::write_trajectory_csv(traj, emit("trajectory.csv"));
            detail::write_norms_csv(traj, in.problem, emit("norms.csv"));
            const EnergyReport er = audit_energy(traj, in.problem, cs);
            er.write_csv(emit("energy.csv"));
            detail::write_text(emit("energy.txt"), er.text());
            if (!er.pass) {
                out.exit_code = 1;
                out.message += "energy bound audit failed\n";
            }
            return out;
        }

        const NonlinearSource src = make_nonlinear_source(spec.source);
        const Trajectory hom = solve_homogeneous(in.problem);
        PicardResult pr = picard_iterate(in.problem, src, hom, spec.tol, spec.max_iter);
        pr.report.write_csv(emit("picard.csv"));
        detail::write_text(emit("picard.txt"), pr.report.verdict());
        const EnergyReport er = audit_energy(hom, in.problem, cs);
        er.write_csv(emit("energy.csv"));
        detail::write_text(emit("energy.txt"), er.text());
        if (!pr.report.converged) {
            out.exit_code = 1;
            out.message += pr.report.diverged ? "picard iteration diverged\n" : "picard iteration did not converge\n";
            return out;
        }
        const Trajectory composed = compose_solution(pr.iterate, hom);
        detail::write_trajectory_csv(composed, emit("trajectory.csv"));
        detail::write_norms_csv(composed, in.problem, emit("norms.csv"));
        return out;
    } catch (const NumericsError& e) {
        out.exit_code = 1;
        out.message += std::string(e.what()) + "\n";
        return out;
    }
}

// Scenario-level inequality and constants audit: the ensemble runs on the
// scenario's grid sizes at each of the canonical domain lengths.
inline RunOutcome run_audit(const ProblemSpec& spec, std::size_t draws = 1000, unsigned seed = 12345) {
    RunOutcome out;
    IngestResult in = ingest(spec);

    namespace fs = std::filesystem;
    fs::create_directories(spec.output_dir);
    auto emit = [&](const std::string& name) {
        out.artifacts.push_back((fs::path(spec.output_dir) / name).string());
        return out.artifacts.back();
    };

    const ConstantsParams cp{spec.b, spec.T, spec.beta, spec.gamma, spec.z1, spec.z2, spec.source.delta1,
                             spec.source.delta2};
    constants(cp).write_csv(emit("constants.csv"));

    std::mt19937 rng(seed);
    const InequalityAuditReport ir = audit_inequalities(in.problem.grid, in.problem.tgrid, draws, rng);
    ir.write_csv(emit("inequalities.csv"));
    if (!ir.pass()) {
        out.exit_code = 1;
        out.message += "inequality ensemble reported violations\n";
    }

    if (spec.source.mode == "linear") {
        try {
            const Trajectory traj = solve_linear(in.problem, sample_sources(linear_sources(spec),
                                                                            in.problem.grid, in.problem.tgrid));
            const EnergyReport er = audit_energy(traj, in.problem, constants(cp));
            er.write_csv(emit("energy.csv"));
            detail::write_text(emit("energy.txt"), er.text());
            if (!er.pass) {
                out.exit_code = 1;
                out.message += "energy bound audit failed\n";
            }
        } catch (const NumericsError& e) {
            out.exit_code = 1;
            out.message += std::string(e.what()) + "\n";
        }
    }
    return out;
}

struct ConvergenceRow {
    std::size_t nx, nt;
    double error;
    double order;  // log2(e_prev/e_this); NaN on the first row
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    bool decreasing = true;

    std::string text() const {
        std::string s = "level  nx     nt      error                  order\n";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "%-6zu %-6zu %-7zu %-22.15g %s\n", i, rows[i].nx, rows[i].nt,
                          rows[i].error, i == 0 ? "-" : fmt17(rows[i].order).c_str());
            s += buf;
        }
        return s;
    }

    void write_csv(const std::string& path) const {
        CsvWriter w(path, {"level", "nx", "nt", "error", "order"});
        for (std::size_t i = 0; i < rows.size(); ++i)
            w.row({std::to_string(i), std::to_string(rows[i].nx), std::to_string(rows[i].nt),
                   fmt17(rows[i].error), fmt17(rows[i].order)});
    }
};

// Space-time weighted L2 error of a trajectory against the manufactured
// exact pair.
inline double manufactured_error(const Trajectory& traj, const ManufacturedCase& mc) {
    const Grid& g = traj.grid;
    const TimeGrid& tg = traj.tgrid;
    std::vector<double> usq(tg.nt + 1), vsq(tg.nt + 1);
    Field diff(g.nx);
    for (std::size_t n = 0; n <= tg.nt; ++n) {
        const double t = tg.node(n);
        for (std::size_t i = 0; i < g.nx; ++i) diff[i] = traj.u[n][i] - mc.exact_u(g.center(i), t);
        usq[n] = norm_rho_sq(diff, g);
        for (std::size_t i = 0; i < g.nx; ++i) diff[i] = traj.v[n][i] - mc.exact_v(g.center(i), t);
        vsq[n] = norm_rho_sq(diff, g);
    }
    return std::sqrt(trapezoid_time(usq, tg) + trapezoid_time(vsq, tg));
}

// Simultaneous (h, dt)-halving study on the manufactured case: `levels`
// halvings, so levels+1 solves. The error contract (strict decrease) is the
// caller's to act on via `decreasing`.
inline ConvergenceTable convergence_study(const ProblemSpec& base, std::size_t levels) {
    if (base.source.mode != "linear" || base.source.id != "manufactured_quadratic")
        throw ConfigError("convergence_study: base scenario must use the manufactured_quadratic source");
    if (base.phi1.id != "admissible_mode" || base.phi2.id != "zero" || base.psi1.id != "zero" ||
        base.psi2.id != "zero")
        throw ConfigError("convergence_study: manufactured case needs phi1 = admissible_mode k=1 and "
                          "zero phi2, psi1, psi2");
    if (param_or(base.phi1.params, "k", 1.0) != 1.0 || param_or(base.phi1.params, "amp", 1.0) != 1.0)
        throw ConfigError("convergence_study: manufactured case needs phi1 = admissible_mode k=1 amp=1");

    const ManufacturedCase mc{base.b, base.beta, base.gamma, base.z1, base.z2};
    ConvergenceTable table;
    for (std::size_t level = 0; level <= levels; ++level) {
        ProblemSpec s = base;
        s.nx = base.nx << level;
        s.nt = base.nt << level;
        const Trajectory traj = solve_linear(s);
        ConvergenceRow row{s.nx, s.nt, manufactured_error(traj, mc),
                           std::numeric_limits<double>::quiet_NaN()};
        if (!table.rows.empty()) {
            row.order = std::log2(table.rows.back().error / row.error);
            if (!(row.error < table.rows.back().error)) table.decreasing = false;
        }
        table.rows.push_back(row);
    }
    return table;
}

}  // namespace fphs
