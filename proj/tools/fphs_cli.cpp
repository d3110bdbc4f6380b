// Batch front end. One scenario per invocation; all inputs come from the
// config document. Exit codes: 0 success, 1 numerical failure, 2
// configuration error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fphs/scenario.hpp"

namespace {

int finish(const fphs::RunOutcome& out) {
    if (!out.message.empty()) std::cerr << out.message;
    for (const std::string& a : out.artifacts) std::cout << "wrote " << a << "\n";
    return out.exit_code;
}

int run_solve(const std::string& config_path, const char* wanted_mode) {
    const fphs::ProblemSpec spec = fphs::parse_config(config_path);
    if (spec.source.mode != wanted_mode)
        throw fphs::ConfigError(std::string("this subcommand needs a config with source mode = ") + wanted_mode);
    return finish(fphs::run_scenario(spec));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"solver and verification laboratory for a coupled fractional pseudo-hyperbolic system"};
    app.require_subcommand(1);

    std::string config_path, emit_path, scenario_name;
    std::size_t levels = 3;

    auto* solve_linear_cmd = app.add_subcommand("solve-linear", "march the linear system and audit it");
    solve_linear_cmd->add_option("config", config_path, "scenario config")->required();

    auto* solve_nonlinear_cmd =
        app.add_subcommand("solve-nonlinear", "run the fixed-point iteration for the nonlinear system");
    solve_nonlinear_cmd->add_option("config", config_path, "scenario config")->required();

    auto* audit_cmd = app.add_subcommand("audit", "inequality ensemble, constants and energy audit");
    audit_cmd->add_option("config", config_path, "scenario config")->required();

    auto* constants_cmd = app.add_subcommand("constants", "evaluate the named constants");
    constants_cmd->add_option("config", config_path, "scenario config")->required();

    auto* converge_cmd = app.add_subcommand("converge", "manufactured-solution convergence study");
    converge_cmd->add_option("config", config_path, "scenario config")->required();
    converge_cmd->add_option("--levels", levels, "number of simultaneous (h, dt) halvings");

    auto* scenario_cmd = app.add_subcommand("scenario", "emit a canned scenario config");
    scenario_cmd->add_option("name", scenario_name, "scenario name (oldroyd)")->required();
    scenario_cmd->add_option("--emit", emit_path, "path to write the config to")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve_linear_cmd->parsed()) return run_solve(config_path, "linear");
        if (solve_nonlinear_cmd->parsed()) return run_solve(config_path, "nonlinear");
        if (audit_cmd->parsed()) return finish(fphs::run_audit(fphs::parse_config(config_path)));

        if (constants_cmd->parsed()) {
            const fphs::ProblemSpec spec = fphs::parse_config(config_path);
            const fphs::Constants cs = fphs::constants({spec.b, spec.T, spec.beta, spec.gamma, spec.z1,
                                                        spec.z2, spec.source.delta1, spec.source.delta2});
            std::filesystem::create_directories(spec.output_dir);
            const std::string path = (std::filesystem::path(spec.output_dir) / "constants.csv").string();
            cs.write_csv(path);
            for (const auto& [name, lv] : cs.named())
                std::printf("%-10s value=%-24.17g log=%.17g\n", name.c_str(), lv.value, lv.log_value);
            std::puts("note: Dstar includes the coupling branch; chi_star is the two-band sum at t = T");
            if (cs.astronomical) std::puts("note: constants astronomically large; values beyond log range");
            std::cout << "wrote " << path << "\n";
            return 0;
        }

        if (converge_cmd->parsed()) {
            const fphs::ProblemSpec spec = fphs::parse_config(config_path);
            const fphs::ConvergenceTable table = fphs::convergence_study(spec, levels);
            std::cout << table.text();
            std::filesystem::create_directories(spec.output_dir);
            const std::string path = (std::filesystem::path(spec.output_dir) / "convergence.csv").string();
            table.write_csv(path);
            std::cout << "wrote " << path << "\n";
            if (!table.decreasing) {
                std::cerr << "error: errors did not decrease under refinement\n";
                return 1;
            }
            return 0;
        }

        if (scenario_cmd->parsed()) {
            if (scenario_name != "oldroyd")
                throw fphs::ConfigError("unknown canned scenario: " + scenario_name);
            std::ofstream out(emit_path);
            if (!out) throw fphs::ConfigError("cannot write config to " + emit_path);
            out << fphs::emit_config(fphs::oldroyd_scenario());
            std::cout << "wrote " << emit_path << "\n";
            return 0;
        }
    } catch (const fphs::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const fphs::NumericsError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
