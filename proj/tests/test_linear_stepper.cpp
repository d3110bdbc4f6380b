#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fphs/inequality_audit.hpp"
#include "fphs/linear_stepper.hpp"
#include "fphs/scenario.hpp"

using namespace fphs;

namespace {

DiscreteProblem blank_problem(double b, double T, std::size_t nx, std::size_t nt, double beta, double gamma,
                              double z1, double z2) {
    Grid g(b, nx);
    TimeGrid tg(T, nt);
    DiscreteProblem p{g, tg, beta, gamma, z1, z2, Field(nx, 0.0), Field(nx, 0.0), Field(nx, 0.0),
                      Field(nx, 0.0)};
    return p;
}

DiscreteProblem random_data_problem(std::mt19937& rng, double z1 = 0.4, double z2 = 0.8) {
    DiscreteProblem p = blank_problem(1.0, 0.5, 64, 256, 1.6, 1.4, z1, z2);
    p.phi1 = weighted_mean_project(random_admissible_field(p.grid, rng), p.grid);
    p.phi2 = weighted_mean_project(random_admissible_field(p.grid, rng), p.grid);
    p.psi1 = weighted_mean_project(random_admissible_field(p.grid, rng), p.grid);
    p.psi2 = weighted_mean_project(random_admissible_field(p.grid, rng), p.grid);
    return p;
}

SourceTable random_sources(const DiscreteProblem& p, std::mt19937& rng) {
    SourceTable tab = zero_sources(p.grid, p.tgrid);
    const Field fa = random_admissible_field(p.grid, rng), ga = random_admissible_field(p.grid, rng);
    for (std::size_t n = 0; n <= p.tgrid.nt; ++n) {
        const double t = p.tgrid.node(n);
        const double wf = std::cos(3.0 * t), wg = std::sin(2.0 * t) + 0.5;
        for (std::size_t i = 0; i < p.grid.nx; ++i) {
            tab.f[n][i] = wf * fa[i];
            tab.g[n][i] = wg * ga[i];
        }
    }
    return tab;
}

}  // namespace

TEST_CASE("zero data and zero sources give the identically zero trajectory", "[stepper]") {
    const DiscreteProblem p = blank_problem(1.0, 0.5, 32, 64, 1.5, 1.5, 0.3, 0.3);
    const Trajectory traj = solve_linear(p, zero_sources(p.grid, p.tgrid));
    for (std::size_t n = 0; n <= p.tgrid.nt; ++n) {
        for (double x : traj.u[n]) CHECK(x == 0.0);
        for (double x : traj.v[n]) CHECK(x == 0.0);
    }
}

TEST_CASE("superposition of data holds to solver accuracy", "[stepper]") {
    std::mt19937 rng(42);
    DiscreteProblem p1 = random_data_problem(rng);
    DiscreteProblem p2 = p1;
    p2.phi1 = weighted_mean_project(random_admissible_field(p2.grid, rng), p2.grid);
    p2.psi2 = weighted_mean_project(random_admissible_field(p2.grid, rng), p2.grid);
    const SourceTable s1 = random_sources(p1, rng);
    const SourceTable s2 = random_sources(p2, rng);

    DiscreteProblem psum = p1;
    SourceTable ssum = s1;
    for (std::size_t i = 0; i < p1.grid.nx; ++i) {
        psum.phi1[i] += p2.phi1[i];
        psum.phi2[i] += p2.phi2[i];
        psum.psi1[i] += p2.psi1[i];
        psum.psi2[i] += p2.psi2[i];
    }
    for (std::size_t n = 0; n <= p1.tgrid.nt; ++n)
        for (std::size_t i = 0; i < p1.grid.nx; ++i) {
            ssum.f[n][i] += s2.f[n][i];
            ssum.g[n][i] += s2.g[n][i];
        }

    const Trajectory t1 = solve_linear(p1, s1);
    const Trajectory t2 = solve_linear(p2, s2);
    const Trajectory ts = solve_linear(psum, ssum);

    double worst = 0.0, scale = 0.0;
    for (std::size_t n = 0; n <= p1.tgrid.nt; ++n)
        for (std::size_t i = 0; i < p1.grid.nx; ++i) {
            worst = std::max(worst, std::abs(t1.u[n][i] + t2.u[n][i] - ts.u[n][i]));
            worst = std::max(worst, std::abs(t1.v[n][i] + t2.v[n][i] - ts.v[n][i]));
            scale = std::max({scale, std::abs(ts.u[n][i]), std::abs(ts.v[n][i])});
        }
    CHECK(worst <= 1e-9 * std::max(scale, 1.0));
}

TEST_CASE("integral constraint holds at every step", "[stepper]") {
    std::mt19937 rng(7);
    const DiscreteProblem p = random_data_problem(rng);
    const Trajectory traj = solve_linear(p, random_sources(p, rng));
    for (std::size_t n = 0; n <= p.tgrid.nt; ++n) {
        const double nu = norm_rho(traj.u[n], p.grid), nv = norm_rho(traj.v[n], p.grid);
        CHECK(std::abs(weighted_mean_defect(traj.u[n], p.grid)) <= 1e-10 * std::max(nu, 1e-20));
        CHECK(std::abs(weighted_mean_defect(traj.v[n], p.grid)) <= 1e-10 * std::max(nv, 1e-20));
    }
}

TEST_CASE("component swap symmetry is exact", "[stepper]") {
    std::mt19937 rng(99);
    const DiscreteProblem p = random_data_problem(rng, 0.7, 0.2);
    const SourceTable s = random_sources(p, rng);

    DiscreteProblem q = p;
    std::swap(q.beta, q.gamma);
    std::swap(q.z1, q.z2);
    q.phi1 = p.psi1;
    q.phi2 = p.psi2;
    q.psi1 = p.phi1;
    q.psi2 = p.phi2;
    SourceTable sq = s;
    std::swap(sq.f, sq.g);

    const Trajectory a = solve_linear(p, s);
    const Trajectory b = solve_linear(q, sq);
    for (std::size_t n = 0; n <= p.tgrid.nt; ++n)
        for (std::size_t i = 0; i < p.grid.nx; ++i) {
            REQUIRE(a.u[n][i] == b.v[n][i]);
            REQUIRE(a.v[n][i] == b.u[n][i]);
        }
}

TEST_CASE("identical specs produce bit-identical trajectories", "[stepper]") {
    std::mt19937 rng1(5), rng2(5);
    const DiscreteProblem p1 = random_data_problem(rng1);
    const DiscreteProblem p2 = random_data_problem(rng2);
    const Trajectory a = solve_linear(p1, random_sources(p1, rng1));
    const Trajectory b = solve_linear(p2, random_sources(p2, rng2));
    for (std::size_t n = 0; n <= p1.tgrid.nt; ++n)
        for (std::size_t i = 0; i < p1.grid.nx; ++i) {
            REQUIRE(a.u[n][i] == b.u[n][i]);
            REQUIRE(a.v[n][i] == b.v[n][i]);
        }
}

TEST_CASE("zero stability: norms stay bounded under time refinement", "[stepper]") {
    std::mt19937 rng(13);
    Grid g(1.0, 32);
    const Field f1 = weighted_mean_project(random_admissible_field(g, rng), g);
    const Field f2 = weighted_mean_project(random_admissible_field(g, rng), g);
    double bound = 0.0;
    std::vector<double> sups;
    for (std::size_t nt : {64, 128, 256}) {
        DiscreteProblem p = blank_problem(1.0, 1.0, 32, nt, 1.7, 1.3, 0.5, 0.5);
        p.phi1 = f1;
        p.psi1 = f2;
        const Trajectory traj = solve_linear(p, zero_sources(p.grid, p.tgrid));
        double sup = 0.0;
        for (std::size_t n = 0; n <= nt; ++n)
            sup = std::max({sup, norm_rho(traj.u[n], g), norm_rho(traj.v[n], g)});
        sups.push_back(sup);
        bound = std::max(bound, sup);
    }
    const double data_norm = std::max(norm_rho(f1, g), norm_rho(f2, g));
    for (double s : sups) CHECK(s <= 4.0 * data_norm);
}

TEST_CASE("manufactured solution errors shrink under refinement", "[stepper]") {
    ProblemSpec spec;
    spec.b = 1.0;
    spec.T = 0.5;
    spec.beta = 1.6;
    spec.gamma = 1.4;
    spec.z1 = 0.5;
    spec.z2 = 0.5;
    spec.phi1 = {"admissible_mode", {{"k", 1.0}, {"amp", 1.0}}};
    spec.phi2 = {"zero", {}};
    spec.psi1 = {"zero", {}};
    spec.psi2 = {"zero", {}};
    spec.source = {"linear", "manufactured_quadratic", 0.0, 0.0, {}};
    spec.nx = 16;
    spec.nt = 64;

    const ManufacturedCase mc{spec.b, spec.beta, spec.gamma, spec.z1, spec.z2};
    double prev = std::numeric_limits<double>::infinity();
    for (int level = 0; level < 3; ++level) {
        ProblemSpec s = spec;
        s.nx = spec.nx << level;
        s.nt = spec.nt << level;
        const double err = manufactured_error(solve_linear(s), mc);
        INFO("level " << level << " error " << err);
        CHECK(err < prev);
        prev = err;
    }
}

TEST_CASE("residual of a fresh solve sits at the rounding floor", "[stepper]") {
    std::mt19937 rng(3);
    const DiscreteProblem p = random_data_problem(rng);
    const SourceTable s = random_sources(p, rng);
    const Trajectory traj = solve_linear(p, s);
    const double scale = data_scale(p, s);
    for (std::size_t n : {std::size_t(1), std::size_t(100), p.tgrid.nt})
        CHECK(residual(traj, p, n) <= 1e-8 * scale);
    CHECK_THROWS_AS(residual(traj, p, 0), std::out_of_range);
    CHECK_THROWS_AS(residual(traj, p, p.tgrid.nt + 1), std::out_of_range);
}

TEST_CASE("zero trajectory with zero sources has zero residual", "[stepper]") {
    const DiscreteProblem p = blank_problem(1.0, 0.5, 16, 32, 1.5, 1.5, 0.0, 0.0);
    const Trajectory traj = solve_linear(p, zero_sources(p.grid, p.tgrid));
    for (std::size_t n = 1; n <= p.tgrid.nt; ++n) CHECK(residual(traj, p, n) == 0.0);
}

TEST_CASE("perturbing one node makes adjacent residuals strictly positive", "[stepper]") {
    std::mt19937 rng(31);
    const DiscreteProblem p = random_data_problem(rng);
    const SourceTable s = random_sources(p, rng);
    Trajectory traj = solve_linear(p, s);
    const std::size_t n0 = p.tgrid.nt / 2;
    traj.u[n0][p.grid.nx / 2] += 0.1;
    const double scale = data_scale(p, s);
    CHECK(residual(traj, p, n0) > 1e-4 * scale);
    CHECK(residual(traj, p, n0 + 1) > 1e-4 * scale);
}

TEST_CASE("nonfinite sources abort with a diagnostic", "[stepper]") {
    const DiscreteProblem p = blank_problem(1.0, 0.5, 16, 32, 1.5, 1.5, 0.0, 0.0);
    SourceTable s = zero_sources(p.grid, p.tgrid);
    s.f[10][3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(solve_linear(p, s), NumericsError);
}

TEST_CASE("runaway coupling trips the blow-up guard", "[stepper]") {
    // negative couplings are outside the admissible scenario space; they
    // are used here only to manufacture growth for the guard
    DiscreteProblem p = blank_problem(1.0, 0.5, 16, 128, 1.5, 1.5, -3e5, -3e5);
    std::mt19937 rng(77);
    p.phi1 = weighted_mean_project(random_admissible_field(p.grid, rng), p.grid);
    p.psi1 = p.phi1;
    CHECK_THROWS_AS(solve_linear(p, zero_sources(p.grid, p.tgrid)), NumericsError);
}

TEST_CASE("ingestion projects profiles and flags the projection", "[stepper]") {
    ProblemSpec spec;
    spec.phi1 = {"poly_projected", {{"c0", 1.0}, {"c2", 0.5}}};
    spec.phi2 = {"zero", {}};
    spec.psi1 = {"admissible_mode", {{"k", 1.0}}};
    spec.psi2 = {"zero", {}};
    spec.source = {"linear", "zero", 0.0, 0.0, {}};
    const IngestResult in = ingest(spec);
    CHECK(std::abs(weighted_mean_defect(in.problem.phi1, in.problem.grid)) < 1e-13);
    REQUIRE(in.warnings.size() == 1);
    CHECK(in.warnings[0].find("phi1") == 0);

    // admissible mode needs no correction beyond quadrature error
    CHECK(std::abs(weighted_mean_defect(in.problem.psi1, in.problem.grid)) < 1e-13);
}
