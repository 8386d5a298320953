#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace hhoflow;

namespace {

constexpr double pi = std::numbers::pi;

double max_asymmetry(const SparseMatrix& A) {
    const SparseMatrix d = A - SparseMatrix(A.transpose());
    double m = 0;
    for (int k = 0; k < d.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

Vec2 gradient_forcing(const Vec2& x) { return Vec2(2 * x.x() - 1, 3 * x.y() * x.y()); } // grad (x^2 - x + y^3)

} // namespace

TEST(DofMap, Counts) {
    auto ndof = [](const PolyMesh& m, int k) {
        const Discretization disc(m, k);
        return DofMap(disc).n_dof();
    };
    EXPECT_EQ(ndof(generate_cartesian(5), 1), 385);
    EXPECT_EQ(ndof(generate_cartesian(10), 1), 1620);
    EXPECT_EQ(ndof(generate_hexagonal(1), 1), 386);
    const PolyMesh m = generate_cartesian(4);
    const Discretization disc(m, 2);
    const DofMap dofs(disc);
    // k = 2: 10 cell, 3 face, 6 pressure functions per component
    EXPECT_EQ(dofs.n_velocity(), 16 * 2 * 10 + 24 * 2 * 3);
    EXPECT_EQ(dofs.n_pressure(), 16 * 6);
    EXPECT_EQ(dofs.n_system(), dofs.n_dof() + 1);
}

TEST(Assembly, SymmetricForms) {
    const PolyMesh mesh = generate_hexagonal_grid(5, 3);
    const Discretization disc(mesh, 1);
    const DofMap dofs(disc);
    const SparseMatrix M = mass_matrix(disc, dofs), A = viscous_matrix(disc, dofs);
    EXPECT_LT(max_asymmetry(M), 1e-12);
    EXPECT_LT(max_asymmetry(A), 1e-12);
}

TEST(Solver, ZeroIsAFixedPoint) {
    const PolyMesh mesh = generate_cartesian(4);
    const Discretization disc(mesh, 1);
    NavierStokesSolver solver(disc, {1e-2, 1e-2});
    TimeState s = solver.zero_state();
    const auto zero = [](const Vec2&, double) { return Vec2(0, 0); };
    double drift = 0;
    for (int n = 0; n < 100; ++n) {
        s = solver.step(s, zero);
        drift = std::max({drift, s.u.cwiseAbs().maxCoeff(), s.p.cwiseAbs().maxCoeff()});
    }
    EXPECT_LE(drift, 1e-12);
    EXPECT_EQ(s.step, 101);
}

TEST(Solver, StepPreservesConstraints) {
    const ManufacturedSolution ms{1e-2};
    for (const auto& mesh : {generate_cartesian(4), generate_hexagonal(1)}) {
        const Discretization disc(mesh, 1);
        NavierStokesSolver solver(disc, {1e-2, 1e-3});
        TimeState s = solver.initialize([&](const Vec2& x, double t) { return ms.u(x, t); });
        EXPECT_LT(max_divergence(disc, solver.dofs(), s.u), 1e-10);
        EXPECT_LT(max_divergence(disc, solver.dofs(), s.u_prev), 1e-10);
        for (int n = 0; n < 3; ++n) {
            s = solver.step(s, [&](const Vec2& x, double t) { return ms.f(x, t); });
            EXPECT_LT(max_divergence(disc, solver.dofs(), s.u), 1e-9);
            EXPECT_LT(std::abs(pressure_mean(disc, s.p)), 1e-10);
            EXPECT_LT(solver.last_solve().residual, 1e-10);
        }
    }
}

TEST(Solver, InitialInterpolantMatchesProjections) {
    const ManufacturedSolution ms{1e-2};
    const PolyMesh mesh = generate_hexagonal_grid(5, 3);
    const Discretization disc(mesh, 1);
    NavierStokesSolver solver(disc, {1e-2, 1e-3});
    const TimeState s = solver.initialize([&](const Vec2& x, double t) { return ms.u(x, t); });
    const DofMap& dofs = solver.dofs();
    for (std::size_t t = 0; t < disc.n_elements(); ++t) {
        const ElementContext& ctx = disc.context(t);
        const VectorXd loc = dofs.local(static_cast<int>(t), s.u_prev);
        // element dofs against a projection with a much finer rule
        const auto fine = submesh_quadratures(ctx.element().submesh, 40);
        const VectorXd ref = project([&](const Vec2& x) { return ms.u(x, 0.0); }, ctx.cell_space(), fine);
        EXPECT_LT((loc.head(ref.size()) - ref).norm(), 1e-12);
        // the wall values of u vanish, so dropping the boundary faces loses nothing
        const VectorXd full = interpolate(ctx, [&](const Vec2& x) { return ms.u(x, 0.0); });
        for (int j = 0; j < ctx.n_faces(); ++j)
            if (mesh.faces[ctx.element().face_ids[j]].is_boundary())
                EXPECT_LT(full.segment(ctx.layout().face(j, 0, 0), 2 * ctx.layout().nf).norm(), 1e-12);
    }
}

TEST(Solver, GradientForcingGivesZeroVelocity) {
    // f = grad p_s: u = 0 and p is the zero-mean projection of p_s, at every viscosity
    for (const auto& mesh : {generate_cartesian(4), generate_hexagonal_grid(5, 3)})
        for (double nu : {1.0, 1e-6}) {
            const Discretization disc(mesh, 1);
            const StokesSolution sol = solve_stokes(disc, nu, gradient_forcing);
            // u vanishes exactly; round-off in the solve is amplified by 1/nu
            EXPECT_LT(nu * sol.u.cwiseAbs().maxCoeff(), 1e-14);
            const VectorXd ps = project_pressure(disc, [](const Vec2& x) { return x.x() * x.x() - x.x() + x.y() * x.y() * x.y(); });
            const double mean = pressure_mean(disc, ps);
            VectorXd expected = ps;
            for (std::size_t t = 0; t < disc.n_elements(); ++t) {
                const VectorXd one = project([](const Vec2&) { return 1.0; }, disc.context(t).pressure_space(), disc.context(t).quadratures());
                expected.segment(t * disc.layout().np, disc.layout().np) -= mean * one;
            }
            EXPECT_LT((sol.p - expected).cwiseAbs().maxCoeff(), 1e-9);
        }
}

TEST(Solver, GradientForcingStaysAtRestInTime) {
    const PolyMesh mesh = generate_hexagonal_grid(5, 3);
    const Discretization disc(mesh, 1);
    NavierStokesSolver solver(disc, {1e-3, 1e-2});
    TimeState s = solver.zero_state();
    for (int n = 0; n < 5; ++n) s = solver.step(s, [](const Vec2& x, double) { return gradient_forcing(x); });
    EXPECT_LT(s.u.cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Solver, StokesEnergyIdentity) {
    const ManufacturedSolution ms{1.0};
    const PolyMesh mesh = generate_hexagonal_grid(5, 3);
    const Discretization disc(mesh, 1);
    const DofMap dofs(disc);
    const double nu = 0.3;
    const VectorField f = [&](const Vec2& x) { return ms.f(x, 0.4); };
    const StokesSolution sol = solve_stokes(disc, nu, f);
    const double lhs = nu * sol.u.dot(viscous_matrix(disc, dofs) * sol.u);
    const double rhs = load_vector(disc, dofs, f).dot(sol.u);
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::abs(rhs));
}

TEST(Solver, StokesConvergence) {
    // smooth divergence-free u with zero wall values, p with zero mean
    const VectorField u = [](const Vec2& x) {
        const double sx = std::sin(pi * x.x()), sy = std::sin(pi * x.y());
        return Vec2(sx * sx * std::sin(2 * pi * x.y()), -std::sin(2 * pi * x.x()) * sy * sy);
    };
    const VectorField f = [](const Vec2& x) {
        // -Lap u + grad p with p = cos(pi x) cos(pi y)
        const double X = x.x(), Y = x.y();
        const double lap1 = 2 * pi * pi * std::cos(2 * pi * X) * std::sin(2 * pi * Y) -
                            4 * pi * pi * std::pow(std::sin(pi * X), 2) * std::sin(2 * pi * Y);
        const double lap2 = -(2 * pi * pi * std::cos(2 * pi * Y) * std::sin(2 * pi * X) -
                              4 * pi * pi * std::pow(std::sin(pi * Y), 2) * std::sin(2 * pi * X));
        return Vec2(-lap1 - pi * std::sin(pi * X) * std::cos(pi * Y), -lap2 - pi * std::cos(pi * X) * std::sin(pi * Y));
    };
    std::vector<double> e, h;
    for (int n : {4, 8, 16}) {
        const PolyMesh mesh = generate_cartesian(n);
        const Discretization disc(mesh, 1);
        const DofMap dofs(disc);
        const StokesSolution sol = solve_stokes(disc, 1.0, f);
        const VectorXd err = sol.u - interpolate_global(disc, dofs, u);
        e.push_back(l2_norm(dofs, disc.n_elements(), err));
        h.push_back(mesh.h);
    }
    EXPECT_GT(eoc(e[1], e[2], h[1], h[2]), 2.7);
}

TEST(Solver, CondensationMatchesMonolithicSolve) {
    const ManufacturedSolution ms{1e-2};
    const PolyMesh mesh = generate_cartesian(4);
    const Discretization disc(mesh, 1);
    SolverOptions a{1e-2, 1e-2}, b = a;
    b.condense = true;
    NavierStokesSolver sa(disc, a), sb(disc, b);
    TimeState xa = sa.initialize([&](const Vec2& x, double t) { return ms.u(x, t); }), xb = xa;
    const auto f = [&](const Vec2& x, double t) { return ms.f(x, t); };
    for (int n = 0; n < 5; ++n) {
        xa = sa.step(xa, f);
        xb = sb.step(xb, f);
    }
    EXPECT_LT((xa.u - xb.u).norm(), 1e-9 * xa.u.norm());
    EXPECT_LT((xa.p - xb.p).norm(), 1e-9 * xa.p.norm());
}

TEST(Solver, FactorizationReuseMatchesFreshFactorization) {
    const ManufacturedSolution ms{1e-2};
    const PolyMesh mesh = generate_cartesian(4);
    const Discretization disc(mesh, 1);
    SolverOptions a{1e-2, 1e-2}, b = a;
    b.reuse_iterations = 0;
    NavierStokesSolver sa(disc, a), sb(disc, b);
    TimeState xa = sa.initialize([&](const Vec2& x, double t) { return ms.u(x, t); }), xb = xa;
    const auto f = [&](const Vec2& x, double t) { return ms.f(x, t); };
    for (int n = 0; n < 8; ++n) {
        xa = sa.step(xa, f);
        xb = sb.step(xb, f);
    }
    EXPECT_LT((xa.u - xb.u).norm(), 1e-9 * xa.u.norm());
    EXPECT_LT(sa.factorizations(), sb.factorizations());
}

TEST(Solver, SolvesArbitrarySystems) {
    const PolyMesh mesh = generate_cartesian(2);
    const Discretization disc(mesh, 0);
    NavierStokesSolver solver(disc, {});
    const int n = solver.dofs().n_system();
    SparseMatrix I(n, n);
    I.setIdentity();
    I *= 2.0;
    std::mt19937 rng(83);
    const VectorXd b = uniform_vector(n, rng);
    EXPECT_LT((solver.solve(I, b) - 0.5 * b).norm(), 1e-14);
}

TEST(Solver, RejectsMissingHistory) {
    const PolyMesh mesh = generate_cartesian(2);
    const Discretization disc(mesh, 1);
    NavierStokesSolver solver(disc, {});
    TimeState s;
    EXPECT_THROW(solver.step(s, [](const Vec2&, double) { return Vec2(0, 0); }), InsufficientHistory);
}

TEST(Solver, RejectsExtrapolantWithDivergence) {
    const PolyMesh mesh = generate_cartesian(3);
    const Discretization disc(mesh, 1);
    NavierStokesSolver solver(disc, {});
    TimeState s = solver.zero_state();
    std::mt19937 rng(89);
    s.u = uniform_vector(solver.dofs().n_velocity(), rng);
    EXPECT_THROW(solver.step(s, [](const Vec2&, double) { return Vec2(0, 0); }), ExtrapolantNotDivFree);
}

TEST(Checkpoint, RoundTrip) {
    std::mt19937 rng(97);
    TimeState s;
    s.u = uniform_vector(17, rng);
    s.u_prev = uniform_vector(17, rng);
    s.p = uniform_vector(5, rng) * 1e-7;
    s.t = 0.123456789012345;
    s.dt = 1.0 / 3.0;
    s.step = 42;
    std::stringstream ss;
    write_checkpoint(ss, s, 2);
    int k = -1;
    const TimeState r = read_checkpoint(ss, &k);
    EXPECT_EQ(k, 2);
    EXPECT_EQ(r.u, s.u);
    EXPECT_EQ(r.u_prev, s.u_prev);
    EXPECT_EQ(r.p, s.p);
    EXPECT_EQ(r.t, s.t);
    EXPECT_EQ(r.dt, s.dt);
    EXPECT_EQ(r.step, s.step);
}

TEST(Checkpoint, MalformedInput) {
    auto read = [](const std::string& text) {
        std::istringstream is(text);
        return read_checkpoint(is);
    };
    EXPECT_THROW(read(""), ParseError);
    EXPECT_THROW(read("hhoflow-checkpoint 2\n"), ParseError);
    EXPECT_THROW(read("hhoflow-checkpoint 1\nk 1\nt 0\ndt 0.1\nstep 1\nu 2\n1\n"), ParseError);
    EXPECT_THROW(read("hhoflow-checkpoint 1\nk 1\nt 0\ndt 0.1\nstep 1\nu 1\n1\nu_prev 2\n1\n2\np 0\n"), ParseError);
    EXPECT_NO_THROW(read("hhoflow-checkpoint 1\nk 1\nt 0\ndt 0.1\nstep 1\nu 1\n1\nu_prev 1\n2\np 0\n"));
}
