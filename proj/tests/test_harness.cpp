#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace hhoflow;

namespace {

constexpr double pi = std::numbers::pi;

StudyConfig parse(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace

TEST(Manufactured, PointValues) {
    const ManufacturedSolution ms{1e-2};
    EXPECT_NEAR(ms.u({0.5, 0.5}, 0).norm(), 0.0, 1e-15);
    EXPECT_NEAR(ms.p({0.5, 0.5}, 0), 0.0, 1e-15);
    const Vec2 u = ms.u({0.25, 0.25}, 0);
    EXPECT_NEAR(u.x(), 0.75, 1e-14);
    EXPECT_NEAR(u.y(), -0.28125 * pi, 1e-14);
    EXPECT_DOUBLE_EQ(ManufacturedSolution::g(0), 1.0);
    EXPECT_NEAR(ManufacturedSolution::g(pi / 4), 0.2, 1e-15);
}

TEST(Manufactured, DivergenceFreeWithZeroWallValues) {
    const ManufacturedSolution ms{1e-2};
    std::mt19937 rng(107);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    const double hs = 1e-6;
    for (int i = 0; i < 100; ++i) {
        const Vec2 x(d(rng), d(rng));
        const double t = 2 * d(rng);
        const double div = (ms.u(x + Vec2(hs, 0), t).x() - ms.u(x - Vec2(hs, 0), t).x() + ms.u(x + Vec2(0, hs), t).y() -
                            ms.u(x - Vec2(0, hs), t).y()) /
                           (2 * hs);
        EXPECT_LT(std::abs(div), 1e-7);
        const double s = d(rng);
        for (const Vec2& b : {Vec2(s, 0), Vec2(s, 1), Vec2(0, s), Vec2(1, s)}) EXPECT_LT(ms.u(b, t).norm(), 1e-14);
    }
}

TEST(Manufactured, ForcingMatchesFiniteDifferences) {
    std::mt19937 rng(109);
    for (double nu : {1.0, 1e-2, 1e-6}) EXPECT_PROPERTY(check_forcing_oracle(20, rng, nu));
}

TEST(Errors, OrderOfConvergence) {
    EXPECT_NEAR(eoc(1e-2, 2.5e-3, 0.2, 0.1), 2.0, 1e-12);
    std::vector<RunResult> seq(3);
    for (int i = 0; i < 3; ++i) {
        seq[i].h = 0.5 / (1 << i);
        seq[i].err_linf_l2 = 3.0 * std::pow(seq[i].h, 2.7);
        seq[i].err_sharp = 0.4 * std::pow(seq[i].h, 1.5);
    }
    seq[2].status = "failed: test";
    compute_eocs(seq);
    EXPECT_TRUE(std::isnan(seq[0].eoc_linf_l2));
    EXPECT_NEAR(seq[1].eoc_linf_l2, 2.7, 1e-10);
    EXPECT_NEAR(seq[1].eoc_sharp, 1.5, 1e-10);
    EXPECT_TRUE(std::isnan(seq[2].eoc_linf_l2));
}

TEST(Errors, NormsOfSimpleHistories) {
    EXPECT_EQ(error_linf_l2({0.0, 0.0}), 0.0);
    EXPECT_EQ(error_linf_l2({0.1, 0.3, 0.2}), 0.3);
    EXPECT_EQ(error_sharp({0.0, 0.0}, {0.0, 0.0}, 1e-2, 1e-3), 0.0);
    EXPECT_NEAR(error_sharp({4.0, 1.0}, {0.0, 0.0}, 0.5, 0.1), std::sqrt(0.1 * 2.5), 1e-15);
    EXPECT_NEAR(error_sharp({0.0}, {2.0}, 0.5, 0.1), std::sqrt(0.1), 1e-15);
    EXPECT_THROW(error_sharp({}, {}, 1e-2, 1e-3), InsufficientHistory);
    EXPECT_THROW(error_sharp({1.0}, {}, 1e-2, 1e-3), InsufficientHistory);
}

TEST(Errors, BrokenL2NormOfConstantField) {
    const PolyMesh mesh = generate_hexagonal_grid(5, 3);
    const Discretization disc(mesh, 1);
    const DofMap dofs(disc);
    const VectorXd u = interpolate_global(disc, dofs, [](const Vec2&) { return Vec2(0.6, -0.8); });
    EXPECT_NEAR(l2_norm(dofs, disc.n_elements(), u), 1.0, 1e-13);
}

TEST(Errors, InterpolationErrorTwoWays) {
    // |u - pi u|^2 = |u|^2 - |pi u|^2 (orthonormal bases) against direct quadrature of the difference
    const ManufacturedSolution ms{1e-2};
    const VectorField u = [&](const Vec2& x) { return ms.u(x, 0.0); };
    std::vector<double> e;
    for (int n : {8, 16}) {
        const PolyMesh mesh = generate_cartesian(n);
        const Discretization disc(mesh, 1);
        const DofMap dofs(disc);
        const VectorXd I = interpolate_global(disc, dofs, u);
        double direct = 0, norm_u = 0;
        for (std::size_t t = 0; t < disc.n_elements(); ++t) {
            const ElementContext& ctx = disc.context(t);
            const VectorXd loc = dofs.local(static_cast<int>(t), I).head(2 * ctx.layout().nc);
            for (const auto& q : submesh_quadratures(ctx.element().submesh, 30))
                for (std::size_t a = 0; a < q.size(); ++a) {
                    direct += q.weights[a] * (u(q.points[a]) - evaluate_vector(ctx.cell_space(), loc, q.points[a])).squaredNorm();
                    norm_u += q.weights[a] * u(q.points[a]).squaredNorm();
                }
        }
        const double pyth = norm_u - std::pow(l2_norm(dofs, disc.n_elements(), I), 2);
        EXPECT_NEAR(std::sqrt(direct), std::sqrt(pyth), 1e-10);
        e.push_back(std::sqrt(direct));
    }
    EXPECT_NEAR(std::log2(e[0] / e[1]), 2.0, 0.1);
}

TEST(Config, ParsesAllKeys) {
    const StudyConfig c = parse(
        "# study\nfamily = hexagonal\nrefinements = 1, 2 3\nk = 2\nnu_list = 1e-2, 1e-6\ndt = 5e-4\n"
        "t_final = 0.1\nquad_bump = 2\ncondense = true\ntiming = off\nout_dir = results  # trailing\n");
    EXPECT_EQ(c.family, "hexagonal");
    EXPECT_EQ(c.refinements, (std::vector<int>{1, 2, 3}));
    EXPECT_EQ(c.k, 2);
    EXPECT_EQ(c.nu_list, (std::vector<double>{1e-2, 1e-6}));
    EXPECT_EQ(c.dt, 5e-4);
    EXPECT_EQ(c.t_final, 0.1);
    EXPECT_EQ(c.quad_bump, 2);
    EXPECT_TRUE(c.condense);
    EXPECT_FALSE(c.timing);
    EXPECT_EQ(c.out_dir, "results");
}

TEST(Config, Errors) {
    EXPECT_THROW(parse("family = cartesian\n"), ConfigError);
    EXPECT_THROW(parse("refinements =\n"), ConfigError);
    EXPECT_THROW(parse("refinements = 2\nsolver = gmres\n"), ConfigError);
    EXPECT_THROW(parse("refinements = 2\nk = 1.5\n"), ConfigError);
    EXPECT_THROW(parse("refinements = 2\nk = 7\n"), ConfigError);
    EXPECT_THROW(parse("refinements = 0\n"), ConfigError);
    EXPECT_THROW(parse("refinements = 2\nnu_list = -1\n"), ConfigError);
    EXPECT_THROW(parse("refinements = 2\ndt = 0.1\nt_final = 0.1\n"), ConfigError);
    EXPECT_THROW(parse("refinements = 2\ncondense = maybe\n"), ConfigError);
    EXPECT_THROW(parse("family = files\n"), ConfigError);
    EXPECT_THROW(parse("family = voronoi\nrefinements = 2\n"), ConfigError);
    EXPECT_THROW(parse("refinements 2\n"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.txt"), ConfigError);
    EXPECT_NO_THROW(parse("family = files\nmesh_files = a.txt b.txt\n"));
}

TEST(Study, CsvIsDeterministicWithoutTiming) {
    const auto base = std::filesystem::temp_directory_path() / "hhoflow_determinism";
    std::filesystem::remove_all(base);
    std::string out[2];
    for (int i = 0; i < 2; ++i) {
        const auto dir = base / std::to_string(i);
        StudyConfig c = parse("refinements = 2, 3\nnu_list = 1e-2\ndt = 1e-2\nt_final = 0.05\ntiming = false\n");
        c.out_dir = dir.string();
        const auto rows = run_convergence_study(c);
        ASSERT_EQ(rows.size(), 2u);
        for (const auto& r : rows) EXPECT_EQ(r.status, "ok");
        out[i] = slurp(dir / "errors.csv");
    }
    EXPECT_EQ(out[0], out[1]);
    EXPECT_EQ(out[0].substr(0, out[0].find('\n')), "family,nu,ndof,h,err_linf_l2,eoc_linf_l2,err_sharp,eoc_sharp,wall_seconds");
    std::filesystem::remove_all(base);
}

TEST(Study, FailedRunsLeaveEmptyFields) {
    RunResult ok, bad;
    ok.family = bad.family = "cartesian";
    ok.nu = bad.nu = 1e-2;
    ok.ndof = 240;
    ok.h = 0.25;
    ok.err_linf_l2 = 0.5;
    ok.err_sharp = 0.25;
    bad.status = "failed: singular";
    std::ostringstream os;
    write_csv(os, {ok, bad}, false);
    std::istringstream is(os.str());
    std::string header, l1, l2;
    std::getline(is, header);
    std::getline(is, l1);
    std::getline(is, l2);
    EXPECT_EQ(l1, "cartesian,1.000000e-02,240,2.500000e-01,5.000000e-01,,2.500000e-01,,0.000");
    EXPECT_EQ(l2, "cartesian,1.000000e-02,0,0.000000e+00,,,,,0.000");
    std::ostringstream table;
    write_table(table, {ok, bad});
    EXPECT_NE(table.str().find("failed: singular"), std::string::npos);
}

TEST(Study, RunCaseReportsConstraints) {
    RunOptions o;
    o.dt = 1e-2;
    o.t_final = 0.1;
    const RunResult r = run_case(generate_cartesian(4), o, "cartesian");
    EXPECT_EQ(r.status, "ok");
    EXPECT_EQ(r.ndof, 240);
    EXPECT_EQ(r.steps, 10);
    EXPECT_LT(r.max_divergence, 1e-9);
    EXPECT_LT(r.max_pressure_mean, 1e-10);
    EXPECT_GT(r.err_linf_l2, 0);
    EXPECT_GT(r.err_sharp, 0);
}

TEST(Study, QuadratureBumpDoesNotChangeErrors) {
    RunOptions o;
    o.dt = 1e-2;
    o.t_final = 0.1;
    const RunResult a = run_case(generate_cartesian(4), o);
    o.quad_bump = 2;
    const RunResult b = run_case(generate_cartesian(4), o);
    // only the quadrature error of the non-polynomial data remains
    EXPECT_NEAR(b.err_linf_l2, a.err_linf_l2, 1e-6 * a.err_linf_l2);
    EXPECT_NEAR(b.err_sharp, a.err_sharp, 1e-6 * a.err_sharp);
}
