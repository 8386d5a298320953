// Acceptance criteria: one PASS/FAIL line per criterion on stdout, progress on stderr.
// Exit status is the number of failed criteria.
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <hhoflow/properties.hpp>

using namespace hhoflow;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
    if (!pass) ++failures;
    std::printf("%s [%2d] %s: %s\n", pass ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
    std::fflush(stdout);
}

std::string fmt(double x, int prec = 3) {
    std::ostringstream os;
    os.precision(prec);
    os << x;
    return os.str();
}

RunResult run(int n, double nu, double dt) {
    RunOptions o;
    o.nu = nu;
    o.dt = dt;
    o.t_final = 0.2;
    std::cerr << "  cartesian n=" << n << " nu=" << nu << " dt=" << dt << " ..." << std::flush;
    RunResult r;
    try {
        r = run_case(generate_cartesian(n), o, "cartesian");
    } catch (const std::exception& e) {
        r.status = std::string("failed: ") + e.what();
    }
    std::cerr << " " << r.status << " L2 " << r.err_linf_l2 << " sharp " << r.err_sharp << " (" << fmt(r.wall_seconds)
              << " s)\n";
    return r;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

bool all_ok(const std::vector<RunResult>& rs) {
    for (const auto& r : rs)
        if (r.status != "ok") return false;
    return true;
}

} // namespace

int main() {
    // 1, 2: convergence on the Cartesian family
    std::cerr << "convergence study, nu = 1e-2\n";
    std::vector<RunResult> seq;
    for (int n : {4, 8, 16, 32}) seq.push_back(run(n, 1e-2, 1e-3));
    compute_eocs(seq);
    {
        const bool ok = all_ok(seq);
        std::string l2 = "EOCs", sh = "EOCs";
        for (std::size_t i = 1; i < seq.size(); ++i) {
            l2 += " " + fmt(seq[i].eoc_linf_l2);
            sh += " " + fmt(seq[i].eoc_sharp);
        }
        bool monotone = true;
        for (std::size_t i = 1; i < seq.size(); ++i) monotone &= seq[i].err_linf_l2 < seq[i - 1].err_linf_l2;
        const double e1 = seq.back().eoc_linf_l2, e2 = seq.back().eoc_sharp;
        report(1, ok && monotone && e1 >= 2.5, "L_inf(L2) velocity EOC, k=1, Cartesian n=4..32, nu=1e-2",
               l2 + "; final pair " + fmt(e1) + " (required >= 2.5)");
        report(2, ok && e2 >= 1.3 && e2 <= 1.8, "sharp-norm EOC, same runs",
               sh + "; final pair " + fmt(e2) + " (required in [1.3, 1.8])");
    }

    // 3: viscosity independence in the convection-dominated regime
    std::cerr << "nu = 1e-6 against nu = 1e-10\n";
    {
        double worst = 0;
        bool ok = true;
        for (int n : {4, 8, 16}) {
            const RunResult a = run(n, 1e-6, 1e-3), b = run(n, 1e-10, 1e-3);
            ok &= a.status == "ok" && b.status == "ok";
            worst = std::max({worst, rel(a.err_linf_l2, b.err_linf_l2), rel(a.err_sharp, b.err_sharp)});
        }
        report(3, ok && worst <= 0.05, "errors at nu=1e-6 and nu=1e-10 agree, Cartesian n=4,8,16",
               "largest relative difference " + fmt(worst) + " (required <= 0.05)");
    }

    std::mt19937 rng(20240601);

    // 4: gradient forcings are invisible to divergence-free fields
    {
        const PropertyCheck c = check_pressure_robustness(20, rng);
        report(4, c.passed(), "l_h(grad psi, v) = 0 on the 16-element hexagonal mesh, 20 instances",
               "max |l_h| " + fmt(c.value) + " (tolerance " + fmt(c.tolerance) + "); " + c.note);
    }

    // 5: operator property suite
    std::cerr << "operator property suite\n";
    {
        const std::vector<PropertyCheck> suite = run_property_suite(50);
        int failed = 0, fewest = std::numeric_limits<int>::max();
        std::string which;
        for (const auto& c : suite) {
            std::cerr << "  " << (c.passed() ? "ok  " : "FAIL") << " " << c.name << ": " << c.value << " (tol "
                      << c.tolerance << ", " << c.instances << " instances) " << c.note << "\n";
            fewest = std::min(fewest, c.instances);
            if (!c.passed()) {
                ++failed;
                which += " [" + c.name + "]";
            }
        }
        report(5, failed == 0 && fewest >= 50, "operator property suite",
               std::to_string(suite.size() - failed) + "/" + std::to_string(suite.size()) + " checks pass, >= " +
                   std::to_string(fewest) + " instances each" + which);
    }

    // 6: dissipativity of the convective form
    {
        const auto [sign, match] = check_dissipativity(50, rng, 1, 4);
        report(6, sign.passed() && match.passed(), "t_h(w, v, v) >= 0 and equals its nonnegative sum, 50 instances",
               "max(-t_h) " + fmt(sign.value) + ", max relative mismatch " + fmt(match.value) + "; " + sign.note);
    }

    // 7: penalty zeros
    {
        const auto [k0, poly] = check_penalty_zeros(20, rng);
        report(7, k0.passed() && poly.passed(), "penalty vanishes at k=0 and on polynomial reconstructions",
               "k=0 max " + fmt(k0.value) + " (exact zero); polynomial max relative " + fmt(poly.value) +
                   " (round-off tolerance " + fmt(poly.tolerance) + ")");
    }

    // 8: forcing oracle
    {
        const PropertyCheck c = check_forcing_oracle(20, rng);
        report(8, c.passed(), "analytic forcing against finite differences, 20 points",
               "max relative difference " + fmt(c.value) + " (required <= 1e-6)");
    }

    // 9: time step halving
    std::cerr << "time step halving, n = 8\n";
    {
        const RunResult& a = seq[1];
        const RunResult b = run(8, 1e-2, 5e-4);
        const bool ok = a.status == "ok" && b.status == "ok";
        const double d1 = rel(b.err_linf_l2, a.err_linf_l2), d2 = rel(b.err_sharp, a.err_sharp);
        report(9, ok && d1 <= 0.02 && d2 <= 0.02, "halving dt on Cartesian n=8 changes errors by <= 2%",
               "L_inf(L2) " + fmt(d1) + ", sharp " + fmt(d2));
    }

    // 10: unknown count
    {
        const PolyMesh mesh = generate_cartesian(10);
        const Discretization disc(mesh, 1);
        const int ndof = DofMap(disc).n_dof();
        report(10, ndof == 1620, "unknowns on the 10x10 Cartesian mesh, k=1", std::to_string(ndof) + " (expected 1620)");
    }

    std::printf("%d of 10 criteria failed\n", failures);
    return failures;
}
