#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include <hhoflow/properties.hpp>

using namespace hhoflow;

namespace {

int study(const std::string& config_path, bool full_horizon, const std::string& out_dir) {
    StudyConfig c = load_config(config_path);
    if (full_horizon) {
        c.dt = 1e-3;
        c.t_final = 2.0;
    }
    if (!out_dir.empty()) c.out_dir = out_dir;
    std::cerr << "study: family " << c.family << ", k = " << c.k << ", dt = " << c.dt << ", t_final = " << c.t_final << "\n";
    const std::vector<RunResult> rows = run_convergence_study(c, &std::cerr);
    write_table(std::cout, rows);
    if (!c.out_dir.empty()) std::cerr << "wrote " << (std::filesystem::path(c.out_dir) / "errors.csv").string() << "\n";
    const bool all_ok = std::all_of(rows.begin(), rows.end(), [](const RunResult& r) { return r.status == "ok"; });
    return all_ok ? 0 : 1;
}

int mesh_info(const std::string& path) {
    const PolyMesh m = load_mesh(path);
    std::size_t fmin = std::numeric_limits<std::size_t>::max(), fmax = 0;
    double area = 0, dmin = std::numeric_limits<double>::infinity();
    for (const auto& el : m.elements) {
        fmin = std::min(fmin, el.n_faces());
        fmax = std::max(fmax, el.n_faces());
        area += el.area;
        dmin = std::min(dmin, el.diameter);
    }
    std::cout << "vertices        " << m.vertices.size() << "\n"
              << "elements        " << m.n_elements() << "\n"
              << "faces           " << m.n_faces() << " (" << m.interior_face_ids.size() << " interior, "
              << m.boundary_face_ids.size() << " boundary)\n"
              << "faces/element   " << fmin << " to " << fmax << "\n"
              << "h               " << format_number(m.h) << " (smallest diameter " << format_number(dmin) << ")\n"
              << "area            " << format_number(area) << "\n";
    for (int k = 0; k <= 3; ++k) {
        const Layout L = Layout::make(k);
        const std::size_t nv = m.n_elements() * 2 * L.nc + m.interior_face_ids.size() * 2 * L.nf;
        std::cout << "unknowns k=" << k << "     " << nv + m.n_elements() * L.np << " (" << nv << " velocity, "
                  << m.n_elements() * L.np << " pressure)\n";
    }
    return 0;
}

int verify(int n, unsigned seed) {
    std::vector<PropertyCheck> checks = run_property_suite(n, seed);
    std::mt19937 rng(seed + 1);
    checks.push_back(check_pressure_robustness(20, rng));
    const auto [sign, match] = check_dissipativity(n, rng);
    checks.push_back(sign);
    checks.push_back(match);
    const auto [k0, poly] = check_penalty_zeros(20, rng);
    checks.push_back(k0);
    checks.push_back(poly);
    checks.push_back(check_forcing_oracle(20, rng));
    int failed = 0;
    for (const auto& c : checks) {
        failed += !c.passed();
        std::cout << (c.passed() ? "PASS " : "FAIL ") << c.name << ": " << std::setprecision(3) << c.value << " (tol "
                  << c.tolerance << ", " << c.instances << " instances)";
        if (!c.note.empty()) std::cout << " " << c.note;
        std::cout << "\n";
    }
    std::cout << checks.size() - failed << "/" << checks.size() << " checks passed\n";
    return failed ? 1 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"HHO solver for incompressible Navier-Stokes flow on polygonal meshes"};
    app.require_subcommand(1);

    std::string config, out_dir;
    bool full_horizon = false;
    CLI::App* st = app.add_subcommand("study", "run a convergence study from a key = value config");
    st->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
    st->add_option("--out-dir", out_dir, "override out_dir of the config");
    st->add_flag("--full-horizon", full_horizon, "use dt = 1e-3 and t_final = 2 regardless of the config");

    std::string mesh_path;
    CLI::App* mi = app.add_subcommand("mesh-info", "load a mesh file and print its statistics");
    mi->add_option("path", mesh_path, "mesh file")->required();

    int n = 50;
    unsigned seed = 12345;
    CLI::App* ve = app.add_subcommand("verify", "run the operator property checks");
    ve->add_option("--instances", n, "random instances per check")->check(CLI::PositiveNumber);
    ve->add_option("--seed", seed, "random seed");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*st) return study(config, full_horizon, out_dir);
        if (*mi) return mesh_info(mesh_path);
        if (*ve) return verify(n, seed);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
