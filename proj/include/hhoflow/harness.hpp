#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "solver.hpp"

namespace hhoflow {

// Manufactured flow on (0,1)^2 with homogeneous wall data and time factor g(t) = (6 + 4 cos 4t)/10.
struct ManufacturedSolution {
    double nu = 1e-2;

    struct Value {
        Vec2 u;
        double p;
        Vec2 f;
    };

    static double g(double t) { return (6.0 + 4.0 * std::cos(4.0 * t)) / 10.0; }
    static double dg(double t) { return -1.6 * std::sin(4.0 * t); }

    Vec2 u(const Vec2& x, double t) const { return g(t) * shape(x).u; }
    double p(const Vec2& x, double t) const {
        using std::numbers::pi;
        return g(t) * std::sin(pi * x.x()) * std::cos(pi * x.y());
    }

    Vec2 f(const Vec2& x, double t) const {
        using std::numbers::pi;
        const Shape s = shape(x);
        const double gt = g(t);
        const Vec2 grad_p(gt * pi * std::cos(pi * x.x()) * std::cos(pi * x.y()),
                          -gt * pi * std::sin(pi * x.x()) * std::sin(pi * x.y()));
        const Vec2 u = gt * s.u;
        const Vec2 conv(u.x() * gt * s.du(0, 0) + u.y() * gt * s.du(0, 1), u.x() * gt * s.du(1, 0) + u.y() * gt * s.du(1, 1));
        return dg(t) * s.u - nu * gt * s.lap + conv + grad_p;
    }

    Value eval(const Vec2& x, double t) const { return {u(x, t), p(x, t), f(x, t)}; }

private:
    struct Shape {
        Vec2 u;
        Eigen::Matrix2d du; // du(i, j) = d u_i / d x_j
        Vec2 lap;
    };

    // u1 = a(x) b(y), u2 = -a'(x) c(y) with c' = b, so div u = 0.
    static Shape shape(const Vec2& x) {
        using std::numbers::pi;
        const double X = x.x(), Y = x.y();
        const double s = std::sin(pi * X), s2 = std::sin(2 * pi * X), c2 = std::cos(2 * pi * X);
        const double a = 8 * s * s, a1 = 8 * pi * s2, a2 = 16 * pi * pi * c2, a3 = -32 * pi * pi * pi * s2;
        const double b = 2 * Y * (1 - Y) * (1 - 2 * Y), b1 = 2 * (1 - 6 * Y + 6 * Y * Y), b2 = 24 * Y - 12;
        const double c = Y * Y * (1 - Y) * (1 - Y);
        Shape r;
        r.u = Vec2(a * b, -a1 * c);
        r.du << a1 * b, a * b1, -a2 * c, -a1 * b;
        r.lap = Vec2(a2 * b + a * b2, -(a3 * c + a1 * b1));
        return r;
    }
};

// Broken L2 norm of the element velocity unknowns (orthonormal bases).
inline double l2_norm(const DofMap& dofs, std::size_t n_elements, const VectorXd& u) {
    return u.head(static_cast<Eigen::Index>(n_elements) * 2 * dofs.layout().nc).norm();
}

inline double error_linf_l2(const std::vector<double>& l2_history) {
    double m = 0;
    for (double e : l2_history) m = std::max(m, e);
    return m;
}

// sqrt(dt * sum_n [nu |e^n|_{1,h}^2 + 1/2 sum_sigma int |R w^n . n| [[R e^n]]^2]) from per-step
// squared seminorms and upwind energies, steps n >= 2.
inline double error_sharp(const std::vector<double>& h1_sq, const std::vector<double>& upwind, double nu, double dt) {
    if (h1_sq.size() < 1 || h1_sq.size() != upwind.size())
        throw InsufficientHistory("the sharp norm needs at least one step beyond the two initial states");
    double s = 0;
    for (std::size_t i = 0; i < h1_sq.size(); ++i) s += nu * h1_sq[i] + 0.5 * upwind[i];
    return std::sqrt(dt * s);
}

inline double eoc(double e_coarse, double e_fine, double h_coarse, double h_fine) {
    return std::log(e_coarse / e_fine) / std::log(h_coarse / h_fine);
}

struct RunResult {
    std::string family;
    double nu = 0;
    int k = 1;
    int ndof = 0;
    double h = 0;
    double err_linf_l2 = std::numeric_limits<double>::quiet_NaN();
    double err_sharp = std::numeric_limits<double>::quiet_NaN();
    double eoc_linf_l2 = std::numeric_limits<double>::quiet_NaN();
    double eoc_sharp = std::numeric_limits<double>::quiet_NaN();
    double max_divergence = 0;
    double max_pressure_mean = 0;
    double wall_seconds = 0;
    long steps = 0;
    std::string status = "ok";
};

struct RunOptions {
    int k = 1;
    double nu = 1e-2;
    double dt = 1e-3;
    double t_final = 0.2;
    int quad_bump = 0;
    bool condense = false;
};

// initialize + BDF2 loop on one mesh; errors against the interpolate of the exact solution.
inline RunResult run_case(const PolyMesh& mesh, const RunOptions& o, const std::string& family = "") {
    const auto start = std::chrono::steady_clock::now();
    RunResult r;
    r.family = family;
    r.nu = o.nu;
    r.k = o.k;
    r.h = mesh.h;
    const ManufacturedSolution ms{o.nu};
    const Discretization disc(mesh, o.k, QuadratureDegrees::defaults(o.k, o.quad_bump));
    NavierStokesSolver solver(disc, {o.nu, o.dt, true, o.condense});
    const DofMap& dofs = solver.dofs();
    r.ndof = dofs.n_dof();
    const SparseMatrix H1 = h1_matrix(disc, dofs);
    auto exact = [&](double t) { return interpolate_global(disc, dofs, [&](const Vec2& x) { return ms.u(x, t); }); };
    const auto u = [&](const Vec2& x, double t) { return ms.u(x, t); };
    const auto f = [&](const Vec2& x, double t) { return ms.f(x, t); };

    TimeState s = solver.initialize(u);
    std::vector<double> l2{l2_norm(dofs, disc.n_elements(), s.u_prev - exact(0.0)),
                           l2_norm(dofs, disc.n_elements(), s.u - exact(o.dt))};
    std::vector<double> h1, up;
    const long n_steps = std::lround(o.t_final / o.dt);
    for (long n = 2; n <= n_steps; ++n) {
        const VectorXd w = solver.extrapolant(s);
        s = solver.step(s, f);
        s.t = n * o.dt; // avoid drift from repeated additions
        const VectorXd e = s.u - exact(s.t);
        l2.push_back(l2_norm(dofs, disc.n_elements(), e));
        h1.push_back(e.dot(H1 * e));
        const ConvectionContext cc = convection_context(disc, dofs, w, std::numeric_limits<double>::infinity());
        up.push_back(upwind_jump_energy(disc, cc, [&](std::size_t t) { return dofs.local(static_cast<int>(t), e); }));
        r.max_divergence = std::max(r.max_divergence, max_divergence(disc, dofs, s.u));
        r.max_pressure_mean = std::max(r.max_pressure_mean, std::abs(pressure_mean(disc, s.p)));
    }
    r.steps = n_steps;
    r.err_linf_l2 = error_linf_l2(l2);
    r.err_sharp = error_sharp(h1, up, o.nu, o.dt);
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

// Fills eoc fields of consecutive entries of one (family, nu) sequence.
inline void compute_eocs(std::vector<RunResult>& seq) {
    for (std::size_t i = 1; i < seq.size(); ++i) {
        if (seq[i - 1].status != "ok" || seq[i].status != "ok") continue;
        seq[i].eoc_linf_l2 = eoc(seq[i - 1].err_linf_l2, seq[i].err_linf_l2, seq[i - 1].h, seq[i].h);
        seq[i].eoc_sharp = eoc(seq[i - 1].err_sharp, seq[i].err_sharp, seq[i - 1].h, seq[i].h);
    }
}

struct StudyConfig {
    std::string family = "cartesian"; // cartesian | hexagonal | files
    std::vector<std::string> mesh_files;
    std::vector<int> refinements;
    int k = 1;
    std::vector<double> nu_list{1e-2};
    double dt = 1e-3;
    double t_final = 0.2;
    int quad_bump = 0;
    bool condense = false;
    bool timing = true;
    std::string out_dir = ".";
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::string s = v;
    for (char& c : s)
        if (c == ',' || c == ';') c = ' ';
    std::istringstream is(s);
    std::vector<std::string> out;
    for (std::string w; is >> w;) out.push_back(w);
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    std::istringstream is(v);
    T x{};
    if (!(is >> x) || !(is >> std::ws).eof()) throw ConfigError("bad value for '" + key + "': '" + v + "'");
    return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("bad boolean for '" + key + "': '" + v + "'");
}

} // namespace detail

// Flat `key = value` text with '#' comments.
inline StudyConfig parse_config(std::istream& is) {
    StudyConfig c;
    std::string line;
    int lineno = 0;
    bool have_ref = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq)), val = detail::trim(line.substr(eq + 1));
        if (key == "family") {
            if (val != "cartesian" && val != "hexagonal" && val != "files") throw ConfigError("unknown family '" + val + "'");
            c.family = val;
        } else if (key == "mesh_files") {
            c.mesh_files = detail::split_list(val);
        } else if (key == "refinements") {
            c.refinements.clear();
            for (const auto& w : detail::split_list(val)) c.refinements.push_back(detail::parse_number<int>(key, w));
            have_ref = true;
        } else if (key == "k") {
            c.k = detail::parse_number<int>(key, val);
        } else if (key == "nu_list") {
            c.nu_list.clear();
            for (const auto& w : detail::split_list(val)) c.nu_list.push_back(detail::parse_number<double>(key, w));
        } else if (key == "dt") {
            c.dt = detail::parse_number<double>(key, val);
        } else if (key == "t_final") {
            c.t_final = detail::parse_number<double>(key, val);
        } else if (key == "quad_bump") {
            c.quad_bump = detail::parse_number<int>(key, val);
        } else if (key == "condense") {
            c.condense = detail::parse_bool(key, val);
        } else if (key == "timing") {
            c.timing = detail::parse_bool(key, val);
        } else if (key == "out_dir") {
            c.out_dir = val;
        } else {
            throw ConfigError("unknown key '" + key + "' on line " + std::to_string(lineno));
        }
    }
    if (c.family == "files") {
        if (c.mesh_files.empty()) throw ConfigError("family 'files' needs a non-empty mesh_files list");
    } else {
        if (!have_ref || c.refinements.empty()) throw ConfigError("empty refinement list");
        for (int n : c.refinements)
            if (n < 1) throw ConfigError("refinements must be positive");
    }
    if (c.nu_list.empty()) throw ConfigError("empty nu_list");
    for (double nu : c.nu_list)
        if (!(nu > 0)) throw ConfigError("nu must be positive");
    if (c.k < 0 || c.k > 3) throw ConfigError("k must be in [0, 3]");
    if (!(c.dt > 0) || !(c.t_final >= 2 * c.dt)) throw ConfigError("need dt > 0 and t_final >= 2 dt");
    if (c.quad_bump < 0) throw ConfigError("quad_bump must be >= 0");
    return c;
}

inline StudyConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path + "'");
    return parse_config(is);
}

inline std::vector<PolyMesh> study_meshes(const StudyConfig& c) {
    std::vector<PolyMesh> meshes;
    if (c.family == "cartesian")
        for (int n : c.refinements) meshes.push_back(generate_cartesian(n));
    else if (c.family == "hexagonal")
        for (int l : c.refinements) meshes.push_back(generate_hexagonal(l));
    else
        for (const auto& f : c.mesh_files) meshes.push_back(load_mesh(f));
    return meshes;
}

inline std::string format_number(double x) {
    if (std::isnan(x)) return "";
    std::ostringstream os;
    os << std::scientific << std::setprecision(6) << x;
    return os.str();
}

inline void write_csv(std::ostream& os, const std::vector<RunResult>& rows, bool timing = true) {
    os << "family,nu,ndof,h,err_linf_l2,eoc_linf_l2,err_sharp,eoc_sharp,wall_seconds\n";
    for (const auto& r : rows) {
        os << r.family << ',' << format_number(r.nu) << ',' << r.ndof << ',' << format_number(r.h) << ','
           << format_number(r.err_linf_l2) << ',';
        if (!std::isnan(r.eoc_linf_l2)) os << std::fixed << std::setprecision(3) << r.eoc_linf_l2 << std::defaultfloat;
        os << ',' << format_number(r.err_sharp) << ',';
        if (!std::isnan(r.eoc_sharp)) os << std::fixed << std::setprecision(3) << r.eoc_sharp << std::defaultfloat;
        os << ',' << std::fixed << std::setprecision(3) << (timing ? r.wall_seconds : 0.0) << std::defaultfloat << '\n';
    }
}

inline void write_table(std::ostream& os, const std::vector<RunResult>& rows) {
    auto nu_str = [](double x) {
        std::ostringstream s;
        s << std::scientific << std::setprecision(0) << x;
        return s.str();
    };
    auto eoc_str = [](double x) {
        if (std::isnan(x)) return std::string("-");
        std::ostringstream s;
        s << std::fixed << std::setprecision(2) << x;
        return s.str();
    };
    os << std::left << std::setw(10) << "family" << std::right << std::setw(10) << "nu" << std::setw(9) << "ndof"
       << std::setw(14) << "h" << std::setw(14) << "err_linf_l2" << std::setw(7) << "eoc" << std::setw(14) << "err_sharp"
       << std::setw(7) << "eoc" << std::setw(10) << "seconds" << "  status\n";
    for (const auto& r : rows)
        os << std::left << std::setw(10) << r.family << std::right << std::setw(10) << nu_str(r.nu)
           << std::setw(9) << r.ndof << std::setw(14) << format_number(r.h) << std::setw(14) << format_number(r.err_linf_l2)
           << std::setw(7) << eoc_str(r.eoc_linf_l2) << std::setw(14) << format_number(r.err_sharp) << std::setw(7)
           << eoc_str(r.eoc_sharp) << std::setw(10) << std::fixed << std::setprecision(1) << r.wall_seconds
           << std::defaultfloat << "  " << r.status << '\n';
}

// Runs every (nu, mesh) pair of the configuration; a failing run is recorded and does not
// stop the study. Writes errors.csv into out_dir when out_dir is non-empty.
inline std::vector<RunResult> run_convergence_study(const StudyConfig& c, std::ostream* log = nullptr) {
    const std::vector<PolyMesh> meshes = study_meshes(c);
    std::vector<RunResult> all;
    for (double nu : c.nu_list) {
        std::vector<RunResult> seq;
        for (const auto& mesh : meshes) {
            RunOptions o{c.k, nu, c.dt, c.t_final, c.quad_bump, c.condense};
            RunResult r;
            try {
                r = run_case(mesh, o, c.family);
            } catch (const std::exception& e) {
                r.family = c.family;
                r.nu = nu;
                r.k = c.k;
                r.h = mesh.h;
                r.status = std::string("failed: ") + e.what();
            }
            if (log) *log << "  " << c.family << " nu=" << nu << " ndof=" << r.ndof << " " << r.status << std::endl;
            seq.push_back(r);
        }
        compute_eocs(seq);
        all.insert(all.end(), seq.begin(), seq.end());
    }
    if (!c.out_dir.empty()) {
        std::filesystem::create_directories(c.out_dir);
        std::ofstream os(std::filesystem::path(c.out_dir) / "errors.csv");
        if (!os) throw ConfigError("cannot write errors.csv in '" + c.out_dir + "'");
        write_csv(os, all, c.timing);
    }
    return all;
}

} // namespace hhoflow
