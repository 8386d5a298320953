#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "forms.hpp"

namespace hhoflow {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Global numbering: element velocity dofs, interior face velocity dofs, element pressure
// dofs, then one Lagrange multiplier for the zero-mean pressure constraint. Boundary face
// dofs are eliminated (homogeneous wall condition).
class DofMap {
public:
    explicit DofMap(const Discretization& disc) : layout_(disc.layout()) {
        const PolyMesh& mesh = disc.mesh();
        const Layout& L = layout_;
        const int ne = static_cast<int>(mesh.n_elements());
        std::vector<int> face_pos(mesh.n_faces(), -1);
        int nif = 0;
        for (int f : mesh.interior_face_ids) face_pos[f] = nif++;
        n_velocity_ = ne * 2 * L.nc + nif * 2 * L.nf;
        n_pressure_ = ne * L.np;
        local_.resize(ne);
        for (int t = 0; t < ne; ++t) {
            const Element& el = mesh.elements[t];
            std::vector<int>& m = local_[t];
            m.assign(L.n_local(static_cast<int>(el.n_faces())), -1);
            for (int i = 0; i < 2 * L.nc; ++i) m[i] = t * 2 * L.nc + i;
            for (std::size_t j = 0; j < el.n_faces(); ++j) {
                const int p = face_pos[el.face_ids[j]];
                if (p < 0) continue;
                for (int i = 0; i < 2 * L.nf; ++i) m[L.face(static_cast<int>(j), 0, 0) + i] = ne * 2 * L.nc + p * 2 * L.nf + i;
            }
        }
    }

    const Layout& layout() const { return layout_; }
    int n_velocity() const { return n_velocity_; }
    int n_pressure() const { return n_pressure_; }
    // velocity plus pressure unknowns; the multiplier is not counted
    int n_dof() const { return n_velocity_ + n_pressure_; }
    int n_system() const { return n_dof() + 1; }
    int multiplier() const { return n_dof(); }
    int pressure(int t, int i) const { return n_velocity_ + t * layout_.np + i; }
    const std::vector<int>& velocity(int t) const { return local_[t]; }

    VectorXd local(int t, const VectorXd& u) const {
        const auto& m = local_[t];
        VectorXd x = VectorXd::Zero(m.size());
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m[i] >= 0) x(i) = u(m[i]);
        return x;
    }
    VectorXd local_pressure(int t, const VectorXd& p) const { return p.segment(t * layout_.np, layout_.np); }

    void scatter_add(int t, const VectorXd& x, VectorXd& u) const {
        const auto& m = local_[t];
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m[i] >= 0) u(m[i]) += x(i);
    }

private:
    Layout layout_;
    int n_velocity_ = 0;
    int n_pressure_ = 0;
    std::vector<std::vector<int>> local_;
};

// I_h^k u restricted to the unknowns (boundary face values are dropped).
inline VectorXd interpolate_global(const Discretization& disc, const DofMap& dofs, const VectorField& u) {
    VectorXd x = VectorXd::Zero(dofs.n_velocity());
    for (std::size_t t = 0; t < disc.n_elements(); ++t) {
        const VectorXd loc = interpolate(disc.context(t), u);
        const auto& m = dofs.velocity(static_cast<int>(t));
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m[i] >= 0) x(m[i]) = loc(i);
    }
    return x;
}

inline VectorXd project_pressure(const Discretization& disc, const ScalarField& p) {
    const int np = disc.layout().np;
    VectorXd x(disc.n_elements() * np);
    for (std::size_t t = 0; t < disc.n_elements(); ++t)
        x.segment(t * np, np) = project(p, disc.context(t).pressure_space(), disc.context(t).field_quadratures());
    return x;
}

inline double max_divergence(const Discretization& disc, const DofMap& dofs, const VectorXd& u) {
    double m = 0;
    for (std::size_t t = 0; t < disc.n_elements(); ++t)
        m = std::max(m, (disc.ops(t).D * dofs.local(static_cast<int>(t), u)).norm());
    return m;
}

inline double pressure_mean(const Discretization& disc, const VectorXd& p) {
    const int np = disc.layout().np;
    double s = 0;
    for (std::size_t t = 0; t < disc.n_elements(); ++t) s += disc.ops(t).pressure_int.dot(p.segment(t * np, np));
    return s;
}

// l_h(phi, .) as a global velocity vector.
inline VectorXd load_vector(const Discretization& disc, const DofMap& dofs, const VectorField& phi) {
    std::vector<VectorXd> loc(disc.n_elements());
    parallel_for(disc.n_elements(), [&](std::size_t t) { loc[t] = body_force(disc.context(t), disc.ops(t), phi); });
    VectorXd b = VectorXd::Zero(dofs.n_velocity());
    for (std::size_t t = 0; t < loc.size(); ++t) dofs.scatter_add(static_cast<int>(t), loc[t], b);
    return b;
}

inline ConvectionContext convection_context(const Discretization& disc, const DofMap& dofs, const VectorXd& w,
                                            double div_tol = 1e-8) {
    return make_convection_context(disc, [&](std::size_t t) { return dofs.local(static_cast<int>(t), w); }, div_tol);
}

// Global bilinear forms as sparse velocity matrices (no constraint rows).
inline SparseMatrix assemble_velocity_form(const Discretization& disc, const DofMap& dofs,
                                           const std::function<MatrixXd(std::size_t)>& block) {
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t t = 0; t < disc.n_elements(); ++t) {
        const MatrixXd B = block(t);
        const auto& m = dofs.velocity(static_cast<int>(t));
        for (std::size_t i = 0; i < m.size(); ++i)
            for (std::size_t j = 0; j < m.size(); ++j)
                if (m[i] >= 0 && m[j] >= 0) trip.emplace_back(m[i], m[j], B(i, j));
    }
    SparseMatrix A(dofs.n_velocity(), dofs.n_velocity());
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

inline SparseMatrix mass_matrix(const Discretization& disc, const DofMap& dofs) {
    return assemble_velocity_form(disc, dofs, [&](std::size_t t) { return disc.ops(t).aR; });
}

inline SparseMatrix viscous_matrix(const Discretization& disc, const DofMap& dofs) {
    return assemble_velocity_form(disc, dofs, [&](std::size_t t) { return disc.ops(t).A; });
}

// |v|_{1,h}^2 as a velocity matrix.
inline SparseMatrix h1_matrix(const Discretization& disc, const DofMap& dofs) {
    return assemble_velocity_form(disc, dofs, [&](std::size_t t) {
        return lift_scalar(disc.ops(t).N1, disc.layout(), disc.context(t).n_faces());
    });
}

// t_h(w, ., .) as a velocity matrix (rows: test function).
inline SparseMatrix convection_matrix(const Discretization& disc, const DofMap& dofs, const ConvectionContext& cc,
                                      ConvectionOptions opt = {}) {
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t t = 0; t < disc.n_elements(); ++t) {
        const MatrixXd C = convection_element_block(disc, cc, t, opt);
        const auto& m = dofs.velocity(static_cast<int>(t));
        for (std::size_t i = 0; i < m.size(); ++i)
            for (std::size_t j = 0; j < m.size(); ++j)
                if (m[i] >= 0 && m[j] >= 0) trip.emplace_back(m[i], m[j], C(i, j));
    }
    if (opt.upwind)
        for (int f : disc.mesh().interior_face_ids) {
            const Face& face = disc.mesh().faces[f];
            const MatrixXd C = convection_face_block(disc, cc, f);
            std::vector<int> m = dofs.velocity(face.elements[0]);
            const auto& m2 = dofs.velocity(face.elements[1]);
            m.insert(m.end(), m2.begin(), m2.end());
            for (std::size_t i = 0; i < m.size(); ++i)
                for (std::size_t j = 0; j < m.size(); ++j)
                    if (m[i] >= 0 && m[j] >= 0) trip.emplace_back(m[i], m[j], C(i, j));
        }
    SparseMatrix A(dofs.n_velocity(), dofs.n_velocity());
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

struct SolverOptions {
    double nu = 1e-2;
    double dt = 1e-3;
    bool convection = true;
    bool condense = false;
    // 0: factorize every solve. Otherwise the last LU factors precondition BiCGSTAB and are
    // recomputed once more than this many iterations are needed.
    int reuse_iterations = 12;
};

struct TimeState {
    VectorXd u;      // u^n
    VectorXd u_prev; // u^{n-1}
    VectorXd p;      // p^n
    double t = 0;
    double dt = 0;
    long step = 1;
};

struct LinearSolveStats {
    double residual = 0;
    int refinements = 0;
    int iterations = 0;
    bool factorized = false;
};

namespace detail {

// Preconditioner backed by an existing sparse LU factorization.
class FactorizationPreconditioner {
public:
    using LU = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>;
    FactorizationPreconditioner() = default;
    template <class M>
    explicit FactorizationPreconditioner(const M&) {}
    void set(const LU* lu) { lu_ = lu; }
    template <class M>
    FactorizationPreconditioner& analyzePattern(const M&) { return *this; }
    template <class M>
    FactorizationPreconditioner& factorize(const M&) { return *this; }
    template <class M>
    FactorizationPreconditioner& compute(const M&) { return *this; }
    template <class R>
    VectorXd solve(const R& b) const { return lu_->solve(VectorXd(b)); }
    Eigen::ComputationInfo info() const { return Eigen::Success; }

private:
    const LU* lu_ = nullptr;
};

} // namespace detail

namespace detail {

// Exact Schur complement on the element velocity unknowns [0, ne): dense, for small systems.
inline VectorXd condensed_solve(const SparseMatrix& A, const VectorXd& b, int ne) {
    const int n = static_cast<int>(A.rows());
    const int ng = n - ne;
    const SparseMatrix Aee = A.topLeftCorner(ne, ne);
    const SparseMatrix Aeg = A.topRightCorner(ne, ng);
    const SparseMatrix Age = A.bottomLeftCorner(ng, ne);
    const SparseMatrix Agg = A.bottomRightCorner(ng, ng);
    Eigen::SparseLU<SparseMatrix> lu(Aee);
    if (lu.info() != Eigen::Success) throw LinearSolveFailure("element block is singular");
    const MatrixXd X = lu.solve(MatrixXd(Aeg));
    const VectorXd y = lu.solve(b.head(ne));
    const MatrixXd S = MatrixXd(Agg) - Age * X;
    const VectorXd xg = S.partialPivLu().solve(b.tail(ng) - Age * y);
    VectorXd x(n);
    x.head(ne) = y - X * xg;
    x.tail(ng) = xg;
    return x;
}

} // namespace detail

// Saddle-point system of the BDF2 scheme on a fixed sparsity pattern: the static part is
// stored once, convection values are added through precomputed slots each step.
class NavierStokesSolver {
public:
    NavierStokesSolver(const Discretization& disc, SolverOptions opt) : disc_(disc), dofs_(disc), opt_(opt) {
        build_pattern();
    }
    NavierStokesSolver(const NavierStokesSolver&) = delete;
    NavierStokesSolver& operator=(const NavierStokesSolver&) = delete;

    const DofMap& dofs() const { return dofs_; }
    const Discretization& discretization() const { return disc_; }
    const SolverOptions& options() const { return opt_; }
    const SparseMatrix& mass() const { return mass_; }
    const LinearSolveStats& last_solve() const { return stats_; }
    long factorizations() const { return n_factorizations_; }

    // u^0 = I u(t0), u^1 = I u(t0 + dt).
    TimeState initialize(const std::function<Vec2(const Vec2&, double)>& u, double t0 = 0.0) const {
        TimeState s;
        s.dt = opt_.dt;
        s.u_prev = interpolate_global(disc_, dofs_, [&](const Vec2& x) { return u(x, t0); });
        s.u = interpolate_global(disc_, dofs_, [&](const Vec2& x) { return u(x, t0 + opt_.dt); });
        s.p = VectorXd::Zero(dofs_.n_pressure());
        s.t = t0 + opt_.dt;
        s.step = 1;
        return s;
    }

    TimeState zero_state(double t0 = 0.0) const {
        TimeState s;
        s.dt = opt_.dt;
        s.u = s.u_prev = VectorXd::Zero(dofs_.n_velocity());
        s.p = VectorXd::Zero(dofs_.n_pressure());
        s.t = t0 + opt_.dt;
        return s;
    }

    // Transport field of the step producing u^{n+1}.
    VectorXd extrapolant(const TimeState& s) const { return 2.0 * s.u - s.u_prev; }

    // One BDF2 step; f is evaluated at the new time level.
    TimeState step(const TimeState& s, const std::function<Vec2(const Vec2&, double)>& f) {
        if (s.u.size() != dofs_.n_velocity() || s.u_prev.size() != dofs_.n_velocity())
            throw InsufficientHistory("two velocity history states are required");
        const double t_new = s.t + opt_.dt;
        const VectorXd w = extrapolant(s);
        VectorXd values = static_values_;
        if (opt_.convection) {
            const double div = max_divergence(disc_, dofs_, w);
            if (div > 1e-8 * std::max(1.0, w.norm()))
                throw ExtrapolantNotDivFree("max |D_T w| = " + std::to_string(div));
            const ConvectionContext cc = convection_context(disc_, dofs_, w, std::numeric_limits<double>::infinity());
            add_convection(cc, values);
        }
        std::copy(values.data(), values.data() + values.size(), system_.valuePtr());

        VectorXd rhs = VectorXd::Zero(dofs_.n_system());
        rhs.head(dofs_.n_velocity()) = mass_ * (4.0 * s.u - s.u_prev) / (2.0 * opt_.dt) +
                                       load_vector(disc_, dofs_, [&](const Vec2& x) { return f(x, t_new); });
        const VectorXd x = solve(system_, rhs);

        TimeState out;
        out.dt = opt_.dt;
        out.u_prev = s.u;
        out.u = x.head(dofs_.n_velocity());
        out.p = x.segment(dofs_.n_velocity(), dofs_.n_pressure());
        out.t = t_new;
        out.step = s.step + 1;
        return out;
    }

    // Solves the assembled system with iterative refinement; throws if the relative residual
    // stays above 1e-10.
    VectorXd solve(const SparseMatrix& A, const VectorXd& b) {
        VectorXd x;
        if (opt_.condense) {
            x = detail::condensed_solve(A, b, static_cast<int>(disc_.n_elements()) * 2 * dofs_.layout().nc);
            stats_ = {};
        } else {
            stats_ = {};
            if (factorized_ && opt_.reuse_iterations > 0 && b.norm() > 0) {
                Eigen::BiCGSTAB<SparseMatrix, detail::FactorizationPreconditioner> it;
                it.compute(A);
                it.preconditioner().set(&lu_);
                it.setTolerance(1e-12);
                it.setMaxIterations(opt_.reuse_iterations);
                x = it.solve(b);
                stats_.iterations = static_cast<int>(it.iterations());
                if (it.info() == Eigen::Success && x.allFinite() && (b - A * x).norm() <= 1e-10 * b.norm()) {
                    stats_.residual = (b - A * x).norm() / b.norm();
                    return x;
                }
            }
            if (!analyzed_) {
                lu_.analyzePattern(A);
                analyzed_ = true;
            }
            lu_.factorize(A);
            if (lu_.info() != Eigen::Success) throw LinearSolveFailure("sparse LU factorization failed");
            factorized_ = true;
            stats_.factorized = true;
            ++n_factorizations_;
            x = lu_.solve(b);
        }
        const double bn = std::max(b.norm(), std::numeric_limits<double>::min());
        VectorXd r = b - A * x;
        while (r.norm() > 1e-10 * bn && stats_.refinements < 3 && !opt_.condense) {
            x += lu_.solve(r);
            r = b - A * x;
            ++stats_.refinements;
        }
        stats_.residual = b.norm() > 0 ? r.norm() / b.norm() : r.norm();
        if (!x.allFinite() || (b.norm() > 0 && stats_.residual > 1e-10) || (b.norm() == 0 && r.norm() > 1e-12))
            throw LinearSolveFailure("relative residual " + std::to_string(stats_.residual));
        return x;
    }

    // Static part of the system matrix (no convection), for tests.
    SparseMatrix static_matrix() const {
        SparseMatrix A = system_;
        std::copy(static_values_.data(), static_values_.data() + static_values_.size(), A.valuePtr());
        return A;
    }

private:
    int slot(int r, int c) const {
        const int* inner = system_.innerIndexPtr();
        const int* begin = inner + system_.outerIndexPtr()[c];
        const int* end = inner + system_.outerIndexPtr()[c + 1];
        const int* it = std::lower_bound(begin, end, r);
        return static_cast<int>(it - inner);
    }

    void build_pattern() {
        const Layout& L = dofs_.layout();
        const int ne = static_cast<int>(disc_.n_elements());
        const double c0 = 3.0 / (2.0 * opt_.dt);
        std::vector<Eigen::Triplet<double>> trip, pat;
        for (int t = 0; t < ne; ++t) {
            const ElementOperators& op = disc_.ops(t);
            const auto& m = dofs_.velocity(t);
            const MatrixXd K = c0 * op.aR + opt_.nu * op.A;
            const MatrixXd B = coupling_form(op);
            for (std::size_t i = 0; i < m.size(); ++i) {
                if (m[i] < 0) continue;
                for (std::size_t j = 0; j < m.size(); ++j)
                    if (m[j] >= 0) trip.emplace_back(m[i], m[j], K(i, j));
                for (int a = 0; a < L.np; ++a) {
                    trip.emplace_back(m[i], dofs_.pressure(t, a), B(a, i));
                    trip.emplace_back(dofs_.pressure(t, a), m[i], -B(a, i));
                }
            }
            for (int a = 0; a < L.np; ++a) {
                trip.emplace_back(dofs_.pressure(t, a), dofs_.multiplier(), op.pressure_int(a));
                trip.emplace_back(dofs_.multiplier(), dofs_.pressure(t, a), op.pressure_int(a));
            }
        }
        pat = trip;
        for (auto& p : pat) p = Eigen::Triplet<double>(p.row(), p.col(), 0.0);
        if (opt_.convection)
            for (int f : disc_.mesh().interior_face_ids)
                for (const int a : pair_dofs(f))
                    for (const int b : pair_dofs(f))
                        if (a >= 0 && b >= 0) pat.emplace_back(a, b, 0.0);
        system_.resize(dofs_.n_system(), dofs_.n_system());
        system_.setFromTriplets(pat.begin(), pat.end());
        system_.makeCompressed();

        static_values_ = VectorXd::Zero(system_.nonZeros());
        for (const auto& tr : trip) static_values_(slot(tr.row(), tr.col())) += tr.value();

        if (opt_.convection) {
            elem_slots_.resize(ne);
            for (int t = 0; t < ne; ++t) elem_slots_[t] = block_slots(dofs_.velocity(t));
            face_slots_.clear();
            for (int f : disc_.mesh().interior_face_ids) face_slots_.push_back(block_slots(pair_dofs(f)));
        }
        mass_ = mass_matrix(disc_, dofs_);
    }

    std::vector<int> pair_dofs(int f) const {
        const Face& face = disc_.mesh().faces[f];
        std::vector<int> m = dofs_.velocity(face.elements[0]);
        const auto& m2 = dofs_.velocity(face.elements[1]);
        m.insert(m.end(), m2.begin(), m2.end());
        return m;
    }

    // column-major slots of a dense local block, -1 for eliminated dofs
    std::vector<int> block_slots(const std::vector<int>& m) const {
        std::vector<int> s(m.size() * m.size(), -1);
        for (std::size_t j = 0; j < m.size(); ++j)
            for (std::size_t i = 0; i < m.size(); ++i)
                if (m[i] >= 0 && m[j] >= 0) s[j * m.size() + i] = slot(m[i], m[j]);
        return s;
    }

    void add_convection(const ConvectionContext& cc, VectorXd& values) const {
        const int ne = static_cast<int>(disc_.n_elements());
        std::vector<MatrixXd> eb(ne);
        parallel_for(ne, [&](std::size_t t) { eb[t] = convection_element_block(disc_, cc, t); });
        for (int t = 0; t < ne; ++t) {
            const double* v = eb[t].data();
            const auto& s = elem_slots_[t];
            for (std::size_t i = 0; i < s.size(); ++i)
                if (s[i] >= 0) values(s[i]) += v[i];
        }
        const auto& ids = disc_.mesh().interior_face_ids;
        std::vector<MatrixXd> fb(ids.size());
        parallel_for(ids.size(), [&](std::size_t i) { fb[i] = convection_face_block(disc_, cc, ids[i]); });
        for (std::size_t f = 0; f < ids.size(); ++f) {
            const double* v = fb[f].data();
            const auto& s = face_slots_[f];
            for (std::size_t i = 0; i < s.size(); ++i)
                if (s[i] >= 0) values(s[i]) += v[i];
        }
    }

    const Discretization& disc_;
    DofMap dofs_;
    SolverOptions opt_;
    SparseMatrix system_;
    SparseMatrix mass_;
    VectorXd static_values_;
    std::vector<std::vector<int>> elem_slots_;
    std::vector<std::vector<int>> face_slots_;
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
    bool analyzed_ = false;
    bool factorized_ = false;
    long n_factorizations_ = 0;
    LinearSolveStats stats_;
};

// Stationary Stokes problem nu a_h(u, v) + b_h(v, p) - b_h(u, q) = l_h(f, v) with zero-mean p.
struct StokesSolution {
    VectorXd u, p;
};

inline StokesSolution solve_stokes(const Discretization& disc, double nu, const VectorField& f) {
    SolverOptions opt;
    opt.nu = nu;
    opt.convection = false;
    opt.dt = std::numeric_limits<double>::infinity(); // drops the mass term
    NavierStokesSolver s(disc, opt);
    const DofMap& dofs = s.dofs();
    VectorXd rhs = VectorXd::Zero(dofs.n_system());
    rhs.head(dofs.n_velocity()) = load_vector(disc, dofs, f);
    const VectorXd x = s.solve(s.static_matrix(), rhs);
    return {x.head(dofs.n_velocity()), x.segment(dofs.n_velocity(), dofs.n_pressure())};
}

// Euclidean projection of v onto {u : D_T^k u_T = 0 for all T}.
inline VectorXd project_divergence_free(const Discretization& disc, const DofMap& dofs, const VectorXd& v) {
    const Layout& L = dofs.layout();
    const int ne = static_cast<int>(disc.n_elements());
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < dofs.n_velocity(); ++i) trip.emplace_back(i, i, 1.0);
    for (int t = 0; t < ne; ++t) {
        const MatrixXd& D = disc.ops(t).D;
        const auto& m = dofs.velocity(t);
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m[i] >= 0)
                for (int a = 0; a < L.np; ++a) {
                    trip.emplace_back(m[i], dofs.pressure(t, a), D(a, i));
                    trip.emplace_back(dofs.pressure(t, a), m[i], D(a, i));
                }
        for (int a = 0; a < L.np; ++a) {
            trip.emplace_back(dofs.pressure(t, a), dofs.multiplier(), disc.ops(t).pressure_int(a));
            trip.emplace_back(dofs.multiplier(), dofs.pressure(t, a), disc.ops(t).pressure_int(a));
        }
    }
    SparseMatrix A(dofs.n_system(), dofs.n_system());
    A.setFromTriplets(trip.begin(), trip.end());
    VectorXd rhs = VectorXd::Zero(dofs.n_system());
    rhs.head(dofs.n_velocity()) = v;
    Eigen::SparseLU<SparseMatrix> lu(A);
    if (lu.info() != Eigen::Success) throw LinearSolveFailure("projection system is singular");
    VectorXd x = lu.solve(rhs);
    x += lu.solve(rhs - A * x);
    return x.head(dofs.n_velocity());
}

// Versioned text checkpoint of a time state; values are written with round-trip precision.
inline constexpr int checkpoint_version = 1;

inline void write_checkpoint(std::ostream& os, const TimeState& s, int k) {
    auto vec = [&](const char* name, const VectorXd& v) {
        os << name << ' ' << v.size() << '\n';
        for (Eigen::Index i = 0; i < v.size(); ++i) os << v(i) << '\n';
    };
    os << std::setprecision(17);
    os << "hhoflow-checkpoint " << checkpoint_version << '\n';
    os << "k " << k << '\n' << "t " << s.t << '\n' << "dt " << s.dt << '\n' << "step " << s.step << '\n';
    vec("u", s.u);
    vec("u_prev", s.u_prev);
    vec("p", s.p);
}

inline TimeState read_checkpoint(std::istream& is, int* k_out = nullptr) {
    auto expect = [&](const std::string& key) {
        std::string w;
        if (!(is >> w) || w != key) throw ParseError("checkpoint: expected '" + key + "'");
    };
    auto vec = [&](const std::string& name) {
        expect(name);
        long n = -1;
        if (!(is >> n) || n < 0) throw ParseError("checkpoint: bad size for " + name);
        VectorXd v(n);
        for (long i = 0; i < n; ++i)
            if (!(is >> v(i))) throw ParseError("checkpoint: truncated " + name);
        return v;
    };
    expect("hhoflow-checkpoint");
    int version = 0;
    if (!(is >> version) || version != checkpoint_version)
        throw ParseError("checkpoint: unsupported version " + std::to_string(version));
    TimeState s;
    int k = 0;
    expect("k");
    if (!(is >> k)) throw ParseError("checkpoint: bad k");
    expect("t");
    if (!(is >> s.t)) throw ParseError("checkpoint: bad t");
    expect("dt");
    if (!(is >> s.dt)) throw ParseError("checkpoint: bad dt");
    expect("step");
    if (!(is >> s.step)) throw ParseError("checkpoint: bad step");
    s.u = vec("u");
    s.u_prev = vec("u_prev");
    s.p = vec("p");
    if (s.u.size() != s.u_prev.size()) throw ParseError("checkpoint: history sizes differ");
    if (k_out) *k_out = k;
    return s;
}

} // namespace hhoflow
