#pragma once

#include <algorithm>
#include <vector>

#include <Eigen/Dense>

#include "basis.hpp"

namespace hhoflow {

inline int k_star_of(int k) { return k <= 1 ? k : k + 1; }

// Local dof ordering: element velocity (x block, y block), then per face (x block, y block).
struct Layout {
    int k = 1;
    int k_star = 1;
    int nc = 0;    // dim P^{k*}(T)
    int nf = 0;    // dim P^k(F)
    int np = 0;    // dim P^k(T), pressure
    int nhigh = 0; // dim P^{k+1}(T)

    static Layout make(int k) {
        if (k < 0) throw Error("polynomial degree must be >= 0");
        Layout L;
        L.k = k;
        L.k_star = k_star_of(k);
        L.nc = dim_poly2(L.k_star);
        L.nf = dim_poly1(k);
        L.np = dim_poly2(k);
        L.nhigh = dim_poly2(k + 1);
        return L;
    }

    int n_local(int n_faces) const { return 2 * nc + 2 * nf * n_faces; }
    int n_scalar(int n_faces) const { return nc + nf * n_faces; }
    int elem(int c, int i) const { return c * nc + i; }
    int face(int j, int c, int i) const { return 2 * nc + 2 * nf * j + c * nf + i; }
    // vector index of component c for scalar-layout index s
    int vector_index(int c, int s) const { return s < nc ? elem(c, s) : face((s - nc) / nf, c, (s - nc) % nf); }
};

struct QuadratureDegrees {
    int bilinear = 0;
    int trilinear = 0;
    int field = 0; // projections of non-polynomial fields

    static QuadratureDegrees defaults(int k, int bump = 0) {
        const int ks = k_star_of(k);
        const int bilinear = 2 * std::max(ks, k + 1) + 3 + bump;
        return {bilinear, 3 * (k + 1) + 2 + bump, std::min(bilinear + 12, max_quadrature_degree)};
    }
};

// Scalar-layout matrix applied to both velocity components.
inline MatrixXd lift_scalar(const MatrixXd& S, const Layout& L, int n_faces) {
    const int ns = L.n_scalar(n_faces);
    MatrixXd A = MatrixXd::Zero(L.n_local(n_faces), L.n_local(n_faces));
    for (int c = 0; c < 2; ++c)
        for (int s = 0; s < ns; ++s)
            for (int t = 0; t < ns; ++t) A(L.vector_index(c, s), L.vector_index(c, t)) = S(s, t);
    return A;
}

inline std::vector<FaceSpace> build_face_spaces(const PolyMesh& mesh, int k, int quad_degree) {
    std::vector<FaceSpace> spaces;
    spaces.reserve(mesh.n_faces());
    for (const auto& f : mesh.faces) spaces.emplace_back(k, f.a, f.b, quad_degree);
    return spaces;
}

// Bases and quadratures of one element.
class ElementContext {
public:
    ElementContext(const PolyMesh& mesh, int id, const Layout& layout, const QuadratureDegrees& qd,
                   const std::vector<FaceSpace>& face_spaces)
        : mesh_(&mesh), id_(id), layout_(layout), qd_(qd) {
        const Element& el = mesh.elements[id];
        quads_ = submesh_quadratures(el.submesh, qd.bilinear);
        field_quads_ = submesh_quadratures(el.submesh, std::max(qd.field, qd.bilinear));
        cell_ = ScalarSpace2D(MonomialBasis2D(layout.k_star, el.center, el.diameter), quads_);
        pressure_ = ScalarSpace2D(MonomialBasis2D(layout.k, el.center, el.diameter), quads_);
        high_ = ScalarSpace2D(MonomialBasis2D(layout.k + 1, el.center, el.diameter), quads_);
        for (std::size_t j = 0; j < el.n_faces(); ++j) {
            const Face& f = mesh.faces[el.face_ids[j]];
            face_quads_.push_back(segment_quadrature(f.a, f.b, qd.bilinear));
            field_face_quads_.push_back(segment_quadrature(f.a, f.b, std::max(qd.field, qd.bilinear)));
            face_spaces_.push_back(&face_spaces[el.face_ids[j]]);
            normals_.push_back(el.face_sign[j] * f.normal);
        }
    }

    const PolyMesh& mesh() const { return *mesh_; }
    const Element& element() const { return mesh_->elements[id_]; }
    int id() const { return id_; }
    const Layout& layout() const { return layout_; }
    const QuadratureDegrees& quadrature_degrees() const { return qd_; }
    int n_faces() const { return static_cast<int>(face_quads_.size()); }
    int n_local() const { return layout_.n_local(n_faces()); }
    int n_scalar() const { return layout_.n_scalar(n_faces()); }
    double h() const { return element().diameter; }

    const ScalarSpace2D& cell_space() const { return cell_; }
    const ScalarSpace2D& pressure_space() const { return pressure_; }
    const ScalarSpace2D& high_space() const { return high_; } // P^{k+1}(T)
    const FaceSpace& face_space(int j) const { return *face_spaces_[j]; }
    const std::vector<Quadrature>& quadratures() const { return quads_; }
    const Quadrature& face_quadrature(int j) const { return face_quads_[j]; }
    const std::vector<Quadrature>& field_quadratures() const { return field_quads_; }
    const Quadrature& field_face_quadrature(int j) const { return field_face_quads_[j]; }
    const Vec2& normal(int j) const { return normals_[j]; } // n_TF
    double face_length(int j) const { return mesh_->faces[element().face_ids[j]].length; }

    // monomials of degree l scaled by (x_T, h_T), shared by all simplices of the element
    MonomialBasis2D monomials(int l) const { return MonomialBasis2D(l, element().center, element().diameter); }

private:
    const PolyMesh* mesh_;
    int id_;
    Layout layout_;
    QuadratureDegrees qd_;
    std::vector<Quadrature> quads_;
    ScalarSpace2D cell_, pressure_, high_;
    std::vector<Quadrature> face_quads_;
    std::vector<Quadrature> field_quads_, field_face_quads_;
    std::vector<const FaceSpace*> face_spaces_;
    std::vector<Vec2> normals_;
};

// I_T^k: element dofs pi_T^{k*} v, face dofs pi_F^k v.
inline VectorXd interpolate(const ElementContext& ctx, const VectorField& v) {
    const Layout& L = ctx.layout();
    VectorXd x = VectorXd::Zero(ctx.n_local());
    x.head(2 * L.nc) = project(v, ctx.cell_space(), ctx.field_quadratures());
    for (int j = 0; j < ctx.n_faces(); ++j)
        x.segment(L.face(j, 0, 0), 2 * L.nf) = project(v, ctx.face_space(j), ctx.field_face_quadrature(j));
    return x;
}

// D_T^k in the orthonormal P^k(T) basis.
inline MatrixXd divergence_op(const ElementContext& ctx) {
    const Layout& L = ctx.layout();
    MatrixXd D = MatrixXd::Zero(L.np, ctx.n_local());
    for (const auto& q : ctx.quadratures())
        for (std::size_t i = 0; i < q.size(); ++i) {
            const VectorXd phi = ctx.cell_space().values(q.points[i]);
            const MatrixX2d gq = ctx.pressure_space().gradients(q.points[i]);
            for (int c = 0; c < 2; ++c) D.middleCols(L.elem(c, 0), L.nc).noalias() -= q.weights[i] * gq.col(c) * phi.transpose();
        }
    for (int j = 0; j < ctx.n_faces(); ++j) {
        const Quadrature& q = ctx.face_quadrature(j);
        const Vec2& n = ctx.normal(j);
        for (std::size_t i = 0; i < q.size(); ++i) {
            const VectorXd psi = ctx.face_space(j).values(q.points[i]);
            const VectorXd pq = ctx.pressure_space().values(q.points[i]);
            for (int c = 0; c < 2; ++c)
                D.middleCols(L.face(j, c, 0), L.nf).noalias() += q.weights[i] * n(c) * pq * psi.transpose();
        }
    }
    return D;
}

// Copies the leading degree-l monomial coefficients of each component into degree L >= l.
inline MatrixXd embed_vector_coeffs(const MatrixXd& B, int l, int L) {
    const int nl = dim_poly2(l), nL = dim_poly2(L);
    MatrixXd E = MatrixXd::Zero(2 * nL, B.cols());
    E.topRows(nl) = B.topRows(nl);
    E.middleRows(nL, nl) = B.bottomRows(nl);
    return E;
}

// Raviart-Thomas-Nedelec space RT_k on the fan submesh of an element. Dofs at element
// level are ordered [interior sfaces | simplex interior moments | boundary sfaces]; edge dofs
// are moments of v.n_sigma against monomials on sigma, so shared dofs glue normal traces.
struct RTNLocalSpace {
    int k = 0;
    int n_simplices = 0;
    int n_dofs = 0;
    int n_free = 0;
    int n_per_simplex = 0;              // (k+1)(k+3)
    MonomialBasis2D poly;               // P^{k+1}, scaled by (x_T, h_T)
    std::vector<MatrixXd> basis;        // per simplex: (2 dim P^{k+1}) x n_per_simplex
    std::vector<std::vector<int>> dofs; // per simplex: local dof -> element dof

    int interior_sface_dof(int s, int m) const { return s * (k + 1) + m; }
    int moment_dof(int tau, int m) const { return n_simplices * (k + 1) + tau * k * (k + 1) + m; }
    int boundary_sface_dof(int f, int m) const { return n_free + f * (k + 1) + m; }
};

inline RTNLocalSpace rtn_local_space(const ElementContext& ctx) {
    const Element& el = ctx.element();
    const SubMesh& sm = el.submesh;
    const int k = ctx.layout().k;
    RTNLocalSpace S;
    S.k = k;
    S.n_simplices = static_cast<int>(sm.triangles.size());
    const int N = S.n_simplices;
    S.n_free = N * (k + 1) + N * k * (k + 1);
    S.n_dofs = S.n_free + N * (k + 1);
    S.n_per_simplex = (k + 1) * (k + 3);
    S.poly = ctx.monomials(k + 1);
    const int nP = S.poly.size();
    const int nk = dim_poly2(k), nkm1 = dim_poly2(k - 1);
    const int nrt = S.n_per_simplex;

    // raw basis: P_k^2 plus xi * (homogeneous degree-k monomials)
    MatrixXd raw = MatrixXd::Zero(2 * nP, nrt);
    int col = 0;
    for (int c = 0; c < 2; ++c)
        for (int a = 0; a < nk; ++a) raw(c * nP + a, col++) = 1.0;
    for (int b = 0; b <= k; ++b) {
        const int a = k - b;
        raw(MonomialBasis2D::index(a + 1, b), col) = 1.0;
        raw(nP + MonomialBasis2D::index(a, b + 1), col) = 1.0;
        ++col;
    }

    for (int t = 0; t < N; ++t) {
        const SimplicialFace* edges[3] = {&sm.interior_sfaces[t], &sm.boundary_sfaces[t][0],
                                          &sm.interior_sfaces[(t + 1) % N]};
        std::vector<int> map(nrt);
        for (int m = 0; m <= k; ++m) {
            map[m] = S.interior_sface_dof(t, m);
            map[(k + 1) + m] = S.boundary_sface_dof(t, m);
            map[2 * (k + 1) + m] = S.interior_sface_dof((t + 1) % N, m);
        }
        for (int m = 0; m < k * (k + 1); ++m) map[3 * (k + 1) + m] = S.moment_dof(t, m);

        MatrixXd moments = MatrixXd::Zero(nrt, nrt);
        VectorXd mv(nP);
        for (int e = 0; e < 3; ++e) {
            const SimplicialFace& s = *edges[e];
            const MonomialBasis1D test(k, s.a, s.b);
            const Quadrature q = segment_quadrature(s.a, s.b, 2 * k + 2);
            for (std::size_t i = 0; i < q.size(); ++i) {
                S.poly.values(q.points[i], mv.data());
                const Eigen::RowVectorXd vn = s.normal.x() * (mv.transpose() * raw.topRows(nP)) +
                                              s.normal.y() * (mv.transpose() * raw.bottomRows(nP));
                moments.middleRows(e * (k + 1), k + 1).noalias() += q.weights[i] * test.values(q.points[i]) * vn;
            }
        }
        const Quadrature& qt = ctx.quadratures()[t];
        for (std::size_t i = 0; i < qt.size(); ++i) {
            S.poly.values(qt.points[i], mv.data());
            for (int c = 0; c < 2; ++c)
                moments.block(3 * (k + 1) + c * nkm1, 0, nkm1, nrt).noalias() +=
                    qt.weights[i] * mv.head(nkm1) * (mv.transpose() * raw.middleRows(c * nP, nP));
        }
        Eigen::FullPivLU<MatrixXd> lu(moments);
        if (!lu.isInvertible()) throw SaddleSingular("RT moment matrix is singular on simplex " + std::to_string(t));
        S.basis.push_back(raw * lu.inverse());
        S.dofs.push_back(std::move(map));
    }
    return S;
}

struct RTNReconstruction {
    RTNLocalSpace space;
    MatrixXd dofs; // element RTN dofs of R_T^k v, one column per local HHO dof
    MatrixXd poly; // stacked per-simplex P^{k+1}^2 coefficients, one column per local HHO dof
    int saddle_size = 0;
    int saddle_rank = 0;

    int block_size() const { return 2 * space.poly.size(); }
    // R_T^k v as a vector piecewise polynomial
    PiecewisePoly apply(const VectorXd& v) const {
        PiecewisePoly p(space.poly, 2, space.n_simplices);
        const VectorXd c = poly * v;
        for (int t = 0; t < space.n_simplices; ++t) p.coeffs[t] = c.segment(t * block_size(), block_size());
        return p;
    }
};

// R_T^k from the local mixed problem: boundary normal traces fixed by the face unknowns,
// divergence equal to D_T^k v, moments against (x - x_T)^perp P^{k-2} equal to those of v_T,
// and the constrained L2 best approximation of v_T otherwise.
inline RTNReconstruction velocity_reconstruction(const ElementContext& ctx, const MatrixXd& D) {
    const Layout& L = ctx.layout();
    const int k = L.k;
    const Element& el = ctx.element();
    const SubMesh& sm = el.submesh;
    RTNReconstruction out;
    out.space = rtn_local_space(ctx);
    const RTNLocalSpace& S = out.space;
    const int N = S.n_simplices;
    const int nP = S.poly.size();
    const int nk = dim_poly2(k), ntheta = dim_poly2(k - 2);
    const int nloc = ctx.n_local();
    const int ndof = S.n_dofs, nfree = S.n_free, nfix = ndof - nfree;
    const double h = el.diameter;

    MatrixXd M = MatrixXd::Zero(ndof, ndof);
    MatrixXd Bpsi = MatrixXd::Zero(N * nk, ndof);
    MatrixXd Ctheta = MatrixXd::Zero(N * ntheta, ndof);
    MatrixXd rhs_b = MatrixXd::Zero(ndof, nloc);
    MatrixXd rhs_a = MatrixXd::Zero(N * nk, nloc);
    MatrixXd rhs_ab = MatrixXd::Zero(N * ntheta, nloc);
    MatrixXd Rb = MatrixXd::Zero(nfix, nloc);

    // divergence of P^{k+1}^2 monomial coefficients into P^k monomial coefficients
    MatrixXd div(nk, 2 * nP);
    div.leftCols(nP) = monomial_derivative(k + 1, 0) / h;
    div.rightCols(nP) = monomial_derivative(k + 1, 1) / h;
    const MatrixXd theta_basis = embed_vector_coeffs(koszul_complement_basis(k - 1), k - 1, k + 1);

    for (int t = 0; t < N; ++t) {
        const Quadrature& q = ctx.quadratures()[t];
        const MatrixXd mass = monomial_mass(S.poly, q);
        const MatrixXd Mv = block_diag2(mass);
        const MatrixXd& B = S.basis[t];
        const auto& map = S.dofs[t];
        const MatrixXd Mloc = B.transpose() * Mv * B;
        const MatrixXd Bloc = mass.topLeftCorner(nk, nk) * div * B;
        const MatrixXd Cloc = theta_basis.transpose() * Mv * B;
        for (int a = 0; a < S.n_per_simplex; ++a) {
            for (int b = 0; b < S.n_per_simplex; ++b) M(map[a], map[b]) += Mloc(a, b);
            Bpsi.block(t * nk, map[a], nk, 1) += Bloc.col(a);
            if (ntheta > 0) Ctheta.block(t * ntheta, map[a], ntheta, 1) += Cloc.col(a);
        }

        // right-hand sides involving v_T and D_T v
        VectorXd mv(nP);
        MatrixXd mphi = MatrixXd::Zero(nP, L.nc); // int m phi^T
        for (std::size_t i = 0; i < q.size(); ++i) {
            S.poly.values(q.points[i], mv.data());
            const VectorXd phi = ctx.cell_space().values(q.points[i]);
            mphi.noalias() += q.weights[i] * mv * phi.transpose();
            const VectorXd pq = ctx.pressure_space().values(q.points[i]);
            rhs_a.middleRows(t * nk, nk).noalias() += q.weights[i] * mv.head(nk) * (pq.transpose() * D);
        }
        const MatrixXd vT_b = B.transpose() * block_diag2(mphi); // n_per_simplex x 2nc
        for (int a = 0; a < S.n_per_simplex; ++a)
            for (int c = 0; c < 2; ++c)
                rhs_b.block(map[a], L.elem(c, 0), 1, L.nc) += vT_b.block(a, c * L.nc, 1, L.nc);
        if (ntheta > 0) {
            const MatrixXd th = theta_basis.transpose() * block_diag2(mphi);
            for (int c = 0; c < 2; ++c)
                rhs_ab.block(t * ntheta, L.elem(c, 0), ntheta, L.nc) += th.middleCols(c * L.nc, L.nc);
        }

        // boundary sface: normal moments of v_F . n_TF
        const SimplicialFace& s = sm.boundary_sfaces[t][0];
        const MonomialBasis1D test(k, s.a, s.b);
        const Quadrature qf = segment_quadrature(s.a, s.b, ctx.quadrature_degrees().bilinear);
        for (std::size_t i = 0; i < qf.size(); ++i) {
            const VectorXd tq = test.values(qf.points[i]);
            const VectorXd psi = ctx.face_space(s.face).values(qf.points[i]);
            for (int c = 0; c < 2; ++c)
                Rb.block(S.boundary_sface_dof(t, 0) - nfree, L.face(s.face, c, 0), k + 1, L.nf).noalias() +=
                    qf.weights[i] * s.normal(c) * tq * psi.transpose();
        }
    }

    const int nsys = nfree + N * nk + N * ntheta;
    MatrixXd K = MatrixXd::Zero(nsys, nsys);
    K.topLeftCorner(nfree, nfree) = M.topLeftCorner(nfree, nfree);
    K.block(0, nfree, nfree, N * nk) = Bpsi.leftCols(nfree).transpose();
    K.block(nfree, 0, N * nk, nfree) = Bpsi.leftCols(nfree);
    if (ntheta > 0) {
        K.block(0, nfree + N * nk, nfree, N * ntheta) = Ctheta.leftCols(nfree).transpose();
        K.block(nfree + N * nk, 0, N * ntheta, nfree) = Ctheta.leftCols(nfree);
    }
    MatrixXd rhs(nsys, nloc);
    rhs.topRows(nfree) = rhs_b.topRows(nfree) - M.block(0, nfree, nfree, nfix) * Rb;
    rhs.middleRows(nfree, N * nk) = rhs_a - Bpsi.rightCols(nfix) * Rb;
    if (ntheta > 0) rhs.bottomRows(N * ntheta) = rhs_ab - Ctheta.rightCols(nfix) * Rb;

    // symmetric equilibration: the constraint blocks scale very differently from the mass block
    VectorXd scale(nsys);
    for (int i = 0; i < nsys; ++i) {
        const double r = K.row(i).norm();
        scale(i) = r > 0 ? 1.0 / std::sqrt(r) : 1.0;
    }
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(scale.asDiagonal() * K * scale.asDiagonal());
    out.saddle_size = nsys;
    out.saddle_rank = static_cast<int>(cod.rank());
    // psi is determined up to a constant on T: exactly one redundancy
    if (out.saddle_rank < nsys - 1)
        throw SaddleSingular("local saddle system rank " + std::to_string(out.saddle_rank) + " < " +
                             std::to_string(nsys - 1));
    const MatrixXd sol = scale.asDiagonal() * cod.solve(scale.asDiagonal() * rhs);

    out.dofs.resize(ndof, nloc);
    out.dofs.topRows(nfree) = sol.topRows(nfree);
    out.dofs.bottomRows(nfix) = Rb;
    out.poly = MatrixXd::Zero(N * 2 * nP, nloc);
    for (int t = 0; t < N; ++t) {
        MatrixXd local(S.n_per_simplex, nloc);
        for (int a = 0; a < S.n_per_simplex; ++a) local.row(a) = out.dofs.row(S.dofs[t][a]);
        out.poly.middleRows(t * 2 * nP, 2 * nP) = S.basis[t] * local;
    }
    return out;
}

// a_{R,T}: L2 product of reconstructions plus the h_F-weighted difference stabilization.
inline MatrixXd unsteady_form(const ElementContext& ctx, const RTNReconstruction& R) {
    const Layout& L = ctx.layout();
    const int nloc = ctx.n_local();
    const int nP = R.space.poly.size();
    const int N = R.space.n_simplices;
    MatrixXd A = MatrixXd::Zero(nloc, nloc);
    MatrixXd deltaT = MatrixXd::Zero(2 * L.nc, nloc);
    for (int t = 0; t < N; ++t) {
        const Quadrature& q = ctx.quadratures()[t];
        const auto Rt = R.poly.middleRows(t * 2 * nP, 2 * nP);
        A.noalias() += Rt.transpose() * block_diag2(monomial_mass(R.space.poly, q)) * Rt;
        MatrixXd mphi = MatrixXd::Zero(L.nc, nP);
        VectorXd mv(nP);
        for (std::size_t i = 0; i < q.size(); ++i) {
            R.space.poly.values(q.points[i], mv.data());
            mphi.noalias() += q.weights[i] * ctx.cell_space().values(q.points[i]) * mv.transpose();
        }
        deltaT.noalias() += block_diag2(mphi) * Rt;
    }
    for (int c = 0; c < 2; ++c) deltaT.block(c * L.nc, L.elem(c, 0), L.nc, L.nc) -= MatrixXd::Identity(L.nc, L.nc);
    A.noalias() += deltaT.transpose() * deltaT;

    for (int j = 0; j < ctx.n_faces(); ++j) {
        const Quadrature& q = ctx.face_quadrature(j);
        const auto Rt = R.poly.middleRows(j * 2 * nP, 2 * nP); // boundary sface j lies in simplex j
        MatrixXd mpsi = MatrixXd::Zero(L.nf, nP);
        VectorXd mv(nP);
        for (std::size_t i = 0; i < q.size(); ++i) {
            R.space.poly.values(q.points[i], mv.data());
            mpsi.noalias() += q.weights[i] * ctx.face_space(j).values(q.points[i]) * mv.transpose();
        }
        MatrixXd deltaF = block_diag2(mpsi) * Rt;
        for (int c = 0; c < 2; ++c) deltaF.block(c * L.nf, L.face(j, c, 0), L.nf, L.nf) -= MatrixXd::Identity(L.nf, L.nf);
        A.noalias() += ctx.face_length(j) * deltaF.transpose() * deltaF;
    }
    return 0.5 * (A + A.transpose());
}

} // namespace hhoflow
