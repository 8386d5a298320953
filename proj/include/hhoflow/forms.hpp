#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "parallel.hpp"
#include "potential.hpp"
#include "reconstruct.hpp"

namespace hhoflow {

// G_T^k in P^k(T)^{2x2}; row (2c + j) * np + i holds the coefficient of d_j v_c on basis q_i.
inline MatrixXd scalar_gradient_op(const ElementContext& ctx) {
    const Layout& L = ctx.layout();
    MatrixXd G = MatrixXd::Zero(2 * L.np, ctx.n_scalar());
    for (const auto& q : ctx.quadratures())
        for (std::size_t i = 0; i < q.size(); ++i) {
            const VectorXd phi = ctx.cell_space().values(q.points[i]);
            const MatrixX2d gq = ctx.pressure_space().gradients(q.points[i]);
            for (int j = 0; j < 2; ++j)
                G.block(j * L.np, 0, L.np, L.nc).noalias() -= q.weights[i] * gq.col(j) * phi.transpose();
        }
    for (int f = 0; f < ctx.n_faces(); ++f) {
        const Quadrature& q = ctx.face_quadrature(f);
        const Vec2& n = ctx.normal(f);
        for (std::size_t i = 0; i < q.size(); ++i) {
            const VectorXd psi = ctx.face_space(f).values(q.points[i]);
            const VectorXd pq = ctx.pressure_space().values(q.points[i]);
            for (int j = 0; j < 2; ++j)
                G.block(j * L.np, L.nc + f * L.nf, L.np, L.nf).noalias() += q.weights[i] * n(j) * pq * psi.transpose();
        }
    }
    return G;
}

inline MatrixXd gradient_reconstruction(const ElementContext& ctx) {
    const Layout& L = ctx.layout();
    const MatrixXd Gs = scalar_gradient_op(ctx);
    MatrixXd G = MatrixXd::Zero(4 * L.np, ctx.n_local());
    for (int c = 0; c < 2; ++c)
        for (int s = 0; s < ctx.n_scalar(); ++s)
            for (int j = 0; j < 2; ++j)
                G.block((2 * c + j) * L.np, L.vector_index(c, s), L.np, 1) = Gs.block(j * L.np, s, L.np, 1);
    return G;
}

// Scalar r_T^{k+1}: int grad r . grad w = int grad v_T . grad w + sum_F int (v_F - v_T) grad w . n_TF,
// int r = int v_T. Returns coefficients in the orthonormal P^{k+1}(T) basis.
inline MatrixXd potential_reconstruction(const ElementContext& ctx) {
    const Layout& L = ctx.layout();
    const ScalarSpace2D& hs = ctx.high_space();
    const int nh = hs.size(), ns = ctx.n_scalar();
    MatrixXd K = MatrixXd::Zero(nh, nh);
    MatrixXd rhs = MatrixXd::Zero(nh, ns);
    for (const auto& q : ctx.quadratures())
        for (std::size_t i = 0; i < q.size(); ++i) {
            const MatrixX2d gh = hs.gradients(q.points[i]);
            const MatrixX2d gc = ctx.cell_space().gradients(q.points[i]);
            K.noalias() += q.weights[i] * gh * gh.transpose();
            rhs.leftCols(L.nc).noalias() += q.weights[i] * gh * gc.transpose();
        }
    for (int f = 0; f < ctx.n_faces(); ++f) {
        const Quadrature& q = ctx.face_quadrature(f);
        for (std::size_t i = 0; i < q.size(); ++i) {
            const VectorXd dn = hs.gradients(q.points[i]) * ctx.normal(f);
            const VectorXd phi = ctx.cell_space().values(q.points[i]);
            const VectorXd psi = ctx.face_space(f).values(q.points[i]);
            rhs.leftCols(L.nc).noalias() -= q.weights[i] * dn * phi.transpose();
            rhs.middleCols(L.nc + f * L.nf, L.nf).noalias() += q.weights[i] * dn * psi.transpose();
        }
    }
    MatrixXd r = MatrixXd::Zero(nh, ns);
    // the first orthonormal function is constant and all others have zero mean
    r.bottomRows(nh - 1) = K.bottomRightCorner(nh - 1, nh - 1).ldlt().solve(rhs.bottomRows(nh - 1));
    r(0, 0) = 1.0;
    return r;
}

// Scalar HHO stabilization sum_F h_F^{-1} |pi_F^k(r v - v_F) - pi_T^{k*}(r v - v_T)|^2_F.
inline MatrixXd stabilization(const ElementContext& ctx, const MatrixXd& r) {
    const Layout& L = ctx.layout();
    const ScalarSpace2D& hs = ctx.high_space();
    const int ns = ctx.n_scalar();
    MatrixXd deltaT = MatrixXd::Zero(L.nc, ns);
    for (const auto& q : ctx.quadratures())
        for (std::size_t i = 0; i < q.size(); ++i)
            deltaT.noalias() += q.weights[i] * ctx.cell_space().values(q.points[i]) * (hs.values(q.points[i]).transpose() * r);
    deltaT.leftCols(L.nc) -= MatrixXd::Identity(L.nc, L.nc);

    MatrixXd S = MatrixXd::Zero(ns, ns);
    for (int f = 0; f < ctx.n_faces(); ++f) {
        const Quadrature& q = ctx.face_quadrature(f);
        MatrixXd deltaF = MatrixXd::Zero(L.nf, ns);
        for (std::size_t i = 0; i < q.size(); ++i)
            deltaF.noalias() += q.weights[i] * ctx.face_space(f).values(q.points[i]) * (hs.values(q.points[i]).transpose() * r);
        deltaF.middleCols(L.nc + f * L.nf, L.nf) -= MatrixXd::Identity(L.nf, L.nf);
        for (std::size_t i = 0; i < q.size(); ++i) {
            const Eigen::RowVectorXd z = ctx.face_space(f).values(q.points[i]).transpose() * deltaF -
                                         ctx.cell_space().values(q.points[i]).transpose() * deltaT;
            S.noalias() += q.weights[i] / ctx.face_length(f) * z.transpose() * z;
        }
    }
    return S;
}

// Scalar |v|_{1,T}^2 = |grad v_T|^2 + sum_F h_F^{-1} |v_F - v_T|_F^2.
inline MatrixXd h1_norm_matrix(const ElementContext& ctx) {
    const Layout& L = ctx.layout();
    const int ns = ctx.n_scalar();
    MatrixXd N = MatrixXd::Zero(ns, ns);
    for (const auto& q : ctx.quadratures())
        for (std::size_t i = 0; i < q.size(); ++i) {
            const MatrixX2d gc = ctx.cell_space().gradients(q.points[i]);
            N.topLeftCorner(L.nc, L.nc).noalias() += q.weights[i] * gc * gc.transpose();
        }
    for (int f = 0; f < ctx.n_faces(); ++f) {
        const Quadrature& q = ctx.face_quadrature(f);
        for (std::size_t i = 0; i < q.size(); ++i) {
            Eigen::RowVectorXd z = Eigen::RowVectorXd::Zero(ns);
            z.head(L.nc) = -ctx.cell_space().values(q.points[i]).transpose();
            z.segment(L.nc + f * L.nf, L.nf) = ctx.face_space(f).values(q.points[i]).transpose();
            N.noalias() += q.weights[i] / ctx.face_length(f) * z.transpose() * z;
        }
    }
    return N;
}

// Precomputed data for the convective form on one element: monomial traces of R_T at
// trilinear quadrature nodes and the penalty Gram matrices.
struct ConvectionData {
    struct Volume {
        std::vector<double> w;
        MatrixXd m, mx, my; // nq x dim P^{k+1}
    };
    struct Interface {
        int tau1 = -1, tau2 = -1;
        Vec2 normal;
        std::vector<double> w;
        MatrixXd m1, m2; // monomial values at the nodes, read from tau1 / tau2
    };
    std::vector<Volume> volume;          // per simplex
    std::vector<Interface> intra;        // interior sfaces of the element
    std::vector<MatrixXd> face_monos;    // per local face, nodes of the global face rule
    std::vector<std::vector<double>> face_w;
    // penalty: sum_sigma int [[rho(pi (a . grad) R v)]] [[rho(pi (b . grad) R z)]] for a, b in {e_x, e_y}
    MatrixXd Pxx, Pxy, Pyy;
};

struct ElementOperators {
    MatrixXd D;  // D_T^k, np x nloc
    MatrixXd Gs; // scalar gradient reconstruction, 2np x ns
    MatrixXd r;  // scalar P^{k+1} reconstruction, nh x ns
    MatrixXd S;  // scalar stabilization
    MatrixXd A;  // viscous a_T
    MatrixXd aR; // unsteady a_{R,T}
    MatrixXd N1; // scalar |.|_{1,T}^2
    RTNReconstruction R;
    ConvectionData conv;
    VectorXd cell_mean;    // v_T mean = cell_mean . v_T coefficients
    VectorXd pressure_int; // int_T q_i
};

inline ConvectionData convection_data(const ElementContext& ctx, const RTNReconstruction& R) {
    const Element& el = ctx.element();
    const SubMesh& sm = el.submesh;
    const int k = ctx.layout().k;
    const int deg = ctx.quadrature_degrees().trilinear;
    const MonomialBasis2D& mono = R.space.poly;
    const int nP = mono.size();
    const int N = R.space.n_simplices;
    ConvectionData cd;

    for (int t = 0; t < N; ++t) {
        const auto& tri = sm.triangles[t];
        const Quadrature q = triangle_quadrature(tri.x[0], tri.x[1], tri.x[2], deg);
        ConvectionData::Volume v;
        v.w = q.weights;
        v.m.resize(q.size(), nP);
        v.mx.resize(q.size(), nP);
        v.my.resize(q.size(), nP);
        for (std::size_t i = 0; i < q.size(); ++i) {
            v.m.row(i) = mono.values(q.points[i]).transpose();
            const MatrixX2d g = mono.gradients(q.points[i]);
            v.mx.row(i) = g.col(0).transpose();
            v.my.row(i) = g.col(1).transpose();
        }
        cd.volume.push_back(std::move(v));
    }
    for (const auto& s : sm.interior_sfaces) {
        const Quadrature q = segment_quadrature(s.a, s.b, deg);
        ConvectionData::Interface it;
        it.tau1 = s.tau1;
        it.tau2 = s.tau2;
        it.normal = s.normal;
        it.w = q.weights;
        it.m1.resize(q.size(), nP);
        for (std::size_t i = 0; i < q.size(); ++i) it.m1.row(i) = mono.values(q.points[i]).transpose();
        it.m2 = it.m1; // same polynomial basis on both simplices of the element
        cd.intra.push_back(std::move(it));
    }
    for (int j = 0; j < ctx.n_faces(); ++j) {
        const Face& f = ctx.mesh().faces[el.face_ids[j]];
        const Quadrature q = segment_quadrature(f.a, f.b, deg);
        MatrixXd m(q.size(), nP);
        for (std::size_t i = 0; i < q.size(); ++i) m.row(i) = mono.values(q.points[i]).transpose();
        cd.face_monos.push_back(std::move(m));
        cd.face_w.push_back(q.weights);
    }

    const int nloc = ctx.n_local();
    cd.Pxx = cd.Pxy = cd.Pyy = MatrixXd::Zero(nloc, nloc);
    if (k == 0) return cd;

    // per simplex: v -> rho^k(pi^{k-1}(d_dir R v)), as P^k monomial coefficients
    const std::vector<GammaOperators> gammas = build_gamma(el, k - 1, ctx.quadrature_degrees().bilinear);
    const int nkm1 = dim_poly2(k - 1);
    std::vector<std::array<MatrixXd, 2>> J(N);
    for (int t = 0; t < N; ++t) {
        const auto& tri = sm.triangles[t];
        const Quadrature q = triangle_quadrature(tri.x[0], tri.x[1], tri.x[2], 2 * k);
        const MonomialBasis2D mk(k, el.center, el.diameter);
        const MatrixXd Mk = monomial_mass(mk, q);
        const MatrixXd proj = Mk.topLeftCorner(nkm1, nkm1).ldlt().solve(Mk.topRows(nkm1));
        for (int dir = 0; dir < 2; ++dir) {
            const MatrixXd d = monomial_derivative(k + 1, dir) / el.diameter;
            MatrixXd op(2 * nkm1, nloc);
            op.topRows(nkm1) = proj * d * R.poly.middleRows(t * 2 * nP, nP);
            op.bottomRows(nkm1) = proj * d * R.poly.middleRows(t * 2 * nP + nP, nP);
            J[t][dir] = gammas[t].rho * op;
        }
    }
    const MonomialBasis2D mk(k, el.center, el.diameter);
    for (const auto& s : sm.interior_sfaces) {
        const Quadrature q = segment_quadrature(s.a, s.b, 2 * k);
        for (std::size_t i = 0; i < q.size(); ++i) {
            const Eigen::RowVectorXd m = mk.values(q.points[i]).transpose();
            const Eigen::RowVectorXd jx = m * (J[s.tau1][0] - J[s.tau2][0]);
            const Eigen::RowVectorXd jy = m * (J[s.tau1][1] - J[s.tau2][1]);
            cd.Pxx.noalias() += q.weights[i] * jx.transpose() * jx;
            cd.Pxy.noalias() += q.weights[i] * jx.transpose() * jy;
            cd.Pyy.noalias() += q.weights[i] * jy.transpose() * jy;
        }
    }
    return cd;
}

inline ElementOperators build_element_operators(const ElementContext& ctx) {
    const Layout& L = ctx.layout();
    ElementOperators op;
    op.D = divergence_op(ctx);
    op.Gs = scalar_gradient_op(ctx);
    op.r = potential_reconstruction(ctx);
    op.S = stabilization(ctx, op.r);
    const MatrixXd As = op.Gs.transpose() * op.Gs + op.S;
    op.A = lift_scalar(0.5 * (As + As.transpose()), L, ctx.n_faces());
    op.R = velocity_reconstruction(ctx, op.D);
    op.aR = unsteady_form(ctx, op.R);
    op.N1 = h1_norm_matrix(ctx);
    op.conv = convection_data(ctx, op.R);
    op.cell_mean = VectorXd::Zero(L.nc);
    op.pressure_int = VectorXd::Zero(L.np);
    for (const auto& q : ctx.quadratures())
        for (std::size_t i = 0; i < q.size(); ++i) {
            op.cell_mean += q.weights[i] * ctx.cell_space().values(q.points[i]);
            op.pressure_int += q.weights[i] * ctx.pressure_space().values(q.points[i]);
        }
    op.cell_mean /= ctx.element().area;
    return op;
}

// Mesh-wide bases and cached per-element operators. Holds a reference to the mesh.
class Discretization {
public:
    Discretization(const PolyMesh& mesh, int k, QuadratureDegrees qd)
        : mesh_(mesh), layout_(Layout::make(k)), qd_(qd) {
        face_spaces_ = build_face_spaces(mesh, k, qd.bilinear);
        contexts_.reserve(mesh.n_elements());
        for (std::size_t t = 0; t < mesh.n_elements(); ++t)
            contexts_.emplace_back(mesh, static_cast<int>(t), layout_, qd_, face_spaces_);
        ops_.resize(mesh.n_elements());
        parallel_for(mesh.n_elements(), [this](std::size_t t) { ops_[t] = build_element_operators(contexts_[t]); });
    }
    Discretization(const PolyMesh& mesh, int k) : Discretization(mesh, k, QuadratureDegrees::defaults(k)) {}
    Discretization(const Discretization&) = delete;
    Discretization& operator=(const Discretization&) = delete;

    const PolyMesh& mesh() const { return mesh_; }
    const Layout& layout() const { return layout_; }
    const QuadratureDegrees& quadrature_degrees() const { return qd_; }
    const ElementContext& context(std::size_t t) const { return contexts_[t]; }
    const ElementOperators& ops(std::size_t t) const { return ops_[t]; }
    const FaceSpace& face_space(std::size_t f) const { return face_spaces_[f]; }
    std::size_t n_elements() const { return contexts_.size(); }

private:
    const PolyMesh& mesh_;
    Layout layout_;
    QuadratureDegrees qd_;
    std::vector<FaceSpace> face_spaces_;
    std::vector<ElementContext> contexts_;
    std::vector<ElementOperators> ops_;
};

// b_T(v, q) = -int_T D_T^k v q: matrix with rows indexed by pressure basis functions.
inline MatrixXd coupling_form(const ElementOperators& op) { return -op.D; }

// Local load vector of l_h(phi, .) = int phi . R_T^k v over the submesh.
inline VectorXd body_force(const ElementContext& ctx, const ElementOperators& op, const VectorField& phi) {
    const MonomialBasis2D& mono = op.R.space.poly;
    const int nP = mono.size();
    VectorXd g = VectorXd::Zero(op.R.poly.rows());
    VectorXd m(nP);
    for (std::size_t t = 0; t < ctx.quadratures().size(); ++t) {
        const Quadrature& q = ctx.quadratures()[t];
        for (std::size_t i = 0; i < q.size(); ++i) {
            mono.values(q.points[i], m.data());
            const Vec2 f = phi(q.points[i]);
            g.segment(t * 2 * nP, nP) += q.weights[i] * f.x() * m;
            g.segment(t * 2 * nP + nP, nP) += q.weights[i] * f.y() * m;
        }
    }
    return op.R.poly.transpose() * g;
}

// Jump tau1 - tau2 and average of a (scalar or vector) piecewise polynomial at a point
// of an sface; on a boundary sface both equal the one-sided trace.
struct JumpAverage {
    VectorXd jump, average;
};

inline JumpAverage jump_average(const PiecewisePoly& p, const SimplicialFace& s, const Vec2& x) {
    auto eval = [&](int t) -> VectorXd {
        if (p.rank == 1) return VectorXd::Constant(1, p.value(t, x));
        const Vec2 v = p.vector_value(t, x);
        return VectorXd(Eigen::Vector2d(v));
    };
    const VectorXd a = eval(s.tau1);
    if (!s.is_interior()) return {a, a};
    const VectorXd b = eval(s.tau2);
    return {a - b, 0.5 * (a + b)};
}

// Transport data for t_h(w, ., .): reconstruction coefficients of w and element means.
struct ConvectionContext {
    std::vector<VectorXd> Rw; // per element, stacked per-simplex P^{k+1}^2 coefficients
    std::vector<Vec2> w0;     // pi_T^0 w_T
};

// Local vectors of a global velocity field are supplied by the caller (see DofMap).
template <class LocalGetter>
ConvectionContext make_convection_context(const Discretization& disc, LocalGetter&& local, double div_tol = 1e-8) {
    ConvectionContext cc;
    const Layout& L = disc.layout();
    cc.Rw.resize(disc.n_elements());
    cc.w0.resize(disc.n_elements());
    for (std::size_t t = 0; t < disc.n_elements(); ++t) {
        const VectorXd wl = local(t);
        const ElementOperators& op = disc.ops(t);
        const double div = (op.D * wl).norm();
        if (div > div_tol * std::max(1.0, wl.norm()))
            throw TransportNotDivergenceFree("element " + std::to_string(t) + ": |D_T w| = " + std::to_string(div));
        cc.Rw[t] = op.R.poly * wl;
        cc.w0[t] = Vec2(op.cell_mean.dot(wl.segment(L.elem(0, 0), L.nc)), op.cell_mean.dot(wl.segment(L.elem(1, 0), L.nc)));
    }
    return cc;
}

namespace detail {

// Adds sum_q w [ -beta avg^T jump + 1/2 |beta| jump^T jump ] for one component.
inline void add_upwind(MatrixXd& C, const std::vector<double>& w, const VectorXd& beta, const MatrixXd& jump,
                       const MatrixXd& avg) {
    for (std::size_t q = 0; q < w.size(); ++q) {
        C.noalias() -= w[q] * beta(q) * avg.row(q).transpose() * jump.row(q);
        C.noalias() += 0.5 * w[q] * std::abs(beta(q)) * jump.row(q).transpose() * jump.row(q);
    }
}

inline VectorXd normal_flux(const MatrixXd& monos, const VectorXd& Rw, int t, int nP, const Vec2& n) {
    return n.x() * (monos * Rw.segment(t * 2 * nP, nP)) + n.y() * (monos * Rw.segment(t * 2 * nP + nP, nP));
}

} // namespace detail

struct ConvectionOptions {
    bool volume = true;
    bool upwind = true;
    bool penalty = true;
};

// Element block of t_h(w, v, z): volume term, intra-element sfaces and penalty. Rows: z.
inline MatrixXd convection_element_block(const Discretization& disc, const ConvectionContext& cc, std::size_t t,
                                         ConvectionOptions opt = {}) {
    const ElementOperators& op = disc.ops(t);
    const ConvectionData& cd = op.conv;
    const int nP = op.R.space.poly.size();
    const int nloc = static_cast<int>(op.R.poly.cols());
    const VectorXd& Rw = cc.Rw[t];
    MatrixXd C = MatrixXd::Zero(nloc, nloc);
    if (opt.volume)
        for (std::size_t s = 0; s < cd.volume.size(); ++s) {
            const auto& v = cd.volume[s];
            const auto Rx = op.R.poly.middleRows(s * 2 * nP, nP);
            const auto Ry = op.R.poly.middleRows(s * 2 * nP + nP, nP);
            const VectorXd wx = v.m * Rw.segment(s * 2 * nP, nP);
            const VectorXd wy = v.m * Rw.segment(s * 2 * nP + nP, nP);
            const MatrixXd Vx = v.m * Rx, Vy = v.m * Ry;
            MatrixXd Ax = (v.mx * Rx).array().colwise() * wx.array();
            Ax += ((v.my * Rx).array().colwise() * wy.array()).matrix();
            MatrixXd Ay = (v.mx * Ry).array().colwise() * wx.array();
            Ay += ((v.my * Ry).array().colwise() * wy.array()).matrix();
            const Eigen::Map<const VectorXd> wq(v.w.data(), v.w.size());
            C.noalias() += Vx.transpose() * (Ax.array().colwise() * wq.array()).matrix();
            C.noalias() += Vy.transpose() * (Ay.array().colwise() * wq.array()).matrix();
        }
    if (opt.upwind)
        for (const auto& it : cd.intra) {
            const VectorXd beta = detail::normal_flux(it.m1, Rw, it.tau1, nP, it.normal);
            for (int c = 0; c < 2; ++c) {
                const MatrixXd t1 = it.m1 * op.R.poly.middleRows(it.tau1 * 2 * nP + c * nP, nP);
                const MatrixXd t2 = it.m2 * op.R.poly.middleRows(it.tau2 * 2 * nP + c * nP, nP);
                detail::add_upwind(C, it.w, beta, t1 - t2, 0.5 * (t1 + t2));
            }
        }
    if (opt.penalty) {
        const Vec2& a = cc.w0[t];
        C += a.x() * a.x() * cd.Pxx + a.x() * a.y() * (cd.Pxy + cd.Pxy.transpose()) + a.y() * a.y() * cd.Pyy;
    }
    return C;
}

// Coupling block across the interior mesh face f between T1 = elements[0] and T2 = elements[1];
// rows and columns are [T1 local dofs, T2 local dofs].
inline MatrixXd convection_face_block(const Discretization& disc, const ConvectionContext& cc, std::size_t f) {
    const Face& face = disc.mesh().faces[f];
    const int T1 = face.elements[0], T2 = face.elements[1];
    const int j1 = face.local_index[0], j2 = face.local_index[1];
    const ElementOperators& o1 = disc.ops(T1);
    const ElementOperators& o2 = disc.ops(T2);
    const int n1 = static_cast<int>(o1.R.poly.cols()), n2 = static_cast<int>(o2.R.poly.cols());
    const int nP = o1.R.space.poly.size();
    const MatrixXd& m1 = o1.conv.face_monos[j1];
    const MatrixXd& m2 = o2.conv.face_monos[j2];
    const std::vector<double>& w = o1.conv.face_w[j1];
    const VectorXd beta = detail::normal_flux(m1, cc.Rw[T1], j1, nP, face.normal);
    MatrixXd C = MatrixXd::Zero(n1 + n2, n1 + n2);
    for (int c = 0; c < 2; ++c) {
        MatrixXd jump(w.size(), n1 + n2), avg(w.size(), n1 + n2);
        const MatrixXd t1 = m1 * o1.R.poly.middleRows(j1 * 2 * nP + c * nP, nP);
        const MatrixXd t2 = m2 * o2.R.poly.middleRows(j2 * 2 * nP + c * nP, nP);
        jump << t1, -t2;
        avg << 0.5 * t1, 0.5 * t2;
        detail::add_upwind(C, w, beta, jump, avg);
    }
    return C;
}

// sum over all interior sfaces of int |R w . n| |[[R v]]|^2.
template <class LocalGetter>
double upwind_jump_energy(const Discretization& disc, const ConvectionContext& cc, LocalGetter&& local) {
    double e = 0;
    const int nP = disc.ops(0).R.space.poly.size();
    std::vector<VectorXd> Rv(disc.n_elements());
    for (std::size_t t = 0; t < disc.n_elements(); ++t) Rv[t] = disc.ops(t).R.poly * local(t);
    for (std::size_t t = 0; t < disc.n_elements(); ++t)
        for (const auto& it : disc.ops(t).conv.intra) {
            const VectorXd beta = detail::normal_flux(it.m1, cc.Rw[t], it.tau1, nP, it.normal);
            for (int c = 0; c < 2; ++c) {
                const VectorXd j = it.m1 * Rv[t].segment(it.tau1 * 2 * nP + c * nP, nP) -
                                   it.m2 * Rv[t].segment(it.tau2 * 2 * nP + c * nP, nP);
                for (std::size_t q = 0; q < it.w.size(); ++q) e += it.w[q] * std::abs(beta(q)) * j(q) * j(q);
            }
        }
    for (int f : disc.mesh().interior_face_ids) {
        const Face& face = disc.mesh().faces[f];
        const int T1 = face.elements[0], T2 = face.elements[1];
        const int j1 = face.local_index[0], j2 = face.local_index[1];
        const ConvectionData& c1 = disc.ops(T1).conv;
        const ConvectionData& c2 = disc.ops(T2).conv;
        const VectorXd beta = detail::normal_flux(c1.face_monos[j1], cc.Rw[T1], j1, nP, face.normal);
        for (int c = 0; c < 2; ++c) {
            const VectorXd j = c1.face_monos[j1] * Rv[T1].segment(j1 * 2 * nP + c * nP, nP) -
                               c2.face_monos[j2] * Rv[T2].segment(j2 * 2 * nP + c * nP, nP);
            for (std::size_t q = 0; q < c1.face_w[j1].size(); ++q)
                e += c1.face_w[j1][q] * std::abs(beta(q)) * j(q) * j(q);
        }
    }
    return e;
}

} // namespace hhoflow
