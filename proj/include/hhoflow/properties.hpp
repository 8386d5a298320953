#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "harness.hpp"

namespace hhoflow {

// One randomized or deterministic operator check: passes iff value <= tolerance.
struct PropertyCheck {
    std::string name;
    int instances = 0;
    double value = 0;
    double tolerance = 0;
    std::string note;

    bool passed() const { return value <= tolerance; } // NaN fails
};

inline VectorXd uniform_vector(Eigen::Index n, std::mt19937& rng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
    return v;
}

// Random scalar or vector polynomial in global monomials centered at (0.5, 0.5).
struct RandomPolynomial {
    MonomialBasis2D mono;
    VectorXd cx, cy;

    static RandomPolynomial make(int degree, std::mt19937& rng) {
        RandomPolynomial p;
        p.mono = MonomialBasis2D(degree, Vec2(0.5, 0.5), 1.0);
        p.cx = uniform_vector(p.mono.size(), rng);
        p.cy = uniform_vector(p.mono.size(), rng);
        return p;
    }
    // Divergence-free field (d_y s, -d_x s) of a random stream function s of degree + 1.
    static RandomPolynomial divergence_free(int degree, std::mt19937& rng) {
        const VectorXd s = uniform_vector(dim_poly2(degree + 1), rng);
        RandomPolynomial p;
        p.mono = MonomialBasis2D(degree, Vec2(0.5, 0.5), 1.0);
        p.cx = monomial_derivative(degree + 1, 1) * s;
        p.cy = -monomial_derivative(degree + 1, 0) * s;
        return p;
    }

    double scalar(const Vec2& x) const { return mono.values(x).dot(cx); }
    Vec2 gradient(const Vec2& x) const { return mono.gradients(x).transpose() * cx; }
    Vec2 operator()(const Vec2& x) const {
        const VectorXd m = mono.values(x);
        return Vec2(m.dot(cx), m.dot(cy));
    }
    double divergence(const Vec2& x) const {
        const MatrixX2d g = mono.gradients(x);
        return g.col(0).dot(cx) + g.col(1).dot(cy);
    }
};

// Small meshes with square, hexagonal, pentagonal, quadrilateral and triangular elements.
inline std::vector<PolyMesh> property_meshes() {
    std::vector<PolyMesh> out;
    out.push_back(generate_cartesian(2));
    out.push_back(generate_hexagonal_grid(5, 3));
    std::vector<Vec2> v{{0, 0}, {1, 0}, {1.7, 0.4}, {1.3, 1.1}, {0.4, 1.2}, {0, 0.6}, {2.2, 1.4}, {1.6, 2.0}};
    out.push_back(build_mesh(v, {{0, 1, 5}, {1, 2, 3, 4, 5}, {2, 6, 7, 3}}));
    return out;
}

// Cycles through every element of a set of meshes discretized at degree k.
class ElementSampler {
public:
    ElementSampler(const std::vector<PolyMesh>& meshes, int k) {
        for (const auto& m : meshes) {
            discs_.push_back(std::make_unique<Discretization>(m, k));
            for (std::size_t t = 0; t < m.n_elements(); ++t) cells_.emplace_back(discs_.size() - 1, t);
        }
    }
    std::size_t size() const { return cells_.size(); }
    const Discretization& disc(int i) const { return *discs_[cells_[i % cells_.size()].first]; }
    std::size_t element(int i) const { return cells_[i % cells_.size()].second; }

private:
    std::vector<std::unique_ptr<Discretization>> discs_;
    std::vector<std::pair<std::size_t, std::size_t>> cells_;
};

namespace detail {

inline Vec2 cell_value(const ElementContext& ctx, const VectorXd& v, const Vec2& x) {
    return evaluate_vector(ctx.cell_space(), v.head(2 * ctx.layout().nc), x);
}

inline double m_norm(const VectorXd& x, const MatrixXd& M) { return std::sqrt(std::max(0.0, x.dot(M * x))); }

} // namespace detail

// D_T^k I_T^k v = pi_T^k div v for v in P^{k+2}(T)^2.
inline PropertyCheck check_commutation(const ElementSampler& s, int n, std::mt19937& rng) {
    PropertyCheck c{"divergence commutes with interpolation", n, 0, 1e-10, ""};
    for (int i = 0; i < n; ++i) {
        const Discretization& disc = s.disc(i);
        const ElementContext& ctx = disc.context(s.element(i));
        const RandomPolynomial v = RandomPolynomial::make(disc.layout().k + 2, rng);
        const VectorXd lhs = disc.ops(s.element(i)).D * interpolate(ctx, VectorField(v));
        const VectorXd rhs = project(ScalarField([&](const Vec2& x) { return v.divergence(x); }), ctx.pressure_space(),
                                     ctx.quadratures());
        c.value = std::max(c.value, (lhs - rhs).norm() / std::max(1.0, rhs.norm()));
    }
    return c;
}

// R_T^k I_T^k q = q for q in P^k(T)^2, checked at the quadrature nodes of every simplex.
inline PropertyCheck check_reconstruction_consistency(const ElementSampler& s, int n, std::mt19937& rng) {
    PropertyCheck c{"velocity reconstruction reproduces P^k", n, 0, 1e-10, ""};
    for (int i = 0; i < n; ++i) {
        const Discretization& disc = s.disc(i);
        const std::size_t t = s.element(i);
        const ElementContext& ctx = disc.context(t);
        const RandomPolynomial q = RandomPolynomial::make(disc.layout().k, rng);
        const PiecewisePoly R = disc.ops(t).R.apply(interpolate(ctx, VectorField(q)));
        double err = 0, scale = 0;
        for (std::size_t tau = 0; tau < ctx.quadratures().size(); ++tau)
            for (const Vec2& x : ctx.quadratures()[tau].points) {
                err = std::max(err, (R.vector_value(tau, x) - q(x)).norm());
                scale = std::max(scale, q(x).norm());
            }
        c.value = std::max(c.value, err / std::max(1.0, scale));
    }
    return c;
}

// pi_T^{k-1}(R_T^k v) = pi_T^{k-1}(v_T) for random local vectors (k >= 1): moments of R v - v_T
// against monomials of degree <= k - 1, relative to the norms involved.
inline PropertyCheck check_reconstruction_low_moments(const ElementSampler& s, int n, std::mt19937& rng) {
    PropertyCheck c{"low-order moments of the reconstruction match v_T", n, 0, 1e-10, ""};
    for (int i = 0; i < n; ++i) {
        const Discretization& disc = s.disc(i);
        const std::size_t t = s.element(i);
        const ElementContext& ctx = disc.context(t);
        const int k = disc.layout().k;
        if (k < 1) throw Error("low-moment check needs k >= 1");
        const VectorXd v = uniform_vector(ctx.n_local(), rng);
        const PiecewisePoly R = disc.ops(t).R.apply(v);
        const MonomialBasis2D mono = ctx.monomials(k - 1);
        VectorXd mom = VectorXd::Zero(2 * mono.size()), mnorm = VectorXd::Zero(mono.size());
        double nR = 0, nv = 0;
        for (std::size_t tau = 0; tau < ctx.quadratures().size(); ++tau) {
            const Quadrature& q = ctx.quadratures()[tau];
            for (std::size_t a = 0; a < q.size(); ++a) {
                const Vec2 r = R.vector_value(tau, q.points[a]), vt = detail::cell_value(ctx, v, q.points[a]);
                const VectorXd m = mono.values(q.points[a]);
                mom.head(mono.size()) += q.weights[a] * (r - vt).x() * m;
                mom.tail(mono.size()) += q.weights[a] * (r - vt).y() * m;
                mnorm += q.weights[a] * m.cwiseAbs2();
                nR += q.weights[a] * r.squaredNorm();
                nv += q.weights[a] * vt.squaredNorm();
            }
        }
        const double scale = std::sqrt(nR) + std::sqrt(nv);
        for (int j = 0; j < mono.size(); ++j)
            for (int comp = 0; comp < 2; ++comp)
                c.value = std::max(c.value, std::abs(mom(comp * mono.size() + j)) / (std::sqrt(mnorm(j)) * scale));
    }
    return c;
}

// |v_T|_{L2(T)} <= C |v|_{R,T}: the worst C over random local vectors.
inline PropertyCheck check_unsteady_l2_bound(const ElementSampler& s, int n, std::mt19937& rng) {
    PropertyCheck c{"L2 norm of v_T bounded by the a_R norm (constant)", n, 0, 10.0, ""};
    for (int i = 0; i < n; ++i) {
        const Discretization& disc = s.disc(i);
        const std::size_t t = s.element(i);
        const VectorXd v = uniform_vector(disc.context(t).n_local(), rng);
        c.value = std::max(c.value, std::sqrt(v.head(2 * disc.layout().nc).squaredNorm() / v.dot(disc.ops(t).aR * v)));
    }
    return c;
}

// Vector |v|_{1,T}^2 as a local matrix.
inline MatrixXd local_h1_matrix(const ElementContext& ctx, const ElementOperators& op) {
    return lift_scalar(op.N1, ctx.layout(), ctx.n_faces());
}

// Best constant C in h_T |v|_{1,T} <= C |v|_{R,T} on one element.
inline double unsteady_h1_constant(const ElementContext& ctx, const ElementOperators& op) {
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(local_h1_matrix(ctx, op), op.aR, Eigen::EigenvaluesOnly);
    return ctx.h() * std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

// h_T |v|_{1,T} <= C |v|_{R,T}: the best constant of every element shape, compared with the
// same shape halved twice; value is the worst ratio max(r, 1/r).
inline PropertyCheck check_unsteady_h1_stability(const std::vector<PolyMesh>& meshes, int k) {
    PropertyCheck c{"h_T |v|_1,T <= C |v|_R,T constant stable under refinement", 0, 1, 2.0, ""};
    double cmax = 0;
    for (const auto& m : meshes)
        for (const auto& el : m.elements) {
            double c0 = 0;
            for (double s : {1.0, 0.5, 0.25}) {
                std::vector<Vec2> loop;
                std::vector<int> ids;
                for (int v : el.vertex_ids) {
                    ids.push_back(static_cast<int>(loop.size()));
                    loop.push_back(el.center + s * (m.vertices[v] - el.center));
                }
                const PolyMesh single = build_mesh(loop, {ids});
                const Discretization disc(single, k);
                const double cs = unsteady_h1_constant(disc.context(0), disc.ops(0));
                cmax = std::max(cmax, cs);
                if (s == 1.0)
                    c0 = cs;
                else
                    c.value = std::max(c.value, std::max(cs / c0, c0 / cs));
                ++c.instances;
            }
        }
    c.note = "largest constant " + format_number(cmax);
    return c;
}

// Potential operator and recovery identities on the submeshes of the given meshes, degrees
// l = 0, 1, 2 in turn.
inline std::vector<PropertyCheck> check_potential(const std::vector<PolyMesh>& meshes, int n, std::mt19937& rng) {
    std::vector<const Element*> elems;
    for (const auto& m : meshes)
        for (const auto& el : m.elements) elems.push_back(&el);
    PropertyCheck grad{"potential of a broken gradient recovers the potential", n, 0, 1e-10, ""};
    PropertyCheck comp{"potential vanishes on the Koszul complement", n, 0, 1e-10, ""};
    PropertyCheck glob{"potential of a global polynomial has no inner jumps", n, 0, 1e-10, ""};
    PropertyCheck rest{"q - grad potential(q) lies in the Koszul complement", n, 0, 1e-9, ""};
    PropertyCheck rec{"recovery operator inverts the Koszul projections", n, 0, 1e-10, ""};
    PropertyCheck bb{"Gamma_G (b - pi_G pi_Gc b) = b on the gradient space", n, 0, 1e-10, ""};
    PropertyCheck bound{"|Gamma_G q| <= C |q| for l <= 1 (constant)", 0, 0, 20.0, ""};
    PropertyCheck lin{"potential operator is linear", n, 0, 1e-12, ""};
    for (int i = 0; i < n; ++i) {
        const Element& el = *elems[i % elems.size()];
        const int l = i % 3;
        const double h = el.diameter;
        const std::vector<GammaOperators> gammas = build_gamma(el, l);
        const int N = static_cast<int>(gammas.size());
        const int nl = dim_poly2(l), np1 = dim_poly2(l + 1);
        const MonomialBasis2D mono(l, el.center, h);

        PiecewisePoly qglob(mono, 2, N), q1(mono, 2, N), q2(mono, 2, N), qsum(mono, 2, N);
        const VectorXd g = uniform_vector(2 * nl, rng);
        const double alpha = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
        for (int t = 0; t < N; ++t) {
            const GammaOperators& G = gammas[t];
            const KoszulSpaces& ks = G.ks;

            VectorXd p = uniform_vector(np1, rng);
            p(0) = 0;
            VectorXd dp(2 * nl);
            dp << monomial_derivative(l + 1, 0) * p / h, monomial_derivative(l + 1, 1) * p / h;
            grad.value = std::max({grad.value, (G.rho * dp - p).norm() / p.norm(), (G.grad * dp - dp).norm() / dp.norm()});

            if (ks.dim_Gc() > 0) {
                const VectorXd cq = ks.Gc * uniform_vector(ks.dim_Gc(), rng);
                comp.value = std::max(comp.value, (G.rho * cq).norm() / cq.norm());
            }

            const VectorXd q = uniform_vector(2 * nl, rng);
            const double qn = detail::m_norm(q, ks.mass);
            const VectorXd r = q - G.grad * q;
            rest.value = std::max(rest.value, detail::m_norm(r - ks.projGc * r, ks.mass) / qn);
            rec.value = std::max(rec.value, detail::m_norm(G.recover(ks.projG * q, ks.projGc * q) - q, ks.mass) / qn);
            if (l <= 1) {
                bound.value = std::max(bound.value, detail::m_norm(G.gammaG * q, ks.mass) / qn);
                ++bound.instances;
            }
            for (int j = 0; j < ks.dim_G(); ++j) {
                const VectorXd b = ks.G.col(j);
                bb.value = std::max(bb.value, (G.gammaG * (b - ks.projG * (ks.projGc * b)) - b).norm() / b.norm());
            }

            qglob.coeffs[t] = g;
            q1.coeffs[t] = q;
            q2.coeffs[t] = uniform_vector(2 * nl, rng);
            qsum.coeffs[t] = alpha * q1.coeffs[t] + q2.coeffs[t];
        }
        const PiecewisePoly img = potential_apply(qglob, gammas);
        for (const auto& s : el.submesh.interior_sfaces) {
            const VectorXd j = potential_jump(img, s, segment_quadrature(s.a, s.b, 2 * l + 4).points);
            glob.value = std::max(glob.value, j.cwiseAbs().maxCoeff() / std::max(1.0, g.norm()));
        }
        const PiecewisePoly r1 = potential_apply(q1, gammas), r2 = potential_apply(q2, gammas), rs = potential_apply(qsum, gammas);
        for (int t = 0; t < N; ++t)
            lin.value = std::max(lin.value, (rs.coeffs[t] - alpha * r1.coeffs[t] - r2.coeffs[t]).norm() /
                                                std::max(1.0, rs.coeffs[t].norm()));
    }
    return {grad, comp, glob, rest, rec, bb, bound, lin};
}

// Dimension counts of the Koszul decomposition on single simplices and on element submeshes,
// l = 0..4; value is the number of mismatches.
inline PropertyCheck check_koszul_dimensions(const std::vector<PolyMesh>& meshes) {
    PropertyCheck c{"Koszul dimension counts and directness", 0, 0, 0, ""};
    auto rank = [](const MatrixXd& A) {
        Eigen::FullPivLU<MatrixXd> lu(A);
        lu.setThreshold(1e-10);
        return static_cast<int>(lu.rank());
    };
    for (const auto& m : meshes)
        for (const auto& el : m.elements) {
            for (int l = 0; l <= 4; ++l) {
                ++c.instances;
                const int N = static_cast<int>(el.submesh.triangles.size());
                int rG = 0, rGc = 0, rAll = 0;
                for (const auto& ks : koszul_spaces(l, el)) {
                    if (ks.dim_G() != (l + 2) * (l + 3) / 2 - 1) ++c.value;
                    if (ks.dim_Gc() != l * (l + 1) / 2) ++c.value;
                    MatrixXd B(ks.G.rows(), ks.dim_G() + ks.dim_Gc());
                    B << ks.G, ks.Gc;
                    // the bases have small integer coefficients, so the ranks are exact
                    rG += rank(ks.G);
                    rGc += ks.dim_Gc() ? rank(ks.Gc) : 0;
                    rAll += rank(B);
                    if (ks.mass.ldlt().vectorD().minCoeff() <= 0) ++c.value;
                }
                if (rG != N * (dim_poly2(l + 1) - 1)) ++c.value;
                if (rGc != N * dim_poly2(l - 1)) ++c.value;
                if (rAll != N * 2 * dim_poly2(l)) ++c.value;
            }
        }
    return c;
}

// Best constants of the broken-polynomial Lebesgue embedding, inverse and discrete trace
// inequalities on the submesh of one star-shaped polygon.
struct InequalityConstants {
    double lebesgue = 0, inverse = 0, trace = 0;
};

inline InequalityConstants inequality_constants(const std::vector<Vec2>& loop, int l) {
    Vec2 xT = Vec2::Zero();
    for (const auto& v : loop) xT += v;
    xT /= static_cast<double>(loop.size());
    double h = 0;
    for (const auto& a : loop)
        for (const auto& b : loop) h = std::max(h, (a - b).norm());
    const SubMesh sm = build_submesh(loop, xT);
    const MonomialBasis2D mono(l, xT, h);
    const int nl = mono.size(), N = static_cast<int>(sm.triangles.size());
    MatrixXd M = MatrixXd::Zero(N * nl, N * nl), K = M;
    InequalityConstants c;
    for (int t = 0; t < N; ++t) {
        const Simplex& tri = sm.triangles[t];
        const Quadrature q = triangle_quadrature(tri.x[0], tri.x[1], tri.x[2], 2 * l + 2);
        const MatrixXd Mt = monomial_mass(mono, q);
        MatrixXd Kt = MatrixXd::Zero(nl, nl);
        for (std::size_t a = 0; a < q.size(); ++a) {
            const MatrixX2d g = mono.gradients(q.points[a]);
            Kt.noalias() += q.weights[a] * g * g.transpose();
        }
        M.block(t * nl, t * nl, nl, nl) = Mt;
        K.block(t * nl, t * nl, nl, nl) = Kt;
        const Eigen::LDLT<MatrixXd> ldlt(Mt);
        std::vector<Vec2> pts(tri.x.begin(), tri.x.end());
        pts.insert(pts.end(), q.points.begin(), q.points.end());
        for (const Vec2& x : pts) {
            const VectorXd m = mono.values(x);
            c.lebesgue = std::max(c.lebesgue, h * std::sqrt(m.dot(ldlt.solve(m))));
        }
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> inv(K, M, Eigen::EigenvaluesOnly);
    c.inverse = h * std::sqrt(inv.eigenvalues().maxCoeff());
    for (int j = 0; j < N; ++j) {
        MatrixXd B = MatrixXd::Zero(N * nl, N * nl);
        double hF = 0;
        for (const auto& s : sm.boundary_sfaces[j]) {
            hF += s.length;
            const Quadrature q = segment_quadrature(s.a, s.b, 2 * l);
            B.block(j * nl, j * nl, nl, nl) += monomial_mass(mono, q);
        }
        Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> tr(B, M, Eigen::EigenvaluesOnly);
        c.trace = std::max(c.trace, std::sqrt(hF * tr.eigenvalues().maxCoeff()));
    }
    return c;
}

// Constants measured on each element shape and on two successive halvings of it; value is the
// worst ratio max(r, 1/r) against the unrefined shape.
inline std::vector<PropertyCheck> check_inequality_stability(const std::vector<PolyMesh>& meshes) {
    PropertyCheck leb{"Lebesgue embedding constant stable under refinement", 0, 1, 2.0, ""};
    PropertyCheck inv{"inverse inequality constant stable under refinement", 0, 1, 2.0, ""};
    PropertyCheck tr{"discrete trace constant stable under refinement", 0, 1, 2.0, ""};
    auto worst = [](double a, double b) { return std::max(a / b, b / a); };
    for (const auto& m : meshes)
        for (const auto& el : m.elements)
            for (int l = 0; l <= 3; ++l) {
                std::vector<Vec2> loop;
                for (int v : el.vertex_ids) loop.push_back(m.vertices[v]);
                const InequalityConstants c0 = inequality_constants(loop, l);
                for (double s : {0.5, 0.25}) {
                    std::vector<Vec2> small;
                    for (const auto& v : loop) small.push_back(el.center + s * (v - el.center) + Vec2(0.1, -0.2));
                    const InequalityConstants c = inequality_constants(small, l);
                    leb.value = std::max(leb.value, worst(c.lebesgue, c0.lebesgue));
                    inv.value = std::max(inv.value, worst(c.inverse, c0.inverse));
                    tr.value = std::max(tr.value, worst(c.trace, c0.trace));
                    ++leb.instances;
                    ++inv.instances;
                    ++tr.instances;
                }
            }
    return {leb, inv, tr};
}

// The operator property suite on mixed square/hexagonal/polygonal elements.
inline std::vector<PropertyCheck> run_property_suite(int n = 50, unsigned seed = 12345) {
    std::mt19937 rng(seed);
    const std::vector<PolyMesh> meshes = property_meshes();
    std::vector<PropertyCheck> out;
    auto tag = [](PropertyCheck c, const std::string& suffix) {
        c.name += suffix;
        return c;
    };
    for (int k = 0; k <= 2; ++k) {
        const ElementSampler s(meshes, k);
        const std::string kk = " (k=" + std::to_string(k) + ")";
        out.push_back(tag(check_commutation(s, n, rng), kk));
        out.push_back(tag(check_reconstruction_consistency(s, n, rng), kk));
        if (k >= 1) out.push_back(tag(check_reconstruction_low_moments(s, n, rng), kk));
        out.push_back(tag(check_unsteady_l2_bound(s, 2 * n, rng), kk));
        out.push_back(tag(check_unsteady_h1_stability(meshes, k), kk));
    }
    for (auto& c : check_potential(meshes, 3 * n, rng)) out.push_back(c);
    out.push_back(check_koszul_dimensions(meshes));
    for (auto& c : check_inequality_stability(meshes)) out.push_back(c);
    return out;
}

// l_h(grad psi, v) for discretely divergence-free v with homogeneous boundary values and
// psi in P^{k+2}, on the 16-element hexagonal mesh; value is the worst |l_h| for unit v.
inline PropertyCheck check_pressure_robustness(int n, std::mt19937& rng, int k = 1) {
    PropertyCheck c{"l_h(grad psi, v) = 0 for divergence-free v", n, 0, 1e-11, ""};
    const PolyMesh mesh = generate_hexagonal_grid(5, 3);
    const Discretization disc(mesh, k);
    const DofMap dofs(disc);
    double div = 0, control = 0;
    for (int i = 0; i < n; ++i) {
        const VectorXd raw = uniform_vector(dofs.n_velocity(), rng);
        VectorXd v = project_divergence_free(disc, dofs, raw);
        v /= v.norm();
        const RandomPolynomial psi = RandomPolynomial::make(k + 2, rng);
        const VectorXd b = load_vector(disc, dofs, [&](const Vec2& x) { return psi.gradient(x); });
        c.value = std::max(c.value, std::abs(b.dot(v)));
        div = std::max(div, max_divergence(disc, dofs, v));
        control = std::max(control, std::abs(b.dot(raw / raw.norm())));
    }
    c.note = "max |D_T v| " + format_number(div) + "; same forcing on unprojected v: " + format_number(control);
    return c;
}

// Penalty sum_T sum_sigma int [[rho(pi^{k-1}((w_T^0 . grad) R v))]]^2 evaluated from its definition.
inline double penalty_energy(const Discretization& disc, const ConvectionContext& cc, const std::vector<VectorXd>& v) {
    const int k = disc.layout().k;
    if (k == 0) return 0.0;
    double e = 0;
    for (std::size_t T = 0; T < disc.n_elements(); ++T) {
        const Element& el = disc.mesh().elements[T];
        const std::vector<GammaOperators> gammas = build_gamma(el, k - 1);
        const PiecewisePoly Rv = disc.ops(T).R.apply(v[T]);
        const MonomialBasis2D low(k - 1, el.center, el.diameter);
        const int nl = low.size(), nP = Rv.basis.size();
        PiecewisePoly q(low, 2, el.submesh.triangles.size());
        for (std::size_t t = 0; t < el.submesh.triangles.size(); ++t) {
            const Simplex& tri = el.submesh.triangles[t];
            const Quadrature quad = triangle_quadrature(tri.x[0], tri.x[1], tri.x[2], 2 * k + 1);
            VectorXd rhs = VectorXd::Zero(2 * nl);
            for (std::size_t a = 0; a < quad.size(); ++a) {
                const MatrixX2d g = Rv.basis.gradients(quad.points[a]);
                const VectorXd m = low.values(quad.points[a]);
                for (int comp = 0; comp < 2; ++comp) {
                    const Vec2 grad = g.transpose() * Rv.coeffs[t].segment(comp * nP, nP);
                    rhs.segment(comp * nl, nl) += quad.weights[a] * cc.w0[T].dot(grad) * m;
                }
            }
            const Eigen::LDLT<MatrixXd> mass(monomial_mass(low, quad));
            q.coeffs[t] << mass.solve(rhs.head(nl)), mass.solve(rhs.tail(nl));
        }
        const PiecewisePoly img = potential_apply(q, gammas);
        for (const auto& s : el.submesh.interior_sfaces) {
            const Quadrature sq = segment_quadrature(s.a, s.b, 2 * k);
            const VectorXd j = potential_jump(img, s, sq.points);
            for (std::size_t a = 0; a < sq.size(); ++a) e += sq.weights[a] * j(a) * j(a);
        }
    }
    return e;
}

// t_h(w, v, v) >= 0 for admissible w, and t_h(w, v, v) equals 1/2 upwind jump energy plus the
// penalty evaluated independently.
inline std::pair<PropertyCheck, PropertyCheck> check_dissipativity(int n, std::mt19937& rng, int k = 1, int cells = 4) {
    PropertyCheck sign{"t_h(w, v, v) >= 0", n, 0, 1e-10, ""};
    PropertyCheck match{"t_h(w, v, v) equals the explicit nonnegative sum", n, 0, 1e-9, ""};
    const PolyMesh mesh = generate_cartesian(cells);
    const Discretization disc(mesh, k);
    const DofMap dofs(disc);
    double tmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const VectorXd w = project_divergence_free(disc, dofs, uniform_vector(dofs.n_velocity(), rng));
        const VectorXd v = uniform_vector(dofs.n_velocity(), rng);
        const ConvectionContext cc = convection_context(disc, dofs, w);
        const double t = v.dot(convection_matrix(disc, dofs, cc) * v);
        std::vector<VectorXd> loc(disc.n_elements());
        for (std::size_t T = 0; T < disc.n_elements(); ++T) loc[T] = dofs.local(static_cast<int>(T), v);
        const double sum = 0.5 * upwind_jump_energy(disc, cc, [&](std::size_t T) { return loc[T]; }) + penalty_energy(disc, cc, loc);
        tmin = std::min(tmin, t);
        sign.value = std::max(sign.value, -t);
        match.value = std::max(match.value, std::abs(t - sum) / std::max(std::abs(sum), 1e-300));
    }
    sign.note = "min t_h(w, v, v) = " + format_number(tmin);
    return {sign, match};
}

// The penalty vanishes identically at k = 0 and on interpolates of polynomials of degree <= k.
inline std::pair<PropertyCheck, PropertyCheck> check_penalty_zeros(int n, std::mt19937& rng) {
    PropertyCheck k0{"penalty is identically zero at k=0", 0, 0, 0.0, ""};
    PropertyCheck poly{"penalty vanishes on polynomial reconstructions", 0, 0, 0.0, ""};
    std::vector<PolyMesh> meshes{generate_cartesian(4), generate_hexagonal_grid(5, 3)};
    ConvectionOptions only_penalty{false, false, true};
    for (const auto& mesh : meshes) {
        const Discretization d0(mesh, 0);
        const DofMap dofs0(d0);
        for (int i = 0; i < n; ++i) {
            const VectorXd w = project_divergence_free(d0, dofs0, uniform_vector(dofs0.n_velocity(), rng));
            const VectorXd v = uniform_vector(dofs0.n_velocity(), rng);
            const ConvectionContext cc = convection_context(d0, dofs0, w);
            const SparseMatrix P = convection_matrix(d0, dofs0, cc, only_penalty);
            std::vector<VectorXd> loc(d0.n_elements());
            for (std::size_t T = 0; T < d0.n_elements(); ++T) loc[T] = dofs0.local(static_cast<int>(T), v);
            k0.value = std::max({k0.value, std::abs(v.dot(P * v)), std::abs(penalty_energy(d0, cc, loc))});
            ++k0.instances;
        }
        for (int k = 1; k <= 2; ++k) {
            const Discretization disc(mesh, k);
            const DofMap dofs(disc);
            for (int i = 0; i < n; ++i) {
                const VectorXd w = project_divergence_free(disc, dofs, uniform_vector(dofs.n_velocity(), rng));
                const ConvectionContext cc = convection_context(disc, dofs, w);
                const RandomPolynomial u = RandomPolynomial::divergence_free(k, rng);
                std::vector<VectorXd> loc(disc.n_elements());
                for (std::size_t T = 0; T < disc.n_elements(); ++T) {
                    loc[T] = interpolate(disc.context(T), VectorField(u));
                    const MatrixXd C = convection_element_block(disc, cc, T, only_penalty);
                    const double scale = loc[T].squaredNorm() * C.norm();
                    poly.value = std::max(poly.value, std::abs(loc[T].dot(C * loc[T])) / std::max(scale, 1e-300));
                }
                const double direct = penalty_energy(disc, cc, loc);
                poly.value = std::max(poly.value, direct);
                ++poly.instances;
            }
        }
    }
    poly.tolerance = 1e-14;
    poly.note = "relative to |v_T|^2 |P_T| (P_T already scales with |w_T^0|^2); tolerance covers floating-point round-off only";
    return {k0, poly};
}

// Analytic forcing against forcing rebuilt from u and p by centered finite differences
// (steps 1e-5 in space and time).
inline PropertyCheck check_forcing_oracle(int n, std::mt19937& rng, double nu = 1e-2) {
    PropertyCheck c{"analytic forcing matches finite differences", n, 0, 1e-6, ""};
    const ManufacturedSolution ms{nu};
    std::uniform_real_distribution<double> ux(0.05, 0.95), ut(0.0, 2.0);
    const double hs = 1e-5, ht = 1e-5;
    for (int i = 0; i < n; ++i) {
        const Vec2 x(ux(rng), ux(rng));
        const double t = ut(rng);
        const Vec2 ex(hs, 0), ey(0, hs);
        const Vec2 u = ms.u(x, t);
        const Vec2 dt_u = (ms.u(x, t + ht) - ms.u(x, t - ht)) / (2 * ht);
        const Vec2 dx_u = (ms.u(x + ex, t) - ms.u(x - ex, t)) / (2 * hs);
        const Vec2 dy_u = (ms.u(x + ey, t) - ms.u(x - ey, t)) / (2 * hs);
        const Vec2 lap = (ms.u(x + ex, t) + ms.u(x - ex, t) + ms.u(x + ey, t) + ms.u(x - ey, t) - 4 * u) / (hs * hs);
        const Vec2 grad_p((ms.p(x + ex, t) - ms.p(x - ex, t)) / (2 * hs), (ms.p(x + ey, t) - ms.p(x - ey, t)) / (2 * hs));
        const Vec2 fd = dt_u - nu * lap + u.x() * dx_u + u.y() * dy_u + grad_p;
        const Vec2 f = ms.f(x, t);
        c.value = std::max(c.value, (f - fd).norm() / std::max(f.norm(), 1e-12));
    }
    return c;
}

} // namespace hhoflow
