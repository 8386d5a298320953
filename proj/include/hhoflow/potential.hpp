#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "basis.hpp"

namespace hhoflow {

// Recovery operators on one simplex tau at degree l, acting on P^l(tau)^2 coefficients in
// monomials scaled by (x_T, h_T).
struct GammaOperators {
    int degree = 0;
    double h = 1.0;
    KoszulSpaces ks;
    MatrixXd gammaG;    // (Id - pi_G pi_Gc)^{-1}
    MatrixXd gammaGc;   // (Id - pi_Gc pi_G)^{-1}
    double contraction; // |pi_G pi_Gc| in the L2(tau) operator norm
    MatrixXd grad;      // q -> grad rho q, as P^l^2 coefficients
    MatrixXd rho;       // q -> rho q, as P^{l+1} coefficients, zero at x_T

    // Rec(b, c) = Gamma_G(b - pi_G c) + Gamma_Gc(c - pi_Gc b)
    VectorXd recover(const VectorXd& b, const VectorXd& c) const {
        return gammaG * (b - ks.projG * c) + gammaGc * (c - ks.projGc * b);
    }
};

// Operator norm of A in the inner product induced by the SPD matrix M.
inline double m_norm(const MatrixXd& A, const MatrixXd& M) {
    Eigen::LLT<MatrixXd> llt(M);
    const MatrixXd Lt = llt.matrixU();
    const MatrixXd X = Lt * A * Lt.inverse();
    Eigen::JacobiSVD<MatrixXd> svd(X);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

inline GammaOperators build_gamma(const KoszulSpaces& ks, double h) {
    GammaOperators g;
    g.degree = ks.degree;
    g.h = h;
    g.ks = ks;
    const int n = static_cast<int>(ks.mass.rows());
    const MatrixXd I = MatrixXd::Identity(n, n);
    const MatrixXd PP = ks.projG * ks.projGc;
    g.contraction = m_norm(PP, ks.mass);
    if (!(g.contraction < 1.0 - 1e-8))
        throw ContractionFailure("|pi_G pi_Gc| = " + std::to_string(g.contraction));
    g.gammaG = (I - PP).partialPivLu().inverse();
    g.gammaGc = (I - ks.projGc * ks.projG).partialPivLu().inverse();
    g.grad = g.gammaG * (ks.projG - PP);

    // antiderivative: grad_xi p = h g with p spanned by monomials of degree 1..l+1, which
    // all vanish at xi = 0, i.e. at x_T
    const MatrixXd target = h * g.grad;
    const MatrixXd c = ks.G.completeOrthogonalDecomposition().solve(target);
    const double scale = std::max(1.0, target.norm());
    if ((ks.G * c - target).norm() > 1e-9 * scale)
        throw ContractionFailure("gradient reconstruction is not a gradient");
    const int np1 = dim_poly2(ks.degree + 1);
    g.rho = MatrixXd::Zero(np1, n);
    g.rho.bottomRows(np1 - 1) = c;
    return g;
}

// Gamma operators on every simplex of the element submesh.
inline std::vector<GammaOperators> build_gamma(const Element& el, int l, int quad_degree = -1) {
    std::vector<GammaOperators> out;
    if (l < 0) return out;
    const int qd = quad_degree < 0 ? 2 * l : quad_degree;
    for (const auto& t : el.submesh.triangles) {
        const Quadrature q = triangle_quadrature(t.x[0], t.x[1], t.x[2], qd);
        out.push_back(build_gamma(koszul_spaces(l, el.center, el.diameter, q), el.diameter));
    }
    return out;
}

// rho^{l+1} of a broken vector polynomial of degree l; the zero operator when l < 0.
inline PiecewisePoly potential_apply(const PiecewisePoly& q, const std::vector<GammaOperators>& gammas) {
    const int l = q.basis.degree();
    PiecewisePoly out(MonomialBasis2D(l + 1, q.basis.center(), q.basis.scale()), 1, q.coeffs.size());
    if (gammas.empty()) return out;
    for (std::size_t t = 0; t < q.coeffs.size(); ++t) out.coeffs[t] = gammas[t].rho * q.coeffs[t];
    return out;
}

// Trace from tau1 minus trace from tau2 at the given points of an interior sface.
inline VectorXd potential_jump(const PiecewisePoly& img, const SimplicialFace& s, const std::vector<Vec2>& points) {
    if (!s.is_interior()) throw NotInteriorFace("sface has a single adjacent simplex");
    VectorXd j(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        j(i) = img.value(s.tau1, points[i]) - img.value(s.tau2, points[i]);
    return j;
}

// Jump as coefficients of the monomial basis t^i on sigma (degree of the image).
inline VectorXd potential_jump(const PiecewisePoly& img, const SimplicialFace& s) {
    if (!s.is_interior()) throw NotInteriorFace("sface has a single adjacent simplex");
    const int d = img.basis.degree();
    const MonomialBasis1D mono(d, s.a, s.b);
    const Quadrature q = segment_quadrature(s.a, s.b, 2 * d);
    MatrixXd M = MatrixXd::Zero(d + 1, d + 1);
    VectorXd rhs = VectorXd::Zero(d + 1);
    for (std::size_t i = 0; i < q.size(); ++i) {
        const VectorXd m = mono.values(q.points[i]);
        M.noalias() += q.weights[i] * m * m.transpose();
        rhs += q.weights[i] * (img.value(s.tau1, q.points[i]) - img.value(s.tau2, q.points[i])) * m;
    }
    return M.ldlt().solve(rhs);
}

} // namespace hhoflow
