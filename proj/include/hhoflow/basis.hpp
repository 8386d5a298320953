#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "mesh.hpp"

namespace hhoflow {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using MatrixX2d = Eigen::Matrix<double, Eigen::Dynamic, 2>;

inline int dim_poly2(int l) { return l < 0 ? 0 : (l + 1) * (l + 2) / 2; }
inline int dim_poly1(int l) { return l < 0 ? 0 : l + 1; }

// Monomials ((x - c)/s)^(a, b) of total degree <= l, ordered by degree then by b.
class MonomialBasis2D {
public:
    static constexpr int max_degree = 15;

    MonomialBasis2D() = default;
    MonomialBasis2D(int degree, const Vec2& center, double scale) : degree_(degree), center_(center), scale_(scale) {
        if (degree > max_degree) throw UnsupportedDegree("monomial degree " + std::to_string(degree));
        for (int d = 0; d <= degree; ++d)
            for (int b = 0; b <= d; ++b) powers_.push_back({d - b, b});
    }

    int degree() const { return degree_; }
    int size() const { return static_cast<int>(powers_.size()); }
    const Vec2& center() const { return center_; }
    double scale() const { return scale_; }
    const std::array<int, 2>& powers(int i) const { return powers_[i]; }

    // index of xi^a eta^b, or -1 if a + b exceeds the degree
    static int index(int a, int b) {
        if (a < 0 || b < 0) return -1;
        const int d = a + b;
        return d * (d + 1) / 2 + b;
    }

    Vec2 local(const Vec2& x) const { return (x - center_) / scale_; }

    VectorXd values(const Vec2& x) const {
        VectorXd v(size());
        values(x, v.data());
        return v;
    }

    void values(const Vec2& x, double* out) const {
        const Vec2 xi = local(x);
        double px[16], py[16];
        fill_powers(xi, px, py);
        for (int i = 0; i < size(); ++i) out[i] = px[powers_[i][0]] * py[powers_[i][1]];
    }

    // rows: basis functions, columns: d/dx, d/dy (physical coordinates)
    MatrixX2d gradients(const Vec2& x) const {
        const Vec2 xi = local(x);
        double px[16], py[16];
        fill_powers(xi, px, py);
        MatrixX2d g(size(), 2);
        for (int i = 0; i < size(); ++i) {
            const int a = powers_[i][0], b = powers_[i][1];
            g(i, 0) = a > 0 ? a * px[a - 1] * py[b] / scale_ : 0.0;
            g(i, 1) = b > 0 ? b * px[a] * py[b - 1] / scale_ : 0.0;
        }
        return g;
    }

private:
    void fill_powers(const Vec2& xi, double* px, double* py) const {
        px[0] = py[0] = 1.0;
        for (int d = 1; d <= degree_; ++d) {
            px[d] = px[d - 1] * xi.x();
            py[d] = py[d - 1] * xi.y();
        }
    }

    int degree_ = 0;
    Vec2 center_ = Vec2::Zero();
    double scale_ = 1.0;
    std::vector<std::array<int, 2>> powers_;
};

// Monomials t^i on a segment, t = (x - c).tangent / (|F|/2).
class MonomialBasis1D {
public:
    MonomialBasis1D() = default;
    MonomialBasis1D(int degree, const Vec2& a, const Vec2& b)
        : degree_(degree), center_(0.5 * (a + b)), tangent_((b - a).normalized()), half_length_(0.5 * (b - a).norm()) {}

    int degree() const { return degree_; }
    int size() const { return degree_ + 1; }
    double local(const Vec2& x) const { return (x - center_).dot(tangent_) / half_length_; }

    VectorXd values(const Vec2& x) const {
        VectorXd v(size());
        const double t = local(x);
        double p = 1.0;
        for (int i = 0; i <= degree_; ++i, p *= t) v(i) = p;
        return v;
    }

private:
    int degree_ = 0;
    Vec2 center_ = Vec2::Zero();
    Vec2 tangent_ = Vec2(1, 0);
    double half_length_ = 1.0;
};

namespace detail {

// Lower-triangular T with T * G * T^T = I, computed by Cholesky with one refinement pass.
inline MatrixXd orthonormalizer(const MatrixXd& gram) {
    const int n = static_cast<int>(gram.rows());
    MatrixXd T = MatrixXd::Identity(n, n);
    MatrixXd G = gram;
    for (int pass = 0; pass < 2; ++pass) {
        Eigen::LLT<MatrixXd> llt(G);
        if (llt.info() != Eigen::Success) throw SingularGram("Gram matrix is not positive definite");
        const MatrixXd Linv = llt.matrixL().solve(MatrixXd::Identity(n, n));
        if (!Linv.allFinite()) throw SingularGram("Gram factorization produced non-finite entries");
        T = Linv * T;
        G = T * gram * T.transpose();
    }
    return T;
}

} // namespace detail

// Orthonormal basis phi = T m of a scalar polynomial space on an element, simplex or face.
class ScalarSpace2D {
public:
    ScalarSpace2D() = default;
    ScalarSpace2D(const MonomialBasis2D& mono, const std::vector<Quadrature>& quads) : mono_(mono) {
        MatrixXd gram = MatrixXd::Zero(mono.size(), mono.size());
        VectorXd m(mono.size());
        for (const auto& q : quads)
            for (std::size_t i = 0; i < q.size(); ++i) {
                mono.values(q.points[i], m.data());
                gram.noalias() += q.weights[i] * m * m.transpose();
            }
        T_ = detail::orthonormalizer(gram);
    }

    int degree() const { return mono_.degree(); }
    int size() const { return mono_.size(); }
    const MonomialBasis2D& monomials() const { return mono_; }
    const MatrixXd& transform() const { return T_; }

    VectorXd values(const Vec2& x) const { return T_ * mono_.values(x); }
    MatrixX2d gradients(const Vec2& x) const { return T_ * mono_.gradients(x); }

private:
    MonomialBasis2D mono_;
    MatrixXd T_;
};

class FaceSpace {
public:
    FaceSpace() = default;
    FaceSpace(int degree, const Vec2& a, const Vec2& b, int quad_degree) : mono_(degree, a, b) {
        const Quadrature q = segment_quadrature(a, b, std::max(quad_degree, 2 * degree));
        MatrixXd gram = MatrixXd::Zero(mono_.size(), mono_.size());
        for (std::size_t i = 0; i < q.size(); ++i) {
            const VectorXd m = mono_.values(q.points[i]);
            gram.noalias() += q.weights[i] * m * m.transpose();
        }
        T_ = detail::orthonormalizer(gram);
    }

    int degree() const { return mono_.degree(); }
    int size() const { return mono_.size(); }
    const MatrixXd& transform() const { return T_; }
    VectorXd values(const Vec2& x) const { return T_ * mono_.values(x); }

private:
    MonomialBasis1D mono_;
    MatrixXd T_;
};

inline std::vector<Quadrature> submesh_quadratures(const SubMesh& sm, int degree) {
    std::vector<Quadrature> qs;
    qs.reserve(sm.triangles.size());
    for (const auto& t : sm.triangles) qs.push_back(triangle_quadrature(t.x[0], t.x[1], t.x[2], degree));
    return qs;
}

using ScalarField = std::function<double(const Vec2&)>;
using VectorField = std::function<Vec2(const Vec2&)>;

// L2 projection onto an orthonormal element space (integration over the submesh).
inline VectorXd project(const ScalarField& f, const ScalarSpace2D& space, const std::vector<Quadrature>& quads) {
    VectorXd c = VectorXd::Zero(space.size());
    for (const auto& q : quads)
        for (std::size_t i = 0; i < q.size(); ++i) c += q.weights[i] * f(q.points[i]) * space.values(q.points[i]);
    return c;
}

// Vector projection: coefficients stacked by component.
inline VectorXd project(const VectorField& f, const ScalarSpace2D& space, const std::vector<Quadrature>& quads) {
    const int n = space.size();
    VectorXd c = VectorXd::Zero(2 * n);
    for (const auto& q : quads)
        for (std::size_t i = 0; i < q.size(); ++i) {
            const VectorXd phi = space.values(q.points[i]);
            const Vec2 v = f(q.points[i]);
            c.head(n) += q.weights[i] * v.x() * phi;
            c.tail(n) += q.weights[i] * v.y() * phi;
        }
    return c;
}

inline VectorXd project(const ScalarField& f, const FaceSpace& space, const Quadrature& q) {
    VectorXd c = VectorXd::Zero(space.size());
    for (std::size_t i = 0; i < q.size(); ++i) c += q.weights[i] * f(q.points[i]) * space.values(q.points[i]);
    return c;
}

inline VectorXd project(const VectorField& f, const FaceSpace& space, const Quadrature& q) {
    const int n = space.size();
    VectorXd c = VectorXd::Zero(2 * n);
    for (std::size_t i = 0; i < q.size(); ++i) {
        const VectorXd phi = space.values(q.points[i]);
        const Vec2 v = f(q.points[i]);
        c.head(n) += q.weights[i] * v.x() * phi;
        c.tail(n) += q.weights[i] * v.y() * phi;
    }
    return c;
}

// Projection of a field declared polynomial of degree f_degree; refuses inexact quadrature.
inline VectorXd project_polynomial(const ScalarField& f, int f_degree, const ScalarSpace2D& space,
                                   const std::vector<Quadrature>& quads) {
    for (const auto& q : quads)
        if (f_degree + space.degree() > q.degree)
            throw QuadratureDeficit("integrand degree " + std::to_string(f_degree + space.degree()) +
                                    " exceeds quadrature exactness " + std::to_string(q.degree));
    return project(f, space, quads);
}

inline double evaluate(const ScalarSpace2D& space, const VectorXd& c, const Vec2& x) { return space.values(x).dot(c); }

inline Vec2 evaluate_vector(const ScalarSpace2D& space, const VectorXd& c, const Vec2& x) {
    const VectorXd phi = space.values(x);
    const int n = space.size();
    return Vec2(phi.dot(c.head(n)), phi.dot(c.tail(n)));
}

// Polynomial coefficients per simplex of an element submesh, in monomials scaled by (x_T, h_T).
// Vector fields stack the component coefficients.
struct PiecewisePoly {
    MonomialBasis2D basis;
    int rank = 1;
    std::vector<VectorXd> coeffs;

    PiecewisePoly() = default;
    PiecewisePoly(const MonomialBasis2D& b, int rank_, std::size_t n_simplices)
        : basis(b), rank(rank_), coeffs(n_simplices, VectorXd::Zero(rank_ * b.size())) {}

    double value(std::size_t tau, const Vec2& x) const { return basis.values(x).dot(coeffs[tau].head(basis.size())); }

    Vec2 vector_value(std::size_t tau, const Vec2& x) const {
        const VectorXd m = basis.values(x);
        const int n = basis.size();
        return Vec2(m.dot(coeffs[tau].head(n)), m.dot(coeffs[tau].segment(n, n)));
    }

    Vec2 gradient(std::size_t tau, const Vec2& x) const {
        return basis.gradients(x).transpose() * coeffs[tau].head(basis.size());
    }
};

// Mass matrix of a monomial basis over a list of simplex quadratures.
inline MatrixXd monomial_mass(const MonomialBasis2D& mono, const Quadrature& q) {
    MatrixXd M = MatrixXd::Zero(mono.size(), mono.size());
    VectorXd m(mono.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        mono.values(q.points[i], m.data());
        M.noalias() += q.weights[i] * m * m.transpose();
    }
    return M;
}

inline MatrixXd block_diag2(const MatrixXd& A) {
    MatrixXd B = MatrixXd::Zero(2 * A.rows(), 2 * A.cols());
    B.topLeftCorner(A.rows(), A.cols()) = A;
    B.bottomRightCorner(A.rows(), A.cols()) = A;
    return B;
}

// Matrix of d/dxi (dir 0) or d/deta (dir 1) mapping degree-l monomial coefficients to degree l-1.
inline MatrixXd monomial_derivative(int l, int dir) {
    MatrixXd D = MatrixXd::Zero(dim_poly2(l - 1), dim_poly2(l));
    for (int d = 1; d <= l; ++d)
        for (int b = 0; b <= d; ++b) {
            const int a = d - b;
            const int col = MonomialBasis2D::index(a, b);
            if (dir == 0 && a > 0) D(MonomialBasis2D::index(a - 1, b), col) = a;
            if (dir == 1 && b > 0) D(MonomialBasis2D::index(a, b - 1), col) = b;
        }
    return D;
}

// Koszul decomposition P^l(X)^2 = grad P^{l+1}(X) + (x - x_T)^perp P^{l-1}(X) on one simplex
// (or element). Bases are columns of coefficients in the vector monomial basis of P^l.
struct KoszulSpaces {
    int degree = 0;
    MatrixXd G;      // grad of monomials of degree 1..l+1
    MatrixXd Gc;     // xi^perp times monomials of degree <= l-1 (empty for l <= 0)
    MatrixXd mass;   // vector P^l mass matrix
    MatrixXd projG;  // L2-orthogonal projectors acting on coefficients
    MatrixXd projGc;

    int dim_G() const { return static_cast<int>(G.cols()); }
    int dim_Gc() const { return static_cast<int>(Gc.cols()); }
};

inline MatrixXd koszul_gradient_basis(int l) {
    const int n = dim_poly2(l);
    const int ng = dim_poly2(l + 1) - 1;
    MatrixXd G = MatrixXd::Zero(2 * n, ng);
    const MatrixXd Dx = monomial_derivative(l + 1, 0), Dy = monomial_derivative(l + 1, 1);
    for (int j = 0; j < ng; ++j) {
        G.col(j).head(n) = Dx.col(j + 1);
        G.col(j).tail(n) = Dy.col(j + 1);
    }
    return G;
}

inline MatrixXd koszul_complement_basis(int l) {
    const int n = dim_poly2(l);
    const int nc = dim_poly2(l - 1);
    MatrixXd Gc = MatrixXd::Zero(2 * n, nc);
    for (int d = 0; d <= l - 1; ++d)
        for (int b = 0; b <= d; ++b) {
            const int a = d - b;
            const int j = MonomialBasis2D::index(a, b);
            Gc(MonomialBasis2D::index(a, b + 1), j) = -1.0;     // -eta * m
            Gc(n + MonomialBasis2D::index(a + 1, b), j) = 1.0;  // xi * m
        }
    return Gc;
}

inline MatrixXd orthogonal_projector(const MatrixXd& B, const MatrixXd& M) {
    if (B.cols() == 0) return MatrixXd::Zero(M.rows(), M.cols());
    const MatrixXd BtM = B.transpose() * M;
    Eigen::LDLT<MatrixXd> ldlt(BtM * B);
    if (ldlt.info() != Eigen::Success) throw SingularGram("singular Koszul Gram matrix");
    return B * ldlt.solve(BtM);
}

// Koszul spaces of degree l on the simplex (or element) integrated by quad, monomials
// centered at x_T with scale h_T.
inline KoszulSpaces koszul_spaces(int l, const Vec2& x_T, double h_T, const Quadrature& quad) {
    KoszulSpaces ks;
    ks.degree = l;
    ks.G = koszul_gradient_basis(l);
    ks.Gc = koszul_complement_basis(l);
    const MonomialBasis2D mono(l, x_T, h_T);
    ks.mass = block_diag2(monomial_mass(mono, quad));
    ks.projG = orthogonal_projector(ks.G, ks.mass);
    ks.projGc = orthogonal_projector(ks.Gc, ks.mass);
    return ks;
}

// Broken Koszul spaces on the submesh of one element, one block per simplex.
inline std::vector<KoszulSpaces> koszul_spaces(int l, const Element& el) {
    std::vector<KoszulSpaces> out;
    for (const auto& t : el.submesh.triangles)
        out.push_back(koszul_spaces(l, el.center, el.diameter, triangle_quadrature(t.x[0], t.x[1], t.x[2], 2 * std::max(l, 0))));
    return out;
}

} // namespace hhoflow
