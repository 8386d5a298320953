#include <array>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace hhoflow;

TEST(Potential, OperatorIdentities) {
    std::mt19937 rng(101);
    for (const auto& c : check_potential(property_meshes(), 150, rng)) EXPECT_PROPERTY(c);
}

TEST(Potential, KoszulSplittingIsContractive) {
    for (const auto& mesh : property_meshes())
        for (const auto& el : mesh.elements)
            for (int l = 0; l <= 3; ++l)
                for (const auto& g : build_gamma(el, l)) {
                    EXPECT_GE(g.contraction, 0.0);
                    EXPECT_LT(g.contraction, 1.0 - 1e-8);
                }
}

TEST(Potential, GammaIsTheNeumannSeries) {
    const PolyMesh mesh = generate_hexagonal_grid(5, 3);
    for (int l = 0; l <= 2; ++l)
        for (const auto& g : build_gamma(mesh.elements[6], l)) {
            const MatrixXd PP = g.ks.projG * g.ks.projGc;
            MatrixXd sum = MatrixXd::Identity(PP.rows(), PP.cols()), term = sum;
            for (int n = 0; n < 2000 && term.norm() > 1e-14; ++n) {
                term = PP * term;
                sum += term;
            }
            EXPECT_LT((sum - g.gammaG).norm(), 1e-9 * g.gammaG.norm());
        }
}

TEST(Potential, VanishesAtTheStarCenter) {
    std::mt19937 rng(103);
    for (const auto& mesh : property_meshes())
        for (const auto& el : mesh.elements) {
            const auto gammas = build_gamma(el, 1);
            PiecewisePoly q(MonomialBasis2D(1, el.center, el.diameter), 2, gammas.size());
            for (auto& c : q.coeffs) c = uniform_vector(c.size(), rng);
            const PiecewisePoly img = potential_apply(q, gammas);
            for (std::size_t t = 0; t < gammas.size(); ++t) EXPECT_NEAR(img.value(t, el.center), 0.0, 1e-14);
        }
}

TEST(Potential, BoundedOnGradientSpaceForLowDegrees) {
    // |Gamma_G q| <= C |q|, with C independent of the shape for l <= 1
    double worst = 0;
    for (const auto& mesh : property_meshes())
        for (const auto& el : mesh.elements)
            for (int l = 0; l <= 1; ++l)
                for (const auto& g : build_gamma(el, l)) worst = std::max(worst, m_norm(g.gammaG, g.ks.mass));
    EXPECT_LE(worst, 20.0);
}

TEST(Potential, JumpOfHandBuiltPotential) {
    // rho = s on tau1 and 2s on tau2, where s is the arclength along sigma from x_T
    const std::vector<Vec2> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const Vec2 xT(0.5, 0.5);
    const SubMesh sm = build_submesh(square, xT);
    const SimplicialFace& s = sm.interior_sfaces[0];
    ASSERT_EQ((s.a - xT).norm(), 0.0);
    const double h = std::sqrt(2.0);
    const Vec2 tangent = (s.b - s.a).normalized();
    PiecewisePoly img(MonomialBasis2D(1, xT, h), 1, sm.triangles.size());
    img.coeffs[s.tau1] << 0, h * tangent.x(), h * tangent.y();
    img.coeffs[s.tau2] = 2 * img.coeffs[s.tau1];

    const std::vector<Vec2> pts{s.a, 0.5 * (s.a + s.b), s.b};
    const VectorXd j = potential_jump(img, s, pts);
    EXPECT_NEAR(j(0), 0.0, 1e-15);
    EXPECT_NEAR(j(1), -0.5 * s.length, 1e-14);
    EXPECT_NEAR(j(2), -s.length, 1e-14);

    // as coefficients of t in [-1, 1] along a -> b: -L/2 (1 + t)
    const VectorXd c = potential_jump(img, s);
    ASSERT_EQ(c.size(), 2);
    EXPECT_NEAR(c(0), -0.5 * s.length, 1e-13);
    EXPECT_NEAR(c(1), -0.5 * s.length, 1e-13);
}

TEST(Potential, JumpOnBoundarySfaceIsRejected) {
    const PolyMesh mesh = generate_cartesian(1);
    const Element& el = mesh.elements[0];
    const PiecewisePoly img(MonomialBasis2D(1, el.center, el.diameter), 1, el.submesh.triangles.size());
    const SimplicialFace& b = el.submesh.boundary_sfaces[0][0];
    EXPECT_THROW(potential_jump(img, b), NotInteriorFace);
    EXPECT_THROW(potential_jump(img, b, {b.a}), NotInteriorFace);
}

TEST(Potential, NegativeDegreeIsTheZeroOperator) {
    const PolyMesh mesh = generate_cartesian(1);
    EXPECT_TRUE(build_gamma(mesh.elements[0], -1).empty());
}

TEST(Koszul, DimensionsAndDirectness) { EXPECT_PROPERTY(check_koszul_dimensions(property_meshes())); }

TEST(Simplex, PoincareConstantStableUnderRefinement) {
    // |p|_{L2(tau)} <= C h_tau |grad p| for p in P^l(tau) vanishing at x_T
    auto constant = [](const Simplex& tri, int l) {
        const MonomialBasis2D mono(l, tri.x[0], tri.diameter);
        const Quadrature q = triangle_quadrature(tri.x[0], tri.x[1], tri.x[2], 2 * l);
        const int n = mono.size() - 1;
        MatrixXd M = monomial_mass(mono, q).bottomRightCorner(n, n), K = MatrixXd::Zero(n, n);
        for (std::size_t a = 0; a < q.size(); ++a) {
            const MatrixX2d g = mono.gradients(q.points[a]).bottomRows(n);
            K.noalias() += q.weights[a] * g * g.transpose();
        }
        Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(M, K, Eigen::EigenvaluesOnly);
        return std::sqrt(es.eigenvalues().maxCoeff()) / tri.diameter;
    };
    for (const auto& mesh : property_meshes())
        for (const auto& el : mesh.elements)
            for (const auto& tri : el.submesh.triangles)
                for (int l = 1; l <= 3; ++l) {
                    Simplex small = tri;
                    for (auto& x : small.x) x = Vec2(0.3, 0.1) + 0.25 * (x - tri.x[0]);
                    small.area = tri.area / 16;
                    small.diameter = tri.diameter / 4;
                    const double c0 = constant(tri, l), c1 = constant(small, l);
                    EXPECT_GT(c0, 0);
                    EXPECT_NEAR(c1 / c0, 1.0, 1e-6);
                }
}

TEST(Inequalities, ConstantsStableUnderRefinement) {
    for (const auto& c : check_inequality_stability(property_meshes())) EXPECT_PROPERTY(c);
}

TEST(Potential, BoundednessConstantStableUnderRefinement) {
    // |rho q| + h |grad rho q| <= C h |q| on each simplex; C measured as the two best constants
    auto constants = [](const Element& el, int l) {
        std::vector<std::array<double, 2>> out;
        const auto gammas = build_gamma(el, l);
        for (std::size_t t = 0; t < gammas.size(); ++t) {
            const GammaOperators& g = gammas[t];
            const Simplex& tri = el.submesh.triangles[t];
            const MonomialBasis2D high(l + 1, el.center, el.diameter);
            const MatrixXd Mh = monomial_mass(high, triangle_quadrature(tri.x[0], tri.x[1], tri.x[2], 2 * l + 2));
            Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> a(g.rho.transpose() * Mh * g.rho, g.ks.mass, Eigen::EigenvaluesOnly);
            Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> b(g.grad.transpose() * g.ks.mass * g.grad, g.ks.mass,
                                                                 Eigen::EigenvaluesOnly);
            out.push_back({std::sqrt(a.eigenvalues().maxCoeff()) / el.diameter, std::sqrt(b.eigenvalues().maxCoeff())});
        }
        return out;
    };
    for (const auto& mesh : property_meshes())
        for (const auto& el : mesh.elements) {
            std::vector<Vec2> loop;
            std::vector<int> ids;
            for (int v : el.vertex_ids) {
                ids.push_back(static_cast<int>(loop.size()));
                loop.push_back(el.center + 0.5 * (mesh.vertices[v] - el.center));
            }
            const PolyMesh half = build_mesh(loop, {ids});
            for (int l = 0; l <= 2; ++l) {
                const auto c0 = constants(el, l), c1 = constants(half.elements[0], l);
                ASSERT_EQ(c0.size(), c1.size());
                for (std::size_t t = 0; t < c0.size(); ++t)
                    for (int i = 0; i < 2; ++i) {
                        EXPECT_GT(c0[t][i], 0);
                        EXPECT_LT(std::max(c1[t][i] / c0[t][i], c0[t][i] / c1[t][i]), 2.0);
                    }
            }
        }
}
