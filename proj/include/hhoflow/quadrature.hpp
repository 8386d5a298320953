#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace hhoflow {

using Vec2 = Eigen::Vector2d;

struct Quadrature {
    std::vector<Vec2> points;
    std::vector<double> weights;
    int degree = 0;

    std::size_t size() const { return points.size(); }
};

inline constexpr int max_quadrature_degree = 60;

namespace detail {

struct GaussRule {
    std::vector<double> nodes;   // on [0,1]
    std::vector<double> weights; // sum to 1
};

inline GaussRule compute_gauss_legendre(int n) {
    // Legendre P_n and P_n' at x by the three-term recurrence
    auto legendre = [n](double x) {
        double p0 = 1.0, p1 = x;
        for (int j = 2; j <= n; ++j) {
            const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
            p0 = p1;
            p1 = p2;
        }
        return std::pair{p1, n * (x * p1 - p0) / (x * x - 1.0)};
    };
    GaussRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            const auto [p, dp] = legendre(x);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double dp = legendre(x).second;
        r.nodes[n - 1 - i] = 0.5 * (x + 1.0);
        r.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

inline const GaussRule& gauss_legendre(int n) {
    static const std::vector<GaussRule> table = [] {
        std::vector<GaussRule> t(max_quadrature_degree / 2 + 3);
        for (std::size_t n = 1; n < t.size(); ++n) t[n] = compute_gauss_legendre(static_cast<int>(n));
        return t;
    }();
    return table.at(n);
}

inline void check_degree(int degree) {
    if (degree < 0 || degree > max_quadrature_degree)
        throw UnsupportedDegree("quadrature degree " + std::to_string(degree) + " outside [0, " +
                                std::to_string(max_quadrature_degree) + "]");
}

} // namespace detail

// Gauss-Legendre rule on the segment [a, b], exact up to `degree`.
inline Quadrature segment_quadrature(const Vec2& a, const Vec2& b, int degree) {
    detail::check_degree(degree);
    const auto& g = detail::gauss_legendre(degree / 2 + 1);
    const double len = (b - a).norm();
    Quadrature q;
    q.degree = degree;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        q.points.push_back(a + g.nodes[i] * (b - a));
        q.weights.push_back(g.weights[i] * len);
    }
    return q;
}

// Collapsed (Duffy) tensor Gauss rule on the triangle (a, b, c); positive weights.
inline Quadrature triangle_quadrature(const Vec2& a, const Vec2& b, const Vec2& c, int degree) {
    detail::check_degree(degree);
    const auto& g = detail::gauss_legendre((degree + 3) / 2);
    const Vec2 e1 = b - a, e2 = c - a;
    const double area2 = std::abs(e1.x() * e2.y() - e1.y() * e2.x());
    Quadrature q;
    q.degree = degree;
    const std::size_t n = g.nodes.size();
    q.points.reserve(n * n);
    q.weights.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = g.nodes[i];
        for (std::size_t j = 0; j < n; ++j) {
            const double v = g.nodes[j] * (1.0 - u);
            q.points.push_back(a + u * e1 + v * e2);
            q.weights.push_back(area2 * g.weights[i] * g.weights[j] * (1.0 - u));
        }
    }
    return q;
}

} // namespace hhoflow
