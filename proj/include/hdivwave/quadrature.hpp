#pragma once

#include "core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

namespace hdivwave {

/// Reference cells: triangle (0,0),(1,0),(0,1); square [0,1]^2 with vertices
/// (0,0),(1,0),(1,1),(0,1). Areas 1/2 and 1.
inline Vec2 reference_vertex(Shape s, int i) {
  static const Vec2 tri[3] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  static const Vec2 sq[4] = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
  return s == Shape::triangle ? tri[i] : sq[i];
}

inline Vec2 reference_midpoint(Shape s) {
  return s == Shape::triangle ? Vec2{1.0 / 3.0, 1.0 / 3.0} : Vec2{0.5, 0.5};
}

inline double reference_area(Shape s) { return s == Shape::triangle ? 0.5 : 1.0; }

struct QuadPoint {
  Vec2 point;     // reference coordinates
  double weight;  // fraction of the cell area
};

/// Vertex + midpoint rule:
///   (u,v)_{h,K} = |K| (alpha u(m_K).v(m_K) + sum_i beta u(v_i).v(v_i)).
/// Point 0..n-1 are the vertices, point n is the midpoint.
struct LumpedQuadRule {
  Shape shape = Shape::triangle;
  double alpha = 0.75;
  double beta = 1.0 / 12.0;

  static LumpedQuadRule for_shape(Shape s) {
    return s == Shape::triangle ? LumpedQuadRule{s, 3.0 / 4.0, 1.0 / 12.0} : LumpedQuadRule{s, 2.0 / 3.0, 1.0 / 12.0};
  }

  int num_points() const { return num_vertices(shape) + 1; }
  int midpoint_index() const { return num_vertices(shape); }

  QuadPoint point(int q) const {
    if (q == midpoint_index()) return {reference_midpoint(shape), alpha};
    return {reference_vertex(shape, q), beta};
  }

  /// Integral over a cell of area |K| of a scalar function of reference coordinates.
  template <class F>
  double integrate(F&& f, double area) const {
    double s = 0.0;
    for (int q = 0; q < num_points(); ++q) {
      const QuadPoint p = point(q);
      s += p.weight * f(p.point);
    }
    return area * s;
  }
};

/// Gauss-Legendre nodes and weights on [0,1].
inline std::vector<std::pair<double, double>> gauss_legendre(int n) {
  // Returns (P_n(x), P_n'(x)) from the three-term recurrence.
  auto legendre = [n](double x) {
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    if (n == 0) return std::pair{1.0, 0.0};
    return std::pair{p1, n * (x * p1 - p0) / (x * x - 1.0)};
  };
  std::vector<std::pair<double, double>> out(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = legendre(x).second;
    out[n - 1 - i] = {0.5 * (1.0 + x), 1.0 / ((1.0 - x * x) * dp * dp)};
  }
  return out;
}

/// Positive reference integration rule with weights summing to 1 (fraction of
/// the cell area). Used as the "exact" integrator for errors and comparisons.
struct OracleRule {
  Shape shape = Shape::triangle;
  int degree = 0;
  std::vector<QuadPoint> points;

  /// Degree-6 default: 12-point symmetric rule on the triangle, 4x4 Gauss on the square.
  static OracleRule standard(Shape s) {
    if (s == Shape::parallelogram) return tensor_gauss(4);
    OracleRule r{Shape::triangle, 6, {}};
    auto orbit3 = [&](double a, double w) {
      const double b = 0.5 * (1.0 - a);
      r.points.push_back({{b, b}, w});
      r.points.push_back({{a, b}, w});
      r.points.push_back({{b, a}, w});
    };
    orbit3(0.5014265096581790912386092, 0.1167862757263793117094276);
    orbit3(0.873821971016995558121281, 0.05084490637020680632696026);
    const double b = 0.310352451033784378669752, c = 0.6365024991213986513952894;
    const double a = 1.0 - b - c, w = 0.08285107561837360764847274;
    const double l[3] = {a, b, c};
    static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& p : perms) r.points.push_back({{l[p[1]], l[p[2]]}, w});
    return r;
  }

  /// n x n tensor Gauss rule on the square, exact to degree 2n-1.
  static OracleRule tensor_gauss(int n) {
    OracleRule r{Shape::parallelogram, 2 * n - 1, {}};
    const auto g = gauss_legendre(n);
    for (const auto& [x, wx] : g)
      for (const auto& [y, wy] : g) r.points.push_back({{x, y}, wx * wy});
    return r;
  }

  /// Collapsed (Duffy) n x n Gauss rule on the triangle, exact to degree 2n-2.
  static OracleRule collapsed_gauss(int n) {
    OracleRule r{Shape::triangle, 2 * n - 2, {}};
    const auto g = gauss_legendre(n);
    for (const auto& [s, ws] : g)
      for (const auto& [t, wt] : g) r.points.push_back({{s, t * (1.0 - s)}, 2.0 * ws * wt * (1.0 - s)});
    return r;
  }

  /// Rule of at least the requested degree; degree <= 6 gives the standard rule.
  static const OracleRule& of_degree(Shape s, int degree) {
    static std::map<std::pair<int, int>, OracleRule> cache;
    const std::pair<int, int> key{static_cast<int>(s), std::max(degree, 6)};
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    OracleRule r = degree <= 6                ? standard(s)
                   : s == Shape::triangle ? collapsed_gauss((degree + 3) / 2)
                                          : tensor_gauss((degree + 2) / 2);
    return cache.emplace(key, std::move(r)).first->second;
  }

  template <class F>
  double integrate(F&& f, double area) const {
    double s = 0.0;
    for (const auto& p : points) s += p.weight * f(p.point);
    return area * s;
  }
};

/// Exact integral of x^i y^j over a reference cell.
inline double reference_monomial_integral(Shape s, int i, int j) {
  if (s == Shape::parallelogram) return 1.0 / ((i + 1.0) * (j + 1.0));
  return std::tgamma(i + 1.0) * std::tgamma(j + 1.0) / std::tgamma(i + j + 3.0);
}

}  // namespace hdivwave
