#pragma once

#include "core.hpp"
#include "mesh.hpp"
#include "quadrature.hpp"

#include <array>
#include <functional>
#include <vector>

namespace hdivwave {

/// Value and divergence of one vector-valued basis function at a point.
struct BasisValue {
  Vec2 value = Vec2::Zero();
  double div = 0.0;

  BasisValue& operator+=(const BasisValue& o) {
    value += o.value;
    div += o.div;
    return *this;
  }
  friend BasisValue operator+(BasisValue a, const BasisValue& b) { return a += b; }
  friend BasisValue operator-(BasisValue a, const BasisValue& b) { return a += -1.0 * b; }
  friend BasisValue operator*(double s, const BasisValue& a) { return {s * a.value, s * a.div}; }
};

/// All basis functions of one cell evaluated at one point.
struct BasisEval {
  int dim = 0;
  std::array<BasisValue, 10> phi{};

  const BasisValue& operator[](int i) const { return phi[i]; }
  BasisValue& operator[](int i) { return phi[i]; }
};

/// Which quadrature point a basis function is attached to.
///
/// Slot 2k+j (j = 0,1) belongs to local edge k and its j-th endpoint along the
/// counterclockwise traversal, i.e. vertex (k+j) mod n. The last two slots are the
/// interior (midpoint) functions.
struct BasisTag {
  bool interior = false;
  int vertex = -1;  // local vertex index, -1 for interior functions
  int edge = -1;    // local edge index, -1 for interior functions
  int slot = 0;     // 1 or 2
};

inline BasisTag basis_tag(Shape s, int i) {
  const int n = num_vertices(s);
  if (i >= 2 * n) return {true, -1, -1, i - 2 * n + 1};
  const int k = i / 2, j = i % 2;
  // slot 1 at vertex v is the start of edge v, slot 2 the end of edge v-1
  return {false, (k + j) % n, k, j == 0 ? 1 : 2};
}

/// Local basis indices attached to lumped quadrature point q (vertices first, then midpoint).
inline std::array<int, 2> quad_point_slots(Shape s, int q) {
  const int n = num_vertices(s);
  if (q == n) return {2 * n, 2 * n + 1};
  return {2 * q, 2 * ((q + n - 1) % n) + 1};
}

namespace detail {

// Scalar with gradient; enough to evaluate products of barycentric-type factors.
struct Scalar {
  double v = 0.0;
  Vec2 g = Vec2::Zero();
};
inline Scalar operator*(const Scalar& a, const Scalar& b) { return {a.v * b.v, a.v * b.g + b.v * a.g}; }
inline Scalar operator+(const Scalar& a, const Scalar& b) { return {a.v + b.v, a.g + b.g}; }

// s * c for a constant vector c; div(s c) = grad(s).c
inline BasisValue times(const Scalar& s, const Vec2& c) { return {s.v * c, s.g.dot(c)}; }

inline BasisEval eval_triangle(const Vec2& p) {
  const Scalar l[3] = {{1.0 - p.x() - p.y(), {-1.0, -1.0}}, {p.x(), {1.0, 0.0}}, {p.y(), {0.0, 1.0}}};
  const Vec2 c[3] = {perp(l[0].g), perp(l[1].g), perp(l[2].g)};
  const BasisValue b1 = times(l[1] * l[0], c[2]) - times(l[1] * l[2], c[0]);
  const BasisValue b2 = times(l[2] * l[0], c[1]) - times(l[2] * l[1], c[0]);
  BasisEval out;
  out.dim = 8;
  out[0] = times(l[0], c[1]) + b1 - 2.0 * b2;  // edge 12 at p1
  out[1] = times(l[1], c[0]) + b1 + b2;        // edge 12 at p2
  out[2] = times(l[1], c[2]) - 2.0 * b1 + b2;  // edge 23 at p2
  out[3] = times(l[2], c[1]) + b1 - 2.0 * b2;  // edge 23 at p3
  out[4] = times(l[2], c[0]) + b1 + b2;        // edge 31 at p3
  out[5] = times(l[0], c[2]) - 2.0 * b1 + b2;  // edge 31 at p1
  out[6] = b1;
  out[7] = b2;
  return out;
}

inline BasisEval eval_square(const Vec2& p) {
  const Scalar x{p.x(), {1.0, 0.0}}, y{p.y(), {0.0, 1.0}};
  const Scalar mx{1.0 - p.x(), {-1.0, 0.0}}, my{1.0 - p.y(), {0.0, -1.0}};
  const Scalar l[4] = {mx * my, x * my, x * y, mx * y};
  // rotated gradients of the edge coordinates xi_12 = x, xi_23 = y, xi_34 = 1-x, xi_41 = 1-y
  const Vec2 c12{0.0, -1.0}, c23{1.0, 0.0}, c34{0.0, 1.0}, c41{-1.0, 0.0};
  const BasisValue b1 = times((l[0] + l[3]) * (l[1] + l[2]), c23);
  const BasisValue b2 = times((l[0] + l[1]) * (l[2] + l[3]), c12);
  // The bubble signs are fixed so every vertex function vanishes at the midpoint.
  BasisEval out;
  out.dim = 10;
  out[0] = times(l[0], c12) - b2;
  out[1] = times(l[1], c12) - b2;
  out[2] = times(l[1], c23) - b1;
  out[3] = times(l[2], c23) - b1;
  out[4] = times(l[2], c34) + b2;
  out[5] = times(l[3], c34) + b2;
  out[6] = times(l[3], c41) + b1;
  out[7] = times(l[0], c41) + b1;
  out[8] = b1;
  out[9] = b2;
  return out;
}

}  // namespace detail

/// Lumped-form RT1 (triangle) / BDFM2 (parallelogram) basis on the reference cell.
inline BasisEval eval_basis(Shape s, const Vec2& ref_point) {
  return s == Shape::triangle ? detail::eval_triangle(ref_point) : detail::eval_square(ref_point);
}

/// Unit outward normal and length of local edge k on the reference cell.
inline std::pair<Vec2, double> reference_edge(Shape s, int k) {
  const int n = num_vertices(s);
  const Vec2 t = reference_vertex(s, (k + 1) % n) - reference_vertex(s, k);
  return {perp(t).normalized(), t.norm()};
}

/// Affine map x = offset + J xhat from the reference cell onto a mesh cell.
struct AffineMap {
  Mat2 jacobian = Mat2::Identity();
  Vec2 offset = Vec2::Zero();
  double det = 1.0;
  Mat2 inverse_transpose = Mat2::Identity();

  AffineMap() = default;
  AffineMap(const Mat2& j, const Vec2& b) : jacobian(j), offset(b), det(j.determinant()) {
    if (!(det > 0.0)) throw MeshError("inverted or degenerate cell (det J <= 0)");
    inverse_transpose = j.inverse().transpose();
  }

  static AffineMap of_cell(const HybridMesh& mesh, Index c) {
    const Cell& k = mesh.cell(c);
    const Vec2& v0 = mesh.vertex(k.vertices[0]);
    Mat2 j;
    j.col(0) = mesh.vertex(k.vertices[1]) - v0;
    j.col(1) = mesh.vertex(k.vertices[k.size() - 1]) - v0;
    return {j, v0};
  }

  Vec2 operator()(const Vec2& ref) const { return offset + jacobian * ref; }
  Vec2 to_reference(const Vec2& x) const { return inverse_transpose.transpose() * (x - offset); }
};

/// Contravariant Piola transform of a reference value and divergence.
inline BasisValue piola_push(const AffineMap& map, const Vec2& ref_value, double ref_div) {
  if (!(map.det > 0.0)) throw MeshError("inverted cell in Piola transform");
  return {map.jacobian * ref_value / map.det, ref_div / map.det};
}

/// Physical local basis on one cell.
///
/// Vertex functions are the Piola images of the reference functions, scaled so
/// their outward normal component at the attached vertex is 1. Interior functions
/// are combinations of the two bubbles with values e_x and e_y at the midpoint.
/// Local DOFs are therefore outward normal values at vertices plus the Cartesian
/// field value at the midpoint.
class LocalElement {
 public:
  LocalElement(Shape shape, const AffineMap& map) : shape_(shape), map_(map) { setup(); }

  LocalElement(const HybridMesh& mesh, Index c) : LocalElement(mesh.cell(c).shape, AffineMap::of_cell(mesh, c)) {}

  Shape shape() const { return shape_; }
  int dim() const { return local_dim(shape_); }
  const AffineMap& map() const { return map_; }
  double area() const { return map_.det * reference_area(shape_); }
  Vec2 to_physical(const Vec2& ref) const { return map_(ref); }
  double edge_length(int k) const { return edge_length_[k]; }
  const Vec2& edge_normal(int k) const { return edge_normal_[k]; }

  BasisEval eval(const Vec2& ref) const {
    const BasisEval r = eval_basis(shape_, ref);
    BasisEval out;
    out.dim = r.dim;
    const int nv = 2 * num_vertices(shape_);
    for (int i = 0; i < nv; ++i) out[i] = scale_[i] * piola_push(map_, r[i].value, r[i].div);
    for (int k = 0; k < 2; ++k) {
      BasisValue chi;
      for (int j = 0; j < 2; ++j) chi += interior_(j, k) * piola_push(map_, r[nv + j].value, r[nv + j].div);
      out[nv + k] = chi;
    }
    return out;
  }

  /// Field value and divergence of the local combination sum_i coef[i] phi_i.
  template <class Coefs>
  BasisValue combine(const Coefs& coef, const Vec2& ref) const {
    const BasisEval b = eval(ref);
    BasisValue out;
    for (int i = 0; i < b.dim; ++i) out += coef[i] * b[i];
    return out;
  }

 private:
  void setup() {
    const int n = num_vertices(shape_);
    for (int k = 0; k < n; ++k) {
      const Vec2 t = map_.jacobian * (reference_vertex(shape_, (k + 1) % n) - reference_vertex(shape_, k));
      edge_length_[k] = t.norm();
      edge_normal_[k] = perp(t) / t.norm();
    }
    for (int i = 0; i < 2 * n; ++i) {
      const BasisTag tag = basis_tag(shape_, i);
      const auto [ref_normal, ref_length] = reference_edge(shape_, tag.edge);
      const double flux = eval_basis(shape_, reference_vertex(shape_, tag.vertex))[i].value.dot(ref_normal) * ref_length;
      scale_[i] = edge_length_[tag.edge] / flux;
    }
    const BasisEval mid = eval_basis(shape_, reference_midpoint(shape_));
    Mat2 values;
    for (int j = 0; j < 2; ++j) values.col(j) = piola_push(map_, mid[2 * n + j].value, 0.0).value;
    interior_ = values.inverse();
  }

  Shape shape_;
  AffineMap map_;
  std::array<double, 8> scale_{};
  std::array<double, 4> edge_length_{};
  std::array<Vec2, 4> edge_normal_{};
  Mat2 interior_ = Mat2::Identity();
};

using VectorField = std::function<Vec2(const Vec2&)>;

/// 2x2 lumped mass blocks of one cell, one per quadrature point.
inline std::vector<Mat2> local_mass_lumped(const LocalElement& elem, const LumpedQuadRule& rule) {
  std::vector<Mat2> blocks;
  for (int q = 0; q < rule.num_points(); ++q) {
    const QuadPoint p = rule.point(q);
    const BasisEval b = elem.eval(p.point);
    const auto [a, c] = quad_point_slots(elem.shape(), q);
    Mat2 m;
    m << b[a].value.dot(b[a].value), b[a].value.dot(b[c].value), b[c].value.dot(b[a].value),
        b[c].value.dot(b[c].value);
    m *= p.weight * elem.area();
    if (!(m.determinant() > 0.0 && m(0, 0) > 0.0))
      throw NumericalError("local lumped mass block is not positive definite");
    blocks.push_back(m);
  }
  return blocks;
}

/// Full dim x dim local matrix of the lumped product, by direct quadrature of all pairs.
inline MatrixX local_mass_lumped_dense(const LocalElement& elem, const LumpedQuadRule& rule) {
  MatrixX m = MatrixX::Zero(elem.dim(), elem.dim());
  for (int q = 0; q < rule.num_points(); ++q) {
    const QuadPoint p = rule.point(q);
    const BasisEval b = elem.eval(p.point);
    for (int i = 0; i < b.dim; ++i)
      for (int j = 0; j < b.dim; ++j) m(i, j) += p.weight * elem.area() * b[i].value.dot(b[j].value);
  }
  return m;
}

/// Inexact local scalar product (u, v)_{h,K}.
inline double local_quad(const VectorField& u, const VectorField& v, const LocalElement& elem,
                         const LumpedQuadRule& rule) {
  return rule.integrate(
      [&](const Vec2& ref) {
        const Vec2 x = elem.to_physical(ref);
        return u(x).dot(v(x));
      },
      elem.area());
}

/// Degree used for the integrals inside interpolation and the commuting checks.
inline constexpr int kInterpolationDegree = 18;
inline constexpr int kEdgeGaussPoints = 10;

namespace detail {

// Applies the canonical DOF functionals to a field given on reference coordinates:
// per edge the moments of the outward normal trace against the two endpoint hats,
// then the two components of the cell integral.
template <class F>
VectorX apply_functionals(const LocalElement& elem, F&& field, int columns) {
  const Shape s = elem.shape();
  const int n = num_vertices(s);
  MatrixX out = MatrixX::Zero(2 * n + 2, columns);
  static const auto gauss = gauss_legendre(kEdgeGaussPoints);
  for (int k = 0; k < n; ++k) {
    const Vec2 a = reference_vertex(s, k), b = reference_vertex(s, (k + 1) % n);
    for (const auto& [t, w] : gauss) {
      const MatrixX f = field(a + t * (b - a));  // 2 x columns
      const Eigen::RowVectorXd un = elem.edge_normal(k).transpose() * f;
      out.row(2 * k) += w * elem.edge_length(k) * (1.0 - t) * un;
      out.row(2 * k + 1) += w * elem.edge_length(k) * t * un;
    }
  }
  static const OracleRule tri = OracleRule::of_degree(Shape::triangle, kInterpolationDegree);
  static const OracleRule sq = OracleRule::of_degree(Shape::parallelogram, kInterpolationDegree);
  for (const auto& p : (s == Shape::triangle ? tri : sq).points) {
    const MatrixX f = field(p.point);
    out.row(2 * n) += p.weight * elem.area() * f.row(0);
    out.row(2 * n + 1) += p.weight * elem.area() * f.row(1);
  }
  return columns == 1 ? VectorX(out.col(0)) : VectorX(Eigen::Map<VectorX>(out.data(), out.size()));
}

}  // namespace detail

/// Matrix of the DOF functionals applied to the local basis (row = functional).
inline MatrixX interpolation_matrix(const LocalElement& elem) {
  const int d = elem.dim();
  const VectorX flat = detail::apply_functionals(
      elem,
      [&](const Vec2& ref) {
        const BasisEval b = elem.eval(ref);
        MatrixX f(2, d);
        for (int i = 0; i < d; ++i) f.col(i) = b[i].value;
        return f;
      },
      d);
  return Eigen::Map<const MatrixX>(flat.data(), d, d);
}

/// Local canonical interpolant: coefficients of Pi_K u in the local basis.
inline VectorX interpolate(const VectorField& u, const LocalElement& elem) {
  const MatrixX a = interpolation_matrix(elem);
  const VectorX rhs = detail::apply_functionals(
      elem, [&](const Vec2& ref) -> MatrixX { return u(elem.to_physical(ref)); }, 1);
  Eigen::FullPivLU<MatrixX> lu(a);
  if (lu.rank() < a.rows()) throw NumericalError("local DOF system is singular (unisolvence violated)");
  return lu.solve(rhs);
}

/// Componentwise linear polynomial on a cell: u(x) = C^T [1, (x-c)/h, (y-c)/h].
struct P1Field {
  Vec2 center = Vec2::Zero();
  double scale = 1.0;
  Eigen::Matrix<double, 3, 2> coef = Eigen::Matrix<double, 3, 2>::Zero();

  static Eigen::Vector3d monomials(const Vec2& x, const Vec2& c, double h) {
    return {1.0, (x.x() - c.x()) / h, (x.y() - c.y()) / h};
  }
  Vec2 operator()(const Vec2& x) const { return coef.transpose() * monomials(x, center, scale); }
  /// Cell-mean part (the P0 projection).
  Vec2 mean_value() const { return coef.row(0).transpose(); }
};

/// L2-orthogonal projection onto P1(K)^2, integrated with an oracle rule.
inline P1Field project_p1(const VectorField& u, const LocalElement& elem, int degree = 6) {
  const OracleRule rule = OracleRule::of_degree(elem.shape(), std::max(degree, 6));
  P1Field out;
  out.center = elem.to_physical(reference_midpoint(elem.shape()));
  out.scale = std::sqrt(elem.area());
  Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
  Eigen::Matrix<double, 3, 2> rhs = Eigen::Matrix<double, 3, 2>::Zero();
  for (const auto& p : rule.points) {
    const Vec2 x = elem.to_physical(p.point);
    const Eigen::Vector3d m = P1Field::monomials(x, out.center, out.scale);
    gram += p.weight * m * m.transpose();
    rhs += p.weight * m * u(x).transpose();
  }
  // Centered monomials: the constant is orthogonal to the linears, so coef.row(0) is the mean.
  out.coef = gram.ldlt().solve(rhs);
  return out;
}

struct SplittingReport {
  int rank = 0;
  double min_singular_value = 0.0;
  double max_interpolation_residual = 0.0;  // P1^2 fields and bubbles reproduced by RT1
  int div_rank = 0;
  double div_gram_min_eigenvalue = 0.0;
  bool ok() const { return rank == 8 && div_rank == 2 && max_interpolation_residual < 1e-12; }
};

/// Checks RT1(K) = P1(K)^2 + span{B1, B2} on the reference triangle: the six
/// monomial fields and the two bubbles give a rank-8 coefficient system, and the
/// divergences of the bubbles are independent.
inline SplittingReport verify_splitting() {
  const LocalElement ref(Shape::triangle, AffineMap(Mat2::Identity(), Vec2::Zero()));
  std::vector<VectorField> fields = {
      [](const Vec2&) { return Vec2{1.0, 0.0}; },        [](const Vec2& x) { return Vec2{x.x(), 0.0}; },
      [](const Vec2& x) { return Vec2{x.y(), 0.0}; },    [](const Vec2&) { return Vec2{0.0, 1.0}; },
      [](const Vec2& x) { return Vec2{0.0, x.x()}; },    [](const Vec2& x) { return Vec2{0.0, x.y()}; },
      [](const Vec2& x) { return eval_basis(Shape::triangle, x)[6].value; },
      [](const Vec2& x) { return eval_basis(Shape::triangle, x)[7].value; },
  };
  SplittingReport rep;
  MatrixX coefs(8, 8);
  const OracleRule rule = OracleRule::of_degree(Shape::triangle, 8);
  for (int f = 0; f < 8; ++f) {
    coefs.col(f) = interpolate(fields[f], ref);
    for (const auto& p : rule.points)
      rep.max_interpolation_residual =
          std::max(rep.max_interpolation_residual, (ref.combine(coefs.col(f), p.point).value - fields[f](p.point)).norm());
  }
  Eigen::JacobiSVD<MatrixX> svd(coefs);
  const VectorX sv = svd.singularValues();
  rep.min_singular_value = sv(sv.size() - 1);
  rep.rank = static_cast<int>((sv.array() > 1e-10 * sv(0)).count());

  // div B1, div B2 as P1 functions sampled at the vertices
  Eigen::Matrix<double, 3, 2> divs;
  for (int v = 0; v < 3; ++v)
    for (int j = 0; j < 2; ++j) divs(v, j) = eval_basis(Shape::triangle, reference_vertex(Shape::triangle, v))[6 + j].div;
  Eigen::JacobiSVD<MatrixX> dsvd(divs);
  rep.div_rank = static_cast<int>((dsvd.singularValues().array() > 1e-10 * dsvd.singularValues()(0)).count());
  Mat2 gram = Mat2::Zero();
  for (const auto& p : OracleRule::standard(Shape::triangle).points) {
    const BasisEval b = eval_basis(Shape::triangle, p.point);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) gram(i, j) += 0.5 * p.weight * b[6 + i].div * b[6 + j].div;
  }
  rep.div_gram_min_eigenvalue = Eigen::SelfAdjointEigenSolver<Mat2>(gram).eigenvalues()(0);
  return rep;
}

}  // namespace hdivwave
