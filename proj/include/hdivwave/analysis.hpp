#pragma once

#include "assembly.hpp"

#include <cmath>
#include <optional>
#include <ostream>
#include <vector>

namespace hdivwave {

using ScalarField = std::function<double(const Vec2&)>;
using LocalCoefs = Eigen::Matrix<double, 10, 1>;

/// Largest relative error of an oracle rule over all monomials up to its degree.
inline double oracle_self_test(const OracleRule& rule, int degree = -1) {
  if (degree < 0) degree = rule.degree;
  double worst = 0.0;
  for (int i = 0; i <= degree; ++i) {
    for (int j = 0; i + j <= degree; ++j) {
      const double exact = reference_monomial_integral(rule.shape, i, j);
      const double approx = rule.integrate([&](const Vec2& p) { return std::pow(p.x(), i) * std::pow(p.y(), j); },
                                           reference_area(rule.shape));
      worst = std::max(worst, std::abs(approx - exact) / std::abs(exact));
    }
  }
  return worst;
}

/// Quadrature error sigma_K(u, v) = (u, v)_{h,K} - (u, v)_K, exact part by oracle.
inline double sigma(const VectorField& u, const VectorField& v, const LocalElement& elem, int oracle_degree = 6) {
  const double lumped = local_quad(u, v, elem, LumpedQuadRule::for_shape(elem.shape()));
  const double exact = OracleRule::of_degree(elem.shape(), oracle_degree)
                           .integrate(
                               [&](const Vec2& ref) {
                                 const Vec2 x = elem.to_physical(ref);
                                 return u(x).dot(v(x));
                               },
                               elem.area());
  return lumped - exact;
}

/// sigma_K(u, phi_i) for every local basis function.
inline VectorX sigma_local(const VectorField& u, const LocalElement& elem, int oracle_degree = 6) {
  VectorX out = VectorX::Zero(elem.dim());
  auto accumulate = [&](const Vec2& ref, double w) {
    const BasisEval b = elem.eval(ref);
    const Vec2 ux = u(elem.to_physical(ref));
    for (int i = 0; i < b.dim; ++i) out[i] += w * elem.area() * ux.dot(b[i].value);
  };
  const LumpedQuadRule lumped = LumpedQuadRule::for_shape(elem.shape());
  for (int q = 0; q < lumped.num_points(); ++q) accumulate(lumped.point(q).point, lumped.point(q).weight);
  for (const auto& p : OracleRule::of_degree(elem.shape(), oracle_degree).points) accumulate(p.point, -p.weight);
  return out;
}

/// sup over v in V(K) of |sigma_K(u, v)| / |div v|_{L2(K)}. The functional must vanish
/// on divergence-free v (true for u in P1^2); the sup is sqrt(l^T G^+ l) with G the
/// local div-div Gram matrix.
inline double sigma_dual_norm(const VectorField& u, const LocalElement& elem) {
  const VectorX l = sigma_local(u, elem);
  const MatrixX g = local_stiffness(elem);
  Eigen::SelfAdjointEigenSolver<MatrixX> eig(g);
  const double cutoff = 1e-10 * eig.eigenvalues().maxCoeff();
  double s = 0.0;
  for (Index k = 0; k < g.rows(); ++k) {
    const double proj = eig.eigenvectors().col(k).dot(l);
    if (eig.eigenvalues()(k) > cutoff) s += proj * proj / eig.eigenvalues()(k);
  }
  return std::sqrt(s);
}

/// Global sigma_h(u, v_h) for a discrete v_h given by global coefficients.
inline double sigma_global(const HybridMesh& mesh, const DofMap& dofmap, const VectorField& u, const VectorX& v) {
  double s = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const LocalElement elem(mesh, c);
    const LocalCoefs coef = dofmap.gather(v, c);
    s += sigma_local(u, elem).dot(coef.head(elem.dim()));
  }
  return s;
}

/// |u - u_h|_{L2}.
inline double l2_error(const HybridMesh& mesh, const DofMap& dofmap, const VectorX& coefs, const VectorField& u,
                       int degree = 12) {
  double s = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const LocalElement elem(mesh, c);
    const LocalCoefs coef = dofmap.gather(coefs, c);
    s += OracleRule::of_degree(elem.shape(), degree)
             .integrate([&](const Vec2& ref) { return (u(elem.to_physical(ref)) - elem.combine(coef, ref).value).squaredNorm(); },
                        elem.area());
  }
  return std::sqrt(s);
}

/// |div u - div u_h|_{L2}.
inline double div_error(const HybridMesh& mesh, const DofMap& dofmap, const VectorX& coefs, const ScalarField& div_u,
                        int degree = 12) {
  double s = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const LocalElement elem(mesh, c);
    const LocalCoefs coef = dofmap.gather(coefs, c);
    s += OracleRule::of_degree(elem.shape(), degree).integrate(
        [&](const Vec2& ref) {
          const double d = (div_u ? div_u(elem.to_physical(ref)) : 0.0) - elem.combine(coef, ref).div;
          return d * d;
        },
        elem.area());
  }
  return std::sqrt(s);
}

struct EnergyErrorParts {
  double velocity = 0.0;    // |du/dt - v_h|_{L2}
  double divergence = 0.0;  // |div(u - u_h)|_{L2}
  double sum() const { return velocity + divergence; }
};

/// Energy-norm error at one time against the exact velocity and divergence.
inline EnergyErrorParts energy_error(const HybridMesh& mesh, const DofMap& dofmap, const VectorX& u_h,
                                     const VectorX& v_h, const VectorField& du_exact, const ScalarField& div_exact,
                                     int degree = 12) {
  return {l2_error(mesh, dofmap, v_h, du_exact, degree), div_error(mesh, dofmap, u_h, div_exact, degree)};
}

/// (|pi^1_h du - v_h|_h^2 + |div(Pi_h u - u_h)|^2)^{1/2}; Pi_h u given as coefficients.
inline double discrete_error(const HybridMesh& mesh, const DofMap& dofmap, const VectorX& u_h, const VectorX& v_h,
                             const VectorField& du_exact, const VectorX& interpolant) {
  double lumped = 0.0, div = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const LocalElement elem(mesh, c);
    const P1Field proj = project_p1(du_exact, elem, 12);
    const LocalCoefs vc = dofmap.gather(v_h, c);
    const LumpedQuadRule rule = LumpedQuadRule::for_shape(elem.shape());
    lumped += rule.integrate(
        [&](const Vec2& ref) { return (proj(elem.to_physical(ref)) - elem.combine(vc, ref).value).squaredNorm(); },
        elem.area());
    const LocalCoefs dc = dofmap.gather(VectorX(interpolant - u_h), c);
    // div of both fields is P1, so the degree-6 rule is exact
    div += OracleRule::standard(elem.shape()).integrate(
        [&](const Vec2& ref) { return std::pow(elem.combine(dc, ref).div, 2); }, elem.area());
  }
  return std::sqrt(lumped + div);
}

/// max_i |(div(u - Pi_h u), div phi_i)| / |div phi_i| over global basis functions
/// with nonzero divergence.
inline double commuting_defect(const HybridMesh& mesh, const DofMap& dofmap, const VectorX& interpolant,
                               const ScalarField& div_u, int degree = kInterpolationDegree) {
  VectorX pairing = VectorX::Zero(dofmap.size()), norm2 = VectorX::Zero(dofmap.size());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const LocalElement elem(mesh, c);
    const LocalCoefs coef = dofmap.gather(interpolant, c);
    const auto& lm = dofmap.local(c);
    for (const auto& p : OracleRule::of_degree(elem.shape(), degree).points) {
      const BasisEval b = elem.eval(p.point);
      double div_h = 0.0;
      for (int i = 0; i < b.dim; ++i) div_h += coef[i] * b[i].div;
      const double defect = div_u(elem.to_physical(p.point)) - div_h;
      const double w = p.weight * elem.area();
      for (int i = 0; i < b.dim; ++i) {
        pairing[lm.dof[i]] += w * defect * lm.sign[i] * b[i].div;
        norm2[lm.dof[i]] += w * b[i].div * b[i].div;
      }
    }
  }
  double worst = 0.0;
  for (Index i = 0; i < dofmap.size(); ++i)
    if (norm2[i] > 1e-14) worst = std::max(worst, std::abs(pairing[i]) / std::sqrt(norm2[i]));
  return worst;
}

/// rate_i = log(e_{i-1}/e_i) / log(h_{i-1}/h_i); undefined entries for i = 0 or
/// non-positive errors.
inline std::vector<std::optional<double>> eoc(const std::vector<std::pair<double, double>>& errors) {
  std::vector<std::optional<double>> out(errors.size());
  for (std::size_t i = 1; i < errors.size(); ++i) {
    const auto [h0, e0] = errors[i - 1];
    const auto [h1, e1] = errors[i];
    if (e0 > 0.0 && e1 > 0.0 && h0 > h1) out[i] = std::log(e0 / e1) / std::log(h0 / h1);
  }
  return out;
}

/// Mean of the defined rates; nullopt if none is defined.
inline std::optional<double> mean_rate(const std::vector<std::optional<double>>& rates) {
  double s = 0.0;
  int n = 0;
  for (const auto& r : rates)
    if (r) s += *r, ++n;
  if (n == 0) return std::nullopt;
  return s / n;
}

struct ErrorReport {
  double h = 0.0;
  double energy_error = 0.0;
  double velocity_error = 0.0;
  double div_error = 0.0;
  double discrete_error = 0.0;
  std::optional<double> eoc_energy;
  std::optional<double> eoc_discrete;
};

inline void fill_rates(std::vector<ErrorReport>& table) {
  std::vector<std::pair<double, double>> en, di;
  for (const auto& r : table) {
    en.emplace_back(r.h, r.energy_error);
    di.emplace_back(r.h, r.discrete_error);
  }
  const auto re = eoc(en), rd = eoc(di);
  for (std::size_t i = 0; i < table.size(); ++i) {
    table[i].eoc_energy = re[i];
    table[i].eoc_discrete = rd[i];
  }
}

/// CSV with columns h, energy_error, discrete_error, eoc_energy, eoc_discrete.
inline void write_convergence_csv(std::ostream& os, const std::vector<ErrorReport>& table) {
  os << "h,energy_error,discrete_error,eoc_energy,eoc_discrete\n" << std::setprecision(10);
  auto opt = [&](const std::optional<double>& r) {
    if (r) os << *r;
  };
  for (const auto& r : table) {
    os << r.h << ',' << r.energy_error << ',' << r.discrete_error << ',';
    opt(r.eoc_energy);
    os << ',';
    opt(r.eoc_discrete);
    os << '\n';
  }
}

}  // namespace hdivwave
