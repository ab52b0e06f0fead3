#pragma once

#include "analysis.hpp"
#include "timeloop.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace hdivwave {

using TimeField = std::function<Vec2(const Vec2&, double)>;
using TimeScalar = std::function<double(const Vec2&, double)>;

/// Data and (where available) exact solution of a test problem.
struct Benchmark {
  std::string name;
  TimeField u;        // initial/boundary data and exact solution
  TimeField du;       // time derivative
  TimeScalar div_u;   // divergence
};

/// u(x, y, t) = g(x - t) (1, 0) with g(s) = 2 exp(-50 (s + 1)^2), an exact solution for d = 0.
inline Benchmark plane_wave() {
  auto g = [](double s) { return 2.0 * std::exp(-50.0 * (s + 1.0) * (s + 1.0)); };
  auto dg = [g](double s) { return -100.0 * (s + 1.0) * g(s); };
  return {"planewave", [g](const Vec2& x, double t) { return Vec2{g(x.x() - t), 0.0}; },
          [dg](const Vec2& x, double t) { return Vec2{-dg(x.x() - t), 0.0}; },
          [dg](const Vec2& x, double t) { return dg(x.x() - t); }};
}

inline Benchmark zero_benchmark() {
  return {"zero", [](const Vec2&, double) { return Vec2::Zero().eval(); },
          [](const Vec2&, double) { return Vec2::Zero().eval(); }, [](const Vec2&, double) { return 0.0; }};
}

inline Benchmark benchmark_by_name(const std::string& name) {
  if (name == "planewave") return plane_wave();
  if (name == "zero") return zero_benchmark();
  throw Error("unknown benchmark '" + name + "'");
}

struct StabilityBoundError : Error {
  using Error::Error;
};

struct RunOptions {
  double final_time = 2.0;
  double tau = 0.001;  // <= 0 selects the estimated stable step
  double damping = 0.0;
  bool check_stability = true;
  double safety = 0.9;
  int snapshot_every = 0;
};

struct RunResult {
  double tau = 0.0;
  Index steps = 0;
  StableStep stability;
  VectorX u_final;
  VectorX v_final;  // one-sided second-order difference at the final time
  EnergyTrace energy;
  ErrorReport errors;
};

using SnapshotHook = std::function<void(Index step, double t, const VectorX& u)>;

/// Locates points in a mesh through a uniform bucket grid.
class PointLocator {
 public:
  explicit PointLocator(const HybridMesh& mesh) : mesh_(&mesh) {
    lo_ = hi_ = mesh.vertex(0);
    for (const Vec2& p : mesh.vertices()) lo_ = lo_.cwiseMin(p), hi_ = hi_.cwiseMax(p);
    n_ = std::max<Index>(1, static_cast<Index>(std::sqrt(static_cast<double>(mesh.num_cells()))));
    buckets_.assign(n_ * n_, {});
    for (Index c = 0; c < mesh.num_cells(); ++c) {
      Vec2 a = mesh.vertex(mesh.cell(c).vertices[0]), b = a;
      for (int i = 0; i < mesh.cell(c).size(); ++i)
        a = a.cwiseMin(mesh.vertex(mesh.cell(c).vertices[i])), b = b.cwiseMax(mesh.vertex(mesh.cell(c).vertices[i]));
      const auto [i0, j0] = bucket(a);
      const auto [i1, j1] = bucket(b);
      for (Index j = j0; j <= j1; ++j)
        for (Index i = i0; i <= i1; ++i) buckets_[j * n_ + i].push_back(c);
    }
  }

  /// Cell containing x and the reference coordinates, or cell -1.
  std::pair<Index, Vec2> locate(const Vec2& x) const {
    const auto [i, j] = bucket(x);
    constexpr double eps = 1e-12;
    for (Index c : buckets_[j * n_ + i]) {
      const Vec2 r = AffineMap::of_cell(*mesh_, c).to_reference(x);
      const bool inside = mesh_->cell(c).shape == Shape::triangle
                              ? r.x() >= -eps && r.y() >= -eps && r.x() + r.y() <= 1.0 + eps
                              : r.x() >= -eps && r.y() >= -eps && r.x() <= 1.0 + eps && r.y() <= 1.0 + eps;
      if (inside) return {c, r};
    }
    return {-1, Vec2::Zero()};
  }

 private:
  std::pair<Index, Index> bucket(const Vec2& x) const {
    auto idx = [&](double v, double a, double b) {
      const double f = (v - a) / (b - a);
      return std::clamp<Index>(static_cast<Index>(std::floor(f * n_)), 0, n_ - 1);
    };
    return {idx(x.x(), lo_.x(), hi_.x()), idx(x.y(), lo_.y(), hi_.y())};
  }

  const HybridMesh* mesh_;
  Vec2 lo_, hi_;
  Index n_ = 1;
  std::vector<std::vector<Index>> buckets_;
};

/// Samples a discrete field on an n x n grid of cell-centred points over the mesh
/// bounding box. Writes CSV "x,y,u1,u2".
inline void write_snapshot(std::ostream& os, const HybridMesh& mesh, const DofMap& dofmap, const PointLocator& locator,
                           const VectorX& coefs, int n = 100) {
  Vec2 lo = mesh.vertex(0), hi = lo;
  for (const Vec2& p : mesh.vertices()) lo = lo.cwiseMin(p), hi = hi.cwiseMax(p);
  os << "x,y,u1,u2\n" << std::setprecision(12);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Vec2 x{lo.x() + (hi.x() - lo.x()) * (i + 0.5) / n, lo.y() + (hi.y() - lo.y()) * (j + 0.5) / n};
      const auto [c, ref] = locator.locate(x);
      Vec2 val = Vec2::Zero();
      if (c >= 0) val = LocalElement(mesh, c).combine(dofmap.gather(coefs, c), ref).value;
      os << x.x() << ',' << x.y() << ',' << val.x() << ',' << val.y() << '\n';
    }
  }
}

inline void write_energy_csv(std::ostream& os, const EnergyTrace& trace) {
  os << "step,t,kinetic,potential,total\n" << std::setprecision(17);
  for (const auto& e : trace)
    os << e.step << ',' << e.t << ',' << e.kinetic << ',' << e.potential << ',' << e.total() << '\n';
}

/// Solves a benchmark on one mesh up to the final time and evaluates the errors.
inline RunResult run_benchmark(const HybridMesh& mesh, const Benchmark& bench, const RunOptions& opt,
                               const SnapshotHook& snapshot = {}) {
  if (!(opt.final_time > 0.0)) throw Error("final time must be positive");
  const DofMap dofmap(mesh);
  const BlockDiagMass mass = assemble_lumped_mass(mesh, dofmap);
  const SparseStiffness stiffness = assemble_stiffness(mesh, dofmap);

  RunResult res;
  if (opt.check_stability || opt.tau <= 0.0)
    res.stability = stable_tau(dofmap, mass, stiffness, mesh.nominal_h(), opt.safety);
  double tau = opt.tau;
  Index steps = 0;
  if (tau <= 0.0) {
    steps = static_cast<Index>(std::ceil(opt.final_time / res.stability.tau_max - 1e-9));
  } else {
    if (opt.check_stability && tau > res.stability.tau_max)
      throw StabilityBoundError("tau = " + std::to_string(tau) + " exceeds the stable bound " +
                                std::to_string(res.stability.tau_max));
    steps = static_cast<Index>(std::llround(opt.final_time / tau));
  }
  steps = std::max<Index>(steps, 2);
  tau = opt.final_time / static_cast<double>(steps);
  res.tau = tau;
  res.steps = steps;

  auto boundary = [&](double t) { return constrain(mesh, dofmap, [&](const Vec2& x, double s) { return bench.u(x, s); }, t); };
  const auto integrator = LeapfrogIntegrator::with_constant_damping(dofmap, mass, stiffness, tau, opt.damping, boundary);

  const VectorX u0 = interpolate_global(mesh, dofmap, [&](const Vec2& x) { return bench.u(x, 0.0); });
  const VectorX v0 = interpolate_global(mesh, dofmap, [&](const Vec2& x) { return bench.du(x, 0.0); });
  if (snapshot && opt.snapshot_every > 0) snapshot(0, 0.0, u0);
  WaveState state = integrator.start(u0, v0);
  {
    const VectorX diff = (state.u_curr - state.u_prev) / tau;
    res.energy.push_back({0, 0.0, 0.5 * diff.dot(mass.apply(diff)),
                          0.5 * stiffness.apply(state.u_prev).dot(state.u_curr)});
  }
  if (snapshot && opt.snapshot_every > 0 && 1 % opt.snapshot_every == 0) snapshot(1, state.t, state.u_curr);

  VectorX u_before_prev = state.u_prev;
  while (state.step < steps) {
    u_before_prev = state.u_prev;
    EnergySample e;
    integrator.advance(state, &e);
    res.energy.push_back(e);
    if (snapshot && opt.snapshot_every > 0 && state.step % opt.snapshot_every == 0)
      snapshot(state.step, state.t, state.u_curr);
  }
  res.u_final = state.u_curr;
  res.v_final = (3.0 * state.u_curr - 4.0 * state.u_prev + u_before_prev) / (2.0 * tau);

  const double T = static_cast<double>(steps) * tau;
  auto du_T = [&](const Vec2& x) { return bench.du(x, T); };
  const auto parts = energy_error(mesh, dofmap, res.u_final, res.v_final, du_T,
                                  [&](const Vec2& x) { return bench.div_u(x, T); });
  const VectorX interp = interpolate_global(mesh, dofmap, [&](const Vec2& x) { return bench.u(x, T); });
  res.errors.h = mesh.nominal_h();
  res.errors.velocity_error = parts.velocity;
  res.errors.div_error = parts.divergence;
  res.errors.energy_error = parts.sum();
  res.errors.discrete_error = discrete_error(mesh, dofmap, res.u_final, res.v_final, du_T, interp);
  return res;
}

/// Runs every level of a family and returns the error table with rates.
inline std::vector<ErrorReport> run_convergence(const MeshFamily& family, const std::vector<int>& levels,
                                                const Benchmark& bench, const RunOptions& opt) {
  std::vector<ErrorReport> table;
  for (int level : levels) table.push_back(run_benchmark(generate(family, level), bench, opt).errors);
  fill_rates(table);
  return table;
}

}  // namespace hdivwave
