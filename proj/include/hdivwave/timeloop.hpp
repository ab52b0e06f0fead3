#pragma once

#include "assembly.hpp"

#include <cmath>
#include <iostream>
#include <optional>
#include <random>
#include <vector>

namespace hdivwave {

/// Constrained values as a full-length vector (free entries ignored) at time t.
using BoundaryValues = std::function<VectorX(double)>;

/// Two consecutive time levels. Vectors are full-length; their constrained
/// entries hold the boundary values g(t - tau) and g(t).
struct WaveState {
  VectorX u_prev;
  VectorX u_curr;
  double t = 0.0;
  Index step = 0;
};

/// One entry per step n -> n+1:
///   kinetic = 1/2 |(u^{n+1} - u^n)/tau|_M^2,  potential = 1/2 (K u^n, u^{n+1}).
struct EnergySample {
  Index step = 0;
  double t = 0.0;
  double kinetic = 0.0;
  double potential = 0.0;
  double total() const { return kinetic + potential; }
};

using EnergyTrace = std::vector<EnergySample>;

/// Explicit leapfrog for M u'' + D u' + K u = 0 with a block-diagonal lumped M:
///
///   (M + tau/2 D) u^{n+1} = M (2u^n - u^{n-1}) + tau/2 D u^{n-1} - tau^2 K u^n
///
/// on the free rows, with boundary DOFs eliminated. D is the lumped damping
/// product (d M for constant d). tau may be negative to integrate backwards.
class LeapfrogIntegrator {
 public:
  LeapfrogIntegrator(const DofMap& dofmap, const BlockDiagMass& mass, const SparseStiffness& stiffness, double tau,
                     std::optional<BlockDiagMass> damping = std::nullopt, BoundaryValues boundary = {})
      : dofmap_(&dofmap),
        mass_(&mass),
        stiffness_(&stiffness),
        tau_(tau),
        damping_(std::move(damping)),
        boundary_(std::move(boundary)) {
    if (tau == 0.0 || !std::isfinite(tau)) throw Error("time step must be nonzero and finite");
    if (damping_) lhs_ = mass.combined(1.0, *damping_, 0.5 * tau);
  }

  /// Constant damping coefficient d: D = d M.
  static LeapfrogIntegrator with_constant_damping(const DofMap& dofmap, const BlockDiagMass& mass,
                                                  const SparseStiffness& stiffness, double tau, double d,
                                                  BoundaryValues boundary = {}) {
    std::optional<BlockDiagMass> damping;
    if (d != 0.0) damping = mass.combined(d, mass, 0.0);
    return LeapfrogIntegrator(dofmap, mass, stiffness, tau, std::move(damping), std::move(boundary));
  }

  double tau() const { return tau_; }
  const BlockDiagMass& mass() const { return *mass_; }
  const SparseStiffness& stiffness() const { return *stiffness_; }
  const DofMap& dofmap() const { return *dofmap_; }

  VectorX boundary_at(double t) const {
    return boundary_ ? boundary_(t) : VectorX(VectorX::Zero(dofmap_->size()));
  }

  /// Second-order Taylor start from u(0) and u'(0) coefficient vectors:
  ///   u^1 = u^0 + tau v + tau^2/2 M^{-1}(-K u^0 - D v - M_FB g''(0)).
  WaveState start(const VectorX& u0, const VectorX& v0, double t0 = 0.0) const {
    const double tau = tau_;
    const VectorX g_minus = boundary_at(t0 - tau), g0 = boundary_at(t0), g_plus = boundary_at(t0 + tau);
    VectorX u = u0, v = v0;
    dofmap_->set_constrained(u, g0);
    dofmap_->set_constrained(v, VectorX((g_plus - g_minus) / (2.0 * tau)));
    VectorX accel_b = VectorX::Zero(dofmap_->size());
    dofmap_->set_constrained(accel_b, VectorX((g_plus - 2.0 * g0 + g_minus) / (tau * tau)));
    VectorX r = -stiffness_->apply(u) - mass_->apply(accel_b);
    if (damping_) r -= damping_->apply(v);
    const VectorX a = mass_->solve_free(r);
    WaveState s;
    s.u_prev = u;
    s.u_curr = u + tau * v + 0.5 * tau * tau * a;
    dofmap_->set_constrained(s.u_curr, g_plus);
    s.t = t0 + tau;
    s.step = 1;
    check_finite(s);
    return s;
  }

  WaveState step(const WaveState& s) const {
    WaveState out = s;
    advance(out);
    return out;
  }

  /// Advances in place: (u^{n-1}, u^n) -> (u^n, u^{n+1}).
  void advance(WaveState& s, EnergySample* energy = nullptr) const {
    const double tau = tau_;
    VectorX z = VectorX::Zero(dofmap_->size());
    const VectorX g_next = boundary_at(s.t + tau);
    dofmap_->set_constrained(z, g_next);
    VectorX rhs = mass_->apply(2.0 * s.u_curr - s.u_prev - z);
    const VectorX ku = stiffness_->apply(s.u_curr);
    rhs -= tau * tau * ku;
    if (damping_) rhs += 0.5 * tau * damping_->apply(s.u_prev - z);
    VectorX next = damping_ ? lhs_.solve_free(rhs) : mass_->solve_free(rhs);
    dofmap_->set_constrained(next, g_next);
    if (energy) {
      const VectorX diff = (next - s.u_curr) / tau;
      energy->step = s.step;
      energy->t = s.t;
      energy->kinetic = 0.5 * diff.dot(mass_->apply(diff));
      energy->potential = 0.5 * ku.dot(next);
    }
    s.u_prev = std::move(s.u_curr);
    s.u_curr = std::move(next);
    s.t += tau;
    s.step += 1;
    check_finite(s);
  }

  /// Discrete energy of the half step between u_prev and u_curr.
  double energy(const WaveState& s) const {
    const VectorX diff = (s.u_curr - s.u_prev) / tau_;
    return 0.5 * diff.dot(mass_->apply(diff)) + 0.5 * stiffness_->apply(s.u_prev).dot(s.u_curr);
  }

  /// Same operators with -tau, and the state with its two levels swapped.
  LeapfrogIntegrator reversed() const {
    return LeapfrogIntegrator(*dofmap_, *mass_, *stiffness_, -tau_, damping_, boundary_);
  }
  static WaveState swap_levels(const WaveState& s) { return {s.u_curr, s.u_prev, s.t, s.step}; }

 private:
  void check_finite(const WaveState& s) const {
    if (!s.u_curr.allFinite()) throw InstabilityError(s.step, tau_);
  }

  const DofMap* dofmap_;
  const BlockDiagMass* mass_;
  const SparseStiffness* stiffness_;
  double tau_;
  std::optional<BlockDiagMass> damping_;
  BlockDiagMass lhs_;
  BoundaryValues boundary_;
};

struct StableStep {
  double tau_max = 0.0;
  double lambda_max = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Largest eigenvalue of M_FF^{-1} K_FF by power iteration and the leapfrog bound
/// safety * 2 / sqrt(lambda_max). Falls back to h/10 if the iteration stagnates.
inline StableStep stable_tau(const DofMap& dofmap, const BlockDiagMass& mass, const SparseStiffness& stiffness,
                             double h, double safety = 0.9, double tol = 1e-4, int max_iter = 500) {
  StableStep out;
  if (dofmap.num_free() == 0) {
    out.tau_max = std::numeric_limits<double>::infinity();
    out.converged = true;
    return out;
  }
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  VectorX x = VectorX::Zero(dofmap.size());
  for (Index i : dofmap.free_dofs()) x[i] = dist(rng);
  double lambda = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    const VectorX mx = mass.apply(x);
    x /= std::sqrt(x.dot(mx));
    VectorX kx = stiffness.apply(x);
    dofmap.zero_constrained(kx);
    const double next = x.dot(kx);  // Rayleigh quotient, x is M-normalized
    x = mass.solve_free(kx);
    out.iterations = it;
    if (it > 1 && std::abs(next - lambda) <= tol * std::abs(next)) {
      lambda = next;
      out.converged = true;
      break;
    }
    lambda = next;
  }
  out.lambda_max = lambda;
  if (out.converged && lambda > 0.0) {
    out.tau_max = safety * 2.0 / std::sqrt(lambda);
  } else {
    std::cerr << "warning: power iteration did not converge; using tau = h/10\n";
    out.tau_max = h / 10.0;
  }
  return out;
}

}  // namespace hdivwave
