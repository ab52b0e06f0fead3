#include <hdivwave/simulation.hpp>
#include <hdivwave/timeloop.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace hdivwave;

namespace {

struct Problem {
  HybridMesh mesh;
  DofMap dofmap;
  BlockDiagMass mass;
  SparseStiffness stiffness;
  StableStep stable;

  explicit Problem(MeshKind kind, int level = 1, int base = 4) {
    MeshFamily f;
    f.kind = kind;
    f.base_divisions = base;
    mesh = generate(f, level);
    dofmap = DofMap(mesh);
    mass = assemble_lumped_mass(mesh, dofmap);
    stiffness = assemble_stiffness(mesh, dofmap);
    stable = stable_tau(dofmap, mass, stiffness, mesh.nominal_h());
  }

  // Random free coefficients, zero on the boundary.
  VectorX random_free(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    VectorX v = VectorX::Zero(dofmap.size());
    for (Index i : dofmap.free_dofs()) v[i] = dist(rng);
    return v;
  }

  VectorX smooth_free() const {
    VectorX v = interpolate_global(mesh, dofmap, [](const Vec2& x) {
      return Vec2{std::sin(M_PI * x.x()) * std::cos(2 * x.y()), std::sin(M_PI * x.y()) * (1 + x.x())};
    });
    dofmap.zero_constrained(v);
    return v;
  }
};

}  // namespace

TEST(Leapfrog, ZeroStateStaysZero) {
  const Problem p(MeshKind::hybrid);
  const LeapfrogIntegrator lf(p.dofmap, p.mass, p.stiffness, 0.5 * p.stable.tau_max);
  const VectorX zero = VectorX::Zero(p.dofmap.size());
  WaveState s = lf.start(zero, zero);
  EXPECT_EQ(s.u_curr.cwiseAbs().maxCoeff(), 0.0);
  for (int n = 0; n < 10; ++n) s = lf.step(s);
  EXPECT_EQ(s.u_curr.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(s.step, 11);
}

TEST(Leapfrog, TaylorStartMatchesFormula) {
  const Problem p(MeshKind::structured_triangle);
  const double tau = 0.3 * p.stable.tau_max, d = 0.7;
  const auto lf = LeapfrogIntegrator::with_constant_damping(p.dofmap, p.mass, p.stiffness, tau, d);
  const VectorX u0 = p.smooth_free(), v0 = p.random_free(2);
  const WaveState s = lf.start(u0, v0);
  VectorX r = -p.stiffness.apply(u0) - d * p.mass.apply(v0);
  const VectorX expected = u0 + tau * v0 + 0.5 * tau * tau * p.mass.solve_free(r);
  EXPECT_LE((s.u_curr - expected).norm(), 1e-13 * expected.norm());
  EXPECT_EQ(s.u_prev, u0);
}

TEST(Leapfrog, ConservesEnergyWithoutDamping) {
  for (MeshKind kind : {MeshKind::structured_triangle, MeshKind::hybrid, MeshKind::perturbed}) {
    const Problem p(kind);
    const LeapfrogIntegrator lf(p.dofmap, p.mass, p.stiffness, 0.7 * p.stable.tau_max);
    WaveState s = lf.start(p.smooth_free(), p.random_free(1));
    const double e0 = lf.energy(s);
    double drift = 0.0;
    for (int n = 0; n < 1000; ++n) {
      EnergySample e;
      lf.advance(s, &e);
      EXPECT_NEAR(e.total(), lf.energy(s), 1e-12 * e0);
      drift = std::max(drift, std::abs(e.total() - e0) / e0);
    }
    EXPECT_LE(drift, 1e-8) << to_string(kind);
  }
}

TEST(Leapfrog, DampingDecreasesEnergy) {
  const Problem p(MeshKind::hybrid);
  const auto lf = LeapfrogIntegrator::with_constant_damping(p.dofmap, p.mass, p.stiffness, 0.5 * p.stable.tau_max, 1.0);
  WaveState s = lf.start(p.smooth_free(), p.random_free(4));
  double prev = lf.energy(s);
  const double e0 = prev;
  for (int n = 0; n < 1000; ++n) {
    lf.advance(s);
    const double e = lf.energy(s);
    EXPECT_LE(e, prev * (1 + 1e-14)) << "step " << n;
    prev = e;
  }
  EXPECT_LT(prev, 0.5 * e0);
}

TEST(Leapfrog, TimeReversal) {
  const Problem p(MeshKind::perturbed);
  const LeapfrogIntegrator lf(p.dofmap, p.mass, p.stiffness, 0.5 * p.stable.tau_max);
  const VectorX u0 = p.smooth_free();
  WaveState s = lf.start(u0, p.random_free(6));
  for (int n = 0; n < 1000; ++n) lf.advance(s);
  const LeapfrogIntegrator back = lf.reversed();
  EXPECT_EQ(back.tau(), -lf.tau());
  WaveState b = LeapfrogIntegrator::swap_levels(s);
  for (int n = 0; n < 1000; ++n) back.advance(b);
  EXPECT_LE((b.u_curr - u0).norm(), 1e-9 * u0.norm());
}

TEST(Leapfrog, DampedVelocityStaysBounded) {
  const Problem p(MeshKind::hybrid, 0);
  const double tau = 0.5 * p.stable.tau_max;
  const auto lf = LeapfrogIntegrator::with_constant_damping(p.dofmap, p.mass, p.stiffness, tau, 0.5);
  WaveState s = lf.start(p.random_free(7), p.random_free(8));
  // E >= (1 - tau^2 lambda / 4) |du/tau|_M^2 / 2 for the leapfrog energy
  const double bound = std::sqrt(2.0 * lf.energy(s) / (1.0 - tau * tau * p.stable.lambda_max / 4.0));
  double worst = 0.0;
  VectorX older = s.u_prev;
  for (int n = 0; n < 10000; ++n) {
    older = s.u_prev;
    lf.advance(s);
    const VectorX v = (s.u_curr - older) / (2 * tau);
    worst = std::max(worst, std::sqrt(v.dot(p.mass.apply(v))));
  }
  EXPECT_TRUE(std::isfinite(worst));
  EXPECT_LE(worst, 1.01 * bound);
}

TEST(StableStep, ScalesWithMeshSize) {
  for (MeshKind kind : {MeshKind::structured_triangle, MeshKind::structured_quad}) {
    const Problem coarse(kind, 1), fine(kind, 2);
    ASSERT_TRUE(coarse.stable.converged);
    ASSERT_TRUE(fine.stable.converged);
    const double ratio = fine.stable.lambda_max / coarse.stable.lambda_max;
    EXPECT_GE(ratio, 3.5) << to_string(kind);
    EXPECT_LE(ratio, 4.5) << to_string(kind);
    EXPECT_NEAR(fine.stable.tau_max / coarse.stable.tau_max, 0.5, 0.5 * 0.15);
  }
}

TEST(StableStep, EstimateMatchesEigenvalue) {
  const Problem p(MeshKind::hybrid, 0);
  // dense reference on the free set
  const Index n = p.dofmap.num_free();
  MatrixX k(n, n), m(n, n);
  const MatrixX kf(p.stiffness.matrix()), mf(p.mass.to_sparse());
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      k(i, j) = kf(p.dofmap.free_dofs()[i], p.dofmap.free_dofs()[j]);
      m(i, j) = mf(p.dofmap.free_dofs()[i], p.dofmap.free_dofs()[j]);
    }
  const double lambda = Eigen::GeneralizedSelfAdjointEigenSolver<MatrixX>(k, m).eigenvalues().maxCoeff();
  EXPECT_NEAR(p.stable.lambda_max, lambda, 1e-3 * lambda);
  EXPECT_NEAR(p.stable.tau_max, 0.9 * 2 / std::sqrt(p.stable.lambda_max), 1e-15);
}

TEST(StableStep, StepAboveBoundIsUnstable) {
  const Problem p(MeshKind::structured_triangle);
  const double tau = 1.01 * 2.0 / std::sqrt(p.stable.lambda_max);
  const LeapfrogIntegrator lf(p.dofmap, p.mass, p.stiffness, tau);
  WaveState s = lf.start(p.random_free(3), VectorX::Zero(p.dofmap.size()));
  const double e0 = lf.energy(s);
  bool blew_up = false;
  try {
    for (int n = 0; n < 3000; ++n) lf.advance(s);
    blew_up = std::abs(lf.energy(s)) > 1e6 * std::abs(e0);
  } catch (const InstabilityError&) {
    blew_up = true;
  }
  EXPECT_TRUE(blew_up);
}

TEST(StableStep, BelowBoundIsStable) {
  const Problem p(MeshKind::structured_triangle);
  const LeapfrogIntegrator lf(p.dofmap, p.mass, p.stiffness, p.stable.tau_max);
  WaveState s = lf.start(p.random_free(3), VectorX::Zero(p.dofmap.size()));
  const double e0 = lf.energy(s);
  for (int n = 0; n < 3000; ++n) lf.advance(s);
  EXPECT_NEAR(lf.energy(s), e0, 1e-8 * e0);
}

TEST(Leapfrog, RejectsZeroStep) {
  const Problem p(MeshKind::structured_triangle, 0);
  EXPECT_THROW(LeapfrogIntegrator(p.dofmap, p.mass, p.stiffness, 0.0), Error);
}

TEST(Leapfrog, BoundaryDataEntersThroughElimination) {
  // a constant field is an exact stationary solution; with its boundary trace as
  // data and the interpolant as initial value the scheme keeps it
  const Problem p(MeshKind::hybrid);
  const Vec2 c{0.8, -0.3};
  const VectorX u0 = interpolate_global(p.mesh, p.dofmap, [&](const Vec2&) { return c; });
  auto g = [&](double t) { return constrain(p.mesh, p.dofmap, [&](const Vec2&, double) { return c; }, t); };
  const LeapfrogIntegrator lf(p.dofmap, p.mass, p.stiffness, 0.5 * p.stable.tau_max, std::nullopt, g);
  WaveState s = lf.start(u0, VectorX::Zero(p.dofmap.size()));
  for (int n = 0; n < 200; ++n) lf.advance(s);
  EXPECT_LE((s.u_curr - u0).cwiseAbs().maxCoeff(), 1e-11);
}
