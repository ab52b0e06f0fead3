#pragma once

#include "element.hpp"

#include <Eigen/Sparse>

#include <ostream>
#include <vector>

namespace hdivwave {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using BoundaryData = std::function<Vec2(const Vec2&, double)>;

/// Global numbering: one DOF per (edge, endpoint) pair, numbered edge by edge with the
/// lower vertex id first, followed by two interior DOFs per cell. Edge DOFs are the
/// normal component (w.r.t. the global edge normal) at the endpoint; interior DOFs are
/// the Cartesian field value at the cell midpoint. All DOFs on boundary edges are
/// constrained.
class DofMap {
 public:
  struct LocalMap {
    int dim = 0;
    std::array<Index, 10> dof{};
    std::array<double, 10> sign{};
  };

  DofMap() = default;
  explicit DofMap(const HybridMesh& mesh) : num_edges_(mesh.num_edges()), num_cells_(mesh.num_cells()) {
    constrained_.assign(size(), false);
    for (Index e : mesh.boundary_edges()) constrained_[edge_dof(e, 0)] = constrained_[edge_dof(e, 1)] = true;
    free_position_.assign(size(), -1);
    for (Index i = 0; i < size(); ++i) {
      if (constrained_[i]) {
        constrained_dofs_.push_back(i);
      } else {
        free_position_[i] = static_cast<Index>(free_dofs_.size());
        free_dofs_.push_back(i);
      }
    }
    local_.resize(num_cells_);
    for (Index c = 0; c < num_cells_; ++c) {
      const Cell& k = mesh.cell(c);
      const int n = k.size();
      LocalMap& lm = local_[c];
      lm.dim = local_dim(k.shape);
      for (int i = 0; i < 2 * n; ++i) {
        const BasisTag tag = basis_tag(k.shape, i);
        const EdgeRef r = mesh.cell_edges(c)[tag.edge];
        const Index gv = k.vertices[tag.vertex];
        lm.dof[i] = edge_dof(r.edge, gv == mesh.edge(r.edge)[1] ? 1 : 0);
        lm.sign[i] = r.sign;
      }
      for (int j = 0; j < 2; ++j) {
        lm.dof[2 * n + j] = interior_dof(c, j);
        lm.sign[2 * n + j] = 1.0;
      }
    }
  }

  Index size() const { return 2 * num_edges_ + 2 * num_cells_; }
  Index num_edges() const { return num_edges_; }
  Index num_cells() const { return num_cells_; }

  /// endpoint 0 is the lower vertex id of the edge.
  Index edge_dof(Index e, int endpoint) const { return 2 * e + endpoint; }
  Index interior_dof(Index c, int k) const { return 2 * num_edges_ + 2 * c + k; }

  const LocalMap& local(Index c) const { return local_[c]; }

  bool is_constrained(Index i) const { return constrained_[i]; }
  const std::vector<Index>& free_dofs() const { return free_dofs_; }
  const std::vector<Index>& constrained_dofs() const { return constrained_dofs_; }
  Index num_free() const { return static_cast<Index>(free_dofs_.size()); }
  /// Position in the free-DOF vector, -1 for constrained DOFs.
  Index free_position(Index i) const { return free_position_[i]; }

  VectorX restrict_free(const VectorX& full) const {
    VectorX out(num_free());
    for (Index i = 0; i < num_free(); ++i) out[i] = full[free_dofs_[i]];
    return out;
  }
  VectorX extend_free(const VectorX& free, const VectorX& boundary_full) const {
    VectorX out = boundary_full;
    for (Index i = 0; i < num_free(); ++i) out[free_dofs_[i]] = free[i];
    return out;
  }
  /// Copies the entries of `from` on the constrained set into `to`.
  void set_constrained(VectorX& to, const VectorX& from) const {
    for (Index i : constrained_dofs_) to[i] = from[i];
  }
  void zero_constrained(VectorX& v) const {
    for (Index i : constrained_dofs_) v[i] = 0.0;
  }

  /// Local coefficient vector of a global vector on cell c.
  Eigen::Matrix<double, 10, 1> gather(const VectorX& global, Index c) const {
    Eigen::Matrix<double, 10, 1> out = Eigen::Matrix<double, 10, 1>::Zero();
    const LocalMap& lm = local_[c];
    for (int i = 0; i < lm.dim; ++i) out[i] = lm.sign[i] * global[lm.dof[i]];
    return out;
  }

 private:
  Index num_edges_ = 0;
  Index num_cells_ = 0;
  std::vector<bool> constrained_;
  std::vector<Index> free_dofs_;
  std::vector<Index> constrained_dofs_;
  std::vector<Index> free_position_;
  std::vector<LocalMap> local_;
};

inline DofMap build_dofmap(const HybridMesh& mesh) { return DofMap(mesh); }

/// Block-diagonal lumped mass: one symmetric block per quadrature point of the mesh
/// (vertex blocks first, in vertex order, then one 2x2 midpoint block per cell).
class BlockDiagMass {
 public:
  struct Block {
    std::vector<Index> dofs;
    MatrixX matrix;
    std::vector<int> free_slots;  // positions of unconstrained DOFs within `dofs`
    Eigen::LLT<MatrixX> free_factor;
  };

  BlockDiagMass() = default;

  Index num_blocks() const { return static_cast<Index>(blocks_.size()); }
  const Block& block(Index b) const { return blocks_[b]; }
  const std::vector<Block>& blocks() const { return blocks_; }
  Index size() const { return size_; }

  /// y = M x on the full DOF vector.
  VectorX apply(const VectorX& x) const {
    VectorX y = VectorX::Zero(size_);
    for (const Block& b : blocks_) {
      const Index m = static_cast<Index>(b.dofs.size());
      for (Index i = 0; i < m; ++i) {
        double s = 0.0;
        for (Index j = 0; j < m; ++j) s += b.matrix(i, j) * x[b.dofs[j]];
        y[b.dofs[i]] = s;
      }
    }
    return y;
  }

  /// x_F = M_FF^{-1} r_F, blockwise; constrained entries of the result are zero.
  VectorX solve_free(const VectorX& r) const {
    VectorX x = VectorX::Zero(size_);
    for (const Block& b : blocks_) {
      if (b.free_slots.empty()) continue;
      VectorX rb(b.free_slots.size());
      for (std::size_t i = 0; i < b.free_slots.size(); ++i) rb[i] = r[b.dofs[b.free_slots[i]]];
      const VectorX xb = b.free_factor.solve(rb);
      for (std::size_t i = 0; i < b.free_slots.size(); ++i) x[b.dofs[b.free_slots[i]]] = xb[i];
    }
    return x;
  }

  /// Full n x n matrix reconstructed from the blocks.
  SparseMatrix to_sparse() const {
    std::vector<Eigen::Triplet<double>> t;
    for (const Block& b : blocks_)
      for (std::size_t i = 0; i < b.dofs.size(); ++i)
        for (std::size_t j = 0; j < b.dofs.size(); ++j) t.emplace_back(b.dofs[i], b.dofs[j], b.matrix(i, j));
    SparseMatrix m(size_, size_);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }

  /// a*this + b*other, with the same block layout; refactorized.
  BlockDiagMass combined(double a, const BlockDiagMass& other, double b) const {
    BlockDiagMass out = *this;
    for (std::size_t k = 0; k < out.blocks_.size(); ++k)
      out.blocks_[k].matrix = a * blocks_[k].matrix + b * other.blocks_[k].matrix;
    out.factorize();
    return out;
  }

  /// Smallest eigenvalue over all blocks (positive iff every block is SPD).
  double min_eigenvalue() const {
    double lo = std::numeric_limits<double>::max();
    for (const Block& b : blocks_)
      lo = std::min(lo, Eigen::SelfAdjointEigenSolver<MatrixX>(b.matrix, Eigen::EigenvaluesOnly).eigenvalues()(0));
    return lo;
  }

  std::size_t stored_scalars() const {
    std::size_t n = 0;
    for (const Block& b : blocks_) n += b.dofs.size() * b.dofs.size();
    return n;
  }

 private:
  friend BlockDiagMass assemble_lumped_mass(const HybridMesh&, const DofMap&, const std::function<double(const Vec2&)>&,
                                            const LumpedQuadRule*, const LumpedQuadRule*);

  void factorize() {
    for (Block& b : blocks_) {
      if (b.free_slots.empty()) continue;
      const Index m = static_cast<Index>(b.free_slots.size());
      MatrixX sub(m, m);
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j) sub(i, j) = b.matrix(b.free_slots[i], b.free_slots[j]);
      b.free_factor.compute(sub);
      if (b.free_factor.info() != Eigen::Success)
        throw NumericalError("lumped mass block is not symmetric positive definite");
    }
  }

  std::vector<Block> blocks_;
  Index size_ = 0;
};

/// Assembles the lumped product (c u, v)_h for a scalar coefficient c(x) (default 1).
/// The optional rules override the standard weights (used as negative controls).
inline BlockDiagMass assemble_lumped_mass(const HybridMesh& mesh, const DofMap& dofmap,
                                          const std::function<double(const Vec2&)>& coefficient = {},
                                          const LumpedQuadRule* triangle_rule = nullptr,
                                          const LumpedQuadRule* parallelogram_rule = nullptr) {
  BlockDiagMass mass;
  mass.size_ = dofmap.size();
  const Index nv = mesh.num_vertices();
  std::vector<std::pair<Index, Index>> where(dofmap.size(), {-1, -1});  // dof -> (block, position)
  mass.blocks_.resize(nv + mesh.num_cells());
  for (Index v = 0; v < nv; ++v) {
    auto& b = mass.blocks_[v];
    for (Index e : mesh.vertex_edges(v)) {
      const Index dof = dofmap.edge_dof(e, mesh.edge(e)[1] == v ? 1 : 0);
      where[dof] = {v, static_cast<Index>(b.dofs.size())};
      b.dofs.push_back(dof);
    }
  }
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    auto& b = mass.blocks_[nv + c];
    for (int k = 0; k < 2; ++k) {
      where[dofmap.interior_dof(c, k)] = {nv + c, k};
      b.dofs.push_back(dofmap.interior_dof(c, k));
    }
  }
  for (auto& b : mass.blocks_) {
    b.matrix = MatrixX::Zero(b.dofs.size(), b.dofs.size());
    for (std::size_t i = 0; i < b.dofs.size(); ++i)
      if (!dofmap.is_constrained(b.dofs[i])) b.free_slots.push_back(static_cast<int>(i));
  }

  const LumpedQuadRule tri = triangle_rule ? *triangle_rule : LumpedQuadRule::for_shape(Shape::triangle);
  const LumpedQuadRule par = parallelogram_rule ? *parallelogram_rule : LumpedQuadRule::for_shape(Shape::parallelogram);
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const LocalElement elem(mesh, c);
    const LumpedQuadRule& rule = elem.shape() == Shape::triangle ? tri : par;
    const auto local = local_mass_lumped(elem, rule);
    const auto& lm = dofmap.local(c);
    for (int q = 0; q < rule.num_points(); ++q) {
      const double w = coefficient ? coefficient(elem.to_physical(rule.point(q).point)) : 1.0;
      const auto slots = quad_point_slots(elem.shape(), q);
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          const auto [bi, pi] = where[lm.dof[slots[i]]];
          const auto [bj, pj] = where[lm.dof[slots[j]]];
          if (bi != bj) throw NumericalError("quadrature point slots map to different mass blocks");
          mass.blocks_[bi].matrix(pi, pj) += w * lm.sign[slots[i]] * lm.sign[slots[j]] * local[q](i, j);
        }
      }
    }
  }
  // A weighted product (e.g. damping with d >= 0) may be singular and is not factorized.
  if (coefficient) return mass;
  for (const auto& b : mass.blocks_)
    if (Eigen::SelfAdjointEigenSolver<MatrixX>(b.matrix, Eigen::EigenvaluesOnly).eigenvalues()(0) <= 0.0)
      throw NumericalError("lumped mass block is not positive definite");
  mass.factorize();
  return mass;
}

namespace detail {

template <class LocalMatrix>
SparseMatrix assemble_sparse(const HybridMesh& mesh, const DofMap& dofmap, LocalMatrix&& local_matrix) {
  std::vector<Eigen::Triplet<double>> t;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const LocalElement elem(mesh, c);
    const MatrixX a = local_matrix(elem);
    const auto& lm = dofmap.local(c);
    for (int i = 0; i < lm.dim; ++i)
      for (int j = 0; j < lm.dim; ++j) t.emplace_back(lm.dof[i], lm.dof[j], lm.sign[i] * lm.sign[j] * a(i, j));
  }
  SparseMatrix m(dofmap.size(), dofmap.size());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

}  // namespace detail

/// Local (div phi_i, div phi_j)_K with a given rule (weights as area fractions).
inline MatrixX local_stiffness(const LocalElement& elem, bool use_oracle = false) {
  MatrixX a = MatrixX::Zero(elem.dim(), elem.dim());
  auto add = [&](const Vec2& ref, double w) {
    const BasisEval b = elem.eval(ref);
    for (int i = 0; i < b.dim; ++i)
      for (int j = 0; j < b.dim; ++j) a(i, j) += w * elem.area() * b[i].div * b[j].div;
  };
  if (use_oracle) {
    for (const auto& p : OracleRule::standard(elem.shape()).points) add(p.point, p.weight);
  } else {
    const LumpedQuadRule rule = LumpedQuadRule::for_shape(elem.shape());
    for (int q = 0; q < rule.num_points(); ++q) add(rule.point(q).point, rule.point(q).weight);
  }
  return a;
}

/// Compressed sparse symmetric div-div matrix over all DOFs.
class SparseStiffness {
 public:
  SparseStiffness() = default;
  explicit SparseStiffness(SparseMatrix m) : matrix_(std::move(m)) {}

  const SparseMatrix& matrix() const { return matrix_; }
  Index size() const { return matrix_.rows(); }

  /// y = K x; rows are reduced sequentially in a fixed order.
  VectorX apply(const VectorX& x) const {
    VectorX y(matrix_.rows());
    for (Index r = 0; r < matrix_.outerSize(); ++r) {
      double s = 0.0;
      for (SparseMatrix::InnerIterator it(matrix_, r); it; ++it) s += it.value() * x[it.col()];
      y[r] = s;
    }
    return y;
  }

 private:
  SparseMatrix matrix_;
};

/// Exact div-div stiffness. The lumped rule is exact here since div V(K) = P1.
inline SparseStiffness assemble_stiffness(const HybridMesh& mesh, const DofMap& dofmap, bool use_oracle = false) {
  return SparseStiffness(
      detail::assemble_sparse(mesh, dofmap, [&](const LocalElement& e) { return local_stiffness(e, use_oracle); }));
}

/// Consistent L2 mass (phi_i, phi_j) with the degree-6 oracle rule.
inline SparseMatrix assemble_consistent_mass(const HybridMesh& mesh, const DofMap& dofmap) {
  return detail::assemble_sparse(mesh, dofmap, [](const LocalElement& elem) {
    MatrixX a = MatrixX::Zero(elem.dim(), elem.dim());
    for (const auto& p : OracleRule::standard(elem.shape()).points) {
      const BasisEval b = elem.eval(p.point);
      for (int i = 0; i < b.dim; ++i)
        for (int j = 0; j < b.dim; ++j) a(i, j) += p.weight * elem.area() * b[i].value.dot(b[j].value);
    }
    return a;
  });
}

/// Lumped mass assembled directly from full local matrices of all basis pairs.
inline SparseMatrix assemble_lumped_mass_direct(const HybridMesh& mesh, const DofMap& dofmap) {
  return detail::assemble_sparse(mesh, dofmap, [](const LocalElement& elem) {
    return local_mass_lumped_dense(elem, LumpedQuadRule::for_shape(elem.shape()));
  });
}

/// Global canonical interpolant Pi_h u (all DOFs, boundary included).
inline VectorX interpolate_global(const HybridMesh& mesh, const DofMap& dofmap, const VectorField& u) {
  VectorX out = VectorX::Zero(dofmap.size());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const VectorX local = interpolate(u, LocalElement(mesh, c));
    const auto& lm = dofmap.local(c);
    for (int i = 0; i < lm.dim; ++i) out[lm.dof[i]] = lm.sign[i] * local[i];
  }
  return out;
}

/// Constrained values at time t: the global-normal component of g at each boundary
/// edge endpoint. Free entries are zero.
inline VectorX constrain(const HybridMesh& mesh, const DofMap& dofmap, const BoundaryData& g, double t) {
  VectorX out = VectorX::Zero(dofmap.size());
  if (!g) return out;
  for (Index e : mesh.boundary_edges()) {
    const Vec2 n = mesh.edge_normal(e);
    for (int j = 0; j < 2; ++j) out[dofmap.edge_dof(e, j)] = g(mesh.vertex(mesh.edge(e)[j]), t).dot(n);
  }
  return out;
}

/// Coordinate text dump: header "row,col,value" then one line per stored entry.
inline void write_coo(std::ostream& os, const SparseMatrix& m) {
  os << "row,col,value\n" << std::setprecision(17);
  for (Index r = 0; r < m.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) os << it.row() << ',' << it.col() << ',' << it.value() << '\n';
}

}  // namespace hdivwave
