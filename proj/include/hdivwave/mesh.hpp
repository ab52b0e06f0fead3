#pragma once

#include "core.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace hdivwave {

struct Cell {
  Shape shape = Shape::triangle;
  std::array<Index, 4> vertices{-1, -1, -1, -1};  // counterclockwise; 4th unused on triangles

  int size() const { return num_vertices(shape); }
};

/// Incident edge of a cell. Local edge k runs from local vertex k to k+1 (mod n).
/// sign is +1 when the cell's outward normal agrees with the global edge normal.
struct EdgeRef {
  Index edge = -1;
  int sign = 0;
};

/// Hybrid 2D mesh of triangles and parallelograms with full edge topology.
///
/// Global edges are stored as (lo, hi) vertex pairs, lo < hi. The global normal
/// of an edge is the clockwise rotation of the unit tangent lo -> hi. The mesh is
/// immutable after construction.
class HybridMesh {
 public:
  HybridMesh() = default;

  /// Validates the cells (positive area, parallelogram condition) and builds the
  /// incidence tables. Throws MeshError on invalid input.
  HybridMesh(std::vector<Vec2> vertices, std::vector<Cell> cells, double nominal_h = 0.0)
      : vertices_(std::move(vertices)), cells_(std::move(cells)) {
    validate_cells();
    build_topology();
    nominal_h_ = nominal_h > 0.0 ? nominal_h : max_cell_diameter();
  }

  Index num_vertices() const { return static_cast<Index>(vertices_.size()); }
  Index num_cells() const { return static_cast<Index>(cells_.size()); }
  Index num_edges() const { return static_cast<Index>(edges_.size()); }

  const std::vector<Vec2>& vertices() const { return vertices_; }
  const Vec2& vertex(Index v) const { return vertices_[v]; }
  const std::vector<Cell>& cells() const { return cells_; }
  const Cell& cell(Index c) const { return cells_[c]; }
  const std::array<Index, 2>& edge(Index e) const { return edges_[e]; }
  const std::vector<std::array<Index, 2>>& edges() const { return edges_; }
  const std::array<EdgeRef, 4>& cell_edges(Index c) const { return cell_edges_[c]; }
  /// Cells adjacent to an edge; second entry is -1 on the boundary.
  const std::array<Index, 2>& edge_cells(Index e) const { return edge_cells_[e]; }
  const std::vector<Index>& boundary_edges() const { return boundary_edges_; }
  bool is_boundary_edge(Index e) const { return edge_cells_[e][1] < 0; }
  /// Edges incident to a vertex, sorted by edge id.
  const std::vector<Index>& vertex_edges(Index v) const { return vertex_edges_[v]; }
  /// Cells incident to a vertex, sorted by cell id.
  const std::vector<Index>& vertex_cells(Index v) const { return vertex_cells_[v]; }

  double nominal_h() const { return nominal_h_; }

  Vec2 edge_vector(Index e) const { return vertices_[edges_[e][1]] - vertices_[edges_[e][0]]; }
  double edge_length(Index e) const { return edge_vector(e).norm(); }
  /// Unit global normal of an edge.
  Vec2 edge_normal(Index e) const { return perp(edge_vector(e)).normalized(); }

  double signed_area(Index c) const {
    const Cell& k = cells_[c];
    const Vec2& a = vertices_[k.vertices[0]];
    const Vec2& b = vertices_[k.vertices[1]];
    const Vec2& d = vertices_[k.vertices[k.size() - 1]];
    const double cross = (b - a).x() * (d - a).y() - (b - a).y() * (d - a).x();
    return k.shape == Shape::triangle ? 0.5 * cross : cross;
  }

  /// Longest edge on triangles, longest diagonal on parallelograms.
  double cell_diameter(Index c) const {
    const Cell& k = cells_[c];
    double h = 0.0;
    for (int i = 0; i < k.size(); ++i)
      for (int j = i + 1; j < k.size(); ++j)
        h = std::max(h, (vertices_[k.vertices[i]] - vertices_[k.vertices[j]]).norm());
    return h;
  }

  double max_cell_diameter() const {
    double h = 0.0;
    for (Index c = 0; c < num_cells(); ++c) h = std::max(h, cell_diameter(c));
    return h;
  }

  /// max_K h_K / min_K h_K.
  double quasi_uniformity() const {
    double lo = std::numeric_limits<double>::max(), hi = 0.0;
    for (Index c = 0; c < num_cells(); ++c) {
      lo = std::min(lo, cell_diameter(c));
      hi = std::max(hi, cell_diameter(c));
    }
    return hi / lo;
  }

  double total_area() const {
    double a = 0.0;
    for (Index c = 0; c < num_cells(); ++c) a += signed_area(c);
    return a;
  }

  bool has_shape(Shape s) const {
    return std::any_of(cells_.begin(), cells_.end(), [s](const Cell& k) { return k.shape == s; });
  }

 private:
  void validate_cells() {
    for (Index c = 0; c < num_cells(); ++c) {
      const Cell& k = cells_[c];
      for (int i = 0; i < k.size(); ++i)
        if (k.vertices[i] < 0 || k.vertices[i] >= num_vertices())
          throw MeshError("cell " + std::to_string(c) + " references a missing vertex");
      if (!(signed_area(c) > 0.0))
        throw MeshError("cell " + std::to_string(c) + " has non-positive signed area");
      if (k.shape == Shape::parallelogram) {
        const Vec2 r = vertices_[k.vertices[0]] - vertices_[k.vertices[1]] + vertices_[k.vertices[2]] -
                       vertices_[k.vertices[3]];
        if (r.norm() > 1e-12 * cell_diameter(c))
          throw MeshError("cell " + std::to_string(c) + " is a quadrilateral but not a parallelogram");
      }
    }
  }

  void build_topology() {
    std::map<std::pair<Index, Index>, Index> lookup;
    cell_edges_.assign(cells_.size(), {});
    edge_cells_.clear();
    edges_.clear();
    for (Index c = 0; c < num_cells(); ++c) {
      const Cell& k = cells_[c];
      for (int i = 0; i < k.size(); ++i) {
        const Index a = k.vertices[i], b = k.vertices[(i + 1) % k.size()];
        if (a == b) throw MeshError("cell " + std::to_string(c) + " has a degenerate edge");
        const auto key = std::minmax(a, b);
        auto [it, inserted] = lookup.try_emplace({key.first, key.second}, num_edges());
        if (inserted) {
          edges_.push_back({key.first, key.second});
          edge_cells_.push_back({c, -1});
        } else {
          auto& adj = edge_cells_[it->second];
          if (adj[1] >= 0)
            throw MeshError("non-manifold edge (" + std::to_string(key.first) + ", " +
                            std::to_string(key.second) + ") shared by three or more cells");
          adj[1] = c;
        }
        cell_edges_[c][i] = {it->second, a < b ? +1 : -1};
      }
    }
    for (Index e = 0; e < num_edges(); ++e) {
      const auto& adj = edge_cells_[e];
      if (adj[1] < 0) {
        boundary_edges_.push_back(e);
        continue;
      }
      int s0 = 0, s1 = 0;
      for (const auto& r : cell_edges_[adj[0]])
        if (r.edge == e) s0 = r.sign;
      for (const auto& r : cell_edges_[adj[1]])
        if (r.edge == e) s1 = r.sign;
      if (s0 != -s1) throw MeshError("inconsistent orientation across edge " + std::to_string(e));
    }
    vertex_edges_.assign(vertices_.size(), {});
    for (Index e = 0; e < num_edges(); ++e) {
      vertex_edges_[edges_[e][0]].push_back(e);
      vertex_edges_[edges_[e][1]].push_back(e);
    }
    vertex_cells_.assign(vertices_.size(), {});
    for (Index c = 0; c < num_cells(); ++c)
      for (int i = 0; i < cells_[c].size(); ++i) vertex_cells_[cells_[c].vertices[i]].push_back(c);
  }

  std::vector<Vec2> vertices_;
  std::vector<Cell> cells_;
  std::vector<std::array<Index, 2>> edges_;
  std::vector<std::array<EdgeRef, 4>> cell_edges_;
  std::vector<std::array<Index, 2>> edge_cells_;
  std::vector<Index> boundary_edges_;
  std::vector<std::vector<Index>> vertex_edges_;
  std::vector<std::vector<Index>> vertex_cells_;
  double nominal_h_ = 0.0;
};

enum class MeshKind { structured_triangle, structured_quad, hybrid, perturbed };

inline MeshKind parse_mesh_kind(const std::string& s) {
  if (s == "structured-triangle" || s == "triangle") return MeshKind::structured_triangle;
  if (s == "structured-quad" || s == "quad" || s == "parallelogram") return MeshKind::structured_quad;
  if (s == "hybrid") return MeshKind::hybrid;
  if (s == "perturbed") return MeshKind::perturbed;
  throw Error("unknown mesh family '" + s + "'");
}

inline const char* to_string(MeshKind k) {
  switch (k) {
    case MeshKind::structured_triangle: return "structured-triangle";
    case MeshKind::structured_quad: return "structured-quad";
    case MeshKind::hybrid: return "hybrid";
    case MeshKind::perturbed: return "perturbed";
  }
  return "?";
}

/// How a family picks the number of divisions per side.
///   side:     n = base_divisions * 2^l, h is the cell side length.
///   diameter: h = base_h * 2^-l is a bound on the cell diameter and n is the
///             smallest count meeting it. Levels are then not nested.
enum class MeshSizing { side, diameter };

/// A refinement family of structured meshes on a box.
struct MeshFamily {
  MeshKind kind = MeshKind::structured_triangle;
  Vec2 lower{0.0, 0.0};
  Vec2 upper{1.0, 1.0};
  int base_divisions = 1;
  /// Vertex jitter for the perturbed kind, as a fraction of the cell side.
  double perturbation = 0.2;
  std::uint64_t seed = 20190101;
  MeshSizing sizing = MeshSizing::side;
  double base_h = 1.0;

  /// Nominal mesh size at a level.
  double nominal_h(int level) const {
    if (sizing == MeshSizing::diameter) return base_h * std::ldexp(1.0, -level);
    return std::max(upper.x() - lower.x(), upper.y() - lower.y()) / static_cast<double>(divisions(level));
  }

  /// Cells per side at a level.
  Index divisions(int level) const {
    if (sizing == MeshSizing::side) return static_cast<Index>(base_divisions) << level;
    const double diag = (upper - lower).norm();
    return std::max<Index>(1, static_cast<Index>(std::ceil(diag / nominal_h(level) - 1e-9)));
  }
};

namespace detail {

inline void jitter_interior(std::vector<Vec2>& xy, const std::vector<Cell>& cells, const std::vector<bool>& interior,
                            double radius, std::uint64_t seed) {
  std::vector<std::vector<Index>> vcells(xy.size());
  for (Index c = 0; c < static_cast<Index>(cells.size()); ++c)
    for (int i = 0; i < cells[c].size(); ++i) vcells[cells[c].vertices[i]].push_back(c);

  auto area = [&](Index c) {
    const Cell& k = cells[c];
    const Vec2 a = xy[k.vertices[0]], b = xy[k.vertices[1]], d = xy[k.vertices[2]];
    return 0.5 * ((b - a).x() * (d - a).y() - (b - a).y() * (d - a).x());
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t v = 0; v < xy.size(); ++v) {
    const double r = radius * std::sqrt(unit(rng));
    const double phi = 2.0 * M_PI * unit(rng);
    if (!interior[v]) continue;
    double min_before = std::numeric_limits<double>::max();
    for (Index c : vcells[v]) min_before = std::min(min_before, area(c));
    const Vec2 origin = xy[v];
    Vec2 shift{r * std::cos(phi), r * std::sin(phi)};
    // Shrink the move until no incident cell loses more than 70% of its area.
    for (int attempt = 0; attempt < 8; ++attempt, shift *= 0.5) {
      xy[v] = origin + shift;
      bool ok = true;
      for (Index c : vcells[v]) ok = ok && area(c) > 0.3 * min_before;
      if (ok) break;
      xy[v] = origin;
    }
  }
}

}  // namespace detail

/// Generates level `level` of a mesh family.
inline HybridMesh generate(const MeshFamily& family, int level) {
  if (level < 0) throw Error("mesh level must be non-negative");
  if (family.sizing == MeshSizing::side && family.base_divisions < 1)
    throw Error("base_divisions must be at least 1");
  if (family.sizing == MeshSizing::diameter && !(family.base_h > 0.0)) throw Error("base_h must be positive");
  const Vec2 size = family.upper - family.lower;
  if (!(size.x() > 0.0 && size.y() > 0.0)) throw Error("degenerate domain box");
  if (family.kind == MeshKind::perturbed && !(family.perturbation >= 0.0 && family.perturbation < 0.5))
    throw Error("perturbation must lie in [0, 0.5)");

  const Index n = family.divisions(level);
  const Index np = n + 1;
  std::vector<Vec2> xy;
  xy.reserve(np * np);
  for (Index j = 0; j <= n; ++j)
    for (Index i = 0; i <= n; ++i)
      xy.emplace_back(family.lower.x() + size.x() * static_cast<double>(i) / static_cast<double>(n),
                      family.lower.y() + size.y() * static_cast<double>(j) / static_cast<double>(n));
  auto id = [np](Index i, Index j) { return j * np + i; };

  std::vector<Cell> cells;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      const Index a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      bool quad = family.kind == MeshKind::structured_quad || (family.kind == MeshKind::hybrid && 2 * i < n);
      if (quad) {
        cells.push_back({Shape::parallelogram, {a, b, c, d}});
      } else {
        cells.push_back({Shape::triangle, {a, b, c, -1}});
        cells.push_back({Shape::triangle, {a, c, d, -1}});
      }
    }
  }

  const double h = family.nominal_h(level);
  if (family.kind == MeshKind::perturbed && family.perturbation > 0.0) {
    std::vector<bool> interior(xy.size(), false);
    for (Index j = 1; j < n; ++j)
      for (Index i = 1; i < n; ++i) interior[id(i, j)] = true;
    const double side = std::max(size.x(), size.y()) / static_cast<double>(n);
    detail::jitter_interior(xy, cells, interior, family.perturbation * side,
                            family.seed + static_cast<std::uint64_t>(level));
  }
  return HybridMesh(std::move(xy), std::move(cells), h);
}

/// Writes the plain-text mesh format: "vertices N cells M", N lines "x y",
/// M lines "tri a b c" or "quad a b c d".
inline void write_mesh(std::ostream& os, const HybridMesh& mesh) {
  os << "vertices " << mesh.num_vertices() << " cells " << mesh.num_cells() << '\n';
  os << std::setprecision(17);
  for (const Vec2& p : mesh.vertices()) os << p.x() << ' ' << p.y() << '\n';
  for (const Cell& k : mesh.cells()) {
    os << (k.shape == Shape::triangle ? "tri" : "quad");
    for (int i = 0; i < k.size(); ++i) os << ' ' << k.vertices[i];
    os << '\n';
  }
}

inline HybridMesh read_mesh(std::istream& is) {
  std::string tag_v, tag_c;
  Index nv = -1, nc = -1;
  if (!(is >> tag_v >> nv >> tag_c >> nc) || tag_v != "vertices" || tag_c != "cells" || nv < 0 || nc < 0)
    throw MeshError("mesh file: expected header 'vertices N cells M'");
  std::vector<Vec2> xy(nv);
  for (Index v = 0; v < nv; ++v)
    if (!(is >> xy[v].x() >> xy[v].y())) throw MeshError("mesh file: bad vertex line " + std::to_string(v));
  std::vector<Cell> cells(nc);
  for (Index c = 0; c < nc; ++c) {
    std::string kind;
    if (!(is >> kind)) throw MeshError("mesh file: missing cell " + std::to_string(c));
    if (kind == "tri") cells[c].shape = Shape::triangle;
    else if (kind == "quad") cells[c].shape = Shape::parallelogram;
    else throw MeshError("mesh file: unknown cell type '" + kind + "'");
    for (int i = 0; i < cells[c].size(); ++i)
      if (!(is >> cells[c].vertices[i])) throw MeshError("mesh file: bad cell line " + std::to_string(c));
  }
  return HybridMesh(std::move(xy), std::move(cells));
}

inline HybridMesh read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file '" + path + "'");
  return read_mesh(in);
}

}  // namespace hdivwave
