#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hdivwave {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using VectorX = Eigen::VectorXd;
using MatrixX = Eigen::MatrixXd;

using Index = std::ptrdiff_t;

enum class Shape { triangle, parallelogram };

inline constexpr int num_vertices(Shape s) { return s == Shape::triangle ? 3 : 4; }
/// Local space dimension: 8 for RT1, 10 for BDFM2.
inline constexpr int local_dim(Shape s) { return 2 * num_vertices(s) + 2; }

inline const char* to_string(Shape s) { return s == Shape::triangle ? "triangle" : "parallelogram"; }

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent mesh input (non-manifold edge, inverted cell, ...).
struct MeshError : Error {
  using Error::Error;
};

/// A local or global algebraic check failed (singular block, unisolvence, ...).
struct NumericalError : Error {
  using Error::Error;
};

/// Time integration produced non-finite values.
struct InstabilityError : Error {
  InstabilityError(Index step, double tau)
      : Error("non-finite state at step " + std::to_string(step) + " (tau = " + std::to_string(tau) +
              "); reduce the time step"),
        step(step) {}
  Index step;
};

/// Rotated gradient: perp(a) = (a_y, -a_x), i.e. the 90 degree clockwise rotation.
inline Vec2 perp(const Vec2& a) { return {a.y(), -a.x()}; }

}  // namespace hdivwave
