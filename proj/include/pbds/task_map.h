#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pbds/linalg.h"
#include "pbds/manifold.h"

namespace pbds {

using MapValueFn = std::function<ChartPoint(const ChartPoint&)>;
using MapJacobianFn = std::function<Matrix(const ChartPoint&)>;
// Velocity-contracted second derivative: (p, v) -> d/dt Jf along p' = v.
using MapJacobianDotFn = std::function<Matrix(const ChartPoint&, const Vector&)>;

// Smooth map between manifolds in chart coordinates. Missing derivative
// callables fall back to finite differences.
struct TaskMap {
  TaskMap(Manifold domain, Manifold codomain, std::string name = "map")
      : domain(std::move(domain)), codomain(std::move(codomain)), name(std::move(name)) {}

  Manifold domain;
  Manifold codomain;
  MapValueFn value;
  MapJacobianFn jacobian;
  MapJacobianDotFn jacobian_dot;
  std::string name;
};

inline constexpr double kJacobianFdStep = 1e-6;

// Central differences in the domain chart. Perturbed images are expressed in
// the chart of the unperturbed image.
Matrix finite_difference_jacobian(const TaskMap& f, const ChartPoint& p,
                                  double h = kJacobianFdStep);

// Differences the Jacobian along the chart line p + t v.
Matrix finite_difference_jacobian_dot(const TaskMap& f, const ChartPoint& p, const Vector& v);

Matrix jacobian(const TaskMap& f, const ChartPoint& p);
Matrix jacobian_dot(const TaskMap& f, const ChartPoint& p, const Vector& v);

struct MapEvaluation {
  ChartPoint y;
  Matrix J;
  Matrix J_dot;
  Vector y_dot;
};

MapEvaluation evaluate(const TaskMap& f, const ChartPoint& p, const Vector& v);

// outer after inner.
TaskMap compose(const TaskMap& inner, const TaskMap& outer);

TaskMap identity_map(const Manifold& m);

// Chart coordinates to ambient coordinates, M -> R^d.
TaskMap embedding_map(const Manifold& m);

// Linear map x -> A x + b between Euclidean spaces.
TaskMap affine_map(const Matrix& a, const Vector& b);

// Same-domain maps stacked into a product codomain.
TaskMap product_map(const std::vector<TaskMap>& maps);

// Euclidean distance to a goal on R^n.
TaskMap euclidean_distance_map(const Vector& goal);

// Great-circle angle between x/|x| and a unit goal, R^{n+1} -> R. The
// Jacobian vanishes at the goal; near the antipode the derivatives are
// clamped and at the antipode itself the map throws Error(kSingular).
TaskMap sphere_angle_map(const Vector& goal);

// Ambient Euclidean distance to the surface of a ball, R^d -> R+. Throws
// Error(kCollision) when the point is inside the ball.
TaskMap ball_clearance_map(const Vector& center, double radius);

// Closed-form value and derivatives of the great-circle angle, shared with
// tests.
struct AngleDerivatives {
  double value;
  Vector gradient;
  Matrix hessian;
};
AngleDerivatives sphere_angle(const Vector& x, const Vector& goal);

inline constexpr double kAntipodeClamp = 1e-3;

}  // namespace pbds
