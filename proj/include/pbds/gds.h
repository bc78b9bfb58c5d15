#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "pbds/policy.h"

namespace pbds {

using BlockFn = std::function<Matrix(const Vector& p, const Vector& v)>;

// Block-diagonal tangent-bundle metric gv dp dp + ga dv dv in one chart.
struct BlockVelocityMetric {
  BlockFn gv;
  BlockFn ga;
};

using CoordinateMap = std::function<Vector(const Vector&)>;

// Jacobian of the tangent lift (p, v) -> (phi(p), Dphi(p) v),
// [[Jv, 0], [Jav, Jv]] with Jav = v^k d^2 phi / dp dp^k, by finite
// differences of phi.
Matrix tangent_lift_jacobian(const CoordinateMap& phi, const Vector& p, const Vector& v);

// Congruence Jlift^T blockdiag(gv, ga) Jlift with the blocks evaluated at
// the lifted point; 2m x 2m including the off-diagonal blocks.
Matrix transition_bundle_metric(const BlockVelocityMetric& g, const CoordinateMap& phi,
                                const Vector& p_hat, const Vector& v_hat);

// A task whose tangent-bundle metric is designed block-diagonally in design
// coordinates (design map from the task chart into R^d with constant metric
// in both blocks). Without a design map the design coordinates are the task
// chart itself.
struct GdsTask {
  TaskSpec task;
  std::optional<TaskMap> design;
  Matrix design_metric;
};

GdsTask gds_from_pbds(const TaskSpec& task);

// Damping on an embedded manifold, with the tangent-bundle metric designed
// in the ambient coordinates.
GdsTask gds_damping(const Manifold& on, double c);

// Velocity block of the design metric seen from the current task chart,
// keeping only the coordinate block and discarding the off-diagonal terms.
Matrix gds_velocity_block(const GdsTask& t, const ChartPoint& y, const Vector& y_dot);

PolicyOutput gds_combine(const std::vector<GdsTask>& tasks, const ChartPoint& p,
                         const Vector& v);

}  // namespace pbds
