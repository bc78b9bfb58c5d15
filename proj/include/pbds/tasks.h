#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "pbds/riemannian.h"
#include "pbds/task_map.h"

namespace pbds {

enum class TaskRole { kGeneric, kAttractor, kDamping, kConstraint };

// One task: map f into a task manifold plus the behavior designed there.
// The potential, force and weight act on codomain chart coordinates.
struct TaskSpec {
  TaskSpec(std::string name, TaskMap map, MetricField metric);

  std::string name;
  TaskRole role = TaskRole::kGeneric;
  TaskMap map;
  MetricField metric;
  ChartPotentialFn potential;
  ChartGradientFn potential_gradient;
  ChartForceFn dissipative_force;
  ChartWeightFn weight;
  // Leading codomain coordinates the weight acts on; the rest always carry
  // zero weight (distance factors appended by toggle_by_distance).
  int weighted_dimension;
};

struct BarrierParams {
  double a = 2.0;
  double b = 2.0;
  double beta = std::numeric_limits<double>::infinity();
  bool smooth = false;
  double eps = 1e-2;
};

void validate(const BarrierParams& params);

// 1 when approaching (xdot < 0) inside the activation radius, else 0. The
// smooth variant multiplies two logistic factors of width eps.
double constraint_activation(const BarrierParams& params, double x, double xdot);

// Attractor over a distance-like map into R: unit metric and weight,
// potential x^2, no force.
TaskSpec make_attractor_task(const TaskMap& distance);

// Geodesic distance on spheres, Euclidean distance on R^n.
TaskSpec make_attractor_task(const Manifold& on, const EmbeddedPoint& goal);
TaskSpec make_attractor_task(const Manifold& on, const ChartPoint& goal);

// Identity map; ambient metric I, force -c xdot, weight I pulled back
// through the embedding.
TaskSpec make_damping_task(const Manifold& on, double c);

// Barrier metric over a distance map into R+, no potential or force,
// weight toggled by constraint_activation.
TaskSpec make_constraint_task(const TaskMap& distance, const BarrierParams& params);

// Constraint on ambient clearance from a ball in the embedding space.
TaskSpec make_obstacle_task(const Manifold& on, const Vector& center, double radius,
                            const BarrierParams& params);

using TogglePredicate = std::function<bool(double d, double d_dot)>;

// Appends the distance as an extra R factor of the codomain. The extra factor
// has unit metric, no potential or force and zero weight; the original weight
// is kept where the predicate holds and zeroed elsewhere.
TaskSpec toggle_by_distance(const TaskSpec& task, const TaskMap& distance,
                            TogglePredicate predicate);

struct AssumptionSample {
  TangentState state;
  bool a1 = true;  // every weight is positive-definite or zero
  bool a2 = true;  // stacked Jacobians of weighted tasks have full column rank
  bool a3 = true;  // weighted forces strictly dissipative at sampled velocities
  std::string detail;
};

struct AssumptionReport {
  std::vector<AssumptionSample> samples;

  bool a1() const;
  bool a2() const;
  bool a3() const;
  bool all() const { return a1() && a2() && a3(); }
};

// A3 is probed at the state's own velocity (when nonzero) and at
// `velocity_samples` random chart velocities drawn from `seed`.
AssumptionReport check_assumptions(const std::vector<TaskSpec>& tasks,
                                   const std::vector<TangentState>& states,
                                   int velocity_samples = 8, std::uint64_t seed = 0);

// Positive-definite or zero within tol, restricted to the leading block.
bool weight_is_pd_or_zero(const Matrix& w, int weighted_dimension, double tol = 1e-10);
bool weight_is_zero(const Matrix& w);

}  // namespace pbds
