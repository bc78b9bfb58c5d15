#pragma once

#include <vector>

#include "pbds/linalg.h"
#include "pbds/manifold.h"
#include "pbds/tasks.h"

namespace pbds {

// Per-task pullback quantities at a robot state (p, v).
struct TaskAcceleration {
  ChartPoint y;    // f(p)
  Vector y_dot;    // Jf v
  Matrix Jf;       // n x m
  Matrix Jf_dot;   // n x m
  Matrix Xi;       // n x m, Xi v = Gamma(y_dot, y_dot) at f(p)
  Vector A;        // desired task acceleration minus Jf_dot v
  Matrix w_a;      // n x n
  bool active = false;
};

struct PolicyOutput {
  Vector acceleration;
  double condition_number = 1.0;    // mass matrix; +inf when singular
  int active_tasks = 0;
  std::vector<double> residuals;    // |Jf a - A| per task, weighted norm
  bool all_weights_zero = false;
};

// Zero-weight tasks skip the metric and connection evaluation.
TaskAcceleration task_quantities(const TaskSpec& task, const ChartPoint& p, const Vector& v);

// Weighted least-squares fusion of precomputed task quantities.
PolicyOutput fuse(const std::vector<TaskAcceleration>& quantities, int dimension);

// Serial reference policy.
PolicyOutput combine(const std::vector<TaskSpec>& tasks, const ChartPoint& p, const Vector& v);

// Task quantities evaluated with one OpenMP thread per task block; the
// reduction runs in task order so results match combine() bit for bit.
PolicyOutput combine_parallel(const std::vector<TaskSpec>& tasks, const ChartPoint& p,
                              const Vector& v);

// Independent states, one policy evaluation each.
std::vector<Vector> evaluate_batch(const std::vector<TaskSpec>& tasks,
                                   const std::vector<TangentState>& states);
std::vector<Vector> evaluate_batch_parallel(const std::vector<TaskSpec>& tasks,
                                            const std::vector<TangentState>& states);

// Minimum-norm minimizer of the stacked weighted residual, built from the
// task map, metric and connection directly rather than from the quantities
// above.
Vector least_squares_oracle(const std::vector<TaskSpec>& tasks, const ChartPoint& p,
                            const Vector& v);

}  // namespace pbds
