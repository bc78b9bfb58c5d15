#include <exception>

#include "pbds/error.h"
#include "pbds/policy.h"

namespace pbds {

PolicyOutput combine_parallel(const std::vector<TaskSpec>& tasks, const ChartPoint& p,
                              const Vector& v) {
  if (tasks.empty()) throw Error(ErrorKind::kDimensionMismatch, "policy needs at least one task");
  const int n = static_cast<int>(tasks.size());
  std::vector<TaskAcceleration> qs(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    try {
      qs[i] = task_quantities(tasks[i], p, v);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return fuse(qs, static_cast<int>(p.coords.size()));
}

std::vector<Vector> evaluate_batch_parallel(const std::vector<TaskSpec>& tasks,
                                            const std::vector<TangentState>& states) {
  const int n = static_cast<int>(states.size());
  std::vector<Vector> out(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < n; ++i) {
    try {
      out[i] = combine(tasks, states[i].point, states[i].velocity).acceleration;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace pbds
