#include "pbds/policy.h"

#include <cmath>
#include <limits>

#include "pbds/error.h"

namespace pbds {

TaskAcceleration task_quantities(const TaskSpec& task, const ChartPoint& p, const Vector& v) {
  TaskAcceleration q;
  const MapEvaluation e = evaluate(task.map, p, v);
  q.y = e.y;
  q.y_dot = e.y_dot;
  q.Jf = e.J;
  q.Jf_dot = e.J_dot;
  q.w_a = task.weight(e.y, e.y_dot);
  const Eigen::Index n = e.J.rows();
  const Eigen::Index m = e.J.cols();
  if (weight_is_zero(q.w_a)) {
    q.Xi = Matrix::Zero(n, m);
    q.A = Vector::Zero(n);
    return q;
  }
  q.active = true;
  const Matrix g = task.metric.value(e.y);
  const Christoffel gamma = christoffel(task.metric, e.y);
  q.Xi = gamma.contract_last(e.y_dot) * e.J;
  const Vector rhs = task.dissipative_force(e.y, e.y_dot) - task.potential_gradient(e.y);
  q.A = solve_metric(g, rhs) - (e.J_dot + q.Xi) * v;
  if (!q.A.allFinite() || !q.Jf.allFinite() || !q.Jf_dot.allFinite()) {
    throw Error(ErrorKind::kNonFinite, "task " + task.name + " produced non-finite quantities");
  }
  return q;
}

PolicyOutput fuse(const std::vector<TaskAcceleration>& quantities, int dimension) {
  Matrix mass = Matrix::Zero(dimension, dimension);
  Vector force = Vector::Zero(dimension);
  PolicyOutput out;
  for (const auto& q : quantities) {
    if (!q.active) continue;
    ++out.active_tasks;
    const Matrix jtw = q.Jf.transpose() * q.w_a;
    mass.noalias() += jtw * q.Jf;
    force.noalias() += jtw * q.A;
  }
  if (out.active_tasks == 0) {
    out.acceleration = Vector::Zero(dimension);
    out.all_weights_zero = true;
    out.condition_number = std::numeric_limits<double>::infinity();
    out.residuals.assign(quantities.size(), 0.0);
    return out;
  }
  Eigen::JacobiSVD<Matrix> svd(mass, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = kPinvRelativeCutoff * s(0);
  Vector s_inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) s_inv(i) = 1.0 / s(i);
  }
  out.acceleration = svd.matrixV() * (s_inv.asDiagonal() * (svd.matrixU().transpose() * force));
  const double smin = s(s.size() - 1);
  out.condition_number = smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
  if (!out.acceleration.allFinite()) {
    throw Error(ErrorKind::kNonFinite, "policy acceleration is not finite");
  }
  out.residuals.reserve(quantities.size());
  for (const auto& q : quantities) {
    if (!q.active) {
      out.residuals.push_back(0.0);
      continue;
    }
    const Vector r = q.Jf * out.acceleration - q.A;
    out.residuals.push_back(std::sqrt(std::max(0.0, r.dot(q.w_a * r))));
  }
  return out;
}

PolicyOutput combine(const std::vector<TaskSpec>& tasks, const ChartPoint& p, const Vector& v) {
  if (tasks.empty()) throw Error(ErrorKind::kDimensionMismatch, "policy needs at least one task");
  std::vector<TaskAcceleration> qs;
  qs.reserve(tasks.size());
  for (const auto& t : tasks) qs.push_back(task_quantities(t, p, v));
  return fuse(qs, static_cast<int>(p.coords.size()));
}

std::vector<Vector> evaluate_batch(const std::vector<TaskSpec>& tasks,
                                   const std::vector<TangentState>& states) {
  std::vector<Vector> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(combine(tasks, s.point, s.velocity).acceleration);
  return out;
}

}  // namespace pbds
