#include "pbds/gds.h"

#include "pbds/error.h"

namespace pbds {

namespace {

constexpr double kLiftStep = 1e-4;
constexpr double kDeltaStep = 1e-6;

Matrix fd_jacobian(const CoordinateMap& phi, const Vector& p, double h) {
  const Vector y0 = phi(p);
  Matrix j(y0.size(), p.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    Vector a = p;
    Vector b = p;
    a(k) += h;
    b(k) -= h;
    j.col(k) = (phi(a) - phi(b)) / (2.0 * h);
  }
  return j;
}

}  // namespace

Matrix tangent_lift_jacobian(const CoordinateMap& phi, const Vector& p, const Vector& v) {
  const Eigen::Index m = p.size();
  const Matrix jv = fd_jacobian(phi, p, 1e-6);
  const Eigen::Index d = jv.rows();
  Matrix jav = Matrix::Zero(d, m);
  const double speed = v.norm();
  if (speed > 0.0) {
    const double h = kLiftStep;
    const double t = kLiftStep / std::max(1.0, speed);
    for (Eigen::Index i = 0; i < m; ++i) {
      Vector e = Vector::Zero(m);
      e(i) = h;
      jav.col(i) = (phi(p + e + t * v) - phi(p + e - t * v) - phi(p - e + t * v) +
                    phi(p - e - t * v)) /
                   (4.0 * h * t);
    }
  }
  Matrix lift = Matrix::Zero(2 * d, 2 * m);
  lift.topLeftCorner(d, m) = jv;
  lift.bottomLeftCorner(d, m) = jav;
  lift.bottomRightCorner(d, m) = jv;
  return lift;
}

Matrix transition_bundle_metric(const BlockVelocityMetric& g, const CoordinateMap& phi,
                                const Vector& p_hat, const Vector& v_hat) {
  const Matrix lift = tangent_lift_jacobian(phi, p_hat, v_hat);
  const Eigen::Index d = lift.rows() / 2;
  const Eigen::Index m = lift.cols() / 2;
  const Vector p_tilde = phi(p_hat);
  const Vector v_tilde = lift.topLeftCorner(d, m) * v_hat;
  Matrix blocks = Matrix::Zero(2 * d, 2 * d);
  blocks.topLeftCorner(d, d) = g.gv(p_tilde, v_tilde);
  blocks.bottomRightCorner(d, d) = g.ga(p_tilde, v_tilde);
  return lift.transpose() * blocks * lift;
}

GdsTask gds_from_pbds(const TaskSpec& task) { return GdsTask{task, std::nullopt, Matrix()}; }

GdsTask gds_damping(const Manifold& on, double c) {
  const int d = on.embedding_dimension();
  return GdsTask{make_damping_task(on, c), embedding_map(on), Matrix::Identity(d, d)};
}

namespace {

// Velocity-block correction Jav^T G Jav with the task velocity held fixed.
Matrix velocity_correction(const GdsTask& t, const ChartPoint& y, const Vector& y_dot) {
  const Matrix jav = jacobian_dot(*t.design, y, y_dot);
  return jav.transpose() * t.design_metric * jav;
}

}  // namespace

Matrix gds_velocity_block(const GdsTask& t, const ChartPoint& y, const Vector& y_dot) {
  if (!t.design) return t.task.metric.value(y);
  const Matrix j = jacobian(*t.design, y);
  return j.transpose() * t.design_metric * j + velocity_correction(t, y, y_dot);
}

PolicyOutput gds_combine(const std::vector<GdsTask>& tasks, const ChartPoint& p,
                         const Vector& v) {
  if (tasks.empty()) throw Error(ErrorKind::kDimensionMismatch, "policy needs at least one task");
  std::vector<TaskAcceleration> qs;
  qs.reserve(tasks.size());
  for (const auto& t : tasks) {
    if (!t.design) {
      qs.push_back(task_quantities(t.task, p, v));
      continue;
    }
    TaskAcceleration q;
    const MapEvaluation e = evaluate(t.task.map, p, v);
    q.y = e.y;
    q.y_dot = e.y_dot;
    q.Jf = e.J;
    q.Jf_dot = e.J_dot;
    q.w_a = t.task.weight(e.y, e.y_dot);
    const Eigen::Index n = e.J.rows();
    if (weight_is_zero(q.w_a)) {
      q.Xi = Matrix::Zero(n, e.J.cols());
      q.A = Vector::Zero(n);
      qs.push_back(std::move(q));
      continue;
    }
    q.active = true;
    const Matrix g = gds_velocity_block(t, e.y, e.y_dot);
    // Metric derivative of the chart-local velocity block: the design
    // pullback analytically, the correction term by central differences.
    const Matrix jd = jacobian(*t.design, e.y);
    std::vector<Matrix> dg;
    dg.reserve(n);
    for (Eigen::Index h = 0; h < n; ++h) {
      const Vector dir = Vector::Unit(n, h);
      const Matrix dj = jacobian_dot(*t.design, e.y, dir);
      const Matrix sym = dj.transpose() * t.design_metric * jd;
      ChartPoint plus = e.y;
      ChartPoint minus = e.y;
      plus.coords(h) += kDeltaStep;
      minus.coords(h) -= kDeltaStep;
      const Matrix d_delta = (velocity_correction(t, plus, e.y_dot) -
                              velocity_correction(t, minus, e.y_dot)) /
                             (2.0 * kDeltaStep);
      dg.push_back(sym + sym.transpose() + d_delta);
    }
    const Christoffel gamma = levi_civita(g, dg);
    q.Xi = gamma.contract_last(e.y_dot) * e.J;
    const Vector forcing = t.task.dissipative_force(e.y, e.y_dot) - t.task.potential_gradient(e.y);
    q.A = solve_metric(g, forcing) - (e.J_dot + q.Xi) * v;
    qs.push_back(std::move(q));
  }
  return fuse(qs, static_cast<int>(p.coords.size()));
}

}  // namespace pbds
