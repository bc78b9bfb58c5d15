#include "pbds/simulator.h"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "pbds/error.h"

namespace pbds {

void validate(const IntegratorConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw Error(ErrorKind::kSchema, "dt must be > 0");
  if (!(cfg.horizon > 0.0)) throw Error(ErrorKind::kSchema, "horizon must be > 0");
  if (!(cfg.dt < cfg.horizon)) throw Error(ErrorKind::kSchema, "dt must be smaller than the horizon");
  if (!(cfg.velocity_stop_eps >= 0.0)) {
    throw Error(ErrorKind::kSchema, "velocity_stop_eps must be >= 0");
  }
  if (!(cfg.hysteresis >= 0.0)) throw Error(ErrorKind::kSchema, "hysteresis must be >= 0");
}

const char* to_string(TrajectoryStatus status) {
  switch (status) {
    case TrajectoryStatus::kCompleted: return "completed";
    case TrajectoryStatus::kCollision: return "collision";
    case TrajectoryStatus::kNonFinite: return "non-finite";
    case TrajectoryStatus::kSingular: return "singular";
    case TrajectoryStatus::kOutOfDomain: return "out-of-domain";
  }
  return "unknown";
}

double lyapunov_value(const std::vector<TaskSpec>& tasks, const ChartPoint& p, const Vector& v) {
  double total = 0.0;
  for (const auto& t : tasks) {
    const ChartPoint y = t.map.value(p);
    const Vector y_dot = jacobian(t.map, p) * v;
    total += 0.5 * y_dot.dot(t.metric.value(y) * y_dot) + t.potential(y);
  }
  return total;
}

int select_chart_with_hysteresis(const Manifold& m, int current, const EmbeddedPoint& e,
                                 double band) {
  if (m.is_sphere()) {
    const double last = e.coords(e.coords.size() - 1);
    if (current == kSouthChart && last < -band) return kNorthChart;
    if (current == kNorthChart && last > band) return kSouthChart;
    return current;
  }
  if (m.is_product()) {
    const auto charts = decode_chart(m, current);
    const auto offs = factor_embedding_offsets(m);
    std::vector<int> next;
    for (size_t i = 0; i < m.factors().size(); ++i) {
      const auto& f = m.factors()[i];
      next.push_back(select_chart_with_hysteresis(
          f, charts[i], {e.coords.segment(offs[i], f.embedding_dimension())}, band));
    }
    return encode_chart(m, next);
  }
  return current;
}

namespace {

// Renormalizes sphere factors of an embedded point.
Vector project_embedded(const Manifold& m, Vector e) {
  if (m.is_sphere()) return e.normalized();
  if (m.is_product()) {
    const auto offs = factor_embedding_offsets(m);
    for (size_t i = 0; i < m.factors().size(); ++i) {
      const auto& f = m.factors()[i];
      e.segment(offs[i], f.embedding_dimension()) =
          project_embedded(f, e.segment(offs[i], f.embedding_dimension()));
    }
  }
  return e;
}

TrajectoryStatus status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kCollision: return TrajectoryStatus::kCollision;
    case ErrorKind::kNonFinite: return TrajectoryStatus::kNonFinite;
    case ErrorKind::kSingular: return TrajectoryStatus::kSingular;
    default: return TrajectoryStatus::kOutOfDomain;
  }
}

void check_clearance(const std::vector<TaskSpec>& tasks, const ChartPoint& p) {
  for (const auto& t : tasks) {
    if (t.role != TaskRole::kConstraint) continue;
    const ChartPoint y = t.map.value(p);
    if (!(y.coords(0) > 0.0)) {
      throw Error(ErrorKind::kCollision, "constraint " + t.name + " violated");
    }
  }
}

struct Derivative {
  Vector dq;
  Vector dv;
};

}  // namespace

double embedded_speed(const Manifold& m, const TangentState& s) {
  return (embedding_jacobian(m, s.point) * s.velocity).norm();
}

Trajectory integrate(const Manifold& m, const PolicyFn& policy, const std::vector<TaskSpec>& tasks,
                     const TangentState& initial, const IntegratorConfig& cfg) {
  validate(cfg);
  validate(m, initial);
  Trajectory traj(m);
  const long steps = std::lround(cfg.horizon / cfg.dt);
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.embedded.reserve(steps + 1);
  traj.lyapunov.reserve(steps + 1);
  traj.diagnostics.reserve(steps + 1);

  const EmbeddedPoint e0 = chart_to_embedding(m, initial.point);
  TangentState state = transition_tangent(m, initial, select_chart(m, e0, cfg.scheme));

  auto record = [&](double t, const TangentState& s, const PolicyOutput* out) {
    traj.times.push_back(t);
    traj.states.push_back(s);
    traj.embedded.push_back(chart_to_embedding(m, s.point));
    traj.lyapunov.push_back(lyapunov_value(tasks, s.point, s.velocity));
    StepDiagnostics d;
    if (out) {
      d.condition_number = out->condition_number;
      d.active_tasks = out->active_tasks;
    }
    traj.diagnostics.push_back(d);
  };

  try {
    check_clearance(tasks, state.point);
    record(0.0, state, nullptr);
    for (long step = 1; step <= steps; ++step) {
      const int chart = state.point.chart;
      auto eval = [&](const Vector& q, const Vector& v, PolicyOutput* keep) {
        const PolicyOutput out = policy(TangentState{{chart, q}, v});
        if (!out.acceleration.allFinite()) {
          throw Error(ErrorKind::kNonFinite, "policy returned a non-finite acceleration");
        }
        if (keep) *keep = out;
        return Derivative{v, out.acceleration};
      };
      const Vector& q = state.point.coords;
      const Vector& v = state.velocity;
      const double h = cfg.dt;
      PolicyOutput first;
      Vector q_next;
      Vector v_next;
      if (cfg.method == IntegrationMethod::kEuler) {
        const Derivative k1 = eval(q, v, &first);
        q_next = q + h * k1.dq;
        v_next = v + h * k1.dv;
      } else {
        const Derivative k1 = eval(q, v, &first);
        const Derivative k2 = eval(q + 0.5 * h * k1.dq, v + 0.5 * h * k1.dv, nullptr);
        const Derivative k3 = eval(q + 0.5 * h * k2.dq, v + 0.5 * h * k2.dv, nullptr);
        const Derivative k4 = eval(q + h * k3.dq, v + h * k3.dv, nullptr);
        q_next = q + (h / 6.0) * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq);
        v_next = v + (h / 6.0) * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
      }
      if (!q_next.allFinite() || !v_next.allFinite()) {
        throw Error(ErrorKind::kNonFinite, "integration produced a non-finite state");
      }
      TangentState next{{chart, q_next}, v_next};
      // Drift correction through the embedding round trip.
      const Vector e = project_embedded(m, chart_to_embedding(m, next.point).coords);
      next.point = embedding_to_chart(m, {e}, chart);

      int target = chart;
      if (cfg.scheme.kind == ChartScheme::Kind::kHemisphere) {
        target = select_chart_with_hysteresis(m, chart, {e}, cfg.hysteresis);
      }
      if (target != chart) {
        next = transition_tangent(m, next, target);
        ++traj.chart_switches;
      }
      check_clearance(tasks, next.point);
      // Diagnostics describe the policy at the start of the step.
      traj.diagnostics.back() = {first.condition_number, first.active_tasks};
      record(static_cast<double>(step) * h, next, nullptr);
      state = next;
    }
  } catch (const Error& err) {
    traj.status = status_for(err.kind());
    traj.message = err.what();
  }
  return traj;
}

ConvergenceReport check_convergence(const Trajectory& traj, const std::vector<TaskSpec>& tasks,
                                    double tail_fraction, double velocity_eps,
                                    double gradient_tol) {
  ConvergenceReport r;
  if (traj.size() == 0) return r;
  for (size_t i = 1; i < traj.size(); ++i) {
    const double inc = traj.lyapunov[i] - traj.lyapunov[i - 1];
    r.max_lyapunov_increase = std::max(r.max_lyapunov_increase, inc);
    if (inc > kLyapunovTolerance) ++r.lyapunov_violations;
    if (embedded_speed(traj.manifold, traj.states[i - 1]) > kStrictDecreaseSpeed && !(inc < 0.0)) {
      ++r.non_strict_decreases;
    }
  }
  const size_t tail = std::max<size_t>(1, static_cast<size_t>(std::ceil(tail_fraction * traj.size())));
  const Vector zero = Vector::Zero(traj.manifold.dimension());
  for (size_t i = traj.size() - tail; i < traj.size(); ++i) {
    const TangentState& s = traj.states[i];
    r.max_tail_speed = std::max(r.max_tail_speed, embedded_speed(traj.manifold, s));
    for (const auto& t : tasks) {
      const ChartPoint y = t.map.value(s.point);
      if (weight_is_zero(t.weight(y, Vector::Zero(y.coords.size())))) continue;
      const double g = sharp_gradient(t.metric, y, t.potential_gradient(y)).norm();
      r.max_tail_gradient = std::max(r.max_tail_gradient, g);
    }
  }
  r.velocity_settled = r.max_tail_speed < velocity_eps;
  r.gradients_vanish = r.max_tail_gradient < gradient_tol;
  r.converged = traj.completed() && r.velocity_settled && r.gradients_vanish;
  return r;
}

double trajectory_deviation(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "trajectories have different lengths");
  }
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a.times[i] - b.times[i]) > 1e-9) {
      throw Error(ErrorKind::kDimensionMismatch, "trajectories use different time grids");
    }
    worst = std::max(worst, (a.embedded[i].coords - b.embedded[i].coords).norm());
  }
  return worst;
}

void write_csv(const Trajectory& traj, std::ostream& os) {
  const int m = traj.manifold.dimension();
  const int d = traj.manifold.embedding_dimension();
  os << "t,chart_id";
  for (int i = 1; i <= m; ++i) os << ",q" << i;
  for (int i = 1; i <= m; ++i) os << ",v" << i;
  for (int i = 1; i <= d; ++i) os << ",e" << i;
  os << ",V\n";
  os << std::setprecision(17);
  for (size_t k = 0; k < traj.size(); ++k) {
    const TangentState& s = traj.states[k];
    os << traj.times[k] << ',' << s.point.chart;
    for (int i = 0; i < m; ++i) os << ',' << s.point.coords(i);
    for (int i = 0; i < m; ++i) os << ',' << s.velocity(i);
    for (int i = 0; i < d; ++i) os << ',' << traj.embedded[k].coords(i);
    os << ',' << traj.lyapunov[k] << '\n';
  }
}

}  // namespace pbds
