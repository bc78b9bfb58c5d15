#include "pbds/tasks.h"

#include <cmath>
#include <random>
#include <sstream>

#include "pbds/error.h"

namespace pbds {

namespace {

ChartPotentialFn zero_potential() {
  return [](const ChartPoint&) { return 0.0; };
}

ChartGradientFn zero_gradient() {
  return [](const ChartPoint& y) -> Vector { return Vector::Zero(y.coords.size()); };
}

ChartForceFn zero_force() {
  return [](const ChartPoint& y, const Vector&) -> Vector { return Vector::Zero(y.coords.size()); };
}

ChartWeightFn identity_weight() {
  return [](const ChartPoint& y, const Vector&) -> Matrix {
    return Matrix::Identity(y.coords.size(), y.coords.size());
  };
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TaskSpec::TaskSpec(std::string name, TaskMap map, MetricField metric)
    : name(std::move(name)),
      map(std::move(map)),
      metric(std::move(metric)),
      potential(zero_potential()),
      potential_gradient(zero_gradient()),
      dissipative_force(zero_force()),
      weight(identity_weight()),
      weighted_dimension(this->map.codomain.dimension()) {
  if (this->metric.dimension != this->map.codomain.dimension()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "task " + this->name + ": metric dimension differs from codomain dimension");
  }
}

void validate(const BarrierParams& params) {
  if (!(params.a > 0.0)) throw Error(ErrorKind::kSchema, "barrier parameter a must be > 0");
  if (!(params.b > 1.0)) throw Error(ErrorKind::kSchema, "barrier parameter b must be > 1");
  if (!(params.beta > 0.0)) throw Error(ErrorKind::kSchema, "activation radius must be > 0");
  if (params.smooth && !(params.eps > 0.0)) {
    throw Error(ErrorKind::kSchema, "smooth activation width must be > 0");
  }
}

double constraint_activation(const BarrierParams& params, double x, double xdot) {
  if (params.smooth) {
    const double approach = logistic(-xdot / params.eps);
    const double inside = std::isinf(params.beta) ? 1.0 : logistic((params.beta - x) / params.eps);
    return approach * inside;
  }
  return (xdot < 0.0 && x < params.beta) ? 1.0 : 0.0;
}

TaskSpec make_attractor_task(const TaskMap& distance) {
  if (distance.codomain.dimension() != 1) {
    throw Error(ErrorKind::kDimensionMismatch, "attractor distance map must be scalar");
  }
  TaskSpec t("attractor", distance, MetricField::Identity(1));
  t.role = TaskRole::kAttractor;
  t.potential = [](const ChartPoint& y) { return y.coords(0) * y.coords(0); };
  t.potential_gradient = [](const ChartPoint& y) -> Vector { return 2.0 * y.coords; };
  return t;
}

TaskSpec make_attractor_task(const Manifold& on, const EmbeddedPoint& goal) {
  if (on.is_sphere()) {
    // Validates the goal against the manifold before normalizing.
    embedding_to_chart(on, goal);
    return make_attractor_task(compose(embedding_map(on), sphere_angle_map(goal.coords.normalized())));
  }
  if (on.kind() == ManifoldKind::kEuclidean) {
    if (goal.coords.size() != on.dimension()) {
      throw Error(ErrorKind::kDimensionMismatch, "attractor goal dimension mismatch");
    }
    return make_attractor_task(euclidean_distance_map(goal.coords));
  }
  throw Error(ErrorKind::kSchema, "attractor tasks need a sphere or Euclidean manifold, got " +
                                      on.describe());
}

TaskSpec make_attractor_task(const Manifold& on, const ChartPoint& goal) {
  return make_attractor_task(on, chart_to_embedding(on, goal));
}

TaskSpec make_damping_task(const Manifold& on, double c) {
  if (!(c > 0.0)) throw Error(ErrorKind::kSchema, "damping coefficient must be > 0");
  const int d = on.embedding_dimension();
  AmbientComponents ambient;
  ambient.metric = Matrix::Identity(d, d);
  ambient.weight = Matrix::Identity(d, d);
  ambient.dissipative_force = [c](const Vector&, const Vector& xdot) -> Vector {
    return -c * xdot;
  };
  ChartComponents chart = pullback_through_embedding(ambient, on);
  TaskSpec t("damping", identity_map(on), chart.metric);
  t.role = TaskRole::kDamping;
  t.dissipative_force = chart.dissipative_force;
  t.weight = chart.weight;
  return t;
}

TaskSpec make_constraint_task(const TaskMap& distance, const BarrierParams& params) {
  validate(params);
  if (distance.codomain.dimension() != 1) {
    throw Error(ErrorKind::kDimensionMismatch, "constraint distance map must be scalar");
  }
  TaskSpec t("constraint", distance, MetricField::Barrier(params.a, params.b));
  t.role = TaskRole::kConstraint;
  t.weight = [params](const ChartPoint& y, const Vector& ydot) -> Matrix {
    return Matrix::Constant(1, 1, constraint_activation(params, y.coords(0), ydot(0)));
  };
  return t;
}

TaskSpec make_obstacle_task(const Manifold& on, const Vector& center, double radius,
                            const BarrierParams& params) {
  if (center.size() != on.embedding_dimension()) {
    throw Error(ErrorKind::kDimensionMismatch, "obstacle center must live in the embedding space");
  }
  TaskSpec t = make_constraint_task(compose(embedding_map(on), ball_clearance_map(center, radius)),
                                    params);
  t.name = "obstacle";
  return t;
}

TaskSpec toggle_by_distance(const TaskSpec& task, const TaskMap& distance,
                            TogglePredicate predicate) {
  if (!(task.map.domain == distance.domain)) {
    throw Error(ErrorKind::kDimensionMismatch, "toggle distance must share the task domain");
  }
  if (distance.codomain.dimension() != 1) {
    throw Error(ErrorKind::kDimensionMismatch, "toggle distance map must be scalar");
  }
  const TaskMap scalar_distance = [&] {
    // The appended factor is R regardless of whether the distance is R+.
    TaskMap d(distance.domain, Manifold::Euclidean(1), distance.name);
    d.value = distance.value;
    d.jacobian = distance.jacobian;
    d.jacobian_dot = distance.jacobian_dot;
    return d;
  }();
  const TaskMap map = product_map({task.map, scalar_distance});
  const Manifold codomain = map.codomain;
  const int n = task.map.codomain.dimension();

  auto split = [codomain](const ChartPoint& y) { return split_point(codomain, y); };
  auto head = [n](const Vector& v) -> Vector { return v.head(n); };

  const MetricField g0 = task.metric;
  MetricField g;
  g.dimension = n + 1;
  g.name = g0.name + "+toggle";
  g.value = [g0, split, n](const ChartPoint& y) {
    Matrix out = Matrix::Zero(n + 1, n + 1);
    out.topLeftCorner(n, n) = g0.value(split(y)[0]);
    out(n, n) = 1.0;
    return out;
  };
  g.closed_form = [g0, split, n](const ChartPoint& y) {
    const Christoffel c0 = christoffel(g0, split(y)[0]);
    Christoffel c(n + 1);
    for (int k = 0; k < n; ++k) c.slice(k).topLeftCorner(n, n) = c0.slice(k);
    return c;
  };

  TaskSpec t(task.name + "|toggled", map, g);
  t.role = task.role;
  const auto potential = task.potential;
  const auto gradient = task.potential_gradient;
  const auto force = task.dissipative_force;
  const auto weight = task.weight;
  t.potential = [potential, split](const ChartPoint& y) { return potential(split(y)[0]); };
  t.potential_gradient = [gradient, split, n](const ChartPoint& y) -> Vector {
    Vector out = Vector::Zero(n + 1);
    out.head(n) = gradient(split(y)[0]);
    return out;
  };
  t.dissipative_force = [force, split, head, n](const ChartPoint& y, const Vector& ydot) -> Vector {
    Vector out = Vector::Zero(n + 1);
    out.head(n) = force(split(y)[0], head(ydot));
    return out;
  };
  t.weight = [weight, predicate, split, head, n](const ChartPoint& y, const Vector& ydot) -> Matrix {
    Matrix out = Matrix::Zero(n + 1, n + 1);
    const auto parts = split(y);
    if (predicate(parts[1].coords(0), ydot(n))) {
      out.topLeftCorner(n, n) = weight(parts[0], head(ydot));
    }
    return out;
  };
  t.weighted_dimension = task.weighted_dimension;
  return t;
}

bool weight_is_zero(const Matrix& w) { return (w.array() == 0.0).all(); }

bool weight_is_pd_or_zero(const Matrix& w, int weighted_dimension, double tol) {
  const int n = static_cast<int>(w.rows());
  const int k = std::min(weighted_dimension, n);
  // Everything outside the leading block must vanish.
  Matrix rest = w;
  rest.topLeftCorner(k, k).setZero();
  if (rest.cwiseAbs().maxCoeff() > tol) return false;
  if (k == 0) return true;
  const Matrix block = 0.5 * (w.topLeftCorner(k, k) + w.topLeftCorner(k, k).transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(block, Eigen::EigenvaluesOnly);
  const Vector& ev = eig.eigenvalues();
  if (ev.cwiseAbs().maxCoeff() <= tol) return true;
  return ev(0) > tol;
}

bool AssumptionReport::a1() const {
  for (const auto& s : samples) if (!s.a1) return false;
  return true;
}
bool AssumptionReport::a2() const {
  for (const auto& s : samples) if (!s.a2) return false;
  return true;
}
bool AssumptionReport::a3() const {
  for (const auto& s : samples) if (!s.a3) return false;
  return true;
}

AssumptionReport check_assumptions(const std::vector<TaskSpec>& tasks,
                                   const std::vector<TangentState>& states,
                                   int velocity_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  AssumptionReport report;
  for (const auto& state : states) {
    AssumptionSample sample;
    sample.state = state;
    std::ostringstream detail;
    const ChartPoint& p = state.point;
    const int m = static_cast<int>(p.coords.size());

    std::vector<Matrix> weighted_rows;
    Eigen::Index rows = 0;
    for (const auto& t : tasks) {
      const MapEvaluation e = evaluate(t.map, p, state.velocity);
      const Matrix w = t.weight(e.y, e.y_dot);
      if (!weight_is_pd_or_zero(w, t.weighted_dimension)) {
        sample.a1 = false;
        detail << "A1: weight of " << t.name << " is neither PD nor zero; ";
      }
      if (!weight_is_zero(w)) {
        weighted_rows.push_back(e.J.topRows(t.weighted_dimension));
        rows += t.weighted_dimension;
      }
    }
    Matrix stacked(rows, m);
    Eigen::Index r = 0;
    for (const auto& j : weighted_rows) {
      stacked.middleRows(r, j.rows()) = j;
      r += j.rows();
    }
    const int rank = rows == 0 ? 0 : numerical_rank(stacked, 1e-8);
    if (rank < m) {
      sample.a2 = false;
      detail << "A2: weighted Jacobian rank " << rank << " < " << m << "; ";
    }

    std::vector<Vector> velocities;
    if (state.velocity.norm() > 0.0) velocities.push_back(state.velocity);
    for (int i = 0; i < velocity_samples; ++i) {
      Vector v(m);
      for (int k = 0; k < m; ++k) v(k) = normal(rng);
      velocities.push_back(v);
    }
    for (const auto& v : velocities) {
      double power = 0.0;
      for (const auto& t : tasks) {
        const ChartPoint y = t.map.value(p);
        const Vector ydot = jacobian(t.map, p) * v;
        if (weight_is_zero(t.weight(y, ydot))) continue;
        power += t.dissipative_force(y, ydot).dot(ydot);
      }
      if (!(power < 0.0)) {
        sample.a3 = false;
        detail << "A3: dissipated power " << power << " >= 0; ";
        break;
      }
    }
    sample.detail = detail.str();
    report.samples.push_back(std::move(sample));
  }
  return report;
}

}  // namespace pbds
