#include <doctest.h>

#include <sstream>

#include "pbds/error.h"
#include "pbds/simulator.h"
#include "support.h"

using namespace pbds;
using namespace pbds::testing;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

PolicyFn flat_policy(const std::vector<TaskSpec>& tasks) {
  return [tasks](const TangentState& s) { return combine(tasks, s.point, s.velocity); };
}

// Identity task on R^n, g = I, Phi = |x|^2 / 2, F = -c v.
TaskSpec spring_task(int n, double c) {
  TaskSpec t("spring", identity_map(Manifold::Euclidean(n)), MetricField::Identity(n));
  t.potential = [](const ChartPoint& y) { return 0.5 * y.coords.squaredNorm(); };
  t.potential_gradient = [](const ChartPoint& y) { return y.coords; };
  t.dissipative_force = [c](const ChartPoint&, const Vector& yd) { return Vector(-c * yd); };
  return t;
}

std::vector<TaskSpec> sphere_tasks(const Vector& goal) {
  const Manifold s2 = Manifold::Sphere2();
  return {make_attractor_task(s2, EmbeddedPoint{goal}), make_damping_task(s2, 4.0)};
}

// Chart velocity whose embedded image is the tangential part of `ev`.
TangentState sphere_state(const Vector& e, const Vector& ev, int chart) {
  const Manifold s2 = Manifold::Sphere2();
  const ChartPoint p = embedding_to_chart(s2, {e}, chart);
  const Matrix j = embedding_jacobian(s2, p);
  return {p, (j.transpose() * j).ldlt().solve(j.transpose() * ev)};
}

Trajectory spring_run(double dt, IntegrationMethod method) {
  IntegratorConfig cfg;
  cfg.dt = dt;
  cfg.horizon = 2.0;
  cfg.method = method;
  const std::vector<TaskSpec> tasks = {spring_task(1, 0.0)};
  return integrate(Manifold::Euclidean(1), flat_policy(tasks), tasks, {{0, vec({1})}, vec({0})}, cfg);
}

double spring_error(const Trajectory& t) { return std::abs(t.states.back().point.coords(0) - std::cos(2.0)); }

Trajectory synthetic(const std::vector<double>& times, const std::vector<Vector>& points) {
  Trajectory t(Manifold::Euclidean(static_cast<int>(points.front().size())));
  for (size_t i = 0; i < times.size(); ++i) {
    t.times.push_back(times[i]);
    t.states.push_back({{0, points[i]}, Vector::Zero(points[i].size())});
    t.embedded.push_back({points[i]});
    t.lyapunov.push_back(0.0);
    t.diagnostics.push_back({});
  }
  return t;
}

}  // namespace

TEST_CASE("integrator config validation") {
  IntegratorConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.dt = 0.0;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg.dt = 1.0;
  cfg.horizon = 0.5;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg = {};
  cfg.hysteresis = -1.0;
  CHECK_THROWS_AS(validate(cfg), Error);
}

TEST_CASE("lightly damped free particle moves in a straight line") {
  IntegratorConfig cfg;
  cfg.dt = 1e-2;
  cfg.horizon = 1.0;
  const Manifold r2 = Manifold::Euclidean(2);
  const std::vector<TaskSpec> tasks = {make_damping_task(r2, 1e-9)};
  const Trajectory t = integrate(r2, flat_policy(tasks), tasks, {{0, vec({1, -1})}, vec({0.5, 2})}, cfg);
  REQUIRE(t.completed());
  CHECK(t.size() == 101);
  CHECK((t.states.back().point.coords - vec({1.5, 1})).norm() < 1e-6);
  CHECK((t.states.back().velocity - vec({0.5, 2})).norm() < 1e-6);
  const ConvergenceReport r = check_convergence(t, tasks);
  CHECK_FALSE(r.velocity_settled);
  CHECK_FALSE(r.converged);
}

TEST_CASE("sphere attractor reaches the pole") {
  IntegratorConfig cfg;
  cfg.horizon = 20.0;
  const Manifold s2 = Manifold::Sphere2();
  const Vector goal = vec({0, 0, 1});
  const auto tasks = sphere_tasks(goal);
  const Trajectory t = integrate(s2, flat_policy(tasks), tasks, sphere_state(vec({1, 0, 0}), vec({0, 0, 0}), 0), cfg);
  REQUIRE(t.completed());
  CHECK((t.embedded.back().coords - goal).norm() < 1e-3);
  double drift = 0.0;
  for (const auto& e : t.embedded) drift = std::max(drift, std::abs(e.coords.norm() - 1.0));
  CHECK(drift < 1e-9);
  const ConvergenceReport r = check_convergence(t, tasks);
  CHECK(r.converged);
  CHECK(r.lyapunov_violations == 0);
  CHECK(r.non_strict_decreases == 0);
}

TEST_CASE("lyapunov function examples") {
  CHECK(lyapunov_value({spring_task(2, 1.0)}, {0, vec({1, 2})}, vec({3, 0})) == doctest::Approx(7.0));
  const Manifold s2 = Manifold::Sphere2();
  const Vector goal = vec({0, 0.6, -0.8});
  const auto tasks = sphere_tasks(goal);
  const TangentState at_goal = sphere_state(goal, vec({0, 0, 0}), kNorthChart);
  CHECK(std::abs(lyapunov_value(tasks, at_goal.point, at_goal.velocity)) < 1e-20);
  // Damping task kinetic term is half the embedded speed squared.
  const std::vector<TaskSpec> damping = {make_damping_task(s2, 1.0)};
  const TangentState moving = sphere_state(vec({1, 0, 0}), vec({0, 0.6, 0.8}), kSouthChart);
  CHECK(lyapunov_value(damping, moving.point, moving.velocity) == doctest::Approx(0.5).epsilon(1e-12));

  Rng rng(60);
  for (int i = 0; i < 50; ++i) {
    const Vector e = random_unit(rng, 3);
    if (std::abs(e(2)) > 0.95) continue;
    const TangentState south = sphere_state(e, random_vector(rng, 3), kSouthChart);
    const TangentState north = transition_tangent(s2, south, kNorthChart);
    const double vs = lyapunov_value(tasks, south.point, south.velocity);
    const double vn = lyapunov_value(tasks, north.point, north.velocity);
    CHECK(std::abs(vs - vn) < 1e-10 * std::max(1.0, vs));
  }
}

TEST_CASE("rk4 is fourth order and euler first order") {
  const double rk_ratio = spring_error(spring_run(0.02, IntegrationMethod::kRk4)) /
                          spring_error(spring_run(0.01, IntegrationMethod::kRk4));
  CHECK(rk_ratio > 12.0);
  CHECK(rk_ratio < 20.0);
  const double euler_ratio = spring_error(spring_run(0.02, IntegrationMethod::kEuler)) /
                             spring_error(spring_run(0.01, IntegrationMethod::kEuler));
  CHECK(euler_ratio > 1.7);
  CHECK(euler_ratio < 2.3);
}

TEST_CASE("chart schemes agree and hemisphere switches charts") {
  IntegratorConfig cfg;
  cfg.horizon = 5.0;
  const Manifold s2 = Manifold::Sphere2();
  const Vector goal = vec({-0.3, 0.8, -0.5}).normalized();
  const auto tasks = sphere_tasks(goal);
  const TangentState start = sphere_state(vec({0.8, 0, 0.6}), vec({0, 0.6, 0}), kSouthChart);
  cfg.scheme = ChartScheme::Fixed(kSouthChart);
  const Trajectory south = integrate(s2, flat_policy(tasks), tasks, start, cfg);
  cfg.scheme = ChartScheme::Hemisphere();
  const Trajectory hemi = integrate(s2, flat_policy(tasks), tasks, start, cfg);
  REQUIRE(south.completed());
  REQUIRE(hemi.completed());
  CHECK(south.chart_switches == 0);
  CHECK(hemi.chart_switches > 0);
  CHECK(trajectory_deviation(south, hemi) < 1e-8);
}

TEST_CASE("hysteresis band") {
  const Manifold s2 = Manifold::Sphere2();
  const EmbeddedPoint near{vec({std::sqrt(1 - 0.005 * 0.005), 0, 0.005})};
  const EmbeddedPoint far{vec({std::sqrt(1 - 0.02 * 0.02), 0, 0.02})};
  CHECK(select_chart_with_hysteresis(s2, kNorthChart, near, 0.01) == kNorthChart);
  CHECK(select_chart_with_hysteresis(s2, kNorthChart, far, 0.01) == kSouthChart);
  CHECK(select_chart_with_hysteresis(s2, kSouthChart, near, 0.01) == kSouthChart);
}

TEST_CASE("aborts keep the partial trajectory") {
  const Manifold s2 = Manifold::Sphere2();
  const std::vector<TaskSpec> blocked = {make_damping_task(s2, 1.0),
                                         make_obstacle_task(s2, vec({1, 0, 0}), 0.5, BarrierParams{})};
  const Trajectory inside = integrate(s2, flat_policy(blocked), blocked,
                                      sphere_state(vec({1, 0, 0}), vec({0, 0, 0}), 0), IntegratorConfig{});
  CHECK(inside.status == TrajectoryStatus::kCollision);
  CHECK(inside.size() == 0);
  CHECK(std::string(to_string(inside.status)) == "collision");

  int calls = 0;
  const PolicyFn flaky = [&calls](const TangentState& s) {
    PolicyOutput out;
    out.acceleration = Vector::Zero(s.velocity.size());
    if (++calls > 40) out.acceleration(0) = std::nan("");
    return out;
  };
  IntegratorConfig cfg;
  cfg.horizon = 1.0;
  const std::vector<TaskSpec> tasks = {spring_task(1, 1.0)};
  const Trajectory t = integrate(Manifold::Euclidean(1), flaky, tasks, {{0, vec({0})}, vec({1})}, cfg);
  CHECK(t.status == TrajectoryStatus::kNonFinite);
  CHECK(t.size() == 11);
  CHECK_FALSE(t.message.empty());
}

TEST_CASE("convergence report on synthetic data") {
  const std::vector<TaskSpec> tasks = {spring_task(1, 1.0)};
  Trajectory rest = synthetic({0, 1, 2}, {vec({0}), vec({0}), vec({0})});
  CHECK(check_convergence(rest, tasks).converged);
  Trajectory away = synthetic({0, 1, 2}, {vec({0}), vec({0}), vec({0.5})});
  away.lyapunov = {0.0, 0.0, 0.125};
  const ConvergenceReport r = check_convergence(away, tasks);
  CHECK_FALSE(r.converged);
  CHECK_FALSE(r.gradients_vanish);
  CHECK(r.max_tail_gradient == doctest::Approx(0.5));
  CHECK(r.lyapunov_violations == 1);
  CHECK(r.max_lyapunov_increase == doctest::Approx(0.125));
}

TEST_CASE("trajectory deviation") {
  const Trajectory a = synthetic({0, 1}, {vec({0, 0, 1}), vec({1, 0, 0})});
  const Trajectory b = synthetic({0, 1}, {vec({0, 0, -1}), vec({-1, 0, 0})});
  CHECK(trajectory_deviation(a, a) == 0.0);
  CHECK(trajectory_deviation(a, b) == doctest::Approx(2.0));
  const Trajectory shifted = synthetic({0, 2}, {vec({0, 0, 1}), vec({1, 0, 0})});
  CHECK_THROWS_AS(trajectory_deviation(a, shifted), Error);
  const Trajectory shorter = synthetic({0}, {vec({0, 0, 1})});
  CHECK_THROWS_AS(trajectory_deviation(a, shorter), Error);
}

TEST_CASE("csv layout") {
  IntegratorConfig cfg;
  cfg.dt = 0.1;
  cfg.horizon = 0.3;
  const Manifold s2 = Manifold::Sphere2();
  const auto tasks = sphere_tasks(vec({0, 0, 1}));
  const Trajectory t = integrate(s2, flat_policy(tasks), tasks, sphere_state(vec({1, 0, 0}), vec({0, 0, 0}), 0), cfg);
  std::ostringstream os;
  write_csv(t, os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,chart_id,q1,q2,v1,v2,e1,e2,e3,V");
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 9);
    ++rows;
  }
  CHECK(rows == 4);
}
