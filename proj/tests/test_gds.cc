#include <doctest.h>

#include "pbds/error.h"
#include "pbds/gds.h"
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

BlockVelocityMetric identity_blocks(int d) {
  const Matrix id = Matrix::Identity(d, d);
  return {[id](const Vector&, const Vector&) { return id; }, [id](const Vector&, const Vector&) { return id; }};
}

}  // namespace

TEST_CASE("affine transitions keep the bundle metric block diagonal") {
  Rng rng(50);
  for (int i = 0; i < 20; ++i) {
    const Matrix a = random_matrix(rng, 3, 3) + 2.0 * Matrix::Identity(3, 3);
    const Vector b = random_vector(rng, 3);
    const Matrix gv = random_spd(rng, 3), ga = random_spd(rng, 3);
    const BlockVelocityMetric g{[gv](const Vector&, const Vector&) { return gv; },
                                [ga](const Vector&, const Vector&) { return ga; }};
    const Matrix h = transition_bundle_metric(g, [a, b](const Vector& x) { return Vector(a * x + b); },
                                              random_vector(rng, 3), random_vector(rng, 3));
    const double scale = h.norm();
    CHECK(h.topRightCorner(3, 3).norm() < 1e-8 * scale);
    CHECK(h.bottomLeftCorner(3, 3).norm() < 1e-8 * scale);
    CHECK((h.topLeftCorner(3, 3) - a.transpose() * gv * a).norm() < 1e-8 * scale);
    CHECK((h.bottomRightCorner(3, 3) - a.transpose() * ga * a).norm() < 1e-8 * scale);
  }
}

TEST_CASE("sphere chart transition couples position and velocity") {
  const Vector p = vec({2, 0}), v = vec({1, 0});
  const Matrix h = transition_bundle_metric(identity_blocks(2), inversion, p, v);
  const Matrix j = inversion_jacobian(p);
  const Matrix jav = inversion_jacobian_dot(p, v);
  CHECK(h.topRightCorner(2, 2).norm() > 0.01);
  CHECK((h.topRightCorner(2, 2) - h.bottomLeftCorner(2, 2).transpose()).norm() < 1e-12);
  CHECK((h.topLeftCorner(2, 2) - j.transpose() * j).norm() > 0.01);
  CHECK((h.topLeftCorner(2, 2) - (j.transpose() * j + jav.transpose() * jav)).norm() < 1e-8);
  CHECK((h.topRightCorner(2, 2) - jav.transpose() * j).norm() < 1e-8);
  CHECK((h.bottomRightCorner(2, 2) - j.transpose() * j).norm() < 1e-8);
}

TEST_CASE("tangent lift against the analytic inversion derivatives") {
  Rng rng(51);
  for (int i = 0; i < 50; ++i) {
    Vector p = random_vector(rng, 2, 2.0);
    if (p.norm() < 0.5) continue;
    const Vector v = random_vector(rng, 2);
    const Matrix lift = tangent_lift_jacobian(inversion, p, v);
    const double scale = std::max(1.0, inversion_jacobian_dot(p, v).norm());
    CHECK((lift.topLeftCorner(2, 2) - inversion_jacobian(p)).norm() < 1e-8);
    CHECK((lift.bottomRightCorner(2, 2) - inversion_jacobian(p)).norm() < 1e-8);
    CHECK((lift.bottomLeftCorner(2, 2) - inversion_jacobian_dot(p, v)).norm() < 1e-6 * scale);
    CHECK(lift.topRightCorner(2, 2).norm() == 0.0);
  }
}

TEST_CASE("rest states stay block diagonal") {
  const Matrix h = transition_bundle_metric(identity_blocks(2), inversion, vec({0.7, -1.3}), vec({0, 0}));
  CHECK(h.topRightCorner(2, 2).norm() == 0.0);
  CHECK(h.bottomLeftCorner(2, 2).norm() == 0.0);
}

TEST_CASE("gds matches pbds on Euclidean space") {
  Rng rng(52);
  const Manifold r3 = Manifold::Euclidean(3);
  for (int i = 0; i < 50; ++i) {
    const Vector goal = random_vector(rng, 3);
    const std::vector<TaskSpec> tasks = {make_attractor_task(r3, EmbeddedPoint{goal}), make_damping_task(r3, 2.0),
                                         random_task(rng, 3, 2)};
    const std::vector<GdsTask> gds = {gds_from_pbds(tasks[0]), gds_damping(r3, 2.0), gds_from_pbds(tasks[2])};
    const ChartPoint p{0, random_vector(rng, 3)};
    const Vector v = random_vector(rng, 3);
    CHECK(relative_gap(gds_combine(gds, p, v).acceleration, combine(tasks, p, v).acceleration) < 1e-12);
  }
}

TEST_CASE("gds damping differs from pbds on the sphere when moving") {
  const Manifold s2 = Manifold::Sphere2();
  const GdsTask t = gds_damping(s2, 4.0);
  const ChartPoint y{kSouthChart, vec({0.6, -0.4})};
  const Vector moving = vec({0.8, 0.5});
  const Matrix round = t.task.metric.value(y);
  CHECK((gds_velocity_block(t, y, Vector::Zero(2)) - round).norm() < 1e-12);
  CHECK((gds_velocity_block(t, y, moving) - round).norm() > 1e-3);
  const Vector goal = vec({0, 0.6, -0.8});
  const std::vector<TaskSpec> flat = {make_attractor_task(s2, EmbeddedPoint{goal}), t.task};
  const std::vector<GdsTask> gds = {gds_from_pbds(flat[0]), t};
  CHECK(relative_gap(gds_combine(gds, y, moving).acceleration, combine(flat, y, moving).acceleration) > 1e-4);
  CHECK(relative_gap(gds_combine(gds, y, Vector::Zero(2)).acceleration,
                     combine(flat, y, Vector::Zero(2)).acceleration) < 1e-10);
  CHECK_THROWS_AS(gds_combine({}, y, moving), Error);
}
