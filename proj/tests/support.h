#pragma once

// Shared generators and independent oracles for the test binaries.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "pbds/manifold.h"
#include "pbds/riemannian.h"
#include "pbds/task_map.h"
#include "pbds/tasks.h"
#include "pbds/tree.h"

namespace pbds::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vector random_vector(Rng& rng, int n, double scale = 1.0) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = scale * uniform(rng);
  return v;
}

inline Matrix random_matrix(Rng& rng, int r, int c, double scale = 1.0) {
  Matrix a(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) a(i, j) = scale * uniform(rng);
  return a;
}

inline Matrix random_spd(Rng& rng, int n, double floor = 0.5) {
  const Matrix a = random_matrix(rng, n, n);
  return a * a.transpose() + floor * Matrix::Identity(n, n);
}

inline Vector random_unit(Rng& rng, int n) {
  std::normal_distribution<double> normal;
  Vector v(n);
  do {
    for (int i = 0; i < n; ++i) v(i) = normal(rng);
  } while (v.norm() < 1e-3);
  return v.normalized();
}

// Chart point on S^2 with |x| <= radius in the given chart.
inline ChartPoint random_sphere_point(Rng& rng, int chart, double radius = 2.0) {
  Vector x(2);
  do {
    x = random_vector(rng, 2, radius);
  } while (x.norm() > radius);
  return {chart, x};
}

// Standard inverse stereographic projection from the south pole.
inline Vector stereographic_south(const Vector& x) {
  const double s = x.squaredNorm();
  Vector e(x.size() + 1);
  e.head(x.size()) = 2.0 * x / (1.0 + s);
  e(x.size()) = (1.0 - s) / (1.0 + s);
  return e;
}

// Round metric in stereographic coordinates is lambda^2 I with
// lambda = 2 / (1 + |x|^2). Conformal Christoffel symbols:
// Gamma^k_ij = d_ik f_j + d_jk f_i - d_ij f_k, f = grad log lambda.
inline double conformal_sphere_christoffel(const Vector& x, int k, int i, int j) {
  const Vector f = -2.0 * x / (1.0 + x.squaredNorm());
  return (i == k ? f(j) : 0.0) + (j == k ? f(i) : 0.0) - (i == j ? f(k) : 0.0);
}

// Chart transition x / |x|^2 between the stereographic charts and its
// derivatives worked out by hand.
inline Vector inversion(const Vector& x) { return x / x.squaredNorm(); }

inline Matrix inversion_jacobian(const Vector& x) {
  const double r2 = x.squaredNorm();
  const int n = static_cast<int>(x.size());
  return Matrix::Identity(n, n) / r2 - 2.0 * x * x.transpose() / (r2 * r2);
}

inline Matrix inversion_jacobian_dot(const Vector& x, const Vector& v) {
  const double r2 = x.squaredNorm(), xv = x.dot(v);
  const int n = static_cast<int>(x.size());
  return -2.0 * xv / (r2 * r2) * Matrix::Identity(n, n) -
         2.0 * (v * x.transpose() + x * v.transpose()) / (r2 * r2) +
         8.0 * xv * x * x.transpose() / (r2 * r2 * r2);
}

// Smooth map R^m -> R^n, y = A x + b + alpha .* sin(C x), with exact
// first and velocity-contracted second derivatives.
inline TaskMap random_smooth_map(Rng& rng, int m, int n, double curvature = 0.3) {
  const Matrix a = random_matrix(rng, n, m);
  const Vector b = random_vector(rng, n);
  const Matrix c = random_matrix(rng, n, m);
  const Vector alpha = random_vector(rng, n, curvature);
  TaskMap f(Manifold::Euclidean(m), Manifold::Euclidean(n), "smooth");
  f.value = [=](const ChartPoint& p) {
    return ChartPoint{0, a * p.coords + b + alpha.cwiseProduct((c * p.coords).array().sin().matrix())};
  };
  f.jacobian = [=](const ChartPoint& p) {
    const Vector cs = (c * p.coords).array().cos().matrix();
    return Matrix(a + alpha.cwiseProduct(cs).asDiagonal() * c);
  };
  f.jacobian_dot = [=](const ChartPoint& p, const Vector& v) {
    const Vector sn = (c * p.coords).array().sin().matrix();
    const Vector cv = c * v;
    return Matrix((-alpha.cwiseProduct(sn).cwiseProduct(cv)).asDiagonal() * c);
  };
  return f;
}

// Diagonal metric exp(s_h y_h) on R^n with its analytic derivative.
inline MetricField exponential_metric(const Vector& s) {
  const int n = static_cast<int>(s.size());
  MetricField g;
  g.dimension = n;
  g.name = "exp-diag";
  g.value = [s](const ChartPoint& y) {
    return Matrix((s.cwiseProduct(y.coords)).array().exp().matrix().asDiagonal());
  };
  g.derivative = [s, n](const ChartPoint& y) {
    std::vector<Matrix> dg(n, Matrix::Zero(n, n));
    for (int h = 0; h < n; ++h) dg[h](h, h) = s(h) * std::exp(s(h) * y.coords(h));
    return dg;
  };
  return g;
}

// Random task on a Euclidean domain: smooth map, constant or exponential
// metric, quadratic potential, linear damping. Weight is PD, zero, or PD of
// lower rank in the map (tall-thin Jacobians make stacks rank deficient).
struct RandomTaskOptions {
  bool allow_zero_weight = true;
  bool nonconstant_metric = true;
};

inline TaskSpec random_task(Rng& rng, int m, int n, const RandomTaskOptions& opt = {}) {
  const TaskMap f = random_smooth_map(rng, m, n);
  const bool curved = opt.nonconstant_metric && uniform(rng, 0, 1) < 0.6;
  MetricField g = curved ? exponential_metric(random_vector(rng, n, 0.5))
                         : MetricField::Constant(random_spd(rng, n));
  TaskSpec t("random", f, g);
  const Matrix k = random_spd(rng, n, 0.1);
  const Vector c = random_vector(rng, n);
  t.potential = [k, c](const ChartPoint& y) {
    const Vector d = y.coords - c;
    return 0.5 * d.dot(k * d);
  };
  t.potential_gradient = [k, c](const ChartPoint& y) { return Vector(k * (y.coords - c)); };
  const Matrix damp = random_spd(rng, n, 0.1);
  t.dissipative_force = [damp](const ChartPoint&, const Vector& yd) { return Vector(-damp * yd); };
  const bool zero = opt.allow_zero_weight && uniform(rng, 0, 1) < 0.2;
  const Matrix w = zero ? Matrix::Zero(n, n) : random_spd(rng, n, 0.2);
  t.weight = [w](const ChartPoint&, const Vector&) { return w; };
  return t;
}

struct Instance {
  std::vector<TaskSpec> tasks;
  ChartPoint p;
  Vector v;
};

// Policy instance on R^m with 1-10 tasks. Every third instance has fewer
// weighted task rows than m (rank-deficient stack, m > 1); zero weights
// appear at random.
inline Instance random_instance(Rng& rng, int m) {
  Instance out;
  const bool deficient = m > 1 && rng() % 3 == 0;
  const int k = deficient ? 1 + static_cast<int>(rng() % (m - 1))
                          : 1 + static_cast<int>(rng() % 10);
  for (int j = 0; j < k; ++j) {
    const int n = deficient ? 1 : 1 + static_cast<int>(rng() % (m + 1));
    out.tasks.push_back(random_task(rng, m, n));
  }
  out.p = {0, random_vector(rng, m)};
  out.v = random_vector(rng, m);
  return out;
}

struct RandomTree {
  TaskTree tree;
  std::vector<TaskSpec> composed;  // leaves with edges composed by hand
};

// Root holds one full-rank leaf, a few direct leaves and 1-3 intermediate
// nodes with curved edges into R^k.
inline RandomTree random_tree(Rng& rng, int m) {
  RandomTree out{TaskTree{Manifold::Euclidean(m), {}}, {}};
  auto leaf = [&](TaskSpec t, const TaskMap* edge) {
    TaskSpec flat = t;
    if (edge) flat.map = compose(*edge, t.map);
    out.composed.push_back(std::move(flat));
    return TreeNode::Leaf(std::move(t));
  };
  out.tree.children.push_back(leaf(random_task(rng, m, m, {.allow_zero_weight = false}), nullptr));
  const int direct = static_cast<int>(rng() % 3);
  for (int i = 0; i < direct; ++i) {
    out.tree.children.push_back(leaf(random_task(rng, m, 1 + static_cast<int>(rng() % 3)), nullptr));
  }
  const int inner = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < inner; ++i) {
    const int k = 1 + static_cast<int>(rng() % 4);
    const TaskMap edge = random_smooth_map(rng, m, k);
    std::vector<TreeNode> kids;
    const int count = 1 + static_cast<int>(rng() % 3);
    for (int j = 0; j < count; ++j) kids.push_back(leaf(random_task(rng, k, 1 + static_cast<int>(rng() % 3)), &edge));
    out.tree.children.push_back(TreeNode::Intermediate(edge, std::move(kids)));
  }
  return out;
}

inline double relative_gap(const Vector& a, const Vector& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

}  // namespace pbds::testing
