#include "pbds/task_map.h"

#include <algorithm>
#include <cmath>

#include "pbds/error.h"

namespace pbds {

namespace {

// Image of q expressed in the chart `chart` of the codomain.
Vector image_in_chart(const TaskMap& f, const ChartPoint& q, int chart) {
  ChartPoint y = f.value(q);
  if (y.chart != chart) y = chart_transition(f.codomain, y, chart);
  return y.coords;
}

Matrix vstack(const std::vector<Matrix>& blocks, Eigen::Index cols) {
  Eigen::Index rows = 0;
  for (const auto& b : blocks) rows += b.rows();
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    out.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  return out;
}

}  // namespace

Matrix finite_difference_jacobian(const TaskMap& f, const ChartPoint& p, double h) {
  const ChartPoint y0 = f.value(p);
  const int n = f.codomain.dimension();
  const int m = f.domain.dimension();
  Matrix j(n, m);
  for (int k = 0; k < m; ++k) {
    ChartPoint plus = p;
    ChartPoint minus = p;
    plus.coords(k) += h;
    minus.coords(k) -= h;
    j.col(k) = (image_in_chart(f, plus, y0.chart) - image_in_chart(f, minus, y0.chart)) / (2.0 * h);
  }
  return j;
}

Matrix jacobian(const TaskMap& f, const ChartPoint& p) {
  return f.jacobian ? f.jacobian(p) : finite_difference_jacobian(f, p);
}

Matrix finite_difference_jacobian_dot(const TaskMap& f, const ChartPoint& p, const Vector& v) {
  const double speed = v.norm();
  if (speed == 0.0) return Matrix::Zero(f.codomain.dimension(), f.domain.dimension());
  // Nested differences need a larger outer step to stay above the inner
  // rounding error.
  const double base = f.jacobian ? 1e-6 : 1e-4;
  const double t = base / std::max(1.0, speed);
  ChartPoint plus = p;
  ChartPoint minus = p;
  plus.coords += t * v;
  minus.coords -= t * v;
  return (jacobian(f, plus) - jacobian(f, minus)) / (2.0 * t);
}

Matrix jacobian_dot(const TaskMap& f, const ChartPoint& p, const Vector& v) {
  return f.jacobian_dot ? f.jacobian_dot(p, v) : finite_difference_jacobian_dot(f, p, v);
}

MapEvaluation evaluate(const TaskMap& f, const ChartPoint& p, const Vector& v) {
  MapEvaluation e{f.value(p), jacobian(f, p), jacobian_dot(f, p, v), {}};
  e.y_dot = e.J * v;
  return e;
}

TaskMap compose(const TaskMap& inner, const TaskMap& outer) {
  if (!(inner.codomain == outer.domain)) {
    throw Error(ErrorKind::kDimensionMismatch, "cannot compose " + inner.name + " (into " +
                                                   inner.codomain.describe() + ") with " +
                                                   outer.name + " (from " +
                                                   outer.domain.describe() + ")");
  }
  TaskMap f(inner.domain, outer.codomain, outer.name + "." + inner.name);
  f.value = [inner, outer](const ChartPoint& p) { return outer.value(inner.value(p)); };
  f.jacobian = [inner, outer](const ChartPoint& p) {
    return Matrix(jacobian(outer, inner.value(p)) * jacobian(inner, p));
  };
  f.jacobian_dot = [inner, outer](const ChartPoint& p, const Vector& v) {
    const ChartPoint y = inner.value(p);
    const Matrix ji = jacobian(inner, p);
    return Matrix(jacobian_dot(outer, y, ji * v) * ji +
                  jacobian(outer, y) * jacobian_dot(inner, p, v));
  };
  return f;
}

TaskMap identity_map(const Manifold& m) {
  TaskMap f(m, m, "id");
  const int n = m.dimension();
  f.value = [](const ChartPoint& p) { return p; };
  f.jacobian = [n](const ChartPoint&) { return Matrix(Matrix::Identity(n, n)); };
  f.jacobian_dot = [n](const ChartPoint&, const Vector&) { return Matrix(Matrix::Zero(n, n)); };
  return f;
}

TaskMap embedding_map(const Manifold& m) {
  TaskMap f(m, Manifold::Euclidean(m.embedding_dimension()), "embed");
  f.value = [m](const ChartPoint& p) { return ChartPoint{0, chart_to_embedding(m, p).coords}; };
  f.jacobian = [m](const ChartPoint& p) { return embedding_jacobian(m, p); };
  f.jacobian_dot = [m](const ChartPoint& p, const Vector& v) {
    return embedding_jacobian_dot(m, p, v);
  };
  return f;
}

TaskMap affine_map(const Matrix& a, const Vector& b) {
  if (a.rows() != b.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "affine map offset length differs from rows");
  }
  TaskMap f(Manifold::Euclidean(static_cast<int>(a.cols())),
            Manifold::Euclidean(static_cast<int>(a.rows())), "affine");
  f.value = [a, b](const ChartPoint& p) { return ChartPoint{0, a * p.coords + b}; };
  f.jacobian = [a](const ChartPoint&) { return a; };
  f.jacobian_dot = [a](const ChartPoint&, const Vector&) {
    return Matrix(Matrix::Zero(a.rows(), a.cols()));
  };
  return f;
}

TaskMap product_map(const std::vector<TaskMap>& maps) {
  if (maps.empty()) throw Error(ErrorKind::kDimensionMismatch, "product of zero maps");
  std::vector<Manifold> codomains;
  std::string name = "(";
  for (const auto& f : maps) {
    if (!(f.domain == maps.front().domain)) {
      throw Error(ErrorKind::kDimensionMismatch, "product map factors need a common domain");
    }
    codomains.push_back(f.codomain);
    if (name.size() > 1) name += ",";
    name += f.name;
  }
  const Manifold codomain = Manifold::Product(codomains);
  TaskMap f(maps.front().domain, codomain, name + ")");
  const int m = maps.front().domain.dimension();
  f.value = [maps, codomain](const ChartPoint& p) {
    std::vector<ChartPoint> parts;
    parts.reserve(maps.size());
    for (const auto& g : maps) parts.push_back(g.value(p));
    return join_points(codomain, parts);
  };
  f.jacobian = [maps, m](const ChartPoint& p) {
    std::vector<Matrix> blocks;
    for (const auto& g : maps) blocks.push_back(jacobian(g, p));
    return vstack(blocks, m);
  };
  f.jacobian_dot = [maps, m](const ChartPoint& p, const Vector& v) {
    std::vector<Matrix> blocks;
    for (const auto& g : maps) blocks.push_back(jacobian_dot(g, p, v));
    return vstack(blocks, m);
  };
  return f;
}

TaskMap euclidean_distance_map(const Vector& goal) {
  const int n = static_cast<int>(goal.size());
  TaskMap f(Manifold::Euclidean(n), Manifold::Euclidean(1), "dist");
  f.value = [goal](const ChartPoint& p) {
    return ChartPoint{0, Vector::Constant(1, (p.coords - goal).norm())};
  };
  f.jacobian = [goal, n](const ChartPoint& p) {
    const Vector d = p.coords - goal;
    const double r = d.norm();
    if (r == 0.0) return Matrix(Matrix::Zero(1, n));
    return Matrix((d / r).transpose());
  };
  f.jacobian_dot = [goal, n](const ChartPoint& p, const Vector& v) {
    const Vector d = p.coords - goal;
    const double r = d.norm();
    if (r == 0.0) return Matrix(Matrix::Zero(1, n));
    const Vector u = d / r;
    return Matrix((v - u * u.dot(v)).transpose() / r);
  };
  return f;
}

AngleDerivatives sphere_angle(const Vector& x, const Vector& goal) {
  const Eigen::Index d = x.size();
  const double r = x.norm();
  if (!(r > 0.0)) throw Error(ErrorKind::kOutOfDomain, "angle undefined at the origin");
  const Vector u = x / r;
  const double c = std::clamp(u.dot(goal), -1.0, 1.0);
  AngleDerivatives out;
  out.value = 2.0 * std::atan2((u - goal).norm(), (u + goal).norm());
  const Vector perp = goal - c * u;
  const double s = perp.norm();
  if (s < 1e-15) {
    if (c < 0.0) {
      throw Error(ErrorKind::kSingular, "goal is antipodal to the query point");
    }
    out.gradient = Vector::Zero(d);
    out.hessian = Matrix::Zero(d, d);
    return out;
  }
  // The gradient has magnitude 1/r everywhere off the antipode; only the
  // second derivative grows like 1/s and is clamped.
  const double s_eff = out.value > M_PI - kAntipodeClamp ? std::sin(kAntipodeClamp) : s;
  const Vector grad_c = perp / r;
  const Matrix hess_c = (-(goal * u.transpose() + u * goal.transpose()) +
                         3.0 * c * u * u.transpose() - c * Matrix::Identity(d, d)) /
                        (r * r);
  const double d1 = -1.0 / s_eff;
  const double d2 = -c / (s_eff * s_eff * s_eff);
  out.gradient = (-1.0 / s) * grad_c;
  out.hessian = d2 * grad_c * grad_c.transpose() + d1 * hess_c;
  return out;
}

TaskMap sphere_angle_map(const Vector& goal) {
  const int d = static_cast<int>(goal.size());
  if (std::abs(goal.norm() - 1.0) > 1e-9) {
    throw Error(ErrorKind::kOutOfDomain, "angle goal must be a unit vector");
  }
  const Vector g = goal.normalized();
  TaskMap f(Manifold::Euclidean(d), Manifold::Euclidean(1), "angle");
  f.value = [g](const ChartPoint& p) {
    return ChartPoint{0, Vector::Constant(1, sphere_angle(p.coords, g).value)};
  };
  f.jacobian = [g](const ChartPoint& p) {
    return Matrix(sphere_angle(p.coords, g).gradient.transpose());
  };
  f.jacobian_dot = [g](const ChartPoint& p, const Vector& v) {
    return Matrix((sphere_angle(p.coords, g).hessian * v).transpose());
  };
  return f;
}

TaskMap ball_clearance_map(const Vector& center, double radius) {
  if (!(radius >= 0.0)) throw Error(ErrorKind::kSchema, "obstacle radius must be >= 0");
  TaskMap f(Manifold::Euclidean(static_cast<int>(center.size())), Manifold::PositiveReals(),
            "clearance");
  auto clearance = [center, radius](const Vector& x) {
    const double rho = (x - center).norm();
    if (!(rho - radius > 0.0)) {
      throw Error(ErrorKind::kCollision, "point is inside an obstacle");
    }
    return rho;
  };
  f.value = [clearance, radius](const ChartPoint& p) {
    return ChartPoint{0, Vector::Constant(1, clearance(p.coords) - radius)};
  };
  f.jacobian = [clearance, center](const ChartPoint& p) {
    const double rho = clearance(p.coords);
    return Matrix(((p.coords - center) / rho).transpose());
  };
  f.jacobian_dot = [clearance, center](const ChartPoint& p, const Vector& v) {
    const double rho = clearance(p.coords);
    const Vector u = (p.coords - center) / rho;
    return Matrix((v - u * u.dot(v)).transpose() / rho);
  };
  return f;
}

}  // namespace pbds
