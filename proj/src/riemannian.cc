#include "pbds/riemannian.h"

#include <cmath>
#include <sstream>

#include "pbds/error.h"

namespace pbds {

Vector Christoffel::contract(const Vector& u, const Vector& w) const {
  Vector out(dim_);
  for (int k = 0; k < dim_; ++k) out(k) = u.dot(slices_[k] * w);
  return out;
}

Matrix Christoffel::contract_last(const Vector& u) const {
  Matrix out(dim_, dim_);
  for (int k = 0; k < dim_; ++k) out.row(k) = (slices_[k] * u).transpose();
  return out;
}

double Christoffel::max_abs() const {
  double m = 0.0;
  for (const auto& s : slices_) m = std::max(m, s.cwiseAbs().maxCoeff());
  return m;
}

MetricField MetricField::Constant(const Matrix& g, std::string name) {
  if (g.rows() != g.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "constant metric must be square");
  }
  MetricField f;
  f.dimension = static_cast<int>(g.rows());
  f.value = [g](const ChartPoint&) { return g; };
  const int n = f.dimension;
  f.derivative = [n](const ChartPoint&) {
    return std::vector<Matrix>(n, Matrix::Zero(n, n));
  };
  f.closed_form = [n](const ChartPoint&) { return Christoffel(n); };
  f.constant = true;
  f.name = std::move(name);
  return f;
}

MetricField MetricField::Identity(int dim) {
  return Constant(Matrix::Identity(dim, dim), "euclidean");
}

double barrier_log_metric(double a, double b, double x) {
  if (!(x > 0.0)) {
    throw Error(ErrorKind::kOutOfDomain, "barrier metric needs a positive distance");
  }
  return a / (b * std::pow(x, b));
}

double barrier_christoffel(double a, double b, double x) {
  if (!(x > 0.0)) {
    throw Error(ErrorKind::kOutOfDomain, "barrier metric needs a positive distance");
  }
  return -a / (2.0 * std::pow(x, b + 1.0));
}

MetricField MetricField::Barrier(double a, double b) {
  if (!(a > 0.0) || !(b > 1.0)) {
    throw Error(ErrorKind::kSchema, "barrier metric needs a > 0 and b > 1");
  }
  MetricField f;
  f.dimension = 1;
  f.value = [a, b](const ChartPoint& p) {
    return Matrix::Constant(1, 1, std::exp(barrier_log_metric(a, b, p.coords(0))));
  };
  f.derivative = [a, b](const ChartPoint& p) {
    const double x = p.coords(0);
    const double g = std::exp(barrier_log_metric(a, b, x));
    return std::vector<Matrix>{Matrix::Constant(1, 1, -a * std::pow(x, -b - 1.0) * g)};
  };
  f.closed_form = [a, b](const ChartPoint& p) {
    Christoffel c(1);
    c(0, 0, 0) = barrier_christoffel(a, b, p.coords(0));
    return c;
  };
  std::ostringstream os;
  os << "barrier(a=" << a << ",b=" << b << ")";
  f.name = os.str();
  return f;
}

std::vector<Matrix> finite_difference_metric_derivative(const MetricField& g,
                                                        const ChartPoint& p, double h) {
  const int n = static_cast<int>(p.coords.size());
  std::vector<Matrix> dg;
  dg.reserve(n);
  auto eval = [&](int dir, double step) -> std::optional<Matrix> {
    ChartPoint q = p;
    q.coords(dir) += step;
    try {
      Matrix m = g.value(q);
      if (!m.allFinite()) return std::nullopt;
      return m;
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  const Matrix g0 = g.value(p);
  for (int dir = 0; dir < n; ++dir) {
    const auto plus = eval(dir, h);
    const auto minus = eval(dir, -h);
    if (plus && minus) {
      dg.push_back((*plus - *minus) / (2.0 * h));
      continue;
    }
    const double s = plus ? 1.0 : -1.0;
    const auto one = plus ? plus : minus;
    const auto two = eval(dir, 2.0 * s * h);
    if (!one || !two) {
      throw Error(ErrorKind::kOutOfDomain,
                  "metric cannot be evaluated on either side of the query point");
    }
    dg.push_back(s * (-3.0 * g0 + 4.0 * *one - *two) / (2.0 * h));
  }
  return dg;
}

std::vector<Matrix> christoffel_first_kind(const std::vector<Matrix>& dg) {
  const int n = static_cast<int>(dg.size());
  std::vector<Matrix> low(n, Matrix::Zero(n, n));
  for (int h = 0; h < n; ++h) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        low[h](i, j) = 0.5 * (dg[i](j, h) + dg[j](i, h) - dg[h](i, j));
      }
    }
  }
  return low;
}

Christoffel levi_civita(const Matrix& g, const std::vector<Matrix>& dg) {
  const int n = static_cast<int>(g.rows());
  if (static_cast<int>(dg.size()) != n) {
    throw Error(ErrorKind::kDimensionMismatch, "metric derivative count differs from dimension");
  }
  const Matrix ginv = invert_metric(g);
  const auto low = christoffel_first_kind(dg);
  Christoffel c(n);
  for (int k = 0; k < n; ++k) {
    Matrix s = Matrix::Zero(n, n);
    for (int h = 0; h < n; ++h) s += ginv(k, h) * low[h];
    c.slice(k) = s;
  }
  return c;
}

Christoffel christoffel(const MetricField& g, const ChartPoint& p) {
  if (g.closed_form) return g.closed_form(p);
  const Matrix gp = g.value(p);
  if (g.constant) {
    invert_metric(gp);  // singularity guard only
    return Christoffel(g.dimension);
  }
  const auto dg = g.derivative ? g.derivative(p) : finite_difference_metric_derivative(g, p);
  return levi_civita(gp, dg);
}

Christoffel christoffel_fd(const MetricField& g, const ChartPoint& p, double h) {
  return levi_civita(g.value(p), finite_difference_metric_derivative(g, p, h));
}

Vector sharp_gradient(const MetricField& g, const ChartPoint& p, const Vector& gradient) {
  return solve_metric(g.value(p), gradient);
}

namespace {

// Embedding Jacobian with a full-column-rank check.
Matrix checked_embedding_jacobian(const Manifold& m, const ChartPoint& p) {
  Matrix j = embedding_jacobian(m, p);
  if (numerical_rank(j, 1e-12) < j.cols()) {
    throw Error(ErrorKind::kSingular, "embedding Jacobian is rank deficient");
  }
  return j;
}

}  // namespace

ChartComponents pullback_through_embedding(const AmbientComponents& ambient,
                                           const Manifold& m) {
  const int d = m.embedding_dimension();
  if (ambient.metric.rows() != d || ambient.metric.cols() != d ||
      ambient.weight.rows() != d || ambient.weight.cols() != d) {
    throw Error(ErrorKind::kDimensionMismatch,
                "ambient metric and weight must be embedding_dimension square");
  }
  ChartComponents out;
  const Matrix gbar = ambient.metric;
  const Matrix wbar = ambient.weight;

  out.metric.dimension = m.dimension();
  out.metric.name = "pullback_ambient";
  out.metric.value = [m, gbar](const ChartPoint& p) {
    const Matrix j = checked_embedding_jacobian(m, p);
    return Matrix(j.transpose() * gbar * j);
  };
  out.metric.derivative = [m, gbar](const ChartPoint& p) {
    const Matrix j = embedding_jacobian(m, p);
    const auto hess = embedding_hessian(m, p);
    const int n = m.dimension();
    std::vector<Matrix> dg;
    dg.reserve(n);
    for (int h = 0; h < n; ++h) {
      Matrix hh(hess.size(), n);
      for (size_t i = 0; i < hess.size(); ++i) hh.row(i) = hess[i].col(h).transpose();
      const Matrix t = hh.transpose() * gbar * j;
      dg.push_back(t + t.transpose());
    }
    return dg;
  };

  const AmbientForceFn force = ambient.dissipative_force;
  out.dissipative_force = [m, force](const ChartPoint& p, const Vector& v) -> Vector {
    if (!force) return Vector::Zero(m.dimension());
    const Matrix j = embedding_jacobian(m, p);
    return j.transpose() * force(chart_to_embedding(m, p).coords, j * v);
  };

  const AmbientPotentialFn potential = ambient.potential;
  out.potential = [m, potential](const ChartPoint& p) {
    return potential ? potential(chart_to_embedding(m, p).coords) : 0.0;
  };
  const AmbientGradientFn gradient = ambient.potential_gradient;
  out.potential_gradient = [m, gradient](const ChartPoint& p) -> Vector {
    if (!gradient) return Vector::Zero(m.dimension());
    return embedding_jacobian(m, p).transpose() * gradient(chart_to_embedding(m, p).coords);
  };

  out.weight = [m, wbar](const ChartPoint& p, const Vector&) {
    const Matrix j = embedding_jacobian(m, p);
    return Matrix(j.transpose() * wbar * j);
  };
  return out;
}

}  // namespace pbds
