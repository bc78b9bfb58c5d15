#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pbds/linalg.h"
#include "pbds/manifold.h"

namespace pbds {

// Connection coefficients Gamma^k_ij stored as one symmetric dim x dim slice
// per upper index k.
class Christoffel {
 public:
  explicit Christoffel(int dim = 0)
      : dim_(dim), slices_(dim, Matrix::Zero(dim, dim)) {}

  int dimension() const { return dim_; }

  double operator()(int k, int i, int j) const { return slices_[k](i, j); }
  double& operator()(int k, int i, int j) { return slices_[k](i, j); }
  const Matrix& slice(int k) const { return slices_[k]; }
  Matrix& slice(int k) { return slices_[k]; }

  // Gamma^k_ij u^i w^j.
  Vector contract(const Vector& u, const Vector& w) const;

  // M(k, i) = Gamma^k_ij u^j.
  Matrix contract_last(const Vector& u) const;

  double max_abs() const;

 private:
  int dim_;
  std::vector<Matrix> slices_;
};

using MetricFn = std::function<Matrix(const ChartPoint&)>;
// d g / d x^h for each chart coordinate h.
using MetricDerivativeFn = std::function<std::vector<Matrix>(const ChartPoint&)>;
using ChristoffelFn = std::function<Christoffel(const ChartPoint&)>;

// Chart-aware coordinate representation of a Riemannian metric.
struct MetricField {
  int dimension = 0;
  MetricFn value;
  MetricDerivativeFn derivative;    // empty: central finite differences
  ChristoffelFn closed_form;        // empty: Levi-Civita from the derivative
  bool constant = false;
  std::string name;

  static MetricField Constant(const Matrix& g, std::string name = "constant");
  static MetricField Identity(int dim);
  // g(x) = exp(a / (b x^b)) on R+, evaluated through its logarithm.
  static MetricField Barrier(double a, double b);
};

inline constexpr double kMetricFdStep = 1e-6;

// Central differences; where a neighbor evaluation throws (chart or domain
// boundary) falls back to a second-order one-sided stencil.
std::vector<Matrix> finite_difference_metric_derivative(const MetricField& g,
                                                        const ChartPoint& p,
                                                        double h = kMetricFdStep);

// Christoffel symbols of the first kind, result[h](i, j) = Gamma_{h,ij}.
std::vector<Matrix> christoffel_first_kind(const std::vector<Matrix>& dg);

Christoffel levi_civita(const Matrix& g, const std::vector<Matrix>& dg);

// Uses the closed form when present, else the analytic or finite-difference
// derivative. Throws Error(kSingular) for an ill-conditioned metric.
Christoffel christoffel(const MetricField& g, const ChartPoint& p);

// Forces the finite-difference path; the test oracle for christoffel().
Christoffel christoffel_fd(const MetricField& g, const ChartPoint& p,
                           double h = kMetricFdStep);

Vector sharp_gradient(const MetricField& g, const ChartPoint& p, const Vector& gradient);

// log g and its closed-form Christoffel symbol for the barrier metric.
double barrier_log_metric(double a, double b, double x);
double barrier_christoffel(double a, double b, double x);

using AmbientForceFn = std::function<Vector(const Vector& x, const Vector& xdot)>;
using AmbientPotentialFn = std::function<double(const Vector& x)>;
using AmbientGradientFn = std::function<Vector(const Vector& x)>;

// Task components designed once in the embedding space. Empty callables mean
// zero force / zero potential.
struct AmbientComponents {
  Matrix metric;
  AmbientForceFn dissipative_force;
  AmbientPotentialFn potential;
  AmbientGradientFn potential_gradient;
  Matrix weight;
};

using ChartForceFn = std::function<Vector(const ChartPoint&, const Vector&)>;
using ChartPotentialFn = std::function<double(const ChartPoint&)>;
using ChartGradientFn = std::function<Vector(const ChartPoint&)>;
using ChartWeightFn = std::function<Matrix(const ChartPoint&, const Vector&)>;

struct ChartComponents {
  MetricField metric;
  ChartForceFn dissipative_force;
  ChartPotentialFn potential;
  ChartGradientFn potential_gradient;
  ChartWeightFn weight;
};

// Pulls ambient components back through the manifold's embedding into
// whichever chart the query point is expressed in.
ChartComponents pullback_through_embedding(const AmbientComponents& ambient,
                                           const Manifold& m);

}  // namespace pbds
