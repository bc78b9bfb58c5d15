#include "pbds/linalg.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "pbds/error.h"

namespace pbds {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimensionMismatch: return "dimension mismatch";
    case ErrorKind::kOutOfDomain: return "out of domain";
    case ErrorKind::kSingular: return "singular";
    case ErrorKind::kNonFinite: return "non-finite";
    case ErrorKind::kCollision: return "collision";
    case ErrorKind::kSchema: return "schema";
  }
  return "unknown";
}

Matrix pseudo_inverse(const Matrix& a, double relative_cutoff) {
  if (a.size() == 0) return Matrix::Zero(a.cols(), a.rows());
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = relative_cutoff * (s.size() > 0 ? s(0) : 0.0);
  Vector s_inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) s_inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
}

double condition_number(const Matrix& a) {
  if (a.size() == 0) return 1.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

namespace {

void check_metric(const Matrix& g) {
  if (!all_finite(g)) {
    throw Error(ErrorKind::kSingular, "metric has non-finite entries");
  }
  if (g.rows() == 1) {
    if (!(g(0, 0) > 0.0)) throw Error(ErrorKind::kSingular, "metric is not positive");
    return;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
  const Vector& ev = eig.eigenvalues();
  if (!(ev(0) > 0.0)) {
    throw Error(ErrorKind::kSingular, "metric is not positive-definite");
  }
  if (ev(ev.size() - 1) / ev(0) > kMaxConditionNumber) {
    std::ostringstream os;
    os << "metric condition number " << ev(ev.size() - 1) / ev(0) << " exceeds "
       << kMaxConditionNumber;
    throw Error(ErrorKind::kSingular, os.str());
  }
}

}  // namespace

Vector solve_metric(const Matrix& g, const Vector& rhs) {
  check_metric(g);
  if (g.rows() == 1) return rhs / g(0, 0);
  return g.llt().solve(rhs);
}

Matrix invert_metric(const Matrix& g) {
  check_metric(g);
  if (g.rows() == 1) return Matrix::Constant(1, 1, 1.0 / g(0, 0));
  return g.llt().solve(Matrix::Identity(g.rows(), g.cols()));
}

bool all_finite(const Matrix& a) { return a.allFinite(); }

int numerical_rank(const Matrix& a, double relative_threshold) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& s = svd.singularValues();
  if (s(0) <= 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > relative_threshold * s(0)) ++rank;
  }
  return rank;
}

}  // namespace pbds
