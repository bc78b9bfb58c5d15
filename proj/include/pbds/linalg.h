#pragma once

#include <Eigen/Dense>

namespace pbds {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Metrics with a larger 2-norm condition number are rejected as singular.
inline constexpr double kMaxConditionNumber = 1e12;

// Singular values below this fraction of the largest are treated as zero.
inline constexpr double kPinvRelativeCutoff = 1e-10;

// Moore-Penrose pseudoinverse via SVD.
Matrix pseudo_inverse(const Matrix& a, double relative_cutoff = kPinvRelativeCutoff);

// Ratio of largest to smallest singular value; +inf when rank deficient.
double condition_number(const Matrix& a);

// Solves g x = rhs for a symmetric positive-definite g. Throws
// Error(kSingular) when g is not PD or exceeds kMaxConditionNumber.
Vector solve_metric(const Matrix& g, const Vector& rhs);
Matrix invert_metric(const Matrix& g);

bool all_finite(const Matrix& a);

// Numerical rank with a relative singular-value threshold.
int numerical_rank(const Matrix& a, double relative_threshold);

}  // namespace pbds
