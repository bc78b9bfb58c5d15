#include "pbds/error.h"
#include "pbds/policy.h"

namespace pbds {

namespace {

// Symmetric PSD square root; tiny negative eigenvalues from rounding are
// clipped to zero.
Matrix psd_sqrt(const Matrix& w) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (w + w.transpose()));
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

Vector least_squares_oracle(const std::vector<TaskSpec>& tasks, const ChartPoint& p,
                            const Vector& v) {
  const Eigen::Index m = p.coords.size();
  std::vector<Matrix> lhs_blocks;
  std::vector<Vector> rhs_blocks;
  Eigen::Index rows = 0;
  for (const auto& t : tasks) {
    const ChartPoint y = t.map.value(p);
    const Matrix jf = jacobian(t.map, p);
    const Vector y_dot = jf * v;
    const Matrix w = t.weight(y, y_dot);
    if ((w.array() == 0.0).all()) continue;
    // Desired task acceleration of the task's own geodesic-with-forcing
    // dynamics: g y'' = F - grad Phi - g Gamma(y', y').
    const Matrix g = t.metric.value(y);
    const Christoffel gamma = christoffel(t.metric, y);
    Vector coriolis(y_dot.size());
    for (int k = 0; k < gamma.dimension(); ++k) {
      double acc = 0.0;
      for (int i = 0; i < gamma.dimension(); ++i) {
        for (int j = 0; j < gamma.dimension(); ++j) acc += gamma(k, i, j) * y_dot(i) * y_dot(j);
      }
      coriolis(k) = acc;
    }
    const Vector forcing = t.dissipative_force(y, y_dot) - t.potential_gradient(y);
    const Vector y_ddot = g.ldlt().solve(forcing) - coriolis;
    const Matrix root = psd_sqrt(w);
    lhs_blocks.push_back(root * jf);
    rhs_blocks.push_back(root * (y_ddot - jacobian_dot(t.map, p, v) * v));
    rows += jf.rows();
  }
  if (rows == 0) return Vector::Zero(m);
  Matrix lhs(rows, m);
  Vector rhs(rows);
  Eigen::Index r = 0;
  for (size_t i = 0; i < lhs_blocks.size(); ++i) {
    lhs.middleRows(r, lhs_blocks[i].rows()) = lhs_blocks[i];
    rhs.segment(r, rhs_blocks[i].size()) = rhs_blocks[i];
    r += lhs_blocks[i].rows();
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
  cod.setThreshold(1e-7);
  cod.compute(lhs);
  return cod.solve(rhs);
}

}  // namespace pbds
