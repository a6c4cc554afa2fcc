#include "splatdiff/linalg.hpp"

#include <algorithm>

namespace splatdiff {

Eigen::Vector3d symmetric_eigenvalues(const Mat3& m) {
  Eigen::SelfAdjointEigenSolver<Mat3> solver(symmetrize(m),
                                             Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

double lambda_max(const Mat3& m) { return symmetric_eigenvalues(m)(2); }

Mat3 symmetric_pseudo_inverse(const Mat3& m, double relative_cutoff) {
  Eigen::SelfAdjointEigenSolver<Mat3> solver(symmetrize(m));
  const Eigen::Vector3d& values = solver.eigenvalues();
  const Mat3& vectors = solver.eigenvectors();
  const double top = std::max(0.0, values(2));
  const double cutoff = relative_cutoff * top;
  Mat3 result = Mat3::Zero();
  if (top <= 0.0) return result;
  for (int k = 0; k < 3; ++k) {
    if (values(k) > cutoff) {
      result += (1.0 / values(k)) * vectors.col(k) * vectors.col(k).transpose();
    }
  }
  return symmetrize(result);
}

bool is_psd(const Mat3& m, double tol) {
  return symmetric_eigenvalues(m)(0) >= -tol;
}

}  // namespace splatdiff
