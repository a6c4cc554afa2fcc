#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

namespace splatdiff {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Eigenvalues of a symmetric 3x3 matrix in ascending order.
Eigen::Vector3d symmetric_eigenvalues(const Mat3& m);

double lambda_max(const Mat3& m);

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix. Eigenvalues at or
/// below `relative_cutoff * lambda_max` are treated as zero.
Mat3 symmetric_pseudo_inverse(const Mat3& m, double relative_cutoff = 1e-10);

/// True when the smallest eigenvalue of the symmetrized matrix is >= -tol.
bool is_psd(const Mat3& m, double tol = 1e-12);

inline Mat3 symmetrize(const Mat3& m) { return 0.5 * (m + m.transpose()); }

}  // namespace splatdiff
