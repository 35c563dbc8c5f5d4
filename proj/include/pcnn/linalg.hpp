#pragma once

#include <Eigen/Dense>
#include <complex>

namespace pcnn {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline bool all_finite(const CMat& m) {
  return m.array().isFinite().all();
}

inline bool all_finite(const RMat& m) {
  return m.array().isFinite().all();
}

/// Largest absolute entry difference between two equally sized matrices.
inline double max_abs_diff(const CMat& a, const CMat& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

constexpr double kPi = 3.14159265358979323846;

inline double radians(double degrees) { return degrees * kPi / 180.0; }
inline double degrees(double radians) { return radians * 180.0 / kPi; }

}  // namespace pcnn
