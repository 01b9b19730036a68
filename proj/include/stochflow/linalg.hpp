#pragma once

#include <Eigen/Dense>
#include <boost/container/static_vector.hpp>

#include <cmath>
#include <cstddef>

namespace stochflow {

// Upper bound on the state dimension d and the Wiener count m. Small vectors
// and matrices live on the stack with this capacity, so stepping loops never
// allocate.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// One d×d matrix per Wiener component (∇σ^ρ) or per state component (Hessians).
using MatList = boost::container::static_vector<Mat, kMaxDim>;

inline Vec zeros(int d) { return Vec::Zero(d); }
inline Mat identity(int d) { return Mat::Identity(d, d); }

/// Operator 2-norm (largest singular value).
inline double op_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

/// ℓ₂ norm of a list of matrices, each measured in operator norm.
inline double op_norm(const MatList& ms) {
  double s = 0.0;
  for (const auto& m : ms) {
    const double n = op_norm(m);
    s += n * n;
  }
  return std::sqrt(s);
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }
inline bool all_finite(const Mat& m) { return m.allFinite(); }
inline bool all_finite(const MatList& ms) {
  for (const auto& m : ms)
    if (!m.allFinite()) return false;
  return true;
}

/// r₁(x) = sqrt(1 + |x|²)
inline double r1(const Vec& x) { return std::sqrt(1.0 + x.squaredNorm()); }

}  // namespace stochflow
