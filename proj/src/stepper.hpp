#pragma once

// One-step maps of the numerical flow, shared by the flow, inverse and spde
// pipelines so that every consumer sees the same arithmetic.

#include "stochflow/coeffs.hpp"
#include "stochflow/flow.hpp"
#include "stochflow/noise.hpp"

#include <cstddef>
#include <vector>

namespace stochflow::detail {

class Stepper {
 public:
  Stepper(const CoefficientField& field, const MarkMeasure& measure, const NoiseRecord& noise, Scheme scheme);

  std::size_t intervals() const { return noise_->grid.intervals(); }
  const NoiseRecord& noise() const { return *noise_; }
  int dim() const { return field_.dim(); }

  /// Continuous part over interval k: state at t_k ↦ left limit at t_{k+1}.
  Vec advance(std::size_t k, const Vec& x) const;
  /// Derivative of `advance` at x.
  Mat advance_jacobian(std::size_t k, const Vec& x) const;
  /// Ū at t_k ↦ Ū just before t_{k+1}, linearized along x = X_{t_k}.
  Mat inverse_jacobian_step(std::size_t k, const Vec& x, const Mat& ubar) const;
  /// Solves advance(k, x) = y.
  Vec invert_advance(std::size_t k, const Vec& y, double tol) const;

  bool jump_at(std::size_t k) const { return noise_->grid.is_jump(k); }
  double mark_at(std::size_t k) const;
  Vec apply_jump(std::size_t k, const Vec& x) const;
  /// I + ∇H(x, z) at the jump of grid point k.
  Mat jump_jacobian(std::size_t k, const Vec& x) const;
  Vec invert_jump(std::size_t k, const Vec& y, double tol) const;

  /// X at grid point k_end from x at grid point k_start; U = ∇X when requested.
  Vec propagate(const Vec& x, std::size_t k_end, Mat* jacobian = nullptr) const {
    return propagate_from(x, 0, k_end, jacobian);
  }
  Vec propagate_from(const Vec& x, std::size_t k_start, std::size_t k_end, Mat* jacobian = nullptr) const;

  /// Preimage of y under the flow from grid point 0 to k_end: backward
  /// composition of step inversions, then Newton on the full map. Throws
  /// NoConvergence when the final residual exceeds tol.
  Vec invert_map(const Vec& y, std::size_t k_end, double tol, Mat* jacobian = nullptr,
                 double* residual = nullptr) const;

 private:
  Vec euler_increment(std::size_t k, const Vec& x) const;
  void build_exact();

  CoefficientField field_;
  MarkMeasure measure_;
  const NoiseRecord* noise_;
  Scheme scheme_;
  std::vector<Mat> exact_m_;
  std::vector<Mat> exact_minv_;
  std::vector<Vec> exact_v_;
};

void check_finite_state(const Vec& x, double t);

/// Jump-free copy of a record: with H ≡ 0 jump points are ordinary grid points.
NoiseRecord strip_jumps(const NoiseRecord& noise);

}  // namespace stochflow::detail
