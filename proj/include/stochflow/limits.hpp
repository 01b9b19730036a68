#pragma once

#include "stochflow/coeffs.hpp"
#include "stochflow/flow.hpp"
#include "stochflow/grid.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace stochflow {

/// Grid-sup estimates of the perturbation hypotheses between two fields.
struct CoefficientDistance {
  double drift_value = 0.0;  // |r₁⁻¹(b⁽ⁿ⁾ − b)|₀
  double drift_grad = 0.0;   // |∇b⁽ⁿ⁾ − ∇b|_{β−1}
  double sigma_value = 0.0;  // |r₁⁻¹(σ⁽ⁿ⁾ − σ)|₀
  double sigma_grad = 0.0;   // |∇σ⁽ⁿ⁾ − ∇σ|_{β−1}
  std::vector<double> jump_k;  // per atom: |r₁⁻¹ΔH|₀ + |∇ΔH|_{β−1}
  double jump_k_squared = 0.0;  // Σ λ_k K_k²

  double total() const;
};

CoefficientDistance coefficient_distance(const CoefficientField& field_n, const CoefficientField& field,
                                         const MarkMeasure& measure, const Box& box, double grid_step,
                                         std::span<const double> t_samples = {});

struct ConvergenceRecord {
  int n = 0;
  CoefficientDistance coeff;
  double flow_value = 0.0;
  double flow_value_ci95 = 0.0;
  double flow_grad = 0.0;
  double flow_grad_ci95 = 0.0;
  double inverse_value = 0.0;
  double inverse_value_ci95 = 0.0;
  double inverse_grad = 0.0;
  double inverse_grad_ci95 = 0.0;
};

struct LimitOptions {
  double epsilon = 1.0;
  double beta_prime = 1.5;
  double p = 2.0;
  std::size_t paths = 100;
  std::uint64_t seed = 0;
  Box box;
  double grid_step = 0.1;
  double s = 0.0;
  double t_end = 1.0;
  int base_steps = 16;
  Scheme scheme = Scheme::Euler;
  double tol = 0.0;  // 0 selects the scheme default
  bool inverse = true;
  int workers = 1;
};

struct ConvergenceReport {
  std::vector<ConvergenceRecord> records;
  LimitOptions options;
};

/// One noise record per path index drives the limit field and every field_n.
ConvergenceReport strong_limit_run(const std::vector<CoefficientField>& fields_n, const std::vector<int>& ns,
                                   const CoefficientField& field, const MarkMeasure& measure,
                                   const LimitOptions& options);

}  // namespace stochflow
