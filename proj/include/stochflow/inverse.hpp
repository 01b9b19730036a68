#pragma once

#include "stochflow/coeffs.hpp"
#include "stochflow/flow.hpp"

#include <cstddef>
#include <vector>

namespace stochflow {

/// Preimages X_t⁻¹(s, y) of a batch of query points at selected grid times.
/// Entry (j, i) is selected time j, query point i.
struct InversePath {
  std::shared_ptr<const NoiseRecord> noise;
  int dim = 1;
  double tol = 0.0;
  std::vector<std::size_t> time_indices;  // grid indices of the stored times
  std::vector<Vec> query_points;
  std::vector<double> values;
  std::vector<double> residuals;
  std::vector<double> preimage_jacobians;  // U at the preimage, from the certificate pass
  std::vector<double> gradients;  // empty until inverse_gradient

  std::size_t time_count() const { return time_indices.size(); }
  std::size_t point_count() const { return query_points.size(); }
  bool has_gradients() const { return !gradients.empty(); }

  Vec value(std::size_t j, std::size_t i) const;
  double residual(std::size_t j, std::size_t i) const { return residuals[j * point_count() + i]; }
  Mat preimage_jacobian(std::size_t j, std::size_t i) const;
  Mat gradient(std::size_t j, std::size_t i) const;
  double max_residual() const;
};

/// Solves x + H_t(x, z) = y: fixed-point iteration while |∇H| ≤ η, Newton otherwise.
Vec invert_jump_map(const CoefficientField& field, const MarkMeasure& measure, double t, double z, const Vec& y,
                    double tol);

/// Default inversion tolerance for a scheme.
double default_inverse_tol(Scheme scheme);

/// Backward composition of per-step inversions followed by a Newton polish of
/// the full map. `time_indices` empty means every grid time.
InversePath invert_flow(const CoefficientField& field, const FlowPath& flow, const std::vector<Vec>& query_points,
                        double tol, std::vector<std::size_t> time_indices = {});

/// ∇X_t⁻¹(y) = [∇X_t(X_t⁻¹(y))]⁻¹ from the Jacobians recorded at the preimages.
InversePath inverse_gradient(InversePath inverse);

/// Euler–Heun stepping of dZ = −Ū(Z) b(x) dt − Ū(Z) σ(x) ∘ dw with Ū
/// re-propagated from the start for every evaluation. Stores every grid time.
InversePath integrate_inverse_sde_stratonovich(const CoefficientField& field, std::shared_ptr<const NoiseRecord> noise,
                                               const std::vector<Vec>& query_points, Scheme scheme = Scheme::Euler);

}  // namespace stochflow
