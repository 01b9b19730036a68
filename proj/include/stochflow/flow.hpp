#pragma once

#include "stochflow/coeffs.hpp"
#include "stochflow/noise.hpp"

#include <cstddef>
#include <memory>
#include <string_view>
#include <vector>

namespace stochflow {

enum class Scheme { Euler, ExactFamily };

std::string_view to_string(Scheme scheme);
Scheme scheme_from_string(std::string_view name);

/// States, Jacobians and inverse Jacobians of a batch of initial points
/// driven by one noise realization. Layout is time-major: entry (k, i) is
/// grid time k, point i.
struct FlowPath {
  std::shared_ptr<const NoiseRecord> noise;
  MarkMeasure measure;
  Scheme scheme = Scheme::Euler;
  int dim = 1;
  std::vector<Vec> initial_points;
  std::vector<double> states;
  std::vector<double> left_states;  // X_{t−}; equal to states off jump times
  std::vector<double> jacobians;  // empty until integrate_jacobian
  std::vector<double> inverse_jacobians;  // empty until integrate_inverse_jacobian

  const TimeGrid& grid() const { return noise->grid; }
  std::size_t time_count() const { return noise->grid.size(); }
  std::size_t point_count() const { return initial_points.size(); }
  bool has_jacobians() const { return !jacobians.empty(); }
  bool has_inverse_jacobians() const { return !inverse_jacobians.empty(); }

  Vec state(std::size_t k, std::size_t i) const;
  Vec left_state(std::size_t k, std::size_t i) const;
  Mat jacobian(std::size_t k, std::size_t i) const;
  Mat inverse_jacobian(std::size_t k, std::size_t i) const;
};

/// Joint flow of all points. Between jumps: Euler–Maruyama with the
/// compensator drift (or the closed-form affine step); at jumps X ← X + H(X−, z).
FlowPath integrate_flow(const CoefficientField& field, const MarkMeasure& measure,
                        std::shared_ptr<const NoiseRecord> noise, const std::vector<Vec>& initial_points,
                        Scheme scheme = Scheme::Euler);
FlowPath integrate_flow(const CoefficientField& field, const MarkMeasure& measure, const NoiseRecord& noise,
                        const std::vector<Vec>& initial_points, Scheme scheme = Scheme::Euler);

/// Fills U = ∇X along the stored path.
FlowPath integrate_jacobian(const CoefficientField& field, FlowPath flow);

/// Fills Ū = [∇X]⁻¹ by stepping its own linear SDE, not by inverting U.
FlowPath integrate_inverse_jacobian(const CoefficientField& field, FlowPath flow);

/// sup over points of |X_t(s,x) − X_t(r, X_r(s,x))| on the restricted noise.
double flow_composition_check(const CoefficientField& field, const MarkMeasure& measure, const NoiseRecord& noise,
                              double s, double r, double t, const std::vector<Vec>& points,
                              Scheme scheme = Scheme::Euler);

}  // namespace stochflow
