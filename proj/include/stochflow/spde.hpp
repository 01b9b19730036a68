#pragma once

#include "stochflow/coeffs.hpp"
#include "stochflow/flow.hpp"
#include "stochflow/grid.hpp"
#include "stochflow/inverse.hpp"
#include "stochflow/noise.hpp"

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

namespace stochflow {

enum class SpdeVariant { InverseFlow, Bar };

/// u_t(x) = Y_t⁻¹(s, x) sampled on the nodes of a spatial grid.
struct SpdeSolution {
  SpdeVariant variant = SpdeVariant::InverseFlow;
  SpatialGrid grid;
  double s = 0.0;
  double t_end = 0.0;
  std::shared_ptr<const NoiseRecord> noise;  // restricted to [s, t_end]
  std::shared_ptr<const CoefficientField> flow_field;  // the field whose flow is inverted
  Scheme scheme = Scheme::Euler;
  InversePath inverse;  // values on the grid nodes at the stored times

  std::size_t time_count() const { return inverse.time_count(); }
  double time(std::size_t j) const { return noise->grid.times[inverse.time_indices[j]]; }
  Vec value(std::size_t j, std::size_t node) const { return inverse.value(j, node); }
  /// Multilinear interpolation of u at stored time j; OutOfGrid outside the box.
  Vec interpolate(std::size_t j, const Vec& x) const;
};

/// The field (−b̂, −σ) whose flow inverse solves the adjoint-type equation.
CoefficientField bar_field(const CoefficientField& field);

/// Inverts the forward flow from s onto the grid nodes at the selected grid
/// times of the restricted noise (empty selection means every time).
SpdeSolution solve_spde_characteristics(const CoefficientField& field, const NoiseRecord& noise, double s,
                                        double t_end, const SpatialGrid& grid, double tol,
                                        Scheme scheme = Scheme::Euler, std::vector<std::size_t> time_indices = {});

SpdeSolution solve_spde_bar(const CoefficientField& field, const NoiseRecord& noise, double s, double t_end,
                            const SpatialGrid& grid, double tol, Scheme scheme = Scheme::Euler,
                            std::vector<std::size_t> time_indices = {});

/// sup over probes and stored times of |u_t(Y_t(x)) − x|, with u interpolated.
double ito_wentzell_check(const SpdeSolution& solution, const std::vector<Vec>& probes);

struct PartitionReport {
  int M = 0;
  Vec sum_a;
  Vec sum_c;
  Vec sum_d;
  Vec lhs;  // u_t(x) − x
  double identity_residual = 0.0;
  std::array<Vec, 3> claim_targets;
  std::array<double, 3> claim_residuals{};
};

struct PartitionOptions {
  double fd_step = 1e-3;
  int quad_order = 8;
  double tol = 0.0;  // 0 selects the scheme default
  Scheme scheme = Scheme::Euler;
};

/// Telescoping expansion of u_t(x) − x over M equal partition intervals, with
/// the three limit targets computed by quadrature on the noise grid.
PartitionReport partition_expansion(const CoefficientField& field, const NoiseRecord& noise, double s, double t_end,
                                    const Vec& x, int M, const PartitionOptions& options = {});

/// Claim targets depend on the realization only, so they can be shared across M.
std::array<Vec, 3> partition_claim_targets(const CoefficientField& field, const NoiseRecord& noise, double s,
                                           double t_end, const Vec& x, const PartitionOptions& options = {});

PartitionReport partition_expansion(const CoefficientField& field, const NoiseRecord& noise, double s, double t_end,
                                    const Vec& x, int M, const PartitionOptions& options,
                                    const std::array<Vec, 3>& claim_targets);

/// Gauss–Legendre nodes and weights on (0, 1).
void gauss_legendre_unit(int order, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace stochflow
