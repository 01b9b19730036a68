#pragma once

#include "stochflow/flow.hpp"
#include "stochflow/grid.hpp"
#include "stochflow/inverse.hpp"
#include "stochflow/linalg.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace stochflow {

/// (1 + |x|²)^{power/2}
double weight(const Vec& x, double power);

/// Vector- or matrix-valued samples on a spatial grid. Each node carries
/// `components` values (a matrix is stored column-major). Pointwise sizes
/// are Euclidean / Frobenius.
struct GridFunction {
  SpatialGrid grid;
  int components = 1;
  std::vector<double> values;  // node-major

  GridFunction() = default;
  GridFunction(SpatialGrid grid, int components);

  Eigen::Map<const Eigen::VectorXd> at(std::size_t node) const;
  Eigen::Map<Eigen::VectorXd> at(std::size_t node);

  static GridFunction sample(const SpatialGrid& grid, int components,
                             const std::function<Eigen::VectorXd(const Vec&)>& f);
};

/// sup over nodes of the pointwise size.
double sup_norm(const GridFunction& f);

/// Grid-pair estimate of [f]_alpha over pairs within `max_offset` steps per
/// axis and closer than `max_dist`.
double holder_seminorm(const GridFunction& f, double alpha, int max_offset = 8, double max_dist = 1.0);

/// |f|_β for β ∈ (0, 2]: sup terms up to order [β]⁻ plus the {β}⁺ seminorm
/// of the top-order derivatives (central differences).
double holder_norm(const GridFunction& f, double beta);

/// Central-difference partial derivative along `axis` (one-sided at the box edge).
GridFunction partial_derivative(const GridFunction& f, int axis);

/// [f]_{δ,p;Q} by a node double sum with uniform cell weights; the self pair
/// (|x−y| < h/2) is excluded. `whole_space` adds ∫|f|^p and keeps only
/// pairs with |x−y| < 1.
double sobolev_functional(const GridFunction& f, double delta, double p, bool whole_space = false);

struct WeightedHolderReport {
  double epsilon = 1.0;
  double beta_prime = 1.0;
  Box box;
  double grid_step = 0.0;
  std::vector<double> value_per_time;  // |r₁^{−(1+ε)} X_t|₀
  std::vector<double> grad_per_time;   // |r₁^{−ε} ∇X_t|_{β′−1}; empty without gradients
  double sup_weighted_value = 0.0;
  double grad_holder_weighted = 0.0;
  bool has_gradient = false;
};

/// Per-time accessors over the nodes of `grid`; `grad` may be empty.
struct FieldSamples {
  std::size_t time_count = 0;
  std::function<Vec(std::size_t, std::size_t)> value;  // (time, node)
  std::function<Mat(std::size_t, std::size_t)> grad;
};

WeightedHolderReport weighted_holder_report(const SpatialGrid& grid, const FieldSamples& samples, double epsilon,
                                            double beta_prime);

/// The flow must have been started from the grid nodes in grid order.
WeightedHolderReport weighted_holder_report(const FlowPath& flow, const SpatialGrid& grid, double epsilon,
                                            double beta_prime, bool with_gradient);

/// The inverse must have been queried at the grid nodes in grid order.
WeightedHolderReport weighted_holder_report(const InversePath& inverse, const SpatialGrid& grid, double epsilon,
                                            double beta_prime, bool with_gradient);

struct MomentEstimate {
  double mean = 0.0;
  double ci95 = 0.0;
};

/// Sample mean of q^p with a normal-approximation 95% half-width.
MomentEstimate moment_estimate(std::span<const double> samples, double p);

enum class ReportQuantity { Value, Gradient };

MomentEstimate moment_estimate(std::span<const WeightedHolderReport> reports, double p,
                               ReportQuantity quantity = ReportQuantity::Value);

}  // namespace stochflow
