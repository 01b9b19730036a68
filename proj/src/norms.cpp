#include "stochflow/norms.hpp"

#include "stochflow/error.hpp"

#include <algorithm>
#include <cmath>

namespace stochflow {

double weight(const Vec& x, double power) { return std::pow(1.0 + x.squaredNorm(), 0.5 * power); }

GridFunction::GridFunction(SpatialGrid g, int comps) : grid(std::move(g)), components(comps) {
  require(comps >= 1, ErrorKind::InvalidArgument, "grid function needs at least one component");
  values.assign(grid.size() * static_cast<std::size_t>(components), 0.0);
}

Eigen::Map<const Eigen::VectorXd> GridFunction::at(std::size_t node) const {
  return {values.data() + node * static_cast<std::size_t>(components), components};
}

Eigen::Map<Eigen::VectorXd> GridFunction::at(std::size_t node) {
  return {values.data() + node * static_cast<std::size_t>(components), components};
}

GridFunction GridFunction::sample(const SpatialGrid& grid, int components,
                                  const std::function<Eigen::VectorXd(const Vec&)>& f) {
  GridFunction out(grid, components);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Eigen::VectorXd v = f(grid.node(i));
    require(v.size() == components, ErrorKind::DimensionMismatch, "sampled value has the wrong size");
    require(v.allFinite(), ErrorKind::NonFiniteValue, "grid function values must be finite");
    out.at(i) = v;
  }
  return out;
}

double sup_norm(const GridFunction& f) {
  double best = 0.0;
  for (std::size_t i = 0; i < f.grid.size(); ++i) best = std::max(best, f.at(i).norm());
  return best;
}

double holder_seminorm(const GridFunction& f, double alpha, int max_offset, double max_dist) {
  require(alpha > 0.0 && alpha <= 1.0, ErrorKind::InvalidArgument, "Hölder exponent must lie in (0, 1]");
  return grid_holder_seminorm(
      f.grid, alpha, [&](std::size_t i, std::size_t j) { return (f.at(i) - f.at(j)).norm(); }, max_offset,
      max_dist);
}

namespace {

void require_resolution(const SpatialGrid& grid) {
  for (int a = 0; a < grid.dim(); ++a) {
    require(grid.count(a) >= 3, ErrorKind::GridTooCoarse, "need at least 3 nodes per axis");
  }
}

}  // namespace

GridFunction partial_derivative(const GridFunction& f, int axis) {
  require_resolution(f.grid);
  GridFunction out(f.grid, f.components);
  const double h = f.grid.step();
  const int n = f.grid.count(axis);
  for (std::size_t i = 0; i < f.grid.size(); ++i) {
    auto idx = f.grid.multi_index(i);
    const int k = idx[static_cast<std::size_t>(axis)];
    auto at = [&](int kk) {
      idx[static_cast<std::size_t>(axis)] = kk;
      return f.at(f.grid.flat_index(idx));
    };
    if (k == 0) {
      out.at(i) = (at(1) - at(0)) / h;
    } else if (k == n - 1) {
      out.at(i) = (at(n - 1) - at(n - 2)) / h;
    } else {
      out.at(i) = (at(k + 1) - at(k - 1)) / (2.0 * h);
    }
  }
  return out;
}

double holder_norm(const GridFunction& f, double beta) {
  require(beta > 0.0 && beta <= 2.0, ErrorKind::InvalidArgument, "beta must lie in (0, 2]");
  require_resolution(f.grid);
  if (beta <= 1.0) return sup_norm(f) + holder_seminorm(f, beta);
  double total = sup_norm(f);
  for (int a = 0; a < f.grid.dim(); ++a) {
    const GridFunction g = partial_derivative(f, a);
    total += sup_norm(g) + holder_seminorm(g, beta - 1.0);
  }
  return total;
}

double sobolev_functional(const GridFunction& f, double delta, double p, bool whole_space) {
  require(delta > 0.0 && delta <= 1.0, ErrorKind::InvalidArgument, "delta must lie in (0, 1]");
  require(p >= 1.0, ErrorKind::InvalidArgument, "p must be at least 1");
  require(f.grid.size() >= 2, ErrorKind::GridTooCoarse, "need at least two nodes");
  const int d = f.grid.dim();
  const double h = f.grid.step();
  const double cell = std::pow(h, d);
  const double exponent = 2.0 * d + delta * p;
  const auto nodes = f.grid.nodes();
  const std::size_t n = nodes.size();

  double pairs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dist = (nodes[i] - nodes[j]).norm();
      if (dist < 0.5 * h) continue;
      if (whole_space && dist >= 1.0) continue;
      const double diff = (f.at(i) - f.at(j)).norm();
      if (diff == 0.0) continue;
      row += std::pow(diff, p) / std::pow(dist, exponent);
    }
    pairs += row;
  }
  double total = 2.0 * pairs * cell * cell;
  if (whole_space) {
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) mass += std::pow(f.at(i).norm(), p);
    total += mass * cell;
  }
  return std::pow(total, 1.0 / p);
}

WeightedHolderReport weighted_holder_report(const SpatialGrid& grid, const FieldSamples& samples, double epsilon,
                                            double beta_prime) {
  require(epsilon > 0.0, ErrorKind::InvalidArgument, "epsilon must be positive");
  require(beta_prime >= 1.0 && beta_prime <= 2.0, ErrorKind::InvalidArgument, "beta_prime must lie in [1, 2]");
  WeightedHolderReport rep;
  rep.epsilon = epsilon;
  rep.beta_prime = beta_prime;
  rep.box = grid.box();
  rep.grid_step = grid.step();
  rep.has_gradient = static_cast<bool>(samples.grad);

  const std::size_t n = grid.size();
  std::vector<double> value_w(n), grad_w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec x = grid.node(i);
    value_w[i] = weight(x, -(1.0 + epsilon));
    grad_w[i] = weight(x, -epsilon);
  }
  const double order = beta_prime - 1.0;
  for (std::size_t k = 0; k < samples.time_count; ++k) {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v = std::max(v, value_w[i] * samples.value(k, i).norm());
    rep.value_per_time.push_back(v);
    rep.sup_weighted_value = std::max(rep.sup_weighted_value, v);
    if (!rep.has_gradient) continue;
    GridFunction g;
    for (std::size_t i = 0; i < n; ++i) {
      const Mat m = grad_w[i] * samples.grad(k, i);
      if (i == 0) g = GridFunction(grid, static_cast<int>(m.size()));
      g.at(i) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    }
    const double gv = order > 0.0 ? sup_norm(g) + holder_seminorm(g, order) : sup_norm(g);
    rep.grad_per_time.push_back(gv);
    rep.grad_holder_weighted = std::max(rep.grad_holder_weighted, gv);
  }
  return rep;
}

namespace {

void require_grid_points(const std::vector<Vec>& points, const SpatialGrid& grid) {
  require(points.size() == grid.size(), ErrorKind::DimensionMismatch, "path points do not match the grid nodes");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec node = grid.node(i);
    require((points[i] - node).norm() <= 1e-12 * (1.0 + node.norm()), ErrorKind::DimensionMismatch,
            "path points do not match the grid nodes");
  }
}

}  // namespace

WeightedHolderReport weighted_holder_report(const FlowPath& flow, const SpatialGrid& grid, double epsilon,
                                            double beta_prime, bool with_gradient) {
  require_grid_points(flow.initial_points, grid);
  if (with_gradient) require(flow.has_jacobians(), ErrorKind::MissingGradient, "flow has no Jacobians");
  FieldSamples s;
  s.time_count = flow.time_count();
  s.value = [&](std::size_t k, std::size_t i) { return flow.state(k, i); };
  if (with_gradient) s.grad = [&](std::size_t k, std::size_t i) { return flow.jacobian(k, i); };
  return weighted_holder_report(grid, s, epsilon, beta_prime);
}

WeightedHolderReport weighted_holder_report(const InversePath& inverse, const SpatialGrid& grid, double epsilon,
                                            double beta_prime, bool with_gradient) {
  require_grid_points(inverse.query_points, grid);
  if (with_gradient) require(inverse.has_gradients(), ErrorKind::MissingGradient, "inverse path has no gradients");
  FieldSamples s;
  s.time_count = inverse.time_count();
  s.value = [&](std::size_t k, std::size_t i) { return inverse.value(k, i); };
  if (with_gradient) s.grad = [&](std::size_t k, std::size_t i) { return inverse.gradient(k, i); };
  return weighted_holder_report(grid, s, epsilon, beta_prime);
}

MomentEstimate moment_estimate(std::span<const double> samples, double p) {
  require(samples.size() >= 2, ErrorKind::InvalidArgument, "moment estimate needs at least two samples");
  require(p >= 1.0, ErrorKind::InvalidArgument, "moment order must be at least 1");
  std::vector<double> q(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    require(std::isfinite(samples[i]) && samples[i] >= 0.0, ErrorKind::NonFiniteValue,
            "moment samples must be finite and nonnegative");
    q[i] = p == 1.0 ? samples[i] : std::pow(samples[i], p);
  }
  if (std::all_of(q.begin(), q.end(), [&](double v) { return v == q.front(); })) return {q.front(), 0.0};
  const double n = static_cast<double>(q.size());
  double mean = 0.0;
  for (double v : q) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : q) var += (v - mean) * (v - mean);
  var /= n - 1.0;
  return {mean, 1.959963984540054 * std::sqrt(var / n)};
}

MomentEstimate moment_estimate(std::span<const WeightedHolderReport> reports, double p, ReportQuantity quantity) {
  std::vector<double> samples;
  samples.reserve(reports.size());
  for (const auto& r : reports) {
    if (quantity == ReportQuantity::Gradient) {
      require(r.has_gradient, ErrorKind::MissingGradient, "report has no gradient part");
      samples.push_back(r.grad_holder_weighted);
    } else {
      samples.push_back(r.sup_weighted_value);
    }
  }
  return moment_estimate(samples, p);
}

}  // namespace stochflow
