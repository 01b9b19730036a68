#include "stochflow/limits.hpp"

#include "stochflow/error.hpp"
#include "stochflow/inverse.hpp"
#include "stochflow/noise.hpp"
#include "stochflow/norms.hpp"
#include "stochflow/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>

namespace stochflow {

double CoefficientDistance::total() const {
  double t = drift_value + drift_grad + sigma_value + sigma_grad;
  for (double k : jump_k) t += k;
  return t;
}

namespace {

Eigen::VectorXd flatten(const Mat& m) { return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()); }

Eigen::VectorXd flatten(const MatList& l) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(l.size()) * (l.empty() ? 0 : l[0].size()));
  Eigen::Index pos = 0;
  for (const auto& m : l) {
    out.segment(pos, m.size()) = flatten(m);
    pos += m.size();
  }
  return out;
}

double gradient_distance(const SpatialGrid& grid, double order,
                         const std::function<Eigen::VectorXd(const Vec&)>& diff) {
  const Eigen::VectorXd probe = diff(grid.node(0));
  const GridFunction g = GridFunction::sample(grid, static_cast<int>(probe.size()), diff);
  return holder_norm(g, order);
}

}  // namespace

CoefficientDistance coefficient_distance(const CoefficientField& field_n, const CoefficientField& field,
                                         const MarkMeasure& measure, const Box& box, double grid_step,
                                         std::span<const double> t_samples) {
  require(field_n.dim() == field.dim() && field_n.brownian_count() == field.brownian_count(),
          ErrorKind::DimensionMismatch, "fields differ in dimension or number of Wiener components");
  require(box.dim() == field.dim(), ErrorKind::DimensionMismatch, "box dimension differs from field");
  const SpatialGrid grid(box, grid_step);
  const std::vector<double> default_times{0.0};
  if (t_samples.empty()) t_samples = default_times;
  const double order = std::min(field.regularity().beta - 1.0, 2.0);
  require(order > 0.0, ErrorKind::InvalidArgument, "beta must exceed 1");

  CoefficientDistance out;
  out.jump_k.assign(measure.size(), 0.0);
  for (double t : t_samples) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Vec x = grid.node(i);
      const double w = 1.0 / r1(x);
      out.drift_value = std::max(out.drift_value, w * (field_n.drift(t, x) - field.drift(t, x)).norm());
      out.sigma_value = std::max(out.sigma_value, w * (field_n.diffusion(t, x) - field.diffusion(t, x)).norm());
    }
    out.drift_grad = std::max(out.drift_grad, gradient_distance(grid, order, [&](const Vec& x) {
      return Eigen::VectorXd(flatten(Mat(field_n.drift_grad(t, x) - field.drift_grad(t, x))));
    }));
    out.sigma_grad = std::max(out.sigma_grad, gradient_distance(grid, order, [&](const Vec& x) {
      return Eigen::VectorXd(flatten(field_n.diffusion_grad(t, x)) - flatten(field.diffusion_grad(t, x)));
    }));
    for (std::size_t k = 0; k < measure.size(); ++k) {
      const double z = measure.atoms()[k].mark;
      double value = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec x = grid.node(i);
        value = std::max(value, (field_n.jump(t, x, z) - field.jump(t, x, z)).norm() / r1(x));
      }
      const double grad = gradient_distance(grid, order, [&](const Vec& x) {
        return Eigen::VectorXd(flatten(Mat(field_n.jump_grad(t, x, z) - field.jump_grad(t, x, z))));
      });
      out.jump_k[k] = std::max(out.jump_k[k], value + grad);
    }
  }
  for (std::size_t k = 0; k < measure.size(); ++k)
    out.jump_k_squared += measure.atoms()[k].rate * out.jump_k[k] * out.jump_k[k];
  return out;
}

ConvergenceReport strong_limit_run(const std::vector<CoefficientField>& fields_n, const std::vector<int>& ns,
                                   const CoefficientField& field, const MarkMeasure& measure,
                                   const LimitOptions& options) {
  require(fields_n.size() == ns.size(), ErrorKind::InvalidArgument, "one n per perturbed field is required");
  require(std::is_sorted(ns.begin(), ns.end()) && std::adjacent_find(ns.begin(), ns.end()) == ns.end(),
          ErrorKind::InvalidArgument, "n values must be strictly increasing");
  require(options.paths >= 2, ErrorKind::InvalidArgument, "at least two paths are required");
  for (const auto& f : fields_n) {
    require(f.dim() == field.dim() && f.brownian_count() == field.brownian_count(), ErrorKind::DimensionMismatch,
            "perturbed field differs in dimension or number of Wiener components");
  }
  const SpatialGrid grid(options.box, options.grid_step);
  const std::vector<Vec> nodes = grid.nodes();
  const double tol = options.tol > 0.0 ? options.tol : default_inverse_tol(options.scheme);
  const std::size_t count = fields_n.size();

  // samples[path][n] = {flow value, flow grad, inverse value, inverse grad}
  std::vector<std::vector<std::array<double, 4>>> samples(options.paths, std::vector<std::array<double, 4>>(count));

  parallel_for(options.paths, options.workers, [&](std::size_t path) {
    const auto noise = std::make_shared<const NoiseRecord>(generate_noise(
        measure, field.brownian_count(), options.s, options.t_end, options.base_steps, options.seed, path));
    auto run = [&](const CoefficientField& f, FlowPath& flow, InversePath& inv) {
      flow = integrate_jacobian(f, integrate_flow(f, measure, noise, nodes, options.scheme));
      if (options.inverse) inv = inverse_gradient(invert_flow(f, flow, nodes, tol));
    };
    FlowPath base;
    InversePath base_inv;
    run(field, base, base_inv);
    for (std::size_t j = 0; j < count; ++j) {
      FlowPath fn;
      InversePath inv_n;
      run(fields_n[j], fn, inv_n);
      FieldSamples fs;
      fs.time_count = base.time_count();
      fs.value = [&](std::size_t k, std::size_t i) { return Vec(fn.state(k, i) - base.state(k, i)); };
      fs.grad = [&](std::size_t k, std::size_t i) { return Mat(fn.jacobian(k, i) - base.jacobian(k, i)); };
      const auto fr = weighted_holder_report(grid, fs, options.epsilon, options.beta_prime);
      auto& out = samples[path][j];
      out[0] = fr.sup_weighted_value;
      out[1] = fr.grad_holder_weighted;
      if (options.inverse) {
        FieldSamples is;
        is.time_count = base_inv.time_count();
        is.value = [&](std::size_t k, std::size_t i) { return Vec(inv_n.value(k, i) - base_inv.value(k, i)); };
        is.grad = [&](std::size_t k, std::size_t i) { return Mat(inv_n.gradient(k, i) - base_inv.gradient(k, i)); };
        const auto ir = weighted_holder_report(grid, is, options.epsilon, options.beta_prime);
        out[2] = ir.sup_weighted_value;
        out[3] = ir.grad_holder_weighted;
      }
    }
  });

  ConvergenceReport rep;
  rep.options = options;
  const std::vector<double> t_samples{options.s, 0.5 * (options.s + options.t_end), options.t_end};
  for (std::size_t j = 0; j < count; ++j) {
    ConvergenceRecord rec;
    rec.n = ns[j];
    rec.coeff = coefficient_distance(fields_n[j], field, measure, options.box, options.grid_step, t_samples);
    std::array<std::vector<double>, 4> col;
    for (std::size_t path = 0; path < options.paths; ++path)
      for (std::size_t q = 0; q < 4; ++q) col[q].push_back(samples[path][j][q]);
    const auto fv = moment_estimate(col[0], options.p);
    const auto fg = moment_estimate(col[1], options.p);
    rec.flow_value = fv.mean;
    rec.flow_value_ci95 = fv.ci95;
    rec.flow_grad = fg.mean;
    rec.flow_grad_ci95 = fg.ci95;
    if (options.inverse) {
      const auto iv = moment_estimate(col[2], options.p);
      const auto ig = moment_estimate(col[3], options.p);
      rec.inverse_value = iv.mean;
      rec.inverse_value_ci95 = iv.ci95;
      rec.inverse_grad = ig.mean;
      rec.inverse_grad_ci95 = ig.ci95;
    }
    rep.records.push_back(std::move(rec));
  }
  return rep;
}

}  // namespace stochflow
