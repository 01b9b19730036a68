#include "stochflow/inverse.hpp"

#include "stepper.hpp"
#include "stochflow/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace stochflow {

namespace {

Vec load_vec(const std::vector<double>& data, std::size_t off, int d) {
  return Eigen::Map<const Eigen::VectorXd>(data.data() + off, d);
}

Mat load_mat(const std::vector<double>& data, std::size_t off, int d) {
  return Eigen::Map<const Eigen::MatrixXd>(data.data() + off, d, d);
}

void store(std::vector<double>& data, std::size_t off, const Vec& v) {
  std::copy(v.data(), v.data() + v.size(), data.begin() + static_cast<std::ptrdiff_t>(off));
}

void store(std::vector<double>& data, std::size_t off, const Mat& m) {
  std::copy(m.data(), m.data() + m.size(), data.begin() + static_cast<std::ptrdiff_t>(off));
}

double residual_floor(double tol, const Vec& y) {
  return std::max(tol, 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + y.norm()));
}

}  // namespace

Vec InversePath::value(std::size_t j, std::size_t i) const {
  return load_vec(values, (j * point_count() + i) * static_cast<std::size_t>(dim), dim);
}

Mat InversePath::preimage_jacobian(std::size_t j, std::size_t i) const {
  return load_mat(preimage_jacobians, (j * point_count() + i) * static_cast<std::size_t>(dim * dim), dim);
}

Mat InversePath::gradient(std::size_t j, std::size_t i) const {
  require(has_gradients(), ErrorKind::MissingGradient, "inverse path has no gradients");
  return load_mat(gradients, (j * point_count() + i) * static_cast<std::size_t>(dim * dim), dim);
}

double InversePath::max_residual() const {
  return residuals.empty() ? 0.0 : *std::max_element(residuals.begin(), residuals.end());
}

double default_inverse_tol(Scheme scheme) { return scheme == Scheme::ExactFamily ? 1e-10 : 1e-8; }

Vec invert_jump_map(const CoefficientField& field, const MarkMeasure& measure, double t, double z, const Vec& y,
                    double tol) {
  require(y.size() == field.dim(), ErrorKind::DimensionMismatch, "point dimension differs from field");
  const double eps = residual_floor(tol, y);
  const double eta = field.regularity().eta;
  Vec x = y;
  JumpEvaluation je = eval_jump(field, measure, t, x, z);
  Vec g = x + je.h - y;
  double gn = g.norm();

  for (int it = 0; it < 200 && gn > eps && op_norm(je.grad_h) <= eta; ++it) {
    x = y - je.h;
    je = eval_jump(field, measure, t, x, z);
    g = x + je.h - y;
    gn = g.norm();
  }
  for (int it = 0; it < 50 && gn > eps; ++it) {
    const Mat m = identity(field.dim()) + je.grad_h;
    const auto lu = m.partialPivLu();
    if (std::abs(lu.determinant()) < 1e-12) {
      std::ostringstream os;
      os << "det(I + grad H) vanishes near x=" << x.transpose() << " for mark " << z;
      fail(ErrorKind::SingularJumpJacobian, os.str());
    }
    const Vec dx = lu.solve(g);
    double lambda = 1.0;
    Vec trial = x - dx;
    JumpEvaluation tj = eval_jump(field, measure, t, trial, z);
    while ((trial + tj.h - y).norm() > gn && lambda > 1.0 / 1024.0) {
      lambda *= 0.5;
      trial = x - lambda * dx;
      tj = eval_jump(field, measure, t, trial, z);
    }
    x = trial;
    je = tj;
    g = x + je.h - y;
    gn = g.norm();
  }
  if (!(gn <= eps)) {
    std::ostringstream os;
    os << "jump map inversion did not converge (residual " << gn << ")";
    fail(ErrorKind::NoConvergence, os.str());
  }
  return x;
}

InversePath invert_flow(const CoefficientField& field, const FlowPath& flow, const std::vector<Vec>& query_points,
                        double tol, std::vector<std::size_t> time_indices) {
  require(tol > 0.0, ErrorKind::InvalidArgument, "inversion tolerance must be positive");
  require(field.dim() == flow.dim, ErrorKind::DimensionMismatch, "field and flow dimensions differ");
  if (time_indices.empty()) {
    time_indices.resize(flow.time_count());
    std::iota(time_indices.begin(), time_indices.end(), std::size_t{0});
  }
  for (std::size_t k : time_indices)
    require(k < flow.time_count(), ErrorKind::InvalidArgument, "time index outside the flow grid");
  detail::Stepper stepper(field, flow.measure, *flow.noise, flow.scheme);
  const int d = flow.dim;

  InversePath inv;
  inv.noise = flow.noise;
  inv.dim = d;
  inv.tol = tol;
  inv.time_indices = std::move(time_indices);
  inv.query_points = query_points;
  const std::size_t entries = inv.time_count() * inv.point_count();
  inv.values.resize(entries * static_cast<std::size_t>(d));
  inv.residuals.resize(entries);
  inv.preimage_jacobians.resize(entries * static_cast<std::size_t>(d * d));

  for (std::size_t j = 0; j < inv.time_count(); ++j) {
    const std::size_t k_end = inv.time_indices[j];
    for (std::size_t i = 0; i < inv.point_count(); ++i) {
      const Vec& y = query_points[i];
      require(y.size() == d, ErrorKind::DimensionMismatch, "query point dimension differs from field");
      Mat u;
      double rn = 0.0;
      const Vec x = stepper.invert_map(y, k_end, tol, &u, &rn);
      const std::size_t e = j * inv.point_count() + i;
      store(inv.values, e * static_cast<std::size_t>(d), x);
      store(inv.preimage_jacobians, e * static_cast<std::size_t>(d * d), u);
      inv.residuals[e] = rn;
    }
  }
  return inv;
}

InversePath inverse_gradient(InversePath inverse) {
  const int d = inverse.dim;
  require(inverse.preimage_jacobians.size() ==
              inverse.time_count() * inverse.point_count() * static_cast<std::size_t>(d * d),
          ErrorKind::MissingGradient, "inverse path carries no preimage Jacobians");
  inverse.gradients.resize(inverse.preimage_jacobians.size());
  for (std::size_t j = 0; j < inverse.time_count(); ++j) {
    for (std::size_t i = 0; i < inverse.point_count(); ++i) {
      const Mat u = inverse.preimage_jacobian(j, i);
      const auto lu = u.partialPivLu();
      if (std::abs(lu.determinant()) < 1e-12) {
        std::ostringstream os;
        os << "flow Jacobian is singular at the preimage of query " << i;
        fail(ErrorKind::SingularJacobian, os.str());
      }
      store(inverse.gradients, (j * inverse.point_count() + i) * static_cast<std::size_t>(d * d),
            Mat(lu.inverse()));
    }
  }
  return inverse;
}

InversePath integrate_inverse_sde_stratonovich(const CoefficientField& field, std::shared_ptr<const NoiseRecord> noise,
                                               const std::vector<Vec>& query_points, Scheme scheme) {
  require(noise != nullptr, ErrorKind::InvalidArgument, "inverse SDE needs a noise record");
  if (!field.jump_free()) {
    fail(ErrorKind::JumpFieldRejected, "the inverse-flow SDE is only defined for jump-free fields");
  }
  const NoiseRecord plain = detail::strip_jumps(*noise);
  const MarkMeasure no_jumps;
  detail::Stepper stepper(field, no_jumps, plain, scheme);
  const int d = field.dim();
  const std::size_t n_times = plain.grid.size();

  // Ū at grid point k of the flow started from z.
  auto ubar_at = [&](const Vec& z, std::size_t k) {
    Vec x = z;
    Mat ub = identity(d);
    for (std::size_t j = 0; j < k; ++j) {
      ub = stepper.inverse_jacobian_step(j, x, ub);
      x = stepper.advance(j, x);
    }
    return ub;
  };
  // Stratonovich drift b − ½ Σ ∇σ^ρ σ^ρ, so that the ∘dw form reproduces the Itô flow.
  auto strat_increment = [&](std::size_t k, double t, const Vec& x) {
    const Mat sigma = field.diffusion(t, x);
    const MatList gs = field.diffusion_grad(t, x);
    Vec drift = field.drift(t, x);
    for (std::size_t r = 0; r < gs.size(); ++r) drift.noalias() -= 0.5 * gs[r] * sigma.col(static_cast<int>(r));
    return Vec(drift * plain.dt(k) + sigma * plain.increment(k));
  };

  InversePath inv;
  inv.noise = noise;
  inv.dim = d;
  inv.time_indices.resize(n_times);
  std::iota(inv.time_indices.begin(), inv.time_indices.end(), std::size_t{0});
  inv.query_points = query_points;
  const std::size_t entries = n_times * query_points.size();
  inv.values.resize(entries * static_cast<std::size_t>(d));
  inv.residuals.resize(entries);
  inv.preimage_jacobians.resize(entries * static_cast<std::size_t>(d * d));

  const auto& times = plain.grid.times;
  for (std::size_t i = 0; i < query_points.size(); ++i) {
    const Vec& x = query_points[i];
    require(x.size() == d, ErrorKind::DimensionMismatch, "query point dimension differs from field");
    Vec z = x;
    for (std::size_t k = 0; k < n_times; ++k) {
      if (k > 0) {
        const Vec g0 = strat_increment(k - 1, times[k - 1], x);
        const Vec g1 = strat_increment(k - 1, times[k], x);
        const Vec f0 = ubar_at(z, k - 1) * g0;
        const Vec predictor = z - f0;
        z = z - 0.5 * (f0 + ubar_at(predictor, k) * g1);
        detail::check_finite_state(z, times[k]);
      }
      Mat u;
      const Vec r = stepper.propagate(z, k, &u) - x;
      const std::size_t e = k * query_points.size() + i;
      store(inv.values, e * static_cast<std::size_t>(d), z);
      store(inv.preimage_jacobians, e * static_cast<std::size_t>(d * d), u);
      inv.residuals[e] = r.norm();
    }
  }
  inv.tol = inv.max_residual();
  return inv;
}

}  // namespace stochflow
