#include "stochflow/flow.hpp"

#include "stepper.hpp"
#include "stochflow/error.hpp"

#include <algorithm>

namespace stochflow {

std::string_view to_string(Scheme scheme) {
  return scheme == Scheme::Euler ? "euler" : "exact";
}

Scheme scheme_from_string(std::string_view name) {
  if (name == "euler") return Scheme::Euler;
  if (name == "exact" || name == "exact-family") return Scheme::ExactFamily;
  fail(ErrorKind::InvalidArgument, "unknown scheme '" + std::string(name) + "'");
}

namespace {

std::size_t vec_offset(const FlowPath& f, std::size_t k, std::size_t i) {
  return (k * f.point_count() + i) * static_cast<std::size_t>(f.dim);
}

std::size_t mat_offset(const FlowPath& f, std::size_t k, std::size_t i) {
  return (k * f.point_count() + i) * static_cast<std::size_t>(f.dim * f.dim);
}

Vec load_vec(const std::vector<double>& data, std::size_t off, int d) {
  return Eigen::Map<const Eigen::VectorXd>(data.data() + off, d);
}

Mat load_mat(const std::vector<double>& data, std::size_t off, int d) {
  return Eigen::Map<const Eigen::MatrixXd>(data.data() + off, d, d);
}

void store_vec(std::vector<double>& data, std::size_t off, const Vec& v) {
  std::copy(v.data(), v.data() + v.size(), data.begin() + static_cast<std::ptrdiff_t>(off));
}

void store_mat(std::vector<double>& data, std::size_t off, const Mat& m) {
  std::copy(m.data(), m.data() + m.size(), data.begin() + static_cast<std::ptrdiff_t>(off));
}

void check_finite_matrix(const Mat& m, double t) {
  if (!all_finite(m)) fail(ErrorKind::NonFiniteState, "Jacobian became non-finite at t=" + std::to_string(t));
}

}  // namespace

Vec FlowPath::state(std::size_t k, std::size_t i) const { return load_vec(states, vec_offset(*this, k, i), dim); }

Vec FlowPath::left_state(std::size_t k, std::size_t i) const {
  return load_vec(left_states, vec_offset(*this, k, i), dim);
}

Mat FlowPath::jacobian(std::size_t k, std::size_t i) const {
  require(has_jacobians(), ErrorKind::MissingGradient, "flow has no Jacobians");
  return load_mat(jacobians, mat_offset(*this, k, i), dim);
}

Mat FlowPath::inverse_jacobian(std::size_t k, std::size_t i) const {
  require(has_inverse_jacobians(), ErrorKind::MissingGradient, "flow has no inverse Jacobians");
  return load_mat(inverse_jacobians, mat_offset(*this, k, i), dim);
}

FlowPath integrate_flow(const CoefficientField& field, const MarkMeasure& measure,
                        std::shared_ptr<const NoiseRecord> noise, const std::vector<Vec>& initial_points,
                        Scheme scheme) {
  require(noise != nullptr, ErrorKind::InvalidArgument, "flow needs a noise record");
  for (const auto& x : initial_points) {
    require(x.size() == field.dim(), ErrorKind::DimensionMismatch, "initial point dimension differs from field");
    require(all_finite(x), ErrorKind::NonFiniteState, "initial points must be finite");
  }
  detail::Stepper stepper(field, measure, *noise, scheme);

  FlowPath f;
  f.noise = std::move(noise);
  f.measure = measure;
  f.scheme = scheme;
  f.dim = field.dim();
  f.initial_points = initial_points;
  const std::size_t total = f.time_count() * f.point_count() * static_cast<std::size_t>(f.dim);
  f.states.resize(total);
  f.left_states.resize(total);
  const auto& times = f.grid().times;

  for (std::size_t i = 0; i < f.point_count(); ++i) {
    Vec x = initial_points[i];
    store_vec(f.states, vec_offset(f, 0, i), x);
    store_vec(f.left_states, vec_offset(f, 0, i), x);
    for (std::size_t k = 0; k + 1 < f.time_count(); ++k) {
      x = stepper.advance(k, x);
      detail::check_finite_state(x, times[k + 1]);
      store_vec(f.left_states, vec_offset(f, k + 1, i), x);
      if (stepper.jump_at(k + 1)) {
        x = stepper.apply_jump(k + 1, x);
        detail::check_finite_state(x, times[k + 1]);
      }
      store_vec(f.states, vec_offset(f, k + 1, i), x);
    }
  }
  return f;
}

FlowPath integrate_flow(const CoefficientField& field, const MarkMeasure& measure, const NoiseRecord& noise,
                        const std::vector<Vec>& initial_points, Scheme scheme) {
  return integrate_flow(field, measure, std::make_shared<const NoiseRecord>(noise), initial_points, scheme);
}

FlowPath integrate_jacobian(const CoefficientField& field, FlowPath flow) {
  require(field.dim() == flow.dim, ErrorKind::DimensionMismatch, "field and flow dimensions differ");
  detail::Stepper stepper(field, flow.measure, *flow.noise, flow.scheme);
  const int d = flow.dim;
  flow.jacobians.assign(flow.time_count() * flow.point_count() * static_cast<std::size_t>(d * d), 0.0);
  const auto& times = flow.grid().times;
  for (std::size_t i = 0; i < flow.point_count(); ++i) {
    Mat u = identity(d);
    store_mat(flow.jacobians, mat_offset(flow, 0, i), u);
    for (std::size_t k = 0; k + 1 < flow.time_count(); ++k) {
      u = stepper.advance_jacobian(k, flow.state(k, i)) * u;
      if (stepper.jump_at(k + 1)) u = stepper.jump_jacobian(k + 1, flow.left_state(k + 1, i)) * u;
      check_finite_matrix(u, times[k + 1]);
      store_mat(flow.jacobians, mat_offset(flow, k + 1, i), u);
    }
  }
  return flow;
}

FlowPath integrate_inverse_jacobian(const CoefficientField& field, FlowPath flow) {
  require(field.dim() == flow.dim, ErrorKind::DimensionMismatch, "field and flow dimensions differ");
  detail::Stepper stepper(field, flow.measure, *flow.noise, flow.scheme);
  const int d = flow.dim;
  flow.inverse_jacobians.assign(flow.time_count() * flow.point_count() * static_cast<std::size_t>(d * d), 0.0);
  const auto& times = flow.grid().times;
  for (std::size_t i = 0; i < flow.point_count(); ++i) {
    Mat ubar = identity(d);
    store_mat(flow.inverse_jacobians, mat_offset(flow, 0, i), ubar);
    for (std::size_t k = 0; k + 1 < flow.time_count(); ++k) {
      ubar = stepper.inverse_jacobian_step(k, flow.state(k, i), ubar);
      if (stepper.jump_at(k + 1)) {
        const Mat jj = stepper.jump_jacobian(k + 1, flow.left_state(k + 1, i));
        const auto lu = jj.partialPivLu();
        if (std::abs(lu.determinant()) < 1e-12) {
          fail(ErrorKind::SingularJumpJacobian,
               "det(I + grad H) vanishes at the jump at t=" + std::to_string(times[k + 1]));
        }
        ubar = ubar * lu.inverse();
      }
      check_finite_matrix(ubar, times[k + 1]);
      store_mat(flow.inverse_jacobians, mat_offset(flow, k + 1, i), ubar);
    }
  }
  return flow;
}

double flow_composition_check(const CoefficientField& field, const MarkMeasure& measure, const NoiseRecord& noise,
                              double s, double r, double t, const std::vector<Vec>& points, Scheme scheme) {
  require(s < r && r < t, ErrorKind::InvalidInterval, "composition check needs s < r < t");
  const FlowPath full = integrate_flow(field, measure, restrict_noise(noise, s, t), points, scheme);
  const FlowPath head = integrate_flow(field, measure, restrict_noise(noise, s, r), points, scheme);
  std::vector<Vec> mid;
  mid.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) mid.push_back(head.state(head.time_count() - 1, i));
  const FlowPath tail = integrate_flow(field, measure, restrict_noise(noise, r, t), mid, scheme);
  double sup = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    sup = std::max(sup, (full.state(full.time_count() - 1, i) - tail.state(tail.time_count() - 1, i)).norm());
  }
  return sup;
}

}  // namespace stochflow
