#include "stepper.hpp"

#include "stochflow/error.hpp"
#include "stochflow/inverse.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace stochflow::detail {

namespace {

bool is_zero(const Mat& m) { return m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0; }
bool is_zero(const Vec& v) { return v.size() == 0 || v.cwiseAbs().maxCoeff() == 0.0; }

bool commute(const Mat& a, const Mat& b) {
  const double scale = 1.0 + op_norm(a) * op_norm(b);
  return op_norm(Mat(a * b - b * a)) <= 1e-14 * scale;
}

double floor_tol(double tol, const Vec& y) {
  return std::max(tol, 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + y.norm()));
}

}  // namespace

void check_finite_state(const Vec& x, double t) {
  if (!all_finite(x)) {
    std::ostringstream os;
    os << "flow state became non-finite at t=" << t;
    fail(ErrorKind::NonFiniteState, os.str());
  }
}

NoiseRecord strip_jumps(const NoiseRecord& noise) {
  NoiseRecord out = noise;
  out.jumps.clear();
  std::fill(out.grid.jump_atom.begin(), out.grid.jump_atom.end(), -1);
  return out;
}

Stepper::Stepper(const CoefficientField& field, const MarkMeasure& measure, const NoiseRecord& noise, Scheme scheme)
    : field_(field), measure_(measure), noise_(&noise), scheme_(scheme) {
  require(noise.brownian_count == field.brownian_count(), ErrorKind::DimensionMismatch,
          "noise and field disagree on the number of Wiener components");
  for (const auto& e : noise.jumps) {
    require(e.atom >= 0 && static_cast<std::size_t>(e.atom) < measure.size(), ErrorKind::UnknownMark,
            "noise refers to an atom the measure does not have");
  }
  if (scheme_ == Scheme::ExactFamily) build_exact();
}

void Stepper::build_exact() {
  const auto& aff = field_.affine();
  if (!aff) fail(ErrorKind::SchemeUnavailable, "field '" + field_.name() + "' has no closed-form step");
  const int d = field_.dim();
  const double rate = measure_.total_rate();
  const Mat a_eff = aff->drift_matrix - rate * aff->jump_matrix;
  const Vec c_eff = aff->drift_offset - rate * aff->jump_offset;
  bool b_zero = true, b_commute = true;
  for (const auto& b : aff->diffusion_matrices) {
    b_zero = b_zero && is_zero(b);
    b_commute = b_commute && commute(a_eff, b);
    for (const auto& other : aff->diffusion_matrices) b_commute = b_commute && commute(b, other);
  }
  const bool s_zero = is_zero(aff->diffusion_offsets);

  enum class Kind { Deterministic, Additive, Multiplicative };
  Kind kind;
  if (b_zero && s_zero) {
    kind = Kind::Deterministic;
  } else if (b_zero && is_zero(a_eff)) {
    kind = Kind::Additive;
  } else if (s_zero && is_zero(c_eff) && b_commute) {
    kind = Kind::Multiplicative;
  } else {
    fail(ErrorKind::SchemeUnavailable, "field '" + field_.name() + "' has no closed-form step");
  }

  const std::size_t n = intervals();
  exact_m_.resize(n);
  exact_minv_.resize(n);
  exact_v_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double dt = noise_->dt(k);
    const Vec dw = noise_->increment(k);
    Eigen::MatrixXd m;
    Vec v = Vec::Zero(d);
    switch (kind) {
      case Kind::Deterministic: {
        Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(d + 1, d + 1);
        aug.topLeftCorner(d, d) = a_eff * dt;
        aug.topRightCorner(d, 1) = c_eff * dt;
        const Eigen::MatrixXd e = aug.exp();
        m = e.topLeftCorner(d, d);
        v = e.topRightCorner(d, 1);
        break;
      }
      case Kind::Additive:
        m = Eigen::MatrixXd::Identity(d, d);
        v = c_eff * dt + aff->diffusion_offsets * dw;
        break;
      case Kind::Multiplicative: {
        Eigen::MatrixXd gen = a_eff * dt;
        for (std::size_t r = 0; r < aff->diffusion_matrices.size(); ++r) {
          const Mat& b = aff->diffusion_matrices[r];
          gen += -0.5 * (b * b) * dt + b * dw(static_cast<int>(r));
        }
        m = gen.exp();
        break;
      }
    }
    exact_m_[k] = m;
    exact_minv_[k] = m.inverse();
    exact_v_[k] = v;
  }
}

double Stepper::mark_at(std::size_t k) const {
  return measure_.atoms()[static_cast<std::size_t>(noise_->grid.jump_atom[k])].mark;
}

Vec Stepper::euler_increment(std::size_t k, const Vec& x) const {
  const double t = noise_->grid.times[k];
  const double dt = noise_->dt(k);
  Vec f = (field_.drift(t, x) - compensator_drift(field_, measure_, t, x)) * dt;
  f.noalias() += field_.diffusion(t, x) * noise_->increment(k);
  return f;
}

Vec Stepper::advance(std::size_t k, const Vec& x) const {
  if (scheme_ == Scheme::ExactFamily) return exact_m_[k] * x + exact_v_[k];
  return x + euler_increment(k, x);
}

Mat Stepper::advance_jacobian(std::size_t k, const Vec& x) const {
  if (scheme_ == Scheme::ExactFamily) return exact_m_[k];
  const double t = noise_->grid.times[k];
  const double dt = noise_->dt(k);
  const Vec dw = noise_->increment(k);
  Mat j = identity(dim());
  j.noalias() += (field_.drift_grad(t, x) - compensator_grad(field_, measure_, t, x)) * dt;
  const MatList gs = field_.diffusion_grad(t, x);
  for (std::size_t r = 0; r < gs.size(); ++r) j.noalias() += gs[r] * dw(static_cast<int>(r));
  return j;
}

Mat Stepper::inverse_jacobian_step(std::size_t k, const Vec& x, const Mat& ubar) const {
  if (scheme_ == Scheme::ExactFamily) return ubar * exact_minv_[k];
  const double t = noise_->grid.times[k];
  const double dt = noise_->dt(k);
  const Vec dw = noise_->increment(k);
  const MatList gs = field_.diffusion_grad(t, x);
  Mat drift = compensator_grad(field_, measure_, t, x) - field_.drift_grad(t, x);
  Mat noise_part = Mat::Zero(dim(), dim());
  for (std::size_t r = 0; r < gs.size(); ++r) {
    drift.noalias() += gs[r] * gs[r];
    noise_part.noalias() += gs[r] * dw(static_cast<int>(r));
  }
  return ubar + ubar * (drift * dt - noise_part);
}

Vec Stepper::invert_advance(std::size_t k, const Vec& y, double tol) const {
  if (scheme_ == Scheme::ExactFamily) return exact_minv_[k] * (y - exact_v_[k]);
  const double eps = floor_tol(tol, y);
  Vec x = y - euler_increment(k, y);
  Vec r = advance(k, x) - y;
  double rn = r.norm();
  for (int it = 0; it < 50 && rn > eps; ++it) {
    const Mat j = advance_jacobian(k, x);
    const auto lu = j.partialPivLu();
    Vec dx;
    if (std::abs(lu.determinant()) < 1e-12) {
      dx = r;  // fixed-point direction when the step map is locally degenerate
    } else {
      dx = lu.solve(r);
    }
    double lambda = 1.0;
    Vec trial = x - dx;
    Vec tr = advance(k, trial) - y;
    while (tr.norm() > rn && lambda > 1.0 / 1024.0) {
      lambda *= 0.5;
      trial = x - lambda * dx;
      tr = advance(k, trial) - y;
    }
    x = trial;
    r = tr;
    rn = r.norm();
  }
  if (rn > eps) {
    // fixed point x ← y − F(x), valid while the step perturbation contracts
    for (int it = 0; it < 200 && rn > eps; ++it) {
      x = y - euler_increment(k, x);
      r = advance(k, x) - y;
      rn = r.norm();
    }
  }
  if (!(rn <= eps)) {
    std::ostringstream os;
    os << "step inversion did not converge on interval " << k << " (residual " << rn
       << "); refine the time step";
    fail(ErrorKind::NoConvergence, os.str());
  }
  return x;
}

Vec Stepper::apply_jump(std::size_t k, const Vec& x) const {
  return x + eval_jump(field_, measure_, noise_->grid.times[k], x, mark_at(k)).h;
}

Mat Stepper::jump_jacobian(std::size_t k, const Vec& x) const {
  return identity(dim()) + eval_jump(field_, measure_, noise_->grid.times[k], x, mark_at(k)).grad_h;
}

Vec Stepper::invert_jump(std::size_t k, const Vec& y, double tol) const {
  return invert_jump_map(field_, measure_, noise_->grid.times[k], mark_at(k), y, tol);
}

Vec Stepper::propagate_from(const Vec& x0, std::size_t k_start, std::size_t k_end, Mat* jacobian) const {
  Vec x = x0;
  if (jacobian) *jacobian = identity(dim());
  for (std::size_t k = k_start; k < k_end; ++k) {
    if (jacobian) *jacobian = advance_jacobian(k, x) * *jacobian;
    x = advance(k, x);
    if (jump_at(k + 1)) {
      if (jacobian) *jacobian = jump_jacobian(k + 1, x) * *jacobian;
      x = apply_jump(k + 1, x);
    }
  }
  check_finite_state(x, noise_->grid.times[k_end]);
  return x;
}

Vec Stepper::invert_map(const Vec& y, std::size_t k_end, double tol, Mat* jacobian, double* residual) const {
  const double step_tol = tol * 1e-2;
  Vec x = y;
  for (std::size_t k = k_end; k > 0; --k) {
    if (jump_at(k)) x = invert_jump(k, x, step_tol);
    x = invert_advance(k - 1, x, step_tol);
  }
  check_finite_state(x, noise_->grid.times[0]);

  Mat u;
  Vec r = propagate(x, k_end, &u) - y;
  double rn = r.norm();
  const double eps = floor_tol(step_tol, y);
  for (int it = 0; it < 50 && rn > eps; ++it) {
    const auto lu = u.partialPivLu();
    if (std::abs(lu.determinant()) < 1e-300) break;
    const Vec cand = x - lu.solve(r);
    Mat cu;
    const Vec cr = propagate(cand, k_end, &cu) - y;
    if (!(cr.norm() < rn)) break;
    x = cand;
    u = cu;
    r = cr;
    rn = cr.norm();
  }
  if (!(rn <= tol)) {
    std::ostringstream os;
    os << "flow inversion residual " << rn << " exceeds tolerance " << tol << " at t=" << noise_->grid.times[k_end];
    fail(ErrorKind::NoConvergence, os.str());
  }
  if (jacobian) *jacobian = u;
  if (residual) *residual = rn;
  return x;
}

}  // namespace stochflow::detail
