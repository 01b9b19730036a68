#include "stochflow/spde.hpp"

#include "stepper.hpp"
#include "stochflow/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stochflow {

namespace {

std::shared_ptr<const NoiseRecord> window(const CoefficientField& field, const NoiseRecord& noise, double s,
                                          double t_end) {
  if (!field.jump_free()) fail(ErrorKind::JumpFieldRejected, "SPDE solvers need a jump-free field");
  return std::make_shared<const NoiseRecord>(detail::strip_jumps(restrict_noise(noise, s, t_end)));
}

SpdeSolution characteristics(const CoefficientField& flow_field, SpdeVariant variant, const NoiseRecord& noise,
                             double s, double t_end, const SpatialGrid& grid, double tol, Scheme scheme,
                             std::vector<std::size_t> time_indices) {
  require(grid.dim() == flow_field.dim(), ErrorKind::DimensionMismatch, "grid and field dimensions differ");
  auto restricted = window(flow_field, noise, s, t_end);
  if (tol <= 0.0) tol = default_inverse_tol(scheme);
  const FlowPath flow = integrate_flow(flow_field, MarkMeasure{}, restricted, {}, scheme);

  SpdeSolution sol;
  sol.variant = variant;
  sol.grid = grid;
  sol.s = s;
  sol.t_end = t_end;
  sol.noise = restricted;
  sol.flow_field = std::make_shared<const CoefficientField>(flow_field);
  sol.scheme = scheme;
  sol.inverse = invert_flow(flow_field, flow, grid.nodes(), tol, std::move(time_indices));
  return sol;
}

}  // namespace

Vec SpdeSolution::interpolate(std::size_t j, const Vec& x) const {
  const int d = grid.dim();
  require(x.size() == d, ErrorKind::DimensionMismatch, "point dimension differs from the solution grid");
  std::vector<int> base(static_cast<std::size_t>(d));
  std::vector<double> frac(static_cast<std::size_t>(d));
  const double h = grid.step();
  for (int a = 0; a < d; ++a) {
    const double pos = (x(a) - grid.box().lower(a)) / h;
    const int n = grid.count(a);
    if (!(pos >= -1e-9 && pos <= n - 1 + 1e-9)) {
      std::ostringstream os;
      os << "point " << x.transpose() << " lies outside the solution box";
      fail(ErrorKind::OutOfGrid, os.str());
    }
    // grid nodes reproduce stored values exactly
    const double nearest = std::round(pos);
    const double snapped = std::abs(pos - nearest) <= 1e-12 ? nearest : pos;
    const int i0 = std::clamp(static_cast<int>(std::floor(snapped)), 0, std::max(n - 2, 0));
    base[static_cast<std::size_t>(a)] = i0;
    frac[static_cast<std::size_t>(a)] = n > 1 ? std::clamp(snapped - i0, 0.0, 1.0) : 0.0;
  }
  Vec out = Vec::Zero(d);
  std::vector<int> idx(static_cast<std::size_t>(d));
  for (int corner = 0; corner < (1 << d); ++corner) {
    double w = 1.0;
    for (int a = 0; a < d; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      const bool up = (corner >> a) & 1;
      if (up && grid.count(a) == 1) {
        w = 0.0;
        break;
      }
      idx[ua] = base[ua] + (up ? 1 : 0);
      w *= up ? frac[ua] : 1.0 - frac[ua];
    }
    if (w == 0.0) continue;
    out += w * value(j, grid.flat_index(idx));
  }
  return out;
}

CoefficientField bar_field(const CoefficientField& field) {
  if (!field.jump_free()) fail(ErrorKind::JumpFieldRejected, "the bar equation needs a jump-free field");
  require(field.has_diffusion_hessian(), ErrorKind::MissingDerivative,
          "the corrected drift gradient needs the diffusion Hessian");
  const auto src = std::make_shared<const CoefficientField>(field);
  FieldParts p;
  p.name = "bar(" + field.name() + ")";
  p.dim = field.dim();
  p.brownian_count = field.brownian_count();
  p.regularity = field.regularity();
  p.drift = [src](double t, const Vec& x) { return Vec(-hat_drift(*src, t, x)); };
  p.diffusion = [src](double t, const Vec& x) { return Mat(-src->diffusion(t, x)); };
  p.drift_grad = [src](double t, const Vec& x) { return Mat(-hat_drift_grad(*src, t, x)); };
  p.diffusion_grad = [src](double t, const Vec& x) {
    MatList g = src->diffusion_grad(t, x);
    for (auto& m : g) m = -m;
    return g;
  };
  p.diffusion_hess = [src](double t, const Vec& x) {
    auto h = src->diffusion_hess(t, x);
    for (auto& per_rho : h)
      for (auto& m : per_rho) m = -m;
    return h;
  };
  if (const auto& aff = field.affine()) {
    AffineStructure a;
    a.drift_matrix = -aff->drift_matrix;
    a.drift_offset = -aff->drift_offset;
    for (std::size_t r = 0; r < aff->diffusion_matrices.size(); ++r) {
      const Mat& b = aff->diffusion_matrices[r];
      a.drift_matrix += b * b;
      a.drift_offset += b * aff->diffusion_offsets.col(static_cast<int>(r));
      a.diffusion_matrices.push_back(-b);
    }
    a.diffusion_offsets = -aff->diffusion_offsets;
    a.jump_matrix = Mat::Zero(p.dim, p.dim);
    a.jump_offset = Vec::Zero(p.dim);
    p.affine = a;
  }
  return CoefficientField(std::move(p));
}

SpdeSolution solve_spde_characteristics(const CoefficientField& field, const NoiseRecord& noise, double s,
                                        double t_end, const SpatialGrid& grid, double tol, Scheme scheme,
                                        std::vector<std::size_t> time_indices) {
  return characteristics(field, SpdeVariant::InverseFlow, noise, s, t_end, grid, tol, scheme,
                         std::move(time_indices));
}

SpdeSolution solve_spde_bar(const CoefficientField& field, const NoiseRecord& noise, double s, double t_end,
                            const SpatialGrid& grid, double tol, Scheme scheme,
                            std::vector<std::size_t> time_indices) {
  return characteristics(bar_field(field), SpdeVariant::Bar, noise, s, t_end, grid, tol, scheme,
                         std::move(time_indices));
}

double ito_wentzell_check(const SpdeSolution& solution, const std::vector<Vec>& probes) {
  const auto& idx = solution.inverse.time_indices;
  require(std::is_sorted(idx.begin(), idx.end()), ErrorKind::InvalidArgument, "stored times must be increasing");
  detail::Stepper stepper(*solution.flow_field, MarkMeasure{}, *solution.noise, solution.scheme);
  double sup = 0.0;
  for (const auto& x : probes) {
    Vec y = x;
    std::size_t k = 0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      y = stepper.propagate_from(y, k, idx[j]);
      k = idx[j];
      sup = std::max(sup, (solution.interpolate(j, y) - x).norm());
    }
  }
  return sup;
}

// ---------------------------------------------------------------------------
// Partition expansion

void gauss_legendre_unit(int order, std::vector<double>& nodes, std::vector<double>& weights) {
  require(order >= 1 && order <= 64, ErrorKind::InvalidArgument, "quadrature order must lie in [1, 64]");
  // Golub–Welsch on the Jacobi matrix of the Legendre recurrence.
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    j(k, k - 1) = b;
    j(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  nodes.resize(static_cast<std::size_t>(order));
  weights.resize(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) {
    const double v0 = es.eigenvectors()(0, k);
    nodes[static_cast<std::size_t>(k)] = 0.5 * (es.eigenvalues()(k) + 1.0);
    weights[static_cast<std::size_t>(k)] = v0 * v0;  // 2 v0² on (−1, 1), halved on (0, 1)
  }
}

namespace {

// u_k = inverse of the flow from grid point 0 to k, with chain-rule gradients
// and Hessians from central differences of those gradients.
class InverseProbe {
 public:
  InverseProbe(const detail::Stepper& stepper, double tol, double fd_step)
      : stepper_(stepper), tol_(tol), fd_(fd_step) {}

  Vec value(std::size_t k, const Vec& y) const { return k == 0 ? y : stepper_.invert_map(y, k, tol_); }

  Mat grad(std::size_t k, const Vec& y) const {
    if (k == 0) return identity(static_cast<int>(y.size()));
    Mat u;
    stepper_.invert_map(y, k, tol_, &u);
    const auto lu = u.partialPivLu();
    require(std::abs(lu.determinant()) >= 1e-12, ErrorKind::SingularJacobian, "flow Jacobian is singular");
    return lu.inverse();
  }

  /// Entry i holds ∇²u^i.
  std::vector<Mat> hess(std::size_t k, const Vec& y) const {
    const int d = static_cast<int>(y.size());
    std::vector<Mat> h(static_cast<std::size_t>(d), Mat::Zero(d, d));
    if (k == 0) return h;
    for (int a = 0; a < d; ++a) {
      Vec yp = y, ym = y;
      yp(a) += fd_;
      ym(a) -= fd_;
      const Mat gp = grad(k, yp);
      const Mat gm = grad(k, ym);
      for (int i = 0; i < d; ++i) h[static_cast<std::size_t>(i)].col(a) = (gp.row(i) - gm.row(i)).transpose() / (2.0 * fd_);
    }
    for (auto& m : h) m = 0.5 * (m + m.transpose()).eval();
    return h;
  }

 private:
  const detail::Stepper& stepper_;
  double tol_;
  double fd_;
};

double quad_form(const Vec& v, const Mat& m) { return v.dot(m * v); }

struct PartitionSetup {
  std::shared_ptr<const NoiseRecord> noise;
  double tol;
};

PartitionSetup setup(const CoefficientField& field, const NoiseRecord& noise, double s, double t_end, const Vec& x,
                     const PartitionOptions& options) {
  require(x.size() == field.dim(), ErrorKind::DimensionMismatch, "point dimension differs from field");
  require(options.fd_step > 0.0, ErrorKind::InvalidArgument, "fd_step must be positive");
  PartitionSetup out{window(field, noise, s, t_end), options.tol > 0.0 ? options.tol : default_inverse_tol(options.scheme)};
  return out;
}

}  // namespace

std::array<Vec, 3> partition_claim_targets(const CoefficientField& field, const NoiseRecord& noise, double s,
                                           double t_end, const Vec& x, const PartitionOptions& options) {
  const PartitionSetup ps = setup(field, noise, s, t_end, x, options);
  detail::Stepper stepper(field, MarkMeasure{}, *ps.noise, options.scheme);
  const InverseProbe probe(stepper, ps.tol, options.fd_step);
  const int d = field.dim();
  const NoiseRecord& nr = *ps.noise;

  std::array<Vec, 3> targets{Vec::Zero(d), Vec::Zero(d), Vec::Zero(d)};
  for (std::size_t k = 0; k < nr.grid.intervals(); ++k) {
    const double t = nr.grid.times[k];
    const double dt = nr.dt(k);
    const Vec dw = nr.increment(k);
    const Vec b = field.drift(t, x);
    const Mat sigma = field.diffusion(t, x);
    const MatList gs = field.diffusion_grad(t, x);
    const Mat g = probe.grad(k, x);
    const std::vector<Mat> h = probe.hess(k, x);
    Vec second = Vec::Zero(d);  // σ^{iρ} σ^{jρ} ∂_ij u
    Vec correction = Vec::Zero(d);  // σ^{jρ} ∂_j σ^{iρ}
    for (int r = 0; r < sigma.cols(); ++r) {
      const Vec sr = sigma.col(r);
      for (int i = 0; i < d; ++i) second(i) += quad_form(sr, h[static_cast<std::size_t>(i)]);
      correction += gs[static_cast<std::size_t>(r)] * sr;
    }
    targets[0] -= (0.5 * second + g * b) * dt + g * (sigma * dw);
    targets[2] += (g * correction + second) * dt;
  }
  return targets;
}

PartitionReport partition_expansion(const CoefficientField& field, const NoiseRecord& noise, double s, double t_end,
                                    const Vec& x, int M, const PartitionOptions& options) {
  return partition_expansion(field, noise, s, t_end, x, M, options,
                             partition_claim_targets(field, noise, s, t_end, x, options));
}

PartitionReport partition_expansion(const CoefficientField& field, const NoiseRecord& noise, double s, double t_end,
                                    const Vec& x, int M, const PartitionOptions& options,
                                    const std::array<Vec, 3>& claim_targets) {
  require(M >= 1, ErrorKind::InvalidArgument, "partition size must be positive");
  const PartitionSetup ps = setup(field, noise, s, t_end, x, options);
  const NoiseRecord& nr = *ps.noise;
  const std::size_t intervals = nr.grid.intervals();
  if (intervals % static_cast<std::size_t>(M) != 0) {
    fail(ErrorKind::GridTooCoarse, "the partition size must divide the number of noise intervals");
  }
  detail::Stepper stepper(field, MarkMeasure{}, nr, options.scheme);
  const InverseProbe probe(stepper, ps.tol, options.fd_step);
  std::vector<double> qn, qw;
  gauss_legendre_unit(options.quad_order, qn, qw);
  const int d = field.dim();
  const std::size_t stride = intervals / static_cast<std::size_t>(M);

  PartitionReport rep;
  rep.M = M;
  rep.sum_a = Vec::Zero(d);
  rep.sum_c = Vec::Zero(d);
  rep.sum_d = Vec::Zero(d);

  Mat g_n = probe.grad(0, x);
  for (int n = 0; n < M; ++n) {
    const std::size_t k0 = static_cast<std::size_t>(n) * stride;
    const std::size_t k1 = k0 + stride;
    const Vec yx = stepper.propagate_from(x, k0, k1);
    const Vec delta = x - yx;
    const Mat g_next = probe.grad(k1, x);

    // Θ_n and Θ_D: ∫₀¹ (1 − θ) ∇²(·)(x + θ(Yx − x)) dθ, per component.
    std::vector<Mat> theta_n(static_cast<std::size_t>(d), Mat::Zero(d, d));
    std::vector<Mat> theta_d(static_cast<std::size_t>(d), Mat::Zero(d, d));
    for (std::size_t q = 0; q < qn.size(); ++q) {
      const Vec z = x + qn[q] * (yx - x);
      const double w = qw[q] * (1.0 - qn[q]);
      const std::vector<Mat> h0 = probe.hess(k0, z);
      const std::vector<Mat> h1 = probe.hess(k1, z);
      for (std::size_t i = 0; i < theta_n.size(); ++i) {
        theta_n[i] += w * h0[i];
        theta_d[i] += w * (h1[i] - h0[i]);
      }
    }
    Vec a = g_n * delta;
    Vec dn = Vec::Zero(d);
    for (int i = 0; i < d; ++i) {
      a(i) -= quad_form(delta, theta_n[static_cast<std::size_t>(i)]);
      dn(i) = -quad_form(delta, theta_d[static_cast<std::size_t>(i)]);
    }
    rep.sum_a += a;
    rep.sum_c += (g_next - g_n) * delta;
    rep.sum_d += dn;
    g_n = g_next;
  }
  rep.lhs = probe.value(intervals, x) - x;
  rep.identity_residual = (rep.lhs - rep.sum_a - rep.sum_c - rep.sum_d).norm();
  rep.claim_targets = claim_targets;
  rep.claim_residuals = {(rep.sum_a - claim_targets[0]).norm(), (rep.sum_d - claim_targets[1]).norm(),
                         (rep.sum_c - claim_targets[2]).norm()};
  return rep;
}

}  // namespace stochflow
