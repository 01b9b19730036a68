#include "stochflow/coeffs.hpp"

#include "stochflow/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stochflow {

// ---------------------------------------------------------------------------
// MarkMeasure

MarkMeasure::MarkMeasure(std::vector<MarkAtom> atoms) : atoms_(std::move(atoms)) {
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    const auto& a = atoms_[k];
    require(std::isfinite(a.mark), ErrorKind::InvalidArgument, "mark values must be finite");
    require(std::isfinite(a.rate) && a.rate > 0.0, ErrorKind::InvalidArgument, "atom rates must be positive and finite");
    for (std::size_t j = 0; j < k; ++j) {
      require(atoms_[j].mark != a.mark, ErrorKind::InvalidArgument, "duplicate mark in measure");
    }
    total_rate_ += a.rate;
  }
  require(std::isfinite(total_rate_), ErrorKind::InvalidArgument, "total rate must be finite");
}

std::optional<std::size_t> MarkMeasure::find(double mark) const {
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    if (atoms_[k].mark == mark) return k;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// CoefficientField

CoefficientField::CoefficientField(FieldParts parts) {
  require(parts.dim >= 1 && parts.dim <= kMaxDim, ErrorKind::InvalidArgument, "state dimension outside [1, kMaxDim]");
  require(parts.brownian_count >= 1 && parts.brownian_count <= kMaxDim, ErrorKind::InvalidArgument,
          "brownian_count outside [1, kMaxDim]");
  require(static_cast<bool>(parts.drift) && static_cast<bool>(parts.diffusion), ErrorKind::InvalidArgument,
          "drift and diffusion maps are required");
  const int d = parts.dim;
  if (!parts.jump) {
    require(parts.jump_free, ErrorKind::InvalidArgument, "a field with jumps needs a jump map");
    parts.jump = [d](double, const Vec&, double) { return Vec(Vec::Zero(d)); };
    parts.jump_grad = [d](double, const Vec&, double) { return Mat(Mat::Zero(d, d)); };
  }
  parts_ = std::make_shared<const FieldParts>(std::move(parts));
}

MatList CoefficientField::drift_hess(double t, const Vec& x) const {
  require(has_drift_hessian(), ErrorKind::MissingDerivative, "field '" + name() + "' has no drift Hessian");
  return parts_->drift_hess(t, x);
}

std::vector<MatList> CoefficientField::diffusion_hess(double t, const Vec& x) const {
  require(has_diffusion_hessian(), ErrorKind::MissingDerivative, "field '" + name() + "' has no diffusion Hessian");
  return parts_->diffusion_hess(t, x);
}

CoefficientField CoefficientField::with_regularity(const Regularity& reg) const {
  FieldParts p = *parts_;
  p.regularity = reg;
  return CoefficientField(std::move(p));
}

// ---------------------------------------------------------------------------
// Evaluation gateway

Evaluation evaluate(const CoefficientField& field, double t, const Vec& x) {
  const auto& p = field.parts();
  require(static_cast<bool>(p.drift_grad), ErrorKind::MissingDerivative, "field '" + field.name() + "' has no drift gradient");
  require(static_cast<bool>(p.diffusion_grad), ErrorKind::MissingDerivative,
          "field '" + field.name() + "' has no diffusion gradient");
  Evaluation e{field.drift(t, x), field.diffusion(t, x), field.drift_grad(t, x), field.diffusion_grad(t, x)};
  if (!all_finite(e.b) || !all_finite(e.sigma) || !all_finite(e.grad_b) || !all_finite(e.grad_sigma)) {
    std::ostringstream os;
    os << "field '" << field.name() << "' produced a non-finite value at t=" << t;
    fail(ErrorKind::NonFiniteValue, os.str());
  }
  return e;
}

JumpEvaluation eval_jump(const CoefficientField& field, const MarkMeasure& measure, double t, const Vec& x, double z) {
  if (!measure.find(z)) {
    std::ostringstream os;
    os << "mark " << z << " is not an atom of the measure";
    fail(ErrorKind::UnknownMark, os.str());
  }
  JumpEvaluation e{field.jump(t, x, z), field.jump_grad(t, x, z)};
  require(all_finite(e.h) && all_finite(e.grad_h), ErrorKind::NonFiniteValue,
          "jump map of '" + field.name() + "' produced a non-finite value");
  return e;
}

Vec hat_drift(const CoefficientField& field, double t, const Vec& x) {
  require(static_cast<bool>(field.parts().diffusion_grad), ErrorKind::MissingDerivative,
          "hat drift needs the diffusion gradient");
  Vec out = field.drift(t, x);
  const Mat sigma = field.diffusion(t, x);
  const MatList grads = field.diffusion_grad(t, x);
  for (int rho = 0; rho < field.brownian_count(); ++rho) {
    out.noalias() -= grads[static_cast<std::size_t>(rho)] * sigma.col(rho);
  }
  return out;
}

Mat hat_drift_grad(const CoefficientField& field, double t, const Vec& x) {
  require(static_cast<bool>(field.parts().drift_grad) && static_cast<bool>(field.parts().diffusion_grad),
          ErrorKind::MissingDerivative, "hat drift gradient needs first derivatives");
  const int d = field.dim();
  Mat out = field.drift_grad(t, x);
  const Mat sigma = field.diffusion(t, x);
  const MatList grads = field.diffusion_grad(t, x);
  const std::vector<MatList> hess = field.diffusion_hess(t, x);
  for (int rho = 0; rho < field.brownian_count(); ++rho) {
    const auto r = static_cast<std::size_t>(rho);
    out.noalias() -= grads[r] * grads[r];
    for (int i = 0; i < d; ++i) {
      out.row(i).noalias() -= sigma.col(rho).transpose() * hess[r][static_cast<std::size_t>(i)];
    }
  }
  return out;
}

Vec compensator_drift(const CoefficientField& field, const MarkMeasure& measure, double t, const Vec& x) {
  Vec out = Vec::Zero(field.dim());
  for (const auto& a : measure.atoms()) out.noalias() += a.rate * field.jump(t, x, a.mark);
  return out;
}

Mat compensator_grad(const CoefficientField& field, const MarkMeasure& measure, double t, const Vec& x) {
  Mat out = Mat::Zero(field.dim(), field.dim());
  for (const auto& a : measure.atoms()) out.noalias() += a.rate * field.jump_grad(t, x, a.mark);
  return out;
}

// ---------------------------------------------------------------------------
// Assumption checks

const AssumptionRecord* AssumptionReport::find(const std::string& name) const {
  for (const auto& r : records)
    if (r.name == name) return &r;
  return nullptr;
}

namespace {

using Stack = std::vector<Mat>;

Stack to_stack(const MatList& l) { return Stack(l.begin(), l.end()); }

double stack_norm(const Stack& a) {
  double s = 0.0;
  for (const auto& m : a) {
    const double n = op_norm(m);
    s += n * n;
  }
  return std::sqrt(s);
}

double stack_diff(const Stack& a, const Stack& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double n = op_norm(Mat(a[k] - b[k]));
    s += n * n;
  }
  return std::sqrt(s);
}

// |g|_{order} for a gradient field sampled on the grid, order = β − 1 ∈ (0, 2].
// `first` holds g at each node, `second` (needed when order > 1) holds ∇g.
double gradient_holder(const SpatialGrid& grid, double order, const std::vector<Stack>& first,
                       const std::vector<Stack>& second) {
  double sup_first = 0.0;
  for (const auto& g : first) sup_first = std::max(sup_first, stack_norm(g));
  if (order <= 1.0) {
    const double semi = grid_holder_seminorm(grid, order, [&](std::size_t i, std::size_t j) {
      return stack_diff(first[i], first[j]);
    });
    return sup_first + semi;
  }
  double sup_second = 0.0;
  for (const auto& g : second) sup_second = std::max(sup_second, stack_norm(g));
  const double semi = grid_holder_seminorm(grid, order - 1.0, [&](std::size_t i, std::size_t j) {
    return stack_diff(second[i], second[j]);
  });
  return sup_first + sup_second + semi;
}

// Second derivatives of the jump map by central differences of its gradient;
// entry a holds ∂_a ∇H.
Stack jump_second_fd(const CoefficientField& field, double t, const Vec& x, double z) {
  const double h = 1e-5;
  Stack out;
  for (int a = 0; a < field.dim(); ++a) {
    Vec xp = x, xm = x;
    xp(a) += h;
    xm(a) -= h;
    out.push_back((field.jump_grad(t, xp, z) - field.jump_grad(t, xm, z)) / (2.0 * h));
  }
  return out;
}

Stack flatten_hess(const std::vector<MatList>& h) {
  Stack out;
  for (const auto& per_rho : h) out.insert(out.end(), per_rho.begin(), per_rho.end());
  return out;
}

}  // namespace

AssumptionReport check_assumptions(const CoefficientField& field, const MarkMeasure& measure, const Box& box,
                                   double grid_step, std::span<const double> times) {
  require(grid_step > 0.0, ErrorKind::InvalidArgument, "grid_step must be positive");
  require(box.dim() == field.dim(), ErrorKind::DimensionMismatch, "box dimension differs from field dimension");
  const Regularity& reg = field.regularity();
  require(reg.beta > 1.0 && reg.beta <= 3.0, ErrorKind::InvalidArgument, "beta must lie in (1, 3]");
  const double order = reg.beta - 1.0;
  const bool need_second = order > 1.0;

  SpatialGrid grid(box, grid_step);
  const std::vector<double> default_times{0.0};
  if (times.empty()) times = default_times;

  double r1_b = 0.0, r1_sigma = 0.0, grad_b = 0.0, grad_sigma = 0.0;
  std::vector<double> jump_k(measure.size(), 0.0);
  std::vector<double> inverse_bound(measure.size(), 0.0);

  const std::size_t n = grid.size();
  std::vector<Stack> gb(n), gs(n), hb, hs;
  if (need_second) {
    hb.resize(n);
    hs.resize(n);
  }
  std::vector<Stack> gh(n), hh;
  if (need_second) hh.resize(n);

  for (double t : times) {
    for (std::size_t i = 0; i < n; ++i) {
      const Vec x = grid.node(i);
      const Evaluation e = evaluate(field, t, x);
      const double w = r1(x);
      r1_b = std::max(r1_b, e.b.norm() / w);
      r1_sigma = std::max(r1_sigma, e.sigma.norm() / w);
      gb[i] = Stack{e.grad_b};
      gs[i] = to_stack(e.grad_sigma);
      if (need_second) {
        hb[i] = to_stack(field.drift_hess(t, x));
        hs[i] = flatten_hess(field.diffusion_hess(t, x));
      }
    }
    grad_b = std::max(grad_b, gradient_holder(grid, order, gb, hb));
    grad_sigma = std::max(grad_sigma, gradient_holder(grid, order, gs, hs));

    for (std::size_t k = 0; k < measure.size(); ++k) {
      const double z = measure.atoms()[k].mark;
      double r1_h = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const Vec x = grid.node(i);
        const JumpEvaluation je = eval_jump(field, measure, t, x, z);
        r1_h = std::max(r1_h, je.h.norm() / r1(x));
        gh[i] = Stack{je.grad_h};
        if (need_second) hh[i] = jump_second_fd(field, t, x, z);
        if (op_norm(je.grad_h) > reg.eta) {
          const Mat m = identity(field.dim()) + je.grad_h;
          if (std::abs(m.determinant()) < 1e-12) {
            std::ostringstream os;
            os << "det(I + grad H) vanishes at node " << x.transpose() << " for mark " << z;
            fail(ErrorKind::SingularJumpJacobian, os.str());
          }
          inverse_bound[k] = std::max(inverse_bound[k], op_norm(Mat(m.inverse())));
        }
      }
      jump_k[k] = std::max(jump_k[k], r1_h + gradient_holder(grid, order, gh, hh));
    }
  }

  AssumptionReport rep;
  rep.box = box;
  rep.grid_step = grid_step;
  rep.node_count = n;
  auto add = [&](std::string name, double value, double bound) {
    rep.records.push_back(AssumptionRecord{std::move(name), value, bound, value <= bound});
  };
  add("r1inv_b", r1_b, reg.n0);
  add("grad_b_holder", grad_b, reg.n0);
  add("r1inv_sigma", r1_sigma, reg.n0);
  add("grad_sigma_holder", grad_sigma, reg.n0);
  add("continuous_total", r1_b + grad_b + r1_sigma + grad_sigma, reg.n0);
  double k_sq = 0.0;
  for (std::size_t k = 0; k < measure.size(); ++k) k_sq += measure.atoms()[k].rate * jump_k[k] * jump_k[k];
  for (std::size_t k = 0; k < measure.size(); ++k) {
    const std::string tag = "[" + std::to_string(k) + "]";
    add("jump_K" + tag, jump_k[k], reg.n0);
    add("jump_K_budget" + tag, jump_k[k] + k_sq, reg.n0);
    add("jump_inverse_bound" + tag, inverse_bound[k], reg.n_kappa);
  }
  rep.overall = std::all_of(rep.records.begin(), rep.records.end(), [](const auto& r) { return r.satisfied; });
  return rep;
}

// ---------------------------------------------------------------------------
// Families

namespace families {

namespace {

std::string fmt_params(std::initializer_list<double> ps) {
  std::ostringstream os;
  os << '(';
  bool first = true;
  for (double p : ps) {
    if (!first) os << ',';
    os << p;
    first = false;
  }
  os << ')';
  return os.str();
}

CoefficientField affine_named(std::string name, const Mat& A, const Vec& c, const MatList& B, const Mat& S) {
  const int d = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.size());
  require(A.cols() == d && c.size() == d, ErrorKind::DimensionMismatch, "affine drift shape mismatch");
  require(m >= 1 && S.rows() == d && S.cols() == m, ErrorKind::DimensionMismatch, "affine diffusion shape mismatch");
  for (const auto& b : B)
    require(b.rows() == d && b.cols() == d, ErrorKind::DimensionMismatch, "affine diffusion matrix shape mismatch");

  FieldParts p;
  p.name = std::move(name);
  p.dim = d;
  p.brownian_count = m;
  p.drift = [A, c](double, const Vec& x) { return Vec(A * x + c); };
  p.diffusion = [B, S](double, const Vec& x) {
    Mat out = S;
    for (std::size_t r = 0; r < B.size(); ++r) out.col(static_cast<int>(r)).noalias() += B[r] * x;
    return out;
  };
  p.drift_grad = [A](double, const Vec&) { return A; };
  p.diffusion_grad = [B](double, const Vec&) { return B; };
  p.drift_hess = [d](double, const Vec&) {
    MatList out;
    for (int i = 0; i < d; ++i) out.push_back(Mat::Zero(d, d));
    return out;
  };
  p.diffusion_hess = [d, m](double, const Vec&) {
    std::vector<MatList> out(static_cast<std::size_t>(m));
    for (auto& per_rho : out)
      for (int i = 0; i < d; ++i) per_rho.push_back(Mat::Zero(d, d));
    return out;
  };
  p.affine = AffineStructure{A, c, B, S, Mat::Zero(d, d), Vec::Zero(d)};
  return CoefficientField(std::move(p));
}

}  // namespace

CoefficientField zero(int dim, int brownian_count) {
  require(dim >= 1 && dim <= kMaxDim && brownian_count >= 1 && brownian_count <= kMaxDim,
          ErrorKind::InvalidArgument, "zero family dimensions outside [1, kMaxDim]");
  MatList B;
  for (int r = 0; r < brownian_count; ++r) B.push_back(Mat::Zero(dim, dim));
  return affine_named("zero", Mat::Zero(dim, dim), Vec::Zero(dim), B, Mat::Zero(dim, brownian_count));
}

CoefficientField constant(const Vec& c) {
  const int d = static_cast<int>(c.size());
  require(d >= 1 && d <= kMaxDim, ErrorKind::InvalidArgument, "const family dimension outside [1, kMaxDim]");
  MatList B{Mat::Zero(d, d)};
  std::ostringstream os;
  os << "const(" << c.transpose() << ")";
  return affine_named(os.str(), Mat::Zero(d, d), c, B, Mat::Zero(d, 1));
}

CoefficientField gbm(double mu, double nu, int dim) {
  require(dim >= 1 && dim <= kMaxDim, ErrorKind::InvalidArgument, "gbm dimension outside [1, kMaxDim]");
  MatList B{Mat(nu * Mat::Identity(dim, dim))};
  return affine_named("gbm" + fmt_params({mu, nu}), Mat(mu * Mat::Identity(dim, dim)), Vec::Zero(dim), B,
                      Mat::Zero(dim, 1));
}

CoefficientField affine(const Mat& A, const Vec& c, const MatList& B, const Mat& S) {
  return affine_named("affine", A, c, B, S);
}

CoefficientField rot(double omega, double nu) {
  Mat J(2, 2);
  J << 0.0, -1.0, 1.0, 0.0;
  MatList B{Mat(nu * Mat::Identity(2, 2))};
  return affine_named("rot" + fmt_params({omega, nu}), Mat(omega * J), Vec::Zero(2), B, Mat::Zero(2, 1));
}

JumpPart linjump(double c) {
  JumpPart j;
  j.name = "linjump" + fmt_params({c});
  j.jump = [c](double, const Vec& x, double) { return Vec(c * x); };
  j.jump_grad = [c](double, const Vec& x, double) {
    return Mat(c * Mat::Identity(x.size(), x.size()));
  };
  j.linear_coefficient = c;
  return j;
}

JumpPart sinjump(double a) {
  JumpPart j;
  j.name = "sinjump" + fmt_params({a});
  j.jump = [a](double, const Vec& x, double) { return Vec(a * x.array().sin().matrix()); };
  j.jump_grad = [a](double, const Vec& x, double) {
    return Mat((a * x.array().cos()).matrix().asDiagonal());
  };
  return j;
}

CoefficientField with_jump(const CoefficientField& field, const JumpPart& jump) {
  FieldParts p = field.parts();
  p.name = p.name + "+" + jump.name;
  p.jump = jump.jump;
  p.jump_grad = jump.jump_grad;
  p.jump_free = false;
  if (p.affine && jump.linear_coefficient) {
    p.affine->jump_matrix = *jump.linear_coefficient * Mat::Identity(p.dim, p.dim);
    p.affine->jump_offset = Vec::Zero(p.dim);
  } else {
    p.affine.reset();
  }
  return CoefficientField(std::move(p));
}

CoefficientField shift_drift(const CoefficientField& field, const Vec& c) {
  require(c.size() == field.dim(), ErrorKind::DimensionMismatch, "drift shift dimension mismatch");
  FieldParts p = field.parts();
  std::ostringstream os;
  os << p.name << "+shift(" << c.transpose() << ")";
  p.name = os.str();
  auto base = p.drift;
  p.drift = [base, c](double t, const Vec& x) { return Vec(base(t, x) + c); };
  if (p.affine) p.affine->drift_offset += c;
  return CoefficientField(std::move(p));
}

CoefficientField scale_diffusion(const CoefficientField& field, double k) {
  FieldParts p = field.parts();
  p.name = p.name + "*sigma" + fmt_params({k});
  auto base = p.diffusion;
  p.diffusion = [base, k](double t, const Vec& x) { return Mat(k * base(t, x)); };
  if (p.diffusion_grad) {
    auto g = p.diffusion_grad;
    p.diffusion_grad = [g, k](double t, const Vec& x) {
      MatList out = g(t, x);
      for (auto& m : out) m *= k;
      return out;
    };
  }
  if (p.diffusion_hess) {
    auto h = p.diffusion_hess;
    p.diffusion_hess = [h, k](double t, const Vec& x) {
      auto out = h(t, x);
      for (auto& per_rho : out)
        for (auto& m : per_rho) m *= k;
      return out;
    };
  }
  if (p.affine) {
    for (auto& m : p.affine->diffusion_matrices) m *= k;
    p.affine->diffusion_offsets *= k;
  }
  return CoefficientField(std::move(p));
}

CoefficientField by_name(const std::string& name, std::span<const double> params, int dim) {
  auto need = [&](bool ok, const std::string& what) {
    require(ok, ErrorKind::InvalidArgument, "family '" + name + "': " + what);
  };
  if (name == "zero") {
    need(params.size() <= 1, "expects at most one parameter (brownian_count)");
    const int m = params.empty() ? 1 : static_cast<int>(params[0]);
    return zero(dim, m);
  }
  if (name == "const") {
    need(params.size() == 1 || static_cast<int>(params.size()) == dim, "expects 1 or dim parameters");
    Vec c(dim);
    for (int i = 0; i < dim; ++i) c(i) = params.size() == 1 ? params[0] : params[static_cast<std::size_t>(i)];
    return constant(c);
  }
  if (name == "gbm") {
    need(params.size() == 2, "expects parameters [mu, nu]");
    return gbm(params[0], params[1], dim);
  }
  if (name == "rot") {
    need(dim == 2, "is two-dimensional");
    need(params.size() <= 2, "expects parameters [omega, nu]");
    return rot(params.size() > 0 ? params[0] : 1.0, params.size() > 1 ? params[1] : 0.0);
  }
  if (name == "affine") {
    // layout: A (row-major d²), c (d), then per Wiener component B_ρ (row-major d²) and s_ρ (d)
    const std::size_t dd = static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim);
    const std::size_t block = dd + static_cast<std::size_t>(dim);
    need(params.size() > block && (params.size() - block) % block == 0,
         "expects A, c followed by one (B, s) block per Wiener component");
    const int m = static_cast<int>((params.size() - block) / block);
    std::size_t pos = 0;
    auto read_mat = [&]() {
      Mat M(dim, dim);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) M(i, j) = params[pos++];
      return M;
    };
    auto read_vec = [&]() {
      Vec v(dim);
      for (int i = 0; i < dim; ++i) v(i) = params[pos++];
      return v;
    };
    const Mat A = read_mat();
    const Vec c = read_vec();
    MatList B;
    Mat S(dim, m);
    for (int r = 0; r < m; ++r) {
      B.push_back(read_mat());
      S.col(r) = read_vec();
    }
    return affine(A, c, B, S);
  }
  fail(ErrorKind::InvalidArgument, "unknown coefficient family '" + name + "'");
}

JumpPart jump_by_name(const std::string& name, std::span<const double> params) {
  require(params.size() == 1, ErrorKind::InvalidArgument, "jump family '" + name + "' expects one parameter");
  if (name == "linjump") return linjump(params[0]);
  if (name == "sinjump") return sinjump(params[0]);
  fail(ErrorKind::InvalidArgument, "unknown jump family '" + name + "'");
}

}  // namespace families

}  // namespace stochflow
