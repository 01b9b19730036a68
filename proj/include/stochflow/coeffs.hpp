#pragma once

#include "stochflow/grid.hpp"
#include "stochflow/linalg.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stochflow {

/// Regularity constants (β, N₀, η, N_κ) a coefficient field is checked against.
struct Regularity {
  double beta = 2.0;
  double n0 = 1.0;
  double eta = 0.5;
  double n_kappa = 10.0;

  bool operator==(const Regularity&) const = default;
};

struct MarkAtom {
  double mark = 0.0;
  double rate = 0.0;

  bool operator==(const MarkAtom&) const = default;
};

/// Finite discrete jump intensity π = Σ λ_k δ_{z_k}.
class MarkMeasure {
 public:
  MarkMeasure() = default;
  explicit MarkMeasure(std::vector<MarkAtom> atoms);

  const std::vector<MarkAtom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  double total_rate() const { return total_rate_; }
  std::optional<std::size_t> find(double mark) const;

 private:
  std::vector<MarkAtom> atoms_;
  double total_rate_ = 0.0;
};

/// Affine coefficient structure
///   b(x) = A x + a,  σ^ρ(x) = B_ρ x + s_ρ,  H(x, z) = C x + h (mark independent).
/// Families that carry it can be stepped exactly in closed form.
struct AffineStructure {
  Mat drift_matrix;
  Vec drift_offset;
  MatList diffusion_matrices;
  Mat diffusion_offsets;  // d×m, column ρ is s_ρ
  Mat jump_matrix;
  Vec jump_offset;
};

/// Mutable description of a coefficient field, consumed by CoefficientField.
struct FieldParts {
  using VecFn = std::function<Vec(double, const Vec&)>;
  using MatFn = std::function<Mat(double, const Vec&)>;
  using MatListFn = std::function<MatList(double, const Vec&)>;
  using JumpFn = std::function<Vec(double, const Vec&, double)>;
  using JumpGradFn = std::function<Mat(double, const Vec&, double)>;
  /// Per-ρ list of per-component Hessians: result[ρ][i] = ∇²σ^{iρ}.
  using DiffusionHessFn = std::function<std::vector<MatList>(double, const Vec&)>;

  std::string name;
  int dim = 1;
  int brownian_count = 1;
  VecFn drift;
  MatFn diffusion;
  JumpFn jump;
  MatFn drift_grad;
  MatListFn diffusion_grad;  // entry ρ holds (∂_j σ^{iρ})_{ij}
  JumpGradFn jump_grad;
  MatListFn drift_hess;  // optional; entry i holds ∇²b^i
  DiffusionHessFn diffusion_hess;  // optional
  Regularity regularity;
  bool jump_free = true;
  std::optional<AffineStructure> affine;
};

/// Deterministic coefficient triple (b, σ, H) with derivatives. Immutable and
/// cheap to copy; evaluation is safe from any number of threads.
class CoefficientField {
 public:
  explicit CoefficientField(FieldParts parts);

  const std::string& name() const { return parts_->name; }
  int dim() const { return parts_->dim; }
  int brownian_count() const { return parts_->brownian_count; }
  const Regularity& regularity() const { return parts_->regularity; }
  bool jump_free() const { return parts_->jump_free; }
  const std::optional<AffineStructure>& affine() const { return parts_->affine; }
  bool has_drift_hessian() const { return static_cast<bool>(parts_->drift_hess); }
  bool has_diffusion_hessian() const { return static_cast<bool>(parts_->diffusion_hess); }

  Vec drift(double t, const Vec& x) const { return parts_->drift(t, x); }
  Mat diffusion(double t, const Vec& x) const { return parts_->diffusion(t, x); }
  Vec jump(double t, const Vec& x, double z) const { return parts_->jump(t, x, z); }
  Mat drift_grad(double t, const Vec& x) const { return parts_->drift_grad(t, x); }
  MatList diffusion_grad(double t, const Vec& x) const { return parts_->diffusion_grad(t, x); }
  Mat jump_grad(double t, const Vec& x, double z) const { return parts_->jump_grad(t, x, z); }
  MatList drift_hess(double t, const Vec& x) const;
  std::vector<MatList> diffusion_hess(double t, const Vec& x) const;

  const FieldParts& parts() const { return *parts_; }
  CoefficientField with_regularity(const Regularity& reg) const;

 private:
  std::shared_ptr<const FieldParts> parts_;
};

struct Evaluation {
  Vec b;
  Mat sigma;
  Mat grad_b;
  MatList grad_sigma;
};

struct JumpEvaluation {
  Vec h;
  Mat grad_h;
};

/// Evaluates b, σ and their gradients at (t, x); throws NonFiniteValue on NaN/∞.
Evaluation evaluate(const CoefficientField& field, double t, const Vec& x);

/// H_t(x, z) and ∇H_t(x, z); z must be an atom of `measure`.
JumpEvaluation eval_jump(const CoefficientField& field, const MarkMeasure& measure, double t, const Vec& x,
                         double z);

/// Corrected drift b̂ⁱ = bⁱ − σ^{jρ} ∂_j σ^{iρ}.
Vec hat_drift(const CoefficientField& field, double t, const Vec& x);

/// ∇b̂; needs the diffusion Hessian.
Mat hat_drift_grad(const CoefficientField& field, double t, const Vec& x);

/// Σ_k λ_k H_t(x, z_k), the drift that turns raw jumps into compensated ones.
Vec compensator_drift(const CoefficientField& field, const MarkMeasure& measure, double t, const Vec& x);

/// Σ_k λ_k ∇H_t(x, z_k)
Mat compensator_grad(const CoefficientField& field, const MarkMeasure& measure, double t, const Vec& x);

struct AssumptionRecord {
  std::string name;
  double grid_sup = 0.0;
  double bound = 0.0;
  bool satisfied = true;
};

struct AssumptionReport {
  std::vector<AssumptionRecord> records;
  bool overall = true;
  Box box;
  double grid_step = 0.0;
  std::size_t node_count = 0;

  const AssumptionRecord* find(const std::string& name) const;
};

/// Grid-supremum check of the regularity bounds over a box. Hölder seminorms
/// are grid-pair lower bounds, so an unsatisfied record is a real violation.
AssumptionReport check_assumptions(const CoefficientField& field, const MarkMeasure& measure, const Box& box,
                                   double grid_step, std::span<const double> times = {});

namespace families {

/// b = σ = H = 0
CoefficientField zero(int dim, int brownian_count = 1);
/// b = c, σ = 0
CoefficientField constant(const Vec& c);
/// b = μx, σ = νx with a single Wiener component.
CoefficientField gbm(double mu, double nu, int dim = 1);
/// b = A x + c, σ^ρ = B_ρ x + s_ρ.
CoefficientField affine(const Mat& A, const Vec& c, const MatList& B, const Mat& S);
/// d = 2, b = ω J x with J the quarter-turn, σ = ν x.
CoefficientField rot(double omega = 1.0, double nu = 0.0);

struct JumpPart {
  std::string name;
  FieldParts::JumpFn jump;
  FieldParts::JumpGradFn jump_grad;
  std::optional<double> linear_coefficient;  // H = c x when set
};

/// H(x, z) = c x
JumpPart linjump(double c);
/// H(x, z) = a sin(x) componentwise
JumpPart sinjump(double a);

CoefficientField with_jump(const CoefficientField& field, const JumpPart& jump);

/// b ↦ b + c
CoefficientField shift_drift(const CoefficientField& field, const Vec& c);
/// σ ↦ k σ
CoefficientField scale_diffusion(const CoefficientField& field, double k);

/// Builds a family by name: zero, const, gbm, affine, rot.
CoefficientField by_name(const std::string& name, std::span<const double> params, int dim);
JumpPart jump_by_name(const std::string& name, std::span<const double> params);

}  // namespace families

}  // namespace stochflow
