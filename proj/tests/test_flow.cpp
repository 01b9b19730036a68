#include "stochflow/error.hpp"
#include "stochflow/flow.hpp"

#include "support.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <gtest/gtest.h>

#include <cmath>

using namespace stochflow;
using namespace testing_support;

namespace {

std::vector<Vec> line_points(int count, double lo, double hi) {
  std::vector<Vec> out;
  for (int i = 0; i < count; ++i) out.push_back(scalar(lo + (hi - lo) * i / (count - 1)));
  return out;
}

double max_product_defect(const FlowPath& f) {
  double worst = 0.0;
  for (std::size_t k = 0; k < f.time_count(); ++k)
    for (std::size_t i = 0; i < f.point_count(); ++i)
      worst = std::max(worst, (f.jacobian(k, i) * f.inverse_jacobian(k, i) - identity(f.dim)).norm());
  return worst;
}

}  // namespace

TEST(Scheme, NamesRoundTrip) {
  EXPECT_EQ(scheme_from_string(to_string(Scheme::Euler)), Scheme::Euler);
  EXPECT_EQ(scheme_from_string(to_string(Scheme::ExactFamily)), Scheme::ExactFamily);
  EXPECT_THROW(scheme_from_string("milstein"), Error);
}

TEST(IntegrateFlow, ZeroFamilyIsStatic) {
  const auto noise = std::make_shared<const NoiseRecord>(generate_noise(MarkMeasure(), 1, 0, 1, 20, 1, 0));
  const auto pts = std::vector<Vec>{vec({1, 2}), vec({-3, 0.5})};
  auto flow = integrate_flow(families::zero(2), MarkMeasure(), noise, pts);
  flow = integrate_inverse_jacobian(families::zero(2), integrate_jacobian(families::zero(2), flow));
  for (std::size_t k = 0; k < flow.time_count(); ++k) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      EXPECT_EQ(flow.state(k, i), pts[i]);
      EXPECT_EQ(flow.jacobian(k, i), identity(2));
      EXPECT_EQ(flow.inverse_jacobian(k, i), identity(2));
    }
  }
}

TEST(IntegrateFlow, InitialStatesAreInitialPoints) {
  const MarkMeasure m({{1.0, 2.0}});
  const auto field = families::with_jump(smooth_field(), families::sinjump(0.2));
  const NoiseRecord noise = generate_noise(m, 1, 0.5, 1.5, 10, 3, 1);
  const std::vector<Vec> pts{vec({0.1, 0.2}), vec({-1, 1})};
  const FlowPath f = integrate_flow(field, m, noise, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(f.state(0, i), pts[i]);
}

TEST(IntegrateFlow, ConstantDriftIsExactUnderEuler) {
  const auto noise = std::make_shared<const NoiseRecord>(generate_noise(MarkMeasure(), 1, 0.25, 1.25, 37, 2, 0));
  const Vec c = vec({0.5, -1.5});
  const auto flow = integrate_flow(families::constant(c), MarkMeasure(), noise, {vec({1, 1})});
  for (std::size_t k = 0; k < flow.time_count(); ++k) {
    const double t = flow.grid().times[k] - 0.25;
    EXPECT_NEAR((flow.state(k, 0) - (vec({1, 1}) + c * t)).norm(), 0.0, 1e-14);
  }
}

TEST(IntegrateFlow, GbmExactOneStep) {
  const NoiseRecord noise = one_step_noise(0.0, 1.0, {0.5});
  const auto field = families::gbm(0.1, 0.2);
  auto flow = integrate_flow(field, MarkMeasure(), noise, {scalar(2.0)}, Scheme::ExactFamily);
  EXPECT_NEAR(flow.state(1, 0)(0), 2.0 * std::exp(0.18), 1e-14);
  flow = integrate_inverse_jacobian(field, integrate_jacobian(field, flow));
  EXPECT_NEAR(flow.jacobian(1, 0)(0, 0), std::exp(0.18), 1e-14);
  EXPECT_NEAR(flow.inverse_jacobian(1, 0)(0, 0), std::exp(-0.18), 1e-14);
}

TEST(IntegrateFlow, GbmExactClosedFormAlongPath) {
  const double mu = 0.3, nu = 0.4;
  const auto field = families::gbm(mu, nu);
  const auto noise = std::make_shared<const NoiseRecord>(generate_noise(MarkMeasure(), 1, 0, 2, 50, 9, 4));
  auto flow = integrate_flow(field, MarkMeasure(), noise, line_points(5, -2, 2), Scheme::ExactFamily);
  flow = integrate_inverse_jacobian(field, integrate_jacobian(field, flow));
  for (std::size_t k = 0; k < flow.time_count(); ++k) {
    const double g = std::exp((mu - 0.5 * nu * nu) * flow.grid().times[k] + nu * noise->brownian_at(k)(0));
    for (std::size_t i = 0; i < flow.point_count(); ++i) {
      const double x = flow.initial_points[i](0);
      EXPECT_NEAR(flow.state(k, i)(0), x * g, 1e-12 * std::abs(x * g) + 1e-300);
      EXPECT_NEAR(flow.jacobian(k, i)(0, 0), g, 1e-12 * g);
      EXPECT_NEAR(flow.inverse_jacobian(k, i)(0, 0), 1 / g, 1e-12 / g);
    }
  }
}

TEST(IntegrateFlow, ExactSchemeRejectsNonlinearFields) {
  const NoiseRecord noise = one_step_noise(0, 1, {0.1});
  try {
    integrate_flow(smooth_field(), MarkMeasure(), noise, {vec({0, 0})}, Scheme::ExactFamily);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SchemeUnavailable);
  }
}

TEST(IntegrateFlow, LeftLimitsDifferByJump) {
  const MarkMeasure m({{1.0, 3.0}, {-1.0, 2.0}});
  const auto field = families::with_jump(smooth_field(), families::sinjump(0.4));
  const auto noise = std::make_shared<const NoiseRecord>(generate_noise(m, 1, 0, 1, 20, 5, 2));
  ASSERT_FALSE(noise->jumps.empty());
  const auto f = integrate_flow(field, m, noise, {vec({0.3, -0.2}), vec({1.5, 2.0})});
  for (std::size_t k = 0; k < f.time_count(); ++k) {
    for (std::size_t i = 0; i < f.point_count(); ++i) {
      if (f.grid().is_jump(k)) {
        const double z = m.atoms()[static_cast<std::size_t>(f.grid().jump_atom[k])].mark;
        const Vec left = f.left_state(k, i);
        EXPECT_EQ(f.state(k, i), Vec(left + field.jump(f.grid().times[k], left, z)));
      } else {
        EXPECT_EQ(f.state(k, i), f.left_state(k, i));
      }
    }
  }
}

TEST(IntegrateFlow, MonotoneCouplingInOneDimension) {
  const auto field = sine_field();
  const auto pts = line_points(41, -4, 4);
  for (std::uint64_t p = 0; p < 10; ++p) {
    const auto f = integrate_flow(field, MarkMeasure(), generate_noise(MarkMeasure(), 1, 0, 1, 100, 6, p), pts);
    for (std::size_t k = 0; k < f.time_count(); ++k)
      for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_LT(f.state(k, i - 1)(0), f.state(k, i)(0));
  }
}

TEST(IntegrateFlow, NonFiniteStateThrows) {
  FieldParts p = families::zero(1).parts();
  p.drift = [](double, const Vec& x) { return Vec(x.array().square() * 1e200); };
  p.drift_grad = [](double, const Vec& x) { return Mat(2e200 * x.asDiagonal()); };
  p.affine.reset();
  try {
    integrate_flow(CoefficientField(p), MarkMeasure(), generate_noise(MarkMeasure(), 1, 0, 1, 10, 1, 0), {scalar(1e200)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.kind() == ErrorKind::NonFiniteState || e.kind() == ErrorKind::NonFiniteValue);
  }
}

TEST(Jacobian, MatchesFiniteDifferences) {
  const auto field = smooth_field();
  const NoiseRecord noise = generate_noise(MarkMeasure(), 1, 0, 1, 1000, 21, 0);
  const double h = 1e-4;
  const std::vector<Vec> base{vec({0.4, -0.7}), vec({-1.2, 2.0})};
  std::vector<Vec> pts = base;
  for (const Vec& x : base) {
    for (int j = 0; j < 2; ++j) {
      Vec e = Vec::Zero(2);
      e(j) = h;
      pts.push_back(x + e);
      pts.push_back(x - e);
    }
  }
  const auto f = integrate_jacobian(field, integrate_flow(field, MarkMeasure(), noise, pts));
  for (std::size_t k = 0; k < f.time_count(); k += 100) {
    for (std::size_t i = 0; i < base.size(); ++i) {
      Mat fd(2, 2);
      for (int j = 0; j < 2; ++j) {
        const std::size_t plus = base.size() + 4 * i + 2 * static_cast<std::size_t>(j);
        fd.col(j) = (f.state(k, plus) - f.state(k, plus + 1)) / (2 * h);
      }
      const Mat u = f.jacobian(k, i);
      EXPECT_LE((u - fd).norm(), 5e-3 * (1 + u.norm()));
    }
  }
}

TEST(Jacobian, LinearOdeConvergesToMatrixExponential) {
  Mat A(2, 2);
  A << -0.3, 1.0, -1.0, -0.2;
  const auto field = families::affine(A, zeros(2), MatList{Mat::Zero(2, 2)}, Mat::Zero(2, 1));
  const Mat oracle = A.exp();
  auto error = [&](int steps) {
    const auto f = integrate_jacobian(
        field, integrate_flow(field, MarkMeasure(), generate_noise(MarkMeasure(), 1, 0, 1, steps, 0, 0), {vec({1, 0})}));
    return (f.jacobian(f.time_count() - 1, 0) - oracle).norm();
  };
  const double coarse = error(100), fine = error(400);
  EXPECT_LT(coarse, 0.05);
  EXPECT_GT(coarse / fine, 3.0);
  EXPECT_LT(coarse / fine, 5.0);
}

TEST(InverseJacobian, PureJumpProductIsIdentity) {
  const MarkMeasure m({{1.0, 1.0}});
  const auto field = families::with_jump(families::zero(1), families::linjump(-0.5));
  const auto noise = std::make_shared<const NoiseRecord>(noise_with_jump(0, 1, 4, 0.6));
  auto f = integrate_flow(field, m, noise, {scalar(1.0)}, Scheme::ExactFamily);
  f = integrate_inverse_jacobian(field, integrate_jacobian(field, f));
  EXPECT_LE(max_product_defect(f), 1e-12);
  const std::size_t kj = f.grid().find(0.6);
  const std::size_t kb = kj - 1;
  // across the jump U gains the factor 1 + c and Ū the factor (1 + c)⁻¹
  EXPECT_NEAR(f.jacobian(kj, 0)(0, 0) / f.jacobian(kb, 0)(0, 0) * std::exp(-0.5 * (0.6 - f.grid().times[kb])), 0.5,
              1e-14);
  EXPECT_NEAR(f.inverse_jacobian(kj, 0)(0, 0) / f.inverse_jacobian(kb, 0)(0, 0) *
                  std::exp(0.5 * (0.6 - f.grid().times[kb])),
              2.0, 1e-14);
}

TEST(InverseJacobian, EulerJumpUpdatesPreserveProduct) {
  // with no continuous motion the Euler path only sees the jump updates
  FieldParts p = families::with_jump(families::zero(1), families::linjump(-0.5)).parts();
  const CoefficientField field(p);
  NoiseRecord noise = noise_with_jump(0, 1, 1, 0.5);
  const MarkMeasure m({{1.0, 1e-300}});
  auto f = integrate_flow(field, m, noise, {scalar(1.0)});
  f = integrate_inverse_jacobian(field, integrate_jacobian(field, f));
  EXPECT_DOUBLE_EQ(f.jacobian(1, 0)(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(f.inverse_jacobian(1, 0)(0, 0), 2.0);
  EXPECT_LE(max_product_defect(f), 1e-12);
}

TEST(InverseJacobian, EulerProductDefectShrinks) {
  const auto field = families::gbm(0.2, 0.5);
  const std::vector<Vec> pts{scalar(1.0)};
  std::vector<double> orders;
  for (std::uint64_t p = 0; p < 30; ++p) {
    const NoiseRecord fine = generate_noise(MarkMeasure(), 1, 0, 1, 1024, 77, p);
    auto defect = [&](const NoiseRecord& n) {
      return max_product_defect(
          integrate_inverse_jacobian(field, integrate_jacobian(field, integrate_flow(field, MarkMeasure(), n, pts))));
    };
    const double coarse = defect(coarsen_noise(fine, 4)), refined = defect(fine);
    orders.push_back(std::log(coarse / refined) / std::log(4.0));
  }
  EXPECT_GE(median(orders), 0.4);
}

TEST(Composition, ZeroFamilyIsExact) {
  const NoiseRecord n = generate_noise(MarkMeasure(), 1, 0, 1, 10, 0, 0);
  EXPECT_EQ(flow_composition_check(families::zero(1), MarkMeasure(), n, 0, 0.5, 1, line_points(5, -1, 1)), 0.0);
}

TEST(Composition, GbmExactScheme) {
  const MarkMeasure m({{1.0, 2.0}});
  const auto field = families::with_jump(families::gbm(0.1, 0.3), families::linjump(-0.5));
  const NoiseRecord n = generate_noise(m, 1, 0, 1, 20, 3, 1);
  EXPECT_LE(flow_composition_check(field, m, n, 0, 0.5, 1, line_points(7, -3, 3), Scheme::ExactFamily), 1e-12);
}

TEST(Composition, EulerIsAGridCocycle) {
  const MarkMeasure m({{1.0, 2.0}});
  const auto field = families::with_jump(smooth_field(), families::sinjump(0.3));
  const NoiseRecord n = generate_noise(m, 1, 0, 1, 40, 3, 1);
  EXPECT_EQ(flow_composition_check(field, m, n, 0, 0.5, 1, {vec({0.3, 0.1}), vec({-1, 2})}), 0.0);
}

TEST(Composition, RejectsTimesOffGrid) {
  const NoiseRecord n = generate_noise(MarkMeasure(), 1, 0, 1, 10, 0, 0);
  EXPECT_THROW(flow_composition_check(families::zero(1), MarkMeasure(), n, 0, 0.55, 1, {scalar(0)}), Error);
}
