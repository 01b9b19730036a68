#include "stochflow/error.hpp"
#include "stochflow/inverse.hpp"

#include "support.hpp"

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

double bisect(const std::function<double(double)>& f, double lo, double hi) {
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(lo) * f(mid) <= 0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(InvertJumpMap, LinearJump) {
  const MarkMeasure m({{1.0, 1.0}});
  const auto f = families::with_jump(families::zero(1), families::linjump(-0.5));
  const double x = invert_jump_map(f, m, 0.0, 1.0, scalar(1.0), 1e-12)(0);
  EXPECT_LE(std::abs(x - 0.5 * x - 1.0), 1e-12);
  EXPECT_NEAR(x, 2.0, 2e-12);
}

TEST(InvertJumpMap, NewtonBranchForLargeGradient) {
  const MarkMeasure m({{1.0, 1.0}});
  const auto f = families::with_jump(families::zero(1), families::linjump(-0.8)).with_regularity({2, 1, 0.5, 10});
  EXPECT_NEAR(invert_jump_map(f, m, 0.0, 1.0, scalar(1.0), 1e-12)(0), 5.0, 1e-11);
}

TEST(InvertJumpMap, ZeroJumpIsIdentity) {
  const MarkMeasure m({{1.0, 1.0}});
  const Vec y = vec({0.3, -7.0});
  EXPECT_EQ(invert_jump_map(families::zero(2), m, 0.0, 1.0, y, 1e-12), y);
}

TEST(InvertJumpMap, SineJumpAgainstBisection) {
  const MarkMeasure m({{1.0, 1.0}});
  const auto f = families::with_jump(families::zero(1), families::sinjump(0.3));
  const double oracle = bisect([](double x) { return x + 0.3 * std::sin(x) - 1.0; }, 0.0, 2.0);
  EXPECT_NEAR(invert_jump_map(f, m, 0.0, 1.0, scalar(1.0), 1e-13)(0), oracle, 1e-12);
}

TEST(InvertJumpMap, SingularJumpThrows) {
  const MarkMeasure m({{1.0, 1.0}});
  const auto f = families::with_jump(families::zero(1), families::linjump(-1.0));
  EXPECT_THROW(invert_jump_map(f, m, 0.0, 1.0, scalar(1.0), 1e-12), Error);
}

TEST(InvertFlow, AffineOneStep) {
  // exact step of b = ln2·x + ln2 over unit time: X(x) = 2x + 1
  const double l = std::log(2.0);
  const auto field =
      families::affine(Mat::Constant(1, 1, l), scalar(l), MatList{Mat::Zero(1, 1)}, Mat::Zero(1, 1));
  const NoiseRecord noise = one_step_noise(0, 1, {0.0});
  const auto flow = integrate_jacobian(field, integrate_flow(field, MarkMeasure(), noise, {scalar(0)}, Scheme::ExactFamily));
  const InversePath inv = inverse_gradient(invert_flow(field, flow, {scalar(3.0)}, 1e-12));
  EXPECT_NEAR(inv.value(1, 0)(0), 1.0, 1e-12);
  EXPECT_NEAR(inv.gradient(1, 0)(0, 0), 0.5, 1e-12);
}

TEST(InvertFlow, GbmClosedForm) {
  const double mu = 0.1, nu = 0.2;
  const auto field = families::gbm(mu, nu);
  const auto noise = std::make_shared<const NoiseRecord>(generate_noise(MarkMeasure(), 1, 0, 1, 40, 5, 3));
  const auto ys = line_points(9, -4, 4);
  const auto flow = integrate_jacobian(field, integrate_flow(field, MarkMeasure(), noise, ys, Scheme::ExactFamily));
  const InversePath inv = inverse_gradient(invert_flow(field, flow, ys, 1e-10));
  for (std::size_t j = 0; j < inv.time_count(); ++j) {
    const std::size_t k = inv.time_indices[j];
    const double g = std::exp(-(mu - 0.5 * nu * nu) * noise->grid.times[k] - nu * noise->brownian_at(k)(0));
    for (std::size_t i = 0; i < ys.size(); ++i) {
      EXPECT_NEAR(inv.value(j, i)(0), ys[i](0) * g, 1e-10);
      EXPECT_NEAR(inv.gradient(j, i)(0, 0), g, 1e-10);
    }
  }
}

TEST(InvertFlow, SingleLinearJumpWithCompensator) {
  // H = −x/2 at rate λ: the compensator adds drift λx/2, and the jump halves the state
  const double lambda = 0.4;
  const MarkMeasure m({{1.0, lambda}});
  const auto field = families::with_jump(families::zero(1), families::linjump(-0.5));
  const auto noise = std::make_shared<const NoiseRecord>(noise_with_jump(0, 1, 4, 0.6));
  const auto ys = line_points(5, -2, 2);
  const auto flow = integrate_flow(field, m, noise, ys, Scheme::ExactFamily);
  const InversePath inv = invert_flow(field, flow, ys, 1e-12);
  for (std::size_t j = 0; j < inv.time_count(); ++j) {
    const double t = noise->grid.times[inv.time_indices[j]];
    const double factor = std::exp(-0.5 * lambda * t) * (t >= 0.6 ? 2.0 : 1.0);
    for (std::size_t i = 0; i < ys.size(); ++i) EXPECT_NEAR(inv.value(j, i)(0), factor * ys[i](0), 1e-12);
  }
}

TEST(InverseGradient, ZeroFamilyIsIdentity) {
  const auto field = families::zero(2);
  const auto flow = integrate_jacobian(
      field, integrate_flow(field, MarkMeasure(), generate_noise(MarkMeasure(), 1, 0, 1, 5, 0, 0), {vec({1, 2})}));
  const InversePath inv = inverse_gradient(invert_flow(field, flow, {vec({1, 2})}, 1e-10));
  for (std::size_t j = 0; j < inv.time_count(); ++j) EXPECT_EQ(inv.gradient(j, 0), identity(2));
}

TEST(InverseGradient, RequiresCertificateJacobians) {
  InversePath bare;
  bare.time_indices = {0};
  bare.query_points = {scalar(1.0)};
  bare.values = {1.0};
  bare.residuals = {0.0};
  try {
    inverse_gradient(bare);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingGradient);
  }
}

TEST(InvertFlow, RoundTripsAndGradientIdentity) {
  const MarkMeasure m({{1.0, 1.5}, {-1.0, 0.5}});
  const auto field = families::with_jump(smooth_field(), families::sinjump(0.3));
  const auto noise = std::make_shared<const NoiseRecord>(generate_noise(m, 1, 0, 1, 50, 8, 1));
  std::vector<Vec> ys;
  for (double a : {-2.0, -0.5, 1.0, 2.5})
    for (double b : {-1.5, 0.0, 1.5}) ys.push_back(vec({a, b}));
  const double tol = 1e-8;
  const auto flow = integrate_inverse_jacobian(field, integrate_jacobian(field, integrate_flow(field, m, noise, ys)));
  const InversePath inv = inverse_gradient(invert_flow(field, flow, ys, tol));
  EXPECT_LE(inv.max_residual(), tol);
  for (std::size_t j = 0; j < inv.time_count(); j += 7) {
    const std::size_t k = inv.time_indices[j];
    std::vector<Vec> pre;
    for (std::size_t i = 0; i < ys.size(); ++i) pre.push_back(inv.value(j, i));
    const auto forward = integrate_flow(field, m, noise, pre);
    for (std::size_t i = 0; i < ys.size(); ++i) {
      EXPECT_LE((forward.state(k, i) - ys[i]).norm(), tol);
      EXPECT_LE((inv.gradient(j, i) * inv.preimage_jacobian(j, i) - identity(2)).norm(), 1e-8);
    }
  }
  // reverse direction: X_t⁻¹(X_t(x)) = x
  const std::size_t last = flow.time_count() - 1;
  std::vector<Vec> images;
  for (std::size_t i = 0; i < ys.size(); ++i) images.push_back(flow.state(last, i));
  const InversePath back = invert_flow(field, flow, images, tol, {last});
  for (std::size_t i = 0; i < ys.size(); ++i)
    EXPECT_LE((back.value(0, i) - ys[i]).norm(), 10 * tol * (1 + flow.inverse_jacobian(last, i).norm()));
}

TEST(InvertFlow, PreservesOrderInOneDimension) {
  const auto field = sine_field();
  const auto ys = line_points(31, -3, 3);
  const auto noise = std::make_shared<const NoiseRecord>(generate_noise(MarkMeasure(), 1, 0, 1, 64, 4, 0));
  const InversePath inv = invert_flow(field, integrate_flow(field, MarkMeasure(), noise, ys), ys, 1e-8);
  for (std::size_t j = 0; j < inv.time_count(); ++j)
    for (std::size_t i = 1; i < ys.size(); ++i) EXPECT_LT(inv.value(j, i - 1)(0), inv.value(j, i)(0));
}

TEST(InvertFlow, SelectedTimesOnly) {
  const auto field = families::gbm(0.1, 0.2);
  const auto noise = std::make_shared<const NoiseRecord>(generate_noise(MarkMeasure(), 1, 0, 1, 10, 1, 0));
  const auto flow = integrate_flow(field, MarkMeasure(), noise, {scalar(1)});
  const InversePath inv = invert_flow(field, flow, {scalar(1)}, 1e-8, {3, 10});
  EXPECT_EQ(inv.time_count(), 2u);
  EXPECT_THROW(invert_flow(field, flow, {scalar(1)}, 1e-8, {11}), Error);
}

TEST(Stratonovich, AdditiveNoiseIsExact) {
  const auto field = families::affine(Mat::Zero(1, 1), scalar(0), MatList{Mat::Zero(1, 1)}, Mat::Constant(1, 1, 0.7));
  const auto noise = std::make_shared<const NoiseRecord>(generate_noise(MarkMeasure(), 1, 0, 1, 30, 2, 0));
  const auto ys = line_points(4, -1, 1);
  const InversePath z = integrate_inverse_sde_stratonovich(field, noise, ys);
  for (std::size_t k = 0; k < z.time_count(); ++k)
    for (std::size_t i = 0; i < ys.size(); ++i)
      EXPECT_NEAR(z.value(k, i)(0), ys[i](0) - 0.7 * noise->brownian_at(k)(0), 1e-14);
}

TEST(Stratonovich, ZeroFamilyIsStatic) {
  const auto noise = std::make_shared<const NoiseRecord>(generate_noise(MarkMeasure(), 1, 0, 1, 10, 2, 0));
  const InversePath z = integrate_inverse_sde_stratonovich(families::zero(1), noise, {scalar(0.3)});
  for (std::size_t k = 0; k < z.time_count(); ++k) EXPECT_EQ(z.value(k, 0)(0), 0.3);
}

TEST(Stratonovich, RejectsJumpFields) {
  const auto field = families::with_jump(families::zero(1), families::linjump(-0.5));
  const auto noise = std::make_shared<const NoiseRecord>(generate_noise(MarkMeasure(), 1, 0, 1, 10, 2, 0));
  try {
    integrate_inverse_sde_stratonovich(field, noise, {scalar(0.3)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::JumpFieldRejected);
  }
}

TEST(Stratonovich, GbmSelfConvergence) {
  const double mu = 0.1, nu = 0.4;
  const auto field = families::gbm(mu, nu);
  const std::vector<Vec> ys{scalar(1.0), scalar(-2.0)};
  std::vector<double> factors;
  for (std::uint64_t p = 0; p < 12; ++p) {
    const NoiseRecord fine = generate_noise(MarkMeasure(), 1, 0, 1, 256, 31, p);
    auto error = [&](const NoiseRecord& n) {
      const auto rec = std::make_shared<const NoiseRecord>(n);
      const InversePath z = integrate_inverse_sde_stratonovich(field, rec, ys);
      double worst = 0.0;
      for (std::size_t k = 0; k < z.time_count(); ++k) {
        const double g = std::exp(-(mu - 0.5 * nu * nu) * n.grid.times[k] - nu * n.brownian_at(k)(0));
        for (std::size_t i = 0; i < ys.size(); ++i) worst = std::max(worst, std::abs(z.value(k, i)(0) - ys[i](0) * g));
      }
      return worst;
    };
    factors.push_back(error(coarsen_noise(fine, 4)) / error(fine));
  }
  EXPECT_GE(median(factors), 1.5);
}

TEST(Stratonovich, AgreesWithStepwiseInversion) {
  const auto field = smooth_field();
  const std::vector<Vec> ys{vec({0.5, -0.3}), vec({-1.0, 1.2})};
  std::vector<double> orders;
  for (std::uint64_t p = 0; p < 10; ++p) {
    const NoiseRecord fine = generate_noise(MarkMeasure(), 1, 0, 1, 256, 41, p);
    auto gap = [&](const NoiseRecord& n) {
      const auto rec = std::make_shared<const NoiseRecord>(n);
      const InversePath z = integrate_inverse_sde_stratonovich(field, rec, ys);
      const InversePath inv = invert_flow(field, integrate_flow(field, MarkMeasure(), rec, ys), ys, 1e-10);
      double worst = 0.0;
      for (std::size_t k = 0; k < z.time_count(); ++k)
        for (std::size_t i = 0; i < ys.size(); ++i) worst = std::max(worst, (z.value(k, i) - inv.value(k, i)).norm());
      return worst;
    };
    orders.push_back(std::log(gap(coarsen_noise(fine, 4)) / gap(fine)) / std::log(4.0));
  }
  EXPECT_GE(median(orders), 0.4);
}

TEST(DefaultTolerance, PerScheme) {
  EXPECT_EQ(default_inverse_tol(Scheme::ExactFamily), 1e-10);
  EXPECT_EQ(default_inverse_tol(Scheme::Euler), 1e-8);
}
