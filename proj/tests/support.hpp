#pragma once

#include "stochflow/coeffs.hpp"
#include "stochflow/noise.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <vector>

namespace testing_support {

using stochflow::Mat;
using stochflow::MatList;
using stochflow::Vec;

inline Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

inline Vec scalar(double x) { return vec({x}); }

/// d = 2, m = 1 smooth nonlinear field with bounded derivatives:
///   b = (−0.5 x₁ + 0.3 sin x₂, −0.4 x₂ + 0.2 cos x₁),  σ = (0.2 sin x₁ + 0.1, 0.3 cos x₂).
inline stochflow::CoefficientField smooth_field() {
  stochflow::FieldParts p;
  p.name = "smooth";
  p.dim = 2;
  p.brownian_count = 1;
  p.drift = [](double, const Vec& x) {
    return vec({-0.5 * x(0) + 0.3 * std::sin(x(1)), -0.4 * x(1) + 0.2 * std::cos(x(0))});
  };
  p.diffusion = [](double, const Vec& x) {
    Mat s(2, 1);
    s << 0.2 * std::sin(x(0)) + 0.1, 0.3 * std::cos(x(1));
    return s;
  };
  p.drift_grad = [](double, const Vec& x) {
    Mat g(2, 2);
    g << -0.5, 0.3 * std::cos(x(1)), -0.2 * std::sin(x(0)), -0.4;
    return g;
  };
  p.diffusion_grad = [](double, const Vec& x) {
    Mat g(2, 2);
    g << 0.2 * std::cos(x(0)), 0.0, 0.0, -0.3 * std::sin(x(1));
    return MatList{g};
  };
  p.drift_hess = [](double, const Vec& x) {
    Mat h0 = Mat::Zero(2, 2), h1 = Mat::Zero(2, 2);
    h0(1, 1) = -0.3 * std::sin(x(1));
    h1(0, 0) = -0.2 * std::cos(x(0));
    return MatList{h0, h1};
  };
  p.diffusion_hess = [](double, const Vec& x) {
    Mat h0 = Mat::Zero(2, 2), h1 = Mat::Zero(2, 2);
    h0(0, 0) = -0.2 * std::sin(x(0));
    h1(1, 1) = -0.3 * std::cos(x(1));
    return std::vector<MatList>{MatList{h0, h1}};
  };
  return stochflow::CoefficientField(p);
}

/// d = 1, m = 1 nonlinear field b = sin x, σ = 0.3 cos x.
inline stochflow::CoefficientField sine_field() {
  stochflow::FieldParts p;
  p.name = "sine";
  p.drift = [](double, const Vec& x) { return scalar(std::sin(x(0))); };
  p.diffusion = [](double, const Vec& x) { return Mat::Constant(1, 1, 0.3 * std::cos(x(0))); };
  p.drift_grad = [](double, const Vec& x) { return Mat::Constant(1, 1, std::cos(x(0))); };
  p.diffusion_grad = [](double, const Vec& x) { return MatList{Mat::Constant(1, 1, -0.3 * std::sin(x(0)))}; };
  p.drift_hess = [](double, const Vec& x) { return MatList{Mat::Constant(1, 1, -std::sin(x(0)))}; };
  p.diffusion_hess = [](double, const Vec& x) {
    return std::vector<MatList>{MatList{Mat::Constant(1, 1, -0.3 * std::cos(x(0)))}};
  };
  return stochflow::CoefficientField(p);
}

/// Single-interval record with a prescribed Brownian increment.
inline stochflow::NoiseRecord one_step_noise(double s, double t, const std::vector<double>& dw) {
  stochflow::NoiseRecord n;
  n.grid = stochflow::uniform_grid(s, t, 1);
  n.brownian_count = static_cast<int>(dw.size());
  n.increments = dw;
  return n;
}

/// Jump-free record with a single jump of atom 0 inserted at `time`.
inline stochflow::NoiseRecord noise_with_jump(double s, double t, int steps, double time, int brownian_count = 1) {
  stochflow::NoiseRecord n;
  n.jumps = {{time, 0}};
  n.grid = stochflow::jump_adapted_grid(stochflow::uniform_grid(s, t, steps), n.jumps);
  n.brownian_count = brownian_count;
  n.increments.assign(n.grid.intervals() * static_cast<std::size_t>(brownian_count), 0.0);
  return n;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace testing_support
