#pragma once

#include "stochflow/coeffs.hpp"
#include "stochflow/linalg.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace stochflow {

/// Strictly increasing time points on [s, t]. A point may be a base point
/// (base_index ≥ 0), a jump point (jump_atom ≥ 0), or both.
struct TimeGrid {
  std::vector<double> times;
  std::vector<int> base_index;
  std::vector<int> jump_atom;

  std::size_t size() const { return times.size(); }
  std::size_t intervals() const { return times.empty() ? 0 : times.size() - 1; }
  double start() const { return times.front(); }
  double end() const { return times.back(); }
  bool is_jump(std::size_t k) const { return jump_atom[k] >= 0; }
  bool is_base(std::size_t k) const { return base_index[k] >= 0; }

  /// Index of the point equal to `time`, or npos.
  std::size_t find(double time) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  bool operator==(const TimeGrid&) const = default;
};

TimeGrid uniform_grid(double s, double t, int steps);

struct JumpEvent {
  double time = 0.0;
  int atom = 0;

  bool operator==(const JumpEvent&) const = default;
};

/// Union of base points and jump times; the jump flag wins on coincidence.
TimeGrid jump_adapted_grid(const TimeGrid& base, std::span<const JumpEvent> jumps);

/// One realization of the driving noise on a jump-adapted grid.
struct NoiseRecord {
  TimeGrid grid;
  int brownian_count = 1;
  std::vector<double> increments;  // interval-major, brownian_count per interval
  std::vector<JumpEvent> jumps;
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;

  /// Δw over interval k (from grid point k to k+1).
  Vec increment(std::size_t k) const;
  double dt(std::size_t k) const { return grid.times[k + 1] - grid.times[k]; }
  /// w at grid point k, w at the first point being 0.
  Vec brownian_at(std::size_t k) const;

  bool operator==(const NoiseRecord&) const = default;
};

/// Draw order within the (seed, path_index) stream: jump count, jump times,
/// jump atoms, then Brownian increments interval by interval.
NoiseRecord generate_noise(const MarkMeasure& measure, int brownian_count, double s, double t, int base_steps,
                           std::uint64_t seed, std::uint64_t path_index);

/// Same path on a grid with every `factor` base intervals merged; jump points are kept.
NoiseRecord coarsen_noise(const NoiseRecord& noise, int factor);

/// The part of the record between grid points r and t (both must be grid points).
/// A jump exactly at r is dropped since flows started at r only see jumps in (r, t].
NoiseRecord restrict_noise(const NoiseRecord& noise, double r, double t);

/// Uniform random stream keyed by (seed, path_index).
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t path_index);

  double uniform();  // [0, 1)
  double normal();
  std::uint64_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace stochflow
