#pragma once

#include "stochflow/linalg.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace stochflow {

/// Axis-aligned product of closed intervals.
struct Box {
  Vec lower;
  Vec upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vec& x, double slack = 0.0) const;

  /// Symmetric box [-a, a]^d.
  static Box cube(int d, double half_side);
};

/// Uniform node lattice anchored at the lower corner of a box. Axis 0 varies
/// fastest in the flat node index.
class SpatialGrid {
 public:
  SpatialGrid() = default;
  SpatialGrid(Box box, double step);

  const Box& box() const { return box_; }
  double step() const { return step_; }
  int dim() const { return box_.dim(); }
  std::size_t size() const { return size_; }
  int count(int axis) const { return counts_[static_cast<std::size_t>(axis)]; }
  const std::vector<int>& counts() const { return counts_; }

  Vec node(std::size_t flat) const;
  std::vector<int> multi_index(std::size_t flat) const;
  std::size_t flat_index(const std::vector<int>& idx) const;
  std::vector<Vec> nodes() const;

  /// Flat index of the node nearest to x, or npos when x is farther than
  /// `tol` from every node.
  std::size_t locate(const Vec& x, double tol) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  Box box_;
  double step_ = 0.0;
  std::vector<int> counts_;
  std::size_t size_ = 0;
};

/// Grid estimate of the Hölder seminorm sup |f(x)-f(y)| / |x-y|^alpha over
/// node pairs at most `max_offset` steps apart per axis and strictly closer
/// than `max_dist`. `diff_norm(i, j)` returns |f(node i) - f(node j)|.
double grid_holder_seminorm(const SpatialGrid& grid, double alpha,
                            const std::function<double(std::size_t, std::size_t)>& diff_norm,
                            int max_offset = 8, double max_dist = 1.0);

/// Node offsets (lexicographically positive half) used by the seminorm estimate.
std::vector<std::vector<int>> pair_offsets(int dim, int max_offset, double step, double max_dist);

}  // namespace stochflow
