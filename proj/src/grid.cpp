#include "stochflow/grid.hpp"

#include "stochflow/error.hpp"

#include <algorithm>
#include <cmath>

namespace stochflow {

bool Box::contains(const Vec& x, double slack) const {
  if (x.size() != lower.size()) return false;
  for (int i = 0; i < x.size(); ++i) {
    if (x(i) < lower(i) - slack || x(i) > upper(i) + slack) return false;
  }
  return true;
}

Box Box::cube(int d, double half_side) {
  return Box{Vec::Constant(d, -half_side), Vec::Constant(d, half_side)};
}

SpatialGrid::SpatialGrid(Box box, double step) : box_(std::move(box)), step_(step) {
  require(step > 0.0 && std::isfinite(step), ErrorKind::InvalidArgument, "grid step must be positive");
  require(box_.lower.size() == box_.upper.size() && box_.dim() >= 1 && box_.dim() <= kMaxDim,
          ErrorKind::InvalidArgument, "box corners must share a dimension in [1, kMaxDim]");
  size_ = 1;
  counts_.resize(static_cast<std::size_t>(box_.dim()));
  for (int a = 0; a < box_.dim(); ++a) {
    const double side = box_.upper(a) - box_.lower(a);
    require(side >= 0.0, ErrorKind::InvalidArgument, "box upper corner below lower corner");
    const int n = static_cast<int>(std::floor(side / step + 1e-9)) + 1;
    counts_[static_cast<std::size_t>(a)] = n;
    size_ *= static_cast<std::size_t>(n);
  }
}

Vec SpatialGrid::node(std::size_t flat) const {
  Vec x(dim());
  for (int a = 0; a < dim(); ++a) {
    const auto n = static_cast<std::size_t>(counts_[static_cast<std::size_t>(a)]);
    x(a) = box_.lower(a) + static_cast<double>(flat % n) * step_;
    flat /= n;
  }
  return x;
}

std::vector<int> SpatialGrid::multi_index(std::size_t flat) const {
  std::vector<int> idx(static_cast<std::size_t>(dim()));
  for (std::size_t a = 0; a < idx.size(); ++a) {
    const auto n = static_cast<std::size_t>(counts_[a]);
    idx[a] = static_cast<int>(flat % n);
    flat /= n;
  }
  return idx;
}

std::size_t SpatialGrid::flat_index(const std::vector<int>& idx) const {
  std::size_t flat = 0;
  for (std::size_t a = idx.size(); a-- > 0;) {
    flat = flat * static_cast<std::size_t>(counts_[a]) + static_cast<std::size_t>(idx[a]);
  }
  return flat;
}

std::vector<Vec> SpatialGrid::nodes() const {
  std::vector<Vec> out;
  out.reserve(size_);
  for (std::size_t i = 0; i < size_; ++i) out.push_back(node(i));
  return out;
}

std::size_t SpatialGrid::locate(const Vec& x, double tol) const {
  if (x.size() != box_.lower.size()) return npos;
  std::vector<int> idx(static_cast<std::size_t>(dim()));
  for (int a = 0; a < dim(); ++a) {
    const double k = std::round((x(a) - box_.lower(a)) / step_);
    if (k < 0 || k >= counts_[static_cast<std::size_t>(a)]) return npos;
    if (std::abs(box_.lower(a) + k * step_ - x(a)) > tol) return npos;
    idx[static_cast<std::size_t>(a)] = static_cast<int>(k);
  }
  return flat_index(idx);
}

std::vector<std::vector<int>> pair_offsets(int dim, int max_offset, double step, double max_dist) {
  std::vector<std::vector<int>> out;
  std::vector<int> off(static_cast<std::size_t>(dim), -max_offset);
  while (true) {
    // keep the lexicographically positive half so each unordered pair appears once
    bool positive = false;
    for (std::size_t a = off.size(); a-- > 0;) {
      if (off[a] != 0) {
        positive = off[a] > 0;
        break;
      }
    }
    if (positive) {
      double r2 = 0.0;
      for (int o : off) r2 += static_cast<double>(o) * o;
      if (std::sqrt(r2) * step < max_dist) out.push_back(off);
    }
    std::size_t a = 0;
    while (a < off.size() && off[a] == max_offset) off[a++] = -max_offset;
    if (a == off.size()) break;
    ++off[a];
  }
  return out;
}

double grid_holder_seminorm(const SpatialGrid& grid, double alpha,
                            const std::function<double(std::size_t, std::size_t)>& diff_norm,
                            int max_offset, double max_dist) {
  const auto offsets = pair_offsets(grid.dim(), max_offset, grid.step(), max_dist);
  std::vector<double> denom;
  denom.reserve(offsets.size());
  for (const auto& off : offsets) {
    double r2 = 0.0;
    for (int o : off) r2 += static_cast<double>(o) * o;
    denom.push_back(std::pow(std::sqrt(r2) * grid.step(), alpha));
  }
  double best = 0.0;
  std::vector<int> other(static_cast<std::size_t>(grid.dim()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto idx = grid.multi_index(i);
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      bool inside = true;
      for (std::size_t a = 0; a < idx.size(); ++a) {
        other[a] = idx[a] + offsets[k][a];
        if (other[a] < 0 || other[a] >= grid.counts()[a]) {
          inside = false;
          break;
        }
      }
      if (!inside) continue;
      best = std::max(best, diff_norm(i, grid.flat_index(other)) / denom[k]);
    }
  }
  return best;
}

}  // namespace stochflow
