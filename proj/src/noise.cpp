#include "stochflow/noise.hpp"

#include "stochflow/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace stochflow {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

// ---------------------------------------------------------------------------
// RandomStream

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t path_index)
    : engine_(splitmix64(splitmix64(seed) ^ path_index)) {}

double RandomStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double RandomStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t RandomStream::poisson(double mean) {
  require(mean >= 0.0 && mean <= 700.0, ErrorKind::InvalidArgument, "Poisson mean must lie in [0, 700]");
  if (mean == 0.0) return 0;
  const double u = uniform();
  double p = std::exp(-mean);
  double cdf = p;
  std::uint64_t k = 0;
  const auto cap = static_cast<std::uint64_t>(10.0 * mean + 100.0);
  while (u > cdf && k < cap) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

// ---------------------------------------------------------------------------
// Grids

std::size_t TimeGrid::find(double time) const {
  const auto it = std::lower_bound(times.begin(), times.end(), time);
  if (it == times.end() || *it != time) return npos;
  return static_cast<std::size_t>(it - times.begin());
}

TimeGrid uniform_grid(double s, double t, int steps) {
  require(std::isfinite(s) && std::isfinite(t) && t > s, ErrorKind::InvalidInterval, "time window needs t > s");
  require(steps >= 1, ErrorKind::InvalidArgument, "base_steps must be at least 1");
  TimeGrid g;
  g.times.resize(static_cast<std::size_t>(steps) + 1);
  g.base_index.resize(g.times.size());
  g.jump_atom.assign(g.times.size(), -1);
  const double h = (t - s) / steps;
  for (int k = 0; k <= steps; ++k) {
    g.times[static_cast<std::size_t>(k)] = k == steps ? t : s + k * h;
    g.base_index[static_cast<std::size_t>(k)] = k;
  }
  return g;
}

TimeGrid jump_adapted_grid(const TimeGrid& base, std::span<const JumpEvent> jumps) {
  if (jumps.empty()) return base;
  TimeGrid out;
  out.times.reserve(base.size() + jumps.size());
  out.base_index.reserve(base.size() + jumps.size());
  out.jump_atom.reserve(base.size() + jumps.size());
  std::size_t i = 0, j = 0;
  while (i < base.size() || j < jumps.size()) {
    if (j < jumps.size()) {
      const double tj = jumps[j].time;
      require(tj > base.start() && tj <= base.end(), ErrorKind::InvalidArgument, "jump time outside (s, t]");
      require(j == 0 || tj > jumps[j - 1].time, ErrorKind::InvalidArgument, "jump times must be strictly increasing");
    }
    if (j == jumps.size() || (i < base.size() && base.times[i] < jumps[j].time)) {
      out.times.push_back(base.times[i]);
      out.base_index.push_back(base.base_index[i]);
      out.jump_atom.push_back(base.jump_atom[i]);
      ++i;
    } else if (i < base.size() && base.times[i] == jumps[j].time) {
      out.times.push_back(base.times[i]);
      out.base_index.push_back(base.base_index[i]);
      out.jump_atom.push_back(jumps[j].atom);
      ++i;
      ++j;
    } else {
      out.times.push_back(jumps[j].time);
      out.base_index.push_back(-1);
      out.jump_atom.push_back(jumps[j].atom);
      ++j;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noise records

Vec NoiseRecord::increment(std::size_t k) const {
  const auto m = static_cast<std::size_t>(brownian_count);
  Vec out(brownian_count);
  for (std::size_t r = 0; r < m; ++r) out(static_cast<int>(r)) = increments[k * m + r];
  return out;
}

Vec NoiseRecord::brownian_at(std::size_t k) const {
  Vec w = Vec::Zero(brownian_count);
  for (std::size_t j = 0; j < k; ++j) w += increment(j);
  return w;
}

NoiseRecord generate_noise(const MarkMeasure& measure, int brownian_count, double s, double t, int base_steps,
                           std::uint64_t seed, std::uint64_t path_index) {
  require(std::isfinite(s) && std::isfinite(t) && t > s, ErrorKind::InvalidInterval, "time window needs t > s");
  require(brownian_count >= 1 && brownian_count <= kMaxDim, ErrorKind::InvalidArgument,
          "brownian_count outside [1, kMaxDim]");
  RandomStream rng(seed, path_index);

  NoiseRecord rec;
  rec.brownian_count = brownian_count;
  rec.seed = seed;
  rec.path_index = path_index;

  const std::uint64_t count = measure.empty() ? 0 : rng.poisson(measure.total_rate() * (t - s));
  std::vector<double> jump_times;
  jump_times.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) jump_times.push_back(s + (t - s) * (1.0 - rng.uniform()));
  std::sort(jump_times.begin(), jump_times.end());
  for (std::size_t k = 1; k < jump_times.size(); ++k) {
    if (jump_times[k] <= jump_times[k - 1]) jump_times[k] = std::nextafter(jump_times[k - 1], t + 1.0);
  }
  for (double time : jump_times) {
    const double u = rng.uniform() * measure.total_rate();
    double acc = 0.0;
    int atom = static_cast<int>(measure.size()) - 1;
    for (std::size_t a = 0; a < measure.size(); ++a) {
      acc += measure.atoms()[a].rate;
      if (u < acc) {
        atom = static_cast<int>(a);
        break;
      }
    }
    rec.jumps.push_back(JumpEvent{std::min(time, t), atom});
  }

  rec.grid = jump_adapted_grid(uniform_grid(s, t, base_steps), rec.jumps);
  rec.increments.resize(rec.grid.intervals() * static_cast<std::size_t>(brownian_count));
  std::size_t pos = 0;
  for (std::size_t k = 0; k < rec.grid.intervals(); ++k) {
    const double sd = std::sqrt(rec.grid.times[k + 1] - rec.grid.times[k]);
    for (int r = 0; r < brownian_count; ++r) rec.increments[pos++] = sd * rng.normal();
  }
  return rec;
}

NoiseRecord coarsen_noise(const NoiseRecord& noise, int factor) {
  require(factor >= 1, ErrorKind::InvalidArgument, "coarsening factor must be positive");
  if (factor == 1) return noise;
  const TimeGrid& g = noise.grid;
  const int last_base = g.base_index.back();
  require(last_base >= 0 && last_base % factor == 0, ErrorKind::InvalidArgument,
          "base step count must be divisible by the coarsening factor");
  const auto m = static_cast<std::size_t>(noise.brownian_count);

  NoiseRecord out;
  out.brownian_count = noise.brownian_count;
  out.jumps = noise.jumps;
  out.seed = noise.seed;
  out.path_index = noise.path_index;
  std::vector<double> acc(m, 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (k > 0) {
      for (std::size_t r = 0; r < m; ++r) acc[r] += noise.increments[(k - 1) * m + r];
    }
    const bool on_coarse_base = g.base_index[k] >= 0 && g.base_index[k] % factor == 0;
    if (!on_coarse_base && !g.is_jump(k)) continue;
    out.grid.times.push_back(g.times[k]);
    out.grid.base_index.push_back(on_coarse_base ? g.base_index[k] / factor : -1);
    out.grid.jump_atom.push_back(g.jump_atom[k]);
    if (k > 0) {
      out.increments.insert(out.increments.end(), acc.begin(), acc.end());
      std::fill(acc.begin(), acc.end(), 0.0);
    }
  }
  return out;
}

NoiseRecord restrict_noise(const NoiseRecord& noise, double r, double t) {
  const std::size_t kr = noise.grid.find(r);
  const std::size_t kt = noise.grid.find(t);
  require(kr != TimeGrid::npos && kt != TimeGrid::npos, ErrorKind::InvalidArgument,
          "restriction end points must be grid points");
  require(kr < kt, ErrorKind::InvalidInterval, "restriction needs r < t");
  const auto m = static_cast<std::size_t>(noise.brownian_count);

  NoiseRecord out;
  out.brownian_count = noise.brownian_count;
  out.seed = noise.seed;
  out.path_index = noise.path_index;
  const auto first = static_cast<std::ptrdiff_t>(kr);
  const auto last = static_cast<std::ptrdiff_t>(kt) + 1;
  out.grid.times.assign(noise.grid.times.begin() + first, noise.grid.times.begin() + last);
  out.grid.base_index.assign(noise.grid.base_index.begin() + first, noise.grid.base_index.begin() + last);
  out.grid.jump_atom.assign(noise.grid.jump_atom.begin() + first, noise.grid.jump_atom.begin() + last);
  out.grid.jump_atom.front() = -1;
  out.increments.assign(noise.increments.begin() + static_cast<std::ptrdiff_t>(kr * m),
                        noise.increments.begin() + static_cast<std::ptrdiff_t>(kt * m));
  for (const auto& e : noise.jumps)
    if (e.time > r && e.time <= t) out.jumps.push_back(e);
  return out;
}

}  // namespace stochflow
