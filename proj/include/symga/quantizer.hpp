#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "symga/errors.hpp"
#include "symga/policy.hpp"
#include "symga/rng.hpp"

namespace symga {

/// Default cap on how many objects an enumeration may produce before the
/// operation refuses with CombinatorialBlowup.
inline constexpr std::uint64_t kDefaultEnumerationCap = 10000000;

/// All compositions of `total` into `parts` nonnegative integers, in
/// ascending lexicographic order of the composition vector. This order is
/// the canonical enumeration order used for grid indices, uniform draws and
/// every tie-break in the library.
inline std::vector<std::vector<int>> enumerate_compositions(int total,
                                                            int parts) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(parts, 0);
  // Depth-first with the first coordinate as the slowest digit gives
  // ascending lexicographic order directly.
  auto rec = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == parts - 1) {
      cur[pos] = remaining;
      out.push_back(cur);
      return;
    }
    for (int k = 0; k <= remaining; ++k) {
      cur[pos] = k;
      self(self, pos + 1, remaining - k);
    }
  };
  if (parts >= 1) rec(rec, 0, total);
  return out;
}

/// Number of compositions of m into d parts: C(m + d - 1, d - 1).
inline std::uint64_t composition_count(int m, int d) {
  // Small arguments only in practice; compute multiplicatively.
  std::uint64_t num = 1;
  for (int k = 1; k <= d - 1; ++k) {
    num = num * (m + k) / k;  // exact at every step for binomials
  }
  return num;
}

/// The uniform quantization of one player's policy simplex with resolution
/// m: for each state, the set of distributions whose entries are integer
/// multiples of 1/m. Points are stored once (they are shared across states)
/// in ascending lexicographic order of their integer numerators. A policy in
/// the set assigns one grid point per state; its index is the mixed-radix
/// number over states with state 0 as the most significant digit.
class QuantizedPolicySet {
 public:
  /// Builds the grid for the given shape. The per-state point set is always
  /// materialized (its size is C(m + |U| - 1, |U| - 1)); the policy count
  /// |points|^|X| is only checked against `cap` by the operations that
  /// actually enumerate or index policies.
  static QuantizedPolicySet build(int num_actions, int num_states, int m) {
    if (num_actions < 1 || num_states < 1)
      throw EmptyStateOrActionSet("quantized set shape");
    if (m < 1) throw RangeError("m", "quantization resolution must be >= 1");
    QuantizedPolicySet g;
    g.num_actions_ = num_actions;
    g.num_states_ = num_states;
    g.m_ = m;
    g.numerators_ = enumerate_compositions(m, num_actions);
    g.points_.reserve(g.numerators_.size() * num_actions);
    for (const auto& k : g.numerators_)
      for (int a = 0; a < num_actions; ++a)
        g.points_.push_back(static_cast<double>(k[a]) / m);

    // Policy count with overflow watch: |points|^|X|.
    g.policy_count_ = 1;
    g.policy_count_overflowed_ = false;
    const std::uint64_t P = g.num_points();
    for (int x = 0; x < num_states; ++x) {
      if (g.policy_count_ > UINT64_MAX / P) {
        g.policy_count_overflowed_ = true;
        break;
      }
      g.policy_count_ *= P;
    }
    return g;
  }

  int num_actions() const { return num_actions_; }
  int num_states() const { return num_states_; }
  int resolution() const { return m_; }

  std::uint64_t num_points() const { return numerators_.size(); }

  /// |points|^|X|; throws CombinatorialBlowup when it exceeds `cap` (or
  /// overflows), i.e. when the caller is about to enumerate policies.
  std::uint64_t num_policies(std::uint64_t cap = kDefaultEnumerationCap) const {
    const double approx =
        std::pow(static_cast<double>(num_points()), num_states_);
    if (policy_count_overflowed_ || policy_count_ > cap)
      throw CombinatorialBlowup("policy grid", approx, cap);
    return policy_count_;
  }

  std::span<const double> point(std::uint64_t idx) const {
    return {points_.data() + idx * num_actions_,
            static_cast<std::size_t>(num_actions_)};
  }
  const std::vector<int>& point_numerators(std::uint64_t idx) const {
    return numerators_[idx];
  }

  /// Distances within this band of the minimum count as tied in
  /// nearest_point. Grid coordinates like k/10 are not exactly representable,
  /// so genuine ties surface as distances differing by rounding noise
  /// (~1e-16); without the band the documented tie-break would be
  /// unreachable. The band is far below any grid spacing 1/m in use.
  static constexpr double kNearestTieTol = 1e-12;

  /// Index of the grid point closest to `target` in sup norm; ties (distances
  /// within kNearestTieTol of the minimum) go to the lowest enumeration index.
  std::uint64_t nearest_point(std::span<const double> target) const {
    if (target.size() != static_cast<std::size_t>(num_actions_))
      throw ShapeMismatch("nearest_point target has wrong length");
    const auto dist = [&](std::uint64_t idx) {
      auto p = point(idx);
      double d = 0.0;
      for (int a = 0; a < num_actions_; ++a)
        d = std::max(d, std::abs(p[a] - target[a]));
      return d;
    };
    double best_d = std::numeric_limits<double>::infinity();
    for (std::uint64_t idx = 0; idx < num_points(); ++idx)
      best_d = std::min(best_d, dist(idx));
    for (std::uint64_t idx = 0; idx < num_points(); ++idx)
      if (dist(idx) <= best_d + kNearestTieTol) return idx;
    return 0;  // unreachable: some index attains best_d
  }

  /// Exact membership test for a single distribution row: returns the grid
  /// point index when every entry is an integer multiple of 1/m (within
  /// 1e-9 of one), otherwise nullopt.
  std::optional<std::uint64_t> point_index(std::span<const double> row) const {
    if (row.size() != static_cast<std::size_t>(num_actions_)) return std::nullopt;
    std::vector<int> k(num_actions_);
    int sum = 0;
    for (int a = 0; a < num_actions_; ++a) {
      const double scaled = row[a] * m_;
      const double rounded = std::round(scaled);
      if (std::abs(scaled - rounded) > 1e-9 * m_) return std::nullopt;
      k[a] = static_cast<int>(rounded);
      if (k[a] < 0) return std::nullopt;
      sum += k[a];
    }
    if (sum != m_) return std::nullopt;
    auto it = std::lower_bound(numerators_.begin(), numerators_.end(), k);
    if (it == numerators_.end() || *it != k) return std::nullopt;
    return static_cast<std::uint64_t>(it - numerators_.begin());
  }

  /// Materializes the policy with the given mixed-radix index.
  StationaryPolicy policy_from_index(std::uint64_t policy_idx) const {
    StationaryPolicy pi(num_states_, num_actions_);
    const std::uint64_t P = num_points();
    for (int x = num_states_ - 1; x >= 0; --x) {
      const std::uint64_t g = policy_idx % P;
      policy_idx /= P;
      auto p = point(g);
      std::copy(p.begin(), p.end(), pi.row(x).begin());
    }
    return pi;
  }

  /// Per-state grid point indices of a policy index (state 0 first).
  std::vector<std::uint64_t> point_indices_of(std::uint64_t policy_idx) const {
    std::vector<std::uint64_t> g(num_states_);
    const std::uint64_t P = num_points();
    for (int x = num_states_ - 1; x >= 0; --x) {
      g[x] = policy_idx % P;
      policy_idx /= P;
    }
    return g;
  }

  std::uint64_t policy_index_of_points(
      std::span<const std::uint64_t> point_idx) const {
    std::uint64_t idx = 0;
    for (int x = 0; x < num_states_; ++x) idx = idx * num_points() + point_idx[x];
    return idx;
  }

  /// Exact membership test for a whole policy; returns its index or nullopt.
  std::optional<std::uint64_t> policy_index_of(const StationaryPolicy& pi) const {
    if (pi.num_states != num_states_ || pi.num_actions != num_actions_)
      return std::nullopt;
    std::uint64_t idx = 0;
    for (int x = 0; x < num_states_; ++x) {
      auto g = point_index(pi.row(x));
      if (!g) return std::nullopt;
      idx = idx * num_points() + *g;
    }
    return idx;
  }

  /// Uniform draw over the whole policy set (each of the |points|^|X|
  /// policies equally likely), as a policy index.
  std::uint64_t uniform_policy_draw(RandomStream& rng) const {
    std::uint64_t idx = 0;
    for (int x = 0; x < num_states_; ++x)
      idx = idx * num_points() + rng.uniform_index(num_points());
    return idx;
  }

 private:
  int num_actions_ = 0;
  int num_states_ = 0;
  int m_ = 0;
  std::vector<std::vector<int>> numerators_;  // lexicographic order
  std::vector<double> points_;                // flattened rows, same order
  std::uint64_t policy_count_ = 0;
  bool policy_count_overflowed_ = false;
};

/// Projects an arbitrary policy onto the grid: independently per state, the
/// sup-norm-nearest grid point, ties to the lowest enumeration index.
/// Idempotent on grid members.
inline StationaryPolicy project_to_grid(const StationaryPolicy& pi,
                                        const QuantizedPolicySet& grid) {
  if (pi.num_states != grid.num_states() ||
      pi.num_actions != grid.num_actions())
    throw ShapeMismatch("project_to_grid shape mismatch");
  StationaryPolicy out(pi.num_states, pi.num_actions);
  for (int x = 0; x < pi.num_states; ++x) {
    auto p = grid.point(grid.nearest_point(pi.row(x)));
    std::copy(p.begin(), p.end(), out.row(x).begin());
  }
  return out;
}

}  // namespace symga
