#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "symga/errors.hpp"
#include "symga/rng.hpp"

namespace symga {

/// A stationary randomized policy for one player: a distribution over its
/// actions for every state, stored row-major as rows[state * num_actions + a].
struct StationaryPolicy {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> rows;

  StationaryPolicy() = default;
  StationaryPolicy(int states, int actions)
      : num_states(states), num_actions(actions),
        rows(static_cast<std::size_t>(states) * actions, 0.0) {}

  std::span<const double> row(int state) const {
    return {rows.data() + static_cast<std::size_t>(state) * num_actions,
            static_cast<std::size_t>(num_actions)};
  }
  std::span<double> row(int state) {
    return {rows.data() + static_cast<std::size_t>(state) * num_actions,
            static_cast<std::size_t>(num_actions)};
  }
  double prob(int state, int action) const {
    return rows[static_cast<std::size_t>(state) * num_actions + action];
  }
};

/// One policy per player.
struct JointPolicy {
  std::vector<StationaryPolicy> players;

  int num_players() const { return static_cast<int>(players.size()); }
  const StationaryPolicy& operator[](int i) const { return players[i]; }
  StationaryPolicy& operator[](int i) { return players[i]; }
};

/// Checks that every row of the policy is a probability distribution
/// (nonnegative, sums to 1 within 1e-12). Throws on violation.
inline void validate_policy(const StationaryPolicy& pi) {
  if (pi.num_states < 1 || pi.num_actions < 1)
    throw EmptyStateOrActionSet("policy shape");
  if (pi.rows.size() !=
      static_cast<std::size_t>(pi.num_states) * pi.num_actions)
    throw ShapeMismatch("policy rows do not match num_states * num_actions");
  for (int x = 0; x < pi.num_states; ++x) {
    double sum = 0.0;
    for (double p : pi.row(x)) {
      if (!std::isfinite(p)) throw NonFiniteValue("policy row");
      if (p < 0.0) throw NegativeProbability("policy row", p);
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw ValidationError("policy row at state " + std::to_string(x) +
                            " sums to " + std::to_string(sum));
  }
}

/// Uniform policy over the given shape (every row 1/|U|).
inline StationaryPolicy uniform_policy(int num_states, int num_actions) {
  StationaryPolicy pi(num_states, num_actions);
  const double p = 1.0 / num_actions;
  for (double& v : pi.rows) v = p;
  return pi;
}

/// Deterministic policy playing `action` in every state.
inline StationaryPolicy dirac_policy(int num_states, int num_actions,
                                     int action) {
  StationaryPolicy pi(num_states, num_actions);
  for (int x = 0; x < num_states; ++x) pi.row(x)[action] = 1.0;
  return pi;
}

/// rho-perturbation toward uniform: every row becomes
/// (1 - rho) * row + rho / |U|. rho must lie in [0, 1]. Two consecutive
/// perturbations with rho1 and rho2 compose into a single one with
/// rho1 + rho2 - rho1 * rho2.
inline StationaryPolicy perturb(const StationaryPolicy& pi, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0))
    throw RangeError("rho", "perturbation weight must lie in [0, 1]");
  StationaryPolicy out = pi;
  const double u = rho / pi.num_actions;
  for (double& v : out.rows) v = (1.0 - rho) * v + u;
  return out;
}

/// Sup-norm distance between two single-player policies:
/// max over states and actions of the absolute probability difference.
inline double policy_distance(const StationaryPolicy& a,
                              const StationaryPolicy& b) {
  if (a.num_states != b.num_states || a.num_actions != b.num_actions)
    throw ShapeMismatch("policy_distance requires identical shapes");
  double d = 0.0;
  for (std::size_t k = 0; k < a.rows.size(); ++k)
    d = std::max(d, std::abs(a.rows[k] - b.rows[k]));
  return d;
}

/// Sup-norm distance between joint policies (max over players).
inline double policy_distance(const JointPolicy& a, const JointPolicy& b) {
  if (a.num_players() != b.num_players())
    throw ShapeMismatch("policy_distance requires equal player counts");
  double d = 0.0;
  for (int i = 0; i < a.num_players(); ++i)
    d = std::max(d, policy_distance(a[i], b[i]));
  return d;
}

/// Samples an action from the policy's row at `state`.
inline int sample_action(RandomStream& rng, const StationaryPolicy& pi,
                         int state) {
  return rng.sample(pi.row(state));
}

}  // namespace symga
