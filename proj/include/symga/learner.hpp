#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "symga/errors.hpp"
#include "symga/policy.hpp"
#include "symga/quantizer.hpp"
#include "symga/rng.hpp"
#include "symga/solver.hpp"

namespace symga {

/// Learning-rate schedule keyed by a visit count n (the number of earlier
/// updates of the same table entry within the current learning phase). The
/// default 1/(n+1) schedule makes each entry a running average: the first
/// update of a phase overwrites the stale value outright (alpha = 1).
class StepSize {
 public:
  static StepSize harmonic() { return StepSize{Kind::Harmonic, 0.0}; }
  /// Constant step size (test utility; does not satisfy the usual
  /// square-summability requirement).
  static StepSize constant(double c) { return StepSize{Kind::Constant, c}; }

  double operator()(long n) const {
    switch (kind_) {
      case Kind::Harmonic: return 1.0 / static_cast<double>(n + 1);
      case Kind::Constant: return c_;
    }
    return 0.0;
  }

  bool is_harmonic() const { return kind_ == Kind::Harmonic; }
  double constant_value() const { return c_; }

 private:
  enum class Kind { Harmonic, Constant };
  StepSize(Kind k, double c) : kind_(k), c_(c) {}
  Kind kind_;
  double c_;
};

/// Step size for prior-visit count n under the default schedule.
inline double step_size(long n) { return 1.0 / static_cast<double>(n + 1); }

/// What one agent observes about one stage of play: its own action and
/// realized cost only. Keeping updates a function of this struct is the
/// independence boundary; no foreign action or payoff can leak in.
struct StageObservation {
  int state = 0;
  int action = 0;
  double cost = 0.0;
  int next_state = 0;
};

/// Tabular state-action value estimates with per-entry visit counts.
struct QTable {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> q;
  std::vector<long> visits;

  QTable() = default;
  QTable(int states, int actions, double init = 0.0)
      : num_states(states), num_actions(actions),
        q(static_cast<std::size_t>(states) * actions, init),
        visits(static_cast<std::size_t>(states) * actions, 0) {}

  double at(int x, int u) const {
    return q[static_cast<std::size_t>(x) * num_actions + u];
  }
  std::span<const double> row(int x) const {
    return {q.data() + static_cast<std::size_t>(x) * num_actions,
            static_cast<std::size_t>(num_actions)};
  }
  double min_at(int x) const {
    auto r = row(x);
    return *std::min_element(r.begin(), r.end());
  }
};

/// Tabular state value estimates with per-state visit counts.
struct JTable {
  int num_states = 0;
  std::vector<double> j;
  std::vector<long> visits;

  JTable() = default;
  explicit JTable(int states, double init = 0.0)
      : num_states(states), j(states, init), visits(states, 0) {}
};

/// One temporal-difference update of the state-action estimate:
///   Q(x,u) <- (1 - a_n) Q(x,u) + a_n [ c + beta * min_v Q(x',v) ]
/// with n the entry's prior within-phase visit count. The bootstrap term
/// reads the table before the write, so a self-transition uses old values.
inline void q_update(QTable& q, const StageObservation& obs, double beta,
                     const StepSize& alpha) {
  const std::size_t k =
      static_cast<std::size_t>(obs.state) * q.num_actions + obs.action;
  const double a = alpha(q.visits[k]);
  const double target = obs.cost + beta * q.min_at(obs.next_state);
  q.q[k] = (1.0 - a) * q.q[k] + a * target;
  q.visits[k] += 1;
}

/// One temporal-difference update of the state value estimate:
///   J(x) <- (1 - a_m) J(x) + a_m [ c + beta * J(x') ]
/// with m the state's prior within-phase visit count.
inline void j_update(JTable& j, const StageObservation& obs, double beta,
                     const StepSize& alpha) {
  const double a = alpha(j.visits[obs.state]);
  j.j[obs.state] =
      (1.0 - a) * j.j[obs.state] + a * (obs.cost + beta * j.j[obs.next_state]);
  j.visits[obs.state] += 1;
}

/// End-of-phase satisfaction check on learned estimates: the agent accepts
/// its baseline when, in every state, J(x) <= min_u Q(x,u) + eps + delta.
inline bool satisfaction_test(const JTable& j, const QTable& q, double eps,
                              double delta) {
  for (int x = 0; x < j.num_states; ++x)
    if (j.j[x] > q.min_at(x) + eps + delta) return false;
  return true;
}

/// Which way the revision step's greedy action points. Min matches the cost
/// convention used everywhere else; Max is available as a switch.
enum class Objective { Min, Max };

/// Lowest-index greedy action of a value row under the objective.
inline int greedy_action(std::span<const double> q_row, Objective objective) {
  if (objective == Objective::Min)
    return static_cast<int>(
        std::min_element(q_row.begin(), q_row.end()) - q_row.begin());
  return static_cast<int>(
      std::max_element(q_row.begin(), q_row.end()) - q_row.begin());
}

/// The pre-projection row of the revision step for one state: moves
/// probability toward the greedy action, taking at most eta / (|U| - 1) from
/// each other action (never more than the action currently has):
///   shift_u = min{ row(u), eta / (|U| - 1) }           for u != greedy
///   new row = row - shift (off-greedy) + total shift (on greedy).
/// The result is a valid distribution by construction; a row already
/// concentrated on the greedy action is a fixed point.
inline std::vector<double> revision_mid_row(std::span<const double> policy_row,
                                            std::span<const double> q_row,
                                            double eta, Objective objective) {
  const int U = static_cast<int>(policy_row.size());
  if (static_cast<int>(q_row.size()) != U)
    throw ShapeMismatch("revision_mid_row needs matching row lengths");
  std::vector<double> mid(policy_row.begin(), policy_row.end());
  if (U == 1) return mid;
  const int g = greedy_action(q_row, objective);
  const double per_action = eta / (U - 1);
  double moved = 0.0;
  for (int u = 0; u < U; ++u) {
    if (u == g) continue;
    const double shift = std::min(mid[u], per_action);
    mid[u] -= shift;
    moved += shift;
  }
  mid[g] += moved;
  return mid;
}

/// Full revision step from learned values: per state, shift mass toward the
/// greedy action of `q`, then project back onto the grid (sup norm, ties to
/// the lowest enumeration index). Returns the new policy's grid index.
inline std::uint64_t independent_update_rule(const StationaryPolicy& pi,
                                             const QTable& q, double eta,
                                             const QuantizedPolicySet& grid,
                                             Objective objective = Objective::Min) {
  if (pi.num_states != q.num_states || pi.num_actions != q.num_actions)
    throw ShapeMismatch("policy and value table shapes differ");
  if (!(eta > 0.0)) throw RangeError("eta", "step size must be positive");
  std::vector<std::uint64_t> points(pi.num_states);
  for (int x = 0; x < pi.num_states; ++x) {
    const auto mid = revision_mid_row(pi.row(x), q.row(x), eta, objective);
    points[x] = grid.nearest_point(mid);
  }
  return grid.policy_index_of_points(points);
}

/// Revision step driven by exact optimal values: identical to the learned
/// version but the greedy action comes from Q* against the frozen opponents.
inline std::uint64_t oracle_update_rule(const ValidatedGame& game,
                                        const JointPolicy& joint, int player,
                                        double eta,
                                        const QuantizedPolicySet& grid,
                                        double tol = 1e-10,
                                        Objective objective = Objective::Min) {
  const auto q = solve_q_star(induce_mdp(game, player, joint), tol);
  std::vector<std::uint64_t> points(game.num_states());
  for (int x = 0; x < game.num_states(); ++x) {
    const auto mid =
        revision_mid_row(joint[player].row(x), q.row(x), eta, objective);
    points[x] = grid.nearest_point(mid);
  }
  return grid.policy_index_of_points(points);
}

/// Everything a single learning agent is configured with.
struct LearnerParams {
  double eps = 0.2;     // satisfaction slack the agent aims for
  double delta = 0.0;   // estimation slack added to the satisfaction test
  double rho = 0.05;    // exploration mixing weight during phases
  double e = 0.1;       // probability of a uniform policy draw when revising
  double eta = 0.2;     // revision step size
  StepSize alpha = StepSize::harmonic();
  Objective objective = Objective::Min;
  double q_box_lo = 0.0, q_box_hi = 0.0;  // clamping box for Q estimates
  double j_box_lo = 0.0, j_box_hi = 0.0;  // clamping box for J estimates
};

/// Default clamping boxes from the game's value bound: the discounted value
/// of any policy lies in [-c_max/(1-beta), +c_max/(1-beta)]; one unit of
/// headroom keeps clamping inactive in ordinary runs.
inline void set_default_boxes(LearnerParams& p, const ValidatedGame& g,
                              int player) {
  const double b = g.value_bound(player) + 1.0;
  p.q_box_lo = -b;
  p.q_box_hi = b;
  p.j_box_lo = -b;
  p.j_box_hi = b;
}

/// Mutable per-agent state across phases: the baseline policy (always a
/// grid member, stored by index), its exploration mixture, the running
/// estimates and the agent's private random stream.
class LearnerState {
 public:
  LearnerState(const ValidatedGame& game, int player,
               const QuantizedPolicySet& grid, LearnerParams params,
               std::uint64_t seed, std::uint64_t initial_policy)
      : game_(&game), grid_(&grid), player_(player), params_(params),
        rng_(seed),
        q_(game.num_states(), game.num_actions(player)),
        j_(game.num_states()) {
    set_baseline(initial_policy);
  }

  /// Draws the initial baseline uniformly from the grid using the agent's
  /// own stream (first draw of the stream, before any stage sampling).
  LearnerState(const ValidatedGame& game, int player,
               const QuantizedPolicySet& grid, LearnerParams params,
               std::uint64_t seed)
      : game_(&game), grid_(&grid), player_(player), params_(params),
        rng_(seed),
        q_(game.num_states(), game.num_actions(player)),
        j_(game.num_states()) {
    set_baseline(grid.uniform_policy_draw(rng_));
  }

  int player() const { return player_; }
  const LearnerParams& params() const { return params_; }
  std::uint64_t baseline_index() const { return baseline_index_; }
  const StationaryPolicy& baseline() const { return baseline_; }
  const StationaryPolicy& behavior() const { return behavior_; }
  QTable& q() { return q_; }
  const QTable& q() const { return q_; }
  JTable& j() { return j_; }
  const JTable& j() const { return j_; }
  RandomStream& rng() { return rng_; }

  void set_baseline(std::uint64_t policy_index) {
    baseline_index_ = policy_index;
    baseline_ = grid_->policy_from_index(policy_index);
    behavior_ = perturb(baseline_, params_.rho);
  }

  /// Draws this stage's action from the exploration mixture
  /// (1 - rho) * baseline + rho * uniform, using the agent's own stream.
  int sample_behavior_action(int state) {
    return rng_.sample(behavior_.row(state));
  }

  /// Feeds one observation into both estimate tables.
  void observe(const StageObservation& obs) {
    const double beta = game_->discount(player_);
    q_update(q_, obs, beta, params_.alpha);
    j_update(j_, obs, beta, params_.alpha);
  }

  bool satisfied() const {
    return satisfaction_test(j_, q_, params_.eps, params_.delta);
  }

  /// End-of-phase revision: a satisfied agent keeps its baseline; an
  /// unsatisfied one draws a fresh uniform grid policy with probability e
  /// and otherwise takes the learned revision step. Returns the (possibly
  /// unchanged) baseline index. Draw order per unsatisfied agent: one
  /// uniform double for the branch, then one index draw if uniform.
  std::uint64_t revise(bool satisfied_now) {
    if (satisfied_now) return baseline_index_;
    std::uint64_t next;
    if (rng_.uniform() < params_.e) {
      next = grid_->uniform_policy_draw(rng_);
    } else {
      next = independent_update_rule(baseline_, q_, params_.eta, *grid_,
                                     params_.objective);
    }
    set_baseline(next);
    return next;
  }

  /// Resets between phases: estimates are clamped into their boxes and the
  /// within-phase visit counts return to zero (so step sizes restart).
  void reset_estimates() {
    for (double& v : q_.q) v = std::clamp(v, params_.q_box_lo, params_.q_box_hi);
    for (double& v : j_.j) v = std::clamp(v, params_.j_box_lo, params_.j_box_hi);
    std::fill(q_.visits.begin(), q_.visits.end(), 0L);
    std::fill(j_.visits.begin(), j_.visits.end(), 0L);
  }

 private:
  const ValidatedGame* game_;
  const QuantizedPolicySet* grid_;
  int player_;
  LearnerParams params_;
  RandomStream rng_;
  std::uint64_t baseline_index_ = 0;
  StationaryPolicy baseline_;
  StationaryPolicy behavior_;
  QTable q_;
  JTable j_;
};

}  // namespace symga
