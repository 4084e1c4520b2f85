#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "symga/errors.hpp"
#include "symga/rng.hpp"

namespace symga {

/// Raw description of a finite discounted N-player stochastic game, as read
/// from a file or built in code. Costs are minimized. Layout conventions:
///   cost[player][state][joint_action]      (flattened, row-major)
///   kernel[state][joint_action][next]      (flattened, row-major)
/// A joint action is indexed row-major in player order: player 0 is the most
/// significant digit, so index = ((a0 * |U1| + a1) * |U2| + a2) ...
struct GameSpec {
  int num_players = 0;
  int num_states = 0;
  std::vector<int> num_actions;   // per player
  std::vector<double> discount;   // per player, each in [0, 1)
  std::vector<double> cost;       // num_players * num_states * num_joint
  std::vector<double> kernel;     // num_states * num_joint * num_states
  std::vector<double> initial_dist;  // num_states entries
};

/// Tolerance for "rows sum to one" checks on kernels and distributions.
inline constexpr double kStochasticTol = 1e-12;

/// A game whose invariants have been checked once at construction. All
/// solver and simulation code takes this type, so shape and stochasticity
/// can be assumed everywhere downstream.
class ValidatedGame {
 public:
  /// Validates and wraps a GameSpec. Throws ValidationError subclasses on
  /// any structural defect (see validate_game for the catalogue).
  explicit ValidatedGame(GameSpec spec) : spec_(std::move(spec)) {
    if (spec_.num_players < 1) throw EmptyStateOrActionSet("num_players");
    if (spec_.num_states < 1) throw EmptyStateOrActionSet("num_states");
    if (static_cast<int>(spec_.num_actions.size()) != spec_.num_players)
      throw ShapeMismatch("num_actions must list one entry per player");
    for (int n : spec_.num_actions)
      if (n < 1) throw EmptyStateOrActionSet("num_actions");
    if (static_cast<int>(spec_.discount.size()) != spec_.num_players)
      throw ShapeMismatch("discount must list one entry per player");
    for (double b : spec_.discount) {
      if (!(b >= 0.0 && b < 1.0))
        throw RangeError("discount", "each discount must lie in [0, 1)");
    }

    num_joint_ = 1;
    double joint_count = 1.0;
    for (int n : spec_.num_actions) {
      joint_count *= n;
      if (joint_count > 5e7)
        throw CombinatorialBlowup("joint action set", joint_count, 50000000);
      num_joint_ *= n;
    }

    const std::size_t want_cost = static_cast<std::size_t>(spec_.num_players) *
                                  spec_.num_states * num_joint_;
    if (spec_.cost.size() != want_cost)
      throw ShapeMismatch("cost table has " + std::to_string(spec_.cost.size()) +
                          " entries, expected " + std::to_string(want_cost));
    const std::size_t want_kernel = static_cast<std::size_t>(spec_.num_states) *
                                    num_joint_ * spec_.num_states;
    if (spec_.kernel.size() != want_kernel)
      throw ShapeMismatch("kernel has " + std::to_string(spec_.kernel.size()) +
                          " entries, expected " + std::to_string(want_kernel));
    if (spec_.initial_dist.size() != static_cast<std::size_t>(spec_.num_states))
      throw ShapeMismatch("initial_dist must have one entry per state");

    for (double c : spec_.cost)
      if (!std::isfinite(c)) throw NonFiniteValue("cost table");

    for (int x = 0; x < spec_.num_states; ++x) {
      for (int ja = 0; ja < num_joint_; ++ja) {
        double sum = 0.0;
        for (int xn = 0; xn < spec_.num_states; ++xn) {
          const double p = kernel(x, ja)[xn];
          if (!std::isfinite(p)) throw NonFiniteValue("kernel");
          if (p < 0.0) throw NegativeProbability("kernel", p);
          sum += p;
        }
        if (std::abs(sum - 1.0) > kStochasticTol)
          throw KernelRowNotStochastic(x, ja, sum);
      }
    }
    double init_sum = 0.0;
    for (double p : spec_.initial_dist) {
      if (!std::isfinite(p)) throw NonFiniteValue("initial_dist");
      if (p < 0.0) throw NegativeProbability("initial_dist", p);
      init_sum += p;
    }
    if (std::abs(init_sum - 1.0) > kStochasticTol)
      throw ValidationError("initial_dist sums to " + std::to_string(init_sum));

    // Cached per-player cost bound and the induced bound on values:
    // |J| <= c_max / (1 - beta), used for estimate clamping boxes.
    c_max_.assign(spec_.num_players, 0.0);
    for (int i = 0; i < spec_.num_players; ++i) {
      double m = 0.0;
      for (int x = 0; x < spec_.num_states; ++x)
        for (int ja = 0; ja < num_joint_; ++ja)
          m = std::max(m, std::abs(cost(i, x, ja)));
      c_max_[i] = m;
    }

    // Decode table: joint action index -> per-player action indices.
    decoded_.assign(static_cast<std::size_t>(num_joint_) * spec_.num_players, 0);
    for (int ja = 0; ja < num_joint_; ++ja) {
      int rem = ja;
      for (int i = spec_.num_players - 1; i >= 0; --i) {
        decoded_[static_cast<std::size_t>(ja) * spec_.num_players + i] =
            rem % spec_.num_actions[i];
        rem /= spec_.num_actions[i];
      }
    }
  }

  int num_players() const { return spec_.num_players; }
  int num_states() const { return spec_.num_states; }
  int num_actions(int player) const { return spec_.num_actions[player]; }
  const std::vector<int>& action_counts() const { return spec_.num_actions; }
  int num_joint_actions() const { return num_joint_; }
  double discount(int player) const { return spec_.discount[player]; }
  double c_max(int player) const { return c_max_[player]; }
  double c_max() const { return *std::max_element(c_max_.begin(), c_max_.end()); }
  /// Upper bound on any discounted value for this player.
  double value_bound(int player) const {
    return c_max_[player] / (1.0 - spec_.discount[player]);
  }
  std::span<const double> initial_dist() const { return spec_.initial_dist; }
  const GameSpec& spec() const { return spec_; }

  double cost(int player, int state, int joint_action) const {
    return spec_.cost[(static_cast<std::size_t>(player) * spec_.num_states +
                       state) * num_joint_ + joint_action];
  }

  std::span<const double> kernel(int state, int joint_action) const {
    return {spec_.kernel.data() +
                (static_cast<std::size_t>(state) * num_joint_ + joint_action) *
                    spec_.num_states,
            static_cast<std::size_t>(spec_.num_states)};
  }

  int encode_action(std::span<const int> actions) const {
    int ja = 0;
    for (int i = 0; i < spec_.num_players; ++i)
      ja = ja * spec_.num_actions[i] + actions[i];
    return ja;
  }

  std::span<const int> decode_action(int joint_action) const {
    return {decoded_.data() +
                static_cast<std::size_t>(joint_action) * spec_.num_players,
            static_cast<std::size_t>(spec_.num_players)};
  }

 private:
  GameSpec spec_;
  int num_joint_ = 0;
  std::vector<double> c_max_;
  std::vector<int> decoded_;
};

/// Checks every structural invariant of a game description and returns the
/// validated wrapper. Errors: EmptyStateOrActionSet, ShapeMismatch,
/// KernelRowNotStochastic (row sum off by more than 1e-12),
/// NegativeProbability, NonFiniteValue, RangeError (discount outside [0,1)).
inline ValidatedGame validate_game(GameSpec spec) {
  return ValidatedGame(std::move(spec));
}

/// Where and how a symmetry check failed.
struct SymmetryWitness {
  std::string condition;        // "action_sets", "discounts", "cost", "kernel"
  int player_i = -1;            // transposed pair (i, j)
  int player_j = -1;
  int state = -1;
  std::vector<int> joint_action;  // per-player actions at the violation
  double lhs = 0.0;
  double rhs = 0.0;
};

struct SymmetryReport {
  bool is_symmetric = true;
  std::optional<SymmetryWitness> witness;
};

/// Decides whether the game is symmetric: identical action sets and
/// discounts, and for every transposition sigma = (i j) of players, every
/// state x and joint action a,
///   cost^k(x, sigma(a)) == cost^{sigma(k)}(x, a)   for every player k, and
///   kernel(. | x, a)    == kernel(. | x, sigma(a)).
/// Transpositions generate the full permutation group and the two conditions
/// compose, so checking all pairs (i, j) suffices. Comparisons use the given
/// absolute tolerance. On failure the report carries the first witness.
inline SymmetryReport check_symmetry(const ValidatedGame& g, double tol = 1e-9) {
  const int N = g.num_players();
  SymmetryReport report;

  for (int i = 1; i < N; ++i) {
    if (g.num_actions(i) != g.num_actions(0)) {
      report.is_symmetric = false;
      report.witness = SymmetryWitness{"action_sets", 0, i, -1, {},
                                       double(g.num_actions(0)),
                                       double(g.num_actions(i))};
      return report;
    }
    if (std::abs(g.discount(i) - g.discount(0)) > tol) {
      report.is_symmetric = false;
      report.witness = SymmetryWitness{"discounts", 0, i, -1, {},
                                       g.discount(0), g.discount(i)};
      return report;
    }
  }

  std::vector<int> swapped(N);
  for (int i = 0; i < N; ++i) {
    for (int j = i + 1; j < N; ++j) {
      for (int x = 0; x < g.num_states(); ++x) {
        for (int ja = 0; ja < g.num_joint_actions(); ++ja) {
          auto a = g.decode_action(ja);
          std::copy(a.begin(), a.end(), swapped.begin());
          std::swap(swapped[i], swapped[j]);
          const int ja_swapped = g.encode_action(swapped);

          // Cost condition for every player (bystanders included: their
          // cost must not change when two other players swap actions).
          for (int k = 0; k < N; ++k) {
            const int sigma_k = (k == i) ? j : (k == j) ? i : k;
            const double lhs = g.cost(k, x, ja_swapped);
            const double rhs = g.cost(sigma_k, x, ja);
            if (std::abs(lhs - rhs) > tol) {
              report.is_symmetric = false;
              report.witness = SymmetryWitness{
                  "cost", i, j, x, {a.begin(), a.end()}, lhs, rhs};
              return report;
            }
          }

          auto row = g.kernel(x, ja);
          auto row_swapped = g.kernel(x, ja_swapped);
          for (int xn = 0; xn < g.num_states(); ++xn) {
            if (std::abs(row[xn] - row_swapped[xn]) > tol) {
              report.is_symmetric = false;
              report.witness = SymmetryWitness{
                  "kernel", i, j, x, {a.begin(), a.end()},
                  row[xn], row_swapped[xn]};
              return report;
            }
          }
        }
      }
    }
  }
  return report;
}

/// True when every state can reach every other state through joint actions
/// with positive transition probability (strong connectivity of the support
/// graph). Checked by breadth-first search from every state.
inline bool check_reachability(const ValidatedGame& g) {
  const int X = g.num_states();
  // adjacency[x][xn] = 1 iff some joint action moves x to xn with prob > 0.
  std::vector<char> adj(static_cast<std::size_t>(X) * X, 0);
  for (int x = 0; x < X; ++x)
    for (int ja = 0; ja < g.num_joint_actions(); ++ja) {
      auto row = g.kernel(x, ja);
      for (int xn = 0; xn < X; ++xn)
        if (row[xn] > 0.0) adj[static_cast<std::size_t>(x) * X + xn] = 1;
    }

  std::vector<char> seen(X);
  std::vector<int> queue;
  for (int source = 0; source < X; ++source) {
    std::fill(seen.begin(), seen.end(), 0);
    queue.assign(1, source);
    seen[source] = 1;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int x = queue[head];
      for (int xn = 0; xn < X; ++xn)
        if (adj[static_cast<std::size_t>(x) * X + xn] && !seen[xn]) {
          seen[xn] = 1;
          queue.push_back(xn);
        }
    }
    if (std::count(seen.begin(), seen.end(), 1) != X) return false;
  }
  return true;
}

/// Draws the next state from the kernel row of (state, joint_action).
inline int sample_transition(RandomStream& rng, const ValidatedGame& g,
                             int state, int joint_action) {
  return rng.sample(g.kernel(state, joint_action));
}

/// One realized stage of play: everything the environment produced.
struct StageOutcome {
  int state = 0;
  std::vector<int> joint_action;
  std::vector<double> costs;  // per player
  int next_state = 0;
};

/// Executes one stage given the players' chosen actions: looks up costs and
/// samples the successor state.
inline StageOutcome simulate_stage(RandomStream& rng, const ValidatedGame& g,
                                   int state, std::vector<int> actions) {
  StageOutcome out;
  out.state = state;
  const int ja = g.encode_action(actions);
  out.joint_action = std::move(actions);
  out.costs.resize(g.num_players());
  for (int i = 0; i < g.num_players(); ++i) out.costs[i] = g.cost(i, state, ja);
  out.next_state = sample_transition(rng, g, state, ja);
  return out;
}

}  // namespace symga
