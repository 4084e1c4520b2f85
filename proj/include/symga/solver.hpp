#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "symga/errors.hpp"
#include "symga/game.hpp"
#include "symga/policy.hpp"
#include "symga/quantizer.hpp"

namespace symga {

/// The single-agent problem player i faces when everyone else freezes their
/// (possibly randomized) policies: opponents are averaged into the cost and
/// transition tables.
struct InducedMDP {
  int num_states = 0;
  int num_actions = 0;
  double discount = 0.0;
  std::vector<double> cost;    // [state][action]
  std::vector<double> kernel;  // [state][action][next]

  double c(int x, int u) const {
    return cost[static_cast<std::size_t>(x) * num_actions + u];
  }
  std::span<const double> row(int x, int u) const {
    return {kernel.data() +
                (static_cast<std::size_t>(x) * num_actions + u) * num_states,
            static_cast<std::size_t>(num_states)};
  }
};

/// State-action values for an induced MDP.
struct QFunction {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> q;  // [state][action]

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
  /// Lowest-index minimizing action.
  int argmin_at(int x) const {
    auto r = row(x);
    return static_cast<int>(std::min_element(r.begin(), r.end()) - r.begin());
  }
  /// Lowest-index maximizing action.
  int argmax_at(int x) const {
    auto r = row(x);
    return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
};

/// Averages the other players' policies into player i's stage cost and
/// transition kernel:
///   P_i(x'|x,u) = sum over opponent actions of prod_j pi_j(a_j|x) P(x'|x,a)
///   c_i(x,u)    = the same average of the stage cost.
/// The `joint` argument carries one policy per player; player i's own entry
/// is ignored. A single-player game induces itself.
inline InducedMDP induce_mdp(const ValidatedGame& g, int player,
                             const JointPolicy& joint) {
  const int N = g.num_players();
  if (joint.num_players() != N)
    throw ShapeMismatch("induce_mdp joint policy has wrong player count");
  const int X = g.num_states();
  const int U = g.num_actions(player);

  InducedMDP mdp;
  mdp.num_states = X;
  mdp.num_actions = U;
  mdp.discount = g.discount(player);
  mdp.cost.assign(static_cast<std::size_t>(X) * U, 0.0);
  mdp.kernel.assign(static_cast<std::size_t>(X) * U * X, 0.0);

  for (int x = 0; x < X; ++x) {
    for (int ja = 0; ja < g.num_joint_actions(); ++ja) {
      auto a = g.decode_action(ja);
      double w = 1.0;
      for (int j = 0; j < N; ++j)
        if (j != player) w *= joint[j].prob(x, a[j]);
      if (w == 0.0) continue;
      const int u = a[player];
      const std::size_t cu = static_cast<std::size_t>(x) * U + u;
      mdp.cost[cu] += w * g.cost(player, x, ja);
      auto row = g.kernel(x, ja);
      double* out = mdp.kernel.data() + cu * X;
      for (int xn = 0; xn < X; ++xn) out[xn] += w * row[xn];
    }
  }
  return mdp;
}

/// Optimal state-action values of an induced MDP by value iteration.
/// Iterates Q <- c + beta * P min_a Q until the successive sup-norm change
/// drops to tol * (1 - beta) / (2 beta), which guarantees a final error
/// ||Q - Q*||_inf <= tol; a zero discount needs exactly one sweep.
inline QFunction solve_q_star(const InducedMDP& mdp, double tol = 1e-10) {
  const int X = mdp.num_states;
  const int U = mdp.num_actions;
  const double beta = mdp.discount;

  QFunction qf;
  qf.num_states = X;
  qf.num_actions = U;
  qf.q.assign(static_cast<std::size_t>(X) * U, 0.0);

  if (beta == 0.0) {
    qf.q = mdp.cost;
    return qf;
  }

  const double stop = tol * (1.0 - beta) / (2.0 * beta);
  std::vector<double> min_q(X, 0.0);
  std::vector<double> next(qf.q.size());
  for (long sweep = 0; sweep < 100000000L; ++sweep) {
    for (int x = 0; x < X; ++x) min_q[x] = qf.min_at(x);
    double change = 0.0;
    for (int x = 0; x < X; ++x) {
      for (int u = 0; u < U; ++u) {
        auto row = mdp.row(x, u);
        double v = 0.0;
        for (int xn = 0; xn < X; ++xn) v += row[xn] * min_q[xn];
        const std::size_t k = static_cast<std::size_t>(x) * U + u;
        next[k] = mdp.c(x, u) + beta * v;
        change = std::max(change, std::abs(next[k] - qf.q[k]));
      }
    }
    qf.q.swap(next);
    if (change <= stop) return qf;
  }
  throw Error("value iteration did not converge");
}

/// Sup norm of the Bellman optimality residual of q on the given MDP;
/// zero exactly at Q*. Test utility.
inline double bellman_residual(const InducedMDP& mdp, const QFunction& qf) {
  double r = 0.0;
  for (int x = 0; x < mdp.num_states; ++x) {
    for (int u = 0; u < mdp.num_actions; ++u) {
      auto row = mdp.row(x, u);
      double v = 0.0;
      for (int xn = 0; xn < mdp.num_states; ++xn) v += row[xn] * qf.min_at(xn);
      r = std::max(r, std::abs(qf.at(x, u) - (mdp.c(x, u) + mdp.discount * v)));
    }
  }
  return r;
}

namespace detail {

/// Joint state transition matrix M[x][xn] and per-player expected stage
/// costs r_i[x] under a fixed joint policy.
struct PolicyAverages {
  std::vector<double> transition;  // X * X
  std::vector<double> stage_cost;  // N * X
};

inline PolicyAverages average_under_policy(const ValidatedGame& g,
                                           const JointPolicy& joint) {
  const int N = g.num_players();
  const int X = g.num_states();
  if (joint.num_players() != N)
    throw ShapeMismatch("policy evaluation joint policy has wrong player count");
  PolicyAverages out;
  out.transition.assign(static_cast<std::size_t>(X) * X, 0.0);
  out.stage_cost.assign(static_cast<std::size_t>(N) * X, 0.0);
  for (int x = 0; x < X; ++x) {
    for (int ja = 0; ja < g.num_joint_actions(); ++ja) {
      auto a = g.decode_action(ja);
      double w = 1.0;
      for (int j = 0; j < N; ++j) w *= joint[j].prob(x, a[j]);
      if (w == 0.0) continue;
      auto row = g.kernel(x, ja);
      for (int xn = 0; xn < X; ++xn)
        out.transition[static_cast<std::size_t>(x) * X + xn] += w * row[xn];
      for (int i = 0; i < N; ++i)
        out.stage_cost[static_cast<std::size_t>(i) * X + x] +=
            w * g.cost(i, x, ja);
    }
  }
  return out;
}

}  // namespace detail

/// How many states the direct linear solve is used for; larger systems fall
/// back to iterative evaluation.
inline constexpr int kDirectSolveMaxStates = 1000;

/// Discounted cost of the joint policy for every player at once:
/// J_i = (I - beta_i M)^{-1} r_i with M the policy-averaged transition
/// matrix. Uses one LU factorization per distinct discount when the state
/// space is small (<= 1000 states), otherwise fixed-point iteration to
/// accuracy tol. Returns one value vector per player.
inline std::vector<std::vector<double>> evaluate_policy_all(
    const ValidatedGame& g, const JointPolicy& joint, double tol = 1e-10) {
  const int N = g.num_players();
  const int X = g.num_states();
  const auto avg = detail::average_under_policy(g, joint);

  std::vector<std::vector<double>> J(N, std::vector<double>(X, 0.0));
  for (int i = 0; i < N; ++i) {
    const double beta = g.discount(i);
    const double* r = avg.stage_cost.data() + static_cast<std::size_t>(i) * X;
    if (beta == 0.0) {
      std::copy(r, r + X, J[i].begin());
      continue;
    }
    if (X <= kDirectSolveMaxStates) {
      Eigen::MatrixXd A = Eigen::MatrixXd::Identity(X, X);
      for (int x = 0; x < X; ++x)
        for (int xn = 0; xn < X; ++xn)
          A(x, xn) -= beta * avg.transition[static_cast<std::size_t>(x) * X + xn];
      Eigen::VectorXd b(X);
      for (int x = 0; x < X; ++x) b(x) = r[x];
      Eigen::VectorXd sol = A.partialPivLu().solve(b);
      for (int x = 0; x < X; ++x) J[i][x] = sol(x);
    } else {
      // J <- r + beta M J; stop when the step implies ||J - J*|| <= tol.
      std::vector<double> cur(X, 0.0), nxt(X);
      const double stop = tol * (1.0 - beta) / beta;
      for (long sweep = 0; sweep < 100000000L; ++sweep) {
        double change = 0.0;
        for (int x = 0; x < X; ++x) {
          double v = 0.0;
          const double* m = avg.transition.data() + static_cast<std::size_t>(x) * X;
          for (int xn = 0; xn < X; ++xn) v += m[xn] * cur[xn];
          nxt[x] = r[x] + beta * v;
          change = std::max(change, std::abs(nxt[x] - cur[x]));
        }
        cur.swap(nxt);
        if (change <= stop) break;
      }
      J[i] = cur;
    }
  }
  return J;
}

/// Discounted cost vector of one player under a fixed joint policy.
inline std::vector<double> evaluate_policy(const ValidatedGame& g,
                                           const JointPolicy& joint,
                                           int player, double tol = 1e-10) {
  return evaluate_policy_all(g, joint, tol)[player];
}

/// Iterative-only evaluation (test utility for the dual-route check).
inline std::vector<double> evaluate_policy_iterative(const ValidatedGame& g,
                                                     const JointPolicy& joint,
                                                     int player,
                                                     double tol = 1e-10) {
  const int X = g.num_states();
  const auto avg = detail::average_under_policy(g, joint);
  const double beta = g.discount(player);
  const double* r =
      avg.stage_cost.data() + static_cast<std::size_t>(player) * X;
  std::vector<double> cur(X, 0.0), nxt(X);
  if (beta == 0.0) {
    std::copy(r, r + X, cur.begin());
    return cur;
  }
  const double stop = tol * (1.0 - beta) / beta;
  for (long sweep = 0; sweep < 100000000L; ++sweep) {
    double change = 0.0;
    for (int x = 0; x < X; ++x) {
      double v = 0.0;
      const double* m = avg.transition.data() + static_cast<std::size_t>(x) * X;
      for (int xn = 0; xn < X; ++xn) v += m[xn] * cur[xn];
      nxt[x] = r[x] + beta * v;
      change = std::max(change, std::abs(nxt[x] - cur[x]));
    }
    cur.swap(nxt);
    if (change <= stop) return cur;
  }
  throw Error("policy evaluation did not converge");
}

/// How threshold comparisons treat the numerical slack band.
///   Lenient: values inside the band pass (stable default for scans whose
///            thresholds sit exactly on grid-representable gaps).
///   Strict:  values inside the band are refused with IndeterminateMargin,
///            so a true/false answer is a certificate.
enum class MarginMode { Lenient, Strict };

/// value <= threshold, resolved under the given margin mode with slack.
inline bool margin_leq(double value, double threshold, double slack,
                       MarginMode mode) {
  if (mode == MarginMode::Lenient) return value <= threshold + slack;
  if (value <= threshold - slack) return true;
  if (value >= threshold + slack) return false;
  throw IndeterminateMargin(value, threshold, slack);
}

/// Per-state suboptimality of player i's policy against the others:
/// J_i(x) - min_u Q*_i(x, u), where Q* is optimal against the frozen
/// opponents. Nonpositive entries (up to solver accuracy) mean the state is
/// already best-responded.
inline std::vector<double> suboptimality_gaps(const ValidatedGame& g,
                                              int player,
                                              const JointPolicy& joint,
                                              double tol = 1e-10) {
  const auto J = evaluate_policy(g, joint, player, tol);
  const auto q = solve_q_star(induce_mdp(g, player, joint), tol);
  std::vector<double> gap(g.num_states());
  for (int x = 0; x < g.num_states(); ++x) gap[x] = J[x] - q.min_at(x);
  return gap;
}

/// Is player i's policy an eps-best response to the others' policies?
/// Equivalent formulation through the induced MDP: for every state,
/// J_i(x) <= min_u Q*_i(x, u) + eps. Both values carry error at most tol,
/// so comparisons use slack 2 * tol under the chosen margin mode.
inline bool is_eps_best_response(const ValidatedGame& g, int player,
                                 const JointPolicy& joint, double eps,
                                 double tol = 1e-10,
                                 MarginMode mode = MarginMode::Lenient) {
  if (eps < 0.0) throw RangeError("eps", "must be nonnegative");
  const auto gaps = suboptimality_gaps(g, player, joint, tol);
  const double worst = *std::max_element(gaps.begin(), gaps.end());
  return margin_leq(worst, eps, 2.0 * tol, mode);
}

/// True when every player is an eps-best response to the rest.
inline bool is_eps_equilibrium(const ValidatedGame& g, const JointPolicy& joint,
                               double eps, double tol = 1e-10,
                               MarginMode mode = MarginMode::Lenient) {
  for (int i = 0; i < g.num_players(); ++i)
    if (!is_eps_best_response(g, i, joint, eps, tol, mode)) return false;
  return true;
}

/// Exact satisfaction data for every joint policy on a shared quantized
/// grid. Precomputes, per player, the optimal values against every opponent
/// profile and the evaluation of every joint policy, so satisfaction,
/// equilibrium membership, gap profiles and oracle update rules become table
/// lookups. Joint policies are indexed row-major in player order (player 0
/// most significant digit); an opponent profile drops player i's digit.
class EquilibriumOracle {
 public:
  EquilibriumOracle(const ValidatedGame& game, const QuantizedPolicySet& grid,
                    double tol = 1e-10,
                    std::uint64_t cap = kDefaultEnumerationCap)
      : game_(&game), grid_(&grid), tol_(tol) {
    const int N = game.num_players();
    for (int i = 0; i < N; ++i)
      if (game.num_actions(i) != grid.num_actions())
        throw ShapeMismatch("grid action count does not match the game");
    if (grid.num_states() != game.num_states())
      throw ShapeMismatch("grid state count does not match the game");

    per_player_ = grid.num_policies(cap);
    const double joints_approx = std::pow(double(per_player_), N);
    if (joints_approx > double(cap))
      throw CombinatorialBlowup("joint policy grid", joints_approx, cap);
    joints_ = 1;
    profiles_ = 1;
    for (int i = 0; i < N; ++i) joints_ *= per_player_;
    for (int i = 0; i < N - 1; ++i) profiles_ *= per_player_;

    const int X = game.num_states();
    const double table = double(joints_) * N * X;
    if (table > 4e7)
      throw CombinatorialBlowup("satisfaction table", table, 40000000);

    // Materialize every per-player policy once.
    policies_.reserve(per_player_);
    for (std::uint64_t p = 0; p < per_player_; ++p)
      policies_.push_back(grid.policy_from_index(p));

    // Optimal values per (player, opponent profile).
    min_q_.assign(static_cast<std::size_t>(N) * profiles_ * X, 0.0);
    greedy_min_.assign(min_q_.size(), 0);
    greedy_max_.assign(min_q_.size(), 0);
    JointPolicy scratch;
    scratch.players.assign(N, policies_[0]);
    std::vector<std::uint64_t> digits(N > 1 ? N - 1 : 0);
    for (int i = 0; i < N; ++i) {
      for (std::uint64_t prof = 0; prof < profiles_; ++prof) {
        decode_profile(prof, digits);
        int pos = 0;
        for (int j = 0; j < N; ++j)
          if (j != i) scratch.players[j] = policies_[digits[pos++]];
        const auto q = solve_q_star(induce_mdp(game, i, scratch), tol_);
        for (int x = 0; x < X; ++x) {
          const std::size_t k =
              (static_cast<std::size_t>(i) * profiles_ + prof) * X + x;
          min_q_[k] = q.min_at(x);
          greedy_min_[k] = q.argmin_at(x);
          greedy_max_[k] = q.argmax_at(x);
        }
      }
    }

    // Evaluations per joint policy, stored as per-state suboptimality.
    subopt_.assign(static_cast<std::size_t>(joints_) * N * X, 0.0);
    std::vector<std::uint64_t> jd(N);
    for (std::uint64_t joint = 0; joint < joints_; ++joint) {
      decode(joint, jd);
      for (int j = 0; j < N; ++j) scratch.players[j] = policies_[jd[j]];
      const auto J = evaluate_policy_all(game, scratch, tol_);
      for (int i = 0; i < N; ++i) {
        const std::uint64_t prof = opponent_profile(joint, i);
        for (int x = 0; x < X; ++x) {
          subopt_[(static_cast<std::size_t>(joint) * N + i) * X + x] =
              J[i][x] -
              min_q_[(static_cast<std::size_t>(i) * profiles_ + prof) * X + x];
        }
      }
    }
  }

  const ValidatedGame& game() const { return *game_; }
  const QuantizedPolicySet& grid() const { return *grid_; }
  double tol() const { return tol_; }
  std::uint64_t per_player_policies() const { return per_player_; }
  std::uint64_t num_joints() const { return joints_; }
  std::uint64_t num_profiles() const { return profiles_; }
  const StationaryPolicy& policy(std::uint64_t per_player_idx) const {
    return policies_[per_player_idx];
  }

  std::uint64_t encode(std::span<const std::uint64_t> per_player) const {
    std::uint64_t joint = 0;
    for (int i = 0; i < game_->num_players(); ++i)
      joint = joint * per_player_ + per_player[i];
    return joint;
  }

  void decode(std::uint64_t joint, std::vector<std::uint64_t>& out) const {
    const int N = game_->num_players();
    out.resize(N);
    for (int i = N - 1; i >= 0; --i) {
      out[i] = joint % per_player_;
      joint /= per_player_;
    }
  }

  std::vector<std::uint64_t> decode(std::uint64_t joint) const {
    std::vector<std::uint64_t> out;
    decode(joint, out);
    return out;
  }

  /// Profile index of everyone but player i, preserving player order.
  std::uint64_t opponent_profile(std::uint64_t joint, int player) const {
    const int N = game_->num_players();
    std::uint64_t prof = 0;
    // Walk digits from most significant (player 0) to least.
    std::uint64_t scale = 1;
    for (int i = 0; i < N - 1; ++i) scale *= per_player_;
    std::uint64_t rem = joint;
    for (int i = 0; i < N; ++i) {
      const std::uint64_t digit = rem / scale;
      rem %= scale;
      if (scale > 1) scale /= per_player_;
      if (i != player) prof = prof * per_player_ + digit;
    }
    return prof;
  }

  double suboptimality(int player, std::uint64_t joint, int x) const {
    return subopt_[(static_cast<std::size_t>(joint) * game_->num_players() +
                    player) * game_->num_states() + x];
  }

  /// Worst-state suboptimality of player i at this joint policy.
  double gap(int player, std::uint64_t joint) const {
    double g = -std::numeric_limits<double>::infinity();
    for (int x = 0; x < game_->num_states(); ++x)
      g = std::max(g, suboptimality(player, joint, x));
    return g;
  }

  bool satisfied(int player, std::uint64_t joint, double eps,
                 MarginMode mode = MarginMode::Lenient) const {
    return margin_leq(gap(player, joint), eps, 2.0 * tol_, mode);
  }

  bool is_equilibrium(std::uint64_t joint, double eps,
                      MarginMode mode = MarginMode::Lenient) const {
    for (int i = 0; i < game_->num_players(); ++i)
      if (!satisfied(i, joint, eps, mode)) return false;
    return true;
  }

  std::vector<std::uint64_t> equilibria(
      double eps, MarginMode mode = MarginMode::Lenient) const {
    std::vector<std::uint64_t> out;
    for (std::uint64_t joint = 0; joint < joints_; ++joint)
      if (is_equilibrium(joint, eps, mode)) out.push_back(joint);
    return out;
  }

  double min_q(int player, std::uint64_t profile, int x) const {
    return min_q_[(static_cast<std::size_t>(player) * profiles_ + profile) *
                      game_->num_states() + x];
  }

  /// Lowest-index optimal action of the induced MDP against this profile.
  int greedy_action(int player, std::uint64_t profile, int x,
                    bool maximize = false) const {
    const std::size_t k =
        (static_cast<std::size_t>(player) * profiles_ + profile) *
            game_->num_states() + x;
    return maximize ? greedy_max_[k] : greedy_min_[k];
  }

 private:
  void decode_profile(std::uint64_t prof, std::vector<std::uint64_t>& out) const {
    const int count = game_->num_players() - 1;
    out.resize(count);
    for (int i = count - 1; i >= 0; --i) {
      out[i] = prof % per_player_;
      prof /= per_player_;
    }
  }

  const ValidatedGame* game_;
  const QuantizedPolicySet* grid_;
  double tol_;
  std::uint64_t per_player_ = 0;
  std::uint64_t joints_ = 0;
  std::uint64_t profiles_ = 0;
  std::vector<StationaryPolicy> policies_;
  std::vector<double> min_q_;     // [player][profile][state]
  std::vector<int> greedy_min_;   // same layout
  std::vector<int> greedy_max_;
  std::vector<double> subopt_;    // [joint][player][state]
};

/// Every eps-equilibrium on the joint grid, as joint indices in enumeration
/// order. Throws CombinatorialBlowup when the joint grid exceeds the cap.
inline std::vector<std::uint64_t> find_quantized_equilibria(
    const ValidatedGame& game, const QuantizedPolicySet& grid, double eps,
    double tol = 1e-10, std::uint64_t cap = kDefaultEnumerationCap) {
  EquilibriumOracle oracle(game, grid, tol, cap);
  return oracle.equilibria(eps);
}

/// Minimum positive distance between eps and any achievable per-state gap on
/// the grid, plus the full sorted profile of those distances.
struct BarDeltaResult {
  double bar_delta = 0.0;
  std::vector<double> profile;  // every |eps - gap| value, ascending
};

/// Scans every (player, joint policy, state) triple on the grid, collects
/// the distances |eps - (J_i(x) - min_u Q*_i(x,u))| and returns the smallest
/// one that is not numerically zero (values at or below 10 * tol count as
/// zero). Throws AllGapsZero when no positive distance remains.
inline BarDeltaResult compute_bar_delta(const ValidatedGame& game,
                                        const QuantizedPolicySet& grid,
                                        double eps, double tol = 1e-10,
                                        std::uint64_t cap = kDefaultEnumerationCap) {
  EquilibriumOracle oracle(game, grid, tol, cap);
  BarDeltaResult out;
  out.profile.reserve(oracle.num_joints() * game.num_players() *
                      game.num_states());
  double best = std::numeric_limits<double>::infinity();
  for (std::uint64_t joint = 0; joint < oracle.num_joints(); ++joint) {
    for (int i = 0; i < game.num_players(); ++i) {
      for (int x = 0; x < game.num_states(); ++x) {
        const double v = std::abs(eps - oracle.suboptimality(i, joint, x));
        out.profile.push_back(v);
        if (v > 10.0 * tol) best = std::min(best, v);
      }
    }
  }
  std::sort(out.profile.begin(), out.profile.end());
  if (!std::isfinite(best))
    throw AllGapsZero("every |eps - gap| value is numerically zero");
  out.bar_delta = best;
  return out;
}

/// Outcome of the perturbation bound check, with diagnostics.
struct RhoBoundsReport {
  bool passes = false;
  double threshold = 0.0;    // half the smallest delta margin
  double worst_q_gap = 0.0;  // max ||Q* - Q*_perturbed||_inf over players, grid
  double worst_j_gap = 0.0;  // max |J - J_perturbed| over players, grid, states
};

/// Checks that the per-player perturbation weights are small enough for the
/// satisfaction margins: for every player i and every joint grid policy pi,
///   || Q*_{pi_{-i}} - Q*_{perturbed pi_{-i}} ||_inf  and
///   max_x | J_i(pi) - J_i(perturbed pi) |
/// must both stay strictly below 0.5 * min_j { delta_j, bar_delta - delta_j }.
/// Each delta_j must lie strictly inside (0, bar_delta).
inline RhoBoundsReport verify_rho_bounds(
    const ValidatedGame& game, const QuantizedPolicySet& grid,
    std::span<const double> rhos, std::span<const double> deltas,
    double bar_delta, double tol = 1e-10,
    std::uint64_t cap = kDefaultEnumerationCap) {
  const int N = game.num_players();
  if (static_cast<int>(rhos.size()) != N ||
      static_cast<int>(deltas.size()) != N)
    throw ShapeMismatch("verify_rho_bounds needs one rho and delta per player");
  RhoBoundsReport report;
  report.threshold = std::numeric_limits<double>::infinity();
  for (int j = 0; j < N; ++j) {
    if (!(deltas[j] > 0.0 && deltas[j] < bar_delta))
      throw RangeError("delta", "each delta must lie strictly in (0, bar_delta)");
    report.threshold =
        std::min(report.threshold,
                 0.5 * std::min(deltas[j], bar_delta - deltas[j]));
  }

  const std::uint64_t per = grid.num_policies(cap);
  const double joints_approx = std::pow(double(per), N);
  if (joints_approx > double(cap))
    throw CombinatorialBlowup("joint policy grid", joints_approx, cap);
  std::uint64_t joints = 1, profiles = 1;
  for (int i = 0; i < N; ++i) joints *= per;
  for (int i = 0; i < N - 1; ++i) profiles *= per;

  std::vector<StationaryPolicy> plain(per), pert_by_player;
  for (std::uint64_t p = 0; p < per; ++p) plain[p] = grid.policy_from_index(p);
  // Perturbed copies, one table per player (rho may differ across players).
  std::vector<std::vector<StationaryPolicy>> perturbed(N);
  for (int j = 0; j < N; ++j) {
    perturbed[j].resize(per);
    for (std::uint64_t p = 0; p < per; ++p)
      perturbed[j][p] = perturb(plain[p], rhos[j]);
  }

  const int X = game.num_states();
  JointPolicy scratch;
  scratch.players.assign(N, plain[0]);
  std::vector<std::uint64_t> digits(N > 1 ? N - 1 : 0);

  // Optimal-value displacement per opponent profile.
  for (int i = 0; i < N; ++i) {
    for (std::uint64_t prof = 0; prof < profiles; ++prof) {
      std::uint64_t rem = prof;
      for (int d = N - 2; d >= 0; --d) {
        digits[d] = rem % per;
        rem /= per;
      }
      int pos = 0;
      for (int j = 0; j < N; ++j)
        if (j != i) scratch.players[j] = plain[digits[pos++]];
      const auto q_plain = solve_q_star(induce_mdp(game, i, scratch), tol);
      pos = 0;
      for (int j = 0; j < N; ++j)
        if (j != i) scratch.players[j] = perturbed[j][digits[pos++]];
      const auto q_pert = solve_q_star(induce_mdp(game, i, scratch), tol);
      for (std::size_t k = 0; k < q_plain.q.size(); ++k)
        report.worst_q_gap = std::max(
            report.worst_q_gap, std::abs(q_plain.q[k] - q_pert.q[k]));
    }
  }

  // Evaluation displacement per joint policy (every player perturbed).
  std::vector<std::uint64_t> jd(N);
  JointPolicy scratch_pert = scratch;
  for (std::uint64_t joint = 0; joint < joints; ++joint) {
    std::uint64_t rem = joint;
    for (int d = N - 1; d >= 0; --d) {
      jd[d] = rem % per;
      rem /= per;
    }
    for (int j = 0; j < N; ++j) {
      scratch.players[j] = plain[jd[j]];
      scratch_pert.players[j] = perturbed[j][jd[j]];
    }
    const auto J_plain = evaluate_policy_all(game, scratch, tol);
    const auto J_pert = evaluate_policy_all(game, scratch_pert, tol);
    for (int i = 0; i < N; ++i)
      for (int x = 0; x < X; ++x)
        report.worst_j_gap = std::max(
            report.worst_j_gap, std::abs(J_plain[i][x] - J_pert[i][x]));
  }

  report.passes = report.worst_q_gap < report.threshold &&
                  report.worst_j_gap < report.threshold;
  return report;
}

/// Halving search for an admissible shared perturbation weight: tries
/// rho0, rho0/2, rho0/4, ... and returns the first value that passes
/// verify_rho_bounds, or nullopt after max_halvings attempts.
inline std::optional<double> find_admissible_rho(
    const ValidatedGame& game, const QuantizedPolicySet& grid,
    std::span<const double> deltas, double bar_delta, double tol = 1e-10,
    double rho0 = 0.5, int max_halvings = 20,
    std::uint64_t cap = kDefaultEnumerationCap) {
  double rho = rho0;
  for (int k = 0; k <= max_halvings; ++k, rho *= 0.5) {
    std::vector<double> rhos(game.num_players(), rho);
    if (verify_rho_bounds(game, grid, rhos, deltas, bar_delta, tol, cap).passes)
      return rho;
  }
  return std::nullopt;
}

}  // namespace symga
