#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "symga/errors.hpp"
#include "symga/game.hpp"
#include "symga/learner.hpp"
#include "symga/policy.hpp"
#include "symga/quantizer.hpp"
#include "symga/rng.hpp"
#include "symga/solver.hpp"

namespace symga {

/// Everything a reproducible experiment run is configured with. The game is
/// supplied separately; per-player overrides fall back to shared values.
struct ExperimentConfig {
  int grid_m = 10;
  double eps = 0.2;
  int num_phases = 0;
  long phase_len = 1;               // constant schedule when the list is empty
  std::vector<long> phase_lengths;  // optional explicit per-phase lengths
  int num_trials = 1;
  std::uint64_t master_seed = 0;

  LearnerParams shared;                  // template for every player
  std::vector<double> rho_per_player;    // optional per-player overrides
  std::vector<double> delta_per_player;  // optional per-player overrides
  bool auto_delta = false;  // delta = bar_delta / 2, computed from the game

  int eval_stride = 1;  // check pi_k for equilibrium every stride phases; 0 = off
  std::uint64_t enumeration_cap = kDefaultEnumerationCap;
  int threads = 0;  // 0 = automatic; SYMGA_THREADS always caps

  long phase_length(int k) const {
    if (phase_lengths.empty()) return phase_len;
    if (k < 0 || k >= static_cast<int>(phase_lengths.size()))
      throw RangeError("phase_lengths", "no length for phase " + std::to_string(k));
    return phase_lengths[k];
  }

  void validate() const {
    if (grid_m < 1) throw RangeError("grid_m", "must be >= 1");
    if (eps < 0.0) throw RangeError("eps", "must be >= 0");
    if (num_phases < 0) throw RangeError("phases", "must be >= 0");
    if (num_trials < 1) throw RangeError("trials", "must be >= 1");
    if (phase_lengths.empty()) {
      if (phase_len < 1) throw RangeError("phase_len", "must be >= 1");
    } else {
      if (static_cast<int>(phase_lengths.size()) < num_phases)
        throw RangeError("phase_lengths", "fewer entries than phases");
      for (long t : phase_lengths)
        if (t < 1) throw RangeError("phase_lengths", "every length must be >= 1");
    }
    if (!(shared.rho >= 0.0 && shared.rho <= 1.0))
      throw RangeError("rho", "must lie in [0, 1]");
    if (!(shared.e >= 0.0 && shared.e <= 1.0))
      throw RangeError("e", "must lie in [0, 1]");
    if (!(shared.eta > 0.0)) throw RangeError("eta", "must be > 0");
    if (!auto_delta && shared.delta < 0.0)
      throw RangeError("delta", "must be >= 0 (or use auto_delta)");
    if (eval_stride < 0) throw RangeError("eval_stride", "must be >= 0");
    for (double r : rho_per_player)
      if (!(r >= 0.0 && r <= 1.0)) throw RangeError("rho", "must lie in [0, 1]");
    for (double d : delta_per_player)
      if (d < 0.0) throw RangeError("delta", "must be >= 0");
  }
};

/// Resolves the per-player learner parameters for a game: shared template,
/// per-player overrides, default clamping boxes from the game's value bound
/// and, when requested, delta = bar_delta / 2 computed on the grid.
inline std::vector<LearnerParams> resolve_learner_params(
    const ValidatedGame& game, const QuantizedPolicySet& grid,
    const ExperimentConfig& cfg) {
  if (!cfg.rho_per_player.empty() &&
      static_cast<int>(cfg.rho_per_player.size()) != game.num_players())
    throw ShapeMismatch("rho_per_player needs one entry per player");
  if (!cfg.delta_per_player.empty() &&
      static_cast<int>(cfg.delta_per_player.size()) != game.num_players())
    throw ShapeMismatch("delta_per_player needs one entry per player");

  double auto_delta_value = 0.0;
  if (cfg.auto_delta) {
    auto_delta_value =
        compute_bar_delta(game, grid, cfg.eps, 1e-10, cfg.enumeration_cap)
            .bar_delta / 2.0;
  }

  std::vector<LearnerParams> out;
  out.reserve(game.num_players());
  for (int i = 0; i < game.num_players(); ++i) {
    LearnerParams p = cfg.shared;
    p.eps = cfg.eps;
    if (!cfg.rho_per_player.empty()) p.rho = cfg.rho_per_player[i];
    if (cfg.auto_delta) p.delta = auto_delta_value;
    if (!cfg.delta_per_player.empty()) p.delta = cfg.delta_per_player[i];
    set_default_boxes(p, game, i);
    out.push_back(p);
  }
  return out;
}

/// Record of one learning phase: the baselines in force during the phase,
/// the end-of-phase satisfaction flags, the offline equilibrium flag for
/// those baselines (-1 when not evaluated) and the stage count.
struct PhaseLog {
  int phase = 0;
  std::vector<std::uint64_t> policies;  // per-player grid policy indices
  std::uint32_t satisfied_mask = 0;
  int is_equilibrium = -1;  // 1 / 0 / -1 = not evaluated
  long stages = 0;
};

struct TrialResult {
  int trial = 0;
  std::uint64_t trial_seed = 0;
  std::vector<PhaseLog> phases;
  std::vector<std::uint64_t> final_policies;
};

/// Runs T stages of simultaneous play from `start_state`: every agent draws
/// from its exploration mixture (own stream, player order), the environment
/// samples the transition (its own stream), and each agent updates its
/// estimates from its private observation only. Baselines never change
/// inside a phase. Returns the state the system ends in.
inline int run_exploration_phase(const ValidatedGame& game,
                                 std::vector<LearnerState>& agents, long T,
                                 RandomStream& env, int start_state) {
  const int N = game.num_players();
  if (static_cast<int>(agents.size()) != N)
    throw ShapeMismatch("one learner per player required");
  int x = start_state;
  std::vector<int> actions(N);
  for (long t = 0; t < T; ++t) {
    for (int i = 0; i < N; ++i) actions[i] = agents[i].sample_behavior_action(x);
    const int ja = game.encode_action(actions);
    const int xn = sample_transition(env, game, x, ja);
    for (int i = 0; i < N; ++i) {
      agents[i].observe(
          StageObservation{x, actions[i], game.cost(i, x, ja), xn});
    }
    x = xn;
  }
  return x;
}

/// End-of-phase step for every agent: test satisfaction on the learned
/// estimates, revise the baseline if dissatisfied, then clamp estimates and
/// reset within-phase visit counts. Returns the per-player satisfaction
/// flags as a bitmask (bit i = player i satisfied).
inline std::uint32_t end_of_phase_update(std::vector<LearnerState>& agents) {
  std::uint32_t mask = 0;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const bool sat = agents[i].satisfied();
    if (sat) mask |= (1u << i);
    agents[i].revise(sat);
    agents[i].reset_estimates();
  }
  return mask;
}

/// Runs one full trial: seeds the environment and agent streams from the
/// trial seed, draws initial baselines, then alternates exploration phases
/// and end-of-phase updates. When `oracle` is given, baselines are checked
/// offline for equilibrium membership every `eval_stride` phases.
inline TrialResult run_trial(const ValidatedGame& game,
                             const QuantizedPolicySet& grid,
                             const ExperimentConfig& cfg,
                             std::span<const LearnerParams> params, int trial,
                             const EquilibriumOracle* oracle) {
  const int N = game.num_players();
  TrialResult result;
  result.trial = trial;
  result.trial_seed = derive_seed(cfg.master_seed, trial);

  RandomStream env(derive_seed(result.trial_seed, 0));
  std::vector<LearnerState> agents;
  agents.reserve(N);
  for (int i = 0; i < N; ++i)
    agents.emplace_back(game, i, grid, params[i],
                        derive_seed(result.trial_seed, i + 1));

  if (cfg.num_phases == 0) {
    for (int i = 0; i < N; ++i)
      result.final_policies.push_back(agents[i].baseline_index());
    return result;
  }

  int x = env.sample(game.initial_dist());
  std::vector<std::uint64_t> joint(N);
  for (int k = 0; k < cfg.num_phases; ++k) {
    PhaseLog log;
    log.phase = k;
    for (int i = 0; i < N; ++i) joint[i] = agents[i].baseline_index();
    log.policies = joint;
    if (oracle && cfg.eval_stride > 0 && k % cfg.eval_stride == 0)
      log.is_equilibrium =
          oracle->is_equilibrium(oracle->encode(joint), cfg.eps) ? 1 : 0;
    log.stages = cfg.phase_length(k);
    x = run_exploration_phase(game, agents, log.stages, env, x);
    log.satisfied_mask = end_of_phase_update(agents);
    result.phases.push_back(std::move(log));
  }
  for (int i = 0; i < N; ++i)
    result.final_policies.push_back(agents[i].baseline_index());
  return result;
}

/// Worker count: the smallest of the requested count (0 = hardware), the
/// SYMGA_THREADS environment cap and the number of trials.
inline int resolve_thread_count(int requested, int trials) {
  int t = requested > 0 ? requested
                        : static_cast<int>(std::thread::hardware_concurrency());
  if (t < 1) t = 1;
  if (const char* env = std::getenv("SYMGA_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) t = std::min(t, cap);
  }
  return std::max(1, std::min(t, trials));
}

/// Runs every trial of the experiment, in parallel across trials when more
/// than one worker is available. Each trial derives its own seed from the
/// master seed, so the result is independent of the worker count; results
/// are returned in trial order.
inline std::vector<TrialResult> run_experiment(const ValidatedGame& game,
                                               const ExperimentConfig& cfg) {
  cfg.validate();
  const QuantizedPolicySet grid = QuantizedPolicySet::build(
      game.num_actions(0), game.num_states(), cfg.grid_m);
  for (int i = 1; i < game.num_players(); ++i)
    if (game.num_actions(i) != game.num_actions(0))
      throw ShapeMismatch("a shared grid needs identical action counts");
  const auto params = resolve_learner_params(game, grid, cfg);

  std::unique_ptr<EquilibriumOracle> oracle;
  if (cfg.eval_stride > 0)
    oracle = std::make_unique<EquilibriumOracle>(game, grid, 1e-10,
                                                 cfg.enumeration_cap);

  std::vector<TrialResult> results(cfg.num_trials);
  const int workers = resolve_thread_count(cfg.threads, cfg.num_trials);
  if (workers == 1) {
    for (int t = 0; t < cfg.num_trials; ++t)
      results[t] = run_trial(game, grid, cfg, params, t, oracle.get());
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int t = w; t < cfg.num_trials; t += workers)
            results[t] = run_trial(game, grid, cfg, params, t, oracle.get());
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors)
      if (err) std::rethrow_exception(err);
  }
  return results;
}

/// Equilibrium frequency across trials, phase by phase.
struct FrequencyCurve {
  std::vector<int> phases;
  std::vector<double> mean;
  std::vector<double> stderr_;  // binomial standard error
};

/// Collapses trial logs into the equilibrium-frequency curve. Only phases
/// evaluated in every trial contribute; trials must agree on the set of
/// evaluated phases (same stride), otherwise ShapeMismatch.
inline FrequencyCurve aggregate_trials(std::span<const TrialResult> results) {
  FrequencyCurve curve;
  if (results.empty()) return curve;
  const std::size_t phases = results.front().phases.size();
  for (const auto& r : results)
    if (r.phases.size() != phases)
      throw ShapeMismatch("trials disagree on phase count");

  const double n = static_cast<double>(results.size());
  for (std::size_t k = 0; k < phases; ++k) {
    const bool evaluated = results.front().phases[k].is_equilibrium >= 0;
    for (const auto& r : results)
      if ((r.phases[k].is_equilibrium >= 0) != evaluated)
        throw ShapeMismatch("trials disagree on evaluated phases");
    if (!evaluated) continue;
    double hits = 0.0;
    for (const auto& r : results) hits += r.phases[k].is_equilibrium;
    const double p = hits / n;
    curve.phases.push_back(results.front().phases[k].phase);
    curve.mean.push_back(p);
    curve.stderr_.push_back(std::sqrt(p * (1.0 - p) / n));
  }
  return curve;
}

/// Parameters of the exact revision chain (estimates replaced by solver
/// values). The satisfaction mode defaults to lenient because rational
/// grids routinely contain joints whose gap equals eps exactly; strict mode
/// raises IndeterminateMargin on those.
struct OracleProcessParams {
  double eps = 0.2;
  double e = 0.1;
  double eta = 0.2;
  Objective objective = Objective::Min;
  MarginMode mode = MarginMode::Lenient;
};

/// Exact revision chain on the joint grid: at every step each dissatisfied
/// player independently draws a uniform grid policy with probability e and
/// otherwise applies the exact revision step; satisfied players keep their
/// policies. Draws come from the single stream, player order. Once every
/// player is satisfied the state never changes again. Returns the joint
/// indices visited, steps + 1 entries including the start.
inline std::vector<std::uint64_t> run_oracle_process(
    const EquilibriumOracle& oracle, const OracleProcessParams& params,
    long steps, RandomStream& rng,
    std::optional<std::uint64_t> start = std::nullopt) {
  const ValidatedGame& game = oracle.game();
  const QuantizedPolicySet& grid = oracle.grid();
  const int N = game.num_players();

  std::vector<std::uint64_t> joint(N);
  if (start) {
    oracle.decode(*start, joint);
  } else {
    for (int i = 0; i < N; ++i) joint[i] = grid.uniform_policy_draw(rng);
  }

  // Memoized revision-step outputs per (player, own policy, profile).
  std::vector<std::vector<std::int64_t>> rule_memo(N);
  const std::uint64_t per = oracle.per_player_policies();
  for (int i = 0; i < N; ++i)
    rule_memo[i].assign(per * oracle.num_profiles(), -1);

  auto rule_output = [&](int i, std::uint64_t own, std::uint64_t prof) {
    std::int64_t& memo = rule_memo[i][own * oracle.num_profiles() + prof];
    if (memo >= 0) return static_cast<std::uint64_t>(memo);
    const StationaryPolicy& pi = oracle.policy(own);
    std::vector<std::uint64_t> points(game.num_states());
    for (int x = 0; x < game.num_states(); ++x) {
      const int g = oracle.greedy_action(i, prof, x,
                                         params.objective == Objective::Max);
      // Same mass shift as the learned rule, greedy action supplied.
      auto row = pi.row(x);
      std::vector<double> mid(row.begin(), row.end());
      if (pi.num_actions > 1) {
        const double per_action = params.eta / (pi.num_actions - 1);
        double moved = 0.0;
        for (int u = 0; u < pi.num_actions; ++u) {
          if (u == g) continue;
          const double shift = std::min(mid[u], per_action);
          mid[u] -= shift;
          moved += shift;
        }
        mid[g] += moved;
      }
      points[x] = grid.nearest_point(mid);
    }
    memo = static_cast<std::int64_t>(grid.policy_index_of_points(points));
    return static_cast<std::uint64_t>(memo);
  };

  std::vector<std::uint64_t> sequence;
  sequence.reserve(steps + 1);
  sequence.push_back(oracle.encode(joint));
  std::vector<std::uint64_t> next(N);
  for (long k = 0; k < steps; ++k) {
    const std::uint64_t code = sequence.back();
    for (int i = 0; i < N; ++i) {
      if (oracle.satisfied(i, code, params.eps, params.mode)) {
        next[i] = joint[i];
        continue;
      }
      if (rng.uniform() < params.e) {
        next[i] = grid.uniform_policy_draw(rng);
      } else {
        next[i] = rule_output(i, joint[i], oracle.opponent_profile(code, i));
      }
    }
    joint = next;
    sequence.push_back(oracle.encode(joint));
  }
  return sequence;
}

/// One player's exact revision transition law at a joint policy: the
/// distribution over its next policy index. Satisfied players keep their
/// policy with probability one; dissatisfied players mix the uniform draw
/// (weight e) with the deterministic revision step (weight 1 - e). Used to
/// cross-check the learned process against the exact chain.
inline std::vector<std::pair<std::uint64_t, double>>
oracle_revision_distribution(const EquilibriumOracle& oracle,
                             const OracleProcessParams& params,
                             std::uint64_t joint, int player) {
  const std::uint64_t own = oracle.decode(joint)[player];
  if (oracle.satisfied(player, joint, params.eps, params.mode))
    return {{own, 1.0}};

  const ValidatedGame& game = oracle.game();
  const QuantizedPolicySet& grid = oracle.grid();
  JointPolicy jp;
  jp.players.reserve(game.num_players());
  const auto digits = oracle.decode(joint);
  for (int j = 0; j < game.num_players(); ++j)
    jp.players.push_back(oracle.policy(digits[j]));
  const std::uint64_t stepped =
      oracle_update_rule(game, jp, player, params.eta, grid, oracle.tol(),
                         params.objective);

  const double per = 1.0 / static_cast<double>(oracle.per_player_policies());
  std::vector<std::pair<std::uint64_t, double>> dist;
  dist.reserve(oracle.per_player_policies());
  for (std::uint64_t p = 0; p < oracle.per_player_policies(); ++p) {
    double w = params.e * per;
    if (p == stepped) w += 1.0 - params.e;
    dist.emplace_back(p, w);
  }
  return dist;
}

/// Iterates y <- u * y + p * (1 - y) for k steps from y0. Requires
/// 0 < p < u < 1 and y0 in [0, 1]; the iteration contracts toward
/// p / (1 - u + p).
inline double recursion_oracle(double u, double p, double y0, long k) {
  if (!(p > 0.0 && u > p && u < 1.0))
    throw RangeError("u,p", "need 0 < p < u < 1");
  if (!(y0 >= 0.0 && y0 <= 1.0)) throw RangeError("y0", "must lie in [0, 1]");
  if (k < 0) throw RangeError("k", "must be >= 0");
  double y = y0;
  for (long t = 0; t < k; ++t) y = u * y + p * (1.0 - y);
  return y;
}

/// Fixed point of the recursion above.
inline double recursion_fixed_point(double u, double p) {
  if (!(p > 0.0 && u > p && u < 1.0))
    throw RangeError("u,p", "need 0 < p < u < 1");
  return p / (1.0 - u + p);
}

}  // namespace symga
