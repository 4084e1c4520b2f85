#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "symga/errors.hpp"
#include "symga/game.hpp"
#include "symga/policy.hpp"
#include "symga/quantizer.hpp"
#include "symga/solver.hpp"

namespace symga {

/// A finite sequence of joint policies in which only dissatisfied players
/// ever move: at every non-terminal step, each player holding an
/// eps-best-response keeps its policy unchanged. Certificates record the
/// per-player satisfaction flags at each step.
struct RevisionPath {
  double eps = 0.0;
  std::vector<JointPolicy> steps;
  std::vector<std::vector<bool>> certificates;  // [step][player]
};

struct PathWitness {
  int step = -1;
  int player = -1;
  std::string reason;
};

struct PathValidationReport {
  bool valid = false;
  bool terminal_is_equilibrium = false;
  std::optional<PathWitness> witness;
};

/// Recomputes every satisfaction flag with the exact solver (strict margin
/// mode, so borderline comparisons raise IndeterminateMargin rather than
/// silently guessing) and checks the defining property: a player satisfied
/// at step k must hold the same policy at step k+1. Also verifies that the
/// recorded certificates match the recomputed flags and reports whether the
/// terminal joint policy is an eps-equilibrium. Policies are compared
/// entrywise with tolerance 1e-12 ("same policy" in serialized paths).
inline PathValidationReport is_valid_revision_path(const ValidatedGame& game,
                                                   const RevisionPath& path,
                                                   double tol = 1e-10) {
  PathValidationReport report;
  if (path.steps.empty()) {
    report.witness = PathWitness{-1, -1, "path has no steps"};
    return report;
  }
  const int N = game.num_players();
  if (path.certificates.size() != path.steps.size()) {
    report.witness = PathWitness{-1, -1, "certificate shape mismatch"};
    return report;
  }

  auto same_policy = [](const StationaryPolicy& a, const StationaryPolicy& b) {
    if (a.num_states != b.num_states || a.num_actions != b.num_actions)
      return false;
    for (std::size_t k = 0; k < a.rows.size(); ++k)
      if (std::abs(a.rows[k] - b.rows[k]) > 1e-12) return false;
    return true;
  };

  std::vector<std::vector<bool>> recomputed(path.steps.size());
  for (std::size_t k = 0; k < path.steps.size(); ++k) {
    if (path.steps[k].num_players() != N) {
      report.witness = PathWitness{int(k), -1, "joint policy has wrong player count"};
      return report;
    }
    if (path.certificates[k].size() != static_cast<std::size_t>(N)) {
      report.witness = PathWitness{int(k), -1, "certificate row has wrong length"};
      return report;
    }
    recomputed[k].resize(N);
    for (int i = 0; i < N; ++i) {
      recomputed[k][i] = is_eps_best_response(game, i, path.steps[k], path.eps,
                                              tol, MarginMode::Strict);
      if (recomputed[k][i] != path.certificates[k][i]) {
        report.witness =
            PathWitness{int(k), i, "recorded certificate disagrees with solver"};
        return report;
      }
    }
  }

  for (std::size_t k = 0; k + 1 < path.steps.size(); ++k) {
    for (int i = 0; i < N; ++i) {
      if (recomputed[k][i] &&
          !same_policy(path.steps[k][i], path.steps[k + 1][i])) {
        report.witness = PathWitness{int(k), i, "satisfied player changed policy"};
        return report;
      }
    }
  }

  report.valid = true;
  report.terminal_is_equilibrium =
      std::all_of(recomputed.back().begin(), recomputed.back().end(),
                  [](bool b) { return b; });
  return report;
}

/// A constructed path together with its bookkeeping: the cohort (the set of
/// players sharing one policy, grown step by step) and the distinguished
/// player chosen at each step.
struct ConstructedPath {
  RevisionPath path;
  std::vector<std::uint64_t> step_indices_flat;  // [step * N + player]
  std::vector<std::vector<int>> cohorts;         // cohort after each step
  std::vector<int> distinguished;                // chosen player per move
};

/// Builds a revision path from `start` into the eps-equilibrium set of a
/// symmetric game, moving only dissatisfied players, with length at most
/// N + 1. The construction grows a cohort of players who share a policy:
///  - nobody dissatisfied: the start already terminates the path;
///  - everybody dissatisfied: jump straight to target_eq;
///  - otherwise the dissatisfied players first copy the policy of the
///    lowest-index satisfied player; afterwards, while no equilibrium is
///    reached, either the lowest-index dissatisfied outsider joins the
///    cohort (cohort satisfied) or the whole cohort copies the policy of
///    the lowest-index outsider (cohort dissatisfied). In a symmetric game
///    cohort members share one satisfaction status, every move is made by a
///    dissatisfied player, and the cohort grows each step, so the loop ends
///    within N - 1 iterations, possibly followed by one jump to target_eq.
/// Start and target are per-player grid policy indices; target_eq must be
/// an eps-equilibrium (else NoTargetEquilibrium). The game must pass
/// check_symmetry (else NotSymmetric); callers that have already verified
/// symmetry once may pass verify_symmetry = false to skip the re-check when
/// constructing many paths on one game. Satisfaction uses strict margins.
inline ConstructedPath construct_symmetric_path(
    const EquilibriumOracle& oracle, std::span<const std::uint64_t> start,
    double eps, std::span<const std::uint64_t> target_eq,
    bool verify_symmetry = true) {
  const ValidatedGame& game = oracle.game();
  const int N = game.num_players();
  if (static_cast<int>(start.size()) != N ||
      static_cast<int>(target_eq.size()) != N)
    throw ShapeMismatch("start and target need one policy index per player");
  if (verify_symmetry && !check_symmetry(game).is_symmetric)
    throw NotSymmetric("construct_symmetric_path needs a symmetric game");
  if (!oracle.is_equilibrium(oracle.encode(target_eq), eps, MarginMode::Strict))
    throw NoTargetEquilibrium("target_eq is not an eps-equilibrium");

  ConstructedPath out;
  out.path.eps = eps;

  std::vector<std::uint64_t> current(start.begin(), start.end());
  auto satisfaction = [&](const std::vector<std::uint64_t>& joint) {
    const std::uint64_t code = oracle.encode(joint);
    std::vector<bool> sat(N);
    for (int i = 0; i < N; ++i)
      sat[i] = oracle.satisfied(i, code, eps, MarginMode::Strict);
    return sat;
  };
  auto push_step = [&](const std::vector<std::uint64_t>& joint,
                       const std::vector<bool>& sat) {
    JointPolicy jp;
    jp.players.reserve(N);
    for (int i = 0; i < N; ++i) jp.players.push_back(oracle.policy(joint[i]));
    out.path.steps.push_back(std::move(jp));
    out.path.certificates.emplace_back(sat.begin(), sat.end());
    out.step_indices_flat.insert(out.step_indices_flat.end(), joint.begin(),
                                 joint.end());
  };

  std::vector<bool> sat = satisfaction(current);
  push_step(current, sat);
  const bool all0 =
      std::all_of(sat.begin(), sat.end(), [](bool b) { return b; });
  if (all0) return out;  // already an equilibrium, length 1

  const bool none0 =
      std::none_of(sat.begin(), sat.end(), [](bool b) { return b; });
  if (none0) {
    // Every player may move at once; jump to the target equilibrium.
    current.assign(target_eq.begin(), target_eq.end());
    sat = satisfaction(current);
    push_step(current, sat);
    out.distinguished.push_back(-1);
    out.cohorts.push_back({});
    return out;
  }

  // Initial move: all dissatisfied players copy the policy of the
  // lowest-index satisfied player. The cohort is then everyone holding that
  // policy (coincidental holders included).
  {
    int leader = -1;
    for (int i = 0; i < N; ++i)
      if (sat[i]) {
        leader = i;
        break;
      }
    const std::uint64_t shared = current[leader];
    for (int i = 0; i < N; ++i)
      if (!sat[i]) current[i] = shared;
    out.distinguished.push_back(leader);
    std::vector<int> cohort;
    for (int i = 0; i < N; ++i)
      if (current[i] == shared) cohort.push_back(i);
    out.cohorts.push_back(cohort);
    sat = satisfaction(current);
    push_step(current, sat);
  }

  for (int round = 0; round < N; ++round) {
    if (std::all_of(sat.begin(), sat.end(), [](bool b) { return b; })) return out;

    const std::vector<int>& cohort = out.cohorts.back();
    if (static_cast<int>(cohort.size()) == N) {
      // Whole population shares one dissatisfied policy: jump to target.
      current.assign(target_eq.begin(), target_eq.end());
      sat = satisfaction(current);
      push_step(current, sat);
      out.distinguished.push_back(-1);
      out.cohorts.push_back({});
      return out;
    }

    // Symmetry makes satisfaction constant across the cohort; verify.
    const bool cohort_satisfied = sat[cohort.front()];
    for (int i : cohort)
      if (sat[i] != cohort_satisfied)
        throw Error("cohort members disagree on satisfaction in a symmetric game");

    std::vector<char> in_cohort(N, 0);
    for (int i : cohort) in_cohort[i] = 1;
    const std::uint64_t cohort_policy = current[cohort.front()];

    if (cohort_satisfied) {
      // Lowest-index dissatisfied player joins the cohort.
      int joiner = -1;
      for (int i = 0; i < N; ++i)
        if (!sat[i]) {
          joiner = i;
          break;
        }
      current[joiner] = cohort_policy;
      out.distinguished.push_back(joiner);
    } else {
      // The whole cohort copies the lowest-index outsider's policy. Cohort
      // members are dissatisfied, so they are allowed to move; the outsider
      // itself stays put.
      int outsider = -1;
      for (int i = 0; i < N; ++i)
        if (!in_cohort[i]) {
          outsider = i;
          break;
        }
      const std::uint64_t adopted = current[outsider];
      for (int i : cohort) current[i] = adopted;
      out.distinguished.push_back(outsider);
    }

    // New cohort: everyone now sharing the adopted policy.
    const std::uint64_t shared = cohort_satisfied ? cohort_policy
                                                  : current[cohort.front()];
    std::vector<int> next_cohort;
    for (int i = 0; i < N; ++i)
      if (current[i] == shared) next_cohort.push_back(i);
    if (next_cohort.size() <= out.cohorts.back().size())
      throw Error("cohort failed to grow; construction invariant broken");
    out.cohorts.push_back(std::move(next_cohort));

    sat = satisfaction(current);
    push_step(current, sat);
  }
  throw Error("revision path exceeded the guaranteed length bound");
}

/// Convenience overload building its own oracle.
inline ConstructedPath construct_symmetric_path(
    const ValidatedGame& game, const QuantizedPolicySet& grid,
    std::span<const std::uint64_t> start, double eps,
    std::span<const std::uint64_t> target_eq, double tol = 1e-10,
    std::uint64_t cap = kDefaultEnumerationCap) {
  EquilibriumOracle oracle(game, grid, tol, cap);
  return construct_symmetric_path(oracle, start, eps, target_eq);
}

struct PathsPropertyReport {
  bool holds = false;
  int max_length = 0;
  std::uint64_t starts_checked = 0;
  std::string failure;  // empty when holds
};

/// Checks the revision-paths property over the whole quantized joint grid:
/// from every joint grid policy, the constructed path must validate and end
/// in an eps-equilibrium. The quantifier runs over grid starts only; the
/// full-simplex property is not checkable by enumeration. Reports the
/// maximum path length seen. Returns holds = false (with a note) when the
/// grid contains no eps-equilibrium to serve as a target.
///
/// Each constructed path is checked against the defining property through
/// the oracle's cached tables (same solver values as is_valid_revision_path,
/// computed once per profile instead of once per visit); the path from the
/// first start is additionally run through the full standalone validator as
/// a cross-check of the table-driven shortcut.
inline PathsPropertyReport has_revision_paths_property(
    const ValidatedGame& game, const QuantizedPolicySet& grid, double eps,
    double tol = 1e-10, std::uint64_t cap = kDefaultEnumerationCap) {
  PathsPropertyReport report;
  if (!check_symmetry(game).is_symmetric) {
    report.failure = "game is not symmetric";
    return report;
  }

  EquilibriumOracle oracle(game, grid, tol, cap);
  std::vector<std::uint64_t> eqs = oracle.equilibria(eps, MarginMode::Strict);
  if (eqs.empty()) {
    report.failure = "no eps-equilibrium on the joint grid";
    return report;
  }
  const std::vector<std::uint64_t> target = oracle.decode(eqs.front());

  const int N = game.num_players();
  std::vector<std::uint64_t> start(N);
  for (std::uint64_t joint = 0; joint < oracle.num_joints(); ++joint) {
    oracle.decode(joint, start);
    const auto built = construct_symmetric_path(oracle, start, eps, target,
                                                /*verify_symmetry=*/false);
    const std::size_t L = built.path.steps.size();
    ++report.starts_checked;
    report.max_length = std::max(report.max_length, static_cast<int>(L));
    if (static_cast<int>(L) > N + 1) {
      report.failure = "path from joint index " + std::to_string(joint) +
                       " exceeds length " + std::to_string(N + 1);
      return report;
    }

    auto fail = [&](const std::string& why) {
      report.failure =
          "path from joint index " + std::to_string(joint) + " " + why;
    };
    if (built.step_indices_flat.size() != L * static_cast<std::size_t>(N) ||
        built.path.certificates.size() != L) {
      fail("has inconsistent bookkeeping");
      return report;
    }
    for (std::size_t k = 0; k < L; ++k) {
      const std::uint64_t* row = built.step_indices_flat.data() + k * N;
      const std::uint64_t code = oracle.encode({row, static_cast<std::size_t>(N)});
      for (int i = 0; i < N; ++i) {
        const bool sat = oracle.satisfied(i, code, eps, MarginMode::Strict);
        if (sat != built.path.certificates[k][i]) {
          fail("carries a certificate the solver disagrees with");
          return report;
        }
        if (sat && k + 1 < L && built.step_indices_flat[(k + 1) * N + i] != row[i]) {
          fail("moves a satisfied player");
          return report;
        }
      }
      if (k + 1 == L && !oracle.is_equilibrium(code, eps, MarginMode::Strict)) {
        fail("does not end in an equilibrium");
        return report;
      }
    }

    if (joint == 0) {
      const auto check = is_valid_revision_path(game, built.path, oracle.tol());
      if (!check.valid || !check.terminal_is_equilibrium) {
        fail("fails the standalone validator");
        return report;
      }
    }
  }
  report.holds = true;
  return report;
}

}  // namespace symga
