// symga: command-line surface for the library. One subcommand per library
// capability; exit 0 on success, 1 on domain errors, 2 on usage errors.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "symga/symga.hpp"

namespace {

using symga::json;

/// Parses "3,17,5" into per-player policy indices.
std::vector<std::uint64_t> parse_index_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string cell =
        text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw symga::ParseError("bad policy index list: '" + text + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string g17(double v) { return symga::format_g17(v); }

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty())
    std::cout << j.dump(2) << "\n";
  else
    symga::write_text_file(out_path, j.dump(2) + "\n");
}

std::string default_freq_path(const std::string& run_path) {
  const std::filesystem::path p(run_path);
  return (p.has_parent_path() ? p.parent_path() / "freq.csv"
                              : std::filesystem::path("freq.csv"))
      .string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Independent multi-agent learning in finite discounted "
               "symmetric stochastic games: exact solvers, revision paths, "
               "oracle process, and the two-timescale learning experiment."};
  app.require_subcommand(1);

  // ---- validate ------------------------------------------------------
  struct {
    std::string game;
  } va;
  {
    auto* cmd = app.add_subcommand("validate", "Validate a game file");
    cmd->add_option("--game", va.game, "Game JSON file")->required();
    cmd->callback([&] {
      const auto g = symga::load_game(va.game);
      std::cout << "valid: true\n"
                << "players: " << g.num_players()
                << ", states: " << g.num_states() << ", actions:";
      for (int n : g.action_counts()) std::cout << ' ' << n;
      std::cout << "\nreachable: "
                << (symga::check_reachability(g) ? "true" : "false") << "\n";
    });
  }

  // ---- check-symmetry -------------------------------------------------
  struct {
    std::string game;
    double tol = 1e-9;
  } cs;
  {
    auto* cmd = app.add_subcommand("check-symmetry",
                                   "Check player-permutation symmetry");
    cmd->add_option("--game", cs.game, "Game JSON file")->required();
    cmd->add_option("--tol", cs.tol, "Comparison tolerance");
    cmd->callback([&] {
      const auto g = symga::load_game(cs.game);
      const auto report = symga::check_symmetry(g, cs.tol);
      std::cout << "symmetric: " << (report.is_symmetric ? "true" : "false")
                << "\n";
      if (report.witness) {
        const auto& w = *report.witness;
        std::cout << "witness: " << w.condition << " condition, players ("
                  << w.player_i << ", " << w.player_j << "), state " << w.state
                  << ", lhs=" << g17(w.lhs) << ", rhs=" << g17(w.rhs) << "\n";
      }
    });
  }

  // ---- check-eq --------------------------------------------------------
  struct {
    std::string game, out;
    int m = 10;
    double eps = 0.2, tol = 1e-10;
    std::uint64_t cap = symga::kDefaultEnumerationCap;
    bool strict = false;
  } ce;
  {
    auto* cmd = app.add_subcommand(
        "check-eq", "Enumerate the eps-equilibria on the quantized grid");
    cmd->add_option("--game", ce.game, "Game JSON file")->required();
    cmd->add_option("--grid", ce.m, "Quantization resolution m")->required();
    cmd->add_option("--eps", ce.eps, "Equilibrium slack")->required();
    cmd->add_option("--tol", ce.tol, "Solver tolerance");
    cmd->add_option("--cap", ce.cap, "Enumeration cap");
    cmd->add_flag("--strict", ce.strict,
                  "Refuse borderline comparisons instead of passing them");
    cmd->add_option("--out", ce.out, "Write the report JSON here");
    cmd->callback([&] {
      const auto g = symga::load_game(ce.game);
      const auto grid = symga::QuantizedPolicySet::build(
          g.num_actions(0), g.num_states(), ce.m);
      const symga::EquilibriumOracle oracle(g, grid, ce.tol, ce.cap);
      const auto mode = ce.strict ? symga::MarginMode::Strict
                                  : symga::MarginMode::Lenient;
      const auto eqs = oracle.equilibria(ce.eps, mode);
      std::cout << "equilibria: " << eqs.size() << " / " << oracle.num_joints()
                << "\n";
      json j;
      j["eps"] = ce.eps;
      j["m"] = ce.m;
      j["per_player_policies"] = oracle.per_player_policies();
      j["joint_policies"] = oracle.num_joints();
      j["count"] = eqs.size();
      json list = json::array();
      for (std::uint64_t code : eqs) {
        json entry;
        entry["joint_index"] = code;
        entry["policies"] = oracle.decode(code);
        list.push_back(std::move(entry));
      }
      j["equilibria"] = std::move(list);
      if (!ce.out.empty()) emit(j, ce.out);
    });
  }

  // ---- bar-delta -------------------------------------------------------
  struct {
    std::string game, out;
    int m = 10;
    double eps = 0.2, tol = 1e-10;
    std::uint64_t cap = symga::kDefaultEnumerationCap;
  } bd;
  {
    auto* cmd = app.add_subcommand(
        "bar-delta",
        "Smallest positive |eps - gap| over the grid (gap-profile report)");
    cmd->add_option("--game", bd.game, "Game JSON file")->required();
    cmd->add_option("--grid", bd.m, "Quantization resolution m")->required();
    cmd->add_option("--eps", bd.eps, "Equilibrium slack")->required();
    cmd->add_option("--tol", bd.tol, "Solver tolerance");
    cmd->add_option("--cap", bd.cap, "Enumeration cap");
    cmd->add_option("--out", bd.out, "Write the gap-profile JSON here");
    cmd->callback([&] {
      const auto g = symga::load_game(bd.game);
      const auto grid = symga::QuantizedPolicySet::build(
          g.num_actions(0), g.num_states(), bd.m);
      const auto result =
          symga::compute_bar_delta(g, grid, bd.eps, bd.tol, bd.cap);
      std::cout << "bar_delta: " << g17(result.bar_delta) << "\n";
      if (!bd.out.empty()) {
        json j;
        j["eps"] = bd.eps;
        j["m"] = bd.m;
        j["bar_delta"] = result.bar_delta;
        j["num_gaps"] = result.profile.size();
        j["profile"] = result.profile;
        emit(j, bd.out);
      }
    });
  }

  // ---- revision-path ---------------------------------------------------
  struct {
    std::string game, out, start, target;
    int m = 10;
    double eps = 0.2, tol = 1e-10;
    std::uint64_t cap = symga::kDefaultEnumerationCap;
  } rp;
  {
    auto* cmd = app.add_subcommand(
        "revision-path",
        "Construct a revision path from a grid start into the equilibrium set");
    cmd->add_option("--game", rp.game, "Game JSON file")->required();
    cmd->add_option("--grid", rp.m, "Quantization resolution m")->required();
    cmd->add_option("--eps", rp.eps, "Equilibrium slack")->required();
    cmd->add_option("--start", rp.start,
                    "Per-player policy indices, e.g. 3,17")->required();
    cmd->add_option("--target", rp.target,
                    "Target equilibrium indices (default: first one found)");
    cmd->add_option("--tol", rp.tol, "Solver tolerance");
    cmd->add_option("--cap", rp.cap, "Enumeration cap");
    cmd->add_option("--out", rp.out, "Write the path JSON here");
    cmd->callback([&] {
      const auto g = symga::load_game(rp.game);
      const auto grid = symga::QuantizedPolicySet::build(
          g.num_actions(0), g.num_states(), rp.m);
      const symga::EquilibriumOracle oracle(g, grid, rp.tol, rp.cap);
      const auto start = parse_index_list(rp.start);
      std::vector<std::uint64_t> target;
      if (!rp.target.empty()) {
        target = parse_index_list(rp.target);
      } else {
        // Path construction verifies its target with strict margins, so the
        // default must skip borderline candidates (gap equal to eps).
        for (std::uint64_t code : oracle.equilibria(rp.eps)) {
          try {
            if (!oracle.is_equilibrium(code, rp.eps, symga::MarginMode::Strict))
              continue;
          } catch (const symga::IndeterminateMargin&) {
            continue;
          }
          target = oracle.decode(code);
          break;
        }
        if (target.empty())
          throw symga::NoTargetEquilibrium(
              "no strictly certifiable eps-equilibrium on the joint grid");
      }
      const auto built =
          symga::construct_symmetric_path(oracle, start, rp.eps, target);
      const auto check = symga::is_valid_revision_path(g, built.path, rp.tol);
      std::cout << "length: " << built.path.steps.size() << "\n"
                << "valid: " << (check.valid ? "true" : "false") << "\n"
                << "terminal_equilibrium: "
                << (check.terminal_is_equilibrium ? "true" : "false") << "\n";
      if (!rp.out.empty()) emit(symga::revision_path_to_json(built), rp.out);
    });
  }

  // ---- verify-paths ----------------------------------------------------
  struct {
    std::string game;
    int m = 10;
    double eps = 0.2, tol = 1e-10;
    std::uint64_t cap = symga::kDefaultEnumerationCap;
  } vp;
  {
    auto* cmd = app.add_subcommand(
        "verify-paths",
        "Check the revision-paths property over every grid start");
    cmd->add_option("--game", vp.game, "Game JSON file")->required();
    cmd->add_option("--grid", vp.m, "Quantization resolution m")->required();
    cmd->add_option("--eps", vp.eps, "Equilibrium slack")->required();
    cmd->add_option("--tol", vp.tol, "Solver tolerance");
    cmd->add_option("--cap", vp.cap, "Enumeration cap");
    cmd->callback([&] {
      const auto g = symga::load_game(vp.game);
      const auto grid = symga::QuantizedPolicySet::build(
          g.num_actions(0), g.num_states(), vp.m);
      const auto report = symga::has_revision_paths_property(
          g, grid, vp.eps, vp.tol, vp.cap);
      std::cout << "holds: " << (report.holds ? "true" : "false") << "\n"
                << "starts: " << report.starts_checked << "\n"
                << "max_length: " << report.max_length << "\n";
      if (!report.failure.empty())
        std::cout << "failure: " << report.failure << "\n";
    });
  }

  // ---- oracle-sim ------------------------------------------------------
  struct {
    std::string game, out, start;
    int m = 10, trials = 1;
    long steps = 100;
    double eps = 0.2, e = 0.1, eta = 0.2, tol = 1e-10;
    std::uint64_t seed = 0, cap = symga::kDefaultEnumerationCap;
    bool strict = false;
    std::string objective = "min";
  } os_;
  {
    auto* cmd = app.add_subcommand(
        "oracle-sim", "Simulate the exact policy-revision process on the grid");
    cmd->add_option("--game", os_.game, "Game JSON file")->required();
    cmd->add_option("--grid", os_.m, "Quantization resolution m")->required();
    cmd->add_option("--eps", os_.eps, "Equilibrium slack")->required();
    cmd->add_option("--steps", os_.steps, "Revision steps per trajectory")
        ->required();
    cmd->add_option("--seed", os_.seed, "Master seed")->required();
    cmd->add_option("--trials", os_.trials, "Number of trajectories");
    cmd->add_option("--e", os_.e, "Uniform-draw probability when revising");
    cmd->add_option("--eta", os_.eta, "Revision step size");
    cmd->add_option("--start", os_.start,
                    "Fixed start, per-player policy indices (default: random)");
    cmd->add_option("--objective", os_.objective, "Greedy direction")
        ->check(CLI::IsMember({"min", "max"}));
    cmd->add_flag("--strict", os_.strict, "Strict satisfaction margins");
    cmd->add_option("--tol", os_.tol, "Solver tolerance");
    cmd->add_option("--cap", os_.cap, "Enumeration cap");
    cmd->add_option("--out", os_.out, "Write trajectories CSV here");
    cmd->callback([&] {
      const auto g = symga::load_game(os_.game);
      const auto grid = symga::QuantizedPolicySet::build(
          g.num_actions(0), g.num_states(), os_.m);
      const symga::EquilibriumOracle oracle(g, grid, os_.tol, os_.cap);
      symga::OracleProcessParams params;
      params.eps = os_.eps;
      params.e = os_.e;
      params.eta = os_.eta;
      params.objective = os_.objective == "max" ? symga::Objective::Max
                                                : symga::Objective::Min;
      params.mode = os_.strict ? symga::MarginMode::Strict
                               : symga::MarginMode::Lenient;
      std::optional<std::uint64_t> start;
      if (!os_.start.empty())
        start = oracle.encode(parse_index_list(os_.start));

      long absorbed = 0, departures = 0;
      std::ostringstream csv;
      csv << "trial,step,joint_index,is_eq\n";
      for (int r = 0; r < os_.trials; ++r) {
        symga::RandomStream rng(symga::derive_seed(os_.seed, r));
        const auto traj =
            symga::run_oracle_process(oracle, params, os_.steps, rng, start);
        bool prev_eq = false;
        for (std::size_t k = 0; k < traj.size(); ++k) {
          const bool eq = oracle.is_equilibrium(traj[k], params.eps, params.mode);
          if (prev_eq && !eq) ++departures;
          prev_eq = eq;
          if (!os_.out.empty())
            csv << r << ',' << k << ',' << traj[k] << ',' << (eq ? 1 : 0)
                << "\n";
        }
        if (prev_eq) ++absorbed;
      }
      std::cout << "absorbed: " << absorbed << " / " << os_.trials << "\n"
                << "departures: " << departures << "\n";
      if (!os_.out.empty()) symga::write_text_file(os_.out, csv.str());
    });
  }

  // ---- simulate --------------------------------------------------------
  struct {
    std::string game, config, out, freq_out, objective;
    int m = 0, phases = -1, trials = 0, eval_stride = -1, threads = -1;
    long phase_len = 0;
    double eps = -1.0, rho = -1.0, e = -1.0, eta = -1.0, delta = -1.0;
    double alpha_const = 0.0;
    std::uint64_t seed = 0;
    bool auto_delta = false, seed_given = false;
  } si;
  {
    auto* cmd = app.add_subcommand(
        "simulate", "Run the learning experiment and write result CSVs");
    cmd->add_option("--game", si.game, "Game JSON file")->required();
    cmd->add_option("--config", si.config, "Experiment config JSON");
    cmd->add_option("--out", si.out, "Per-phase results CSV")->required();
    cmd->add_option("--freq-out", si.freq_out,
                    "Frequency curve CSV (default: freq.csv next to --out)");
    auto* grid_opt = cmd->add_option("--grid", si.m, "Quantization resolution");
    auto* eps_opt = cmd->add_option("--eps", si.eps, "Equilibrium slack");
    auto* phases_opt = cmd->add_option("--phases", si.phases, "Learning phases");
    auto* plen_opt =
        cmd->add_option("--phase-len", si.phase_len, "Stages per phase");
    auto* trials_opt = cmd->add_option("--trials", si.trials, "Trial count");
    auto* seed_opt = cmd->add_option("--seed", si.seed, "Master seed");
    auto* rho_opt = cmd->add_option("--rho", si.rho, "Exploration weight");
    auto* e_opt = cmd->add_option("--e", si.e, "Uniform-draw probability");
    auto* eta_opt = cmd->add_option("--eta", si.eta, "Revision step size");
    auto* delta_opt =
        cmd->add_option("--delta", si.delta, "Satisfaction slack delta");
    auto* ad_flag = cmd->add_flag("--auto-delta", si.auto_delta,
                                  "Use half the computed bar-delta as delta");
    auto* stride_opt = cmd->add_option("--eval-stride", si.eval_stride,
                                       "Equilibrium check stride (0 = off)");
    auto* threads_opt =
        cmd->add_option("--threads", si.threads, "Trial workers (0 = auto)");
    auto* obj_opt = cmd->add_option("--objective", si.objective,
                                    "Greedy direction")
                        ->check(CLI::IsMember({"min", "max"}));
    auto* ac_opt = cmd->add_option("--alpha-const", si.alpha_const,
                                   "Constant step size instead of 1/(n+1)");
    cmd->callback([&] {
      symga::ExperimentConfig cfg;
      bool config_has_seed = false;
      if (!si.config.empty()) {
        const json raw = symga::load_json_file(si.config);
        cfg = symga::config_from_json(raw);
        config_has_seed = raw.contains("seed");
      }
      if (*grid_opt) cfg.grid_m = si.m;
      if (*eps_opt) cfg.eps = si.eps;
      if (*phases_opt) cfg.num_phases = si.phases;
      if (*plen_opt) {
        cfg.phase_len = si.phase_len;
        cfg.phase_lengths.clear();
      }
      if (*trials_opt) cfg.num_trials = si.trials;
      if (*seed_opt) cfg.master_seed = si.seed;
      if (*rho_opt) {
        cfg.shared.rho = si.rho;
        cfg.rho_per_player.clear();
      }
      if (*e_opt) cfg.shared.e = si.e;
      if (*eta_opt) cfg.shared.eta = si.eta;
      if (*delta_opt) {
        cfg.shared.delta = si.delta;
        cfg.delta_per_player.clear();
        cfg.auto_delta = false;
      }
      if (*ad_flag) cfg.auto_delta = true;
      if (*stride_opt) cfg.eval_stride = si.eval_stride;
      if (*threads_opt) cfg.threads = si.threads;
      if (*obj_opt)
        cfg.shared.objective = si.objective == "max" ? symga::Objective::Max
                                                     : symga::Objective::Min;
      if (*ac_opt) cfg.shared.alpha = symga::StepSize::constant(si.alpha_const);
      if (!*seed_opt && !config_has_seed)
        throw CLI::RequiredError("--seed (or a 'seed' config entry)");
      cfg.validate();

      const auto g = symga::load_game(si.game);
      if (!symga::check_symmetry(g).is_symmetric)
        std::cerr << "warning: game is not symmetric; convergence guarantees "
                     "do not apply\n";

      const auto results = symga::run_experiment(g, cfg);
      const auto curve =
          symga::aggregate_trials({results.data(), results.size()});

      const std::string freq_path =
          si.freq_out.empty() ? default_freq_path(si.out) : si.freq_out;
      const std::string sidecar = si.out + ".config.json";
      symga::write_results_csv(si.out, {results.data(), results.size()},
                               g.num_players());
      symga::write_frequency_csv(freq_path, curve);
      symga::write_text_file(sidecar, symga::config_to_json(cfg).dump(2) + "\n");

      std::cout << "trials: " << cfg.num_trials
                << ", phases: " << cfg.num_phases << "\n";
      if (!curve.mean.empty())
        std::cout << "final_frequency: " << g17(curve.mean.back()) << "\n";
      std::cout << "wrote: " << si.out << ", " << freq_path << ", " << sidecar
                << "\n";
    });
  }

  // ---- aggregate -------------------------------------------------------
  struct {
    std::string in, out;
  } ag;
  {
    auto* cmd = app.add_subcommand(
        "aggregate", "Recompute the frequency curve from a results CSV");
    cmd->add_option("--in", ag.in, "Results CSV from simulate")->required();
    cmd->add_option("--out", ag.out, "Frequency curve CSV")->required();
    cmd->callback([&] {
      const auto results = symga::read_results_csv(ag.in);
      const auto curve =
          symga::aggregate_trials({results.data(), results.size()});
      symga::write_frequency_csv(ag.out, curve);
      std::cout << "trials: " << results.size()
                << ", points: " << curve.phases.size() << "\n"
                << "wrote: " << ag.out << "\n";
    });
  }

  // ---- recursion-check -------------------------------------------------
  struct {
    double u = 0.0, p = 0.0, y0 = 0.0;
    long k = 0;
  } rc;
  {
    auto* cmd = app.add_subcommand(
        "recursion-check", "Iterate y <- u*y + p*(1-y) and report the limit");
    cmd->add_option("--u", rc.u, "Stay weight, p < u < 1")->required();
    cmd->add_option("--p", rc.p, "Entry weight, 0 < p")->required();
    cmd->add_option("--k", rc.k, "Iteration count")->required();
    cmd->add_option("--y0", rc.y0, "Initial value in [0, 1]");
    cmd->callback([&] {
      std::cout << "y_k: " << g17(symga::recursion_oracle(rc.u, rc.p, rc.y0, rc.k))
                << "\n"
                << "fixed_point: " << g17(symga::recursion_fixed_point(rc.u, rc.p))
                << "\n";
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const symga::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
