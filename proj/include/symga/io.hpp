#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "symga/errors.hpp"
#include "symga/game.hpp"
#include "symga/orchestrator.hpp"
#include "symga/policy.hpp"
#include "symga/quantizer.hpp"
#include "symga/revision.hpp"

namespace symga {

using nlohmann::json;

/// Doubles in CSV output carry 17 significant digits, enough to round-trip
/// IEEE 754 binary64 exactly.
inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------------------
// Game files
// ---------------------------------------------------------------------------

/// Parses the on-disk game format:
///   cost[player][state][joint_action], kernel[state][joint_action][next],
/// joint actions indexed row-major in player order. Validates on return.
inline ValidatedGame game_from_json(const json& j) {
  try {
    GameSpec spec;
    spec.num_players = j.at("num_players").get<int>();
    spec.num_states = j.at("num_states").get<int>();
    spec.num_actions = j.at("num_actions").get<std::vector<int>>();
    spec.discount = j.at("discount").get<std::vector<double>>();
    spec.initial_dist = j.at("initial_dist").get<std::vector<double>>();

    const auto& cost = j.at("cost");
    for (const auto& per_player : cost) {
      for (const auto& per_state : per_player) {
        for (const auto& v : per_state)
          spec.cost.push_back(v.get<double>());
      }
    }
    const auto& kernel = j.at("kernel");
    for (const auto& per_state : kernel) {
      for (const auto& per_action : per_state) {
        for (const auto& v : per_action)
          spec.kernel.push_back(v.get<double>());
      }
    }
    return validate_game(std::move(spec));
  } catch (const json::exception& e) {
    throw ParseError(std::string("game file: ") + e.what());
  }
}

inline ValidatedGame load_game(const std::string& path) {
  return game_from_json(load_json_file(path));
}

inline json game_to_json(const ValidatedGame& g) {
  json j;
  j["num_players"] = g.num_players();
  j["num_states"] = g.num_states();
  j["num_actions"] = g.action_counts();
  j["discount"] = g.spec().discount;
  j["initial_dist"] = g.spec().initial_dist;
  json cost = json::array();
  for (int i = 0; i < g.num_players(); ++i) {
    json per_player = json::array();
    for (int x = 0; x < g.num_states(); ++x) {
      json per_state = json::array();
      for (int ja = 0; ja < g.num_joint_actions(); ++ja)
        per_state.push_back(g.cost(i, x, ja));
      per_player.push_back(std::move(per_state));
    }
    cost.push_back(std::move(per_player));
  }
  j["cost"] = std::move(cost);
  json kernel = json::array();
  for (int x = 0; x < g.num_states(); ++x) {
    json per_state = json::array();
    for (int ja = 0; ja < g.num_joint_actions(); ++ja) {
      auto row = g.kernel(x, ja);
      per_state.push_back(std::vector<double>(row.begin(), row.end()));
    }
    kernel.push_back(std::move(per_state));
  }
  j["kernel"] = std::move(kernel);
  return j;
}

// ---------------------------------------------------------------------------
// Policies and paths
// ---------------------------------------------------------------------------

inline json policy_to_json(const StationaryPolicy& pi) {
  json rows = json::array();
  for (int x = 0; x < pi.num_states; ++x) {
    auto r = pi.row(x);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

inline StationaryPolicy policy_from_json(const json& j) {
  try {
    StationaryPolicy pi;
    pi.num_states = static_cast<int>(j.size());
    if (pi.num_states == 0) throw ParseError("policy has no states");
    pi.num_actions = static_cast<int>(j.at(0).size());
    for (const auto& row : j) {
      if (static_cast<int>(row.size()) != pi.num_actions)
        throw ParseError("policy rows have inconsistent lengths");
      for (const auto& v : row) pi.rows.push_back(v.get<double>());
    }
    validate_policy(pi);
    return pi;
  } catch (const json::exception& e) {
    throw ParseError(std::string("policy: ") + e.what());
  }
}

inline json joint_policy_to_json(const JointPolicy& jp) {
  json players = json::array();
  for (const auto& pi : jp.players) players.push_back(policy_to_json(pi));
  return players;
}

inline json revision_path_to_json(const ConstructedPath& built) {
  const RevisionPath& path = built.path;
  json j;
  j["eps"] = path.eps;
  json steps = json::array();
  for (const auto& jp : path.steps) steps.push_back(joint_policy_to_json(jp));
  j["steps"] = std::move(steps);
  j["certificates"] = path.certificates;
  if (!built.step_indices_flat.empty()) {
    const int N = path.steps.front().num_players();
    json idx = json::array();
    for (std::size_t k = 0; k < path.steps.size(); ++k) {
      json per_step = json::array();
      for (int i = 0; i < N; ++i)
        per_step.push_back(built.step_indices_flat[k * N + i]);
      idx.push_back(std::move(per_step));
    }
    j["policy_indices"] = std::move(idx);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

/// Parses an experiment configuration, applying documented defaults:
/// rho 0.05, e 0.1, eta 0.2, harmonic step sizes, objective "min",
/// eval_stride 1. Unknown keys are rejected so typos cannot silently turn
/// into defaults. Field values are range-checked here and again by
/// ExperimentConfig::validate().
inline ExperimentConfig config_from_json(const json& j) {
  static const char* known[] = {
      "grid_m", "eps", "phases", "phase_len", "phase_lengths", "trials",
      "seed", "rho", "e", "eta", "delta", "auto_delta", "alpha", "objective",
      "eval_stride", "enumeration_cap", "threads"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ParseError("config: unknown key '" + it.key() + "'");
  }

  ExperimentConfig cfg;
  try {
    if (j.contains("grid_m")) cfg.grid_m = j.at("grid_m").get<int>();
    if (j.contains("eps")) cfg.eps = j.at("eps").get<double>();
    if (j.contains("phases")) cfg.num_phases = j.at("phases").get<int>();
    if (j.contains("phase_len")) cfg.phase_len = j.at("phase_len").get<long>();
    if (j.contains("phase_lengths"))
      cfg.phase_lengths = j.at("phase_lengths").get<std::vector<long>>();
    if (j.contains("trials")) cfg.num_trials = j.at("trials").get<int>();
    if (j.contains("seed")) cfg.master_seed = j.at("seed").get<std::uint64_t>();

    if (j.contains("rho")) {
      if (j.at("rho").is_array())
        cfg.rho_per_player = j.at("rho").get<std::vector<double>>();
      else
        cfg.shared.rho = j.at("rho").get<double>();
    }
    if (j.contains("e")) cfg.shared.e = j.at("e").get<double>();
    if (j.contains("eta")) cfg.shared.eta = j.at("eta").get<double>();
    if (j.contains("delta")) {
      if (j.at("delta").is_array())
        cfg.delta_per_player = j.at("delta").get<std::vector<double>>();
      else
        cfg.shared.delta = j.at("delta").get<double>();
    }
    if (j.contains("auto_delta")) cfg.auto_delta = j.at("auto_delta").get<bool>();

    if (j.contains("alpha")) {
      const auto& a = j.at("alpha");
      if (a.is_string()) {
        if (a.get<std::string>() != "one_over_n_plus_one")
          throw RangeError("alpha", "unknown schedule name");
        cfg.shared.alpha = StepSize::harmonic();
      } else if (a.is_object() && a.contains("constant")) {
        const double c = a.at("constant").get<double>();
        if (!(c > 0.0 && c <= 1.0))
          throw RangeError("alpha", "constant step must lie in (0, 1]");
        cfg.shared.alpha = StepSize::constant(c);
      } else {
        throw RangeError("alpha", "expected a schedule name or {\"constant\": c}");
      }
    }
    if (j.contains("objective")) {
      const std::string o = j.at("objective").get<std::string>();
      if (o == "min")
        cfg.shared.objective = Objective::Min;
      else if (o == "max")
        cfg.shared.objective = Objective::Max;
      else
        throw RangeError("objective", "must be 'min' or 'max'");
    }
    if (j.contains("eval_stride"))
      cfg.eval_stride = j.at("eval_stride").get<int>();
    if (j.contains("enumeration_cap"))
      cfg.enumeration_cap = j.at("enumeration_cap").get<std::uint64_t>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  return config_from_json(load_json_file(path));
}

/// Normalized echo of the configuration actually in force (defaults filled,
/// overrides applied). Written next to result files for reproducibility.
inline json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["grid_m"] = cfg.grid_m;
  j["eps"] = cfg.eps;
  j["phases"] = cfg.num_phases;
  if (cfg.phase_lengths.empty())
    j["phase_len"] = cfg.phase_len;
  else
    j["phase_lengths"] = cfg.phase_lengths;
  j["trials"] = cfg.num_trials;
  j["seed"] = cfg.master_seed;
  if (cfg.rho_per_player.empty())
    j["rho"] = cfg.shared.rho;
  else
    j["rho"] = cfg.rho_per_player;
  j["e"] = cfg.shared.e;
  j["eta"] = cfg.shared.eta;
  if (cfg.auto_delta)
    j["auto_delta"] = true;
  else if (cfg.delta_per_player.empty())
    j["delta"] = cfg.shared.delta;
  else
    j["delta"] = cfg.delta_per_player;
  j["alpha"] = cfg.shared.alpha.is_harmonic()
                   ? json("one_over_n_plus_one")
                   : json{{"constant", cfg.shared.alpha.constant_value()}};
  j["objective"] = cfg.shared.objective == Objective::Min ? "min" : "max";
  j["eval_stride"] = cfg.eval_stride;
  j["enumeration_cap"] = cfg.enumeration_cap;
  j["threads"] = cfg.threads;
  return j;
}

// ---------------------------------------------------------------------------
// CSV results
// ---------------------------------------------------------------------------

/// Writes the per-phase trial logs:
///   trial,phase,is_eq,satisfied_bitmask,policy_id_0,...,policy_id_{N-1}
/// is_eq is 1/0, or -1 for phases the offline check skipped.
inline void write_results_csv(const std::string& path,
                              std::span<const TrialResult> results,
                              int num_players) {
  std::ostringstream out;
  out << "trial,phase,is_eq,satisfied_bitmask";
  for (int i = 0; i < num_players; ++i) out << ",policy_id_" << i;
  out << "\n";
  for (const auto& r : results) {
    for (const auto& ph : r.phases) {
      out << r.trial << ',' << ph.phase << ',' << ph.is_equilibrium << ','
          << ph.satisfied_mask;
      for (int i = 0; i < num_players; ++i) out << ',' << ph.policies[i];
      out << "\n";
    }
  }
  write_text_file(path, out.str());
}

/// Reads a results CSV back into trial logs (inverse of write_results_csv,
/// minus the learner internals). Rows must be grouped by trial.
inline std::vector<TrialResult> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 5 || header[0] != "trial" || header[1] != "phase" ||
      header[2] != "is_eq" || header[3] != "satisfied_bitmask")
    throw ParseError(path + ": unexpected header");
  const int num_players = static_cast<int>(header.size()) - 4;

  std::vector<TrialResult> results;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size())
      throw ParseError(path + ": wrong column count on line " +
                       std::to_string(line_no));
    try {
      PhaseLog ph;
      const int trial = std::stoi(cells[0]);
      ph.phase = std::stoi(cells[1]);
      ph.is_equilibrium = std::stoi(cells[2]);
      ph.satisfied_mask = static_cast<std::uint32_t>(std::stoul(cells[3]));
      for (int i = 0; i < num_players; ++i)
        ph.policies.push_back(std::stoull(cells[4 + i]));
      if (results.empty() || results.back().trial != trial) {
        TrialResult r;
        r.trial = trial;
        results.push_back(std::move(r));
      }
      results.back().phases.push_back(std::move(ph));
    } catch (const std::exception&) {
      throw ParseError(path + ": bad value on line " + std::to_string(line_no));
    }
  }
  return results;
}

/// Writes the aggregated curve: phase,mean,stderr (17 significant digits).
inline void write_frequency_csv(const std::string& path,
                                const FrequencyCurve& curve) {
  std::ostringstream out;
  out << "phase,mean,stderr\n";
  for (std::size_t k = 0; k < curve.phases.size(); ++k)
    out << curve.phases[k] << ',' << format_g17(curve.mean[k]) << ','
        << format_g17(curve.stderr_[k]) << "\n";
  write_text_file(path, out.str());
}

}  // namespace symga
