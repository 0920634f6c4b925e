// Copyright 2026 The DECOR Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "decor/accountant.hpp"
#include "decor/engine.hpp"
#include "decor/error.hpp"
#include "decor/graph.hpp"
#include "decor/problems.hpp"
#include "decor/sweep.hpp"

// The `decor` command line: account, calibrate, train and sweep. Every
// subcommand reads an optional JSON run config; flags override its keys.
//
// Run config keys (all optional):
//   topology    "ring" | "grid:16" | "edges:<path>" | [ ...several, sweep only ]
//   n           users (16)
//   weights     "metropolis" | "uniform"
//   problem     {kind: "least_squares" | "logistic", dim, seed, path, lambda}
//   algorithm   "decor" | "cdp" | "ldp"
//   steps, delta, clip, seed, batch_size, init_scale, adversary, output
//   epsilon     target (epsilon, delta) budget      } exactly one of
//   noise       {sigma_cdp, sigma_cor}              } these two
//   calibration {mode: "search" | "closed-form", sigma_cdp, sigma_cdp_points}
//   stepsize    {mode: "constant" | "pl" | "nonconvex", eta, mu, L, p, P, M,
//                loss_gap, sigma_star_sq}
//   sweep       {algorithms, epsilons, seeds, etas, clips, sigma_cdp_points}
namespace decor::cli {

using Json = nlohmann::json;

struct ProblemSpec {
  std::string kind = "least_squares";
  std::size_t dim = 10;
  std::uint64_t seed = 0;
  std::string path;
  double lambda = 1e-3;
};

struct StepsizeSpec {
  std::string mode = "constant";
  double eta = 0.01;
  std::optional<double> mu, L, p, P, M, loss_gap, sigma_star_sq;
};

struct CalibrationSpec {
  std::string mode = "search";
  std::optional<double> sigma_cdp;
  std::size_t sigma_cdp_points = 8;
};

struct RunConfig {
  std::vector<std::string> topologies{"ring"};
  std::size_t n = 16;
  std::string weights = "metropolis";
  ProblemSpec problem;
  Algorithm algorithm = Algorithm::kDecor;
  std::size_t steps = 1000;
  double delta = 1e-5;
  std::optional<double> epsilon;
  std::optional<NoiseConfig> noise;
  double clip = 1.0;
  CalibrationSpec calibration;
  StepsizeSpec stepsize;
  AdversaryModel adversary = AdversaryModel::eavesdropper();
  std::uint64_t seed = 0;
  std::size_t batch_size = 1;
  double init_scale = 1.0;
  std::string output;
  SweepGrid sweep;
  bool sweep_epsilons_set = false;
  bool sweep_etas_set = false;
  bool sweep_clips_set = false;
};

namespace internal {

[[noreturn]] inline void bad_config(const std::string& what) {
  throw Error(ErrorCode::kInvalidConfig, what);
}

inline void check_keys(const Json& j, const std::string& where,
                       std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) bad_config(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      bad_config("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <typename T>
T read(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    bad_config("bad value for '" + std::string(key) + "' in " + where);
  }
}

template <typename T>
void read_into(const Json& j, const char* key, T& out, const std::string& where = "config") {
  if (j.contains(key)) out = read<T>(j, key, where);
}

template <typename T>
void read_into(const Json& j, const char* key, std::optional<T>& out,
               const std::string& where = "config") {
  if (j.contains(key)) out = read<T>(j, key, where);
}

inline std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || path == "-" || base_dir.empty() || std::filesystem::path(path).is_absolute()) {
    return path;
  }
  return (std::filesystem::path(base_dir) / path).string();
}

}  // namespace internal

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, "config '" + path + "': " + e.what());
  }
}

// Relative paths inside the config resolve against base_dir.
inline RunConfig parse_run_config(const Json& j, const std::string& base_dir = "") {
  using internal::read_into;
  internal::check_keys(j, "config",
                       {"topology", "n", "weights", "problem", "algorithm", "steps", "delta",
                        "epsilon", "noise", "clip", "calibration", "stepsize", "adversary", "seed",
                        "batch_size", "init_scale", "output", "sweep"});
  RunConfig rc;
  if (j.contains("topology")) {
    const Json& t = j["topology"];
    if (t.is_string()) {
      rc.topologies = {t.get<std::string>()};
    } else if (t.is_array() && !t.empty() &&
               std::all_of(t.begin(), t.end(), [](const Json& x) { return x.is_string(); })) {
      rc.topologies = t.get<std::vector<std::string>>();
    } else {
      internal::bad_config("topology must be a string or a non-empty list of strings");
    }
    for (std::string& spec : rc.topologies) {
      for (const char* prefix : {"edges:", "file:"}) {
        if (spec.rfind(prefix, 0) == 0) {
          const std::size_t cut = std::string(prefix).size();
          spec = prefix + internal::resolve(spec.substr(cut), base_dir);
        }
      }
    }
  }
  read_into(j, "n", rc.n);
  read_into(j, "weights", rc.weights);
  if (rc.weights != "metropolis" && rc.weights != "uniform") {
    internal::bad_config("weights must be 'metropolis' or 'uniform'");
  }
  if (j.contains("problem")) {
    const Json& p = j["problem"];
    internal::check_keys(p, "problem", {"kind", "dim", "seed", "path", "lambda"});
    read_into(p, "kind", rc.problem.kind, "problem");
    read_into(p, "dim", rc.problem.dim, "problem");
    read_into(p, "seed", rc.problem.seed, "problem");
    read_into(p, "path", rc.problem.path, "problem");
    read_into(p, "lambda", rc.problem.lambda, "problem");
    rc.problem.path = internal::resolve(rc.problem.path, base_dir);
    if (rc.problem.kind == "logistic" && !p.contains("dim")) rc.problem.dim = 0;
  }
  if (j.contains("algorithm")) {
    rc.algorithm = parse_algorithm(internal::read<std::string>(j, "algorithm", "config"));
  }
  read_into(j, "steps", rc.steps);
  read_into(j, "delta", rc.delta);
  read_into(j, "epsilon", rc.epsilon);
  read_into(j, "clip", rc.clip);
  if (j.contains("noise")) {
    const Json& nz = j["noise"];
    internal::check_keys(nz, "noise", {"sigma_cdp", "sigma_cor"});
    NoiseConfig noise;
    read_into(nz, "sigma_cdp", noise.sigma_cdp, "noise");
    read_into(nz, "sigma_cor", noise.sigma_cor, "noise");
    rc.noise = noise;
  }
  if (rc.epsilon && rc.noise) internal::bad_config("give either 'epsilon' or 'noise', not both");
  if (j.contains("calibration")) {
    const Json& c = j["calibration"];
    internal::check_keys(c, "calibration", {"mode", "sigma_cdp", "sigma_cdp_points"});
    read_into(c, "mode", rc.calibration.mode, "calibration");
    read_into(c, "sigma_cdp", rc.calibration.sigma_cdp, "calibration");
    read_into(c, "sigma_cdp_points", rc.calibration.sigma_cdp_points, "calibration");
    if (rc.calibration.mode != "search" && rc.calibration.mode != "closed-form") {
      internal::bad_config("calibration mode must be 'search' or 'closed-form'");
    }
  }
  if (j.contains("stepsize")) {
    const Json& s = j["stepsize"];
    internal::check_keys(s, "stepsize",
                         {"mode", "eta", "mu", "L", "p", "P", "M", "loss_gap", "sigma_star_sq"});
    StepsizeSpec& ss = rc.stepsize;
    read_into(s, "mode", ss.mode, "stepsize");
    read_into(s, "eta", ss.eta, "stepsize");
    read_into(s, "mu", ss.mu, "stepsize");
    read_into(s, "L", ss.L, "stepsize");
    read_into(s, "p", ss.p, "stepsize");
    read_into(s, "P", ss.P, "stepsize");
    read_into(s, "M", ss.M, "stepsize");
    read_into(s, "loss_gap", ss.loss_gap, "stepsize");
    read_into(s, "sigma_star_sq", ss.sigma_star_sq, "stepsize");
    if (ss.mode != "constant" && ss.mode != "pl" && ss.mode != "nonconvex") {
      internal::bad_config("stepsize mode must be 'constant', 'pl' or 'nonconvex'");
    }
  }
  if (j.contains("adversary")) {
    rc.adversary = AdversaryModel::parse(internal::read<std::string>(j, "adversary", "config"));
  }
  read_into(j, "seed", rc.seed);
  read_into(j, "batch_size", rc.batch_size);
  read_into(j, "init_scale", rc.init_scale);
  read_into(j, "output", rc.output);
  rc.output = internal::resolve(rc.output, base_dir);
  rc.sweep.etas = {rc.stepsize.eta};
  rc.sweep.clips = {rc.clip};
  if (rc.epsilon) rc.sweep.epsilons = {*rc.epsilon};
  if (j.contains("sweep")) {
    const Json& s = j["sweep"];
    internal::check_keys(s, "sweep",
                         {"algorithms", "epsilons", "seeds", "etas", "clips", "sigma_cdp_points"});
    if (s.contains("algorithms")) {
      rc.sweep.algorithms.clear();
      for (const auto& name : internal::read<std::vector<std::string>>(s, "algorithms", "sweep")) {
        rc.sweep.algorithms.push_back(parse_algorithm(name));
      }
    }
    rc.sweep_epsilons_set = s.contains("epsilons");
    rc.sweep_etas_set = s.contains("etas");
    rc.sweep_clips_set = s.contains("clips");
    read_into(s, "epsilons", rc.sweep.epsilons, "sweep");
    read_into(s, "seeds", rc.sweep.seeds, "sweep");
    read_into(s, "etas", rc.sweep.etas, "sweep");
    read_into(s, "clips", rc.sweep.clips, "sweep");
    read_into(s, "sigma_cdp_points", rc.sweep.sigma_cdp_points, "sweep");
    if (rc.epsilon && rc.sweep_epsilons_set) {
      internal::bad_config("give either 'epsilon' or 'sweep.epsilons', not both");
    }
  }
  if (rc.noise && rc.sweep_epsilons_set) {
    internal::bad_config("give either 'noise' or 'sweep.epsilons', not both");
  }
  if (rc.n == 0) throw Error(ErrorCode::kInvalidSize, "n must be >= 1");
  if (rc.steps == 0) internal::bad_config("steps must be >= 1");
  if (!(rc.clip > 0.0)) internal::bad_config("clip must be positive");
  if (rc.noise) rc.noise->clip = rc.clip;
  return rc;
}

// ---------------------------------------------------------------------------
// Building blocks shared by the subcommands

inline const std::string& single_topology(const RunConfig& rc) {
  if (rc.topologies.size() != 1) internal::bad_config("this command takes exactly one topology");
  return rc.topologies.front();
}

inline Graph build_graph(const std::string& spec, const RunConfig& rc) {
  return parse_topology_spec(spec, rc.n);
}

inline MixingMatrix build_weights(const Graph& g, const RunConfig& rc) {
  if (rc.weights == "metropolis") return metropolis_weights(g);
  MixingMatrix w = MixingMatrix::uniform(g.size());
  if (!w.supported_on(g)) {
    throw Error(ErrorCode::kInvalidMixingMatrix, "uniform weights need a complete graph");
  }
  return w;
}

inline std::unique_ptr<Problem> build_problem(const RunConfig& rc, std::size_t n) {
  const ProblemSpec& p = rc.problem;
  if (p.kind == "least_squares") {
    if (p.dim == 0) throw Error(ErrorCode::kInvalidSize, "problem dim must be >= 1");
    return synthetic_least_squares(n, p.dim, p.seed);
  }
  if (p.kind == "logistic") {
    if (p.path.empty()) internal::bad_config("logistic problem needs 'path'");
    std::ifstream in(p.path);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open dataset '" + p.path + "'");
    return logistic_problem(parse_libsvm(in, p.dim), p.lambda, n, p.seed);
  }
  internal::bad_config("unknown problem kind '" + p.kind + "'");
}

// The library reports q >= n - 1 as an invalid collusion level; at the
// command line that case reads as a graph too small to hide anyone.
inline void check_adversary_fits(const Graph& g, const AdversaryModel& adv) {
  if (g.size() >= 2 && adv.q + 1 >= g.size()) {
    throw Error(ErrorCode::kGraphNotSufficientlyConnected,
                "removing " + std::to_string(adv.q) + " of " + std::to_string(g.size()) +
                    " users leaves fewer than two honest users");
  }
}

// Per-algorithm noise for an epsilon target at clip C.
inline NoiseConfig calibrated_noise(Algorithm alg, const Graph& g, const RunConfig& rc) {
  const double eps = *rc.epsilon;
  const double eps_step = step_budget_for(eps, rc.steps, rc.delta);
  const double c = rc.clip;
  switch (alg) {
    case Algorithm::kCdpBaseline: return {cdp_sigma(g.size(), c, eps_step), 0.0, c};
    case Algorithm::kLdpBaseline: return {ldp_sigma(c, eps_step), 0.0, c};
    case Algorithm::kDecor: break;
  }
  check_adversary_fits(g, rc.adversary);
  if (rc.calibration.mode == "closed-form") {
    return calibrate_closed_form(c, rc.steps, eps, rc.delta, g, rc.adversary).noise;
  }
  if (rc.calibration.sigma_cdp) {
    const double s = *rc.calibration.sigma_cdp;
    return {s, calibrate_binary_search(g, s, c, eps_step, rc.adversary), c};
  }
  // Lowest-sigma_cdp feasible couple; noise scales linearly with C.
  auto couples = decor_noise_couples(g, rc.adversary, eps_step, rc.calibration.sigma_cdp_points);
  if (couples.empty()) {
    throw Error(ErrorCode::kUnreachableTarget, "no feasible (sigma_cdp, sigma_cor) couple");
  }
  return {couples.front().sigma_cdp * c, couples.front().sigma_cor * c, c};
}

inline StepsizeSchedule build_schedule(const RunConfig& rc, const Problem& problem,
                                       const MixingMatrix& w, const TrainConfig& cfg) {
  const StepsizeSpec& ss = rc.stepsize;
  if (ss.mode == "constant") return StepsizeSchedule::constant(ss.eta);
  const ProblemConstants pc = problem.constants();
  auto pick = [](const std::optional<double>& given, const std::optional<double>& known,
                 const char* name) {
    if (given) return *given;
    if (known) return *known;
    throw Error(ErrorCode::kInvalidConstants,
                std::string("stepsize schedule needs '") + name + "' for this problem");
  };
  ScheduleConstants k;
  k.L = pick(ss.L, pc.smoothness, "L");
  k.p = ss.p ? *ss.p : spectral_gap(w);
  k.P = pick(ss.P, pc.heterogeneity_p, "P");
  k.M = pick(ss.M, pc.noise_m, "M");
  k.n = problem.num_users();
  if (ss.mode == "pl") {
    k.mu = pick(ss.mu, pc.pl_constant, "mu");
    return StepsizeSchedule::pl(k);
  }
  k.mu = ss.mu ? *ss.mu : pc.pl_constant.value_or(0.0);
  double gap = 0.0;
  if (ss.loss_gap) {
    gap = *ss.loss_gap;
  } else {
    // F(x0) - inf F, with inf F >= 0 for nonnegative losses.
    const double start = problem.loss(initial_model(cfg, problem.dim()));
    gap = start - problem.optimal_value().value_or(0.0);
  }
  const double sigma_star_sq = pick(ss.sigma_star_sq, pc.sigma_star_sq, "sigma_star_sq");
  return StepsizeSchedule::nonconvex(k, gap, rc.steps, sigma_star_sq,
                                     effective_noise(cfg).sigma_cdp, problem.dim());
}

// CSV goes to rc.output when set, else to `out`.
template <typename Writer>
void emit_csv(const RunConfig& rc, std::ostream& out, Writer&& write) {
  if (rc.output.empty() || rc.output == "-") {
    write(out);
    return;
  }
  std::ofstream file(rc.output);
  if (!file) throw Error(ErrorCode::kIoError, "cannot write '" + rc.output + "'");
  write(file);
  if (!file) throw Error(ErrorCode::kIoError, "failed writing '" + rc.output + "'");
}

// ---------------------------------------------------------------------------
// Subcommands

inline Json cmd_account(const RunConfig& rc) {
  if (!rc.noise) internal::bad_config("account needs 'noise' (sigma_cdp, sigma_cor)");
  const std::string& spec = single_topology(rc);
  Graph g = build_graph(spec, rc);
  check_adversary_fits(g, rc.adversary);
  const PrivacyReport report = account(g, *rc.noise, rc.adversary, rc.steps, rc.delta);
  Json out;
  out["topology"] = spec;
  out["n"] = g.size();
  out["adversary"] = rc.adversary.name();
  out["sigma_cdp"] = rc.noise->sigma_cdp;
  out["sigma_cor"] = rc.noise->sigma_cor;
  out["clip"] = rc.noise->clip;
  out["steps"] = rc.steps;
  out["delta"] = rc.delta;
  out["step_rdp"] = report.step_rdp_coefficient;
  out["bound_rdp"] = step_epsilon_bound(g, *rc.noise, rc.adversary);
  out["epsilon_dp"] = report.epsilon_dp;
  return out;
}

inline Json cmd_calibrate(const RunConfig& rc) {
  if (!rc.epsilon) internal::bad_config("calibrate needs 'epsilon'");
  const std::string& spec = single_topology(rc);
  Graph g = build_graph(spec, rc);
  check_adversary_fits(g, rc.adversary);
  Json out;
  out["topology"] = spec;
  out["n"] = g.size();
  out["adversary"] = rc.adversary.name();
  out["mode"] = rc.calibration.mode;
  out["steps"] = rc.steps;
  out["delta"] = rc.delta;
  out["target_epsilon"] = *rc.epsilon;
  NoiseConfig noise;
  if (rc.calibration.mode == "closed-form") {
    noise = calibrate_closed_form(rc.clip, rc.steps, *rc.epsilon, rc.delta, g, rc.adversary).noise;
  } else {
    if (!rc.calibration.sigma_cdp) internal::bad_config("search mode needs --sigma-cdp");
    const double eps_step = step_budget_for(*rc.epsilon, rc.steps, rc.delta);
    noise = {*rc.calibration.sigma_cdp,
             calibrate_binary_search(g, *rc.calibration.sigma_cdp, rc.clip, eps_step, rc.adversary),
             rc.clip};
  }
  const double step = step_epsilon_exact(g, noise, rc.adversary);
  out["sigma_cdp"] = noise.sigma_cdp;
  out["sigma_cor"] = noise.sigma_cor;
  out["clip"] = noise.clip;
  out["step_rdp"] = step;
  out["achieved_epsilon"] = compose_and_convert(step, rc.steps, rc.delta);
  return out;
}

inline MetricsTrace cmd_train(const RunConfig& rc) {
  if (rc.epsilon.has_value() == rc.noise.has_value()) {
    internal::bad_config("train needs exactly one of 'epsilon' and 'noise'");
  }
  Graph g = build_graph(single_topology(rc), rc);
  MixingMatrix w = build_weights(g, rc);
  auto problem = build_problem(rc, g.size());
  TrainConfig cfg;
  cfg.algorithm = rc.algorithm;
  cfg.steps = rc.steps;
  cfg.noise = rc.noise ? *rc.noise : calibrated_noise(rc.algorithm, g, rc);
  cfg.master_seed = rc.seed;
  cfg.batch_size = rc.batch_size;
  cfg.init_scale = rc.init_scale;
  cfg.stepsize = build_schedule(rc, *problem, w, cfg);
  return run(*problem, g, w, cfg);
}

inline std::vector<SweepRow> cmd_sweep(const RunConfig& rc) {
  if (rc.stepsize.mode != "constant") {
    internal::bad_config("sweeps tune constant stepsizes; use sweep.etas");
  }
  std::vector<SweepRow> rows;
  for (const std::string& spec_text : rc.topologies) {
    SweepSpec spec;
    spec.topology_name = spec_text;
    spec.graph = build_graph(spec_text, rc);
    spec.weights = build_weights(spec.graph, rc);
    spec.adversary = rc.adversary;
    spec.steps = rc.steps;
    spec.delta = rc.delta;
    spec.grid = rc.sweep;
    spec.explicit_noise = rc.noise;
    spec.base.batch_size = rc.batch_size;
    spec.base.init_scale = rc.init_scale;
    auto problem = build_problem(rc, spec.graph.size());
    auto part = run_sweep(spec, *problem);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Argument handling

// Flags shared by the subcommands. Each one, when given, overrides the
// matching config key.
struct Flags {
  std::string config;
  std::optional<std::string> topology, weights, algorithm, adversary, output, mode, problem,
      dataset, stepsize;
  std::optional<std::size_t> n, steps, dim, batch_size, points;
  std::optional<double> delta, epsilon, sigma_cdp, sigma_cor, clip, eta, lambda;
  std::optional<std::uint64_t> seed, problem_seed;
};

inline Json merge_flags(Json j, const Flags& f, std::string_view command) {
  if (!j.is_object()) j = Json::object();
  auto set = [&](const char* key, const auto& value) {
    if (value) j[key] = *value;
  };
  set("topology", f.topology);
  set("n", f.n);
  set("weights", f.weights);
  set("algorithm", f.algorithm);
  set("adversary", f.adversary);
  set("output", f.output);
  set("steps", f.steps);
  set("delta", f.delta);
  set("clip", f.clip);
  set("seed", f.seed);
  set("batch_size", f.batch_size);
  if (f.problem || f.dim || f.problem_seed || f.dataset || f.lambda) {
    Json& p = j["problem"];
    if (!p.is_object()) p = Json::object();
    if (f.problem) p["kind"] = *f.problem;
    if (f.dim) p["dim"] = *f.dim;
    if (f.problem_seed) p["seed"] = *f.problem_seed;
    if (f.dataset) p["path"] = *f.dataset;
    if (f.lambda) p["lambda"] = *f.lambda;
  }
  if (f.stepsize || f.eta) {
    Json& s = j["stepsize"];
    if (!s.is_object()) s = Json::object();
    if (f.stepsize) s["mode"] = *f.stepsize;
    if (f.eta) s["eta"] = *f.eta;
  }
  // Calibrate reads --sigma-cdp as the fixed side of the search; the other
  // commands read it as explicit noise.
  const bool calibrating = command == "calibrate";
  if (f.mode || f.points || (calibrating && f.sigma_cdp)) {
    Json& c = j["calibration"];
    if (!c.is_object()) c = Json::object();
    if (f.mode) c["mode"] = *f.mode;
    if (f.points) c["sigma_cdp_points"] = *f.points;
    if (calibrating && f.sigma_cdp) c["sigma_cdp"] = *f.sigma_cdp;
  }
  if (f.epsilon) {
    j["epsilon"] = *f.epsilon;
    j.erase("noise");
    if (j.contains("sweep") && j["sweep"].is_object()) j["sweep"].erase("epsilons");
  }
  if (!calibrating && (f.sigma_cdp || f.sigma_cor)) {
    Json& nz = j["noise"];
    if (!nz.is_object()) nz = Json::object();
    if (f.sigma_cdp) nz["sigma_cdp"] = *f.sigma_cdp;
    if (f.sigma_cor) nz["sigma_cor"] = *f.sigma_cor;
    if (!f.epsilon) j.erase("epsilon");
    if (j.contains("sweep") && j["sweep"].is_object()) j["sweep"].erase("epsilons");
  }
  return j;
}

inline void add_flags(CLI::App& app, Flags& f, std::string_view command) {
  app.add_option("--config", f.config, "JSON run config");
  app.add_option("--topology", f.topology, "ring | grid | complete | star[:n] | edges:<path>");
  app.add_option("--n", f.n, "number of users (default 16)");
  app.add_option("--adversary", f.adversary, "eaves | curious | collude:<q>");
  app.add_option("--steps", f.steps, "number of rounds T (default 1000)");
  app.add_option("--delta", f.delta, "delta of the (epsilon, delta) guarantee (default 1e-5)");
  app.add_option("--clip", f.clip, "clipping threshold C (default 1)");
  app.add_option("--sigma-cdp", f.sigma_cdp, "uncorrelated noise std");
  if (command != "calibrate") app.add_option("--sigma-cor", f.sigma_cor, "correlated noise std");
  if (command == "account") return;
  app.add_option("--epsilon", f.epsilon, "target epsilon");
  app.add_option("--mode", f.mode, "calibration: search | closed-form");
  if (command == "calibrate") return;
  app.add_option("--points", f.points, "sigma_cdp grid size for DECOR calibration");
  app.add_option("--weights", f.weights, "metropolis | uniform");
  app.add_option("--algorithm", f.algorithm, "decor | cdp | ldp");
  app.add_option("--problem", f.problem, "least_squares | logistic");
  app.add_option("--dim", f.dim, "least-squares dimension");
  app.add_option("--problem-seed", f.problem_seed, "seed of the synthetic data / sharding");
  app.add_option("--dataset", f.dataset, "LibSVM file for the logistic problem");
  app.add_option("--lambda", f.lambda, "logistic l2 regularization");
  app.add_option("--stepsize", f.stepsize, "constant | pl | nonconvex");
  app.add_option("--eta", f.eta, "constant stepsize");
  app.add_option("--seed", f.seed, "master seed");
  app.add_option("--batch-size", f.batch_size, "samples per gradient");
  app.add_option("--output", f.output, "CSV output path (default stdout)");
}

inline void print_error(std::ostream& out, std::string_view code, std::string message) {
  const std::string prefix = std::string(code) + ": ";
  if (message.rfind(prefix, 0) == 0) message.erase(0, prefix.size());
  Json e;
  e["error"] = code;
  e["message"] = message;
  out << e.dump() << '\n';
}

// Entry point. Results go to `out`; errors are printed to `out` as
// {"error": <code>, "message": ...} with exit status 2.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulator and privacy accountant for decentralized SGD with correlated noise",
               "decor"};
  app.require_subcommand(1);
  Flags flags;
  std::string chosen;
  constexpr std::array<std::pair<const char*, const char*>, 4> kCommands{{
      {"account", "per-step and total privacy of a noise configuration (JSON)"},
      {"calibrate", "noise for a target (epsilon, delta) budget (JSON)"},
      {"train", "run one algorithm and emit the metric trace (CSV)"},
      {"sweep", "calibrated privacy-utility sweep over algorithms, epsilons and seeds (CSV)"},
  }};
  for (const auto& [name, help] : kCommands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_flags(*sub, flags, name);
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(out, error_code_name(ErrorCode::kInvalidArguments), e.what());
    return 2;
  }
  try {
    Json config = Json::object();
    std::string base_dir;
    if (!flags.config.empty()) {
      config = load_json_file(flags.config);
      base_dir = std::filesystem::path(flags.config).parent_path().string();
    }
    const RunConfig rc = parse_run_config(merge_flags(config, flags, chosen), base_dir);
    if (chosen == "account") {
      out << cmd_account(rc).dump(2) << '\n';
    } else if (chosen == "calibrate") {
      out << cmd_calibrate(rc).dump(2) << '\n';
    } else if (chosen == "train") {
      MetricsTrace trace = cmd_train(rc);
      emit_csv(rc, out, [&](std::ostream& s) { write_trace_csv(s, trace); });
    } else {
      auto rows = cmd_sweep(rc);
      emit_csv(rc, out, [&](std::ostream& s) { write_sweep_csv(s, rows); });
    }
  } catch (const DivergedError& e) {
    print_error(out, error_code_name(e.code()), e.what());
    return 2;
  } catch (const Error& e) {
    print_error(out, error_code_name(e.code()), e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    print_error(out, error_code_name(ErrorCode::kInvalidConfig), e.what());
    return 2;
  } catch (const std::exception& e) {
    err << "decor: " << e.what() << '\n';
    print_error(out, "internal-error", e.what());
    return 2;
  }
  return 0;
}

}  // namespace decor::cli
