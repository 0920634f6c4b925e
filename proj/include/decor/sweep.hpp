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
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "decor/accountant.hpp"
#include "decor/engine.hpp"
#include "decor/error.hpp"
#include "decor/graph.hpp"
#include "decor/problems.hpp"

// Privacy-utility sweeps: every algorithm is calibrated to the same
// (epsilon, delta) budget, tuned over (eta, C) and, for DECOR, over three
// noise couples (sigma_cdp, sigma_cor), then evaluated on every seed.
namespace decor {

// Worker count from DECOR_THREADS, else the hardware concurrency.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("DECOR_THREADS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && value > 0) return static_cast<std::size_t>(value);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Runs body(k) for k in [0, count) on up to `workers` threads.
template <typename Body>
void parallel_for(std::size_t count, std::size_t workers, Body&& body) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) body(k);
    });
  }
  for (auto& t : pool) t.join();
}

// Feasible DECOR couples for a per-step budget at C = 1. sigma_cdp runs over
// `points` geometric values strictly inside (cdp_sigma, ldp_sigma); each one
// is completed by binary search on sigma_cor. Infeasible points are skipped.
inline std::vector<NoiseConfig> decor_noise_couples(const Graph& g, const AdversaryModel& adv,
                                                    double eps_step, std::size_t points,
                                                    const SearchOptions& search = {}) {
  const double lo = cdp_sigma(g.size(), 1.0, eps_step);
  const double hi = ldp_sigma(1.0, eps_step);
  std::vector<NoiseConfig> couples;
  for (std::size_t k = 1; k <= points; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(points + 1);
    const double sigma_cdp = lo * std::pow(hi / lo, frac);
    try {
      const double sigma_cor =
          calibrate_binary_search(g, sigma_cdp, 1.0, eps_step, adv, search);
      couples.push_back(NoiseConfig{sigma_cdp, sigma_cor, 1.0});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUnreachableTarget) throw;
    }
  }
  return couples;
}

// Lowest, middle and highest sigma_cdp among the feasible couples.
inline std::vector<NoiseConfig> pick_three_couples(const std::vector<NoiseConfig>& couples) {
  if (couples.size() <= 3) return couples;
  return {couples.front(), couples[(couples.size() - 1) / 2], couples.back()};
}

struct SweepGrid {
  std::vector<Algorithm> algorithms{Algorithm::kDecor, Algorithm::kCdpBaseline,
                                    Algorithm::kLdpBaseline};
  std::vector<double> epsilons{3.0, 10.0, 30.0};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3};
  std::vector<double> etas{0.01};
  std::vector<double> clips{1.0};
  std::size_t sigma_cdp_points = 8;
};

struct SweepSpec {
  std::string topology_name;
  Graph graph;
  MixingMatrix weights;
  AdversaryModel adversary = AdversaryModel::eavesdropper();
  std::size_t steps = 1000;
  double delta = 1e-5;
  SweepGrid grid;
  // When set, every algorithm runs this noise (baselines drop sigma_cor)
  // instead of calibrating to the epsilon grid.
  std::optional<NoiseConfig> explicit_noise;
  // Batch size, initialization and divergence guard for every run.
  TrainConfig base;
};

struct SweepRow {
  std::string algorithm;
  std::string topology;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  double eta = 0.0;
  double clip = 0.0;
  double sigma_cdp = 0.0;
  double sigma_cor = 0.0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> final_accuracy;
  double wall_seconds = 0.0;
  std::string status = "ok";
};

namespace internal {

struct Candidate {
  double eta = 0.0;
  NoiseConfig noise;  // scaled to the candidate's clip
};

struct RunOutcome {
  double loss = std::numeric_limits<double>::infinity();
  std::optional<double> accuracy;
  double seconds = 0.0;
  bool diverged = false;
};

struct Cell {
  Algorithm algorithm = Algorithm::kDecor;
  double epsilon = 0.0;
  std::vector<Candidate> candidates;
  std::string failure;
};

}  // namespace internal

inline std::vector<SweepRow> run_sweep(const SweepSpec& spec, const Problem& problem) {
  const SweepGrid& grid = spec.grid;
  if (grid.algorithms.empty() || grid.seeds.empty() || grid.etas.empty() ||
      (grid.clips.empty() && !spec.explicit_noise) ||
      (grid.epsilons.empty() && !spec.explicit_noise)) {
    throw Error(ErrorCode::kInvalidConfig, "sweep grids must be non-empty");
  }
  const std::size_t n = spec.graph.size();

  // Calibration per (algorithm, epsilon) cell.
  std::vector<internal::Cell> cells;
  const std::vector<double> epsilons =
      spec.explicit_noise ? std::vector<double>{std::numeric_limits<double>::quiet_NaN()}
                          : grid.epsilons;
  for (Algorithm alg : grid.algorithms) {
    for (double eps : epsilons) {
      internal::Cell cell;
      cell.algorithm = alg;
      cell.epsilon = eps;
      try {
        if (spec.explicit_noise) {
          NoiseConfig noise = *spec.explicit_noise;
          if (alg != Algorithm::kDecor) noise.sigma_cor = 0.0;
          cell.epsilon = noise.sigma_cdp > 0.0
                             ? compose_and_convert(
                                   alg == Algorithm::kLdpBaseline
                                       ? 2.0 * noise.clip * noise.clip /
                                             (noise.sigma_cdp * noise.sigma_cdp)
                                       : step_epsilon_exact(spec.graph, noise, spec.adversary),
                                   spec.steps, spec.delta)
                             : std::numeric_limits<double>::infinity();
          for (double eta : grid.etas) cell.candidates.push_back({eta, noise});
        } else {
          const double eps_step = step_budget_for(eps, spec.steps, spec.delta);
          std::vector<NoiseConfig> unit;
          switch (alg) {
            case Algorithm::kCdpBaseline:
              unit.push_back({cdp_sigma(n, 1.0, eps_step), 0.0, 1.0});
              break;
            case Algorithm::kLdpBaseline:
              unit.push_back({ldp_sigma(1.0, eps_step), 0.0, 1.0});
              break;
            case Algorithm::kDecor:
              unit = pick_three_couples(decor_noise_couples(spec.graph, spec.adversary, eps_step,
                                                            grid.sigma_cdp_points));
              break;
          }
          if (unit.empty()) {
            cell.failure = "calibration-failed";
          }
          // Noise scales linearly with the clipping threshold.
          for (double c : grid.clips) {
            for (const NoiseConfig& u : unit) {
              for (double eta : grid.etas) {
                cell.candidates.push_back({eta, NoiseConfig{u.sigma_cdp * c, u.sigma_cor * c, c}});
              }
            }
          }
        }
      } catch (const Error& e) {
        cell.failure = "calibration-failed: " + std::string(error_code_name(e.code()));
        cell.candidates.clear();
      }
      cells.push_back(std::move(cell));
    }
  }

  // Every (cell, candidate, seed) run is independent.
  struct Job {
    std::size_t cell;
    std::size_t candidate;
    std::size_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t k = 0; k < cells[c].candidates.size(); ++k) {
      for (std::size_t s = 0; s < grid.seeds.size(); ++s) jobs.push_back({c, k, s});
    }
  }
  std::vector<internal::RunOutcome> outcomes(jobs.size());
  parallel_for(jobs.size(), worker_count(), [&](std::size_t j) {
    const Job& job = jobs[j];
    const internal::Cell& cell = cells[job.cell];
    const internal::Candidate& cand = cell.candidates[job.candidate];
    TrainConfig cfg = spec.base;
    cfg.algorithm = cell.algorithm;
    cfg.steps = spec.steps;
    cfg.stepsize = StepsizeSchedule::constant(cand.eta);
    cfg.noise = cand.noise;
    cfg.master_seed = grid.seeds[job.seed];
    const auto start = std::chrono::steady_clock::now();
    internal::RunOutcome out;
    try {
      MetricsTrace trace = run(problem, spec.graph, spec.weights, cfg, RunOptions{false});
      out.loss = trace.final().loss;
      out.accuracy = trace.final_accuracy;
    } catch (const DivergedError&) {
      out.diverged = true;
    }
    out.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    outcomes[j] = out;
  });

  // Best candidate per cell by mean final loss over seeds; rows in
  // (algorithm, epsilon, seed) order.
  std::vector<SweepRow> rows;
  std::size_t job_index = 0;
  const std::size_t num_seeds = grid.seeds.size();
  for (const internal::Cell& cell : cells) {
    std::size_t best = cell.candidates.size();
    double best_mean = std::numeric_limits<double>::infinity();
    const std::size_t first_job = job_index;
    for (std::size_t k = 0; k < cell.candidates.size(); ++k) {
      double mean = 0.0;
      for (std::size_t s = 0; s < num_seeds; ++s) mean += outcomes[job_index + s].loss;
      mean /= static_cast<double>(num_seeds);
      if (mean < best_mean) {
        best_mean = mean;
        best = k;
      }
      job_index += num_seeds;
    }
    for (std::size_t s = 0; s < num_seeds; ++s) {
      SweepRow row;
      row.algorithm = std::string(algorithm_name(cell.algorithm));
      row.topology = spec.topology_name;
      row.epsilon = cell.epsilon;
      row.seed = grid.seeds[s];
      if (!cell.failure.empty()) {
        row.status = cell.failure;
      } else if (best == cell.candidates.size()) {
        // Every candidate diverged; report the first one.
        const internal::Candidate& cand = cell.candidates.front();
        row.eta = cand.eta;
        row.clip = cand.noise.clip;
        row.sigma_cdp = cand.noise.sigma_cdp;
        row.sigma_cor = cand.noise.sigma_cor;
        row.status = "diverged";
      } else {
        const internal::Candidate& cand = cell.candidates[best];
        const internal::RunOutcome& out = outcomes[first_job + best * num_seeds + s];
        row.eta = cand.eta;
        row.clip = cand.noise.clip;
        row.sigma_cdp = cand.noise.sigma_cdp;
        row.sigma_cor = cand.noise.sigma_cor;
        row.final_loss = out.loss;
        row.final_accuracy = out.accuracy;
        row.wall_seconds = out.seconds;
        if (out.diverged) row.status = "diverged";
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline constexpr std::string_view kSweepCsvHeader =
    "algorithm,topology,epsilon,seed,eta,clip,sigma_cdp,sigma_cor,final_loss,final_accuracy,"
    "wall_seconds,status";

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepCsvHeader << '\n' << std::setprecision(17);
  for (const SweepRow& r : rows) {
    out << r.algorithm << ',' << r.topology << ',' << r.epsilon << ',' << r.seed << ',' << r.eta
        << ',' << r.clip << ',' << r.sigma_cdp << ',' << r.sigma_cor << ',' << r.final_loss
        << ',';
    if (r.final_accuracy) out << *r.final_accuracy;
    out << ',' << r.wall_seconds << ',' << r.status << '\n';
  }
}

inline std::vector<SweepRow> read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kSweepCsvHeader) {
    throw Error(ErrorCode::kParseError, "missing sweep CSV header");
  }
  auto number = [](const std::string& s) {
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    return std::stod(s);
  };
  std::vector<SweepRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 12) {
      throw Error(ErrorCode::kParseError, "sweep CSV line " + std::to_string(line_no) +
                                              ": expected 12 fields");
    }
    try {
      SweepRow r;
      r.algorithm = fields[0];
      r.topology = fields[1];
      r.epsilon = number(fields[2]);
      r.seed = std::stoull(fields[3]);
      r.eta = number(fields[4]);
      r.clip = number(fields[5]);
      r.sigma_cdp = number(fields[6]);
      r.sigma_cor = number(fields[7]);
      r.final_loss = number(fields[8]);
      if (!fields[9].empty()) r.final_accuracy = number(fields[9]);
      r.wall_seconds = number(fields[10]);
      r.status = fields[11];
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParseError,
                  "sweep CSV line " + std::to_string(line_no) + ": bad number");
    }
  }
  return rows;
}

}  // namespace decor
