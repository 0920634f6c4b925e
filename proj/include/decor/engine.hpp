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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "decor/accountant.hpp"
#include "decor/error.hpp"
#include "decor/graph.hpp"
#include "decor/noise.hpp"
#include "decor/problems.hpp"

namespace decor {

enum class Algorithm { kDecor, kCdpBaseline, kLdpBaseline };

inline std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kDecor: return "decor";
    case Algorithm::kCdpBaseline: return "cdp";
    case Algorithm::kLdpBaseline: return "ldp";
  }
  return "unknown";
}

inline Algorithm parse_algorithm(std::string_view name) {
  if (name == "decor") return Algorithm::kDecor;
  if (name == "cdp" || name == "cdp_baseline") return Algorithm::kCdpBaseline;
  if (name == "ldp" || name == "ldp_baseline") return Algorithm::kLdpBaseline;
  throw Error(ErrorCode::kInvalidConfig, "unknown algorithm '" + std::string(name) + "'");
}

class DivergedError : public Error {
 public:
  explicit DivergedError(std::size_t round)
      : Error(ErrorCode::kDiverged, "model left the finite range at round " + std::to_string(round)),
        round_(round) {}

  std::size_t round() const noexcept { return round_; }

 private:
  std::size_t round_;
};

// ---------------------------------------------------------------------------
// Stepsize schedules

struct ScheduleConstants {
  double mu = 0.0;  // PL constant
  double L = 0.0;   // smoothness
  double p = 1.0;   // consensus rate
  double P = 0.0;   // gradient heterogeneity growth
  double M = 0.0;   // stochastic noise growth
  std::size_t n = 1;
};

// c = max{4 sqrt(3(1-p)(3P + pM)), mu/L, 2p, 4pM/n}.
inline double schedule_c(const ScheduleConstants& k) {
  return std::max({4.0 * std::sqrt(3.0 * (1.0 - k.p) * (3.0 * k.P + k.p * k.M)), k.mu / k.L,
                   2.0 * k.p, 4.0 * k.p * k.M / static_cast<double>(k.n)});
}

inline void check_schedule_constants(const ScheduleConstants& k, bool need_mu) {
  if ((need_mu && !(k.mu > 0.0)) || !(k.mu >= 0.0) || !(k.L > 0.0) || !(k.p > 0.0) ||
      k.p > 1.0 || !(k.P >= 0.0) || !(k.M >= 0.0) || k.n == 0 || (need_mu && k.L < k.mu)) {
    throw Error(ErrorCode::kInvalidConstants,
                "schedule needs mu > 0, L >= mu, p in (0,1], P, M >= 0");
  }
}

// eta_t = 16 / (mu (t + c L / (mu p))).
inline double pl_stepsize(std::size_t t, const ScheduleConstants& k) {
  check_schedule_constants(k, true);
  const double c = schedule_c(k);
  return 16.0 / (k.mu * (static_cast<double>(t) + c * k.L / (k.mu * k.p)));
}

// eta = min{p / (2 c L), 2 sqrt(F_0 n / (L T (sigma_star^2 + d sigma_cdp^2)))}.
inline double nonconvex_stepsize(const ScheduleConstants& k, double loss_gap, std::size_t steps,
                                 double sigma_star_sq, double sigma_cdp, std::size_t d) {
  check_schedule_constants(k, false);
  if (steps == 0 || !(loss_gap >= 0.0) || !(sigma_star_sq >= 0.0)) {
    throw Error(ErrorCode::kInvalidConstants, "nonconvex schedule needs T >= 1 and F_0 >= 0");
  }
  const double c = schedule_c(k);
  const double cap = k.p / (2.0 * c * k.L);
  const double variance = sigma_star_sq + static_cast<double>(d) * sigma_cdp * sigma_cdp;
  if (variance == 0.0) return cap;
  const double noise_branch =
      2.0 * std::sqrt(loss_gap * static_cast<double>(k.n) /
                      (k.L * static_cast<double>(steps) * variance));
  return std::min(cap, noise_branch);
}

class StepsizeSchedule {
 public:
  enum class Mode { kConstant, kPl, kNonconvex };

  static StepsizeSchedule constant(double eta) {
    StepsizeSchedule s;
    s.mode_ = Mode::kConstant;
    s.eta_ = eta;
    return s;
  }

  static StepsizeSchedule pl(const ScheduleConstants& k) {
    check_schedule_constants(k, true);
    StepsizeSchedule s;
    s.mode_ = Mode::kPl;
    s.constants_ = k;
    return s;
  }

  static StepsizeSchedule nonconvex(const ScheduleConstants& k, double loss_gap, std::size_t steps,
                                    double sigma_star_sq, double sigma_cdp, std::size_t d) {
    StepsizeSchedule s;
    s.mode_ = Mode::kNonconvex;
    s.constants_ = k;
    s.eta_ = nonconvex_stepsize(k, loss_gap, steps, sigma_star_sq, sigma_cdp, d);
    return s;
  }

  Mode mode() const { return mode_; }

  double at(std::size_t t) const {
    return mode_ == Mode::kPl ? pl_stepsize(t, constants_) : eta_;
  }

 private:
  Mode mode_ = Mode::kConstant;
  double eta_ = 0.0;
  ScheduleConstants constants_;
};

// ---------------------------------------------------------------------------
// Simulation

struct TrainConfig {
  Algorithm algorithm = Algorithm::kDecor;
  std::size_t steps = 0;
  StepsizeSchedule stepsize = StepsizeSchedule::constant(0.0);
  NoiseConfig noise;
  std::uint64_t master_seed = 0;
  std::size_t batch_size = 1;
  // x_i^{(0)} ~ N(0, init_scale^2 I), shared by all users, unless
  // initial_model is set.
  double init_scale = 1.0;
  std::optional<Vector> initial_model;
  double divergence_limit = 1e12;
};

// Baselines run the same update without correlated noise.
inline NoiseConfig effective_noise(const TrainConfig& cfg) {
  NoiseConfig noise = cfg.noise;
  if (cfg.algorithm != Algorithm::kDecor) noise.sigma_cor = 0.0;
  return noise;
}

struct SimState {
  Matrix models;  // d x n, column i is x_i
  std::size_t round = 0;
  std::uint64_t master_seed = 0;
  EdgeSeedTable seeds;

  Vector average() const { return models.rowwise().mean(); }
};

inline Vector initial_model(const TrainConfig& cfg, std::size_t d) {
  if (cfg.initial_model) {
    if (static_cast<std::size_t>(cfg.initial_model->size()) != d) {
      throw Error(ErrorCode::kInvalidConfig, "initial model has the wrong dimension");
    }
    return *cfg.initial_model;
  }
  Vector x = Vector::Zero(static_cast<Eigen::Index>(d));
  if (cfg.init_scale != 0.0) {
    fill_gaussian(stream_key(cfg.master_seed, 0, kUserDomain ^ kSampleDomain), cfg.init_scale, x);
  }
  return x;
}

inline SimState make_state(const Problem& problem, const Graph& g, const TrainConfig& cfg) {
  if (problem.num_users() != g.size()) {
    throw Error(ErrorCode::kInvalidConfig, "problem and graph disagree on the number of users");
  }
  SimState state;
  const Vector x0 = initial_model(cfg, problem.dim());
  state.models = x0.replicate(1, static_cast<Eigen::Index>(g.size()));
  state.master_seed = cfg.master_seed;
  state.seeds = EdgeSeedTable::from_master(g, cfg.master_seed);
  return state;
}

// (1/n) sum_i |x_i - xbar|^2.
// Exactly 0 when all models coincide, which the rounded mean alone would
// not guarantee.
inline double consensus_distance(const Matrix& models) {
  if (models.size() == 0) return 0.0;
  if ((models.colwise() - models.col(0)).cwiseAbs().maxCoeff() == 0.0) return 0.0;
  const Vector mean = models.rowwise().mean();
  return (models.colwise() - mean).colwise().squaredNorm().sum() /
         static_cast<double>(models.cols());
}

inline double consensus_distance(const SimState& state) {
  return consensus_distance(state.models);
}

// Per-user quantities of one round, for diagnostics and tests.
struct StepDetail {
  double eta = 0.0;
  Matrix clipped_gradients;    // d x n
  Matrix uncorrelated_noise;   // d x n
  Matrix injected_noise;       // d x n, correlated + uncorrelated
  Matrix half_step_models;     // d x n, before gossip
};

// Stochastic gradient of user i at round t: mean over batch_size samples
// drawn uniformly with replacement from a keyed stream.
inline Vector sampled_gradient(const Problem& problem, std::size_t user, const Vector& x,
                               std::uint64_t master_seed, std::size_t round,
                               std::size_t batch_size) {
  const std::size_t m = problem.num_samples(user);
  const std::uint64_t key = stream_key(user_seed(master_seed, user), round, kSampleDomain);
  if (m == 1) return problem.sample_gradient(user, x, 0);
  Vector g = Vector::Zero(static_cast<Eigen::Index>(problem.dim()));
  const std::size_t batch = std::max<std::size_t>(batch_size, 1);
  for (std::size_t b = 0; b < batch; ++b) {
    g += problem.sample_gradient(user, x, static_cast<std::size_t>(derive(key, b) % m));
  }
  return batch == 1 ? g : Vector(g / static_cast<double>(batch));
}

// One round: sample, clip, add noise, local step, gossip.
inline void decor_step(SimState& state, const Graph& g, const MixingMatrix& w,
                       const TrainConfig& cfg, const Problem& problem,
                       StepDetail* detail = nullptr) {
  const std::size_t n = g.size();
  const NoiseConfig noise = effective_noise(cfg);
  const double eta = cfg.stepsize.at(state.round);
  const std::uint64_t round = state.round;

  // Injected noise, one draw per edge. Edges are sorted by (u, v), so each
  // user accumulates its correlated terms in ascending neighbor order, the
  // same order total_injected_noise uses.
  Matrix injected = Matrix::Zero(state.models.rows(), state.models.cols());
  if (noise.sigma_cor != 0.0) {
    Vector draw(state.models.rows());
    for (const Edge& e : g.edges()) {
      const EdgeSeed& seed = state.seeds.at(e.u, e.v);
      fill_gaussian(stream_key(seed.seed, round, kCorrelatedDomain), noise.sigma_cor, draw);
      injected.col(static_cast<Eigen::Index>(e.u)) += draw;
      injected.col(static_cast<Eigen::Index>(e.v)) += -draw;
    }
  }

  Matrix half(state.models.rows(), state.models.cols());
  if (detail) {
    detail->eta = eta;
    detail->clipped_gradients.resize(half.rows(), half.cols());
    detail->uncorrelated_noise.resize(half.rows(), half.cols());
  }
  Vector own_noise(state.models.rows());
  for (std::size_t i = 0; i < n; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const Vector x = state.models.col(col);
    const Vector grad =
        clip(sampled_gradient(problem, i, x, state.master_seed, round, cfg.batch_size), noise.clip);
    own_noise.setZero();
    if (noise.sigma_cdp != 0.0) {
      fill_gaussian(stream_key(user_seed(state.master_seed, i), round, kUncorrelatedDomain),
                    noise.sigma_cdp, own_noise);
    }
    injected.col(col) += own_noise;
    half.col(col) = x - eta * (grad + injected.col(col));
    if (detail) {
      detail->clipped_gradients.col(col) = grad;
      detail->uncorrelated_noise.col(col) = own_noise;
    }
  }
  if (detail) detail->injected_noise = injected;
  if (detail) detail->half_step_models = half;

  // x_i <- sum_j W_ij x_j, summed in index order.
  const Matrix& weights = w.matrix();
  for (std::size_t i = 0; i < n; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    Vector acc = Vector::Zero(half.rows());
    for (std::size_t j = 0; j < n; ++j) {
      const double wij = weights(col, static_cast<Eigen::Index>(j));
      if (wij != 0.0) acc += wij * half.col(static_cast<Eigen::Index>(j));
    }
    state.models.col(col) = acc;
  }
  const double limit = cfg.divergence_limit;
  const bool finite = state.models.allFinite() &&
                      (state.models.size() == 0 || state.models.cwiseAbs().maxCoeff() <= limit);
  if (!finite) throw DivergedError(state.round + 1);
  ++state.round;
}

struct MetricsRow {
  std::size_t round = 0;
  double loss = 0.0;
  double grad_norm_sq = 0.0;
  double consensus = 0.0;
  double stepsize = 0.0;
};

struct MetricsTrace {
  std::vector<MetricsRow> rows;
  std::optional<double> final_accuracy;

  const MetricsRow& final() const { return rows.back(); }
};

inline MetricsRow measure(const SimState& state, const Problem& problem,
                          const StepsizeSchedule& schedule) {
  const Vector avg = state.average();
  MetricsRow row;
  row.round = state.round;
  row.loss = problem.loss(avg);
  row.grad_norm_sq = problem.gradient(avg).squaredNorm();
  row.consensus = consensus_distance(state);
  row.stepsize = schedule.at(state.round);
  return row;
}

struct RunOptions {
  // When false only rounds 0 and T are recorded.
  bool full_trace = true;
};

// Runs T rounds and returns the T+1 row trace (rounds 0..T).
inline MetricsTrace run(const Problem& problem, const Graph& g, const MixingMatrix& w,
                        const TrainConfig& cfg, const RunOptions& opts = {}) {
  if (w.size() != g.size()) {
    throw Error(ErrorCode::kInvalidConfig, "mixing matrix size differs from graph");
  }
  if (cfg.noise.clip < 0.0 || cfg.noise.sigma_cdp < 0.0 || cfg.noise.sigma_cor < 0.0) {
    throw Error(ErrorCode::kInvalidConfig, "noise parameters must be nonnegative");
  }
  SimState state = make_state(problem, g, cfg);
  MetricsTrace trace;
  trace.rows.reserve(opts.full_trace ? cfg.steps + 1 : 2);
  trace.rows.push_back(measure(state, problem, cfg.stepsize));
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    decor_step(state, g, w, cfg, problem);
    if (opts.full_trace || t + 1 == cfg.steps) {
      trace.rows.push_back(measure(state, problem, cfg.stepsize));
    }
  }
  trace.final_accuracy = problem.accuracy(state.average());
  return trace;
}

inline void write_trace_csv(std::ostream& out, const MetricsTrace& trace) {
  out << "round,loss,grad_norm_sq,consensus,stepsize\n";
  out << std::setprecision(17);
  for (const MetricsRow& r : trace.rows) {
    out << r.round << ',' << r.loss << ',' << r.grad_norm_sq << ',' << r.consensus << ','
        << r.stepsize << '\n';
  }
}

}  // namespace decor
