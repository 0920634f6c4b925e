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

// Acceptance suite: one PASS/FAIL line per criterion, exit status = number
// of failures. Runtime budgets are part of each criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "decor/accountant.hpp"
#include "decor/engine.hpp"
#include "decor/graph.hpp"
#include "decor/noise.hpp"
#include "decor/problems.hpp"
#include "decor/sweep.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using namespace decor;

struct Outcome {
  bool pass = false;
  std::string detail;
};

const auto kEaves = AdversaryModel::eavesdropper();
const auto kCurious = AdversaryModel::curious_users();

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// 1. Exact accountant against the Sherman-Morrison closed form.
Outcome accountant_exactness() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> sig(0.2, 5.0), clip(0.5, 2.0);
  double worst = 0.0;
  for (std::size_t n : {2u, 4u, 8u, 16u, 32u}) {
    Graph g = build_topology(Topology::kComplete, n);
    for (int k = 0; k < 50; ++k) {
      NoiseConfig nc{sig(rng), sig(rng), clip(rng)};
      const double a = nc.sigma_cdp * nc.sigma_cdp, b = nc.sigma_cor * nc.sigma_cor;
      const double closed = 2.0 * nc.clip * nc.clip * (a + b) / (a * (a + static_cast<double>(n) * b));
      worst = std::max(worst, rel(step_epsilon_exact(g, nc, kEaves), closed));
    }
  }
  return {worst <= 1e-10, fmt("max error %.2e over 250 configs", worst)};
}

// 2. Bound dominance, with equality on complete graphs for q = 0.
Outcome bound_dominance() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> sig(0.2, 5.0);
  int violations = 0, checked = 0;
  double complete_gap = 0.0;
  for (auto kind : {Topology::kRing, Topology::kGrid2dTorus, Topology::kComplete, Topology::kStar}) {
    for (std::size_t n : {4u, 8u, 16u}) {
      Graph g = build_topology(kind, n);
      for (int k = 0; k < 20; ++k) {
        NoiseConfig nc{sig(rng), sig(rng), 1.0};
        for (const auto& adv : {kEaves, kCurious}) {
          const double exact = step_epsilon_exact(g, nc, adv);
          const double bound = step_epsilon_bound(g, nc, adv);
          ++checked;
          if (bound < exact * (1.0 - 1e-12)) ++violations;
          if (kind == Topology::kComplete && adv.q == 0) complete_gap = std::max(complete_gap, rel(bound, exact));
        }
      }
    }
  }
  return {violations == 0 && complete_gap <= 1e-10,
          fmt("%.0f/%.0f dominated, complete-graph gap %.2e", checked - violations, checked, complete_gap)};
}

// 3. Ring n = 4 anchors.
Outcome ring_anchors() {
  Graph c4 = build_topology(Topology::kRing, 4);
  const double eaves = step_epsilon_exact(c4, {1, 1, 1}, kEaves);
  const double curious = step_epsilon_exact(c4, {1, 1, 1}, kCurious);
  const bool ok = std::abs(eaves - 14.0 / 15.0) <= 1e-10 && std::abs(curious - 1.25) <= 1e-10;
  return {ok, fmt("eavesdropper %.15f, curious %.15f", eaves, curious)};
}

// 4. Calibration round trip and closed-form sufficiency.
Outcome calibration_round_trip() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const auto& adv = k % 2 ? kCurious : kEaves;
    // A node whose every neighbour colludes gains nothing from sigma_cor, so
    // the planted value is only identifiable when min degree exceeds q.
    Graph g = decor::testing::random_connected_graph(rng, 4 + k % 13);
    while (g.min_degree() <= adv.q) g = decor::testing::random_connected_graph(rng, 4 + k % 13);
    const double cdp = 0.5 + 3.0 * unif(rng);
    const double clip = 0.3 + 2.0 * unif(rng);
    const double planted = clip * (0.05 + 50.0 * unif(rng));
    const double target = step_epsilon_exact(g, {cdp, planted, clip}, adv);
    const double found = calibrate_binary_search(g, cdp, clip, target, adv);
    worst = std::max(worst, std::abs(found - planted) / planted);
  }
  int insufficient = 0, configs = 0;
  double tightest = 0.0;
  for (auto kind : {Topology::kRing, Topology::kGrid2dTorus, Topology::kComplete}) {
    Graph g = build_topology(kind, 16);
    for (std::size_t steps : {1000u, 2000u}) {
      for (double eps : {0.5, 1.0, 3.0, 10.0}) {
        for (const auto& adv : {kEaves, kCurious}) {
          Calibration cal = calibrate_closed_form(1.0, steps, eps, 1e-5, g, adv);
          const double achieved =
              compose_and_convert(step_epsilon_exact(g, cal.noise, adv), steps, 1e-5);
          ++configs;
          if (achieved > eps) ++insufficient;
          tightest = std::max(tightest, achieved / eps);
        }
      }
    }
  }
  return {worst <= 1e-5 && insufficient == 0,
          fmt("planted sigma_cor recovered to %.2e; closed form within budget on %.0f configs (max "
              "eps_dp/eps %.3f)",
              worst, configs - insufficient, tightest)};
}

// 5. Correlated-noise reduction through one gossip step.
Outcome noise_reduction() {
  const std::size_t d = 8, trials = 10000;
  const double sigma = 1.0;
  std::string detail;
  bool ok = true;
  for (auto kind : {Topology::kRing, Topology::kGrid2dTorus, Topology::kComplete}) {
    Graph g = build_topology(kind, 16);
    MixingMatrix w = metropolis_weights(g);
    EdgeSeedTable seeds = EdgeSeedTable::from_master(g, 55);
    Matrix noise(d, 16);
    double mixed = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      for (std::size_t i = 0; i < 16; ++i) {
        noise.col(static_cast<Eigen::Index>(i)) =
            total_injected_noise(i, t, seeds, g.neighbors(i), sigma, 0.0, d, 0);
      }
      mixed += (noise * w.matrix()).squaredNorm();
    }
    const double estimate = mixed / trials / (2.0 * g.num_edges() * d * sigma * sigma);
    const double h = weight_heterogeneity(g, w);
    const bool here = h > 0.0 ? std::abs(estimate - h) <= 0.03 * h : estimate <= 1e-20;
    ok = ok && here;
    detail += std::string(topology_name(kind)) + fmt(" %.5f vs h %.5f; ", estimate, h);
  }
  return {ok, detail};
}

// 6. DECOR equals the CDP baseline on complete(16) with uniform weights.
Outcome cdp_equivalence() {
  auto problem = synthetic_least_squares(16, 10, 7);
  Graph g = build_topology(Topology::kComplete, 16);
  MixingMatrix w = MixingMatrix::uniform(16);
  TrainConfig cfg;
  cfg.steps = 500;
  cfg.stepsize = StepsizeSchedule::constant(0.01);
  cfg.noise = {0.5, 5.0, 1.0};
  cfg.master_seed = 6;
  cfg.algorithm = Algorithm::kDecor;
  MetricsTrace decor = run(*problem, g, w, cfg);
  cfg.algorithm = Algorithm::kCdpBaseline;
  MetricsTrace cdp = run(*problem, g, w, cfg);
  double worst = 0.0;
  for (std::size_t t = 0; t < decor.rows.size(); ++t) {
    auto r = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
    worst = std::max({worst, r(decor.rows[t].loss, cdp.rows[t].loss),
                      r(decor.rows[t].grad_norm_sq, cdp.rows[t].grad_norm_sq)});
  }
  return {worst <= 1e-12 && decor.rows.size() == 501, fmt("max relative gap %.2e over 501 rounds", worst)};
}

// 7. Privacy-utility ordering on synthetic least squares.
Outcome privacy_utility() {
  auto problem = synthetic_least_squares(16, 10, 7);
  std::vector<SweepRow> all;
  std::map<std::string, std::map<double, std::map<std::string, double>>> mean;
  for (const char* topo : {"ring", "grid", "complete"}) {
    SweepSpec spec;
    spec.topology_name = topo;
    spec.graph = parse_topology_spec(topo, 16);
    spec.weights = metropolis_weights(spec.graph);
    spec.steps = 2000;
    spec.delta = 1e-5;
    spec.grid.epsilons = {3.0, 10.0, 30.0};
    spec.grid.seeds = {0, 1, 2, 3};
    spec.grid.etas = {0.001, 0.003, 0.01, 0.03};
    spec.grid.clips = {0.3, 1.0, 3.0};
    spec.grid.sigma_cdp_points = 8;
    auto rows = run_sweep(spec, *problem);
    for (const SweepRow& r : rows) {
      const double value = r.status == "ok" ? r.final_loss : std::numeric_limits<double>::infinity();
      mean[topo][r.epsilon][r.algorithm] += value / 4.0;
    }
    all.insert(all.end(), rows.begin(), rows.end());
  }
  std::ofstream csv("privacy_utility_sweep.csv");
  write_sweep_csv(csv, all);
  bool ok = true;
  std::string detail;
  for (const auto& [topo, by_eps] : mean) {
    for (const auto& [eps, m] : by_eps) {
      const double decor = m.at("decor"), cdp = m.at("cdp"), ldp = m.at("ldp");
      ok = ok && decor <= ldp;
      if (topo != "ring") ok = ok && decor <= 2.0 * cdp;
      detail += "\n      " + topo + fmt(" eps=%-4g cdp %.4f  decor %.4f", eps, cdp, decor) +
                fmt("  ldp %.4f", ldp);
    }
  }
  return {ok, "mean final loss over 4 seeds:" + detail};
}

// 8. Spectral identities.
Outcome spectral_identities() {
  double worst = 0.0;
  for (std::size_t n = 3; n <= 32; ++n) {
    const double closed = 2.0 * (1.0 - std::cos(2.0 * std::acos(-1.0) / static_cast<double>(n)));
    worst = std::max(worst, std::abs(algebraic_connectivity(build_topology(Topology::kRing, n)) - closed));
  }
  std::mt19937_64 rng(8);
  double ratio = 0.0;
  for (int k = 0; k < 100; ++k) {
    Graph g = decor::testing::random_connected_graph(rng, 3 + k % 30);
    ratio = std::max(ratio, weight_heterogeneity(g, metropolis_weights(g)) * g.min_degree() / 2.0);
  }
  return {worst <= 1e-9 && ratio <= 1.0,
          fmt("ring connectivity error %.2e; max h*k_min/2 = %.3f over 100 graphs", worst, ratio)};
}

// 9. Gradient correctness.
Outcome gradients() {
  Dataset data = synthetic_classification(200, 12, 0.5, 9);
  auto logistic = logistic_problem(data, 0.01, 4, 3);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    Vector x(12);
    for (Eigen::Index i = 0; i < 12; ++i) x(i) = normal(rng);
    const std::size_t user = static_cast<std::size_t>(k) % 4;
    Vector analytic = logistic->user_gradient(user, x);
    Vector fd(12);
    for (Eigen::Index i = 0; i < 12; ++i) {
      Vector up = x, down = x;
      up(i) += 1e-5;
      down(i) -= 1e-5;
      fd(i) = (logistic->user_loss(user, up) - logistic->user_loss(user, down)) / 2e-5;
    }
    worst = std::max(worst, (analytic - fd).norm() / std::max(1.0, analytic.norm()));
  }
  auto ls = synthetic_least_squares(16, 10, 7);
  const double best = ls->loss(ls->minimizer());
  int beaten = 0;
  for (int k = 0; k < 100; ++k) {
    Vector x(10);
    for (Eigen::Index i = 0; i < 10; ++i) x(i) = ls->minimizer()(i) + 0.3 * normal(rng);
    if (ls->loss(x) >= best) ++beaten;
  }
  return {worst <= 1e-6 && beaten == 100,
          fmt("finite-difference gap %.2e; minimizer beats %.0f/100 random points", worst, beaten)};
}

// 10. Convergence sanity under the PL schedule with calibrated noise.
Outcome pl_convergence() {
  auto problem = synthetic_least_squares(16, 10, 7);
  Graph g = build_topology(Topology::kRing, 16);
  MixingMatrix w = metropolis_weights(g);
  const std::size_t steps = 2000;
  const double eps_step = step_budget_for(10.0, steps, 1e-5);
  auto couples = decor_noise_couples(g, kEaves, eps_step, 8);
  ProblemConstants pc = problem->constants();
  ScheduleConstants k{*pc.pl_constant, *pc.smoothness, spectral_gap(w), *pc.heterogeneity_p, 0.0, 16};
  TrainConfig cfg;
  cfg.steps = steps;
  cfg.stepsize = StepsizeSchedule::pl(k);
  cfg.noise = couples.front();
  cfg.master_seed = 10;
  MetricsTrace trace = run(*problem, g, w, cfg);
  double tail = 0.0;
  const std::size_t from = steps - steps / 10;
  for (std::size_t t = from + 1; t <= steps; ++t) tail += trace.rows[t].loss;
  tail /= static_cast<double>(steps - from);
  const double early = trace.rows[steps / 10].loss;
  const double reference = trace.rows[10].consensus;
  double peak = 0.0;
  for (const MetricsRow& r : trace.rows) peak = std::max(peak, r.consensus);
  return {tail < early && peak <= 1e3 * reference,
          fmt("tail loss %.4f < loss at T/10 %.4f; max consensus / round-10 consensus = %.2f", tail, early,
              peak / reference)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {"AC1", "accountant exactness", 1.0, accountant_exactness},
      {"AC2", "bound dominance", 5.0, bound_dominance},
      {"AC3", "ring anchors", 1.0, ring_anchors},
      {"AC4", "calibration round trip", 10.0, calibration_round_trip},
      {"AC5", "noise reduction through gossip", 30.0, noise_reduction},
      {"AC6", "DECOR equals CDP on complete graph", 10.0, cdp_equivalence},
      {"AC7", "privacy-utility ordering", 300.0, privacy_utility},
      {"AC8", "spectral identities", 5.0, spectral_identities},
      {"AC9", "gradient correctness", 5.0, gradients},
      {"AC10", "convergence under PL schedule", 30.0, pl_convergence},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.check();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds <= c.budget_seconds;
    const bool pass = out.pass && in_time;
    if (!pass) ++failures;
    std::printf("%-4s %s  %s (%.2f s of %.0f s)%s\n     %s\n", c.id, pass ? "PASS" : "FAIL", c.name, seconds,
                c.budget_seconds, in_time ? "" : " over budget", out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures;
}
