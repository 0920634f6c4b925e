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
#include <limits>
#include <string>
#include <string_view>

#include <Eigen/Cholesky>

#include "decor/error.hpp"
#include "decor/graph.hpp"

// Privacy accounting for one DECOR step and for the full run.
//
// A single step releases x_i + sum_{j in N_i} v_ij + vbar_i for every honest
// user. Against an adversary that knows the secrets of a set I of q users,
// the honest users see Gaussian noise with covariance
//   Sigma = sigma_cdp^2 I + sigma_cor^2 L(G - I),
// and changing one user's clipped input by at most C in norm yields a step
// that is (alpha, alpha * eps)-RDP for every alpha > 1 with
//   eps = 2 C^2 max_i (Sigma^{-1})_ii.
namespace decor {

struct NoiseConfig {
  double sigma_cdp = 0.0;
  double sigma_cor = 0.0;
  double clip = 1.0;
};

struct AdversaryModel {
  enum class Kind { kEavesdropper, kCuriousUsers, kColluding };

  Kind kind = Kind::kEavesdropper;
  std::size_t q = 0;

  static AdversaryModel eavesdropper() { return {Kind::kEavesdropper, 0}; }
  static AdversaryModel curious_users() { return {Kind::kCuriousUsers, 1}; }
  static AdversaryModel colluding(std::size_t q) { return {Kind::kColluding, q}; }

  // "eaves" | "eavesdropper" | "curious" | "collude:<q>"
  static AdversaryModel parse(std::string_view text) {
    if (text == "eaves" || text == "eavesdropper") return eavesdropper();
    if (text == "curious" || text == "curious_users") return curious_users();
    constexpr std::string_view kPrefix = "collude:";
    if (text.substr(0, kPrefix.size()) == kPrefix) {
      std::string digits(text.substr(kPrefix.size()));
      if (!digits.empty() &&
          std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        return colluding(static_cast<std::size_t>(std::stoull(digits)));
      }
    }
    throw Error(ErrorCode::kInvalidConfig, "unknown adversary '" + std::string(text) + "'");
  }

  std::string name() const {
    switch (kind) {
      case Kind::kEavesdropper: return "eavesdropper";
      case Kind::kCuriousUsers: return "curious_users";
      case Kind::kColluding: return "colluding:" + std::to_string(q);
    }
    return "unknown";
  }
};

struct AccountantOptions {
  std::uint64_t subset_cap = kDefaultSubsetCap;
};

struct PrivacyReport {
  double step_rdp_coefficient = 0.0;
  std::size_t steps = 0;
  double delta = 0.0;
  double epsilon_dp = 0.0;
  AdversaryModel adversary;
};

namespace internal {

inline void check_collusion_level(const Graph& g, const AdversaryModel& adv) {
  if (g.size() < 2 || adv.q + 1 >= g.size()) {
    throw Error(ErrorCode::kInvalidCollusionLevel,
                "collusion level " + std::to_string(adv.q) + " on " +
                    std::to_string(g.size()) + " users leaves fewer than 2 honest users");
  }
}

inline void check_noise(const NoiseConfig& noise) {
  if (!(noise.sigma_cdp >= 0.0) || !(noise.sigma_cor >= 0.0) || !(noise.clip >= 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "noise parameters must be nonnegative");
  }
  if (noise.sigma_cdp == 0.0) {
    throw Error(ErrorCode::kSingularCovariance,
                "sigma_cdp = 0 leaves the noise covariance singular");
  }
}

// max_i diag((sigma_cdp^2 I + sigma_cor^2 L)^{-1}) for one residual graph.
inline double max_inverse_diagonal(const Graph& residual, double sigma_cdp, double sigma_cor) {
  Matrix cov = sigma_cor * sigma_cor * laplacian(residual);
  cov.diagonal().array() += sigma_cdp * sigma_cdp;
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kSingularCovariance, "noise covariance is not positive definite");
  }
  // diag(Sigma^{-1})_i = |L^{-1} e_i|^2 with Sigma = L L^T.
  const auto n = cov.rows();
  Matrix inv_factor = llt.matrixL().solve(Matrix::Identity(n, n));
  return inv_factor.colwise().squaredNorm().maxCoeff();
}

}  // namespace internal

// Exact per-step SecRDP coefficient: max over every q-subset of colluding
// users of 2 C^2 max_i diag(Sigma^{-1}).
inline double step_epsilon_exact(const Graph& g, const NoiseConfig& noise,
                                 const AdversaryModel& adv,
                                 const AccountantOptions& opts = {}) {
  internal::check_collusion_level(g, adv);
  internal::check_noise(noise);
  const double scale = 2.0 * noise.clip * noise.clip;
  if (adv.q == 0) {
    return scale * internal::max_inverse_diagonal(g, noise.sigma_cdp, noise.sigma_cor);
  }
  double worst = 0.0;
  for_each_vertex_subset(g.size(), adv.q, opts.subset_cap,
                         [&](const std::vector<std::size_t>& removed) {
                           worst = std::max(worst, internal::max_inverse_diagonal(
                                                       g.without_vertices(removed),
                                                       noise.sigma_cdp, noise.sigma_cor));
                         });
  return scale * worst;
}

// Closed-form upper bound
//   2 C^2 (1/((n-q) s_cdp^2) + (1 - 1/(n-q)) / (s_cdp^2 + a_q(G) s_cor^2)).
inline double step_epsilon_bound(const Graph& g, const NoiseConfig& noise,
                                 const AdversaryModel& adv,
                                 const AccountantOptions& opts = {}) {
  internal::check_collusion_level(g, adv);
  internal::check_noise(noise);
  const double a_q = min_connectivity_after_deletion(g, adv.q, opts.subset_cap);
  const double honest = static_cast<double>(g.size() - adv.q);
  const double var_cdp = noise.sigma_cdp * noise.sigma_cdp;
  const double var_cor = noise.sigma_cor * noise.sigma_cor;
  return 2.0 * noise.clip * noise.clip *
         (1.0 / (honest * var_cdp) + (1.0 - 1.0 / honest) / (var_cdp + a_q * var_cor));
}

// lim_{sigma_cor -> inf} of step_epsilon_exact: the correlated noise hides
// everything except the mean of each connected component of the residual
// graph, so a vertex in a component of size m keeps 1/(m sigma_cdp^2).
inline double step_epsilon_floor(const Graph& g, double sigma_cdp, double clip,
                                 const AdversaryModel& adv,
                                 const AccountantOptions& opts = {}) {
  internal::check_collusion_level(g, adv);
  internal::check_noise(NoiseConfig{sigma_cdp, 0.0, clip});
  std::size_t smallest = g.size();
  auto visit = [&](const Graph& residual) {
    auto label = residual.components();
    std::vector<std::size_t> sizes(residual.size(), 0);
    for (std::size_t c : label) ++sizes[c];
    for (std::size_t s : sizes) {
      if (s > 0) smallest = std::min(smallest, s);
    }
  };
  if (adv.q == 0) {
    visit(g);
  } else {
    for_each_vertex_subset(g.size(), adv.q, opts.subset_cap,
                           [&](const std::vector<std::size_t>& removed) {
                             visit(g.without_vertices(removed));
                           });
  }
  return 2.0 * clip * clip / (static_cast<double>(smallest) * sigma_cdp * sigma_cdp);
}

inline void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::kInvalidDelta, "delta must lie in (0, 1)");
  }
}

// T-fold RDP composition followed by conversion to (eps, delta)-DP at the
// optimal order alpha* = 1 + sqrt(log(1/delta) / (T eps_step)):
//   eps_dp = T eps_step + 2 sqrt(T eps_step log(1/delta)).
inline double compose_and_convert(double eps_step, std::size_t steps, double delta) {
  check_delta(delta);
  if (!(eps_step >= 0.0)) {
    throw Error(ErrorCode::kInvalidTarget, "per-step RDP coefficient must be nonnegative");
  }
  if (steps == 0) throw Error(ErrorCode::kInvalidConfig, "steps must be >= 1");
  const double total = static_cast<double>(steps) * eps_step;
  return total + 2.0 * std::sqrt(total * std::log(1.0 / delta));
}

// Inverse of compose_and_convert in eps_step: the largest per-step
// coefficient whose T-step composition stays within eps_dp.
inline double step_budget_for(double eps_dp, std::size_t steps, double delta) {
  check_delta(delta);
  if (!(eps_dp > 0.0)) throw Error(ErrorCode::kInvalidTarget, "epsilon must be positive");
  if (steps == 0) throw Error(ErrorCode::kInvalidConfig, "steps must be >= 1");
  const double log_inv_delta = std::log(1.0 / delta);
  const double root = std::sqrt(log_inv_delta + eps_dp) - std::sqrt(log_inv_delta);
  return root * root / static_cast<double>(steps);
}

inline PrivacyReport account(const Graph& g, const NoiseConfig& noise,
                             const AdversaryModel& adv, std::size_t steps, double delta,
                             const AccountantOptions& opts = {}) {
  PrivacyReport report;
  report.step_rdp_coefficient = step_epsilon_exact(g, noise, adv, opts);
  report.steps = steps;
  report.delta = delta;
  report.epsilon_dp = compose_and_convert(report.step_rdp_coefficient, steps, delta);
  report.adversary = adv;
  return report;
}

// Per-user Gaussian mechanism with no secrets: 2 C^2 / sigma^2 <= eps_step.
inline double ldp_sigma(double clip, double eps_step) {
  if (!(eps_step > 0.0)) throw Error(ErrorCode::kInvalidTarget, "eps_step must be positive");
  return clip * std::sqrt(2.0 / eps_step);
}

// Noise on each user whose n-user average matches a central Gaussian
// mechanism with the same per-step budget.
inline double cdp_sigma(std::size_t n, double clip, double eps_step) {
  if (!(eps_step > 0.0)) throw Error(ErrorCode::kInvalidTarget, "eps_step must be positive");
  if (n == 0) throw Error(ErrorCode::kInvalidSize, "n must be >= 1");
  return clip * std::sqrt(2.0 / (static_cast<double>(n) * eps_step));
}

struct Calibration {
  NoiseConfig noise;
  double target_epsilon = 0.0;
  double achieved_epsilon = 0.0;
  double step_rdp = 0.0;
};

// sigma_cdp^2 = 32 C^2 T log(1/delta) / ((n-q) eps^2),
// sigma_cor^2 = 32 C^2 T log(1/delta) / (a_q(G) eps^2).
// The result is re-accounted with the exact accountant.
inline Calibration calibrate_closed_form(double clip, std::size_t steps, double eps_target,
                                         double delta, const Graph& g,
                                         const AdversaryModel& adv,
                                         const AccountantOptions& opts = {}) {
  check_delta(delta);
  if (!(eps_target > 0.0)) throw Error(ErrorCode::kInvalidTarget, "epsilon must be positive");
  if (!(clip > 0.0)) throw Error(ErrorCode::kInvalidConfig, "clipping threshold must be positive");
  if (steps == 0) throw Error(ErrorCode::kInvalidConfig, "steps must be >= 1");
  const double log_inv_delta = std::log(1.0 / delta);
  if (eps_target > log_inv_delta) {
    throw Error(ErrorCode::kOutOfRegime, "closed-form calibration requires epsilon <= log(1/delta)");
  }
  internal::check_collusion_level(g, adv);
  const double a_q = min_connectivity_after_deletion(g, adv.q, opts.subset_cap);
  if (!(a_q > 1e-9)) {
    throw Error(ErrorCode::kGraphNotSufficientlyConnected,
                "graph is not (q+1)-connected for q = " + std::to_string(adv.q));
  }
  const double numerator =
      32.0 * clip * clip * static_cast<double>(steps) * log_inv_delta / (eps_target * eps_target);
  Calibration out;
  out.noise.clip = clip;
  out.noise.sigma_cdp = std::sqrt(numerator / static_cast<double>(g.size() - adv.q));
  out.noise.sigma_cor = std::sqrt(numerator / a_q);
  out.target_epsilon = eps_target;
  out.step_rdp = step_epsilon_exact(g, out.noise, adv, opts);
  out.achieved_epsilon = compose_and_convert(out.step_rdp, steps, delta);
  return out;
}

struct SearchOptions {
  double sigma_max = 0.0;  // 0 selects 1e3 * C
  double relative_tolerance = 1e-6;
  int max_iterations = 100;
  AccountantOptions accountant;
};

// Smallest sigma_cor in [0, sigma_max] whose exact step coefficient is at
// most eps_step_target. Relies on step_epsilon_exact being non-increasing
// in sigma_cor.
inline double calibrate_binary_search(const Graph& g, double sigma_cdp, double clip,
                                      double eps_step_target, const AdversaryModel& adv,
                                      const SearchOptions& opts = {}) {
  if (!(eps_step_target > 0.0)) {
    throw Error(ErrorCode::kInvalidTarget, "per-step target must be positive");
  }
  auto eps_at = [&](double sigma_cor) {
    return step_epsilon_exact(g, NoiseConfig{sigma_cdp, sigma_cor, clip}, adv, opts.accountant);
  };
  if (eps_at(0.0) <= eps_step_target) return 0.0;
  const double floor = step_epsilon_floor(g, sigma_cdp, clip, adv, opts.accountant);
  if (eps_step_target <= floor) {
    throw Error(ErrorCode::kUnreachableTarget,
                "target is at or below the sigma_cor -> infinity limit " + std::to_string(floor));
  }
  double hi = opts.sigma_max > 0.0 ? opts.sigma_max : 1e3 * clip;
  if (eps_at(hi) > eps_step_target) {
    throw Error(ErrorCode::kUnreachableTarget,
                "target needs sigma_cor beyond the search bracket " + std::to_string(hi));
  }
  double lo = 0.0;
  for (int it = 0; it < opts.max_iterations && hi - lo > opts.relative_tolerance * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (eps_at(mid) <= eps_step_target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace decor
