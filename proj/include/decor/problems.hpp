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
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "decor/error.hpp"
#include "decor/graph.hpp"
#include "decor/noise.hpp"

namespace decor {

// Analysis constants used by the theoretical stepsize schedules. Values
// that are not known for a problem stay nullopt and must be configured.
struct ProblemConstants {
  std::optional<double> smoothness;      // L
  std::optional<double> pl_constant;     // mu
  std::optional<double> heterogeneity_p; // P
  std::optional<double> noise_m;         // M
  std::optional<double> sigma_star_sq;
  std::optional<double> zeta_star_sq;
};

// Distributed objective F(x) = (1/n) sum_i F_i(x).
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t num_users() const = 0;

  virtual double user_loss(std::size_t user, const Vector& x) const = 0;
  virtual Vector user_gradient(std::size_t user, const Vector& x) const = 0;

  // Local sample count; sample_gradient(i, x, s) for s < num_samples(i) is
  // the per-sample gradient whose uniform average is user_gradient.
  virtual std::size_t num_samples(std::size_t user) const = 0;
  virtual Vector sample_gradient(std::size_t user, const Vector& x,
                                 std::size_t sample) const = 0;

  virtual ProblemConstants constants() const { return {}; }
  virtual std::optional<double> optimal_value() const { return std::nullopt; }
  virtual std::optional<double> accuracy(const Vector&) const { return std::nullopt; }

  double loss(const Vector& x) const {
    double total = 0.0;
    for (std::size_t i = 0; i < num_users(); ++i) total += user_loss(i, x);
    return total / static_cast<double>(num_users());
  }

  Vector gradient(const Vector& x) const {
    Vector total = Vector::Zero(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < num_users(); ++i) total += user_gradient(i, x);
    return total / static_cast<double>(num_users());
  }
};

// F_i(x) = 1/2 |A_i x - b_i|^2 with A_i = (i / sqrt(n)) I and
// b_i ~ N(0, I / i^2), users indexed i = 1..n. Gradients are deterministic.
class LeastSquaresProblem final : public Problem {
 public:
  LeastSquaresProblem(std::size_t n, std::size_t d, std::uint64_t seed) : n_(n), d_(d) {
    if (n == 0 || d == 0) throw Error(ErrorCode::kInvalidSize, "least squares needs n, d >= 1");
    scale_.resize(n);
    targets_.resize(n);
    double sum_sq = 0.0;
    Vector weighted = Vector::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < n; ++k) {
      const double i = static_cast<double>(k + 1);
      scale_[k] = i / std::sqrt(static_cast<double>(n));
      targets_[k] = Vector::Zero(static_cast<Eigen::Index>(d));
      fill_gaussian(stream_key(seed, k, kUserDomain), 1.0 / i, targets_[k]);
      sum_sq += scale_[k] * scale_[k];
      weighted += scale_[k] * targets_[k];
    }
    optimum_ = weighted / sum_sq;
  }

  std::size_t dim() const override { return d_; }
  std::size_t num_users() const override { return n_; }

  double scale(std::size_t user) const { return scale_.at(user); }
  const Vector& target(std::size_t user) const { return targets_.at(user); }
  const Vector& minimizer() const { return optimum_; }

  double user_loss(std::size_t user, const Vector& x) const override {
    return 0.5 * (scale_.at(user) * x - targets_[user]).squaredNorm();
  }

  Vector user_gradient(std::size_t user, const Vector& x) const override {
    const double a = scale_.at(user);
    return a * a * x - a * targets_[user];
  }

  std::size_t num_samples(std::size_t) const override { return 1; }
  Vector sample_gradient(std::size_t user, const Vector& x, std::size_t) const override {
    return user_gradient(user, x);
  }

  // mu = mean a_i^2 (the Hessian of F is mu I), L = max a_i^2 = n.
  // P and zeta_star^2 come from |a^2 x - a b|^2 <= 2 a^4 |x - x*|^2 +
  // 2 |grad F_i(x*)|^2 together with |grad F(x)|^2 = mu^2 |x - x*|^2.
  // Gradients are exact, so M = sigma_star = 0.
  ProblemConstants constants() const override {
    double mean_a2 = 0.0;
    double mean_a4 = 0.0;
    double max_a2 = 0.0;
    double zeta = 0.0;
    for (std::size_t k = 0; k < n_; ++k) {
      const double a2 = scale_[k] * scale_[k];
      mean_a2 += a2;
      mean_a4 += a2 * a2;
      max_a2 = std::max(max_a2, a2);
      zeta += user_gradient(k, optimum_).squaredNorm();
    }
    const double inv_n = 1.0 / static_cast<double>(n_);
    mean_a2 *= inv_n;
    mean_a4 *= inv_n;
    ProblemConstants c;
    c.smoothness = max_a2;
    c.pl_constant = mean_a2;
    c.heterogeneity_p = 2.0 * mean_a4 / (mean_a2 * mean_a2);
    c.noise_m = 0.0;
    c.sigma_star_sq = 0.0;
    c.zeta_star_sq = 2.0 * zeta * inv_n;
    return c;
  }

  std::optional<double> optimal_value() const override { return loss(optimum_); }

 private:
  std::size_t n_;
  std::size_t d_;
  std::vector<double> scale_;
  std::vector<Vector> targets_;
  Vector optimum_;
};

inline std::unique_ptr<LeastSquaresProblem> synthetic_least_squares(std::size_t n, std::size_t d,
                                                                    std::uint64_t seed) {
  return std::make_unique<LeastSquaresProblem>(n, d, seed);
}

// ---------------------------------------------------------------------------
// Sparse datasets

struct SparseRow {
  std::vector<std::pair<std::uint32_t, double>> features;  // 0-based, increasing
  double label = 1.0;                                      // -1 or +1

  double dot(const Vector& x) const {
    double s = 0.0;
    for (auto [idx, val] : features) s += val * x(static_cast<Eigen::Index>(idx));
    return s;
  }
};

struct Dataset {
  std::vector<SparseRow> rows;
  std::size_t dim = 0;
};

// LibSVM text: "label idx:val idx:val ..." with 1-based strictly increasing
// indices. Labels are mapped 0 -> -1; the only accepted labels are -1, 0, +1.
// dim_override, when nonzero, fixes the dimension (indices beyond it are an
// error).
inline Dataset parse_libsvm(std::istream& in, std::size_t dim_override = 0) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_index = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": " + what);
  };
  auto parse_double = [&](const std::string& token) {
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(token, &used);
    } catch (const std::exception&) {
      fail("invalid number '" + token + "'");
    }
    if (used != token.size() || !std::isfinite(value)) fail("invalid number '" + token + "'");
    return value;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream tokens(line);
    std::string token;
    if (!(tokens >> token)) continue;
    SparseRow row;
    const double label = parse_double(token);
    if (label == 1.0) {
      row.label = 1.0;
    } else if (label == -1.0 || label == 0.0) {
      row.label = -1.0;
    } else {
      fail("unsupported label '" + token + "'");
    }
    std::size_t previous = 0;
    while (tokens >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos || colon == 0) fail("expected idx:val, got '" + token + "'");
      const std::string idx_text = token.substr(0, colon);
      if (!std::all_of(idx_text.begin(), idx_text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        fail("invalid index '" + idx_text + "'");
      }
      const std::size_t idx = std::stoull(idx_text);
      if (idx == 0) fail("indices are 1-based");
      if (idx <= previous) fail("indices must be strictly increasing");
      if (dim_override != 0 && idx > dim_override) fail("index exceeds dimension");
      previous = idx;
      row.features.emplace_back(static_cast<std::uint32_t>(idx - 1),
                                parse_double(token.substr(colon + 1)));
      max_index = std::max(max_index, idx);
    }
    data.rows.push_back(std::move(row));
  }
  data.dim = dim_override != 0 ? dim_override : max_index;
  return data;
}

inline void write_libsvm(std::ostream& out, const Dataset& data) {
  out << std::setprecision(17);
  for (const SparseRow& row : data.rows) {
    out << (row.label > 0 ? "+1" : "-1");
    for (auto [idx, val] : row.features) out << ' ' << (idx + 1) << ':' << val;
    out << '\n';
  }
}

// Deterministic Fisher-Yates shuffle keyed by `seed`, then n contiguous
// equal shards; the remainder (< n rows) is dropped.
inline std::vector<Dataset> partition(const Dataset& data, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::kInvalidSize, "partition needs n >= 1");
  if (data.rows.size() < n) {
    throw Error(ErrorCode::kTooFewRows, std::to_string(data.rows.size()) +
                                            " rows cannot fill " + std::to_string(n) + " shards");
  }
  std::vector<std::size_t> order(data.rows.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  const std::uint64_t key = derive(seed, kSampleDomain);
  for (std::size_t k = order.size(); k > 1; --k) {
    const auto j = static_cast<std::size_t>(derive(key, k) % k);
    std::swap(order[k - 1], order[j]);
  }
  const std::size_t per_shard = data.rows.size() / n;
  std::vector<Dataset> shards(n);
  for (std::size_t s = 0; s < n; ++s) {
    shards[s].dim = data.dim;
    shards[s].rows.reserve(per_shard);
    for (std::size_t k = 0; k < per_shard; ++k) {
      shards[s].rows.push_back(data.rows[order[s * per_shard + k]]);
    }
  }
  return shards;
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// l(x; a, y) = log(1 + exp(-y x.a)) + lambda |x|^2 on each user's shard.
class LogisticProblem final : public Problem {
 public:
  LogisticProblem(std::vector<Dataset> shards, double lambda)
      : shards_(std::move(shards)), lambda_(lambda) {
    if (lambda < 0.0) throw Error(ErrorCode::kInvalidRegularizer, "lambda must be >= 0");
    if (shards_.empty()) throw Error(ErrorCode::kInvalidSize, "no users");
    for (const Dataset& s : shards_) {
      if (s.rows.empty()) throw Error(ErrorCode::kTooFewRows, "empty user shard");
      dim_ = std::max(dim_, s.dim);
    }
  }

  std::size_t dim() const override { return dim_; }
  std::size_t num_users() const override { return shards_.size(); }
  double lambda() const { return lambda_; }

  double sample_loss(const SparseRow& row, const Vector& x) const {
    return softplus(-row.label * row.dot(x)) + lambda_ * x.squaredNorm();
  }

  Vector row_gradient(const SparseRow& row, const Vector& x) const {
    Vector g = 2.0 * lambda_ * x;
    const double weight = -row.label * sigmoid(-row.label * row.dot(x));
    for (auto [idx, val] : row.features) g(static_cast<Eigen::Index>(idx)) += weight * val;
    return g;
  }

  double user_loss(std::size_t user, const Vector& x) const override {
    const auto& rows = shards_.at(user).rows;
    double total = 0.0;
    for (const SparseRow& row : rows) total += softplus(-row.label * row.dot(x));
    return total / static_cast<double>(rows.size()) + lambda_ * x.squaredNorm();
  }

  Vector user_gradient(std::size_t user, const Vector& x) const override {
    const auto& rows = shards_.at(user).rows;
    Vector g = Vector::Zero(static_cast<Eigen::Index>(dim_));
    for (const SparseRow& row : rows) {
      const double weight = -row.label * sigmoid(-row.label * row.dot(x));
      for (auto [idx, val] : row.features) g(static_cast<Eigen::Index>(idx)) += weight * val;
    }
    return g / static_cast<double>(rows.size()) + 2.0 * lambda_ * x;
  }

  std::size_t num_samples(std::size_t user) const override { return shards_.at(user).rows.size(); }

  Vector sample_gradient(std::size_t user, const Vector& x, std::size_t sample) const override {
    return row_gradient(shards_.at(user).rows.at(sample), x);
  }

  // L <= max |a|^2 / 4 + 2 lambda, mu = 2 lambda.
  ProblemConstants constants() const override {
    double max_sq = 0.0;
    for (const Dataset& s : shards_) {
      for (const SparseRow& row : s.rows) {
        double sq = 0.0;
        for (auto [idx, val] : row.features) sq += val * val;
        max_sq = std::max(max_sq, sq);
      }
    }
    ProblemConstants c;
    c.smoothness = max_sq / 4.0 + 2.0 * lambda_;
    if (lambda_ > 0.0) c.pl_constant = 2.0 * lambda_;
    return c;
  }

  std::optional<double> accuracy(const Vector& x) const override {
    std::size_t correct = 0;
    std::size_t total = 0;
    for (const Dataset& s : shards_) {
      for (const SparseRow& row : s.rows) {
        correct += (row.dot(x) >= 0.0) == (row.label > 0.0) ? 1 : 0;
        ++total;
      }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
  }

 private:
  std::vector<Dataset> shards_;
  double lambda_;
  std::size_t dim_ = 0;
};

inline std::unique_ptr<LogisticProblem> logistic_problem(const Dataset& data, double lambda,
                                                         std::size_t n, std::uint64_t seed) {
  if (lambda < 0.0) throw Error(ErrorCode::kInvalidRegularizer, "lambda must be >= 0");
  if (data.rows.empty()) throw Error(ErrorCode::kTooFewRows, "dataset is empty");
  return std::make_unique<LogisticProblem>(partition(data, n, seed), lambda);
}

// Two-class Gaussian blobs in LibSVM form, used for tests and demos when no
// real dataset is available. Features are sparse: roughly `density` of the
// coordinates are nonzero.
inline Dataset synthetic_classification(std::size_t rows, std::size_t dim, double density,
                                        std::uint64_t seed) {
  Dataset data;
  data.dim = dim;
  Vector direction = Vector::Zero(static_cast<Eigen::Index>(dim));
  fill_gaussian(stream_key(seed, 0, kSampleDomain), 1.0, direction);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::uint64_t key = stream_key(seed, r + 1, kSampleDomain);
    Vector values = Vector::Zero(static_cast<Eigen::Index>(dim));
    fill_gaussian(key, 1.0, values);
    SparseRow row;
    row.label = uniform_at(key, 1u << 20) < 0.5 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < dim; ++k) {
      if (uniform_at(key, (1u << 21) + k) >= density) continue;
      const auto kk = static_cast<Eigen::Index>(k);
      row.features.emplace_back(static_cast<std::uint32_t>(k),
                                values(kk) + 0.8 * row.label * direction(kk));
    }
    data.rows.push_back(std::move(row));
  }
  return data;
}

}  // namespace decor
