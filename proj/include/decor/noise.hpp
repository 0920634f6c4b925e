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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "decor/error.hpp"
#include "decor/graph.hpp"

// Keyed Gaussian noise for DECOR.
//
// Every draw is a pure function of (key, counter): there is no generator
// state, so users, edges and rounds can be produced in any order with
// identical results.
//
//   mix64(z)          splitmix64 finalizer
//   derive(k, x)      mix64(k ^ mix64(x + 0x9e3779b97f4a7c15))
//   edge seed {i,j}   derive(derive(derive(master, kEdgeDomain), min), max)
//   user seed i       derive(derive(master, kUserDomain), i)
//   stream key        derive(derive(derive(seed, round), domain), 0)
//   coordinate 2b,2b+1   Box-Muller on words derive(key, 2b), derive(key, 2b+1)
namespace decor {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
inline constexpr std::uint64_t kEdgeDomain = 0x45444745ULL;        // "EDGE"
inline constexpr std::uint64_t kUserDomain = 0x55534552ULL;        // "USER"
inline constexpr std::uint64_t kCorrelatedDomain = 0x434f5252ULL;  // "CORR"
inline constexpr std::uint64_t kUncorrelatedDomain = 0x4e4f4953ULL;  // "NOIS"
inline constexpr std::uint64_t kSampleDomain = 0x53414d50ULL;      // "SAMP"

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive(std::uint64_t key, std::uint64_t x) {
  return mix64(key ^ mix64(x + kGolden));
}

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t round, std::uint64_t domain) {
  return derive(derive(derive(seed, round), domain), 0);
}

// Uniform in [0, 1) with 53 random bits.
inline double uniform_at(std::uint64_t key, std::uint64_t counter) {
  return static_cast<double>(derive(key, counter) >> 11) * 0x1.0p-53;
}

// Fills `out` with iid N(0, sigma^2) draws from the keyed stream.
inline void fill_gaussian(std::uint64_t key, double sigma, Eigen::Ref<Vector> out) {
  const Eigen::Index d = out.size();
  for (Eigen::Index k = 0; k < d; k += 2) {
    const auto block = static_cast<std::uint64_t>(k / 2);
    const double u1 = static_cast<double>((derive(key, 2 * block) >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform_at(key, 2 * block + 1);
    const double radius = sigma * std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out(k) = radius * std::cos(angle);
    if (k + 1 < d) out(k + 1) = radius * std::sin(angle);
  }
}

inline std::uint64_t edge_seed(std::uint64_t master, std::size_t i, std::size_t j) {
  const auto lo = static_cast<std::uint64_t>(std::min(i, j));
  const auto hi = static_cast<std::uint64_t>(std::max(i, j));
  return derive(derive(derive(master, kEdgeDomain), lo), hi);
}

inline std::uint64_t user_seed(std::uint64_t master, std::size_t i) {
  return derive(derive(master, kUserDomain), static_cast<std::uint64_t>(i));
}

// min{1, C/|g|} g.
inline Vector clip(const Vector& g, double threshold) {
  const double norm = g.norm();
  if (norm <= threshold) return g;
  return g * (threshold / norm);
}

struct EdgeSeed {
  Edge edge;
  std::uint64_t seed = 0;
};

// One seed per edge, keyed by (min, max).
class EdgeSeedTable {
 public:
  EdgeSeedTable() = default;

  explicit EdgeSeedTable(const std::vector<EdgeSeed>& seeds) {
    for (const EdgeSeed& s : seeds) {
      EdgeSeed canonical{Edge{std::min(s.edge.u, s.edge.v), std::max(s.edge.u, s.edge.v)},
                         s.seed};
      seeds_[key(canonical.edge.u, canonical.edge.v)] = canonical;
    }
  }

  static EdgeSeedTable from_master(const Graph& g, std::uint64_t master) {
    std::vector<EdgeSeed> seeds;
    seeds.reserve(g.num_edges());
    for (const Edge& e : g.edges()) seeds.push_back({e, edge_seed(master, e.u, e.v)});
    return EdgeSeedTable(seeds);
  }

  const EdgeSeed& at(std::size_t i, std::size_t j) const {
    auto it = seeds_.find(key(std::min(i, j), std::max(i, j)));
    if (it == seeds_.end()) {
      throw Error(ErrorCode::kMissingSeed,
                  "no seed for edge {" + std::to_string(i) + "," + std::to_string(j) + "}");
    }
    return it->second;
  }

  std::size_t size() const { return seeds_.size(); }

 private:
  static std::uint64_t key(std::size_t lo, std::size_t hi) {
    return (static_cast<std::uint64_t>(lo) << 32) | static_cast<std::uint64_t>(hi);
  }

  std::unordered_map<std::uint64_t, EdgeSeed> seeds_;
};

// v_{from,to} for one round. The lower-indexed endpoint receives +v and the
// higher-indexed one -v, so the two directions are exact negations.
inline Vector correlated_noise(const EdgeSeed& seed, std::uint64_t round, std::size_t from,
                               std::size_t to, std::size_t d, double sigma_cor) {
  const bool forward = from == seed.edge.u && to == seed.edge.v;
  const bool backward = from == seed.edge.v && to == seed.edge.u;
  if (!forward && !backward) {
    throw Error(ErrorCode::kEdgeMismatch,
                "direction (" + std::to_string(from) + "," + std::to_string(to) +
                    ") is not on the seeded edge");
  }
  Vector v = Vector::Zero(static_cast<Eigen::Index>(d));
  if (sigma_cor == 0.0) return v;
  fill_gaussian(stream_key(seed.seed, round, kCorrelatedDomain), sigma_cor, v);
  if (backward) v = -v;
  return v;
}

inline Vector uncorrelated_noise(std::uint64_t seed, std::uint64_t round, std::size_t d,
                                 double sigma_cdp) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(d));
  if (sigma_cdp == 0.0) return v;
  fill_gaussian(stream_key(seed, round, kUncorrelatedDomain), sigma_cdp, v);
  return v;
}

// sum_{j in N_i} v_ij + vbar_i.
inline Vector total_injected_noise(std::size_t user, std::uint64_t round,
                                   const EdgeSeedTable& seeds,
                                   const std::vector<std::size_t>& neighbors, double sigma_cor,
                                   double sigma_cdp, std::size_t d, std::uint64_t own_seed) {
  Vector total = Vector::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t j : neighbors) {
    total += correlated_noise(seeds.at(user, j), round, user, j, d, sigma_cor);
  }
  total += uncorrelated_noise(own_seed, round, d, sigma_cdp);
  return total;
}

}  // namespace decor
