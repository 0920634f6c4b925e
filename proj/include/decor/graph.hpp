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
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "decor/error.hpp"

namespace decor {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Undirected edge stored with u < v.
struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Simple undirected graph on vertices 0..n-1.
class Graph {
 public:
  Graph() = default;

  // Canonicalizes every pair to (min, max), rejects self-loops and
  // out-of-range endpoints, and merges duplicates.
  Graph(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& pairs)
      : n_(n), adjacency_(n) {
    std::set<Edge> unique;
    for (auto [a, b] : pairs) {
      if (a >= n || b >= n) {
        throw Error(ErrorCode::kInvalidTopology,
                    "edge endpoint out of range: " + std::to_string(a) + " " +
                        std::to_string(b));
      }
      if (a == b) {
        throw Error(ErrorCode::kInvalidTopology,
                    "self-loop at vertex " + std::to_string(a));
      }
      unique.insert(Edge{std::min(a, b), std::max(a, b)});
    }
    edges_.assign(unique.begin(), unique.end());
    for (const Edge& e : edges_) {
      adjacency_[e.u].push_back(e.v);
      adjacency_[e.v].push_back(e.u);
    }
    for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
  }

  std::size_t size() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<std::size_t>& neighbors(std::size_t i) const {
    return adjacency_.at(i);
  }
  std::size_t degree(std::size_t i) const { return adjacency_.at(i).size(); }

  bool has_edge(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= n_) return false;
    const auto& nbrs = adjacency_[i];
    return std::binary_search(nbrs.begin(), nbrs.end(), j);
  }

  std::size_t min_degree() const {
    std::size_t k = std::numeric_limits<std::size_t>::max();
    for (const auto& nbrs : adjacency_) k = std::min(k, nbrs.size());
    return n_ == 0 ? 0 : k;
  }

  bool is_regular() const {
    for (const auto& nbrs : adjacency_) {
      if (nbrs.size() != adjacency_.front().size()) return false;
    }
    return true;
  }

  // Induced subgraph on the vertices not listed in `removed`; survivors keep
  // their relative order.
  Graph without_vertices(const std::vector<std::size_t>& removed) const {
    std::vector<std::size_t> new_index(n_, kRemoved);
    std::vector<bool> drop(n_, false);
    for (std::size_t r : removed) drop.at(r) = true;
    std::size_t next = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (!drop[i]) new_index[i] = next++;
    }
    std::vector<std::pair<std::size_t, std::size_t>> kept;
    for (const Edge& e : edges_) {
      if (new_index[e.u] != kRemoved && new_index[e.v] != kRemoved) {
        kept.emplace_back(new_index[e.u], new_index[e.v]);
      }
    }
    return Graph(next, kept);
  }

  // Component label per vertex, labels numbered in order of first vertex.
  std::vector<std::size_t> components() const {
    std::vector<std::size_t> label(n_, kRemoved);
    std::size_t count = 0;
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < n_; ++s) {
      if (label[s] != kRemoved) continue;
      label[s] = count;
      stack.push_back(s);
      while (!stack.empty()) {
        std::size_t x = stack.back();
        stack.pop_back();
        for (std::size_t y : adjacency_[x]) {
          if (label[y] == kRemoved) {
            label[y] = count;
            stack.push_back(y);
          }
        }
      }
      ++count;
    }
    return label;
  }

  bool is_connected() const {
    if (n_ <= 1) return true;
    auto label = components();
    return std::all_of(label.begin(), label.end(),
                       [](std::size_t c) { return c == 0; });
  }

 private:
  static constexpr std::size_t kRemoved = std::numeric_limits<std::size_t>::max();

  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

enum class Topology { kRing, kGrid2dTorus, kComplete, kStar };

constexpr std::string_view topology_name(Topology kind) {
  switch (kind) {
    case Topology::kRing: return "ring";
    case Topology::kGrid2dTorus: return "grid";
    case Topology::kComplete: return "complete";
    case Topology::kStar: return "star";
  }
  return "unknown";
}

// Most-square factorization n = rows * cols with 2 <= rows <= cols.
inline std::pair<std::size_t, std::size_t> grid_shape(std::size_t n) {
  for (auto r = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
       r >= 2; --r) {
    if (n % r == 0) return {r, n / r};
  }
  throw Error(ErrorCode::kInvalidGrid,
              "cannot arrange " + std::to_string(n) +
                  " vertices as a torus with both sides >= 2");
}

inline Graph build_topology(Topology kind, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidSize, "topology needs n >= 1");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  switch (kind) {
    case Topology::kRing:
      if (n >= 2) {
        for (std::size_t i = 0; i < n; ++i) pairs.emplace_back(i, (i + 1) % n);
      }
      break;
    case Topology::kGrid2dTorus: {
      auto [rows, cols] = grid_shape(n);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          std::size_t v = r * cols + c;
          pairs.emplace_back(v, r * cols + (c + 1) % cols);
          pairs.emplace_back(v, ((r + 1) % rows) * cols + c);
        }
      }
      break;
    }
    case Topology::kComplete:
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
      }
      break;
    case Topology::kStar:
      for (std::size_t j = 1; j < n; ++j) pairs.emplace_back(0, j);
      break;
  }
  return Graph(n, pairs);
}

inline Topology parse_topology_kind(std::string_view name) {
  if (name == "ring") return Topology::kRing;
  if (name == "grid" || name == "grid2d_torus" || name == "torus") {
    return Topology::kGrid2dTorus;
  }
  if (name == "complete" || name == "full") return Topology::kComplete;
  if (name == "star") return Topology::kStar;
  throw Error(ErrorCode::kInvalidTopology,
              "unknown topology '" + std::string(name) + "'");
}

// Edge-list text: one "i j" pair per line, 0-indexed; '#' starts a comment.
// n defaults to 1 + the largest endpoint seen.
inline Graph read_edge_list(std::istream& in, std::size_t n = 0) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t max_vertex = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    long long a = 0;
    long long b = 0;
    if (!(fields >> a)) continue;
    std::string rest;
    if (!(fields >> b) || a < 0 || b < 0 || (fields >> rest)) {
      throw Error(ErrorCode::kParseError,
                  "edge list line " + std::to_string(line_no) + ": expected 'i j'");
    }
    pairs.emplace_back(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    max_vertex = std::max({max_vertex, static_cast<std::size_t>(a),
                           static_cast<std::size_t>(b)});
  }
  if (n == 0) n = pairs.empty() ? 0 : max_vertex + 1;
  if (n == 0) throw Error(ErrorCode::kInvalidSize, "edge list defines no vertices");
  return Graph(n, pairs);
}

// Accepts "ring:16", "grid:16", "complete:16", "star:16" or "edges:<path>".
// Without a ":n" suffix, `default_n` is used.
inline Graph parse_topology_spec(std::string_view spec, std::size_t default_n = 0) {
  auto colon = spec.find(':');
  std::string_view kind = spec.substr(0, colon);
  std::string_view arg =
      colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  if (kind == "edges" || kind == "file") {
    std::ifstream in{std::string(arg)};
    if (!in) {
      throw Error(ErrorCode::kIoError, "cannot open edge list '" + std::string(arg) + "'");
    }
    return read_edge_list(in, default_n);
  }
  std::size_t n = default_n;
  if (!arg.empty()) {
    try {
      std::size_t used = 0;
      long long parsed = std::stoll(std::string(arg), &used);
      if (used != arg.size() || parsed < 0) throw std::invalid_argument("n");
      n = static_cast<std::size_t>(parsed);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidTopology,
                  "bad vertex count in topology '" + std::string(spec) + "'");
    }
  }
  return build_topology(parse_topology_kind(kind), n);
}

// L = D - A.
inline Matrix laplacian(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Matrix lap = Matrix::Zero(n, n);
  for (const Edge& e : g.edges()) {
    const auto u = static_cast<Eigen::Index>(e.u);
    const auto v = static_cast<Eigen::Index>(e.v);
    lap(u, v) -= 1.0;
    lap(v, u) -= 1.0;
    lap(u, u) += 1.0;
    lap(v, v) += 1.0;
  }
  return lap;
}

// Ascending eigenvalues of a dense symmetric matrix.
inline Vector symmetric_eigenvalues(const Matrix& m) {
  if (m.rows() == 0) return Vector();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

inline Vector laplacian_eigenvalues(const Graph& g) {
  return symmetric_eigenvalues(laplacian(g));
}

// Second-smallest Laplacian eigenvalue. Rounding can push a zero eigenvalue
// slightly negative; the result is clamped at 0.
inline double algebraic_connectivity(const Graph& g) {
  if (g.size() < 2) {
    throw Error(ErrorCode::kInvalidSize, "algebraic connectivity needs n >= 2");
  }
  if (!g.is_connected()) return 0.0;
  return std::max(0.0, laplacian_eigenvalues(g)(1));
}

inline constexpr std::uint64_t kDefaultSubsetCap = 1'000'000;

// C(n, k), saturating at UINT64_MAX.
inline std::uint64_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    const std::uint64_t num = n - k + i;
    if (result > std::numeric_limits<std::uint64_t>::max() / num) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    result = result * num / i;
  }
  return result;
}

// Visits every size-q vertex subset in lexicographic order. Throws
// too-many-subsets when C(n, q) exceeds `cap`.
inline void for_each_vertex_subset(
    std::size_t n, std::size_t q, std::uint64_t cap,
    const std::function<void(const std::vector<std::size_t>&)>& visit) {
  const std::uint64_t count = binomial(n, q);
  if (count > cap) {
    throw Error(ErrorCode::kTooManySubsets,
                "C(" + std::to_string(n) + "," + std::to_string(q) +
                    ") subsets exceeds cap " + std::to_string(cap));
  }
  std::vector<std::size_t> subset(q);
  std::iota(subset.begin(), subset.end(), std::size_t{0});
  while (true) {
    visit(subset);
    std::size_t pos = q;
    while (pos > 0 && subset[pos - 1] == n - q + pos - 1) --pos;
    if (pos == 0) return;
    ++subset[pos - 1];
    for (std::size_t k = pos; k < q; ++k) subset[k] = subset[k - 1] + 1;
  }
}

// a_q(G): minimum algebraic connectivity over all q-vertex deletions.
inline double min_connectivity_after_deletion(const Graph& g, std::size_t q,
                                              std::uint64_t cap = kDefaultSubsetCap) {
  if (g.size() < 2 || q + 2 > g.size()) {
    throw Error(ErrorCode::kInvalidCollusionLevel,
                "collusion level " + std::to_string(q) + " needs at least q+2 vertices, have " +
                    std::to_string(g.size()));
  }
  double worst = std::numeric_limits<double>::infinity();
  for_each_vertex_subset(g.size(), q, cap, [&](const std::vector<std::size_t>& removed) {
    if (worst == 0.0) return;
    worst = std::min(worst, algebraic_connectivity(g.without_vertices(removed)));
  });
  return worst;
}

// Symmetric doubly stochastic gossip weights.
class MixingMatrix {
 public:
  static constexpr double kRowSumTolerance = 1e-12;

  MixingMatrix() = default;

  explicit MixingMatrix(Matrix w) : w_(std::move(w)) {
    if (w_.rows() != w_.cols()) {
      throw Error(ErrorCode::kInvalidMixingMatrix, "mixing matrix must be square");
    }
    for (Eigen::Index i = 0; i < w_.rows(); ++i) {
      for (Eigen::Index j = 0; j < w_.cols(); ++j) {
        if (w_(i, j) != w_(j, i)) {
          throw Error(ErrorCode::kInvalidMixingMatrix, "mixing matrix is not symmetric");
        }
        if (!(w_(i, j) >= 0.0 && w_(i, j) <= 1.0)) {
          throw Error(ErrorCode::kInvalidMixingMatrix, "mixing weight outside [0,1]");
        }
      }
      if (std::abs(w_.row(i).sum() - 1.0) > kRowSumTolerance) {
        throw Error(ErrorCode::kInvalidMixingMatrix, "mixing matrix row does not sum to 1");
      }
    }
  }

  // W = 11^T / n.
  static MixingMatrix uniform(std::size_t n) {
    const auto size = static_cast<Eigen::Index>(n);
    return MixingMatrix(Matrix::Constant(size, size, 1.0 / static_cast<double>(n)));
  }

  std::size_t size() const { return static_cast<std::size_t>(w_.rows()); }
  const Matrix& matrix() const { return w_; }
  double operator()(std::size_t i, std::size_t j) const {
    return w_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  // True when every nonzero off-diagonal weight sits on an edge of g.
  bool supported_on(const Graph& g) const {
    if (g.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      for (std::size_t j = 0; j < size(); ++j) {
        if (i != j && (*this)(i, j) != 0.0 && !g.has_edge(i, j)) return false;
      }
    }
    return true;
  }

 private:
  Matrix w_;
};

// Metropolis-Hastings weights. Regular graphs get 1/(deg+1) on the closed
// neighborhood; otherwise 1/(1+max(deg_i, deg_j)) off the diagonal with the
// residual on the diagonal.
inline MixingMatrix metropolis_weights(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Matrix w = Matrix::Zero(n, n);
  if (g.is_regular()) {
    const double weight = 1.0 / (static_cast<double>(g.size() ? g.degree(0) : 0) + 1.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      w(ii, ii) = weight;
      for (std::size_t j : g.neighbors(i)) w(ii, static_cast<Eigen::Index>(j)) = weight;
    }
    return MixingMatrix(std::move(w));
  }
  for (const Edge& e : g.edges()) {
    const double weight =
        1.0 / (1.0 + static_cast<double>(std::max(g.degree(e.u), g.degree(e.v))));
    w(static_cast<Eigen::Index>(e.u), static_cast<Eigen::Index>(e.v)) = weight;
    w(static_cast<Eigen::Index>(e.v), static_cast<Eigen::Index>(e.u)) = weight;
  }
  for (Eigen::Index i = 0; i < n; ++i) w(i, i) = 1.0 - w.row(i).sum();
  return MixingMatrix(std::move(w));
}

// p = 1 - (second-largest eigenvalue of W W^T), clamped to [0, 1].
inline double spectral_gap(const MixingMatrix& w) {
  if (w.size() < 2) return 1.0;
  const Matrix& m = w.matrix();
  Vector eig = symmetric_eigenvalues(m * m.transpose());
  return std::clamp(1.0 - eig(eig.size() - 2), 0.0, 1.0);
}

// h_G(W): edge-averaged squared distance between the columns of W at the
// two endpoints. Each edge contributes once per orientation to the
// numerator and to the edge count, so the ratio is sum_e |W_u - W_v|^2 / 2|E|.
inline double weight_heterogeneity(const Graph& g, const MixingMatrix& w) {
  if (g.num_edges() == 0) {
    throw Error(ErrorCode::kUndefinedHeterogeneity, "graph has no edges");
  }
  if (w.size() != g.size()) {
    throw Error(ErrorCode::kInvalidMixingMatrix, "mixing matrix size differs from graph");
  }
  const Matrix& m = w.matrix();
  double total = 0.0;
  for (const Edge& e : g.edges()) {
    total += (m.col(static_cast<Eigen::Index>(e.u)) - m.col(static_cast<Eigen::Index>(e.v)))
                 .squaredNorm();
  }
  return total / (2.0 * static_cast<double>(g.num_edges()));
}

struct SpectralSummary {
  double algebraic_connectivity = 0.0;
  double spectral_gap_p = 0.0;
  double heterogeneity_hg = 0.0;
  std::vector<double> laplacian_eigenvalues;
};

inline SpectralSummary summarize_spectrum(const Graph& g, const MixingMatrix& w) {
  SpectralSummary s;
  Vector eig = laplacian_eigenvalues(g);
  s.laplacian_eigenvalues.assign(eig.data(), eig.data() + eig.size());
  s.algebraic_connectivity = g.size() >= 2 ? algebraic_connectivity(g) : 0.0;
  s.spectral_gap_p = spectral_gap(w);
  s.heterogeneity_hg = g.num_edges() > 0 ? weight_heterogeneity(g, w) : 0.0;
  return s;
}

}  // namespace decor
