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

// Reference computations that share no code path with the library: a
// cyclic Jacobi eigensolver, Gauss-Jordan inversion and brute-force
// minimization over alpha. Plain std::vector matrices on purpose.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace decor::oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense zeros(std::size_t n) { return Dense(n, std::vector<double>(n, 0.0)); }

inline Dense laplacian(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  Dense l = zeros(n);
  for (auto [a, b] : edges) {
    l[a][b] -= 1;
    l[b][a] -= 1;
    l[a][a] += 1;
    l[b][b] += 1;
  }
  return l;
}

// Ascending eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> jacobi_eigenvalues(Dense a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i][i];
  std::sort(eig.begin(), eig.end());
  return eig;
}

// Gauss-Jordan inverse with partial pivoting.
inline Dense inverse(Dense a) {
  const std::size_t n = a.size();
  Dense inv = zeros(n);
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    std::swap(inv[col], inv[pivot]);
    const double d = a[col][col];
    for (std::size_t k = 0; k < n; ++k) {
      a[col][k] /= d;
      inv[col][k] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      for (std::size_t k = 0; k < n; ++k) {
        a[r][k] -= f * a[col][k];
        inv[r][k] -= f * inv[col][k];
      }
    }
  }
  return inv;
}

// 2 C^2 max diag((s_cdp^2 I + s_cor^2 L)^{-1}) for the graph minus `removed`.
inline double step_epsilon(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                           const std::vector<std::size_t>& removed, double s_cdp, double s_cor,
                           double c) {
  std::vector<long> index(n, -1);
  std::size_t m = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (std::find(removed.begin(), removed.end(), i) == removed.end()) index[i] = static_cast<long>(m++);
  std::vector<std::pair<std::size_t, std::size_t>> kept;
  for (auto [a, b] : edges)
    if (index[a] >= 0 && index[b] >= 0)
      kept.emplace_back(static_cast<std::size_t>(index[a]), static_cast<std::size_t>(index[b]));
  Dense cov = laplacian(m, kept);
  for (auto& row : cov)
    for (double& v : row) v *= s_cor * s_cor;
  for (std::size_t i = 0; i < m; ++i) cov[i][i] += s_cdp * s_cdp;
  Dense inv = inverse(cov);
  double best = 0.0;
  for (std::size_t i = 0; i < m; ++i) best = std::max(best, inv[i][i]);
  return 2.0 * c * c * best;
}

// min over 200 log-spaced alpha in [1.01, 1024] of T alpha eps + log(1/delta)/(alpha-1).
inline double compose_grid(double eps_step, std::size_t steps, double delta) {
  double best = 1e300;
  for (int k = 0; k < 200; ++k) {
    const double alpha = 1.01 * std::pow(1024.0 / 1.01, k / 199.0);
    best = std::min(best, static_cast<double>(steps) * alpha * eps_step +
                              std::log(1.0 / delta) / (alpha - 1.0));
  }
  return best;
}

}  // namespace decor::oracle
