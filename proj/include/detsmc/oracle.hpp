// Copyright 2026 The detsmc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Exhaustive-search optima over every multiplicity vector of a small
// population. These are independent of the greedy algorithms in
// selection.hpp and exist to certify them.

#ifndef DETSMC_ORACLE_HPP
#define DETSMC_ORACLE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "detsmc/error.hpp"
#include "detsmc/particles.hpp"

namespace detsmc {

inline constexpr std::size_t kMaxOracleSize = 10;

struct OracleResult {
  MultiplicityVector multiplicities;
  double objective = 0.0;
};

/// Calls visit(counts) for every composition of S into P non-negative parts.
inline void for_each_composition(std::size_t S, std::size_t P,
                                 const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> counts(P, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t left) {
    if (pos + 1 == P) {
      counts[pos] = left;
      visit(counts);
      return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
      counts[pos] = c;
      rec(pos + 1, left - c);
    }
  };
  if (P > 0) rec(0, S);
}

namespace detail {

inline void check_oracle_size(std::size_t P, std::size_t S) {
  if (P == 0) throw InvalidArgument("oracle: empty input");
  if (S == 0) throw InvalidArgument("oracle: S must be >= 1");
  if (std::max(P, S) > kMaxOracleSize)
    throw InvalidArgument("oracle: size " + std::to_string(std::max(P, S)) + " exceeds the enumeration limit of " +
                          std::to_string(kMaxOracleSize));
}

inline bool nearly_equal(double a, double b) {
  if (a == b) return true;
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace detail

/// Maximiser of sum_s a_s (log u_s - log a_s) over all multiplicity vectors.
/// Among (numerically) tied optima, returns the one that is lexicographically
/// largest when particles are listed by descending u, lower index first.
inline OracleResult brute_force_kl_optimum_log(std::span<const double> log_u, std::size_t S) {
  const std::size_t P = log_u.size();
  detail::check_oracle_size(P, S);

  // Contribution table f[s][a].
  std::vector<std::vector<double>> f(P, std::vector<double>(S + 1, 0.0));
  for (std::size_t s = 0; s < P; ++s) {
    for (std::size_t a = 1; a <= S; ++a) {
      const double ad = static_cast<double>(a);
      f[s][a] = ad * (log_u[s] - std::log(ad));
    }
  }
  std::vector<std::size_t> order(P);
  for (std::size_t s = 0; s < P; ++s) order[s] = s;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return log_u[a] > log_u[b]; });

  auto lex_greater = [&](const std::vector<std::size_t>& x, const std::vector<std::size_t>& y) {
    for (std::size_t r = 0; r < P; ++r) {
      if (x[order[r]] != y[order[r]]) return x[order[r]] > y[order[r]];
    }
    return false;
  };

  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_counts;
  for_each_composition(S, P, [&](const std::vector<std::size_t>& c) {
    double obj = 0.0;
    for (std::size_t s = 0; s < P; ++s) obj += f[s][c[s]];
    if (best_counts.empty() || (obj > best && !detail::nearly_equal(obj, best))) {
      best = obj;
      best_counts = c;
    } else if (detail::nearly_equal(obj, best) && lex_greater(c, best_counts)) {
      best = std::max(best, obj);
      best_counts = c;
    }
  });
  return {MultiplicityVector(best_counts, S), best};
}

inline OracleResult brute_force_kl_optimum_log(std::span<const double> log_u) {
  return brute_force_kl_optimum_log(log_u, log_u.size());
}

inline OracleResult brute_force_kl_optimum(std::span<const double> u, std::size_t S) {
  std::vector<double> lu(u.size());
  for (std::size_t s = 0; s < u.size(); ++s) {
    if (!(u[s] > 0.0)) throw InvalidArgument("oracle: inputs must be strictly positive");
    lu[s] = std::log(u[s]);
  }
  return brute_force_kl_optimum_log(lu, S);
}

inline OracleResult brute_force_kl_optimum(std::span<const double> u) { return brute_force_kl_optimum(u, u.size()); }

/// Minimiser of 0.5 * sum_s |w_s - a_s / S| over all multiplicity vectors.
/// Ties resolve to the lexicographically largest vector in index order.
inline OracleResult brute_force_tv_optimum(std::span<const double> w, std::size_t S) {
  const std::size_t P = w.size();
  detail::check_oracle_size(P, S);
  const double Sd = static_cast<double>(S);
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_counts;
  for_each_composition(S, P, [&](const std::vector<std::size_t>& c) {
    double d = 0.0;
    for (std::size_t s = 0; s < P; ++s) d += std::abs(w[s] - static_cast<double>(c[s]) / Sd);
    d *= 0.5;
    if (best_counts.empty() || (d < best && !detail::nearly_equal(d, best))) {
      best = d;
      best_counts = c;
    } else if (detail::nearly_equal(d, best) && c > best_counts) {
      best = std::min(best, d);
      best_counts = c;
    }
  });
  return {MultiplicityVector(best_counts, S), best};
}

inline OracleResult brute_force_tv_optimum(std::span<const double> w) { return brute_force_tv_optimum(w, w.size()); }

}  // namespace detsmc

#endif  // DETSMC_ORACLE_HPP
