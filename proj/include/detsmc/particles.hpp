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

// Particle bookkeeping: weights, effective sample size, genealogies and the
// map from offspring counts to ancestor indices.

#ifndef DETSMC_PARTICLES_HPP
#define DETSMC_PARTICLES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "detsmc/error.hpp"

namespace detsmc {

using Index = std::size_t;

/// Current population of a particle filter.
struct ParticleSystem {
  std::vector<double> states;
  std::vector<double> log_weights;   // log of the unnormalised weights
  std::vector<double> norm_weights;  // on the probability simplex
  // log p(x_{1:n}, y_{1:n}) per particle; only filled when likelihoods are tracked.
  std::optional<std::vector<double>> log_joint;

  std::size_t size() const noexcept { return states.size(); }
};

/// Non-negative offspring counts. The one-argument form requires the counts
/// to sum to the population size; the two-argument form to `total`.
class MultiplicityVector {
 public:
  MultiplicityVector() = default;

  explicit MultiplicityVector(std::vector<std::size_t> counts) : MultiplicityVector(counts, counts.size()) {}

  MultiplicityVector(std::vector<std::size_t> counts, std::size_t total) : counts_(std::move(counts)) {
    const std::size_t sum = std::accumulate(counts_.begin(), counts_.end(), std::size_t{0});
    if (sum != total) {
      throw InvalidArgument("multiplicities sum to " + std::to_string(sum) + ", expected " + std::to_string(total));
    }
  }

  std::size_t size() const noexcept { return counts_.size(); }
  std::size_t total() const noexcept { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }
  std::size_t operator[](std::size_t s) const { return counts_[s]; }
  const std::vector<std::size_t>& counts() const noexcept { return counts_; }
  auto begin() const noexcept { return counts_.begin(); }
  auto end() const noexcept { return counts_.end(); }

  friend bool operator==(const MultiplicityVector&, const MultiplicityVector&) = default;

 private:
  std::vector<std::size_t> counts_;
};

/// Ancestor indices for every time step of a filter run.
///
/// ancestors[n][s] is the index at time n-1 of the parent of particle s at
/// time n. Row 0 is the identity since the initial population has no parents.
struct Genealogy {
  std::vector<std::vector<Index>> ancestors;
  std::vector<bool> resample_flags;

  std::size_t steps() const noexcept { return ancestors.size(); }

  void push_identity(std::size_t S) {
    std::vector<Index> row(S);
    std::iota(row.begin(), row.end(), Index{0});
    ancestors.push_back(std::move(row));
    resample_flags.push_back(false);
  }

  void push_selection(std::vector<Index> row) {
    ancestors.push_back(std::move(row));
    resample_flags.push_back(true);
  }
};

struct NormalizedWeights {
  std::vector<double> weights;
  double log_total = 0.0;
};

/// Normalises log-weights onto the simplex using max subtraction.
/// NaN entries are treated as zero weight.
inline NormalizedWeights log_normalize(std::span<const double> log_w) {
  if (log_w.empty()) throw InvalidArgument("log_normalize: empty weight vector");
  double max_lw = -std::numeric_limits<double>::infinity();
  for (double lw : log_w) {
    if (!std::isnan(lw) && lw > max_lw) max_lw = lw;
  }
  if (!std::isfinite(max_lw)) {
    // +inf would make every ratio undefined; -inf means nothing survives.
    throw InvalidArgument(max_lw > 0 ? "log_normalize: infinite log-weight"
                                     : "all particles have zero weight");
  }
  NormalizedWeights out;
  out.weights.resize(log_w.size());
  double total = 0.0;
  for (std::size_t s = 0; s < log_w.size(); ++s) {
    const double e = std::isnan(log_w[s]) ? 0.0 : std::exp(log_w[s] - max_lw);
    out.weights[s] = e;
    total += e;
  }
  for (double& w : out.weights) w /= total;
  out.log_total = max_lw + std::log(total);
  return out;
}

/// log of the sum of exp(values), stable for large magnitudes.
inline double log_sum_exp(std::span<const double> values) {
  return log_normalize(values).log_total;
}

/// Effective sample size 1 / sum(w^2) of normalised weights.
inline double ess(std::span<const double> w) {
  double sq = 0.0;
  for (double x : w) sq += x * x;
  return 1.0 / sq;
}

/// Expands offspring counts into an ascending ancestor list where particle s
/// appears counts[s] times.
inline std::vector<Index> multiplicity_to_ancestors(const MultiplicityVector& a) {
  std::vector<Index> out;
  out.reserve(a.total());
  for (Index s = 0; s < a.size(); ++s) out.insert(out.end(), a[s], s);
  return out;
}

inline std::vector<Index> multiplicity_to_ancestors(std::span<const std::size_t> counts) {
  return multiplicity_to_ancestors(MultiplicityVector({counts.begin(), counts.end()}));
}

/// Inverse of multiplicity_to_ancestors: counts how often each index occurs.
inline MultiplicityVector ancestors_to_multiplicity(std::span<const Index> ancestors) {
  std::vector<std::size_t> counts(ancestors.size(), 0);
  for (Index i : ancestors) {
    if (i >= counts.size()) throw InvalidArgument("ancestor index out of range");
    ++counts[i];
  }
  return MultiplicityVector(std::move(counts));
}

/// Walks the genealogy backwards from particle final_index at the last step
/// and returns its full latent path. stored_states[n][s] is the state of
/// particle s at time n.
inline std::vector<double> extract_trajectory(const Genealogy& g,
                                              const std::vector<std::vector<double>>& stored_states,
                                              Index final_index) {
  const std::size_t N = stored_states.size();
  if (N == 0) return {};
  if (g.steps() != N) throw InvalidArgument("extract_trajectory: genealogy length mismatch");
  if (final_index >= stored_states.back().size())
    throw InvalidArgument("extract_trajectory: final index out of range");
  std::vector<double> path(N);
  Index s = final_index;
  for (std::size_t n = N; n-- > 0;) {
    path[n] = stored_states[n][s];
    s = g.ancestors[n][s];
  }
  return path;
}

/// Full paths of every particle alive at the final step, paths[s][n].
inline std::vector<std::vector<double>> extract_all_trajectories(
    const Genealogy& g, const std::vector<std::vector<double>>& stored_states) {
  const std::size_t N = stored_states.size();
  if (N == 0) return {};
  const std::size_t S = stored_states.back().size();
  std::vector<std::vector<double>> paths(S, std::vector<double>(N));
  std::vector<Index> cur(S);
  std::iota(cur.begin(), cur.end(), Index{0});
  for (std::size_t n = N; n-- > 0;) {
    for (Index s = 0; s < S; ++s) {
      paths[s][n] = stored_states[n][cur[s]];
      cur[s] = g.ancestors[n][cur[s]];
    }
  }
  return paths;
}

/// For every time n, the number of distinct time-1 ancestors among the
/// particles alive at n.
inline std::vector<std::size_t> distinct_root_counts(const Genealogy& g) {
  std::vector<std::size_t> out;
  if (g.steps() == 0) return out;
  std::vector<Index> root(g.ancestors.front().size());
  std::iota(root.begin(), root.end(), Index{0});
  std::vector<char> seen(root.size());
  for (std::size_t n = 0; n < g.steps(); ++n) {
    if (n > 0) {
      std::vector<Index> next(root.size());
      for (Index s = 0; s < root.size(); ++s) next[s] = root[g.ancestors[n][s]];
      root = std::move(next);
    }
    std::fill(seen.begin(), seen.end(), 0);
    std::size_t distinct = 0;
    for (Index r : root) {
      if (!seen[r]) {
        seen[r] = 1;
        ++distinct;
      }
    }
    out.push_back(distinct);
  }
  return out;
}

}  // namespace detsmc

#endif  // DETSMC_PARTICLES_HPP
