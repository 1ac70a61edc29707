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

// State estimators computed from a filter run and the per-time losses used
// to score them against ground truth.
//
// All estimators read the particle approximation of the full path: the
// final weights together with the trajectories recovered from the
// genealogy. At every time n the support is therefore the set of surviving
// paths evaluated at n.

#ifndef DETSMC_ESTIMATORS_HPP
#define DETSMC_ESTIMATORS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detsmc/error.hpp"
#include "detsmc/filter.hpp"
#include "detsmc/particles.hpp"
#include "detsmc/rng.hpp"
#include "detsmc/selection.hpp"

namespace detsmc {

enum class EstimatorKind { map, mmae, mmse, sampled };

inline std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::map:
      return "map";
    case EstimatorKind::mmae:
      return "mmae";
    case EstimatorKind::mmse:
      return "mmse";
    case EstimatorKind::sampled:
      return "sampled";
  }
  return "?";
}

inline EstimatorKind parse_estimator(std::string_view s) {
  if (s == "map") return EstimatorKind::map;
  if (s == "mmae") return EstimatorKind::mmae;
  if (s == "mmse") return EstimatorKind::mmse;
  if (s == "sampled") return EstimatorKind::sampled;
  throw InvalidArgument("unknown estimator '" + std::string(s) + "'");
}

/// Smallest value whose cumulative weight, in ascending value order, reaches 1/2.
inline double weighted_median(std::span<const double> values, std::span<const double> weights) {
  if (values.empty() || values.size() != weights.size())
    throw InvalidArgument("weighted_median: sizes must match and be non-zero");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double cum = 0.0;
  for (std::size_t i : order) {
    cum += weights[i];
    // A relative slack keeps exact halves (e.g. two weights of 0.25) on the
    // lower value despite rounding in the running sum.
    if (cum >= 0.5 * total * (1.0 - 1e-12)) return values[i];
  }
  return values[order.back()];
}

/// Path estimate for every time step.
///   mmse:    sum_s w_s x_n^s
///   mmae:    weighted median of {x_n^s}
///   map:     path of the particle with the largest final weight
///   sampled: path of one particle drawn from the final weights (needs rng)
inline std::vector<double> estimate(const FilterOutput& out, EstimatorKind kind, RngStream* rng = nullptr) {
  const auto& w = out.final_system.norm_weights;
  switch (kind) {
    case EstimatorKind::map: {
      const auto best = static_cast<Index>(std::max_element(w.begin(), w.end()) - w.begin());
      return extract_trajectory(out.genealogy, out.stored_states, best);
    }
    case EstimatorKind::sampled: {
      if (rng == nullptr) throw InvalidArgument("estimate: the sampled estimator needs an rng");
      std::vector<double> lw(w.size());
      std::transform(w.begin(), w.end(), lw.begin(), [](double v) { return std::log(v); });
      return extract_trajectory(out.genealogy, out.stored_states, categorical_draw_log(lw, *rng));
    }
    case EstimatorKind::mmse:
    case EstimatorKind::mmae:
      break;
  }
  const auto paths = extract_all_trajectories(out.genealogy, out.stored_states);
  const std::size_t N = out.steps();
  const std::size_t S = paths.size();
  std::vector<double> est(N);
  std::vector<double> column(S);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t s = 0; s < S; ++s) column[s] = paths[s][n];
    if (kind == EstimatorKind::mmse) {
      double m = 0.0;
      for (std::size_t s = 0; s < S; ++s) m += w[s] * column[s];
      est[n] = m;
    } else {
      est[n] = weighted_median(column, w);
    }
  }
  return est;
}

enum class LossKind { l01, l1, l2 };

inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::l01:
      return "l01";
    case LossKind::l1:
      return "l1";
    case LossKind::l2:
      return "l2";
  }
  return "?";
}

inline LossKind parse_loss(std::string_view s) {
  if (s == "l01") return LossKind::l01;
  if (s == "l1") return LossKind::l1;
  if (s == "l2") return LossKind::l2;
  throw InvalidArgument("unknown loss '" + std::string(s) + "'");
}

/// A loss and, for the 0-1 loss, its tolerance (half the transition noise std).
struct LossSpec {
  LossKind kind = LossKind::l2;
  double l01_threshold = 0.5;
};

/// Average loss per time step, L / N.
inline double loss(std::span<const double> x_true, std::span<const double> x_hat, const LossSpec& spec) {
  if (x_true.size() != x_hat.size()) throw InvalidArgument("loss: length mismatch");
  if (x_true.empty()) throw InvalidArgument("loss: empty sequences");
  if (spec.kind == LossKind::l01 && !(spec.l01_threshold > 0.0))
    throw InvalidArgument("loss: 0-1 threshold must be > 0");
  double total = 0.0;
  for (std::size_t n = 0; n < x_true.size(); ++n) {
    const double d = x_true[n] - x_hat[n];
    switch (spec.kind) {
      case LossKind::l01:
        total += std::abs(d) <= spec.l01_threshold ? 0.0 : 1.0;
        break;
      case LossKind::l1:
        total += std::abs(d);
        break;
      case LossKind::l2:
        total += d * d;
        break;
    }
  }
  return total / static_cast<double>(x_true.size());
}

}  // namespace detsmc

#endif  // DETSMC_ESTIMATORS_HPP
