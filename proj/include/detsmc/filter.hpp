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

// Bootstrap particle filter with adaptive offspring selection, its variant
// that tracks per-particle joint likelihoods, and the conditional SMC kernel
// used by particle Gibbs.

#ifndef DETSMC_FILTER_HPP
#define DETSMC_FILTER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "detsmc/error.hpp"
#include "detsmc/models.hpp"
#include "detsmc/particles.hpp"
#include "detsmc/rng.hpp"
#include "detsmc/selection.hpp"

namespace detsmc {

struct FilterConfig {
  std::size_t S = 100;
  SelectionScheme scheme{};
  bool track_likelihood = false;
  // Selection fires at step n when ESS(w_{n-1}) < fraction * S.
  double ess_threshold_fraction = 0.5;

  void validate() const {
    if (S < 1) throw InvalidArgument("filter: S must be >= 1");
    if (!(ess_threshold_fraction > 0.0 && ess_threshold_fraction <= 1.0))
      throw InvalidArgument("filter: ess_threshold_fraction must lie in (0, 1]");
    if (scheme.uses_likelihood() && !track_likelihood)
      throw InvalidArgument("filter: scheme " + scheme.name() + " needs likelihood tracking");
  }
};

struct FilterOutput {
  ParticleSystem final_system;
  Genealogy genealogy;
  std::vector<std::vector<double>> stored_states;   // [N][S]
  std::vector<std::vector<double>> weight_history;  // [N][S], before any reset
  std::vector<double> ess_history;                  // [N]

  std::size_t steps() const noexcept { return stored_states.size(); }
  std::size_t particles() const noexcept { return final_system.size(); }
};

namespace detail {

/// Options that turn the plain filter into the conditional SMC kernel.
struct Conditioning {
  std::span<const double> reference;  // pinned into slot S-1 when non-empty
  bool uniform_initial_weights = false;
};

/// Ancestors for the conditional kernel: slot S-1 always descends from S-1.
/// Deterministic schemes give up one copy of their most multiplied particle
/// (lowest index among equals) so that the counts still sum to S.
inline std::vector<Index> pin_reference_slot(const SelectionScheme& scheme, std::vector<Index> ancestors) {
  const std::size_t S = ancestors.size();
  if (scheme.deterministic()) {
    std::vector<std::size_t> counts = ancestors_to_multiplicity(ancestors).counts();
    const auto top = std::max_element(counts.begin(), counts.end());
    --*top;
    ++counts[S - 1];
    return multiplicity_to_ancestors(MultiplicityVector(std::move(counts)));
  }
  ancestors[S - 1] = S - 1;
  return ancestors;
}

template <StateSpaceModel Model>
FilterOutput run_filter(const Model& model, std::span<const double> y, const FilterConfig& cfg, RngStream& rng,
                        const Conditioning& cond) {
  cfg.validate();
  const std::size_t N = y.size();
  const std::size_t S = cfg.S;
  if (N == 0) throw InvalidArgument("filter: need at least one observation");
  const bool conditioned = !cond.reference.empty();
  if (conditioned && cond.reference.size() != N) throw InvalidArgument("filter: reference length must equal N");
  const bool track = cfg.track_likelihood;
  const double threshold = cfg.ess_threshold_fraction * static_cast<double>(S);

  FilterOutput out;
  out.stored_states.reserve(N);
  out.weight_history.reserve(N);
  out.ess_history.reserve(N);
  out.genealogy.ancestors.reserve(N);

  std::vector<double> x(S), log_w(S), log_joint(track ? S : 0);
  std::vector<double> x_prev, log_w_prev, log_joint_prev, log_norm_w;
  std::vector<double> w;

  auto normalize_step = [&](std::size_t n) {
    double max_lw = -std::numeric_limits<double>::infinity();
    for (double lw : log_w) {
      if (lw > max_lw) max_lw = lw;
    }
    if (!std::isfinite(max_lw)) throw ParticleCollapse(n);
    NormalizedWeights nw = log_normalize(log_w);
    w = std::move(nw.weights);
    log_norm_w.resize(S);
    for (std::size_t s = 0; s < S; ++s) log_norm_w[s] = log_w[s] - nw.log_total;
    out.ess_history.push_back(ess(w));
    out.weight_history.push_back(w);
    out.stored_states.push_back(x);
  };

  // n = 1
  for (std::size_t s = 0; s < S; ++s) {
    x[s] = (conditioned && s == S - 1) ? cond.reference[0] : model.sample_initial(rng);
    const double lg = model.emission_log_density(y[0], x[s], 1);
    log_w[s] = cond.uniform_initial_weights ? 0.0 : lg;
    if (track) log_joint[s] = lg + model.initial_log_density(x[s]);
  }
  out.genealogy.push_identity(S);
  normalize_step(1);

  for (std::size_t n = 2; n <= N; ++n) {
    x_prev.swap(x);
    log_w_prev.swap(log_w);
    if (track) log_joint_prev.swap(log_joint);
    x.resize(S);
    log_w.resize(S);
    if (track) log_joint.resize(S);

    const bool select = out.ess_history.back() < threshold;
    std::vector<Index> anc;
    if (select) {
      SelectionInput in{cfg.scheme.uses_likelihood() ? log_joint_prev : log_norm_w, cfg.scheme.mode()};
      anc = select_ancestors(cfg.scheme, in, rng);
      if (conditioned) anc = pin_reference_slot(cfg.scheme, std::move(anc));
    }

    for (std::size_t s = 0; s < S; ++s) {
      const Index i = select ? anc[s] : s;
      x[s] = (conditioned && s == S - 1) ? cond.reference[n - 1] : model.sample_transition(x_prev[i], n, rng);
      const double lg = model.emission_log_density(y[n - 1], x[s], n);
      log_w[s] = lg + (select ? 0.0 : log_w_prev[s]);
      if (track) log_joint[s] = lg + model.transition_log_density(x[s], x_prev[i], n) + log_joint_prev[i];
    }
    if (select) {
      out.genealogy.push_selection(std::move(anc));
    } else {
      out.genealogy.push_identity(S);
    }
    normalize_step(n);
  }

  out.final_system.states = std::move(x);
  out.final_system.log_weights = std::move(log_w);
  out.final_system.norm_weights = std::move(w);
  if (track) out.final_system.log_joint = std::move(log_joint);
  return out;
}

}  // namespace detail

/// Bootstrap particle filter. Offspring selection fires at step n >= 2 when
/// the ESS of the previous weights drops below the configured fraction of S;
/// carried weights then reset to 1. Likelihood-mode schemes require
/// cfg.track_likelihood.
template <StateSpaceModel Model>
FilterOutput bpf(const Model& model, std::span<const double> y, const FilterConfig& cfg, RngStream& rng) {
  return detail::run_filter(model, y, cfg, rng, {});
}

/// Bootstrap filter that also maintains log p(x_{1:n}, y_{1:n}) per particle,
/// re-indexed through the ancestors at each selection.
template <StateSpaceModel Model>
FilterOutput bpf_with_likelihood(const Model& model, std::span<const double> y, FilterConfig cfg, RngStream& rng) {
  cfg.track_likelihood = true;
  return detail::run_filter(model, y, cfg, rng, {});
}

/// Index of the particle whose trajectory a caller should report: drawn from
/// the final weights, or from the normalised joint likelihoods for
/// likelihood-mode schemes.
inline Index draw_final_index(const FilterOutput& out, const SelectionScheme& scheme, RngStream& rng) {
  if (scheme.uses_likelihood() && out.final_system.log_joint) {
    return categorical_draw_log(*out.final_system.log_joint, rng);
  }
  std::vector<double> lw(out.final_system.norm_weights.size());
  std::transform(out.final_system.norm_weights.begin(), out.final_system.norm_weights.end(), lw.begin(),
                 [](double v) { return std::log(v); });
  return categorical_draw_log(lw, rng);
}

struct CsmcResult {
  FilterOutput output;
  Index chosen = 0;
  std::vector<double> trajectory;
};

/// Conditional SMC kernel with all the intermediate state, for inspection.
template <StateSpaceModel Model>
CsmcResult csmc_run(const Model& model, std::span<const double> y, FilterConfig cfg,
                    std::span<const double> reference, RngStream& rng) {
  if (reference.size() != y.size()) throw InvalidArgument("csmc: reference length must equal N");
  if (cfg.scheme.uses_likelihood()) cfg.track_likelihood = true;
  CsmcResult r;
  r.output = detail::run_filter(model, y, cfg, rng, {reference, true});
  r.chosen = draw_final_index(r.output, cfg.scheme, rng);
  r.trajectory = extract_trajectory(r.output.genealogy, r.output.stored_states, r.chosen);
  return r;
}

/// Conditional SMC kernel: slot S-1 carries the reference trajectory at
/// every step and keeps itself as ancestor; initial weights are uniform.
/// Returns the trajectory of one particle drawn at the final step.
template <StateSpaceModel Model>
std::vector<double> csmc_kernel(const Model& model, std::span<const double> y, const FilterConfig& cfg,
                                std::span<const double> reference, RngStream& rng) {
  return csmc_run(model, y, cfg, reference, rng).trajectory;
}

}  // namespace detsmc

#endif  // DETSMC_FILTER_HPP
