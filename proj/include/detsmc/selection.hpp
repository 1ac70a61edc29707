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

// Offspring selection. Two deterministic reshuffling schemes that are optimal
// for a statistical distance (KL divergence, total variation), the maximum
// likelihood baseline, and the classic stochastic resamplers.
//
// The deterministic schemes accept either normalised importance weights or
// per-particle joint likelihoods. Both are carried in log space.

#ifndef DETSMC_SELECTION_HPP
#define DETSMC_SELECTION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detsmc/error.hpp"
#include "detsmc/particles.hpp"
#include "detsmc/rng.hpp"

namespace detsmc {

enum class SchemeKind { kl, tv, stratified, systematic, multinomial, ml };
enum class InputMode { weight, likelihood };

/// An offspring selection method together with the quantity it consumes.
class SelectionScheme {
 public:
  constexpr SelectionScheme() = default;

  SelectionScheme(SchemeKind kind, InputMode mode) : kind_(kind), mode_(mode) {
    if (stochastic() && mode == InputMode::likelihood) {
      throw InvalidArgument("scheme '" + std::string(kind_name(kind)) +
                            "' only supports weight input");
    }
  }

  SchemeKind kind() const noexcept { return kind_; }
  InputMode mode() const noexcept { return mode_; }

  bool stochastic() const noexcept {
    return kind_ == SchemeKind::stratified || kind_ == SchemeKind::systematic ||
           kind_ == SchemeKind::multinomial;
  }
  bool deterministic() const noexcept { return !stochastic(); }
  bool uses_likelihood() const noexcept { return mode_ == InputMode::likelihood; }

  /// Short name: kl_w, kl_p, tv_w, tv_p, ml (likelihood), ml_w, stratified,
  /// systematic, multinomial.
  std::string name() const {
    switch (kind_) {
      case SchemeKind::kl:
        return mode_ == InputMode::weight ? "kl_w" : "kl_p";
      case SchemeKind::tv:
        return mode_ == InputMode::weight ? "tv_w" : "tv_p";
      case SchemeKind::ml:
        return mode_ == InputMode::weight ? "ml_w" : "ml";
      default:
        return std::string(kind_name(kind_));
    }
  }

  /// Position in a fixed catalogue, used to derive per-scheme RNG streams so
  /// that adding a scheme to an experiment never changes another's draws.
  unsigned ordinal() const noexcept {
    switch (kind_) {
      case SchemeKind::kl:
        return mode_ == InputMode::weight ? 0 : 1;
      case SchemeKind::tv:
        return mode_ == InputMode::weight ? 2 : 3;
      case SchemeKind::stratified:
        return 4;
      case SchemeKind::systematic:
        return 5;
      case SchemeKind::multinomial:
        return 6;
      case SchemeKind::ml:
        return mode_ == InputMode::likelihood ? 7 : 8;
    }
    return 0;
  }

  static SelectionScheme parse(std::string_view name) {
    if (name == "kl_w") return {SchemeKind::kl, InputMode::weight};
    if (name == "kl_p") return {SchemeKind::kl, InputMode::likelihood};
    if (name == "tv_w") return {SchemeKind::tv, InputMode::weight};
    if (name == "tv_p") return {SchemeKind::tv, InputMode::likelihood};
    if (name == "ml") return {SchemeKind::ml, InputMode::likelihood};
    if (name == "ml_w") return {SchemeKind::ml, InputMode::weight};
    if (name == "stratified") return {SchemeKind::stratified, InputMode::weight};
    if (name == "systematic") return {SchemeKind::systematic, InputMode::weight};
    if (name == "multinomial") return {SchemeKind::multinomial, InputMode::weight};
    throw InvalidArgument("unknown selection scheme '" + std::string(name) + "'");
  }

  friend bool operator==(const SelectionScheme&, const SelectionScheme&) = default;

 private:
  static constexpr std::string_view kind_name(SchemeKind k) {
    switch (k) {
      case SchemeKind::kl:
        return "kl";
      case SchemeKind::tv:
        return "tv";
      case SchemeKind::stratified:
        return "stratified";
      case SchemeKind::systematic:
        return "systematic";
      case SchemeKind::multinomial:
        return "multinomial";
      case SchemeKind::ml:
        return "ml";
    }
    return "?";
  }

  SchemeKind kind_ = SchemeKind::kl;
  InputMode mode_ = InputMode::weight;
};

/// Per-particle selection input, always held as logarithms.
struct SelectionInput {
  std::vector<double> log_values;
  InputMode mode = InputMode::weight;

  std::size_t size() const noexcept { return log_values.size(); }

  /// Normalised weights; zero entries are allowed.
  static SelectionInput from_weights(std::span<const double> w) {
    if (w.empty()) throw InvalidArgument("selection input is empty");
    double total = 0.0;
    SelectionInput in{{}, InputMode::weight};
    in.log_values.reserve(w.size());
    for (double x : w) {
      if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument("weights must be finite and >= 0");
      total += x;
      in.log_values.push_back(std::log(x));
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("weights must sum to 1");
    return in;
  }

  /// Logarithms of normalised weights (entries may be -inf).
  static SelectionInput from_log_weights(std::span<const double> log_w) {
    if (log_w.empty()) throw InvalidArgument("selection input is empty");
    if (std::abs(log_sum_exp(log_w)) > 1e-9) throw InvalidArgument("weights must sum to 1");
    return {{log_w.begin(), log_w.end()}, InputMode::weight};
  }

  /// Joint log-likelihoods log p(x_{1:n}, y_{1:n}); every entry must be finite.
  static SelectionInput from_log_likelihoods(std::span<const double> log_p) {
    if (log_p.empty()) throw InvalidArgument("selection input is empty");
    for (double x : log_p) {
      if (!std::isfinite(x)) throw InvalidArgument("log-likelihoods must be finite");
    }
    return {{log_p.begin(), log_p.end()}, InputMode::likelihood};
  }
};

namespace detail {

inline void check_log_input(std::span<const double> log_u, const char* who) {
  if (log_u.empty()) throw InvalidArgument(std::string(who) + ": empty input");
  bool any_finite = false;
  for (double x : log_u) {
    if (std::isnan(x) || x == std::numeric_limits<double>::infinity())
      throw InvalidArgument(std::string(who) + ": NaN or +inf input");
    any_finite = any_finite || std::isfinite(x);
  }
  if (!any_finite) throw InvalidArgument(std::string(who) + ": all inputs are zero");
}

inline std::vector<double> checked_logs(std::span<const double> u, const char* who) {
  if (u.empty()) throw InvalidArgument(std::string(who) + ": empty input");
  std::vector<double> out;
  out.reserve(u.size());
  for (double x : u) {
    if (!(x > 0.0) || !std::isfinite(x))
      throw InvalidArgument(std::string(who) + ": inputs must be strictly positive and finite");
    out.push_back(std::log(x));
  }
  return out;
}

/// Ranks particles by descending input, lower index first among equals.
inline std::vector<Index> descending_order(std::span<const double> v) {
  std::vector<Index> order(v.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v[a] > v[b]; });
  return order;
}

/// f(a+1) - f(a) - log u = -[(a+1) log(a+1) - a log a], with the a = 0 limit.
inline double kl_increment_penalty(std::size_t a) {
  if (a == 0) return 0.0;
  const double ad = static_cast<double>(a);
  return std::log1p(ad) + ad * std::log1p(1.0 / ad);
}

/// Relative tolerance under which two gains are considered an exact tie.
inline constexpr double kTieRelTol = 1e-12;

inline bool within_tie(double a, double b) {
  return std::abs(a - b) <= kTieRelTol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace detail

/// Kullback-Leibler reshuffling on log inputs.
///
/// Greedily hands out S offspring one at a time to the particle whose
/// increment C+(a, s) = f(a+1, s) - f(a, s), f(a, s) = a log(u_s / a),
/// is largest. The result maximises sum_s a_s log(u_s / a_s) over all
/// multiplicity vectors. Ties go to the larger u, then the lower index.
/// -inf entries (zero weight) never receive offspring. `S` offspring are
/// handed out; by default as many as there are inputs.
inline MultiplicityVector kl_reshuffle_log(std::span<const double> log_u, std::size_t S) {
  detail::check_log_input(log_u, "kl_reshuffle");
  if (S == 0) throw InvalidArgument("kl_reshuffle: S must be >= 1");
  const std::size_t P = log_u.size();
  const std::vector<Index> order = detail::descending_order(log_u);

  struct Entry {
    double gain;
    Index rank;
  };
  auto lower_priority = [](const Entry& a, const Entry& b) {
    if (a.gain != b.gain) return a.gain < b.gain;
    return a.rank > b.rank;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(lower_priority)> heap(lower_priority);
  for (Index r = 0; r < P; ++r) {
    const double lu = log_u[order[r]];
    if (std::isfinite(lu)) heap.push({lu, r});
  }

  std::vector<std::size_t> by_rank(P, 0);
  std::vector<Entry> ties;
  for (std::size_t k = 0; k < S; ++k) {
    Entry best = heap.top();
    heap.pop();
    // Gains that agree up to rounding are treated as equal; the best-ranked wins.
    ties.clear();
    while (!heap.empty() && detail::within_tie(heap.top().gain, best.gain)) {
      ties.push_back(heap.top());
      heap.pop();
    }
    for (Entry& e : ties) {
      if (e.rank < best.rank) std::swap(e, best);
    }
    for (const Entry& e : ties) heap.push(e);

    const std::size_t a = ++by_rank[best.rank];
    heap.push({log_u[order[best.rank]] - detail::kl_increment_penalty(a), best.rank});
  }

  std::vector<std::size_t> counts(P, 0);
  for (Index r = 0; r < P; ++r) counts[order[r]] = by_rank[r];
  return MultiplicityVector(std::move(counts), S);
}

inline MultiplicityVector kl_reshuffle_log(std::span<const double> log_u) {
  return kl_reshuffle_log(log_u, log_u.size());
}

/// KL reshuffling on strictly positive inputs of any scale.
inline MultiplicityVector kl_reshuffle(std::span<const double> u, std::size_t S) {
  const std::vector<double> lu = detail::checked_logs(u, "kl_reshuffle");
  return kl_reshuffle_log(lu, S);
}

inline MultiplicityVector kl_reshuffle(std::span<const double> u) { return kl_reshuffle(u, u.size()); }

inline MultiplicityVector kl_reshuffle(const SelectionInput& in) { return kl_reshuffle_log(in.log_values); }

/// Total variation reshuffling of normalised weights.
///
/// Scales w by S, floors every entry, then gives the K = S - sum floor(S w)
/// particles with the largest fractional parts one extra offspring. This is
/// the minimiser of 0.5 * sum |w_s - a_s / S|. Equal fractional parts go to
/// the lower index.
inline MultiplicityVector tv_reshuffle(std::span<const double> w, std::size_t S) {
  if (w.empty()) throw InvalidArgument("tv_reshuffle: empty input");
  if (S == 0) throw InvalidArgument("tv_reshuffle: S must be >= 1");
  const std::size_t P = w.size();
  const double Sd = static_cast<double>(S);
  std::vector<std::size_t> counts(P);
  std::vector<double> frac(P);
  std::size_t floor_total = 0;
  for (std::size_t s = 0; s < P; ++s) {
    if (!(w[s] >= 0.0) || !std::isfinite(w[s]))
      throw InvalidArgument("tv_reshuffle: weights must be finite and >= 0");
    const double a = w[s] * Sd;
    const double fl = std::floor(a);
    counts[s] = static_cast<std::size_t>(fl);
    frac[s] = a - fl;
    floor_total += counts[s];
  }
  if (floor_total > S) throw InvalidArgument("tv_reshuffle: weights are not normalised");
  const std::size_t K = S - floor_total;
  if (K > 0) {
    std::vector<Index> order = detail::descending_order(frac);
    // Only the first K positions matter.
    for (std::size_t r = 0; r < K && r < P; ++r) ++counts[order[r]];
  }
  return MultiplicityVector(std::move(counts), S);
}

inline MultiplicityVector tv_reshuffle(std::span<const double> w) { return tv_reshuffle(w, w.size()); }

/// TV reshuffling on log inputs; normalises with log-sum-exp first.
inline MultiplicityVector tv_reshuffle_log(std::span<const double> log_u) {
  detail::check_log_input(log_u, "tv_reshuffle");
  return tv_reshuffle(log_normalize(log_u).weights);
}

inline MultiplicityVector tv_reshuffle(const SelectionInput& in) { return tv_reshuffle_log(in.log_values); }

/// All offspring to the particle with the largest input (lowest index on ties).
inline MultiplicityVector ml_select_log(std::span<const double> log_u) {
  detail::check_log_input(log_u, "ml_select");
  const auto it = std::max_element(log_u.begin(), log_u.end());
  std::vector<std::size_t> counts(log_u.size(), 0);
  counts[static_cast<std::size_t>(it - log_u.begin())] = log_u.size();
  return MultiplicityVector(std::move(counts));
}

inline MultiplicityVector ml_select(std::span<const double> u) {
  if (u.empty()) throw InvalidArgument("ml_select: empty input");
  const auto it = std::max_element(u.begin(), u.end());
  std::vector<std::size_t> counts(u.size(), 0);
  counts[static_cast<std::size_t>(it - u.begin())] = u.size();
  return MultiplicityVector(std::move(counts));
}

inline MultiplicityVector ml_select(const SelectionInput& in) { return ml_select_log(in.log_values); }

namespace detail {

/// Maps sorted points in [0, 1) to the particle whose cumulative-weight
/// interval [c_{s-1}, c_s) contains them.
inline std::vector<Index> inverse_cdf_sorted(std::span<const double> w, std::span<const double> points) {
  const std::size_t S = w.size();
  std::vector<double> cum(S);
  std::partial_sum(w.begin(), w.end(), cum.begin());
  Index last_positive = 0;
  for (Index s = 0; s < S; ++s) {
    if (w[s] > 0.0) last_positive = s;
  }
  std::vector<Index> out(points.size());
  Index j = 0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    while (j < last_positive && points[k] >= cum[j]) ++j;
    out[k] = j;
  }
  return out;
}

inline void check_simplex(std::span<const double> w, const char* who) {
  if (w.empty()) throw InvalidArgument(std::string(who) + ": empty input");
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x))
      throw InvalidArgument(std::string(who) + ": weights must be finite and >= 0");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument(std::string(who) + ": weights must sum to 1");
}

}  // namespace detail

/// Stratified resampling: one uniform per stratum [k/S, (k+1)/S).
inline std::vector<Index> stratified_resample(std::span<const double> w, RngStream& rng) {
  detail::check_simplex(w, "stratified_resample");
  const std::size_t S = w.size();
  std::vector<double> points(S);
  for (std::size_t k = 0; k < S; ++k) points[k] = (static_cast<double>(k) + rng.uniform()) / static_cast<double>(S);
  return detail::inverse_cdf_sorted(w, points);
}

/// Systematic resampling: one uniform offset shared by an evenly spaced grid.
inline std::vector<Index> systematic_resample(std::span<const double> w, RngStream& rng) {
  detail::check_simplex(w, "systematic_resample");
  const std::size_t S = w.size();
  const double Sd = static_cast<double>(S);
  const double offset = rng.uniform() / Sd;
  std::vector<double> points(S);
  for (std::size_t k = 0; k < S; ++k) points[k] = offset + static_cast<double>(k) / Sd;
  return detail::inverse_cdf_sorted(w, points);
}

/// Multinomial resampling: S independent categorical draws, returned sorted.
inline std::vector<Index> multinomial_resample(std::span<const double> w, RngStream& rng) {
  detail::check_simplex(w, "multinomial_resample");
  const std::size_t S = w.size();
  std::vector<double> points(S);
  for (double& p : points) p = rng.uniform();
  std::sort(points.begin(), points.end());
  return detail::inverse_cdf_sorted(w, points);
}

/// Draws one index with probability proportional to exp(log_w).
inline Index categorical_draw_log(std::span<const double> log_w, RngStream& rng) {
  const std::vector<double> w = log_normalize(log_w).weights;
  const double u = rng.uniform();
  const double points[] = {u};
  return detail::inverse_cdf_sorted(w, points).front();
}

/// Runs the configured scheme and returns ascending ancestor indices.
/// Stochastic schemes consume rng; deterministic ones leave it untouched.
inline std::vector<Index> select_ancestors(const SelectionScheme& scheme, const SelectionInput& in,
                                           RngStream& rng) {
  if (scheme.mode() != in.mode) throw InvalidArgument("selection input mode does not match scheme " + scheme.name());
  switch (scheme.kind()) {
    case SchemeKind::kl:
      return multiplicity_to_ancestors(kl_reshuffle(in));
    case SchemeKind::tv:
      return multiplicity_to_ancestors(tv_reshuffle(in));
    case SchemeKind::ml:
      return multiplicity_to_ancestors(ml_select(in));
    case SchemeKind::stratified:
      return stratified_resample(log_normalize(in.log_values).weights, rng);
    case SchemeKind::systematic:
      return systematic_resample(log_normalize(in.log_values).weights, rng);
    case SchemeKind::multinomial:
      return multinomial_resample(log_normalize(in.log_values).weights, rng);
  }
  throw InvalidArgument("unhandled selection scheme");
}

inline MultiplicityVector select_multiplicities(const SelectionScheme& scheme, const SelectionInput& in,
                                                RngStream& rng) {
  return ancestors_to_multiplicity(select_ancestors(scheme, in, rng));
}

/// sum_s a_s log(u_s / a_s) with 0 log(.) = 0, for log inputs.
inline double kl_objective_log(std::span<const double> log_u, const MultiplicityVector& a) {
  if (log_u.size() != a.size()) throw InvalidArgument("kl_objective: size mismatch");
  double total = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    if (a[s] == 0) continue;
    const double as = static_cast<double>(a[s]);
    total += as * (log_u[s] - std::log(as));
  }
  return total;
}

inline double kl_objective(std::span<const double> u, const MultiplicityVector& a) {
  std::vector<double> lu(u.size());
  std::transform(u.begin(), u.end(), lu.begin(), [](double x) { return std::log(x); });
  return kl_objective_log(lu, a);
}

/// 0.5 * sum_s |w_s - a_s / S| with S = sum_s a_s.
inline double tv_objective(std::span<const double> w, const MultiplicityVector& a) {
  if (w.size() != a.size()) throw InvalidArgument("tv_objective: size mismatch");
  const double Sd = static_cast<double>(a.total());
  double total = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) total += std::abs(w[s] - static_cast<double>(a[s]) / Sd);
  return 0.5 * total;
}

}  // namespace detsmc

#endif  // DETSMC_SELECTION_HPP
