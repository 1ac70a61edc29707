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

// Particle Gibbs for the stochastic volatility model: conjugate inverse-gamma
// updates for sigma^2 and beta^2, a rejection sampler for phi, and the
// conditional SMC kernel for the latent path.

#ifndef DETSMC_GIBBS_HPP
#define DETSMC_GIBBS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include "detsmc/error.hpp"
#include "detsmc/filter.hpp"
#include "detsmc/models.hpp"
#include "detsmc/rng.hpp"
#include "detsmc/selection.hpp"

namespace detsmc {

/// Inverse-gamma prior IG(shape, rate).
struct IGPrior {
  double shape = 0.001;
  double rate = 0.001;

  void validate() const {
    if (!(shape > 0.0) || !(rate > 0.0)) throw InvalidArgument("IG prior: shape and rate must be > 0");
  }
};

struct IGParams {
  double shape;
  double rate;
};

/// Posterior of sigma^2 given the path:
///   IG(a + N/2, b + x_1^2 (1 - phi^2)/2 + sum_{n>=2} (x_n - phi x_{n-1})^2 / 2)
inline IGParams sigma2_posterior(std::span<const double> x, double phi, const IGPrior& prior) {
  if (x.empty()) throw InvalidArgument("sigma2 posterior: empty path");
  double ss = x[0] * x[0] * (1.0 - phi * phi);
  for (std::size_t n = 1; n < x.size(); ++n) {
    const double r = x[n] - phi * x[n - 1];
    ss += r * r;
  }
  return {prior.shape + 0.5 * static_cast<double>(x.size()), prior.rate + 0.5 * ss};
}

/// Posterior of beta^2 given path and data, y_n ~ N(0, beta^2 e^{x_n}):
///   IG(a + N/2, b + sum_n y_n^2 e^{-x_n} / 2)
inline IGParams beta2_posterior(std::span<const double> x, std::span<const double> y, const IGPrior& prior) {
  if (x.size() != y.size() || x.empty()) throw InvalidArgument("beta2 posterior: lengths must match");
  double ss = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) ss += y[n] * y[n] * std::exp(-x[n]);
  return {prior.shape + 0.5 * static_cast<double>(x.size()), prior.rate + 0.5 * ss};
}

inline double sample_sigma2(std::span<const double> x, double phi, const IGPrior& prior, RngStream& rng) {
  if (!(std::abs(phi) < 1.0)) throw InvalidArgument("sample_sigma2: |phi| must be < 1");
  const IGParams p = sigma2_posterior(x, phi, prior);
  return rng.inverse_gamma(p.shape, p.rate);
}

inline double sample_beta2(std::span<const double> x, std::span<const double> y, const IGPrior& prior,
                           RngStream& rng) {
  const IGParams p = beta2_posterior(x, y, prior);
  return rng.inverse_gamma(p.shape, p.rate);
}

struct PhiDraw {
  double value = 0.0;
  std::size_t proposals = 0;
  bool fell_back = false;
};

inline constexpr std::size_t kPhiMaxProposals = 1000;

/// Rejection sampler for the AR(1) coefficient under a flat prior on (-1, 1).
///
/// Proposes from the Gaussian implied by the transitions n >= 2,
/// N(sum x_n x_{n-1} / sum x_{n-1}^2, sigma2 / sum x_{n-1}^2), and accepts
/// points inside (-1, 1) with probability proportional to the stationary
/// density term sqrt(1 - phi^2) exp(-x_1^2 (1 - phi^2) / (2 sigma2)).
/// After kPhiMaxProposals failures returns `previous`.
inline PhiDraw sample_phi_detailed(std::span<const double> x, double sigma2, RngStream& rng, double previous = 0.0) {
  if (x.size() < 2) throw InvalidArgument("sample_phi: need at least two states");
  if (!(sigma2 > 0.0)) throw InvalidArgument("sample_phi: sigma2 must be > 0");
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t n = 1; n < x.size(); ++n) {
    sxx += x[n - 1] * x[n - 1];
    sxy += x[n] * x[n - 1];
  }
  PhiDraw d;
  if (!(sxx > 0.0)) {
    d.value = rng.uniform_open() * 2.0 - 1.0;
    return d;
  }
  const double mean = sxy / sxx;
  const double sd = std::sqrt(sigma2 / sxx);

  // log h(t) = 0.5 log t - c t with t = 1 - phi^2 in (0, 1]; maximised at
  // t = min(1, 1 / (2c)).
  const double c = x[0] * x[0] / (2.0 * sigma2);
  auto log_h = [c](double t) { return 0.5 * std::log(t) - c * t; };
  const double t_star = c <= 0.5 ? 1.0 : 1.0 / (2.0 * c);
  const double log_h_max = log_h(t_star);

  while (d.proposals < kPhiMaxProposals) {
    ++d.proposals;
    const double phi = rng.normal(mean, sd);
    if (!(phi > -1.0 && phi < 1.0)) continue;
    const double t = 1.0 - phi * phi;
    if (std::log(rng.uniform_open()) <= log_h(t) - log_h_max) {
      d.value = phi;
      return d;
    }
  }
  d.value = previous;
  d.fell_back = true;
  return d;
}

inline double sample_phi(std::span<const double> x, double sigma2, RngStream& rng, double previous = 0.0) {
  const PhiDraw d = sample_phi_detailed(x, sigma2, rng, previous);
  if (d.fell_back) {
    std::clog << "warning: phi rejection sampler hit " << kPhiMaxProposals
              << " proposals; keeping previous value " << previous << '\n';
  }
  return d.value;
}

struct PGPriors {
  IGPrior sigma2{};
  IGPrior beta2{};
};

struct PGConfig {
  std::size_t S = 100;
  std::size_t iterations = 2000;  // M, including the initial state
  SelectionScheme scheme{};
  std::size_t burn_in = 0;
  std::size_t estimate_window = 5000;
  double ess_threshold_fraction = 0.5;
  // Keep every k-th trajectory in the record; 0 keeps none.
  std::size_t trajectory_thin = 0;

  void validate() const {
    if (S < 1) throw InvalidArgument("particle Gibbs: S must be >= 1");
    if (!(iterations > burn_in)) throw InvalidArgument("particle Gibbs: iterations must exceed burn_in");
    if (estimate_window == 0) throw InvalidArgument("particle Gibbs: estimate_window must be >= 1");
  }

  /// Trailing window used for parameter medians.
  std::size_t effective_window() const {
    return std::min(estimate_window, iterations - burn_in);
  }
};

struct ChainRecord {
  std::vector<double> sigma2;
  std::vector<double> beta2;
  std::vector<double> phi;
  std::vector<std::vector<double>> trajectories;
  std::vector<std::size_t> trajectory_iterations;  // one-based

  std::size_t size() const noexcept { return sigma2.size(); }
};

/// Called after each conditional SMC sweep with the iteration (one-based),
/// the kernel internals and the reference path it was conditioned on.
using PGObserver = std::function<void(std::size_t, const CsmcResult&, std::span<const double>)>;

/// Particle Gibbs on the SV model. Iteration 1 holds sigma^2 = beta^2 = 1,
/// phi ~ U(-0.5, 0.5) and a path drawn from an ordinary filter run; each
/// later iteration updates sigma^2, beta^2 and phi in that order and then
/// refreshes the path with the conditional SMC kernel.
inline ChainRecord particle_gibbs(std::span<const double> y, const PGConfig& cfg, const PGPriors& priors,
                                  RngStream& rng, const PGObserver& observer = {}) {
  cfg.validate();
  priors.sigma2.validate();
  priors.beta2.validate();
  if (y.size() < 2) throw InvalidArgument("particle Gibbs: need at least two observations");

  FilterConfig fcfg;
  fcfg.S = cfg.S;
  fcfg.scheme = cfg.scheme;
  fcfg.track_likelihood = cfg.scheme.uses_likelihood();
  fcfg.ess_threshold_fraction = cfg.ess_threshold_fraction;

  ChainRecord rec;
  rec.sigma2.reserve(cfg.iterations);
  rec.beta2.reserve(cfg.iterations);
  rec.phi.reserve(cfg.iterations);

  double sigma2 = 1.0;
  double beta2 = 1.0;
  double phi = rng.uniform(-0.5, 0.5);
  std::vector<double> x;
  try {
    const SvModel model = SvModel::from_variances(sigma2, beta2, phi);
    const FilterOutput init = bpf(model, y, fcfg, rng);
    x = extract_trajectory(init.genealogy, init.stored_states, draw_final_index(init, cfg.scheme, rng));
  } catch (const ParticleCollapse& e) {
    throw Error(std::string("particle Gibbs initialisation: ") + e.what());
  }

  auto record = [&](std::size_t m) {
    rec.sigma2.push_back(sigma2);
    rec.beta2.push_back(beta2);
    rec.phi.push_back(phi);
    if (cfg.trajectory_thin > 0 && (m - 1) % cfg.trajectory_thin == 0) {
      rec.trajectories.push_back(x);
      rec.trajectory_iterations.push_back(m);
    }
  };
  record(1);

  for (std::size_t m = 2; m <= cfg.iterations; ++m) {
    sigma2 = sample_sigma2(x, phi, priors.sigma2, rng);
    beta2 = sample_beta2(x, y, priors.beta2, rng);
    phi = sample_phi(x, sigma2, rng, phi);
    const SvModel model = SvModel::from_variances(sigma2, beta2, phi);
    try {
      CsmcResult r = csmc_run(model, y, fcfg, x, rng);
      if (observer) observer(m, r, x);
      x = std::move(r.trajectory);
    } catch (const ParticleCollapse& e) {
      throw Error("particle Gibbs iteration " + std::to_string(m) + ": " + e.what());
    }
    record(m);
  }
  return rec;
}

}  // namespace detsmc

#endif  // DETSMC_GIBBS_HPP
