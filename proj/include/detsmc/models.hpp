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

#ifndef DETSMC_MODELS_HPP
#define DETSMC_MODELS_HPP

#include <cmath>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "detsmc/error.hpp"
#include "detsmc/rng.hpp"

namespace detsmc {

/// Scalar state-space model: initial, transition and emission densities
/// plus their samplers.
///
/// Time indices are one-based: the initial state is x_1, a transition
/// produces x_n from x_{n-1} for n >= 2 and the emission at time n links y_n
/// to x_n.
template <class M>
concept StateSpaceModel = requires(const M& m, double x, double x_prev, double y, std::size_t n, RngStream& rng) {
  { m.sample_initial(rng) } -> std::convertible_to<double>;
  { m.initial_log_density(x) } -> std::convertible_to<double>;
  { m.sample_transition(x_prev, n, rng) } -> std::convertible_to<double>;
  { m.transition_log_density(x, x_prev, n) } -> std::convertible_to<double>;
  { m.sample_emission(x, n, rng) } -> std::convertible_to<double>;
  { m.emission_log_density(y, x, n) } -> std::convertible_to<double>;
  { m.transition_noise_std() } -> std::convertible_to<double>;
};

inline double normal_log_density(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

struct SVParams {
  double sigma = 1.0;  // transition noise std
  double beta = 0.5;   // emission scale
  double phi = 0.91;   // persistence
};

/// Stochastic volatility model
///   x_1 ~ N(0, sigma^2 / (1 - phi^2))
///   x_n = phi x_{n-1} + sigma v_n
///   y_n = beta exp(x_n / 2) e_n
/// with v_n, e_n standard normal. Held internally as (sigma^2, beta^2, phi).
class SvModel {
 public:
  explicit SvModel(const SVParams& p) : SvModel(p.sigma * p.sigma, p.beta * p.beta, p.phi) {
    if (!(p.sigma > 0.0) || !(p.beta > 0.0)) throw InvalidArgument("SV model: sigma and beta must be > 0");
  }

  static SvModel from_variances(double sigma2, double beta2, double phi) { return SvModel(sigma2, beta2, phi); }

  double sigma2() const noexcept { return sigma2_; }
  double beta2() const noexcept { return beta2_; }
  double phi() const noexcept { return phi_; }
  double stationary_variance() const noexcept { return sigma2_ / (1.0 - phi_ * phi_); }

  double sample_initial(RngStream& rng) const { return rng.normal(0.0, std::sqrt(stationary_variance())); }
  double initial_log_density(double x) const { return normal_log_density(x, 0.0, stationary_variance()); }

  double transition_mean(double x_prev, std::size_t /*n*/) const { return phi_ * x_prev; }
  double sample_transition(double x_prev, std::size_t n, RngStream& rng) const {
    return transition_mean(x_prev, n) + std::sqrt(sigma2_) * rng.normal();
  }
  double transition_log_density(double x, double x_prev, std::size_t n) const {
    return normal_log_density(x, transition_mean(x_prev, n), sigma2_);
  }

  double sample_emission(double x, std::size_t /*n*/, RngStream& rng) const {
    return std::sqrt(beta2_) * std::exp(0.5 * x) * rng.normal();
  }
  double emission_log_density(double y, double x, std::size_t /*n*/) const {
    // log N(y; 0, beta^2 e^x), expanded so that large |x| does not overflow.
    return -0.5 * (std::log(2.0 * std::numbers::pi * beta2_) + x + y * y * std::exp(-x) / beta2_);
  }

  double transition_noise_std() const noexcept { return std::sqrt(sigma2_); }

 private:
  SvModel(double sigma2, double beta2, double phi) : sigma2_(sigma2), beta2_(beta2), phi_(phi) {
    if (!(sigma2 > 0.0) || !(beta2 > 0.0)) throw InvalidArgument("SV model: variances must be > 0");
    if (!(std::abs(phi) < 1.0)) throw InvalidArgument("SV model: |phi| must be < 1");
  }

  double sigma2_;
  double beta2_;
  double phi_;
};

struct NLParams {
  double sigma2_x = 1.0;
  double sigma2_y = 1.0;
};

/// Non-linear benchmark model
///   x_1 ~ N(0, sigma_x^2)
///   x_n = x_{n-1}/2 + 25 x_{n-1}/(1 + x_{n-1}^2) + 8 cos(1.2 n) + v_n
///   y_n = x_n^2 / 20 + u_n
/// with v_n ~ N(0, sigma_x^2), u_n ~ N(0, sigma_y^2). The transition into
/// time n uses the cosine term at n.
class NlModel {
 public:
  explicit NlModel(const NLParams& p) : sigma2_x_(p.sigma2_x), sigma2_y_(p.sigma2_y) {
    if (!(p.sigma2_x > 0.0) || !(p.sigma2_y > 0.0)) throw InvalidArgument("NL model: variances must be > 0");
  }

  double sigma2_x() const noexcept { return sigma2_x_; }
  double sigma2_y() const noexcept { return sigma2_y_; }

  double sample_initial(RngStream& rng) const { return rng.normal(0.0, std::sqrt(sigma2_x_)); }
  double initial_log_density(double x) const { return normal_log_density(x, 0.0, sigma2_x_); }

  double transition_mean(double x_prev, std::size_t n) const {
    return 0.5 * x_prev + 25.0 * x_prev / (1.0 + x_prev * x_prev) + 8.0 * std::cos(1.2 * static_cast<double>(n));
  }
  double sample_transition(double x_prev, std::size_t n, RngStream& rng) const {
    return transition_mean(x_prev, n) + std::sqrt(sigma2_x_) * rng.normal();
  }
  double transition_log_density(double x, double x_prev, std::size_t n) const {
    return normal_log_density(x, transition_mean(x_prev, n), sigma2_x_);
  }

  double emission_mean(double x) const { return x * x / 20.0; }
  double sample_emission(double x, std::size_t /*n*/, RngStream& rng) const {
    return emission_mean(x) + std::sqrt(sigma2_y_) * rng.normal();
  }
  double emission_log_density(double y, double x, std::size_t /*n*/) const {
    return normal_log_density(y, emission_mean(x), sigma2_y_);
  }

  double transition_noise_std() const noexcept { return std::sqrt(sigma2_x_); }

 private:
  double sigma2_x_;
  double sigma2_y_;
};

static_assert(StateSpaceModel<SvModel>);
static_assert(StateSpaceModel<NlModel>);

struct Simulation {
  std::vector<double> x;
  std::vector<double> y;
};

/// Forward simulation of N steps: x_1 ~ mu, x_n ~ f, y_n ~ g.
template <StateSpaceModel Model>
Simulation simulate(const Model& model, std::size_t N, RngStream& rng) {
  if (N == 0) throw InvalidArgument("simulate: N must be >= 1");
  Simulation out;
  out.x.resize(N);
  out.y.resize(N);
  for (std::size_t n = 1; n <= N; ++n) {
    out.x[n - 1] = n == 1 ? model.sample_initial(rng) : model.sample_transition(out.x[n - 2], n, rng);
    out.y[n - 1] = model.sample_emission(out.x[n - 1], n, rng);
  }
  return out;
}

}  // namespace detsmc

#endif  // DETSMC_MODELS_HPP
