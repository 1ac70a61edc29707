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

#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <vector>

#include "detsmc/diagnostics.hpp"
#include "detsmc/gibbs.hpp"
#include "detsmc/models.hpp"
#include "test_support.hpp"

namespace detsmc {
namespace {

/// CDF of IG(shape, rate) at v: Q(shape, rate / v).
double inverse_gamma_cdf(double v, double shape, double rate) {
  return v <= 0.0 ? 0.0 : boost::math::gamma_q(shape, rate / v);
}

TEST(Sigma2Posterior, WorkedExample) {
  const auto p = sigma2_posterior(std::vector<double>{1.0, 0.5}, 0.5, IGPrior{});
  EXPECT_NEAR(p.shape, 1.001, 1e-15);
  EXPECT_NEAR(p.rate, 0.376, 1e-15);
}

TEST(Sigma2Posterior, ZeroPathKeepsPriorRate) {
  const auto p = sigma2_posterior(std::vector<double>(7, 0.0), 0.3, IGPrior{0.2, 0.7});
  EXPECT_DOUBLE_EQ(p.shape, 0.2 + 3.5);
  EXPECT_EQ(p.rate, 0.7);
}

TEST(InverseGamma, MonteCarloMean) {
  RngStream rng(701, 0);
  double total = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) total += rng.inverse_gamma(3.0, 2.0);
  EXPECT_NEAR(total / draws, 1.0, 0.01);
}

TEST(SampleSigma2, ConjugatePosteriorPassesKolmogorovSmirnov) {
  RngStream data(702, 0);
  const auto sim = simulate(SvModel(SVParams{1.0, 0.5, 0.8}), 30, data);
  const IGPrior prior{};
  const auto post = sigma2_posterior(sim.x, 0.8, prior);
  RngStream rng(702, 1);
  std::vector<double> s(10000);
  for (double& v : s) {
    v = sample_sigma2(sim.x, 0.8, prior, rng);
    ASSERT_GT(v, 0.0);
  }
  const double d = testing::ks_statistic(s, [&](double v) { return inverse_gamma_cdf(v, post.shape, post.rate); });
  EXPECT_LT(d, testing::ks_critical_001(s.size()));
}

TEST(Beta2Posterior, Examples) {
  const auto zero = beta2_posterior(std::vector<double>{0.3, -1.0}, std::vector<double>{0.0, 0.0}, IGPrior{});
  EXPECT_DOUBLE_EQ(zero.shape, 1.001);
  EXPECT_EQ(zero.rate, 0.001);
  const auto one = beta2_posterior(std::vector<double>{0.0}, std::vector<double>{2.0}, IGPrior{});
  EXPECT_NEAR(one.shape, 0.501, 1e-15);
  EXPECT_NEAR(one.rate, 2.001, 1e-15);
  EXPECT_THROW(beta2_posterior(std::vector<double>{0.0}, std::vector<double>{1.0, 2.0}, IGPrior{}), InvalidArgument);
}

TEST(SampleBeta2, ConjugatePosteriorPassesKolmogorovSmirnov) {
  RngStream data(703, 0);
  const auto sim = simulate(SvModel(SVParams{1.0, 0.5, 0.91}), 40, data);
  const auto post = beta2_posterior(sim.x, sim.y, IGPrior{});
  RngStream rng(703, 1);
  std::vector<double> s(10000);
  for (double& v : s) v = sample_beta2(sim.x, sim.y, IGPrior{}, rng);
  const double d = testing::ks_statistic(s, [&](double v) { return inverse_gamma_cdf(v, post.shape, post.rate); });
  EXPECT_LT(d, testing::ks_critical_001(s.size()));
}

TEST(SamplePhi, ConcentratesOnTheTrueValue) {
  RngStream data(704, 0);
  const auto sim = simulate(SvModel(SVParams{1.0, 0.5, 0.9}), 10000, data);
  RngStream rng(704, 1);
  for (int i = 0; i < 20; ++i) EXPECT_NEAR(sample_phi(sim.x, 1.0, rng), 0.9, 0.05);
}

TEST(SamplePhi, FallsBackWhenEveryProposalLeavesTheInterval) {
  RngStream rng(705, 0);
  const std::vector<double> x{1.0, 10.0, 100.0, 1000.0};
  const auto d = sample_phi_detailed(x, 1e-6, rng, 0.42);
  EXPECT_TRUE(d.fell_back);
  EXPECT_EQ(d.proposals, kPhiMaxProposals);
  EXPECT_EQ(d.value, 0.42);
}

TEST(SamplePhi, SymmetricWhenLagProductVanishes) {
  // sum x_n x_{n-1} = 0, so the proposal is centred at zero.
  std::vector<double> x(40);
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = n % 2 == 0 ? 1.0 : 0.0;
  RngStream rng(706, 0);
  const int draws = 10000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double p = sample_phi(x, 1.0, rng);
    ASSERT_GT(p, -1.0);
    ASSERT_LT(p, 1.0);
    sum += p;
    sumsq += p * p;
  }
  const double mean = sum / draws;
  const double se = std::sqrt((sumsq / draws - mean * mean) / draws);
  EXPECT_LT(std::abs(mean), 3.0 * se);
}

TEST(SamplePhi, ZeroLagSumDrawsUniformly) {
  RngStream rng(707, 0);
  const std::vector<double> x{0.0, 0.0, 0.0, 3.0};
  for (int i = 0; i < 100; ++i) {
    const auto d = sample_phi_detailed(x, 1.0, rng);
    EXPECT_FALSE(d.fell_back);
    EXPECT_GT(d.value, -1.0);
    EXPECT_LT(d.value, 1.0);
  }
  EXPECT_THROW(sample_phi(std::vector<double>{1.0}, 1.0, rng), InvalidArgument);
}

PGConfig small_config(const char* scheme, std::size_t M, std::size_t burn_in = 0) {
  PGConfig cfg;
  cfg.S = 20;
  cfg.iterations = M;
  cfg.burn_in = burn_in;
  cfg.scheme = SelectionScheme::parse(scheme);
  return cfg;
}

TEST(ParticleGibbs, ChainLengthsAndRanges) {
  RngStream data(708, 0);
  const auto sim = simulate(SvModel(SVParams{}), 30, data);
  RngStream rng(708, 1);
  auto cfg = small_config("kl_w", 51, 50);
  cfg.trajectory_thin = 10;
  const auto rec = particle_gibbs(sim.y, cfg, PGPriors{}, rng);
  EXPECT_EQ(rec.size(), 51u);
  EXPECT_EQ(rec.beta2.size(), 51u);
  EXPECT_EQ(rec.phi.size(), 51u);
  EXPECT_EQ(rec.trajectory_iterations, (std::vector<std::size_t>{1, 11, 21, 31, 41, 51}));
  EXPECT_EQ(rec.sigma2[0], 1.0);
  EXPECT_EQ(rec.beta2[0], 1.0);
  EXPECT_GE(rec.phi[0], -0.5);
  EXPECT_LT(rec.phi[0], 0.5);
  for (std::size_t m = 0; m < rec.size(); ++m) {
    EXPECT_GT(rec.sigma2[m], 0.0);
    EXPECT_GT(rec.beta2[m], 0.0);
    EXPECT_GT(rec.phi[m], -1.0);
    EXPECT_LT(rec.phi[m], 1.0);
  }
  EXPECT_EQ(cfg.effective_window(), 1u);
}

TEST(ParticleGibbs, IdenticalSeedsGiveIdenticalChains) {
  RngStream data(709, 0);
  const auto sim = simulate(SvModel(SVParams{}), 25, data);
  for (const char* scheme : {"kl_w", "tv_p", "systematic"}) {
    RngStream a(709, 1), b(709, 1);
    const auto r1 = particle_gibbs(sim.y, small_config(scheme, 40), PGPriors{}, a);
    const auto r2 = particle_gibbs(sim.y, small_config(scheme, 40), PGPriors{}, b);
    EXPECT_EQ(r1.sigma2, r2.sigma2);
    EXPECT_EQ(r1.beta2, r2.beta2);
    EXPECT_EQ(r1.phi, r2.phi);
  }
}

TEST(ParticleGibbs, EverySweepPreservesTheReference) {
  RngStream data(710, 0);
  const auto sim = simulate(SvModel(SVParams{}), 20, data);
  for (const char* scheme : {"kl_w", "tv_p", "stratified", "ml"}) {
    RngStream rng(710, 1);
    std::size_t sweeps = 0;
    particle_gibbs(sim.y, small_config(scheme, 30), PGPriors{}, rng,
                   [&](std::size_t, const CsmcResult& r, std::span<const double> reference) {
                     ++sweeps;
                     const std::size_t S = r.output.particles();
                     const auto path = extract_trajectory(r.output.genealogy, r.output.stored_states, S - 1);
                     EXPECT_TRUE(std::equal(path.begin(), path.end(), reference.begin(), reference.end()));
                   });
    EXPECT_EQ(sweeps, 29u);
  }
}

TEST(ParticleGibbs, SyntheticSanityBand) {
  RngStream data(711, 0);
  const auto sim = simulate(SvModel(SVParams{1.0, 0.5, 0.91}), 100, data);
  PGConfig cfg;
  cfg.S = 100;
  cfg.iterations = 2000;
  cfg.scheme = SelectionScheme::parse("kl_w");
  RngStream rng(711, 1);
  const auto rec = particle_gibbs(sim.y, cfg, PGPriors{}, rng);
  const double s2 = chain_median(rec.sigma2, cfg.effective_window());
  EXPECT_TRUE(std::isfinite(s2));
  EXPECT_GT(s2, 0.1);
  EXPECT_LT(s2, 10.0);
  EXPECT_TRUE(std::isfinite(chain_median(rec.beta2, cfg.effective_window())));
  EXPECT_TRUE(std::isfinite(chain_median(rec.phi, cfg.effective_window())));
}

TEST(ParticleGibbs, RejectsBadConfiguration) {
  RngStream rng(712, 0);
  const std::vector<double> y{0.1, 0.2, 0.3};
  EXPECT_THROW(particle_gibbs(y, small_config("kl_w", 5, 5), PGPriors{}, rng), InvalidArgument);
  EXPECT_THROW(particle_gibbs(std::vector<double>{0.1}, small_config("kl_w", 5), PGPriors{}, rng), InvalidArgument);
  PGPriors bad;
  bad.sigma2.shape = 0.0;
  EXPECT_THROW(particle_gibbs(y, small_config("kl_w", 5), bad, rng), InvalidArgument);
}

}  // namespace
}  // namespace detsmc
