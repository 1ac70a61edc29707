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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Stochastic criteria use seed 1 throughout.

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "detsmc.hpp"
#include "detsmc/experiment/runner.hpp"
#include "../test_support.hpp"

namespace {

using namespace detsmc;
namespace ex = detsmc::experiment;

constexpr std::uint64_t kSeed = 1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream o;
  o.precision(digits);
  o << v;
  return o.str();
}

// --- 1-4: selection ---------------------------------------------------------------

Outcome kl_optimality() {
  const auto t0 = Clock::now();
  RngStream rng(kSeed, 1);
  double worst = 0.0;
  std::size_t bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t S = 2 + static_cast<std::size_t>(rng.uniform() * 7);
    const auto u = t % 2 ? testing::random_simplex(S, rng) : testing::random_skewed_simplex(S, rng);
    const double gap = std::abs(kl_objective(u, kl_reshuffle(u)) - brute_force_kl_optimum(u).objective);
    worst = std::max(worst, gap);
    bad += gap > 1e-9;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 10.0,
          "1000 cases, S in 2..8, max |gap| " + fmt(worst) + ", " + fmt(secs, 3) + " s (limits 1e-9, 10 s)"};
}

Outcome tv_optimality() {
  RngStream rng(kSeed, 2);
  double worst = 0.0;
  std::size_t bad = 0, unbracketed = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t S = 2 + static_cast<std::size_t>(rng.uniform() * 7);
    const auto w = t % 2 ? testing::random_simplex(S, rng) : testing::random_skewed_simplex(S, rng);
    const auto a = tv_reshuffle(w);
    const double gap = std::abs(tv_objective(w, a) - brute_force_tv_optimum(w).objective);
    worst = std::max(worst, gap);
    bad += gap > 1e-12;
    for (std::size_t s = 0; s < S; ++s) {
      const double ws = w[s] * static_cast<double>(S);
      const double as = static_cast<double>(a[s]);
      unbracketed += !(as == std::floor(ws) || as == std::ceil(ws));
    }
  }
  return {bad == 0 && unbracketed == 0, "1000 cases, max |gap| " + fmt(worst) + " (limit 1e-12), " +
                                            std::to_string(unbracketed) + " counts outside {floor, ceil}"};
}

Outcome conservation_and_determinism() {
  RngStream gen(kSeed, 3);
  const std::vector<SelectionScheme> schemes{
      SelectionScheme::parse("kl_w"),       SelectionScheme::parse("tv_w"),
      SelectionScheme::parse("ml_w"),       SelectionScheme::parse("stratified"),
      SelectionScheme::parse("systematic"), SelectionScheme::parse("multinomial")};
  std::size_t violations = 0, unstable = 0, checks = 0;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t S = 1 + static_cast<std::size_t>(gen.uniform() * 64);
    const auto w = testing::random_skewed_simplex(S, gen);
    const auto in = SelectionInput::from_weights(w);
    for (const auto& scheme : schemes) {
      RngStream r(kSeed, 1000 + static_cast<std::uint64_t>(t));
      const auto a = select_ancestors(scheme, in, r);
      ++checks;
      violations += a.size() != S;
      if (scheme.deterministic()) {
        RngStream r2(kSeed, 1000 + static_cast<std::uint64_t>(t));
        unstable += select_ancestors(scheme, in, r2) != a;
      }
    }
  }
  return {violations == 0 && unstable == 0, std::to_string(checks) + " selections over 10000 inputs, " +
                                                std::to_string(violations) + " count violations, " +
                                                std::to_string(unstable) + " unstable deterministic results"};
}

Outcome scale_invariance() {
  RngStream rng(kSeed, 4);
  std::size_t mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t S = 2 + static_cast<std::size_t>(rng.uniform() * 63);
    const auto u = testing::random_skewed_simplex(S, rng);
    std::vector<double> lu(S);
    for (std::size_t s = 0; s < S; ++s) lu[s] = std::log(u[s]);
    const auto base = kl_reshuffle_log(lu);
    for (double k : {1e-6, 1.0, 1e6}) {
      std::vector<double> shifted(S);
      for (std::size_t s = 0; s < S; ++s) shifted[s] = lu[s] + std::log(k);
      mismatches += !(kl_reshuffle_log(shifted) == base);
    }
  }
  return {mismatches == 0, "100 vectors x 3 scales, " + std::to_string(mismatches) + " mismatches"};
}

// --- 5-7: filtering experiments -------------------------------------------------------

/// Per-replicate values of one (scheme, S, estimator, loss) cell.
using Table = std::map<std::string, std::vector<double>>;

Table by_scheme(const std::vector<ex::LossRow>& rows, std::size_t S, EstimatorKind e, LossKind l,
                std::size_t replicates) {
  Table t;
  for (const auto& r : rows) {
    if (r.S != S || r.estimator != e || r.loss != l) continue;
    auto& v = t[r.scheme];
    v.resize(replicates);
    v[r.replicate] = r.value;
  }
  return t;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

std::string means_text(const Table& t, const std::vector<std::string>& order, const std::string& suffix = "") {
  std::string s;
  for (const auto& name : order) s += (s.empty() ? "" : " ") + name + suffix + "=" + fmt(mean(t.at(name)));
  return s;
}

bool shared_data(const std::vector<ex::LossRow>& rows) {
  std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> h;
  for (const auto& r : rows) {
    auto [it, fresh] = h.emplace(std::make_pair(r.N, r.replicate), r.data_hash);
    if (!fresh && it->second != r.data_hash) return false;
  }
  return true;
}

Outcome sv_bayesian_ordering() {
  const auto t0 = Clock::now();
  ex::ExperimentConfig c;
  c.experiment = ex::ExperimentKind::sv_loss;
  c.seed = kSeed;
  c.replicates = 10;
  c.S_list = {500};
  c.N_list = {500};
  c.sv = SVParams{1.0, 0.5, 0.91};
  for (const char* s : {"ml", "kl_p", "tv_p", "kl_w", "tv_w", "stratified", "systematic"})
    c.schemes.push_back(SelectionScheme::parse(s));
  c.estimators = {EstimatorKind::mmse};
  c.losses = {LossKind::l2};
  const auto tables = ex::run_loss(c);
  const double secs = seconds_since(t0);
  const Table t = by_scheme(tables.rows, 500, EstimatorKind::mmse, LossKind::l2, c.replicates);

  const double ml = mean(t.at("ml")), kl_p = mean(t.at("kl_p")), tv_p = mean(t.at("tv_p"));
  double weight_min = INFINITY;
  for (const char* s : {"kl_w", "tv_w", "stratified", "systematic"}) weight_min = std::min(weight_min, mean(t.at(s)));
  const bool ml_first = ml <= kl_p && ml <= tv_p;
  const bool lik_below = std::max(kl_p, tv_p) < weight_min;
  std::size_t wins = 0;
  for (std::size_t r = 0; r < c.replicates; ++r) {
    const double lik = std::max({t.at("ml")[r], t.at("kl_p")[r], t.at("tv_p")[r]});
    const double stoch = std::min(t.at("stratified")[r], t.at("systematic")[r]);
    wins += lik < stoch;
  }
  const bool pass = ml_first && lik_below && wins >= 8 && secs < 300.0 && shared_data(tables.rows);
  return {pass, "mean L2/N (mmse): " +
                    means_text(t, {"ml", "kl_p", "tv_p", "kl_w", "tv_w", "stratified", "systematic"}) +
                    "; ml<=kl_p,tv_p: " + (ml_first ? "yes" : "no") + "; kl_p,tv_p < weight-based: " +
                    (lik_below ? "yes" : "no") + "; likelihood group below stratified/systematic in " +
                    std::to_string(wins) + "/10 replicates (need 8); " + fmt(secs, 3) + " s (limit 300 s)"};
}

Outcome sv_sampled_small_population() {
  ex::ExperimentConfig c;
  c.experiment = ex::ExperimentKind::sv_loss;
  c.seed = kSeed;
  c.replicates = 10;
  c.S_list = {50, 500};
  c.N_list = {500};
  for (const char* s : {"kl_w", "tv_w", "stratified", "systematic"}) c.schemes.push_back(SelectionScheme::parse(s));
  c.estimators = {EstimatorKind::sampled};
  c.losses = {LossKind::l2};
  const auto tables = ex::run_loss(c);
  const Table small = by_scheme(tables.rows, 50, EstimatorKind::sampled, LossKind::l2, c.replicates);
  const Table large = by_scheme(tables.rows, 500, EstimatorKind::sampled, LossKind::l2, c.replicates);
  const double det = std::max(mean(small.at("kl_w")), mean(small.at("tv_w")));
  const double sto = std::min(mean(large.at("stratified")), mean(large.at("systematic")));
  return {det < sto && shared_data(tables.rows),
          "mean sampled L2/N: " + means_text(small, {"kl_w", "tv_w"}, "@50") + " vs " +
              means_text(large, {"stratified", "systematic"}, "@500")};
}

Outcome nl_ml_failure() {
  ex::ExperimentConfig c;
  c.experiment = ex::ExperimentKind::nl_loss;
  c.seed = kSeed;
  c.replicates = 10;
  c.S_list = {500};
  c.N_list = {100};
  c.nl_thetas = {NLParams{1.0, 1.0}};
  c.schemes = {SelectionScheme::parse("ml"), SelectionScheme::parse("tv_p")};
  c.estimators = {EstimatorKind::mmae};
  c.losses = {LossKind::l1};
  const auto tables = ex::run_loss(c);
  const Table t = by_scheme(tables.rows, 500, EstimatorKind::mmae, LossKind::l1, c.replicates);
  std::size_t wins = 0;
  for (std::size_t r = 0; r < c.replicates; ++r) wins += t.at("ml")[r] > t.at("tv_p")[r];
  return {wins >= 9 && shared_data(tables.rows),
          "L1/N (mmae): " + means_text(t, {"ml", "tv_p"}) + "; ml worse in " + std::to_string(wins) +
              "/10 replicates (need 9)"};
}

// --- 8-12: particle Gibbs ----------------------------------------------------------

Outcome pg_variance_collapse() {
  ex::ExperimentConfig c;
  c.experiment = ex::ExperimentKind::pg_synthetic;
  c.seed = kSeed;
  c.replicates = 10;
  c.S_list = {10};
  c.N_list = {100};
  c.schemes = {SelectionScheme::parse("tv_p")};
  c.pg.iterations = 1000;
  c.pg.burn_in = 0;
  const auto runs = ex::run_pg(c);
  std::size_t collapsed = 0;
  std::string medians;
  for (const auto& r : runs) {
    const double m = chain_median(r.chain.sigma2, r.window);
    collapsed += m < 0.1;
    medians += (medians.empty() ? "" : " ") + fmt(m, 3);
  }
  return {collapsed >= 9, "sigma2 medians [" + medians + "]; below 0.1 in " + std::to_string(collapsed) +
                              "/10 seeds (need 9)"};
}

Outcome sigma2_conjugacy() {
  const IGParams worked = sigma2_posterior(std::vector<double>{1.0, 0.5}, 0.5, IGPrior{});
  const bool rate_ok = std::abs(worked.rate - 0.376) <= 1e-15 && std::abs(worked.shape - 1.001) <= 1e-15;

  RngStream data(kSeed, 9);
  const auto sim = simulate(SvModel(SVParams{1.0, 0.5, 0.91}), 50, data);
  const IGParams post = sigma2_posterior(sim.x, 0.91, IGPrior{});
  RngStream rng(kSeed, 10);
  std::vector<double> draws(10000);
  for (double& v : draws) v = sample_sigma2(sim.x, 0.91, IGPrior{}, rng);
  const double d = testing::ks_statistic(
      draws, [&](double v) { return v <= 0.0 ? 0.0 : boost::math::gamma_q(post.shape, post.rate / v); });
  const double crit = testing::ks_critical_001(draws.size());
  return {rate_ok && d < crit, "worked example IG(" + fmt(worked.shape, 6) + ", " + fmt(worked.rate, 6) +
                                   "); KS D=" + fmt(d) + " vs critical " + fmt(crit) + " at alpha 0.01"};
}

Outcome csmc_invariant() {
  RngStream data(kSeed, 11);
  const SvModel model(SVParams{});
  std::size_t broken = 0;
  const char* names[] = {"kl_w", "kl_p", "tv_w", "tv_p", "stratified", "systematic", "multinomial", "ml"};
  for (int run = 0; run < 100; ++run) {
    const std::size_t N = 1 + static_cast<std::size_t>(data.uniform() * 60);
    const std::size_t S = 1 + static_cast<std::size_t>(data.uniform() * 40);
    const auto sim = simulate(model, N, data);
    FilterConfig fc;
    fc.S = S;
    fc.scheme = SelectionScheme::parse(names[run % 8]);
    fc.track_likelihood = fc.scheme.uses_likelihood();
    fc.ess_threshold_fraction = run % 2 ? 1.0 : 0.5;
    RngStream rng(kSeed, 100 + static_cast<std::uint64_t>(run));
    const auto r = csmc_run(model, sim.y, fc, sim.x, rng);
    for (std::size_t n = 0; n < N; ++n) broken += r.output.stored_states[n][S - 1] != sim.x[n];
    broken += extract_trajectory(r.output.genealogy, r.output.stored_states, S - 1) != sim.x;
  }
  const auto sim = simulate(model, 40, data);
  FilterConfig one;
  one.S = 1;
  RngStream rng(kSeed, 12);
  const bool verbatim = csmc_kernel(model, sim.y, one, sim.x, rng) == sim.x;
  return {broken == 0 && verbatim, "100 runs, " + std::to_string(broken) + " deviations from the reference; S=1 " +
                                       (verbatim ? "returns" : "does not return") + " the reference"};
}

Outcome pg_sanity() {
  const auto t0 = Clock::now();
  ex::ExperimentConfig c;
  c.experiment = ex::ExperimentKind::pg_synthetic;
  c.seed = kSeed;
  c.replicates = 1;
  c.S_list = {100};
  c.N_list = {100};
  c.schemes = {SelectionScheme::parse("kl_w")};
  c.pg.iterations = 2000;
  const auto runs = ex::run_pg(c);
  const double secs = seconds_since(t0);
  const auto& r = runs.front();
  const auto beta = ex::beta_chain(r.chain);
  bool finite = true;
  for (const auto* chain : {&r.chain.sigma2, &r.chain.beta2, &r.chain.phi}) {
    for (double v : *chain) finite = finite && std::isfinite(v);
  }
  const double s2 = chain_median(r.chain.sigma2, r.window);
  const double phi = chain_median(r.chain.phi, r.window);
  bool rho0 = true;
  for (const auto* chain : {&r.chain.sigma2, &beta, &r.chain.phi}) rho0 = rho0 && acf(*chain, 100)[0] == 1.0;
  const bool pass = finite && s2 > 0.1 && s2 < 10.0 && phi > 0.5 && phi < 1.0 && rho0 && secs < 600.0;
  return {pass, std::string("finite chains: ") + (finite ? "yes" : "no") + "; sigma2 median " + fmt(s2) +
                    " (need 0.1..10); phi median " + fmt(phi) + " (need 0.5..1); rho(0)=1: " + (rho0 ? "yes" : "no") +
                    "; " + fmt(secs, 3) + " s (limit 600 s)"};
}

Outcome acf_suite() {
  RngStream rng(kSeed, 13);
  std::vector<double> c(500);
  for (double& v : c) v = rng.normal();
  const bool zero = acf(c, 5)[0] == 1.0;

  const std::size_t M = 1000;
  std::vector<double> alt(M);
  for (std::size_t t = 0; t < M; ++t) alt[t] = t % 2 ? -1.0 : 1.0;
  const double rho1 = acf(alt, 1)[1];
  const bool alternating = std::abs(rho1 + 1.0) <= 2.0 / static_cast<double>(M);

  std::vector<double> noise(100000);
  for (double& v : noise) v = rng.normal();
  const auto rho = acf(noise, 20);
  double worst = 0.0;
  for (std::size_t k = 1; k <= 20; ++k) worst = std::max(worst, std::abs(rho[k]));
  return {zero && alternating && worst < 0.02, "rho(0)=1: " + std::string(zero ? "yes" : "no") +
                                                   "; alternating rho(1)=" + fmt(rho1, 6) +
                                                   " (within 2/M of -1); white noise max |rho(1..20)|=" + fmt(worst) +
                                                   " (limit 0.02)"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"AC-01", "KL reshuffling attains the exhaustive optimum", kl_optimality},
      {"AC-02", "TV reshuffling attains the exhaustive optimum", tv_optimality},
      {"AC-03", "offspring conservation and determinism", conservation_and_determinism},
      {"AC-04", "KL reshuffling scale invariance", scale_invariance},
      {"AC-05", "SV Bayesian-estimator ordering", sv_bayesian_ordering},
      {"AC-06", "SV sampled estimator, 50 vs 500 particles", sv_sampled_small_population},
      {"AC-07", "NL model, ML multimodality failure", nl_ml_failure},
      {"AC-08", "likelihood-based PG variance collapse", pg_variance_collapse},
      {"AC-09", "sigma2 conjugate update", sigma2_conjugacy},
      {"AC-10", "conditional SMC reference slot", csmc_invariant},
      {"AC-11", "PG sanity band on synthetic SV", pg_sanity},
      {"AC-12", "ACF unit suite", acf_suite},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %s %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
