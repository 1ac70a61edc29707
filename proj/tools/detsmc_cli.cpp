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

// detsmc: runs configured experiments, validates configs, and checks the
// reshuffling schemes against exhaustive search.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "detsmc/experiment/config.hpp"
#include "detsmc/experiment/runner.hpp"
#include "detsmc/oracle.hpp"
#include "detsmc/selection.hpp"

namespace {

using detsmc::experiment::ExperimentConfig;

struct Overrides {
  std::optional<std::string> output_dir;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;

  void apply(ExperimentConfig& c) const {
    if (output_dir) c.output_dir = *output_dir;
    if (threads) c.threads = *threads;
    if (seed) c.seed = *seed;
  }
};

// Random simplex points with a spread of magnitudes.
std::vector<double> random_weights(std::size_t S, detsmc::RngStream& rng) {
  std::vector<double> w(S);
  const double scale = rng.uniform(0.1, 6.0);
  double total = 0.0;
  for (double& x : w) total += (x = std::exp(scale * rng.normal()));
  for (double& x : w) x /= total;
  return w;
}

int oracle_check(std::size_t max_s, std::size_t trials, std::uint64_t seed) {
  if (max_s < 1 || max_s > detsmc::kMaxOracleSize) {
    std::cerr << "error: --max-s must lie in [1, " << detsmc::kMaxOracleSize << "]\n";
    return 2;
  }
  bool ok = true;
  for (std::size_t S = 1; S <= max_s; ++S) {
    detsmc::RngStream rng(seed, S);
    std::size_t kl_bad = 0, tv_bad = 0;
    double kl_gap = 0.0, tv_gap = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const auto w = random_weights(S, rng);
      const double kl = std::abs(detsmc::kl_objective(w, detsmc::kl_reshuffle(w)) -
                                 detsmc::brute_force_kl_optimum(w).objective);
      const auto a = detsmc::tv_reshuffle(w);
      const double tv = std::abs(detsmc::tv_objective(w, a) - detsmc::brute_force_tv_optimum(w).objective);
      kl_gap = std::max(kl_gap, kl);
      tv_gap = std::max(tv_gap, tv);
      kl_bad += kl > 1e-9;
      tv_bad += tv > 1e-12;
    }
    std::cout << "S=" << S << " trials=" << trials << " kl_max_gap=" << detsmc::experiment::format_real(kl_gap)
              << " tv_max_gap=" << detsmc::experiment::format_real(tv_gap)
              << ((kl_bad || tv_bad) ? " FAIL" : " ok") << '\n';
    ok = ok && kl_bad == 0 && tv_bad == 0;
  }
  std::cout << (ok ? "oracle-check: PASS" : "oracle-check: FAIL") << '\n';
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential Monte Carlo with deterministic offspring selection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DETSMC_VERSION);

  Overrides ov;
  std::string output_dir;
  std::size_t threads = 0;
  std::uint64_t seed = 0;
  auto* out_opt = app.add_option("--output-dir", output_dir, "Override the config's output directory");
  auto* thr_opt = app.add_option("--threads", threads, "Worker threads (0: all cores)");
  auto* seed_opt = app.add_option("--seed", seed, "Override the config's seed");
  for (auto* o : {out_opt, thr_opt, seed_opt}) o->configurable(false);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Path to a JSON config")->required()->check(CLI::ExistingFile);
  run->fallthrough();

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a config file without running it");
  validate->add_option("config", validate_path, "Path to a JSON config")->required();
  validate->fallthrough();

  std::size_t max_s = 8;
  std::size_t trials = 200;
  auto* oracle = app.add_subcommand("oracle-check", "Compare KL/TV reshuffling with exhaustive search");
  oracle->add_option("--max-s", max_s, "Largest population to enumerate")->required();
  oracle->add_option("--trials", trials, "Random weight vectors per population size");
  oracle->fallthrough();

  CLI11_PARSE(app, argc, argv);
  if (*out_opt) ov.output_dir = output_dir;
  if (*thr_opt) ov.threads = threads;
  if (*seed_opt) ov.seed = seed;

  try {
    if (*oracle) return oracle_check(max_s, trials, ov.seed.value_or(1));

    const std::string& path = *run ? config_path : validate_path;
    ExperimentConfig cfg = detsmc::experiment::parse_config_file(path);
    ov.apply(cfg);
    if (*validate) {
      std::cout << "valid: " << path << '\n' << detsmc::experiment::to_json(cfg).dump(2) << '\n';
      return 0;
    }
    const auto files = detsmc::experiment::run_experiment(cfg);
    for (const auto& f : files) std::cout << cfg.output_dir << '/' << f.name << " (" << f.rows << " rows)\n";
    std::cout << cfg.output_dir << "/manifest.json\n";
    return 0;
  } catch (const detsmc::experiment::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const detsmc::IngestionError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
