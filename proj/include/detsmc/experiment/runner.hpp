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

// Experiment drivers behind the command-line tool. Each experiment expands
// its configuration into independent cells, runs them on a small worker pool
// and collects the results in cell order, so output files do not depend on
// scheduling.

#ifndef DETSMC_EXPERIMENT_RUNNER_HPP
#define DETSMC_EXPERIMENT_RUNNER_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "detsmc/diagnostics.hpp"
#include "detsmc/estimators.hpp"
#include "detsmc/experiment/config.hpp"
#include "detsmc/filter.hpp"
#include "detsmc/gibbs.hpp"
#include "detsmc/models.hpp"
#include "detsmc/prices.hpp"

#ifndef DETSMC_VERSION
#define DETSMC_VERSION "0.1.0"
#endif

namespace detsmc::experiment {

inline constexpr std::uint64_t kStreamsPerReplicate = 1000000;

/// Observation stream for one replicate; shared by every scheme.
inline RngStream data_stream(std::uint64_t seed, std::size_t replicate) { return RngStream(seed, replicate); }

/// Filter or chain stream for one (replicate, scheme) cell.
inline RngStream scheme_stream(std::uint64_t seed, std::size_t replicate, const SelectionScheme& scheme) {
  return RngStream(seed, static_cast<std::uint64_t>(replicate) * kStreamsPerReplicate + scheme.ordinal());
}

/// FNV-1a over the bytes of a sequence of doubles.
inline std::uint64_t hash_values(std::span<const double> values) {
  std::uint64_t h = 1469598103934665603ull;
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ull;
    }
  }
  return h;
}

/// Runs fn(0..count-1) on up to `threads` workers and returns the results in
/// index order. The exception of the lowest failing index is rethrown.
template <class R>
std::vector<R> parallel_map(std::size_t count, std::size_t threads, const std::function<R(std::size_t)>& fn) {
  std::vector<std::optional<R>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(count, 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<R> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// --- loss experiments ------------------------------------------------------

struct LossRow {
  std::optional<NLParams> theta;  // nl_loss only
  std::string scheme;
  std::size_t S = 0;
  std::size_t N = 0;
  std::size_t replicate = 0;
  EstimatorKind estimator = EstimatorKind::mmse;
  LossKind loss = LossKind::l2;
  double value = 0.0;
  std::uint64_t data_hash = 0;
};

struct StateRow {
  NLParams theta;
  std::string scheme;
  std::size_t S = 0;
  std::size_t N = 0;
  std::size_t replicate = 0;
  std::size_t n = 0;  // one-based
  double x_true = 0.0;
  double y = 0.0;
  std::vector<double> estimates;  // one per configured estimator
};

struct LossTables {
  std::vector<LossRow> rows;
  std::vector<StateRow> states;
};

namespace detail {

struct LossCell {
  std::size_t theta = 0;
  std::size_t N = 0;
  std::size_t replicate = 0;
  std::size_t S = 0;
  SelectionScheme scheme;
};

template <StateSpaceModel Model>
LossTables run_loss_cell(const ExperimentConfig& c, const Model& model, const LossCell& cell,
                         std::optional<NLParams> theta) {
  RngStream data_rng = data_stream(c.seed, cell.replicate);
  const Simulation sim = simulate(model, cell.N, data_rng);

  FilterConfig fc;
  fc.S = cell.S;
  fc.scheme = cell.scheme;
  fc.track_likelihood = cell.scheme.uses_likelihood();
  fc.ess_threshold_fraction = c.ess_threshold_fraction;
  RngStream rng = scheme_stream(c.seed, cell.replicate, cell.scheme);
  const FilterOutput out = bpf(model, sim.y, fc, rng);

  LossTables t;
  const std::uint64_t h = hash_values(sim.y);
  std::vector<std::vector<double>> estimates;
  for (EstimatorKind e : c.estimators) {
    estimates.push_back(estimate(out, e, &rng));
    for (LossKind l : c.losses) {
      const LossSpec spec{l, 0.5 * model.transition_noise_std()};
      t.rows.push_back({theta, cell.scheme.name(), cell.S, cell.N, cell.replicate, e, l,
                        loss(sim.x, estimates.back(), spec), h});
    }
  }
  if (c.dump_states && theta) {
    for (std::size_t n = 0; n < cell.N; ++n) {
      StateRow r{*theta, cell.scheme.name(), cell.S, cell.N, cell.replicate, n + 1, sim.x[n], sim.y[n], {}};
      for (const auto& e : estimates) r.estimates.push_back(e[n]);
      t.states.push_back(std::move(r));
    }
  }
  return t;
}

}  // namespace detail

/// sv_loss and nl_loss: one filter run per (theta, N, replicate, S, scheme),
/// scored by every configured estimator and loss.
inline LossTables run_loss(const ExperimentConfig& c) {
  const bool nl = c.experiment == ExperimentKind::nl_loss;
  if (!nl && c.experiment != ExperimentKind::sv_loss) throw InvalidArgument("run_loss: not a loss experiment");
  std::vector<detail::LossCell> cells;
  const std::size_t thetas = nl ? c.nl_thetas.size() : 1;
  for (std::size_t t = 0; t < thetas; ++t)
    for (std::size_t N : c.N_list)
      for (std::size_t r = 0; r < c.replicates; ++r)
        for (std::size_t S : c.S_list)
          for (const auto& scheme : c.schemes) cells.push_back({t, N, r, S, scheme});

  const std::optional<SvModel> sv = nl ? std::nullopt : std::optional<SvModel>(SvModel(c.sv));
  auto results = parallel_map<LossTables>(cells.size(), c.threads, [&](std::size_t i) {
    const auto& cell = cells[i];
    if (nl) return detail::run_loss_cell(c, NlModel(c.nl_thetas[cell.theta]), cell, c.nl_thetas[cell.theta]);
    return detail::run_loss_cell(c, *sv, cell, std::nullopt);
  });
  LossTables all;
  for (auto& r : results) {
    std::move(r.rows.begin(), r.rows.end(), std::back_inserter(all.rows));
    std::move(r.states.begin(), r.states.end(), std::back_inserter(all.states));
  }
  return all;
}

// --- degeneracy --------------------------------------------------------------

struct DegeneracyRun {
  std::string scheme;
  std::size_t S = 0;
  std::size_t N = 0;
  std::size_t replicate = 0;
  Genealogy genealogy;
  std::vector<std::size_t> distinct_roots;  // per n
  std::uint64_t data_hash = 0;
};

/// One SV filter run per (S, scheme, replicate) at the single configured N.
inline std::vector<DegeneracyRun> run_degeneracy(const ExperimentConfig& c) {
  if (c.experiment != ExperimentKind::degeneracy) throw InvalidArgument("run_degeneracy: wrong experiment");
  struct Cell {
    std::size_t S;
    SelectionScheme scheme;
    std::size_t replicate;
  };
  std::vector<Cell> cells;
  for (std::size_t S : c.S_list)
    for (const auto& scheme : c.schemes)
      for (std::size_t r = 0; r < c.replicates; ++r) cells.push_back({S, scheme, r});
  const SvModel model(c.sv);
  const std::size_t N = c.N_list.front();
  return parallel_map<DegeneracyRun>(cells.size(), c.threads, [&](std::size_t i) {
    const Cell& cell = cells[i];
    RngStream data_rng = data_stream(c.seed, cell.replicate);
    const Simulation sim = simulate(model, N, data_rng);
    FilterConfig fc;
    fc.S = cell.S;
    fc.scheme = cell.scheme;
    fc.track_likelihood = cell.scheme.uses_likelihood();
    fc.ess_threshold_fraction = c.ess_threshold_fraction;
    RngStream rng = scheme_stream(c.seed, cell.replicate, cell.scheme);
    FilterOutput out = bpf(model, sim.y, fc, rng);
    DegeneracyRun run{cell.scheme.name(), cell.S, N, cell.replicate, std::move(out.genealogy), {}, hash_values(sim.y)};
    run.distinct_roots = distinct_root_counts(run.genealogy);
    return run;
  });
}

// --- particle Gibbs ------------------------------------------------------------

struct PgRun {
  std::string scheme;
  std::size_t S = 0;
  std::size_t N = 0;
  std::size_t replicate = 0;
  ChainRecord chain;
  std::size_t window = 0;
  std::uint64_t data_hash = 0;
};

/// Observations for pg_prices: log returns of the configured price file.
inline std::vector<double> load_price_returns(const std::string& path) {
  const PriceSeries p = read_price_csv(path);
  return log_returns(p.close, p.lines);
}

/// pg_synthetic and pg_prices: one chain per (N, S, scheme, replicate).
inline std::vector<PgRun> run_pg(const ExperimentConfig& c) {
  if (!c.is_pg()) throw InvalidArgument("run_pg: not a particle Gibbs experiment");
  const bool prices = c.experiment == ExperimentKind::pg_prices;
  std::vector<double> price_y;
  if (prices) price_y = load_price_returns(c.pg.price_csv);
  const std::vector<std::size_t> Ns = prices ? std::vector<std::size_t>{price_y.size()} : c.N_list;

  struct Cell {
    std::size_t N;
    std::size_t S;
    SelectionScheme scheme;
    std::size_t replicate;
  };
  std::vector<Cell> cells;
  for (std::size_t N : Ns)
    for (std::size_t S : c.S_list)
      for (const auto& scheme : c.schemes)
        for (std::size_t r = 0; r < c.replicates; ++r) cells.push_back({N, S, scheme, r});

  const SvModel truth(c.sv);
  return parallel_map<PgRun>(cells.size(), c.threads, [&](std::size_t i) {
    const Cell& cell = cells[i];
    std::vector<double> y;
    if (prices) {
      y = price_y;
    } else {
      RngStream data_rng = data_stream(c.seed, cell.replicate);
      y = simulate(truth, cell.N, data_rng).y;
    }
    PGConfig pc;
    pc.S = cell.S;
    pc.iterations = c.pg.iterations;
    pc.scheme = cell.scheme;
    pc.burn_in = c.pg.burn_in;
    pc.estimate_window = c.pg.estimate_window;
    pc.ess_threshold_fraction = c.ess_threshold_fraction;
    pc.trajectory_thin = c.pg.trajectory_thin;
    RngStream rng = scheme_stream(c.seed, cell.replicate, cell.scheme);
    PgRun run{cell.scheme.name(), cell.S, cell.N, cell.replicate, particle_gibbs(y, pc, c.pg.priors, rng), 0,
              hash_values(y)};
    run.window = pc.effective_window();
    return run;
  });
}

/// beta = sqrt(beta^2) per iteration.
inline std::vector<double> beta_chain(const ChainRecord& r) {
  std::vector<double> b(r.beta2.size());
  std::transform(r.beta2.begin(), r.beta2.end(), b.begin(), [](double v) { return std::sqrt(v); });
  return b;
}

// --- output ------------------------------------------------------------------

/// Seventeen significant digits, enough to round-trip any double.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path), path_(path) {
    if (!out_) throw Error("cannot write '" + path.string() + "'");
    row(header);
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
    ++rows_;
  }

  std::size_t data_rows() const noexcept { return rows_ - 1; }

  void close() {
    out_.close();
    if (!out_) throw Error("failed writing '" + path_.string() + "'");
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::size_t rows_ = 0;
};

inline std::string str(std::size_t v) { return std::to_string(v); }

struct OutputFile {
  std::string name;
  std::vector<std::string> columns;
  std::size_t rows = 0;
};

namespace detail {

inline void write_loss(const ExperimentConfig& c, const LossTables& t, const std::filesystem::path& dir,
                       std::vector<OutputFile>& files) {
  const bool nl = c.experiment == ExperimentKind::nl_loss;
  std::vector<std::string> cols{"experiment"};
  if (nl) cols.insert(cols.end(), {"sigma2_x", "sigma2_y"});
  cols.insert(cols.end(), {"scheme", "S", "N", "replicate", "estimator", "loss", "value", "data_hash"});
  CsvWriter w(dir / "losses.csv", cols);
  for (const auto& r : t.rows) {
    std::vector<std::string> f{std::string(to_string(c.experiment))};
    if (nl) f.insert(f.end(), {format_real(r.theta->sigma2_x), format_real(r.theta->sigma2_y)});
    f.insert(f.end(), {r.scheme, str(r.S), str(r.N), str(r.replicate + 1), std::string(to_string(r.estimator)),
                       std::string(to_string(r.loss)), format_real(r.value), str(r.data_hash)});
    w.row(f);
  }
  w.close();
  files.push_back({"losses.csv", cols, w.data_rows()});

  if (nl && c.dump_states) {
    std::vector<std::string> scols{"sigma2_x", "sigma2_y", "scheme", "S", "N", "replicate", "n", "x_true", "y"};
    for (auto e : c.estimators) scols.emplace_back(to_string(e));
    CsvWriter s(dir / "states.csv", scols);
    for (const auto& r : t.states) {
      std::vector<std::string> f{format_real(r.theta.sigma2_x), format_real(r.theta.sigma2_y), r.scheme, str(r.S),
                                 str(r.N), str(r.replicate + 1), str(r.n), format_real(r.x_true), format_real(r.y)};
      for (double e : r.estimates) f.push_back(format_real(e));
      s.row(f);
    }
    s.close();
    files.push_back({"states.csv", scols, s.data_rows()});
  }
}

inline void write_degeneracy(const ExperimentConfig& c, const std::vector<DegeneracyRun>& runs,
                             const std::filesystem::path& dir, std::vector<OutputFile>& files) {
  const std::vector<std::string> key{"scheme", "S", "N", "replicate"};
  auto with_key = [&](std::vector<std::string> extra) {
    std::vector<std::string> cols = key;
    cols.insert(cols.end(), extra.begin(), extra.end());
    return cols;
  };
  auto key_fields = [](const DegeneracyRun& r) {
    return std::vector<std::string>{r.scheme, str(r.S), str(r.N), str(r.replicate + 1)};
  };

  const auto ccols = with_key({"n", "resampled", "distinct_roots", "data_hash"});
  CsvWriter counts(dir / "degeneracy_counts.csv", ccols);
  for (const auto& r : runs) {
    for (std::size_t n = 0; n < r.N; ++n) {
      auto f = key_fields(r);
      f.insert(f.end(), {str(n + 1), r.genealogy.resample_flags[n] ? "1" : "0", str(r.distinct_roots[n]),
                         str(r.data_hash)});
      counts.row(f);
    }
  }
  counts.close();
  files.push_back({"degeneracy_counts.csv", ccols, counts.data_rows()});
  if (!c.dump_edges) return;

  // Particle indices are reported one-based.
  const auto ecols = with_key({"n", "child", "parent"});
  CsvWriter edges(dir / "degeneracy_edges.csv", ecols);
  const auto pcols = with_key({"particle", "n", "ancestor"});
  CsvWriter paths(dir / "degeneracy_paths.csv", pcols);
  for (const auto& r : runs) {
    for (std::size_t n = 1; n < r.N; ++n) {
      for (std::size_t s = 0; s < r.S; ++s) {
        auto f = key_fields(r);
        f.insert(f.end(), {str(n + 1), str(s + 1), str(r.genealogy.ancestors[n][s] + 1)});
        edges.row(f);
      }
    }
    for (std::size_t s = 0; s < r.S; ++s) {
      std::vector<std::size_t> lineage(r.N);
      Index idx = s;
      for (std::size_t n = r.N; n-- > 0;) {
        lineage[n] = idx;
        idx = r.genealogy.ancestors[n][idx];
      }
      for (std::size_t n = 0; n < r.N; ++n) {
        auto f = key_fields(r);
        f.insert(f.end(), {str(s + 1), str(n + 1), str(lineage[n] + 1)});
        paths.row(f);
      }
    }
  }
  edges.close();
  paths.close();
  files.push_back({"degeneracy_edges.csv", ecols, edges.data_rows()});
  files.push_back({"degeneracy_paths.csv", pcols, paths.data_rows()});
}

inline void write_pg(const ExperimentConfig& c, const std::vector<PgRun>& runs, const std::filesystem::path& dir,
                     std::vector<OutputFile>& files) {
  const std::vector<std::string> key{"scheme", "S", "N", "replicate"};
  auto cols_with = [&](std::vector<std::string> extra) {
    auto cols = key;
    cols.insert(cols.end(), extra.begin(), extra.end());
    return cols;
  };
  auto key_fields = [](const PgRun& r) {
    return std::vector<std::string>{r.scheme, str(r.S), str(r.N), str(r.replicate + 1)};
  };

  const auto chain_cols = cols_with({"iteration", "sigma2", "beta", "beta2", "phi"});
  CsvWriter chains(dir / "pg_chains.csv", chain_cols);
  const auto est_cols = cols_with({"parameter", "median", "window", "data_hash"});
  CsvWriter est(dir / "pg_estimates.csv", est_cols);
  const auto acf_cols = cols_with({"parameter", "lag", "rho"});
  CsvWriter acfs(dir / "pg_acf.csv", acf_cols);

  for (const auto& r : runs) {
    const auto beta = beta_chain(r.chain);
    for (std::size_t m = 0; m < r.chain.size(); ++m) {
      auto f = key_fields(r);
      f.insert(f.end(), {str(m + 1), format_real(r.chain.sigma2[m]), format_real(beta[m]),
                         format_real(r.chain.beta2[m]), format_real(r.chain.phi[m])});
      chains.row(f);
    }
    const std::pair<const char*, const std::vector<double>*> params[] = {
        {"sigma2", &r.chain.sigma2}, {"beta", &beta}, {"phi", &r.chain.phi}};
    for (const auto& [name, chain] : params) {
      auto f = key_fields(r);
      f.insert(f.end(), {name, format_real(chain_median(*chain, r.window)), str(r.window), str(r.data_hash)});
      est.row(f);

      const std::span<const double> kept = std::span<const double>(*chain).subspan(c.pg.burn_in);
      const std::size_t lag = std::min(c.pg.max_lag, kept.size() - 1);
      try {
        const auto rho = acf(kept, lag);
        for (std::size_t k = 0; k < rho.size(); ++k) {
          auto g = key_fields(r);
          g.insert(g.end(), {name, str(k), format_real(rho[k])});
          acfs.row(g);
        }
      } catch (const InvalidArgument& e) {
        std::clog << "warning: no ACF for " << name << " (" << r.scheme << ", replicate " << r.replicate + 1
                  << "): " << e.what() << '\n';
      }
    }
  }
  chains.close();
  est.close();
  acfs.close();
  files.push_back({"pg_chains.csv", chain_cols, chains.data_rows()});
  files.push_back({"pg_estimates.csv", est_cols, est.data_rows()});
  files.push_back({"pg_acf.csv", acf_cols, acfs.data_rows()});

  if (c.pg.trajectory_thin > 0) {
    const auto tcols = cols_with({"iteration", "n", "x"});
    CsvWriter traj(dir / "pg_trajectories.csv", tcols);
    for (const auto& r : runs) {
      for (std::size_t k = 0; k < r.chain.trajectories.size(); ++k) {
        for (std::size_t n = 0; n < r.chain.trajectories[k].size(); ++n) {
          auto f = key_fields(r);
          f.insert(f.end(), {str(r.chain.trajectory_iterations[k]), str(n + 1),
                             format_real(r.chain.trajectories[k][n])});
          traj.row(f);
        }
      }
    }
    traj.close();
    files.push_back({"pg_trajectories.csv", tcols, traj.data_rows()});
  }
}

}  // namespace detail

/// Writes manifest.json: version, config echo and the files produced.
inline void write_manifest(const ExperimentConfig& c, const std::vector<OutputFile>& files,
                           const std::filesystem::path& dir) {
  Json m;
  m["version"] = DETSMC_VERSION;
  m["config"] = to_json(c);
  Json out = Json::array();
  for (const auto& f : files) out.push_back({{"file", f.name}, {"columns", f.columns}, {"rows", f.rows}});
  m["outputs"] = out;
  std::ofstream o(dir / "manifest.json");
  if (!o) throw Error("cannot write manifest in '" + dir.string() + "'");
  o << m.dump(2) << '\n';
}

/// Runs the configured experiment and writes its tables and manifest into
/// c.output_dir. Returns the files written.
inline std::vector<OutputFile> run_experiment(const ExperimentConfig& c) {
  const std::filesystem::path dir(c.output_dir);
  std::filesystem::create_directories(dir);
  std::vector<OutputFile> files;
  switch (c.experiment) {
    case ExperimentKind::sv_loss:
    case ExperimentKind::nl_loss:
      detail::write_loss(c, run_loss(c), dir, files);
      break;
    case ExperimentKind::degeneracy:
      detail::write_degeneracy(c, run_degeneracy(c), dir, files);
      break;
    case ExperimentKind::pg_synthetic:
    case ExperimentKind::pg_prices:
      detail::write_pg(c, run_pg(c), dir, files);
      break;
  }
  write_manifest(c, files, dir);
  return files;
}

}  // namespace detsmc::experiment

#endif  // DETSMC_EXPERIMENT_RUNNER_HPP
