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

// Experiment configuration: a JSON document validated field by field.
// Unknown keys are rejected and every error names the offending path.

#ifndef DETSMC_EXPERIMENT_CONFIG_HPP
#define DETSMC_EXPERIMENT_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "detsmc/error.hpp"
#include "detsmc/estimators.hpp"
#include "detsmc/gibbs.hpp"
#include "detsmc/models.hpp"
#include "detsmc/selection.hpp"
#include "json.hpp"

namespace detsmc::experiment {

using Json = nlohmann::ordered_json;

enum class ExperimentKind { sv_loss, nl_loss, degeneracy, pg_synthetic, pg_prices };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::sv_loss:
      return "sv_loss";
    case ExperimentKind::nl_loss:
      return "nl_loss";
    case ExperimentKind::degeneracy:
      return "degeneracy";
    case ExperimentKind::pg_synthetic:
      return "pg_synthetic";
    case ExperimentKind::pg_prices:
      return "pg_prices";
  }
  return "?";
}

/// Thrown for any configuration problem; path() is the JSON field path.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

struct PgSettings {
  std::size_t iterations = 2000;
  std::size_t burn_in = 0;
  std::size_t estimate_window = 5000;
  std::size_t max_lag = 100;
  std::size_t trajectory_thin = 0;
  PGPriors priors{};
  std::string price_csv;  // pg_prices only
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::sv_loss;
  std::uint64_t seed = 1;
  std::size_t replicates = 10;
  double ess_threshold_fraction = 0.5;
  std::vector<std::size_t> S_list{100};
  std::vector<std::size_t> N_list{50, 100, 500};
  std::vector<SelectionScheme> schemes;
  std::vector<EstimatorKind> estimators{EstimatorKind::map, EstimatorKind::mmae, EstimatorKind::mmse,
                                        EstimatorKind::sampled};
  std::vector<LossKind> losses{LossKind::l01, LossKind::l1, LossKind::l2};
  std::string output_dir = "results";
  std::size_t threads = 0;  // 0: hardware concurrency

  SVParams sv{};
  std::vector<NLParams> nl_thetas{{1.0, 1.0}, {10.0, 10.0}};
  bool dump_states = false;  // nl_loss: per-step inferred states
  bool dump_edges = true;    // degeneracy: full ancestor edge list
  PgSettings pg{};

  bool is_pg() const noexcept {
    return experiment == ExperimentKind::pg_synthetic || experiment == ExperimentKind::pg_prices;
  }
};

namespace detail {

/// Object reader that records which keys were consumed.
class Fields {
 public:
  Fields(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string sub(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

  const Json* get(std::string_view key) {
    seen_.insert(std::string(key));
    const auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }

  /// Fails on any key that was never asked for.
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(sub(key), "unknown key '" + key + "'");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::size_t as_count(const Json& v, const std::string& path, std::size_t min_value) {
  if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
  if (v.is_number_unsigned() ? false : v.get<std::int64_t>() < 0) throw ConfigError(path, "must be >= 0");
  const auto x = v.get<std::uint64_t>();
  if (x < min_value) throw ConfigError(path, "must be >= " + std::to_string(min_value));
  return static_cast<std::size_t>(x);
}

inline double as_real(const Json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

inline double as_positive(const Json& v, const std::string& path) {
  const double x = as_real(v, path);
  if (!(x > 0.0)) throw ConfigError(path, "must be > 0");
  return x;
}

inline std::string as_string(const Json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

inline const Json& as_nonempty_array(const Json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array");
  if (v.empty()) throw ConfigError(path, "must not be empty");
  return v;
}

template <class F>
auto parse_list(const Json& v, const std::string& path, F&& item) {
  using T = decltype(item(v, path));
  std::vector<T> out;
  const Json& arr = as_nonempty_array(v, path);
  for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(item(arr[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

template <class F>
auto parse_name(const Json& v, const std::string& path, F&& parse) {
  const std::string s = as_string(v, path);
  try {
    return parse(s);
  } catch (const InvalidArgument& e) {
    throw ConfigError(path, e.what());
  }
}

inline IGPrior parse_prior(const Json& v, const std::string& path) {
  Fields f(v, path);
  IGPrior p;
  if (const Json* x = f.get("shape")) p.shape = as_positive(*x, f.sub("shape"));
  if (const Json* x = f.get("rate")) p.rate = as_positive(*x, f.sub("rate"));
  f.finish();
  return p;
}

inline ExperimentKind parse_kind(const Json& v, const std::string& path) {
  const std::string s = as_string(v, path);
  for (auto k : {ExperimentKind::sv_loss, ExperimentKind::nl_loss, ExperimentKind::degeneracy,
                 ExperimentKind::pg_synthetic, ExperimentKind::pg_prices}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError(path, "unknown experiment '" + s + "'");
}

}  // namespace detail

/// Builds a configuration from an already parsed JSON document.
/// base_dir resolves a relative price_csv path.
inline ExperimentConfig parse_config(const Json& root, const std::string& base_dir = "") {
  using namespace detail;
  Fields f(root, "");
  ExperimentConfig c;

  const Json* kind = f.get("experiment");
  if (!kind) throw ConfigError("experiment", "missing required field");
  c.experiment = parse_kind(*kind, "experiment");
  const bool pg = c.is_pg();

  if (c.experiment == ExperimentKind::degeneracy) c.N_list = {100};
  if (c.experiment == ExperimentKind::pg_synthetic) c.N_list = {100};
  if (pg) {
    c.schemes = {SelectionScheme::parse("kl_w")};
  } else {
    for (const char* s : {"kl_w", "kl_p", "tv_w", "tv_p", "stratified", "systematic", "ml"})
      c.schemes.push_back(SelectionScheme::parse(s));
  }

  if (const Json* v = f.get("seed")) c.seed = as_count(*v, "seed", 0);
  if (const Json* v = f.get("replicates")) c.replicates = as_count(*v, "replicates", 1);
  if (const Json* v = f.get("ess_threshold_fraction")) {
    c.ess_threshold_fraction = as_real(*v, "ess_threshold_fraction");
    if (!(c.ess_threshold_fraction > 0.0 && c.ess_threshold_fraction <= 1.0))
      throw ConfigError("ess_threshold_fraction", "must lie in (0, 1]");
  }
  if (const Json* v = f.get("S_list"))
    c.S_list = parse_list(*v, "S_list", [](const Json& x, const std::string& p) { return as_count(x, p, 1); });
  if (const Json* v = f.get("N_list")) {
    if (c.experiment == ExperimentKind::pg_prices) throw ConfigError("N_list", "not used by pg_prices (N comes from the data)");
    c.N_list = parse_list(*v, "N_list", [](const Json& x, const std::string& p) { return as_count(x, p, 1); });
  }
  if (const Json* v = f.get("schemes"))
    c.schemes = parse_list(*v, "schemes", [](const Json& x, const std::string& p) {
      return parse_name(x, p, [](const std::string& s) { return SelectionScheme::parse(s); });
    });
  if (const Json* v = f.get("estimators")) {
    if (pg || c.experiment == ExperimentKind::degeneracy) throw ConfigError("estimators", "not used by this experiment");
    c.estimators = parse_list(*v, "estimators", [](const Json& x, const std::string& p) {
      return parse_name(x, p, [](const std::string& s) { return parse_estimator(s); });
    });
  }
  if (const Json* v = f.get("losses")) {
    if (pg || c.experiment == ExperimentKind::degeneracy) throw ConfigError("losses", "not used by this experiment");
    c.losses = parse_list(*v, "losses", [](const Json& x, const std::string& p) {
      return parse_name(x, p, [](const std::string& s) { return parse_loss(s); });
    });
  }
  if (const Json* v = f.get("output_dir")) c.output_dir = as_string(*v, "output_dir");
  if (const Json* v = f.get("threads")) c.threads = as_count(*v, "threads", 0);

  if (const Json* v = f.get("model")) {
    if (c.experiment == ExperimentKind::pg_prices) throw ConfigError("model", "not used by pg_prices");
    Fields m(*v, "model");
    if (c.experiment == ExperimentKind::nl_loss) {
      if (const Json* t = m.get("thetas")) {
        c.nl_thetas = parse_list(*t, "model.thetas", [](const Json& x, const std::string& p) {
          Fields th(x, p);
          NLParams q;
          if (const Json* a = th.get("sigma2_x")) q.sigma2_x = as_positive(*a, th.sub("sigma2_x"));
          if (const Json* b = th.get("sigma2_y")) q.sigma2_y = as_positive(*b, th.sub("sigma2_y"));
          th.finish();
          return q;
        });
      }
    } else {
      if (const Json* x = m.get("sigma")) c.sv.sigma = as_positive(*x, "model.sigma");
      if (const Json* x = m.get("beta")) c.sv.beta = as_positive(*x, "model.beta");
      if (const Json* x = m.get("phi")) {
        c.sv.phi = as_real(*x, "model.phi");
        if (!(std::abs(c.sv.phi) < 1.0)) throw ConfigError("model.phi", "|phi| must be < 1");
      }
    }
    m.finish();
  }

  if (const Json* v = f.get("dump_states")) {
    if (c.experiment != ExperimentKind::nl_loss) throw ConfigError("dump_states", "only used by nl_loss");
    if (!v->is_boolean()) throw ConfigError("dump_states", "expected a boolean");
    c.dump_states = v->get<bool>();
  }
  if (const Json* v = f.get("dump_edges")) {
    if (c.experiment != ExperimentKind::degeneracy) throw ConfigError("dump_edges", "only used by degeneracy");
    if (!v->is_boolean()) throw ConfigError("dump_edges", "expected a boolean");
    c.dump_edges = v->get<bool>();
  }

  if (const Json* v = f.get("pg")) {
    if (!pg) throw ConfigError("pg", "only used by pg_synthetic and pg_prices");
    Fields p(*v, "pg");
    if (const Json* x = p.get("iterations")) c.pg.iterations = as_count(*x, "pg.iterations", 2);
    if (const Json* x = p.get("burn_in")) c.pg.burn_in = as_count(*x, "pg.burn_in", 0);
    if (const Json* x = p.get("estimate_window")) c.pg.estimate_window = as_count(*x, "pg.estimate_window", 1);
    if (const Json* x = p.get("max_lag")) c.pg.max_lag = as_count(*x, "pg.max_lag", 0);
    if (const Json* x = p.get("trajectory_thin")) c.pg.trajectory_thin = as_count(*x, "pg.trajectory_thin", 0);
    if (const Json* x = p.get("sigma2_prior")) c.pg.priors.sigma2 = parse_prior(*x, "pg.sigma2_prior");
    if (const Json* x = p.get("beta2_prior")) c.pg.priors.beta2 = parse_prior(*x, "pg.beta2_prior");
    if (const Json* x = p.get("price_csv")) {
      if (c.experiment != ExperimentKind::pg_prices) throw ConfigError("pg.price_csv", "only used by pg_prices");
      c.pg.price_csv = as_string(*x, "pg.price_csv");
      if (!base_dir.empty() && !c.pg.price_csv.empty() && c.pg.price_csv.front() != '/')
        c.pg.price_csv = base_dir + "/" + c.pg.price_csv;
    }
    p.finish();
  }
  f.finish();

  // Cross-field checks.
  if (c.experiment == ExperimentKind::degeneracy && c.N_list.size() != 1)
    throw ConfigError("N_list", "degeneracy takes a single N per invocation");
  if (c.experiment == ExperimentKind::pg_prices && c.pg.price_csv.empty())
    throw ConfigError("pg.price_csv", "missing required field for pg_prices");
  if (pg && !(c.pg.iterations > c.pg.burn_in)) throw ConfigError("pg.burn_in", "must be smaller than pg.iterations");
  if (pg) {
    for (std::size_t i = 0; i < c.N_list.size(); ++i) {
      if (c.N_list[i] < 2) throw ConfigError("N_list[" + std::to_string(i) + "]", "particle Gibbs needs N >= 2");
    }
  }
  return c;
}

inline ExperimentConfig parse_config_text(std::string_view text, const std::string& base_dir = "") {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(root, base_dir);
}

/// Reads and validates a config file. A relative price_csv resolves against
/// the config file's directory.
inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const auto slash = path.find_last_of('/');
  return parse_config_text(buf.str(), slash == std::string::npos ? "" : path.substr(0, slash));
}

/// Normalised echo of a configuration, used in the run manifest.
inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["experiment"] = std::string(to_string(c.experiment));
  j["seed"] = c.seed;
  j["replicates"] = c.replicates;
  j["ess_threshold_fraction"] = c.ess_threshold_fraction;
  j["S_list"] = c.S_list;
  if (c.experiment != ExperimentKind::pg_prices) j["N_list"] = c.N_list;
  Json schemes = Json::array();
  for (const auto& s : c.schemes) schemes.push_back(s.name());
  j["schemes"] = schemes;
  if (!c.is_pg() && c.experiment != ExperimentKind::degeneracy) {
    Json e = Json::array(), l = Json::array();
    for (auto k : c.estimators) e.push_back(std::string(to_string(k)));
    for (auto k : c.losses) l.push_back(std::string(to_string(k)));
    j["estimators"] = e;
    j["losses"] = l;
  }
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  if (c.experiment == ExperimentKind::nl_loss) {
    Json thetas = Json::array();
    for (const auto& t : c.nl_thetas) thetas.push_back({{"sigma2_x", t.sigma2_x}, {"sigma2_y", t.sigma2_y}});
    j["model"] = {{"thetas", thetas}};
    j["dump_states"] = c.dump_states;
  } else if (c.experiment != ExperimentKind::pg_prices) {
    j["model"] = {{"sigma", c.sv.sigma}, {"beta", c.sv.beta}, {"phi", c.sv.phi}};
  }
  if (c.experiment == ExperimentKind::degeneracy) j["dump_edges"] = c.dump_edges;
  if (c.is_pg()) {
    Json p;
    p["iterations"] = c.pg.iterations;
    p["burn_in"] = c.pg.burn_in;
    p["estimate_window"] = c.pg.estimate_window;
    p["max_lag"] = c.pg.max_lag;
    p["trajectory_thin"] = c.pg.trajectory_thin;
    p["sigma2_prior"] = {{"shape", c.pg.priors.sigma2.shape}, {"rate", c.pg.priors.sigma2.rate}};
    p["beta2_prior"] = {{"shape", c.pg.priors.beta2.shape}, {"rate", c.pg.priors.beta2.rate}};
    if (c.experiment == ExperimentKind::pg_prices) p["price_csv"] = c.pg.price_csv;
    j["pg"] = p;
  }
  return j;
}

}  // namespace detsmc::experiment

#endif  // DETSMC_EXPERIMENT_CONFIG_HPP
