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

#ifndef DETSMC_DIAGNOSTICS_HPP
#define DETSMC_DIAGNOSTICS_HPP

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "detsmc/error.hpp"

namespace detsmc {

/// Sample autocorrelation rho(0..max_lag) of an MCMC chain:
///   rho(k) = sum_t (c_t - m)(c_{t+k} - m) / sum_t (c_t - m)^2
inline std::vector<double> acf(std::span<const double> chain, std::size_t max_lag) {
  const std::size_t M = chain.size();
  if (M <= max_lag) throw InvalidArgument("acf: chain must be longer than max_lag");
  const double mean = std::accumulate(chain.begin(), chain.end(), 0.0) / static_cast<double>(M);
  std::vector<double> centred(M);
  for (std::size_t t = 0; t < M; ++t) centred[t] = chain[t] - mean;
  double denom = 0.0;
  for (double c : centred) denom += c * c;
  if (!(denom > 0.0)) throw InvalidArgument("acf: constant chain");
  std::vector<double> rho(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    double num = 0.0;
    for (std::size_t t = 0; t + k < M; ++t) num += centred[t] * centred[t + k];
    rho[k] = num / denom;
  }
  rho[0] = 1.0;
  return rho;
}

/// Median; the mean of the middle pair for even lengths.
inline double median(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("median: empty input");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Median of the trailing `window` samples.
inline double chain_median(std::span<const double> chain, std::size_t window) {
  if (window == 0 || window > chain.size()) throw InvalidArgument("chain_median: window must lie in [1, M]");
  return median(chain.subspan(chain.size() - window));
}

}  // namespace detsmc

#endif  // DETSMC_DIAGNOSTICS_HPP
