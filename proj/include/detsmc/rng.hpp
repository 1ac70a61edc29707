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

#ifndef DETSMC_RNG_HPP
#define DETSMC_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace detsmc {

/// Deterministic random stream identified by (seed, stream_id).
///
/// Two streams built from the same pair produce the same draws. The engine is
/// mt19937_64 seeded through std::seed_seq, both of which are fully specified
/// by the standard; uniforms are built from raw engine bits so they do not
/// depend on the standard library's distribution implementations.
class RngStream {
 public:
  using result_type = std::mt19937_64::result_type;

  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return std::normal_distribution<double>{}(*this); }
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Gamma(shape, scale = 1).
  double gamma(double shape) { return std::gamma_distribution<double>{shape, 1.0}(*this); }

  /// Inverse gamma with the shape/rate parameterisation: if G ~ Gamma(shape, 1)
  /// then rate / G ~ IG(shape, rate).
  double inverse_gamma(double shape, double rate) { return rate / gamma(shape); }

 private:
  static std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32)};
    return std::mt19937_64(seq);
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

}  // namespace detsmc

#endif  // DETSMC_RNG_HPP
