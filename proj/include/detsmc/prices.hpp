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

#ifndef DETSMC_PRICES_HPP
#define DETSMC_PRICES_HPP

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detsmc/error.hpp"

namespace detsmc {

struct PriceSeries {
  std::vector<std::string> dates;
  std::vector<double> close;
  std::vector<std::size_t> lines;  // source line of each row, one-based
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\"");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

/// Reads a two-column "date,close" CSV with a header row. Blank lines are
/// skipped; anything else that does not parse aborts with its line number.
inline PriceSeries read_price_csv(std::istream& in) {
  PriceSeries out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IngestionError(lineno, "expected two comma-separated columns");
    const std::string_view date = detail::trim(std::string_view(line).substr(0, comma));
    const std::string_view price = detail::trim(std::string_view(line).substr(comma + 1));
    if (price.find(',') != std::string_view::npos) throw IngestionError(lineno, "expected two columns");
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(price.data(), price.data() + price.size(), value);
    if (ec != std::errc{} || ptr != price.data() + price.size() || price.empty() || !std::isfinite(value)) {
      throw IngestionError(lineno, "unparsable price '" + std::string(price) + "'");
    }
    out.dates.emplace_back(date);
    out.close.push_back(value);
    out.lines.push_back(lineno);
  }
  if (!header_seen) throw IngestionError(lineno, "missing header row");
  return out;
}

inline PriceSeries read_price_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open price file '" + path + "'");
  return read_price_csv(in);
}

/// y_n = log(r_n / r_{n-1}). lines, when given, are reported for bad prices
/// (otherwise the one-based row index is).
inline std::vector<double> log_returns(std::span<const double> prices, std::span<const std::size_t> lines = {}) {
  if (prices.size() < 2) throw InvalidArgument("log_returns: need at least two prices");
  for (std::size_t i = 0; i < prices.size(); ++i) {
    if (!(prices[i] > 0.0)) {
      const std::size_t where = i < lines.size() ? lines[i] : i + 1;
      throw IngestionError(where, "non-positive price " + std::to_string(prices[i]));
    }
  }
  std::vector<double> out(prices.size() - 1);
  for (std::size_t i = 1; i < prices.size(); ++i) out[i - 1] = std::log(prices[i] / prices[i - 1]);
  return out;
}

}  // namespace detsmc

#endif  // DETSMC_PRICES_HPP
