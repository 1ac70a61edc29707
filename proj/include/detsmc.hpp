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

// Umbrella header for the library.

#ifndef DETSMC_DETSMC_HPP
#define DETSMC_DETSMC_HPP

#include "detsmc/diagnostics.hpp"
#include "detsmc/error.hpp"
#include "detsmc/estimators.hpp"
#include "detsmc/filter.hpp"
#include "detsmc/gibbs.hpp"
#include "detsmc/models.hpp"
#include "detsmc/oracle.hpp"
#include "detsmc/particles.hpp"
#include "detsmc/prices.hpp"
#include "detsmc/rng.hpp"
#include "detsmc/selection.hpp"

#endif  // DETSMC_DETSMC_HPP
