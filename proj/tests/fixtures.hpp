// Copyright 2026 The imgrank Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "imgrank/dataset.hpp"
#include "imgrank/synthlog.hpp"

namespace imgrank::testing {

/// Random feature rows in [-1, 1] grouped into queries, labelled by `utility`.
inline data::Dataset planted_dataset(std::size_t groups, std::size_t per_group,
                                     std::size_t features,
                                     const std::function<double(std::span<const double>)>& utility,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  data::Dataset d;
  for (std::size_t f = 0; f < features; ++f) d.feature_names.push_back("f" + std::to_string(f));
  std::vector<double> x(features);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t i = 0; i < per_group; ++i) {
      for (auto& v : x) v = u(rng);
      const double y = utility(x);
      const int ordinal = y < -0.5 ? 1 : y < 0.0 ? 2 : y < 0.5 ? 3 : 4;
      d.add(x, y, ordinal, {QueryId{static_cast<std::int64_t>(g)}, SegmentId{0}},
            PinId{static_cast<std::int64_t>(g * per_group + i)});
    }
  }
  return d;
}

inline double linear_utility(std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (static_cast<double>(i % 3) + 1.0) * x[i] / 3.0;
  return s;
}

inline double xor_utility(std::span<const double> x) {
  return (x[0] > 0.0) != (x[1] > 0.0) ? 1.0 : 0.0;
}

/// A corpus small enough for unit tests.
inline synthlog::CorpusParams small_corpus(std::uint64_t seed = 7) {
  synthlog::CorpusParams p;
  p.seed = seed;
  p.n_pins = 300;
  p.n_queries = 12;
  p.n_segments = 3;
  p.pool_size = 120;
  return p;
}

/// Largest |a - b| / max(|a|, |b|, 1e-6).
inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

}  // namespace imgrank::testing
