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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "imgrank/features.hpp"
#include "imgrank/labelgen.hpp"
#include "imgrank/synthlog.hpp"
#include "imgrank/types.hpp"

namespace imgrank::data {

/// Dense row-major feature matrix with per-row labels and group keys. Rows
/// of one group are contiguous.
struct Dataset {
  std::vector<std::string> feature_names;
  std::string schema_id;
  std::vector<double> x;
  std::vector<double> labels;
  std::vector<int> ordinals;
  std::vector<GroupKey> groups;
  std::vector<PinId> pins;

  std::size_t size() const { return labels.size(); }
  std::size_t num_features() const { return feature_names.size(); }
  bool empty() const { return labels.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * num_features(), num_features()};
  }

  void add(std::span<const double> values, double label, int ordinal, GroupKey group,
           PinId pin);

  /// Copy restricted to `columns` (positions in this dataset's feature order).
  Dataset select_columns(std::span<const std::size_t> columns) const;
  Dataset select_features(std::span<const std::string> names) const;

  /// Half-open row ranges [begin, end) of each group, in row order.
  std::vector<std::pair<std::size_t, std::size_t>> group_ranges() const;
};

/// Row-index form of a preference pair: label(preferred) > label(other).
struct IndexPair {
  std::size_t preferred;
  std::size_t other;

  bool operator==(const IndexPair&) const = default;
};

/// Preference pairs within each group, subsampled to `max_pairs` per group
/// (0 keeps all).
std::vector<IndexPair> build_pairs(const Dataset& data, std::size_t max_pairs,
                                   std::uint64_t seed);

/// Featurizes labeled instances with the full schema. Relevance instances
/// (neutral segment) use UserSegment::neutral.
Dataset build_dataset(std::span<const labelgen::LabeledInstance> instances,
                      const synthlog::Corpus& corpus, const featurize::Featurizer& featurizer);

/// Fraction of pairs the scores order correctly (ties count as wrong).
double pair_accuracy(std::span<const double> scores, std::span<const IndexPair> pairs);

}  // namespace imgrank::data
