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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "imgrank/synthlog.hpp"
#include "imgrank/types.hpp"

namespace imgrank::labelgen {

using ActionWeights = std::map<Action, double>;

enum class SplitUnit { kGroup, kQuery };

struct LabelConfig {
  /// Explicit weights; when empty they are derived from log action volumes.
  ActionWeights action_weights;
  double tau = 30.0;
  double lambda_pos = 0.05;
  std::size_t neg_cap = 20;
  /// Three ascending cuts; when unset they are frozen from the training split.
  std::optional<std::array<double, 3>> discretize_cuts;
  std::size_t max_pairs_per_group = 100;
  std::array<double, 3> split_fractions = {0.7, 0.2, 0.1};
  SplitUnit split_unit = SplitUnit::kGroup;
  std::uint64_t seed = 17;

  void validate() const;
};

Json to_json(const LabelConfig& c);
LabelConfig label_config_from_json(const Json& j);

enum class Source { kEngagement, kRelevance };

std::string_view source_name(Source s);
Source parse_source(std::string_view name);

struct LabeledInstance {
  QueryId query_id;
  SegmentId segment_id;
  PinId pin_id;
  double label = 0.0;
  int ordinal_label = 1;
  Source source = Source::kEngagement;

  GroupKey group() const { return {query_id, segment_id}; }
  bool operator==(const LabeledInstance&) const = default;
};

struct PreferencePair {
  QueryId query_id;
  SegmentId segment_id;
  PinId preferred_pin;
  PinId other_pin;

  bool operator==(const PreferencePair&) const = default;
};

/// Weights inversely proportional to action volume: the rarest positive
/// action gets 1.0; hide gets the negated weight.
ActionWeights default_weights(std::span<const synthlog::ActionType> volumes);

/// Total per-action counts over a log, as ActionType volumes (minimum 1).
std::vector<synthlog::ActionType> log_volumes(
    std::span<const synthlog::EngagementRecord> records);

/// Weighted action sum over records of one (query, segment, pin).
double aggregate_label(std::span<const synthlog::EngagementRecord> records,
                       const ActionWeights& weights);
double aggregate_label(const ActionCounts& counts, const ActionWeights& weights);

/// Position and freshness de-biasing multiplier. Age is clamped below at tau.
double normalization_multiplier(double age_days, std::int64_t position,
                                const LabelConfig& config);
double normalize_label(double raw, double age_days, std::int64_t position,
                       const LabelConfig& config);

/// One instance per (query, segment, pin): each impression's weighted sum is
/// de-biased with its own age and position and the results are added.
std::vector<LabeledInstance> engagement_instances(
    std::span<const synthlog::EngagementRecord> records,
    const ActionWeights& weights, const LabelConfig& config);

using Groups = std::map<GroupKey, std::vector<LabeledInstance>>;

Groups group_instances(std::span<const LabeledInstance> instances);
std::vector<LabeledInstance> flatten(const Groups& groups);

/// Drops groups without a positive label, then downsamples non-positive
/// instances to at most neg_cap per group.
Groups prune_groups(Groups groups, const LabelConfig& config);

/// Mean rating; throws DataError on empty ratings or values outside {0,1,2}.
LabeledInstance average_judgment(const synthlog::RelevanceJudgment& judgment);

int discretize(double label, const std::array<double, 3>& cuts);

/// Cuts at the quartiles of the positive labels, nudged to be strictly
/// ascending.
std::array<double, 3> quartile_cuts(std::span<const LabeledInstance> instances);

std::vector<PreferencePair> extract_pairs(std::span<const LabeledInstance> group,
                                          std::size_t max_pairs,
                                          std::uint64_t seed);

struct Split {
  std::vector<LabeledInstance> train;
  std::vector<LabeledInstance> test;
  std::vector<LabeledInstance> validation;
};

Split split_dataset(std::span<const LabeledInstance> instances,
                    const std::array<double, 3>& fractions, std::uint64_t seed,
                    SplitUnit unit = SplitUnit::kGroup);

void write_instances(std::span<const LabeledInstance> instances,
                     const std::filesystem::path& path);
std::vector<LabeledInstance> read_instances(const std::filesystem::path& path);

}  // namespace imgrank::labelgen
