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

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "imgrank/labelgen.hpp"
#include "imgrank/ranked_list.hpp"
#include "imgrank/synthlog.hpp"

namespace imgrank::evalkit {

/// sum_{r=1..p} max(l_r, 0) / log_base(r + 1); p is truncated to the list.
double dcg(std::span<const double> labels, std::size_t p, double log_base = 2.0);

/// DCG over the DCG of `ideal_pool` sorted descending. nullopt when the
/// ideal DCG is zero.
std::optional<double> ndcg(std::span<const double> labels, std::size_t p,
                           std::span<const double> ideal_pool, double log_base = 2.0);
/// Ideal order taken from `labels` itself.
std::optional<double> ndcg(std::span<const double> labels, std::size_t p, double log_base = 2.0);

/// Per-pin labels of one evaluation group.
using LabelMap = std::unordered_map<PinId, double>;

struct NdcgSummary {
  std::size_t p = 0;
  double mean = 0.0;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;
  std::map<GroupKey, double> per_query;
};

/// NDCG@p of each list against the labels of its group. Lists whose group
/// has no labels or a zero ideal DCG are excluded and counted. With
/// `by_query` the segment is ignored when matching labels.
NdcgSummary ndcg_summary(std::span<const RankedList> lists,
                         const std::map<GroupKey, LabelMap>& labels, std::size_t p,
                         bool by_query = false);

std::map<GroupKey, LabelMap> label_maps(std::span<const labelgen::LabeledInstance> instances,
                                        bool by_query = false);

struct ReplayMetrics {
  double q_repin = 0.0;
  double q_click = 0.0;
  double q_closeup = 0.0;
  double q_longclick = 0.0;
  double q_engaged = 0.0;
  std::size_t groups = 0;
};

/// Held-out engagements on pins inside each list's top k, per search, then
/// averaged over groups. A search is a position-0 impression.
ReplayMetrics replay_metrics(std::span<const RankedList> lists,
                             std::span<const synthlog::EngagementRecord> holdout, std::size_t k);

struct FreshLocalRatios {
  double l_imp = 0.0;
  double f_imp = 0.0;
  double l_repin = 0.0;
  double f_repin = 0.0;
  double l_click = 0.0;
  double f_click = 0.0;
};

/// Local and fresh shares of impressed (top k) pins and of the held-out
/// repins and clicks on them.
FreshLocalRatios freshness_localness(std::span<const RankedList> lists,
                                     const synthlog::Corpus& corpus,
                                     std::span<const synthlog::EngagementRecord> holdout,
                                     std::size_t k);

struct EvalReport {
  std::string name;
  std::vector<GroupKey> queries;
  std::map<std::string, double> metrics;
  std::map<std::string, std::size_t> counts;
  std::map<std::string, std::map<GroupKey, double>> per_query;
  Json latency = nullptr;

  Json to_json() const;
  static EvalReport from_json(const Json& j);
  /// Aligned two-column table.
  std::string to_csv() const;
  void write(const std::filesystem::path& dir) const;
};

void add_ndcg(EvalReport& report, const std::string& prefix, const NdcgSummary& s);
void add_replay(EvalReport& report, const ReplayMetrics& m);
void add_ratios(EvalReport& report, const FreshLocalRatios& r);

/// Relative change (b - a) / a; nullopt ("undefined") when a == 0.
struct Delta {
  std::string metric;
  double a = 0.0;
  double b = 0.0;
  std::optional<double> relative;
};

/// Throws DataError when the reports cover different query sets.
std::vector<Delta> compare(const EvalReport& a, const EvalReport& b);
std::string deltas_to_csv(std::span<const Delta> deltas);
Json deltas_to_json(std::span<const Delta> deltas);

}  // namespace imgrank::evalkit
