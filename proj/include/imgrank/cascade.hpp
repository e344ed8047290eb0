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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imgrank/features.hpp"
#include "imgrank/models.hpp"
#include "imgrank/ranked_list.hpp"
#include "imgrank/synthlog.hpp"

namespace imgrank::cascade {

/// Reserved model reference for a rerank stage that carries the previous
/// stage's score through.
inline constexpr std::string_view kIdentityModel = "identity";
inline constexpr std::string_view kRerankStage = "rerank";

/// Scores survivors in previous-stage order, a chunk at a time, and stops
/// once `target` scored candidates reach `score_threshold`. Unscored
/// candidates are dropped.
struct EarlyExit {
  std::size_t chunk_size = 50;
  double score_threshold = 0.0;
  std::size_t target = 100;
};

struct StageConfig {
  std::string name;
  std::string model;
  std::string subset;
  std::size_t keep_top = 0;
  double latency_budget_ms = 0.0;
  std::optional<EarlyExit> early_exit;
};

struct RerankPolicy {
  double freshness_weight = 0.0;
  double localness_weight = 0.0;
  double diversity_penalty = 0.0;
  std::optional<double> min_fresh_ratio;

  bool is_identity() const {
    return freshness_weight == 0.0 && localness_weight == 0.0 && diversity_penalty == 0.0 &&
           !min_fresh_ratio;
  }
};

struct CascadeConfig {
  std::vector<StageConfig> stages;
  RerankPolicy rerank_policy;
  /// Optional navboost table path used by the CLI.
  std::string navboost;

  /// Throws ConfigError naming the first violation.
  void validate(const featurize::FeatureSchema& schema) const;
  /// All violations, empty when valid.
  std::vector<std::string> violations(const featurize::FeatureSchema& schema) const;
};

Json to_json(const CascadeConfig& c);
CascadeConfig cascade_config_from_json(const Json& j);
CascadeConfig load_cascade_config(const std::filesystem::path& path);

/// Desk-scale funnel: lightweight 1000, full 100, rerank 25.
CascadeConfig default_cascade(std::string light_model, std::string full_model,
                              std::string rerank_model = std::string(kIdentityModel));

using ModelMap = std::map<std::string, std::shared_ptr<const models::Scorer>>;

/// Loads every non-identity model reference, resolved against `base_dir`.
ModelMap load_models(const CascadeConfig& config, const std::filesystem::path& base_dir);

struct RerankItem {
  const synthlog::Pin* pin = nullptr;
  RankedEntry entry;
  /// Rerank-subset features with the diversity slot zeroed.
  std::vector<double> features;
};

/// Greedy re-ranking: base score (z-normalized within the list when any
/// policy weight is set) plus freshness and locale bonuses minus the
/// diversity penalty, with optional fresh-pin promotion. Entries come back
/// in placement order with the final score appended to stage_scores.
std::vector<RankedEntry> rerank(std::vector<RerankItem> items, const RerankPolicy& policy,
                                const models::Scorer* model, int diversity_column,
                                const synthlog::UserSegment& segment, std::size_t keep_top);

class Cascade {
 public:
  Cascade(CascadeConfig config, const featurize::Featurizer& featurizer, ModelMap models);

  const CascadeConfig& config() const { return config_; }

  RankedList run(const synthlog::Query& query, const synthlog::UserSegment& segment,
                 std::span<const synthlog::Pin* const> candidates) const;

 private:
  struct Stage {
    const models::Scorer* model = nullptr;
    std::vector<std::size_t> columns;
    int diversity_column = -1;
  };

  CascadeConfig config_;
  const featurize::Featurizer* featurizer_;
  ModelMap models_;
  std::vector<Stage> stages_;
};

/// Latency buckets: < 50 ms, 50-200 ms, > 200 ms.
struct LatencyHistogram {
  std::array<double, 3> fractions{};
  std::vector<double> per_query_ms;
  std::vector<double> mean_stage_ms;
  double median_ms = 0.0;
  double total_ms = 0.0;

  static LatencyHistogram from_samples(std::vector<double> per_query_ms,
                                       std::vector<double> mean_stage_ms = {});
  Json to_json() const;
};

struct WorkItem {
  const synthlog::Query* query = nullptr;
  const synthlog::UserSegment* segment = nullptr;
  std::vector<const synthlog::Pin*> candidates;
};

/// Wall-clock end-to-end time per query: `warmup` runs discarded, median of
/// `reps` reported. Queries run one at a time.
LatencyHistogram measure_latency(const Cascade& cascade, std::span<const WorkItem> workload,
                                 std::size_t reps = 5, std::size_t warmup = 3);

/// Deterministic cost model: fixed overhead plus a per-candidate cost for
/// each stage times the candidates that stage scored.
struct CostModel {
  double overhead_ms = 10.0;
  std::vector<double> per_candidate_ms = {0.0003, 0.2, 0.05};
};

LatencyHistogram simulated_latency(std::span<const RankedList> lists, const CostModel& cost);

}  // namespace imgrank::cascade
