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
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "imgrank/cascade.hpp"
#include "imgrank/dataset.hpp"
#include "imgrank/features.hpp"
#include "imgrank/labelgen.hpp"
#include "imgrank/models.hpp"
#include "imgrank/synthlog.hpp"

namespace imgrank::experiment {

struct RuleConfig {
  std::map<std::string, double> weights = {{"bm25", 1.0}, {"categoryboost", 1.0},
                                           {"social_score", 0.5}};
  double fresh_boost = 0.2;
  double local_boost = 0.1;
};

struct StackingConfig {
  std::vector<double> gamma_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  double blend = 0.5;
  bool znorm = false;
};

struct EvalConfig {
  std::size_t k = 25;
  std::vector<std::size_t> ndcg_at = {5, 10, 20};
};

struct BenchConfig {
  bool enabled = true;
  std::size_t n_pins = 100000;
  std::size_t sessions = 2000;
  /// Queries timed on the wall clock.
  std::size_t wall_queries = 3;
  std::size_t reps = 5;
  std::size_t warmup = 3;
  /// Queries run through the deterministic cost model.
  std::size_t simulated_queries = 20;
  /// Full-stage early exit: threshold at this quantile of full-model scores.
  double early_exit_quantile = 0.995;
  std::size_t early_exit_target = 50;
  std::size_t chunk_size = 50;
  cascade::CostModel cost;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  synthlog::CorpusParams corpus;
  synthlog::SimParams sim;
  synthlog::JudgmentParams judgments;
  labelgen::LabelConfig labels;
  std::map<models::ModelKind, models::TrainParams> models;
  RuleConfig rule;
  StackingConfig stacking;
  /// Stage sizes of the cascade run over each query's candidate pool.
  cascade::CascadeConfig cascade;
  EvalConfig eval;
  BenchConfig bench;
};

/// A complete configuration with every section filled in.
Json default_experiment_json(std::uint64_t seed = 7);

/// Throws ConfigError on the first violation.
ExperimentConfig parse_experiment(const Json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Schema violations and unused keys, without doing any work.
struct Diagnostics {
  std::vector<std::string> errors;
  std::vector<std::string> unused_keys;
  bool ok() const { return errors.empty(); }
};
Diagnostics validate_experiment(const Json& j);

// ---------------------------------------------------------------------------
// Label artifacts.

struct LabelArtifacts {
  labelgen::ActionWeights weights;
  labelgen::Split engagement;
  labelgen::Split relevance;
  std::array<double, 3> engagement_cuts{};
  std::array<double, 3> relevance_cuts{};
  /// Built from every training group; featurizes validation and test rows.
  featurize::NavboostTable navboost;
  /// Cross-fitted tables for engagement training rows: fold f omits the
  /// records of the groups assigned to f.
  std::vector<featurize::NavboostTable> train_folds;
  std::map<GroupKey, std::size_t> fold_of;
  std::vector<synthlog::EngagementRecord> holdout;
};

inline constexpr std::size_t kNavboostFolds = 5;

LabelArtifacts make_labels(std::span<const synthlog::EngagementRecord> log,
                           std::span<const synthlog::RelevanceJudgment> judgments,
                           const synthlog::Corpus& corpus, const labelgen::LabelConfig& config);

/// Writes instances, feature rows, schema, navboost table and holdout log.
void write_labels(const std::filesystem::path& dir, const LabelArtifacts& labels,
                  const synthlog::Corpus& corpus, const labelgen::LabelConfig& config);

enum class SplitName { kTrain, kValidation, kTest };
std::string_view split_name(SplitName s);

data::Dataset load_dataset(const std::filesystem::path& dir, labelgen::Source source,
                           SplitName split);
std::vector<labelgen::LabeledInstance> load_instances(const std::filesystem::path& dir,
                                                      labelgen::Source source, SplitName split);

/// Trains any model kind; rule models use `rule` and ignore the data.
models::RankModel train_model(models::ModelKind kind, const data::Dataset& data,
                              std::size_t max_pairs, const models::TrainParams& params,
                              const RuleConfig& rule = {});

/// One ranked list per dataset group, rows ordered by model score.
std::vector<RankedList> rank_dataset(const models::Scorer& model, const data::Dataset& data);

// ---------------------------------------------------------------------------

/// gen -> simlog -> labels -> train -> stack -> rank -> eval -> bench.
/// Metric files are deterministic; wall-clock timings go to latency.json.
void run_reproduce(const ExperimentConfig& config, const std::filesystem::path& out,
                   std::ostream& log);

}  // namespace imgrank::experiment
