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
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "imgrank/types.hpp"

namespace imgrank::synthlog {

struct Pin {
  PinId pin_id;
  std::vector<std::string> annotations;
  std::vector<double> category_dist;
  std::vector<double> topic_dist;
  std::vector<double> latent_vec;
  std::string linked_country;
  double age_days = 0.0;
  double social_score = 0.0;
  /// -1 strongly female-leaning, 0 neutral, +1 strongly male-leaning.
  double gender_lean = 0.0;
};

struct UserSegment {
  SegmentId segment_id;
  Gender gender = Gender::kUnknown;
  std::string country;
  std::vector<double> category_affinity;
  std::vector<double> latent_vec;

  /// Segment used for relevance judgments: unknown gender, no country,
  /// uniform affinity and a zero latent vector.
  static UserSegment neutral(std::size_t n_categories, std::size_t latent_dim);
};

struct Query {
  QueryId query_id;
  std::vector<std::string> tokens;
  std::vector<double> category_dist;
  std::vector<double> latent_vec;
  std::int64_t frequency = 1;
  double male_oriented_score = 0.0;
};

struct CorpusParams {
  std::uint64_t seed = 7;
  std::size_t n_pins = 1000;
  std::size_t n_queries = 50;
  std::size_t n_segments = 4;
  std::size_t n_categories = 8;
  std::size_t n_topics = 16;
  std::size_t latent_dim = 32;
  std::size_t words_per_topic = 40;
  std::size_t general_words = 60;
  /// Candidate pool size per query (capped at n_pins).
  std::size_t pool_size = 1000;
  double fresh_fraction = 0.3;
  std::vector<std::string> countries = {"US", "GB", "FR", "DE", "BR", "JP"};

  void validate() const;
};

/// Simulator-only state: what makes a pin truly useful for a query. Only the
/// evaluator and the simulators read this; featurization never sees it.
class PlantedTruth {
 public:
  PlantedTruth() = default;
  PlantedTruth(std::vector<double> hidden_quality,
               std::vector<std::size_t> query_topic)
      : hidden_quality_(std::move(hidden_quality)),
        query_topic_(std::move(query_topic)) {}

  /// Planted utility in [0, 1]. Pins and queries are addressed by their
  /// position in the corpus vectors.
  double utility(const Query& q, std::size_t query_index, const Pin& p,
                 std::size_t pin_index) const;

  const std::vector<double>& hidden_quality() const { return hidden_quality_; }
  const std::vector<std::size_t>& query_topic() const { return query_topic_; }

 private:
  std::vector<double> hidden_quality_;
  std::vector<std::size_t> query_topic_;
};

struct Corpus {
  CorpusParams params;
  std::vector<Pin> pins;
  std::vector<Query> queries;
  std::vector<UserSegment> segments;
  /// Candidate pool per query, as indices into `pins`.
  std::vector<std::vector<std::size_t>> pools;
  PlantedTruth truth;

  /// Index lookups; ids are dense (id == index) for generated corpora but
  /// loaded corpora are only required to have unique ids.
  std::size_t pin_index(PinId id) const;
  std::size_t query_index(QueryId id) const;
  std::size_t segment_index(SegmentId id) const;

  double utility(std::size_t query_index, std::size_t pin_index) const {
    return truth.utility(queries[query_index], query_index, pins[pin_index],
                         pin_index);
  }
};

Corpus generate_corpus(const CorpusParams& params);

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

struct EngagementRecord {
  QueryId query_id;
  SegmentId segment_id;
  PinId pin_id;
  ActionCounts action_counts{};
  std::int64_t position = 0;
  double age_days_at_impression = 0.0;

  GroupKey group() const { return {query_id, segment_id}; }
  bool operator==(const EngagementRecord&) const = default;
};

struct ActionType {
  Action name;
  std::int64_t volume;
};

/// Relative action frequencies closeup:repin:longclick:click:hide = 50:20:15:10:5.
std::vector<ActionType> default_action_volumes();

struct SimParams {
  std::size_t n_sessions = 10000;
  double position_bias = 1.0;
  std::size_t page_size = 20;
  std::uint64_t seed = 11;
  std::vector<ActionType> actions = default_action_volumes();
  /// Per-impression hide probability scale for useless pins.
  double hide_rate = 0.05;
};

/// 1 / (1 + position)^lambda.
double position_discount(std::int64_t position, double lambda);
/// Planted freshness effect on engagement: 0.5 + 0.5 exp(-age / 30).
double freshness_factor(double age_days);

std::vector<EngagementRecord> simulate_log(const Corpus& corpus,
                                           const SimParams& params);

void write_log(const std::vector<EngagementRecord>& records, std::ostream& out);
void write_log(const std::vector<EngagementRecord>& records,
               const std::filesystem::path& path);
std::vector<EngagementRecord> read_log(std::istream& in);
std::vector<EngagementRecord> read_log(const std::filesystem::path& path);

Json record_to_json(const EngagementRecord& r);
EngagementRecord record_from_json(const Json& j);

struct RelevanceJudgment {
  QueryId query_id;
  PinId pin_id;
  std::vector<int> ratings;

  bool operator==(const RelevanceJudgment&) const = default;
};

struct JudgmentParams {
  std::size_t pins_per_query = 100;
  std::size_t raters = 3;
  double rater_noise = 0.35;
  std::uint64_t seed = 13;
};

/// Simulated three-level human ratings derived from planted utility.
std::vector<RelevanceJudgment> simulate_judgments(const Corpus& corpus,
                                                  const JudgmentParams& params);

void write_judgments(const std::vector<RelevanceJudgment>& judgments,
                     const std::filesystem::path& path);
std::vector<RelevanceJudgment> read_judgments(const std::filesystem::path& path);

}  // namespace imgrank::synthlog
