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
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "imgrank/synthlog.hpp"
#include "imgrank/text_index.hpp"
#include "imgrank/types.hpp"

namespace imgrank::featurize {

enum class Feature : int {
  kBm25 = 0,
  kProximityBm25,
  kCategoryBoost,
  kTopicBoost,
  kEmbeddingSim,
  kNavboostCloseup,
  kNavboostClick,
  kNavboostLongclick,
  kNavboostRepin,
  kNavboostGenderEngaged,
  kNavboostPinEngaged,
  kTokenboost,
  kQueryCtr,
  kGenderMatch,
  kPersonalCategory,
  kPersonalEmbedding,
  kQueryLength,
  kQueryLogFrequency,
  kQueryMaleScore,
  kSocialScore,
  kFreshness,
  kLocaleMatch,
  kAnnotationsPresent,
  kDiversityPenalty,
  kCount
};

inline constexpr std::size_t kNumFeatures = static_cast<std::size_t>(Feature::kCount);

std::string_view feature_name(Feature f);
std::optional<Feature> parse_feature(std::string_view name);

inline constexpr std::string_view kLightweightSubset = "lightweight";
inline constexpr std::string_view kFullSubset = "full";
inline constexpr std::string_view kRerankSubset = "rerank";

/// Ordered feature names plus the named per-stage subsets.
class FeatureSchema {
 public:
  FeatureSchema(std::vector<std::string> names,
                std::map<std::string, std::vector<std::string>> subsets);

  /// All features in enum order; lightweight (8), full (all), rerank (6).
  static FeatureSchema standard();

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  const std::string& schema_id() const { return schema_id_; }
  const std::map<std::string, std::vector<std::string>>& subsets() const { return subsets_; }

  const std::vector<std::string>& subset(std::string_view name) const;
  /// Column positions of a subset within the full schema order.
  std::vector<std::size_t> subset_columns(std::string_view name) const;

  Json to_json() const;
  static FeatureSchema from_json(const Json& j);

 private:
  std::vector<std::string> names_;
  std::map<std::string, std::vector<std::string>> subsets_;
  std::string schema_id_;
};

/// Stable identifier over an ordered list of feature names.
std::string schema_id_for(std::span<const std::string> names);

struct FeatureVector {
  std::vector<double> values;
  std::string schema_id;
};

// ---------------------------------------------------------------------------
// Similarity features.

/// Cosine similarity; 0 when either vector is all zeros. Clamped to [-1, 1].
double cosine(std::span<const double> a, std::span<const double> b);
double categoryboost(std::span<const double> query_dist, std::span<const double> pin_dist);
double topicboost(std::span<const double> query_dist, std::span<const double> pin_dist);
double embedding_sim(std::span<const double> a, std::span<const double> b);

/// 1.0 for gender-neutral pins; lower when the pin leans away from the
/// segment's gender.
double gender_feature(const synthlog::Pin& pin, const synthlog::UserSegment& segment);

struct Personalization {
  double category = 0.0;
  double embedding = 0.0;
};
Personalization personalization_features(const synthlog::UserSegment& segment,
                                         const synthlog::Pin& pin);

double freshness_feature(double age_days);

// ---------------------------------------------------------------------------
// Navboost / Tokenboost engagement propensities.

struct EngagementStats {
  std::int64_t impressions = 0;
  /// Impressions with a non-zero count, per action.
  PerAction<std::int64_t> positives{};
  /// Impressions with any positive action.
  std::int64_t engaged = 0;

  bool operator==(const EngagementStats&) const = default;
};

struct SmoothingParams {
  double alpha = 1.0;
  double beta = 9.0;
};

/// (positives + alpha) / (impressions + alpha + beta).
double smoothed_propensity(double positives, double impressions,
                           const SmoothingParams& smoothing);

class NavboostTable {
 public:
  using PinStats = std::unordered_map<PinId, EngagementStats>;

  NavboostTable() = default;
  explicit NavboostTable(SmoothingParams smoothing) : smoothing_(smoothing) {}

  const SmoothingParams& smoothing() const { return smoothing_; }
  double prior() const;

  void add(const synthlog::EngagementRecord& record, Gender gender,
           std::span<const std::string> query_tokens);

  /// Per-pin statistics for a query over all segments; nullptr when unseen.
  const PinStats* query_pins(QueryId q) const;
  const PinStats* query_gender_pins(QueryId q, Gender g) const;
  const PinStats* token_pins(const std::string& token) const;
  const EngagementStats* pin(PinId p) const;
  const EngagementStats* query_total(QueryId q) const;

  double propensity(const EngagementStats* stats, Action action) const;
  double engaged_propensity(const EngagementStats* stats) const;

  std::size_t size() const;

  Json to_json() const;
  static NavboostTable from_json(const Json& j);

  bool operator==(const NavboostTable& other) const;

 private:
  static std::int64_t gender_key(QueryId q, Gender g);

  SmoothingParams smoothing_;
  std::unordered_map<QueryId, PinStats> by_query_;
  std::unordered_map<std::int64_t, PinStats> by_query_gender_;
  std::unordered_map<std::string, PinStats> by_token_;
  std::unordered_map<PinId, EngagementStats> by_pin_;
  std::unordered_map<QueryId, EngagementStats> by_query_total_;
};

/// Builds propensity tables from engagement records. When `allowed_groups`
/// is non-null only records of those (query, segment) groups are used,
/// which is how the training split is enforced.
NavboostTable build_navboost(std::span<const synthlog::EngagementRecord> records,
                             const std::vector<synthlog::Query>& queries,
                             const std::vector<synthlog::UserSegment>& segments,
                             const SmoothingParams& smoothing,
                             const std::set<GroupKey>* allowed_groups = nullptr);

// ---------------------------------------------------------------------------
// Featurization.

/// Per-(query, segment) state shared across all candidate pins.
struct QueryContext {
  const synthlog::Query* query = nullptr;
  const synthlog::UserSegment* segment = nullptr;
  std::vector<TokenId> token_ids;
  std::vector<double> token_idf;
  struct Bigram {
    TokenId a;
    TokenId b;
    double idf;
  };
  std::vector<Bigram> bigrams;
  std::vector<double> topic_dist;
  const NavboostTable::PinStats* nav_query = nullptr;
  const NavboostTable::PinStats* nav_query_gender = nullptr;
  std::vector<const NavboostTable::PinStats*> nav_tokens;
  double query_ctr = 0.0;
};

class Featurizer {
 public:
  Featurizer(std::span<const synthlog::Pin> pins, const NavboostTable& navboost,
             FeatureSchema schema = FeatureSchema::standard(),
             Bm25Params bm25 = {}, std::size_t proximity_window = 3);

  const FeatureSchema& schema() const { return schema_; }
  const TextIndex& text_index() const { return index_; }
  const NavboostTable& navboost() const { return *navboost_; }

  QueryContext prepare(const synthlog::Query& query,
                       const synthlog::UserSegment& segment) const;

  /// Writes the features at `columns` (positions in the schema) into `out`.
  void compute(const QueryContext& ctx, const synthlog::Pin& pin,
               std::span<const std::size_t> columns, std::span<double> out) const;

  /// Full schema-ordered vector.
  FeatureVector featurize(const synthlog::Query& query,
                          const synthlog::UserSegment& segment,
                          const synthlog::Pin& pin) const;
  FeatureVector featurize(const QueryContext& ctx, const synthlog::Pin& pin) const;

  double feature(const QueryContext& ctx, const synthlog::Pin& pin, Feature f) const;

 private:
  std::size_t doc_index(const synthlog::Pin& pin) const;

  std::span<const synthlog::Pin> pins_;
  const NavboostTable* navboost_;
  FeatureSchema schema_;
  std::vector<Feature> column_features_;
  Bm25Params bm25_;
  std::size_t window_;
  TextIndex index_;
  std::unordered_map<PinId, std::size_t> doc_of_;
};

/// Feature rows as JSON lines: {query_id, segment_id, pin_id, values}.
struct FeatureRow {
  QueryId query_id;
  SegmentId segment_id;
  PinId pin_id;
  std::vector<double> values;
};

void write_feature_rows(std::span<const FeatureRow> rows, const std::filesystem::path& path);
std::vector<FeatureRow> read_feature_rows(const std::filesystem::path& path);

}  // namespace imgrank::featurize
