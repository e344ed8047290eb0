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
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "imgrank/dataset.hpp"
#include "imgrank/models.hpp"

namespace imgrank::ensemble {

/// Affine rescaling applied to a sub-model score before combining.
struct ZNorm {
  double mean = 0.0;
  double scale = 1.0;

  static ZNorm fit(std::span<const double> scores);
  double apply(double s) const { return (s - mean) / scale; }
  bool operator==(const ZNorm&) const = default;
};

/// gamma * s_e + (1 - gamma) * s_r.
class StackedModel final : public models::Scorer {
 public:
  StackedModel(std::shared_ptr<const models::RankModel> engagement,
               std::shared_ptr<const models::RankModel> relevance, double gamma,
               std::optional<std::pair<ZNorm, ZNorm>> normalization = std::nullopt);

  double gamma() const { return gamma_; }
  const models::RankModel& engagement() const { return *engagement_; }
  const models::RankModel& relevance() const { return *relevance_; }
  const std::optional<std::pair<ZNorm, ZNorm>>& normalization() const { return norm_; }

  double score(std::span<const double> x) const override;
  const std::vector<std::string>& features() const override { return engagement_->features(); }
  const std::string& schema_id() const override { return engagement_->schema_id(); }
  std::string kind_label() const override { return "stacked"; }
  Json to_json() const override;

  static StackedModel from_json(const Json& j);

 private:
  std::shared_ptr<const models::RankModel> engagement_;
  std::shared_ptr<const models::RankModel> relevance_;
  double gamma_;
  std::optional<std::pair<ZNorm, ZNorm>> norm_;
};

/// gamma * s_e + (1 - gamma) * s_r for precomputed scores.
double stack_score(double s_e, double s_r, double gamma);

/// Per-round source choice: round t (1-based) goes to engagement when the
/// engagement count so far is below floor(gamma * t + 1/2). Totals are
/// floor(gamma * T + 1/2) engagement trees.
std::vector<std::size_t> interleave_schedule(double gamma, std::size_t trees);

struct StackTrainOptions {
  /// Squared error on relevance labels in place of the relevance pair loss.
  bool pointwise_relevance = false;
};

/// Boosting on the combined objective gamma * L_e + (1 - gamma) * L_r with
/// trees interleaved by source. Both datasets must share features.
models::RankModel train_stacked_gbrt(const data::Dataset& engagement,
                                     std::span<const data::IndexPair> engagement_pairs,
                                     const data::Dataset& relevance,
                                     std::span<const data::IndexPair> relevance_pairs,
                                     double gamma, const models::TrainParams& params,
                                     const StackTrainOptions& options = {},
                                     std::vector<std::vector<double>>* gradients = nullptr);

/// Tree count per source tag.
std::map<std::string, std::size_t> trees_per_source(const models::RankModel& model);

struct GammaScore {
  double gamma;
  double ndcg_e;
  double ndcg_r;
  double objective;
};

struct GammaSelection {
  double gamma;
  std::vector<GammaScore> table;
};

inline const std::vector<double> kDefaultGammaGrid = {0.0, 0.25, 0.5, 0.75, 1.0};

/// Picks the grid value maximizing blend * NDCG^e + (1 - blend) * NDCG^r;
/// ties go to the smaller gamma.
GammaSelection select_gamma(std::span<const double> grid,
                            const std::function<std::pair<double, double>(double)>& evaluate,
                            double blend = 0.5);

/// Loads a single model or a stacked model file.
std::shared_ptr<const models::Scorer> load_scorer(const std::filesystem::path& path);
std::shared_ptr<const models::Scorer> scorer_from_json(const Json& j);
void save_scorer(const models::Scorer& scorer, const std::filesystem::path& path);

}  // namespace imgrank::ensemble
