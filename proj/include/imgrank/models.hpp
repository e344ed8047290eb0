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
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "imgrank/dataset.hpp"
#include "imgrank/features.hpp"
#include "imgrank/nn.hpp"
#include "imgrank/ranked_list.hpp"
#include "imgrank/tree.hpp"
#include "imgrank/types.hpp"

namespace imgrank::models {

enum class ModelKind { kGbdt, kGbrt, kRankSvm, kRankNet, kDnn, kCnn, kRule };

std::string_view kind_name(ModelKind k);
ModelKind parse_kind(std::string_view name);
/// Comma separated list of valid kind names, for error messages.
std::string valid_kind_names();

/// Anything that scores a feature vector in its own feature order.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(std::span<const double> x) const = 0;
  virtual const std::vector<std::string>& features() const = 0;
  virtual const std::string& schema_id() const = 0;
  virtual std::string kind_label() const = 0;
  virtual Json to_json() const = 0;
};

/// Hyperparameters of every trainer; each kind reads the fields it needs.
struct TrainParams {
  // Boosting.
  std::size_t trees = 100;
  double learning_rate = 0.1;
  int max_depth = 4;
  std::size_t min_leaf = 5;
  double margin = 1.0;
  // RankSVM.
  double c = 0.01;
  // Gradient training.
  std::size_t epochs = 30;
  /// Initial step; for RankSVM 0 selects 1/L from the curvature bound.
  double step = 0.05;
  std::size_t batch_size = 64;
  double step_decay = 0.5;
  std::size_t decay_every = 10;
  std::vector<std::size_t> hidden;
  // CNN.
  std::vector<std::size_t> conv_filters = {8, 16};
  std::size_t conv_width = 3;
  std::size_t pool = 2;
  std::size_t fc = 32;
  std::uint64_t seed = 0;
};

/// Defaults per kind: RankNet one tanh layer of 32, DNN two ReLU layers of
/// 64, RankSVM 300 full-batch epochs.
TrainParams default_params(ModelKind kind);
Json to_json(const TrainParams& p);
/// Fields absent from `j` keep the values in `base`.
TrainParams train_params_from_json(const Json& j, TrainParams base);

/// Per-column affine standardization learned from training rows.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const data::Dataset& data);
  void apply(std::span<const double> x, std::span<double> out) const;
  bool operator==(const Standardizer&) const = default;
};

struct LinearParams {
  std::vector<double> weights;
  double bias = 0.0;
  bool operator==(const LinearParams&) const = default;
};

struct NeuralParams {
  nn::Network network;
  Standardizer scaler;
  bool operator==(const NeuralParams&) const = default;
};

/// Fixed linear weights plus hard boosts for fresh and local pins.
struct RuleParams {
  std::vector<double> weights;
  double fresh_boost = 0.0;
  double local_boost = 0.0;
  /// Positions of the freshness and locale_match features, -1 if absent.
  int fresh_column = -1;
  int local_column = -1;
  bool operator==(const RuleParams&) const = default;
};

/// Builds rule parameters over `features` from named weights.
RuleParams make_rule(std::span<const std::string> features,
                     const std::map<std::string, double>& weights, double fresh_boost,
                     double local_boost);
/// A deliberately simple hand-set rule over the lightweight features.
RuleParams default_rule(std::span<const std::string> features);

double rule_based_score(std::span<const double> x, const RuleParams& rule);

struct TrainingMeta {
  std::vector<double> loss_curve;
  std::uint64_t seed = 0;
  Json hyperparameters = Json::object();
};

class RankModel final : public Scorer {
 public:
  using Params = std::variant<BoostEnsemble, LinearParams, NeuralParams, RuleParams>;

  RankModel() = default;
  RankModel(ModelKind kind, std::vector<std::string> features, Params params,
            TrainingMeta meta = {});

  ModelKind kind() const { return kind_; }
  const Params& params() const { return params_; }
  const TrainingMeta& meta() const { return meta_; }

  double score(std::span<const double> x) const override;
  const std::vector<std::string>& features() const override { return features_; }
  const std::string& schema_id() const override { return schema_id_; }
  std::string kind_label() const override { return std::string(kind_name(kind_)); }
  Json to_json() const override;

  /// Class distribution for dnn/cnn models.
  std::vector<double> class_probabilities(std::span<const double> x) const;

  static RankModel from_json(const Json& j);
  void save(const std::filesystem::path& path) const;
  static RankModel load(const std::filesystem::path& path);

 private:
  ModelKind kind_ = ModelKind::kRule;
  std::vector<std::string> features_;
  std::string schema_id_;
  Params params_;
  TrainingMeta meta_;
};

/// s = sum_k k * p_k over classes 1..4.
double classifier_score(std::span<const double> distribution);

/// Squared hinge max(0, 1 - d)^2 used by RankSVM.
double squared_hinge(double d);

/// Mean squared pair hinge max(0, margin - (s_i - s_j))^2 over pairs.
double pair_hinge_loss(std::span<const double> scores, std::span<const data::IndexPair> pairs,
                       double margin);
/// Negative gradient of the summed pair hinge with respect to each score.
std::vector<double> pair_hinge_negative_gradient(std::span<const double> scores,
                                                 std::span<const data::IndexPair> pairs,
                                                 double margin);

/// One data source of a boosted pairwise run.
struct BoostSource {
  const data::Dataset* data = nullptr;
  std::span<const data::IndexPair> pairs;
  std::string name;
  /// Weight of this source's mean loss in the combined objective.
  double weight = 1.0;
  /// Squared error on labels instead of the pair hinge.
  bool pointwise = false;
};

/// Gradient boosting where tree t is fit on source schedule[t]. Each tree's
/// step is halved until the combined loss does not increase. The loss curve
/// starts with the loss of the empty ensemble. When `gradients` is non-null
/// it receives each round's fitted targets.
BoostEnsemble boost_sources(std::span<const BoostSource> sources,
                            std::span<const std::size_t> schedule, const TrainParams& params,
                            std::vector<double>& loss_curve,
                            std::vector<std::vector<double>>* gradients = nullptr);

RankModel train_gbdt(const data::Dataset& data, const TrainParams& params);
RankModel train_gbrt(const data::Dataset& data, std::span<const data::IndexPair> pairs,
                     const TrainParams& params);
RankModel train_ranksvm(const data::Dataset& data, std::span<const data::IndexPair> pairs,
                        const TrainParams& params);
RankModel train_ranknet(const data::Dataset& data, std::span<const data::IndexPair> pairs,
                        const TrainParams& params);
RankModel train_dnn(const data::Dataset& data, const TrainParams& params);
RankModel train_cnn(const data::Dataset& data, const TrainParams& params);
RankModel rule_model(std::vector<std::string> features, RuleParams rule);

/// Network shapes used by the trainers, exposed for gradient checks.
nn::Network ranknet_network(std::size_t inputs, const TrainParams& params);
nn::Network dnn_network(std::size_t inputs, const TrainParams& params);
nn::Network cnn_network(std::size_t inputs, const TrainParams& params);

/// Scores of every dataset row.
std::vector<double> score_rows(const Scorer& model, const data::Dataset& data);

/// Checks the vector's schema against the model's.
double score(const Scorer& model, const featurize::FeatureVector& x);

struct Candidate {
  PinId pin_id;
  featurize::FeatureVector features;
};

RankedList rank(const Scorer& model, std::span<const Candidate> candidates);

}  // namespace imgrank::models
