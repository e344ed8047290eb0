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

#include "imgrank/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace imgrank::ensemble {

namespace {

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ConfigError("gamma must lie in [0, 1], got " + std::to_string(gamma));
  }
}

Json znorm_json(const ZNorm& z) { return Json{{"mean", z.mean}, {"scale", z.scale}}; }

ZNorm znorm_from(const Json& j) {
  return {j.at("mean").get<double>(), j.at("scale").get<double>()};
}

}  // namespace

ZNorm ZNorm::fit(std::span<const double> scores) {
  ZNorm z;
  if (scores.empty()) return z;
  const auto n = static_cast<double>(scores.size());
  for (double s : scores) z.mean += s;
  z.mean /= n;
  double var = 0.0;
  for (double s : scores) var += (s - z.mean) * (s - z.mean);
  const double sd = std::sqrt(var / n);
  z.scale = sd > 1e-12 ? sd : 1.0;
  return z;
}

double stack_score(double s_e, double s_r, double gamma) {
  check_gamma(gamma);
  return gamma * s_e + (1.0 - gamma) * s_r;
}

StackedModel::StackedModel(std::shared_ptr<const models::RankModel> engagement,
                           std::shared_ptr<const models::RankModel> relevance, double gamma,
                           std::optional<std::pair<ZNorm, ZNorm>> normalization)
    : engagement_(std::move(engagement)),
      relevance_(std::move(relevance)),
      gamma_(gamma),
      norm_(std::move(normalization)) {
  check_gamma(gamma_);
  if (!engagement_ || !relevance_) throw ConfigError("stacked model needs both sub-models");
  if (engagement_->schema_id() != relevance_->schema_id()) {
    throw ConfigError("stacked sub-models have different feature schemas");
  }
}

double StackedModel::score(std::span<const double> x) const {
  double se = engagement_->score(x);
  double sr = relevance_->score(x);
  if (norm_) {
    se = norm_->first.apply(se);
    sr = norm_->second.apply(sr);
  }
  return stack_score(se, sr, gamma_);
}

Json StackedModel::to_json() const {
  Json j{{"format", "imgrank-stacked"},
         {"version", 1},
         {"kind", "stacked"},
         {"gamma", gamma_},
         {"schema_id", schema_id()},
         {"engagement_model", engagement_->to_json()},
         {"relevance_model", relevance_->to_json()}};
  if (norm_) {
    j["normalization"] = {{"engagement", znorm_json(norm_->first)},
                          {"relevance", znorm_json(norm_->second)}};
  }
  return j;
}

StackedModel StackedModel::from_json(const Json& j) {
  try {
    std::optional<std::pair<ZNorm, ZNorm>> norm;
    if (j.contains("normalization")) {
      norm = std::make_pair(znorm_from(j.at("normalization").at("engagement")),
                            znorm_from(j.at("normalization").at("relevance")));
    }
    return StackedModel(
        std::make_shared<models::RankModel>(models::RankModel::from_json(j.at("engagement_model"))),
        std::make_shared<models::RankModel>(models::RankModel::from_json(j.at("relevance_model"))),
        j.at("gamma").get<double>(), norm);
  } catch (const Json::exception& e) {
    throw DataError(std::string("stacked model: ") + e.what());
  }
}

std::vector<std::size_t> interleave_schedule(double gamma, std::size_t trees) {
  check_gamma(gamma);
  std::vector<std::size_t> schedule;
  schedule.reserve(trees);
  std::size_t eng = 0;
  for (std::size_t t = 1; t <= trees; ++t) {
    const auto target = static_cast<std::size_t>(std::floor(gamma * static_cast<double>(t) + 0.5));
    if (eng < target) {
      schedule.push_back(0);
      ++eng;
    } else {
      schedule.push_back(1);
    }
  }
  return schedule;
}

models::RankModel train_stacked_gbrt(const data::Dataset& engagement,
                                     std::span<const data::IndexPair> engagement_pairs,
                                     const data::Dataset& relevance,
                                     std::span<const data::IndexPair> relevance_pairs,
                                     double gamma, const models::TrainParams& params,
                                     const StackTrainOptions& options,
                                     std::vector<std::vector<double>>* gradients) {
  check_gamma(gamma);
  if (params.trees == 0) throw ConfigError("stacked gbrt: number of trees must be at least 1");
  if (engagement.feature_names != relevance.feature_names) {
    throw ConfigError("stacked gbrt: sources have different feature lists");
  }
  const auto schedule = interleave_schedule(gamma, params.trees);
  const bool uses_eng = std::count(schedule.begin(), schedule.end(), 0) > 0;
  const bool uses_rel = std::count(schedule.begin(), schedule.end(), 1) > 0;
  if (uses_eng && (engagement.empty() || engagement_pairs.empty())) {
    throw DataError("stacked gbrt: engagement source has no pairs");
  }
  if (uses_rel && (relevance.empty() || (!options.pointwise_relevance && relevance_pairs.empty()))) {
    throw DataError("stacked gbrt: relevance source has no pairs");
  }
  const std::array<models::BoostSource, 2> sources = {
      models::BoostSource{&engagement, engagement_pairs, "engagement", gamma, false},
      models::BoostSource{&relevance, relevance_pairs, "relevance", 1.0 - gamma,
                          options.pointwise_relevance}};
  std::vector<double> curve;
  auto ensemble = models::boost_sources(sources, schedule, params, curve, gradients);
  models::TrainingMeta meta;
  meta.loss_curve = std::move(curve);
  meta.seed = params.seed;
  meta.hyperparameters = models::to_json(params);
  meta.hyperparameters["gamma"] = gamma;
  meta.hyperparameters["pointwise_relevance"] = options.pointwise_relevance;
  return models::RankModel(models::ModelKind::kGbrt, engagement.feature_names,
                           std::move(ensemble), std::move(meta));
}

std::map<std::string, std::size_t> trees_per_source(const models::RankModel& model) {
  std::map<std::string, std::size_t> out;
  const auto* e = std::get_if<models::BoostEnsemble>(&model.params());
  if (!e) return out;
  for (const auto& s : e->sources) ++out[s];
  return out;
}

GammaSelection select_gamma(std::span<const double> grid,
                            const std::function<std::pair<double, double>(double)>& evaluate,
                            double blend) {
  if (grid.empty()) throw ConfigError("gamma grid is empty");
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  GammaSelection sel{sorted.front(), {}};
  double best = -std::numeric_limits<double>::infinity();
  for (double g : sorted) {
    check_gamma(g);
    const auto [e, r] = evaluate(g);
    const double obj = blend * e + (1.0 - blend) * r;
    sel.table.push_back({g, e, r, obj});
    if (obj > best) {
      best = obj;
      sel.gamma = g;
    }
  }
  return sel;
}

std::shared_ptr<const models::Scorer> scorer_from_json(const Json& j) {
  if (j.value("kind", std::string{}) == "stacked") {
    return std::make_shared<StackedModel>(StackedModel::from_json(j));
  }
  return std::make_shared<models::RankModel>(models::RankModel::from_json(j));
}

std::shared_ptr<const models::Scorer> load_scorer(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read model " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return scorer_from_json(j);
}

void save_scorer(const models::Scorer& scorer, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << scorer.to_json().dump() << '\n';
}

}  // namespace imgrank::ensemble
