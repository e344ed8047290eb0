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

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "imgrank/cascade.hpp"

namespace imgrank::cascade {
namespace {

using featurize::FeatureSchema;

struct World {
  synthlog::Corpus corpus = synthlog::generate_corpus(testing::small_corpus(11));
  featurize::NavboostTable nav;
  FeatureSchema schema = FeatureSchema::standard();
  featurize::Featurizer featurizer{corpus.pins, nav, schema};

  std::shared_ptr<const models::Scorer> model_for(std::string_view subset,
                                                  std::map<std::string, double> weights) const {
    const auto& names = schema.subset(subset);
    return std::make_shared<models::RankModel>(
        models::rule_model(names, models::make_rule(names, weights, 0.0, 0.0)));
  }

  ModelMap models() const {
    return {{"light", model_for(featurize::kLightweightSubset, {{"bm25", 1.0}, {"social_score", 0.5}})},
            {"full", model_for(featurize::kFullSubset, {{"embedding_sim", 1.0}, {"bm25", 0.3}})}};
  }

  std::vector<const synthlog::Pin*> pool(std::size_t q) const {
    std::vector<const synthlog::Pin*> out;
    for (auto i : corpus.pools[q]) out.push_back(&corpus.pins[i]);
    return out;
  }
};

CascadeConfig funnel() {
  CascadeConfig c = default_cascade("light", "full");
  c.stages[0].keep_top = 60;
  c.stages[1].keep_top = 20;
  c.stages[2].keep_top = 10;
  return c;
}

/// Top `k` of `cands` under `model` evaluated on full feature vectors.
std::vector<const synthlog::Pin*> brute_top(const World& w, const synthlog::Query& q,
                                            const synthlog::UserSegment& seg,
                                            std::vector<const synthlog::Pin*> cands,
                                            const models::Scorer& model, std::string_view subset,
                                            std::size_t k) {
  const auto cols = w.schema.subset_columns(subset);
  std::vector<std::pair<RankedEntry, const synthlog::Pin*>> scored;
  for (const auto* p : cands) {
    const auto full = w.featurizer.featurize(q, seg, *p);
    std::vector<double> x;
    for (auto c : cols) x.push_back(full.values[c]);
    scored.push_back({{p->pin_id, model.score(x), {}}, p});
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return ranks_before(a.first, b.first); });
  scored.resize(std::min(k, scored.size()));
  std::vector<const synthlog::Pin*> out;
  for (auto& s : scored) out.push_back(s.second);
  return out;
}

TEST(Cascade, CountsAndSurvivorsMatchBruteForce) {
  World w;
  const auto models = w.models();
  const Cascade cascade(funnel(), w.featurizer, models);
  for (std::size_t q = 0; q < 4; ++q) {
    const auto& query = w.corpus.queries[q];
    const auto& seg = w.corpus.segments[q % w.corpus.segments.size()];
    const auto cands = w.pool(q);
    const auto list = cascade.run(query, seg, cands);
    EXPECT_EQ(list.counts, (std::vector<std::size_t>{cands.size(), 60, 20, 10}));
    EXPECT_EQ(list.scored, (std::vector<std::size_t>{cands.size(), 60, 20}));
    const auto s1 = brute_top(w, query, seg, cands, *models.at("light"), featurize::kLightweightSubset, 60);
    const auto s2 = brute_top(w, query, seg, s1, *models.at("full"), featurize::kFullSubset, 10);
    std::vector<PinId> expect;
    for (const auto* p : s2) expect.push_back(p->pin_id);
    EXPECT_EQ(list.pin_ids(), expect);
  }
}

TEST(Cascade, SmallPoolsAndSingleCandidate) {
  World w;
  const Cascade cascade(funnel(), w.featurizer, w.models());
  const auto cands = w.pool(0);
  const std::vector<const synthlog::Pin*> one = {cands[0]};
  const auto list = cascade.run(w.corpus.queries[0], w.corpus.segments[0], one);
  ASSERT_EQ(list.entries.size(), 1u);
  EXPECT_EQ(list.entries[0].pin_id, cands[0]->pin_id);
  const std::vector<const synthlog::Pin*> some(cands.begin(), cands.begin() + 15);
  const auto l2 = cascade.run(w.corpus.queries[0], w.corpus.segments[0], some);
  EXPECT_EQ(l2.counts, (std::vector<std::size_t>{15, 15, 15, 10}));
  EXPECT_THROW(cascade.run(w.corpus.queries[0], w.corpus.segments[0], {}), DataError);
}

TEST(Cascade, Deterministic) {
  World w;
  const Cascade cascade(funnel(), w.featurizer, w.models());
  const auto a = cascade.run(w.corpus.queries[2], w.corpus.segments[1], w.pool(2));
  const auto b = cascade.run(w.corpus.queries[2], w.corpus.segments[1], w.pool(2));
  EXPECT_TRUE(a.same_result(b));
  EXPECT_EQ(to_json(a, false), to_json(b, false));
}

TEST(Cascade, EarlyExitStopsAtChunkBoundary) {
  World w;
  auto cfg = funnel();
  cfg.stages[0].early_exit = EarlyExit{10, -1e9, 25};
  const Cascade cascade(cfg, w.featurizer, w.models());
  const auto list = cascade.run(w.corpus.queries[0], w.corpus.segments[0], w.pool(0));
  EXPECT_EQ(list.scored[0], 30u);
}

TEST(CascadeConfig, Violations) {
  const auto schema = FeatureSchema::standard();
  EXPECT_TRUE(funnel().violations(schema).empty());
  auto up = funnel();
  up.stages[1].keep_top = 80;
  const auto v = up.violations(schema);
  ASSERT_FALSE(v.empty());
  EXPECT_NE(v.front().find("full"), std::string::npos);
  EXPECT_THROW(up.validate(schema), ConfigError);

  auto bad_subset = funnel();
  bad_subset.stages[0].subset = "heavyweight";
  EXPECT_NE(bad_subset.violations(schema).front().find("heavyweight"), std::string::npos);

  auto ident = funnel();
  ident.stages[1].model = std::string(kIdentityModel);
  EXPECT_FALSE(ident.violations(schema).empty());

  EXPECT_EQ(cascade_config_from_json(to_json(funnel())).stages.size(), 3u);
  EXPECT_THROW(cascade_config_from_json(Json{{"stages", "nope"}}), ConfigError);
}

TEST(Cascade, SchemaGuard) {
  World w;
  auto models = w.models();
  models["light"] = w.model_for(featurize::kFullSubset, {{"bm25", 1.0}});
  EXPECT_THROW(Cascade(funnel(), w.featurizer, models), ConfigError);
  models.erase("light");
  EXPECT_THROW(Cascade(funnel(), w.featurizer, models), ConfigError);
}

synthlog::Pin make_pin(std::int64_t id, double age, std::string country = "US") {
  synthlog::Pin p;
  p.pin_id = PinId{id};
  p.age_days = age;
  p.linked_country = std::move(country);
  p.latent_vec = {1.0, static_cast<double>(id)};
  return p;
}

std::vector<RerankItem> items_for(const std::vector<synthlog::Pin>& pins,
                                  const std::vector<double>& scores) {
  std::vector<RerankItem> out;
  for (std::size_t i = 0; i < pins.size(); ++i) {
    out.push_back({&pins[i], {pins[i].pin_id, scores[i], {scores[i]}}, {}});
  }
  return out;
}

TEST(Rerank, IdentityIsNoOp) {
  const std::vector<synthlog::Pin> pins = {make_pin(4, 400), make_pin(2, 5), make_pin(9, 100)};
  synthlog::UserSegment seg;
  seg.country = "US";
  const auto out = rerank(items_for(pins, {3.0, 2.0, 1.0}), {}, nullptr, -1, seg, 10);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].pin_id, PinId{4});
  EXPECT_EQ(out[1].pin_id, PinId{2});
  EXPECT_EQ(out[2].pin_id, PinId{9});
  EXPECT_EQ(out[0].score, 3.0);
  EXPECT_EQ(out[2].score, 1.0);
}

TEST(Rerank, FreshnessWeightPromotesFreshPin) {
  const std::vector<synthlog::Pin> pins = {make_pin(1, 400), make_pin(2, 3)};
  synthlog::UserSegment seg;
  RerankPolicy p;
  p.freshness_weight = 5.0;
  const auto out = rerank(items_for(pins, {1.0, 0.9}), p, nullptr, -1, seg, 2);
  EXPECT_EQ(out[0].pin_id, PinId{2});
}

TEST(Rerank, LocalnessWeightPromotesLocalPin) {
  const std::vector<synthlog::Pin> pins = {make_pin(1, 400, "FR"), make_pin(2, 400, "US")};
  synthlog::UserSegment seg;
  seg.country = "US";
  RerankPolicy p;
  p.localness_weight = 5.0;
  EXPECT_EQ(rerank(items_for(pins, {1.0, 0.9}), p, nullptr, -1, seg, 2)[0].pin_id, PinId{2});
}

TEST(Rerank, MinFreshRatio) {
  std::vector<synthlog::Pin> pins;
  std::vector<double> scores;
  for (std::int64_t i = 0; i < 8; ++i) {
    pins.push_back(make_pin(i, i >= 6 ? 2.0 : 300.0));
    scores.push_back(10.0 - static_cast<double>(i));
  }
  synthlog::UserSegment seg;
  RerankPolicy p;
  p.min_fresh_ratio = 0.5;
  const auto out = rerank(items_for(pins, scores), p, nullptr, -1, seg, 4);
  ASSERT_EQ(out.size(), 4u);
  int fresh = 0;
  for (const auto& e : out) fresh += e.pin_id.value >= 6 ? 1 : 0;
  EXPECT_GE(fresh, 2);
}

TEST(Rerank, DiversityPenaltySeparatesDuplicates) {
  std::vector<synthlog::Pin> pins = {make_pin(1, 400), make_pin(2, 400), make_pin(3, 400)};
  pins[0].latent_vec = {1.0, 0.0};
  pins[1].latent_vec = {1.0, 0.0};
  pins[2].latent_vec = {0.0, 1.0};
  synthlog::UserSegment seg;
  RerankPolicy p;
  p.diversity_penalty = 10.0;
  const auto out = rerank(items_for(pins, {3.0, 2.9, 2.0}), p, nullptr, -1, seg, 3);
  EXPECT_EQ(out[1].pin_id, PinId{3});
}

TEST(Latency, HistogramFractions) {
  const auto h = LatencyHistogram::from_samples({10.0, 49.9, 50.0, 120.0, 200.0, 201.0, 500.0, 1.0});
  EXPECT_DOUBLE_EQ(h.fractions[0], 3.0 / 8.0);
  EXPECT_DOUBLE_EQ(h.fractions[1], 3.0 / 8.0);
  EXPECT_DOUBLE_EQ(h.fractions[2], 2.0 / 8.0);
  EXPECT_NEAR(h.fractions[0] + h.fractions[1] + h.fractions[2], 1.0, 1e-12);
}

TEST(Latency, SimulatedCostModel) {
  RankedList l;
  l.scored = {1000, 100, 25};
  const CostModel cost;
  const std::vector<RankedList> lists = {l};
  const auto h = simulated_latency(lists, cost);
  EXPECT_NEAR(h.per_query_ms[0], 10.0 + 0.3 + 20.0 + 1.25, 1e-9);
  EXPECT_EQ(h.fractions[0], 1.0);
}

TEST(Latency, MeasuredWorkload) {
  World w;
  const Cascade cascade(funnel(), w.featurizer, w.models());
  std::vector<WorkItem> work;
  for (std::size_t q = 0; q < 3; ++q) work.push_back({&w.corpus.queries[q], &w.corpus.segments[0], w.pool(q)});
  const auto h = measure_latency(cascade, work, 3, 1);
  EXPECT_EQ(h.per_query_ms.size(), 3u);
  EXPECT_NEAR(h.fractions[0] + h.fractions[1] + h.fractions[2], 1.0, 1e-12);
  EXPECT_EQ(h.mean_stage_ms.size(), 3u);
}

}  // namespace
}  // namespace imgrank::cascade
