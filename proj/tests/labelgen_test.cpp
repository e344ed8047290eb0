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

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "imgrank/labelgen.hpp"

namespace imgrank::labelgen {
namespace {

LabeledInstance inst(std::int64_t q, std::int64_t s, std::int64_t pin, double label) {
  LabeledInstance i;
  i.query_id = QueryId{q};
  i.segment_id = SegmentId{s};
  i.pin_id = PinId{pin};
  i.label = label;
  return i;
}

ActionCounts counts_of(std::initializer_list<std::pair<Action, std::int64_t>> c) {
  ActionCounts out{};
  for (auto [a, n] : c) out[static_cast<std::size_t>(a)] = n;
  return out;
}

TEST(DefaultWeights, InverseVolume) {
  const std::vector<synthlog::ActionType> v = {{Action::kClick, 10}, {Action::kRepin, 20}};
  const auto w = default_weights(v);
  EXPECT_DOUBLE_EQ(w.at(Action::kClick), 1.0);
  EXPECT_DOUBLE_EQ(w.at(Action::kRepin), 0.5);
}

TEST(DefaultWeights, SingleAction) {
  const std::vector<synthlog::ActionType> v = {{Action::kRepin, 5}};
  EXPECT_DOUBLE_EQ(default_weights(v).at(Action::kRepin), 1.0);
}

TEST(DefaultWeights, HideIsNegative) {
  const std::vector<synthlog::ActionType> v = {{Action::kClick, 10}, {Action::kHide, 10}};
  const auto w = default_weights(v);
  EXPECT_DOUBLE_EQ(w.at(Action::kClick), 1.0);
  EXPECT_DOUBLE_EQ(w.at(Action::kHide), -1.0);
}

TEST(AggregateLabel, HandArithmetic) {
  const ActionWeights w = {{Action::kClick, 2.0}, {Action::kRepin, 4.0}};
  EXPECT_DOUBLE_EQ(
      aggregate_label(counts_of({{Action::kClick, 3}, {Action::kRepin, 1}}), w), 10.0);
  EXPECT_DOUBLE_EQ(aggregate_label(ActionCounts{}, w), 0.0);
  const ActionWeights hide = {{Action::kHide, -1.0}};
  EXPECT_DOUBLE_EQ(aggregate_label(counts_of({{Action::kHide, 2}}), hide), -2.0);
}

TEST(AggregateLabel, LinearInCounts) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::int64_t> c(0, 50);
  std::uniform_real_distribution<double> wd(-1.0, 3.0);
  for (int t = 0; t < 1000; ++t) {
    ActionWeights w;
    ActionCounts a{}, b{}, sum{}, twice{};
    for (auto act : kAllActions) {
      w[act] = wd(rng);
      const auto i = static_cast<std::size_t>(act);
      a[i] = c(rng);
      b[i] = c(rng);
      sum[i] = a[i] + b[i];
      twice[i] = 2 * a[i];
    }
    EXPECT_NEAR(aggregate_label(twice, w), 2.0 * aggregate_label(a, w), 1e-9);
    EXPECT_NEAR(aggregate_label(sum, w), aggregate_label(a, w) + aggregate_label(b, w), 1e-9);
  }
}

TEST(NormalizeLabel, HandArithmetic) {
  LabelConfig c;
  c.tau = 30.0;
  c.lambda_pos = 0.1;
  EXPECT_NEAR(normalize_label(5.0, c.tau, 0, c), 10.0, 1e-12);
  EXPECT_EQ(normalize_label(0.0, 200.0, 7, c), 0.0);
  c.lambda_pos = 0.0;
  EXPECT_NEAR(normalization_multiplier(c.tau * std::exp(1.0), 4, c), 1.5, 1e-12);
}

TEST(NormalizeLabel, AgesBelowTauAreClamped) {
  LabelConfig c;
  EXPECT_DOUBLE_EQ(normalization_multiplier(1.0, 0, c), normalization_multiplier(c.tau, 0, c));
  EXPECT_GT(normalization_multiplier(c.tau / std::exp(1.0), 0, c), 0.0);
}

TEST(NormalizeLabel, MonotoneInAgeAndPosition) {
  LabelConfig c;
  c.lambda_pos = 0.05;
  for (double age = c.tau + 0.5; age < 2000.0; age *= 1.1) {
    for (std::int64_t pos = 0; pos < 40; ++pos) {
      const double m = normalization_multiplier(age, pos, c);
      EXPECT_LT(normalization_multiplier(age * 1.05, pos, c), m);
      EXPECT_GT(normalization_multiplier(age, pos + 1, c), m);
    }
  }
}

TEST(PruneGroups, Examples) {
  LabelConfig c;
  c.neg_cap = 2;
  Groups g;
  g[{QueryId{1}, SegmentId{0}}] = {inst(1, 0, 1, 0), inst(1, 0, 2, 0), inst(1, 0, 3, 0)};
  g[{QueryId{2}, SegmentId{0}}] = {inst(2, 0, 1, 3.0), inst(2, 0, 2, 0), inst(2, 0, 3, 0),
                                   inst(2, 0, 4, 0)};
  const auto out = prune_groups(g, c);
  EXPECT_FALSE(out.contains({QueryId{1}, SegmentId{0}}));
  const auto& kept = out.at({QueryId{2}, SegmentId{0}});
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(std::count_if(kept.begin(), kept.end(), [](auto& i) { return i.label > 0; }), 1);

  c.neg_cap = 5;
  Groups small;
  small[{QueryId{3}, SegmentId{0}}] = {inst(3, 0, 1, 1.0), inst(3, 0, 2, 0)};
  EXPECT_EQ(prune_groups(small, c), small);
}

TEST(PruneGroups, InvariantsOverManyGroups) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(1, 40);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabelConfig c;
  c.neg_cap = 20;
  Groups g;
  for (std::int64_t q = 0; q < 10000; ++q) {
    const int n = size(rng);
    const double pos_rate = u(rng) * 0.5;
    for (int i = 0; i < n; ++i) {
      const double r = u(rng);
      const double label = r < pos_rate ? 1.0 + r : (r < 0.9 ? 0.0 : -0.5);
      g[{QueryId{q}, SegmentId{q % 4}}].push_back(inst(q, q % 4, i, label));
    }
  }
  const auto out = prune_groups(g, c);
  EXPECT_GT(out.size(), 1000u);
  for (const auto& [key, group] : out) {
    std::size_t pos = 0, neg = 0;
    for (const auto& i : group) (i.label > 0.0 ? pos : neg)++;
    EXPECT_GE(pos, 1u);
    EXPECT_LE(neg, c.neg_cap);
    const auto& orig = g.at(key);
    const auto orig_pos = static_cast<std::size_t>(
        std::count_if(orig.begin(), orig.end(), [](auto& i) { return i.label > 0.0; }));
    EXPECT_EQ(pos, orig_pos);
  }
}

TEST(AverageJudgment, Means) {
  auto avg = [](std::vector<int> r) {
    synthlog::RelevanceJudgment j{QueryId{1}, PinId{2}, std::move(r)};
    return average_judgment(j).label;
  };
  EXPECT_DOUBLE_EQ(avg({2, 2, 2}), 2.0);
  EXPECT_DOUBLE_EQ(avg({0, 1, 2}), 1.0);
  EXPECT_DOUBLE_EQ(avg({2, 1}), 1.5);
  EXPECT_THROW(avg({}), DataError);
  EXPECT_THROW(avg({3}), DataError);
}

TEST(AverageJudgment, UsesTheNeutralSegment) {
  synthlog::RelevanceJudgment j{QueryId{1}, PinId{2}, {1}};
  const auto i = average_judgment(j);
  EXPECT_EQ(i.segment_id, kNeutralSegment);
  EXPECT_EQ(i.source, Source::kRelevance);
}

TEST(Discretize, Examples) {
  const std::array<double, 3> cuts = {0.0, 1.0, 3.0};
  EXPECT_EQ(discretize(-0.5, cuts), 1);
  EXPECT_EQ(discretize(2.0, cuts), 3);
  EXPECT_EQ(discretize(100.0, cuts), 4);
}

TEST(Discretize, Monotone) {
  const std::array<double, 3> cuts = {0.2, 0.9, 1.7};
  double prev_label = -5.0;
  int prev = discretize(prev_label, cuts);
  for (double l = -5.0; l < 5.0; l += 0.01) {
    const int y = discretize(l, cuts);
    EXPECT_GE(y, prev);
    EXPECT_GE(y, 1);
    EXPECT_LE(y, 4);
    prev = y;
  }
}

TEST(QuartileCuts, StrictlyAscending) {
  std::vector<LabeledInstance> v;
  for (int i = 0; i < 10; ++i) v.push_back(inst(1, 0, i, 1.0));
  const auto c = quartile_cuts(v);
  EXPECT_LT(c[0], c[1]);
  EXPECT_LT(c[1], c[2]);
}

TEST(ExtractPairs, Examples) {
  const std::vector<LabeledInstance> g = {inst(1, 0, 1, 2.0), inst(1, 0, 2, 1.0),
                                          inst(1, 0, 3, 1.0)};
  auto pairs = extract_pairs(g, 0, 1);
  std::set<std::pair<std::int64_t, std::int64_t>> got;
  for (const auto& p : pairs) got.insert({p.preferred_pin.value, p.other_pin.value});
  EXPECT_EQ(got, (std::set<std::pair<std::int64_t, std::int64_t>>{{1, 2}, {1, 3}}));

  const std::vector<LabeledInstance> equal = {inst(1, 0, 1, 1.0), inst(1, 0, 2, 1.0)};
  EXPECT_TRUE(extract_pairs(equal, 0, 1).empty());

  const std::vector<LabeledInstance> chain = {inst(1, 0, 1, 3.0), inst(1, 0, 2, 2.0),
                                              inst(1, 0, 3, 1.0)};
  EXPECT_EQ(extract_pairs(chain, 0, 1).size(), 3u);
}

TEST(ExtractPairs, CapAndOrdering) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> lab(0, 4);
  std::vector<LabeledInstance> g;
  for (int i = 0; i < 60; ++i) g.push_back(inst(5, 1, i, lab(rng)));
  std::map<std::int64_t, double> label_of;
  for (const auto& i : g) label_of[i.pin_id.value] = i.label;
  const auto pairs = extract_pairs(g, 100, 9);
  EXPECT_EQ(pairs.size(), 100u);
  for (const auto& p : pairs) {
    EXPECT_GT(label_of.at(p.preferred_pin.value), label_of.at(p.other_pin.value));
    EXPECT_EQ(p.query_id, QueryId{5});
    EXPECT_EQ(p.segment_id, SegmentId{1});
  }
  EXPECT_EQ(pairs, extract_pairs(g, 100, 9));
}

TEST(SplitDataset, FractionsAndIntegrity) {
  std::vector<LabeledInstance> v;
  for (std::int64_t q = 0; q < 25; ++q) {
    for (std::int64_t s = 0; s < 4; ++s) {
      for (int p = 0; p < 5; ++p) v.push_back(inst(q, s, p, p));
    }
  }
  const auto split = split_dataset(v, {0.7, 0.2, 0.1}, 4);
  auto groups = [](const std::vector<LabeledInstance>& part) {
    std::set<GroupKey> g;
    for (const auto& i : part) g.insert(i.group());
    return g;
  };
  const auto tr = groups(split.train), te = groups(split.test), va = groups(split.validation);
  EXPECT_NEAR(static_cast<double>(tr.size()), 70.0, 1.0);
  EXPECT_NEAR(static_cast<double>(te.size()), 20.0, 1.0);
  EXPECT_NEAR(static_cast<double>(va.size()), 10.0, 1.0);
  for (const auto& g : tr) {
    EXPECT_FALSE(te.contains(g));
    EXPECT_FALSE(va.contains(g));
  }
  for (const auto& g : te) EXPECT_FALSE(va.contains(g));
  EXPECT_EQ(split.train.size() + split.test.size() + split.validation.size(), v.size());

  const auto again = split_dataset(v, {0.7, 0.2, 0.1}, 4);
  EXPECT_EQ(again.train, split.train);
  EXPECT_EQ(again.test, split.test);
}

TEST(SplitDataset, QueryUnitKeepsQueriesTogether) {
  std::vector<LabeledInstance> v;
  for (std::int64_t q = 0; q < 40; ++q) {
    for (std::int64_t s = 0; s < 3; ++s) v.push_back(inst(q, s, 0, 1.0));
  }
  const auto split = split_dataset(v, {0.7, 0.2, 0.1}, 4, SplitUnit::kQuery);
  std::map<std::int64_t, int> where;
  auto mark = [&](const std::vector<LabeledInstance>& part, int id) {
    for (const auto& i : part) {
      auto [it, inserted] = where.emplace(i.query_id.value, id);
      EXPECT_EQ(it->second, id);
    }
  };
  mark(split.train, 0);
  mark(split.test, 1);
  mark(split.validation, 2);
}

TEST(LabelConfig, ValidationAndJson) {
  LabelConfig c;
  c.tau = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(label_config_from_json(Json{{"split_unit", "pin"}}), ConfigError);
  EXPECT_THROW(label_config_from_json(Json{{"action_weights", {{"share", 1.0}}}}), ConfigError);
  const LabelConfig d;
  EXPECT_EQ(to_json(label_config_from_json(to_json(d))), to_json(d));
}

TEST(Instances, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "imgrank_instances_test.jsonl";
  std::vector<LabeledInstance> v = {inst(1, 0, 2, 0.25), inst(1, -1, 3, 1.5)};
  v[1].source = Source::kRelevance;
  v[1].ordinal_label = 3;
  write_instances(v, path);
  EXPECT_EQ(read_instances(path), v);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace imgrank::labelgen
