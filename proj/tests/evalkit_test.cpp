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

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "imgrank/evalkit.hpp"

namespace imgrank::evalkit {
namespace {

double brute_force_idcg(std::vector<double> labels, std::size_t p) {
  std::sort(labels.begin(), labels.end());
  double best = 0.0;
  do {
    double d = 0.0;
    for (std::size_t r = 0; r < std::min(p, labels.size()); ++r) {
      d += std::max(labels[r], 0.0) / std::log2(static_cast<double>(r) + 2.0);
    }
    best = std::max(best, d);
  } while (std::next_permutation(labels.begin(), labels.end()));
  return best;
}

RankedList list_of(std::int64_t q, std::int64_t s, std::vector<std::int64_t> pins) {
  RankedList l;
  l.query_id = QueryId{q};
  l.segment_id = SegmentId{s};
  l.stages = {"model"};
  double score = static_cast<double>(pins.size());
  for (auto p : pins) l.entries.push_back({PinId{p}, score--, {}});
  l.counts = {pins.size(), pins.size()};
  l.scored = {pins.size()};
  return l;
}

synthlog::EngagementRecord record(std::int64_t q, std::int64_t s, std::int64_t pin,
                                  std::int64_t position, ActionCounts counts) {
  synthlog::EngagementRecord r;
  r.query_id = QueryId{q};
  r.segment_id = SegmentId{s};
  r.pin_id = PinId{pin};
  r.position = position;
  r.action_counts = counts;
  r.age_days_at_impression = 100.0;
  return r;
}

TEST(Dcg, HandComputedValues) {
  const std::vector<double> labels = {3, 2, 1};
  EXPECT_NEAR(dcg(labels, 3), 3.0 + 2.0 / std::log2(3.0) + 0.5, 1e-12);
  EXPECT_NEAR(dcg(labels, 3), 4.7619, 1e-3);
  EXPECT_EQ(dcg(std::vector<double>{0, 0, 0}, 3), 0.0);
  EXPECT_DOUBLE_EQ(dcg(std::vector<double>{5}, 1), 5.0);
}

TEST(Dcg, ZeroCutoffIsAConfigError) {
  EXPECT_THROW(dcg(std::vector<double>{1.0}, 0), ConfigError);
}

TEST(Ndcg, ReversedOrder) {
  const auto v = ndcg(std::vector<double>{1, 2, 3}, 3);
  ASSERT_TRUE(v.has_value());
  EXPECT_NEAR(*v, 0.7908, 1e-3);
  EXPECT_NEAR(*ndcg(std::vector<double>{3, 2, 1}, 3), 1.0, 1e-15);
}

TEST(Ndcg, AllZeroLabelsAreUndefined) {
  EXPECT_FALSE(ndcg(std::vector<double>{0, 0}, 2).has_value());
}

TEST(Ndcg, MatchesPermutationOracleExhaustively) {
  // Every label vector over {0..3} of length 1..6 at every cutoff.
  std::size_t checked = 0;
  for (std::size_t n = 1; n <= 6; ++n) {
    std::vector<int> digits(n, 0);
    while (true) {
      std::vector<double> labels(digits.begin(), digits.end());
      for (std::size_t p = 1; p <= n; ++p) {
        const double idcg = brute_force_idcg(labels, p);
        const auto v = ndcg(labels, p);
        if (idcg == 0.0) {
          EXPECT_FALSE(v.has_value());
        } else {
          ASSERT_TRUE(v.has_value());
          EXPECT_NEAR(*v, dcg(labels, p) / idcg, 1e-9);
        }
        ++checked;
      }
      std::size_t i = 0;
      while (i < n && ++digits[i] == 4) digits[i++] = 0;
      if (i == n) break;
    }
  }
  EXPECT_GT(checked, 20000u);
}

TEST(Ndcg, InvariantUnderPermutingEqualLabels) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> lab(0, 2);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> labels(8);
    for (auto& l : labels) l = lab(rng);
    auto shuffled = labels;
    // Swap two positions holding the same label.
    for (std::size_t i = 0; i < labels.size(); ++i) {
      for (std::size_t j = i + 1; j < labels.size(); ++j) {
        if (labels[i] == labels[j]) std::swap(shuffled[i], shuffled[j]);
      }
    }
    const auto a = ndcg(labels, 5);
    const auto b = ndcg(shuffled, 5);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      EXPECT_DOUBLE_EQ(*a, *b);
    }
  }
}

TEST(Ndcg, SwappingAMisorderedAdjacentPairNeverHurts) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lab(0.0, 3.0);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> labels(7);
    for (auto& l : labels) l = lab(rng);
    for (std::size_t i = 0; i + 1 < labels.size(); ++i) {
      if (labels[i] >= labels[i + 1]) continue;
      auto fixed = labels;
      std::swap(fixed[i], fixed[i + 1]);
      for (std::size_t p = 1; p <= labels.size(); ++p) {
        EXPECT_GE(*ndcg(fixed, p) + 1e-12, *ndcg(labels, p));
      }
    }
  }
}

TEST(NdcgSummary, ExcludesZeroIdealAndUnlabelledGroups) {
  std::map<GroupKey, LabelMap> labels;
  labels[{QueryId{1}, SegmentId{0}}] = {{PinId{1}, 0.0}, {PinId{2}, 2.0}};
  labels[{QueryId{2}, SegmentId{0}}] = {{PinId{3}, 0.0}};
  const std::vector<RankedList> lists = {list_of(1, 0, {1, 2}), list_of(2, 0, {3}),
                                         list_of(3, 0, {4})};
  const auto s = ndcg_summary(lists, labels, 2);
  EXPECT_EQ(s.evaluated, 1u);
  EXPECT_EQ(s.excluded, 2u);
  EXPECT_NEAR(s.mean, (2.0 / std::log2(3.0)) / 2.0, 1e-12);
}

TEST(NdcgSummary, ByQueryIgnoresSegment) {
  std::map<GroupKey, LabelMap> labels;
  labels[{QueryId{1}, kNeutralSegment}] = {{PinId{1}, 2.0}, {PinId{2}, 1.0}};
  const std::vector<RankedList> lists = {list_of(1, 4, {1, 2})};
  EXPECT_EQ(ndcg_summary(lists, labels, 2).evaluated, 0u);
  const auto s = ndcg_summary(lists, labels, 2, true);
  EXPECT_EQ(s.evaluated, 1u);
  EXPECT_NEAR(s.mean, 1.0, 1e-15);
}

TEST(Replay, FullRecallReproducesTheLogRate) {
  std::vector<synthlog::EngagementRecord> log;
  // Two searches on one group; one repin and two clicks in total.
  log.push_back(record(1, 0, 10, 0, {1, 0, 0, 0, 0}));
  log.push_back(record(1, 0, 11, 1, {0, 1, 0, 0, 0}));
  log.push_back(record(1, 0, 10, 0, {0, 1, 0, 0, 0}));
  log.push_back(record(1, 0, 12, 1, {0, 0, 0, 0, 0}));
  const std::vector<RankedList> lists = {list_of(1, 0, {10, 11, 12})};
  const auto m = replay_metrics(lists, log, 3);
  EXPECT_EQ(m.groups, 1u);
  EXPECT_DOUBLE_EQ(m.q_repin, 0.5);
  EXPECT_DOUBLE_EQ(m.q_click, 1.0);
  EXPECT_DOUBLE_EQ(m.q_engaged, 1.5);
}

TEST(Replay, EmptyIntersectionIsZero) {
  const std::vector<synthlog::EngagementRecord> log = {record(1, 0, 10, 0, {1, 1, 1, 1, 0})};
  const std::vector<RankedList> lists = {list_of(1, 0, {20, 21})};
  const auto m = replay_metrics(lists, log, 2);
  EXPECT_EQ(m.q_engaged, 0.0);
  EXPECT_EQ(m.q_repin, 0.0);
}

TEST(Replay, PlantedOracleBeatsRandomOrder) {
  const auto corpus = synthlog::generate_corpus(testing::small_corpus());
  synthlog::SimParams sim;
  sim.n_sessions = 3000;
  const auto log = synthlog::simulate_log(corpus, sim);
  std::mt19937_64 rng(1);
  std::vector<RankedList> oracle, random;
  for (std::size_t q = 0; q < corpus.queries.size(); ++q) {
    for (const auto& seg : corpus.segments) {
      std::vector<std::pair<double, std::size_t>> scored;
      for (auto pi : corpus.pools[q]) scored.push_back({corpus.utility(q, pi), pi});
      std::sort(scored.begin(), scored.end(), std::greater<>());
      std::vector<std::int64_t> best, shuffled;
      for (auto& [u, pi] : scored) best.push_back(corpus.pins[pi].pin_id.value);
      shuffled = best;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      oracle.push_back(list_of(corpus.queries[q].query_id.value, seg.segment_id.value, best));
      random.push_back(list_of(corpus.queries[q].query_id.value, seg.segment_id.value, shuffled));
    }
  }
  EXPECT_GT(replay_metrics(oracle, log, 10).q_engaged, replay_metrics(random, log, 10).q_engaged);
}

TEST(Ratios, AllFreshAndLocal) {
  auto params = testing::small_corpus();
  params.fresh_fraction = 1.0;
  params.countries = {"US"};
  const auto corpus = synthlog::generate_corpus(params);
  std::vector<std::int64_t> pins;
  for (std::size_t i = 0; i < 10; ++i) pins.push_back(corpus.pins[corpus.pools[0][i]].pin_id.value);
  const std::vector<RankedList> lists = {
      list_of(corpus.queries[0].query_id.value, corpus.segments[0].segment_id.value, pins)};
  const auto r = freshness_localness(lists, corpus, {}, 10);
  EXPECT_DOUBLE_EQ(r.f_imp, 1.0);
  EXPECT_DOUBLE_EQ(r.l_imp, 1.0);
}

TEST(Ratios, NoFreshPins) {
  auto params = testing::small_corpus();
  params.fresh_fraction = 0.0;
  const auto corpus = synthlog::generate_corpus(params);
  std::vector<std::int64_t> pins;
  for (std::size_t i = 0; i < 10; ++i) pins.push_back(corpus.pins[corpus.pools[0][i]].pin_id.value);
  const std::vector<RankedList> lists = {
      list_of(corpus.queries[0].query_id.value, corpus.segments[0].segment_id.value, pins)};
  EXPECT_DOUBLE_EQ(freshness_localness(lists, corpus, {}, 10).f_imp, 0.0);
}

EvalReport report_with(double value) {
  EvalReport r;
  r.name = "x";
  r.queries = {{QueryId{1}, SegmentId{0}}};
  r.metrics = {{"m", value}};
  return r;
}

TEST(Compare, IdenticalReportsGiveZeroDeltas) {
  const auto d = compare(report_with(0.7), report_with(0.7));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(*d[0].relative, 0.0);
}

TEST(Compare, RelativeChange) {
  const auto d = compare(report_with(1.0), report_with(1.2));
  EXPECT_NEAR(*d[0].relative, 0.2, 1e-12);
}

TEST(Compare, ZeroBaselineIsUndefined) {
  const auto d = compare(report_with(0.0), report_with(1.0));
  EXPECT_FALSE(d[0].relative.has_value());
  EXPECT_NE(deltas_to_csv(d).find("undefined"), std::string::npos);
  EXPECT_TRUE(deltas_to_json(d)[d[0].metric]["relative"].is_string());
}

TEST(Compare, DifferentQuerySetsAreADataError) {
  auto b = report_with(1.0);
  b.queries = {{QueryId{2}, SegmentId{0}}};
  EXPECT_THROW(compare(report_with(1.0), b), DataError);
}

TEST(Report, JsonRoundTrip) {
  EvalReport r = report_with(0.25);
  r.counts["ndcg_e@10.excluded"] = 3;
  r.per_query["ndcg_e@10"][{QueryId{1}, SegmentId{0}}] = 0.5;
  const auto back = EvalReport::from_json(r.to_json());
  EXPECT_EQ(back.to_json(), r.to_json());
}

}  // namespace
}  // namespace imgrank::evalkit
