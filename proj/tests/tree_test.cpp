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

#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "imgrank/models.hpp"
#include "imgrank/tree.hpp"

namespace imgrank::models {
namespace {

double mse(const RegressionTree& t, std::span<const double> x, std::size_t nf,
           std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = t.predict(x.subspan(i * nf, nf)) - y[i];
    s += d * d;
  }
  return s / static_cast<double>(y.size());
}

TEST(FitTree, DepthZeroIsTheMean) {
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> y = {1, 5, 2, 8};
  const auto t = fit_tree(x, 1, y, 0, 1);
  EXPECT_EQ(t.num_leaves(), 1u);
  EXPECT_DOUBLE_EQ(t.predict(std::vector<double>{9.0}), 4.0);
}

TEST(FitTree, SeparableStepFitsExactly) {
  std::vector<double> x, y;
  for (int i = -10; i < 10; ++i) {
    x.push_back(i + 0.5);
    y.push_back(i + 0.5 < 0 ? -1.0 : 1.0);
  }
  const auto t = fit_tree(x, 1, y, 1, 1);
  EXPECT_EQ(mse(t, x, 1, y), 0.0);
  EXPECT_EQ(t.depth(), 1);
}

TEST(FitTree, ConstantTargetsGiveOneLeaf) {
  std::vector<double> x(40), y(40, 3.0);
  std::iota(x.begin(), x.end(), 0.0);
  const auto t = fit_tree(x, 1, y, 5, 1);
  EXPECT_EQ(t.num_leaves(), 1u);
  EXPECT_EQ(t.predict(std::vector<double>{0.0}), 3.0);
}

TEST(FitTree, RespectsDepthAndLeafSize) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::size_t rows = 500, nf = 3;
  std::vector<double> x(rows * nf), y(rows);
  for (auto& v : x) v = n(rng);
  for (std::size_t i = 0; i < rows; ++i) y[i] = x[i * nf] * x[i * nf + 1] + 0.1 * n(rng);
  for (int depth = 0; depth <= 5; ++depth) {
    const auto t = fit_tree(x, nf, y, depth, 20);
    EXPECT_LE(t.depth(), depth);
    std::map<std::size_t, std::size_t> per_leaf;
    for (std::size_t i = 0; i < rows; ++i) ++per_leaf[t.leaf_of({x.data() + i * nf, nf})];
    for (const auto& [leaf, count] : per_leaf) EXPECT_GE(count, 20u);
  }
}

TEST(FitTree, DeeperTreesNeverFitWorse) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t rows = 300, nf = 4;
  std::vector<double> x(rows * nf), y(rows);
  for (auto& v : x) v = u(rng);
  for (std::size_t i = 0; i < rows; ++i) y[i] = std::sin(3.0 * x[i * nf]) + x[i * nf + 2];
  double prev = mse(fit_tree(x, nf, y, 0, 1), x, nf, y);
  for (int depth = 1; depth <= 6; ++depth) {
    const double cur = mse(fit_tree(x, nf, y, depth, 1), x, nf, y);
    EXPECT_LE(cur, prev + 1e-12);
    prev = cur;
  }
}

TEST(FitTree, RowSubsetIgnoresOtherRows) {
  const std::vector<double> x = {0, 1, 2, 3};
  const std::vector<double> y = {100, 1, 1, 3};
  const TreeBuilder b(x, 1, {1, 2, 3});
  const auto t = b.fit(y, 0, 1);
  EXPECT_DOUBLE_EQ(t.predict(std::vector<double>{0.0}), 5.0 / 3.0);
}

TEST(RegressionTree, JsonRoundTripAndValidation) {
  std::vector<double> x(60), y(60);
  for (std::size_t i = 0; i < 60; ++i) {
    x[i] = static_cast<double>(i % 13);
    y[i] = static_cast<double>((i * 7) % 5);
  }
  const auto t = fit_tree(x, 1, y, 3, 2);
  EXPECT_EQ(RegressionTree::from_json(t.to_json()), t);
  auto bad = t.to_json();
  bad["nodes"][0]["left"] = 99;
  if (t.num_leaves() > 1) {
    EXPECT_THROW(RegressionTree::from_json(bad), DataError);
  }
}

TEST(Gbdt, SingleRoundDepthZeroPredictsTheMean) {
  const auto d = testing::planted_dataset(5, 10, 3, testing::linear_utility, 1);
  TrainParams p = default_params(ModelKind::kGbdt);
  p.trees = 1;
  p.max_depth = 0;
  const auto m = train_gbdt(d, p);
  const double mean = std::accumulate(d.labels.begin(), d.labels.end(), 0.0) /
                      static_cast<double>(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(m.score(d.row(i)), mean, 1e-12);
}

TEST(Gbdt, SingleInstanceExactFit) {
  data::Dataset d;
  d.feature_names = {"a"};
  d.add(std::vector<double>{1.0}, 3.5, 4, {QueryId{0}, SegmentId{0}}, PinId{0});
  TrainParams p = default_params(ModelKind::kGbdt);
  p.trees = 1;
  p.learning_rate = 1.0;
  p.min_leaf = 1;
  EXPECT_DOUBLE_EQ(train_gbdt(d, p).score(d.row(0)), 3.5);
}

TEST(Gbdt, MoreRoundsNeverIncreaseTrainingError) {
  const auto d = testing::planted_dataset(20, 20, 4, testing::xor_utility, 2);
  TrainParams p = default_params(ModelKind::kGbdt);
  p.trees = 50;
  const auto m = train_gbdt(d, p);
  const auto& curve = m.meta().loss_curve;
  ASSERT_EQ(curve.size(), 51u);
  EXPECT_LE(curve.back(), curve[1]);
  for (std::size_t t = 1; t < curve.size(); ++t) EXPECT_LE(curve[t], curve[t - 1]);
}

TEST(Gbrt, SeparatedPairHasZeroGradient) {
  const std::vector<double> scores = {2.5, 0.0};
  const std::vector<data::IndexPair> pairs = {{0, 1}};
  const auto g = pair_hinge_negative_gradient(scores, pairs, 1.0);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_EQ(pair_hinge_loss(scores, pairs, 1.0), 0.0);
}

TEST(Gbrt, NegativeGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> s(12);
  for (auto& v : s) v = n(rng);
  std::vector<data::IndexPair> pairs;
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 12; j += 3) {
      if (i != j) pairs.push_back({i, j});
    }
  }
  const auto g = pair_hinge_negative_gradient(s, pairs, 1.0);
  const double scale = static_cast<double>(pairs.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto up = s, down = s;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    const double fd = scale * (pair_hinge_loss(up, pairs, 1.0) - pair_hinge_loss(down, pairs, 1.0)) /
                      2e-6;
    EXPECT_NEAR(-fd, g[i], 1e-5);
  }
}

TEST(Gbrt, SingleViolatedPairGetsOrdered) {
  data::Dataset d;
  d.feature_names = {"a"};
  d.add(std::vector<double>{0.0}, 1.0, 2, {QueryId{0}, SegmentId{0}}, PinId{0});
  d.add(std::vector<double>{1.0}, 0.0, 1, {QueryId{0}, SegmentId{0}}, PinId{1});
  const std::vector<data::IndexPair> pairs = {{0, 1}};
  TrainParams p = default_params(ModelKind::kGbrt);
  p.trees = 20;
  p.min_leaf = 1;
  const auto m = train_gbrt(d, pairs, p);
  EXPECT_GT(m.score(d.row(0)), m.score(d.row(1)));
}

TEST(Gbrt, PairLossNonIncreasing) {
  const auto d = testing::planted_dataset(30, 15, 5, testing::xor_utility, 3);
  const auto pairs = data::build_pairs(d, 50, 1);
  TrainParams p = default_params(ModelKind::kGbrt);
  p.trees = 60;
  const auto m = train_gbrt(d, pairs, p);
  const auto& curve = m.meta().loss_curve;
  for (std::size_t t = 1; t < curve.size(); ++t) EXPECT_LE(curve[t], curve[t - 1] + 1e-9);
}

TEST(Gbrt, LinearlyRankableTrainingPairs) {
  const auto d = testing::planted_dataset(40, 12, 4, testing::linear_utility, 5);
  auto pairs = data::build_pairs(d, 25, 2);
  ASSERT_GE(pairs.size(), 1000u);
  pairs.resize(1000);
  TrainParams p = default_params(ModelKind::kGbrt);
  const auto m = train_gbrt(d, pairs, p);
  EXPECT_GE(data::pair_accuracy(score_rows(m, d), pairs), 0.95);
}

}  // namespace
}  // namespace imgrank::models
