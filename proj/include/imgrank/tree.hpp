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
#include <span>
#include <string>
#include <vector>

#include "imgrank/types.hpp"

namespace imgrank::models {

struct TreeNode {
  /// -1 marks a leaf.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool operator==(const TreeNode&) const = default;
};

/// Binary regression tree; rows with x[feature] <= threshold go left.
class RegressionTree {
 public:
  RegressionTree() = default;
  RegressionTree(std::vector<TreeNode> nodes, int max_depth);

  /// Single-leaf tree.
  static RegressionTree constant(double value);

  double predict(std::span<const double> x) const;
  /// Node index of the leaf reached by `x`.
  std::size_t leaf_of(std::span<const double> x) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int max_depth() const { return max_depth_; }
  int depth() const;
  std::size_t num_leaves() const;

  Json to_json() const;
  static RegressionTree from_json(const Json& j);
  bool operator==(const RegressionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
  int max_depth_ = 0;
};

/// Exact greedy split search over presorted feature columns. Split finding
/// is level-wise: each level scans every feature's sorted order once.
class TreeBuilder {
 public:
  /// `x` is row-major with `n_features` columns. When `rows` is non-empty
  /// only those rows take part in fitting.
  TreeBuilder(std::span<const double> x, std::size_t n_features,
              std::vector<std::size_t> rows = {});

  std::size_t num_rows() const { return rows_.size(); }
  const std::vector<std::size_t>& rows() const { return rows_; }

  /// `targets` is indexed by row of the full matrix.
  RegressionTree fit(std::span<const double> targets, int max_depth,
                     std::size_t min_leaf) const;

 private:
  std::span<const double> x_;
  std::size_t n_features_;
  std::vector<std::size_t> rows_;
  /// Per feature, positions into rows_ sorted by feature value.
  std::vector<std::vector<std::uint32_t>> sorted_;
};

/// Variance-reduction tree over all rows of `x`; leaf values are target means.
RegressionTree fit_tree(std::span<const double> x, std::size_t n_features,
                        std::span<const double> targets, int max_depth, std::size_t min_leaf);

/// H(x) = base + sum_t eta_t h_t(x).
class BoostEnsemble {
 public:
  double base_score = 0.0;
  std::vector<RegressionTree> trees;
  std::vector<double> etas;
  /// Optional per-tree tag naming the data source a tree was fit on.
  std::vector<std::string> sources;

  std::size_t size() const { return trees.size(); }
  double predict(std::span<const double> x) const;
  void add(RegressionTree tree, double eta, std::string source = {});

  Json to_json() const;
  static BoostEnsemble from_json(const Json& j);
  bool operator==(const BoostEnsemble&) const = default;
};

}  // namespace imgrank::models
