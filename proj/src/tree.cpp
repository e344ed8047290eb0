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

#include "imgrank/tree.hpp"

#include <algorithm>
#include <numeric>

namespace imgrank::models {

RegressionTree::RegressionTree(std::vector<TreeNode> nodes, int max_depth)
    : nodes_(std::move(nodes)), max_depth_(max_depth) {
  if (nodes_.empty()) throw DataError("tree has no nodes");
  const auto n = static_cast<int>(nodes_.size());
  for (const auto& node : nodes_) {
    if (node.feature < 0) continue;
    if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n) {
      throw DataError("tree node has an invalid child index");
    }
  }
}

RegressionTree RegressionTree::constant(double value) {
  TreeNode leaf;
  leaf.value = value;
  return RegressionTree({leaf}, 0);
}

std::size_t RegressionTree::leaf_of(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes_[i].feature >= 0) {
    const auto& node = nodes_[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold
                                     ? node.left
                                     : node.right);
  }
  return i;
}

double RegressionTree::predict(std::span<const double> x) const {
  return nodes_[leaf_of(x)].value;
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes_.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& node = nodes_[i];
    best = std::max(best, d[i]);
    if (node.feature >= 0) {
      d[static_cast<std::size_t>(node.left)] = d[i] + 1;
      d[static_cast<std::size_t>(node.right)] = d[i] + 1;
    }
  }
  return best;
}

std::size_t RegressionTree::num_leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

Json RegressionTree::to_json() const {
  Json nodes = Json::array();
  for (const auto& n : nodes_) {
    if (n.feature < 0) {
      nodes.push_back(Json{{"value", n.value}});
    } else {
      nodes.push_back(Json{{"feature", n.feature},
                           {"threshold", n.threshold},
                           {"left", n.left},
                           {"right", n.right}});
    }
  }
  return Json{{"max_depth", max_depth_}, {"nodes", std::move(nodes)}};
}

RegressionTree RegressionTree::from_json(const Json& j) {
  std::vector<TreeNode> nodes;
  for (const auto& n : j.at("nodes")) {
    TreeNode node;
    if (n.contains("feature")) {
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
    } else {
      node.value = n.at("value").get<double>();
    }
    nodes.push_back(node);
  }
  return RegressionTree(std::move(nodes), j.at("max_depth").get<int>());
}

// ---------------------------------------------------------------------------

TreeBuilder::TreeBuilder(std::span<const double> x, std::size_t n_features,
                         std::vector<std::size_t> rows)
    : x_(x), n_features_(n_features), rows_(std::move(rows)) {
  if (n_features_ == 0) throw DataError("tree input has no features");
  if (rows_.empty()) {
    rows_.resize(x_.size() / n_features_);
    std::iota(rows_.begin(), rows_.end(), std::size_t{0});
  }
  sorted_.resize(n_features_);
  for (std::size_t f = 0; f < n_features_; ++f) {
    auto& order = sorted_[f];
    order.resize(rows_.size());
    std::iota(order.begin(), order.end(), std::uint32_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return x_[rows_[a] * n_features_ + f] < x_[rows_[b] * n_features_ + f];
    });
  }
}

namespace {

struct NodeStats {
  double sum = 0.0;
  std::size_t count = 0;
};

struct Split {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

double midpoint(double a, double b) {
  const double m = a + (b - a) / 2.0;
  return m < b ? m : a;
}

}  // namespace

RegressionTree TreeBuilder::fit(std::span<const double> targets, int max_depth,
                                std::size_t min_leaf) const {
  if (rows_.empty()) throw DataError("cannot fit a tree on zero instances");
  if (max_depth < 0) throw ConfigError("max_depth must be non-negative");
  min_leaf = std::max<std::size_t>(min_leaf, 1);

  const std::size_t n = rows_.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = targets[rows_[i]];

  std::vector<TreeNode> nodes(1);
  // Node of each local row; -1 once the row sits in a finished leaf.
  std::vector<int> node_of(n, 0);
  std::vector<NodeStats> stats(1);
  for (double v : y) stats[0].sum += v;
  stats[0].count = n;
  std::vector<int> frontier = {0};

  for (int level = 0; level < max_depth && !frontier.empty(); ++level) {
    // Dense slot per frontier node.
    std::vector<int> slot(nodes.size(), -1);
    for (std::size_t k = 0; k < frontier.size(); ++k) {
      slot[static_cast<std::size_t>(frontier[k])] = static_cast<int>(k);
    }
    std::vector<Split> best(frontier.size());
    std::vector<NodeStats> left(frontier.size());
    std::vector<double> last_value(frontier.size());

    for (std::size_t f = 0; f < n_features_; ++f) {
      std::fill(left.begin(), left.end(), NodeStats{});
      for (std::uint32_t li : sorted_[f]) {
        const int node = node_of[li];
        if (node < 0) continue;
        const int s = slot[static_cast<std::size_t>(node)];
        if (s < 0) continue;
        const auto k = static_cast<std::size_t>(s);
        const double v = x_[rows_[li] * n_features_ + f];
        auto& l = left[k];
        const auto& total = stats[static_cast<std::size_t>(node)];
        if (l.count >= min_leaf && total.count - l.count >= min_leaf && v > last_value[k]) {
          const double rs = total.sum - l.sum;
          const auto rc = static_cast<double>(total.count - l.count);
          const double gain = l.sum * l.sum / static_cast<double>(l.count) + rs * rs / rc -
                              total.sum * total.sum / static_cast<double>(total.count);
          if (gain > best[k].gain + 1e-12) {
            best[k] = {gain, static_cast<int>(f), midpoint(last_value[k], v)};
          }
        }
        l.sum += y[li];
        ++l.count;
        last_value[k] = v;
      }
    }

    std::vector<int> next;
    for (std::size_t k = 0; k < frontier.size(); ++k) {
      const auto node = static_cast<std::size_t>(frontier[k]);
      if (best[k].feature < 0) continue;
      const int l = static_cast<int>(nodes.size());
      nodes.emplace_back();
      nodes.emplace_back();
      stats.resize(nodes.size());
      nodes[node].feature = best[k].feature;
      nodes[node].threshold = best[k].threshold;
      nodes[node].left = l;
      nodes[node].right = l + 1;
      next.push_back(l);
      next.push_back(l + 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const int node = node_of[i];
      if (node < 0) continue;
      const auto& nd = nodes[static_cast<std::size_t>(node)];
      if (nd.feature < 0) {
        node_of[i] = -1;
        continue;
      }
      const double v = x_[rows_[i] * n_features_ + static_cast<std::size_t>(nd.feature)];
      const int child = v <= nd.threshold ? nd.left : nd.right;
      node_of[i] = child;
      auto& cs = stats[static_cast<std::size_t>(child)];
      cs.sum += y[i];
      ++cs.count;
    }
    frontier = std::move(next);
  }

  // Leaf values are target means over the rows that reached them.
  std::vector<NodeStats> leaf(nodes.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t node = 0;
    const double* r = &x_[rows_[i] * n_features_];
    while (nodes[node].feature >= 0) {
      const auto& nd = nodes[node];
      node = static_cast<std::size_t>(r[nd.feature] <= nd.threshold ? nd.left : nd.right);
    }
    leaf[node].sum += y[i];
    ++leaf[node].count;
  }
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k].feature < 0 && leaf[k].count > 0) {
      nodes[k].value = leaf[k].sum / static_cast<double>(leaf[k].count);
    }
  }
  return RegressionTree(std::move(nodes), max_depth);
}

RegressionTree fit_tree(std::span<const double> x, std::size_t n_features,
                        std::span<const double> targets, int max_depth, std::size_t min_leaf) {
  if (n_features == 0 || x.empty()) throw DataError("cannot fit a tree on zero instances");
  return TreeBuilder(x, n_features).fit(targets, max_depth, min_leaf);
}

// ---------------------------------------------------------------------------

double BoostEnsemble::predict(std::span<const double> x) const {
  double s = base_score;
  for (std::size_t t = 0; t < trees.size(); ++t) s += etas[t] * trees[t].predict(x);
  return s;
}

void BoostEnsemble::add(RegressionTree tree, double eta, std::string source) {
  trees.push_back(std::move(tree));
  etas.push_back(eta);
  sources.push_back(std::move(source));
}

Json BoostEnsemble::to_json() const {
  Json ts = Json::array();
  for (const auto& t : trees) ts.push_back(t.to_json());
  return Json{{"base_score", base_score}, {"etas", etas}, {"sources", sources}, {"trees", ts}};
}

BoostEnsemble BoostEnsemble::from_json(const Json& j) {
  BoostEnsemble e;
  e.base_score = j.at("base_score").get<double>();
  e.etas = j.at("etas").get<std::vector<double>>();
  e.sources = j.value("sources", std::vector<std::string>(e.etas.size()));
  for (const auto& t : j.at("trees")) e.trees.push_back(RegressionTree::from_json(t));
  if (e.trees.size() != e.etas.size() || e.sources.size() != e.etas.size()) {
    throw DataError("boost ensemble has mismatched tree and eta counts");
  }
  return e;
}

}  // namespace imgrank::models
