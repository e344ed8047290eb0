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

#include "imgrank/dataset.hpp"

#include <algorithm>

namespace imgrank::data {

void Dataset::add(std::span<const double> values, double label, int ordinal, GroupKey group,
                  PinId pin) {
  if (values.size() != num_features()) {
    throw DataError("row has " + std::to_string(values.size()) + " values, expected " +
                    std::to_string(num_features()));
  }
  x.insert(x.end(), values.begin(), values.end());
  labels.push_back(label);
  ordinals.push_back(ordinal);
  groups.push_back(group);
  pins.push_back(pin);
}

Dataset Dataset::select_columns(std::span<const std::size_t> columns) const {
  Dataset out;
  for (auto c : columns) {
    if (c >= num_features()) throw ConfigError("column index out of range");
    out.feature_names.push_back(feature_names[c]);
  }
  out.schema_id = featurize::schema_id_for(out.feature_names);
  out.x.reserve(size() * columns.size());
  for (std::size_t i = 0; i < size(); ++i) {
    const auto r = row(i);
    for (auto c : columns) out.x.push_back(r[c]);
  }
  out.labels = labels;
  out.ordinals = ordinals;
  out.groups = groups;
  out.pins = pins;
  return out;
}

Dataset Dataset::select_features(std::span<const std::string> names) const {
  std::vector<std::size_t> cols;
  for (const auto& n : names) {
    auto it = std::find(feature_names.begin(), feature_names.end(), n);
    if (it == feature_names.end()) throw ConfigError("dataset has no feature '" + n + "'");
    cols.push_back(static_cast<std::size_t>(it - feature_names.begin()));
  }
  return select_columns(cols);
}

std::vector<std::pair<std::size_t, std::size_t>> Dataset::group_ranges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= size(); ++i) {
    if (i == size() || groups[i] != groups[begin]) {
      out.emplace_back(begin, i);
      begin = i;
    }
  }
  if (empty()) out.clear();
  return out;
}

std::vector<IndexPair> build_pairs(const Dataset& data, std::size_t max_pairs,
                                   std::uint64_t seed) {
  std::vector<IndexPair> out;
  for (const auto& [begin, end] : data.group_ranges()) {
    std::vector<labelgen::LabeledInstance> group;
    std::unordered_map<PinId, std::size_t> row_of;
    for (std::size_t i = begin; i < end; ++i) {
      labelgen::LabeledInstance inst;
      inst.query_id = data.groups[i].query;
      inst.segment_id = data.groups[i].segment;
      inst.pin_id = data.pins[i];
      inst.label = data.labels[i];
      group.push_back(inst);
      row_of.emplace(data.pins[i], i);
    }
    for (const auto& p : labelgen::extract_pairs(group, max_pairs, seed)) {
      out.push_back({row_of.at(p.preferred_pin), row_of.at(p.other_pin)});
    }
  }
  return out;
}

Dataset build_dataset(std::span<const labelgen::LabeledInstance> instances,
                      const synthlog::Corpus& corpus, const featurize::Featurizer& featurizer) {
  Dataset out;
  out.feature_names = featurizer.schema().names();
  out.schema_id = featurizer.schema().schema_id();
  const auto neutral = synthlog::UserSegment::neutral(corpus.params.n_categories,
                                                      corpus.params.latent_dim);
  std::vector<labelgen::LabeledInstance> sorted(instances.begin(), instances.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.group() < b.group(); });
  out.x.reserve(sorted.size() * out.feature_names.size());

  std::optional<GroupKey> current;
  featurize::QueryContext ctx;
  for (const auto& inst : sorted) {
    if (!current || *current != inst.group()) {
      const auto& q = corpus.queries[corpus.query_index(inst.query_id)];
      const auto& seg = inst.segment_id == kNeutralSegment
                            ? neutral
                            : corpus.segments[corpus.segment_index(inst.segment_id)];
      ctx = featurizer.prepare(q, seg);
      current = inst.group();
    }
    const auto& pin = corpus.pins[corpus.pin_index(inst.pin_id)];
    const auto fv = featurizer.featurize(ctx, pin);
    out.add(fv.values, inst.label, inst.ordinal_label, inst.group(), inst.pin_id);
  }
  return out;
}

double pair_accuracy(std::span<const double> scores, std::span<const IndexPair> pairs) {
  if (pairs.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    if (scores[p.preferred] > scores[p.other]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

}  // namespace imgrank::data
