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

#include "imgrank/labelgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace imgrank::labelgen {

void LabelConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (neg_cap < 1) throw ConfigError("neg_cap must be at least 1");
  if (discretize_cuts) {
    const auto& c = *discretize_cuts;
    if (!(c[0] < c[1] && c[1] < c[2])) {
      throw ConfigError("discretize_cuts must be strictly ascending");
    }
  }
  const double total = split_fractions[0] + split_fractions[1] + split_fractions[2];
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  for (double f : split_fractions) {
    if (f < 0.0) throw ConfigError("split fractions must be non-negative");
  }
}

Json to_json(const LabelConfig& c) {
  Json weights = Json::object();
  for (const auto& [a, w] : c.action_weights) weights[std::string(action_name(a))] = w;
  Json j{{"action_weights", weights},
         {"tau", c.tau},
         {"lambda_pos", c.lambda_pos},
         {"neg_cap", c.neg_cap},
         {"max_pairs_per_group", c.max_pairs_per_group},
         {"split_fractions", c.split_fractions},
         {"split_unit", c.split_unit == SplitUnit::kGroup ? "group" : "query"},
         {"seed", c.seed}};
  j["discretize_cuts"] = c.discretize_cuts ? Json(*c.discretize_cuts) : Json(nullptr);
  return j;
}

LabelConfig label_config_from_json(const Json& j) {
  LabelConfig c;
  try {
    if (j.contains("action_weights")) {
      for (const auto& [name, w] : j.at("action_weights").items()) {
        const auto a = parse_action(name);
        if (!a) {
          throw ConfigError("unknown action type '" + name + "' (valid: " +
                            valid_action_names() + ")");
        }
        c.action_weights[*a] = w.get<double>();
      }
    }
    c.tau = j.value("tau", c.tau);
    c.lambda_pos = j.value("lambda_pos", c.lambda_pos);
    c.neg_cap = j.value("neg_cap", c.neg_cap);
    c.max_pairs_per_group = j.value("max_pairs_per_group", c.max_pairs_per_group);
    if (j.contains("split_fractions")) {
      c.split_fractions = j.at("split_fractions").get<std::array<double, 3>>();
    }
    if (j.contains("split_unit")) {
      const auto unit = j.at("split_unit").get<std::string>();
      if (unit == "group") {
        c.split_unit = SplitUnit::kGroup;
      } else if (unit == "query") {
        c.split_unit = SplitUnit::kQuery;
      } else {
        throw ConfigError("split_unit must be 'group' or 'query'");
      }
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("discretize_cuts") && !j.at("discretize_cuts").is_null()) {
      c.discretize_cuts = j.at("discretize_cuts").get<std::array<double, 3>>();
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("label config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string_view source_name(Source s) {
  return s == Source::kEngagement ? "engagement" : "relevance";
}

Source parse_source(std::string_view name) {
  if (name == "engagement") return Source::kEngagement;
  if (name == "relevance") return Source::kRelevance;
  throw ConfigError("unknown source '" + std::string(name) +
                    "' (valid: engagement, relevance)");
}

ActionWeights default_weights(std::span<const synthlog::ActionType> volumes) {
  if (volumes.empty()) throw ConfigError("action set is empty");
  std::int64_t min_positive = std::numeric_limits<std::int64_t>::max();
  std::int64_t min_any = std::numeric_limits<std::int64_t>::max();
  for (const auto& a : volumes) {
    if (a.volume < 1) throw ConfigError("action volumes must be >= 1");
    min_any = std::min(min_any, a.volume);
    if (is_positive_action(a.name)) min_positive = std::min(min_positive, a.volume);
  }
  const double reference = static_cast<double>(
      min_positive == std::numeric_limits<std::int64_t>::max() ? min_any : min_positive);
  ActionWeights weights;
  for (const auto& a : volumes) {
    const double w = reference / static_cast<double>(a.volume);
    weights[a.name] = is_positive_action(a.name) ? w : -w;
  }
  return weights;
}

std::vector<synthlog::ActionType> log_volumes(
    std::span<const synthlog::EngagementRecord> records) {
  PerAction<std::int64_t> totals{};
  for (const auto& r : records) {
    for (std::size_t a = 0; a < kNumActions; ++a) totals[a] += r.action_counts[a];
  }
  std::vector<synthlog::ActionType> out;
  for (Action a : kAllActions) {
    out.push_back({a, std::max<std::int64_t>(1, totals[static_cast<std::size_t>(a)])});
  }
  return out;
}

double aggregate_label(const ActionCounts& counts, const ActionWeights& weights) {
  double total = 0.0;
  for (const auto& [action, w] : weights) {
    total += w * static_cast<double>(counts[static_cast<std::size_t>(action)]);
  }
  return total;
}

double aggregate_label(std::span<const synthlog::EngagementRecord> records,
                       const ActionWeights& weights) {
  double total = 0.0;
  for (const auto& r : records) total += aggregate_label(r.action_counts, weights);
  return total;
}

double normalization_multiplier(double age_days, std::int64_t position,
                                const LabelConfig& config) {
  const double age = std::max(age_days, config.tau);
  return 1.0 / (std::log(age / config.tau) + 1.0) +
         std::exp(config.lambda_pos * static_cast<double>(position));
}

double normalize_label(double raw, double age_days, std::int64_t position,
                       const LabelConfig& config) {
  if (raw == 0.0) return 0.0;
  return raw * normalization_multiplier(age_days, position, config);
}

std::vector<LabeledInstance> engagement_instances(
    std::span<const synthlog::EngagementRecord> records,
    const ActionWeights& weights, const LabelConfig& config) {
  struct Key {
    GroupKey group;
    PinId pin;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, double> labels;
  for (const auto& r : records) {
    const double raw = aggregate_label(r.action_counts, weights);
    labels[{r.group(), r.pin_id}] +=
        normalize_label(raw, r.age_days_at_impression, r.position, config);
  }
  std::vector<LabeledInstance> out;
  out.reserve(labels.size());
  for (const auto& [key, label] : labels) {
    LabeledInstance inst;
    inst.query_id = key.group.query;
    inst.segment_id = key.group.segment;
    inst.pin_id = key.pin;
    inst.label = label;
    inst.source = Source::kEngagement;
    out.push_back(inst);
  }
  return out;
}

Groups group_instances(std::span<const LabeledInstance> instances) {
  Groups groups;
  for (const auto& inst : instances) groups[inst.group()].push_back(inst);
  return groups;
}

std::vector<LabeledInstance> flatten(const Groups& groups) {
  std::vector<LabeledInstance> out;
  for (const auto& [key, group] : groups) out.insert(out.end(), group.begin(), group.end());
  return out;
}

Groups prune_groups(Groups groups, const LabelConfig& config) {
  Groups out;
  for (auto& [key, group] : groups) {
    const bool has_positive = std::any_of(group.begin(), group.end(),
                                          [](const auto& i) { return i.label > 0.0; });
    if (!has_positive) continue;
    std::vector<std::size_t> negatives;
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (group[i].label <= 0.0) negatives.push_back(i);
    }
    if (negatives.size() <= config.neg_cap) {
      out.emplace(key, std::move(group));
      continue;
    }
    std::mt19937_64 rng(mix_seed(config.seed, std::hash<GroupKey>{}(key)));
    std::shuffle(negatives.begin(), negatives.end(), rng);
    std::vector<bool> drop(group.size(), false);
    for (std::size_t k = config.neg_cap; k < negatives.size(); ++k) drop[negatives[k]] = true;
    std::vector<LabeledInstance> kept;
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (!drop[i]) kept.push_back(group[i]);
    }
    out.emplace(key, std::move(kept));
  }
  return out;
}

LabeledInstance average_judgment(const synthlog::RelevanceJudgment& judgment) {
  if (judgment.ratings.empty()) {
    throw DataError("judgment for query " + std::to_string(judgment.query_id.value) +
                    " pin " + std::to_string(judgment.pin_id.value) + " has no ratings");
  }
  double total = 0.0;
  for (int r : judgment.ratings) {
    if (r < 0 || r > 2) {
      throw DataError("rating " + std::to_string(r) + " outside {0, 1, 2}");
    }
    total += r;
  }
  LabeledInstance inst;
  inst.query_id = judgment.query_id;
  inst.segment_id = kNeutralSegment;
  inst.pin_id = judgment.pin_id;
  inst.label = total / static_cast<double>(judgment.ratings.size());
  inst.source = Source::kRelevance;
  return inst;
}

int discretize(double label, const std::array<double, 3>& cuts) {
  int y = 1;
  for (double c : cuts) {
    if (label > c) ++y;
  }
  return y;
}

std::array<double, 3> quartile_cuts(std::span<const LabeledInstance> instances) {
  std::vector<double> pos;
  for (const auto& i : instances) {
    if (i.label > 0.0) pos.push_back(i.label);
  }
  std::array<double, 3> cuts{0.0, 1.0, 2.0};
  if (!pos.empty()) {
    std::sort(pos.begin(), pos.end());
    auto quantile = [&](double q) {
      const double h = q * static_cast<double>(pos.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(h));
      const auto hi = std::min(lo + 1, pos.size() - 1);
      return pos[lo] + (h - static_cast<double>(lo)) * (pos[hi] - pos[lo]);
    };
    cuts = {quantile(0.25), quantile(0.5), quantile(0.75)};
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (!(cuts[1] > cuts[0])) cuts[1] = std::nextafter(cuts[0], kInf);
  if (!(cuts[2] > cuts[1])) cuts[2] = std::nextafter(cuts[1], kInf);
  return cuts;
}

std::vector<PreferencePair> extract_pairs(std::span<const LabeledInstance> group,
                                          std::size_t max_pairs,
                                          std::uint64_t seed) {
  std::vector<PreferencePair> pairs;
  for (const auto& a : group) {
    for (const auto& b : group) {
      if (a.label > b.label) {
        pairs.push_back({a.query_id, a.segment_id, a.pin_id, b.pin_id});
      }
    }
  }
  if (max_pairs == 0 || pairs.size() <= max_pairs || group.empty()) return pairs;
  std::vector<std::size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(seed, std::hash<GroupKey>{}(group.front().group())));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(max_pairs);
  std::sort(idx.begin(), idx.end());
  std::vector<PreferencePair> out;
  out.reserve(max_pairs);
  for (auto i : idx) out.push_back(pairs[i]);
  return out;
}

Split split_dataset(std::span<const LabeledInstance> instances,
                    const std::array<double, 3>& fractions, std::uint64_t seed,
                    SplitUnit unit) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

  // Units are keyed by (query, segment); the query unit ignores the segment.
  auto unit_of = [unit](const LabeledInstance& i) {
    return unit == SplitUnit::kGroup ? i.group() : GroupKey{i.query_id, SegmentId(0)};
  };
  std::set<GroupKey> unit_set;
  for (const auto& i : instances) unit_set.insert(unit_of(i));
  std::vector<GroupKey> units(unit_set.begin(), unit_set.end());
  std::mt19937_64 rng(seed);
  std::shuffle(units.begin(), units.end(), rng);

  const auto n = static_cast<double>(units.size());
  const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * n));
  const auto n_test = std::min(units.size() - std::min(n_train, units.size()),
                               static_cast<std::size_t>(std::llround(fractions[1] * n)));
  std::map<GroupKey, int> bucket;
  for (std::size_t k = 0; k < units.size(); ++k) {
    bucket[units[k]] = k < n_train ? 0 : (k < n_train + n_test ? 1 : 2);
  }
  Split split;
  for (const auto& i : instances) {
    switch (bucket.at(unit_of(i))) {
      case 0:
        split.train.push_back(i);
        break;
      case 1:
        split.test.push_back(i);
        break;
      default:
        split.validation.push_back(i);
    }
  }
  return split;
}

void write_instances(std::span<const LabeledInstance> instances,
                     const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& i : instances) {
    out << Json{{"query_id", i.query_id},
                {"segment_id", i.segment_id},
                {"pin_id", i.pin_id},
                {"label", i.label},
                {"ordinal_label", i.ordinal_label},
                {"source", source_name(i.source)}}
               .dump()
        << '\n';
  }
}

std::vector<LabeledInstance> read_instances(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<LabeledInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      LabeledInstance i;
      i.query_id = j.at("query_id").get<QueryId>();
      i.segment_id = j.at("segment_id").get<SegmentId>();
      i.pin_id = j.at("pin_id").get<PinId>();
      i.label = j.at("label").get<double>();
      i.ordinal_label = j.at("ordinal_label").get<int>();
      i.source = parse_source(j.at("source").get<std::string>());
      out.push_back(i);
    } catch (const Json::exception& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace imgrank::labelgen
