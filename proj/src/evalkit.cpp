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

#include "imgrank/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace imgrank::evalkit {

double dcg(std::span<const double> labels, std::size_t p, double log_base) {
  if (p == 0) throw ConfigError("dcg cutoff p must be at least 1");
  const std::size_t n = std::min(p, labels.size());
  const double ln_base = std::log(log_base);
  double s = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    s += std::max(0.0, labels[r]) / (std::log(static_cast<double>(r + 2)) / ln_base);
  }
  return s;
}

std::optional<double> ndcg(std::span<const double> labels, std::size_t p,
                           std::span<const double> ideal_pool, double log_base) {
  std::vector<double> ideal(ideal_pool.begin(), ideal_pool.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg(ideal, p, log_base);
  if (idcg <= 0.0) return std::nullopt;
  return std::min(1.0, dcg(labels, p, log_base) / idcg);
}

std::optional<double> ndcg(std::span<const double> labels, std::size_t p, double log_base) {
  return ndcg(labels, p, labels, log_base);
}

std::map<GroupKey, LabelMap> label_maps(std::span<const labelgen::LabeledInstance> instances,
                                        bool by_query) {
  std::map<GroupKey, LabelMap> out;
  for (const auto& i : instances) {
    const GroupKey key = by_query ? GroupKey{i.query_id, kNeutralSegment} : i.group();
    out[key][i.pin_id] = i.label;
  }
  return out;
}

NdcgSummary ndcg_summary(std::span<const RankedList> lists,
                         const std::map<GroupKey, LabelMap>& labels, std::size_t p,
                         bool by_query) {
  NdcgSummary s;
  s.p = p;
  double total = 0.0;
  for (const auto& list : lists) {
    const GroupKey key = by_query ? GroupKey{list.query_id, kNeutralSegment} : list.group();
    auto it = labels.find(key);
    if (it == labels.end()) {
      ++s.excluded;
      continue;
    }
    std::vector<double> ranked;
    ranked.reserve(list.entries.size());
    for (const auto& e : list.entries) {
      auto l = it->second.find(e.pin_id);
      ranked.push_back(l == it->second.end() ? 0.0 : l->second);
    }
    std::vector<double> pool;
    pool.reserve(it->second.size());
    for (const auto& [pin, l] : it->second) pool.push_back(l);
    const auto v = ndcg(ranked, p, pool);
    if (!v) {
      ++s.excluded;
      continue;
    }
    s.per_query[list.group()] = *v;
    total += *v;
    ++s.evaluated;
  }
  s.mean = s.evaluated ? total / static_cast<double>(s.evaluated) : 0.0;
  return s;
}

namespace {

std::unordered_map<PinId, std::size_t> top_k_positions(const RankedList& list, std::size_t k) {
  std::unordered_map<PinId, std::size_t> out;
  const std::size_t n = std::min(k, list.entries.size());
  for (std::size_t r = 0; r < n; ++r) out.emplace(list.entries[r].pin_id, r);
  return out;
}

std::map<GroupKey, std::vector<const synthlog::EngagementRecord*>> by_group(
    std::span<const synthlog::EngagementRecord> records) {
  std::map<GroupKey, std::vector<const synthlog::EngagementRecord*>> out;
  for (const auto& r : records) out[r.group()].push_back(&r);
  return out;
}

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

ReplayMetrics replay_metrics(std::span<const RankedList> lists,
                             std::span<const synthlog::EngagementRecord> holdout, std::size_t k) {
  const auto groups = by_group(holdout);
  ReplayMetrics m;
  for (const auto& list : lists) {
    auto it = groups.find(list.group());
    if (it == groups.end()) continue;
    double searches = 0.0;
    for (const auto* r : it->second) {
      if (r->position == 0) searches += 1.0;
    }
    if (searches == 0.0) continue;
    const auto top = top_k_positions(list, k);
    PerAction<double> sums{};
    for (const auto* r : it->second) {
      if (!top.contains(r->pin_id)) continue;
      for (std::size_t a = 0; a < kNumActions; ++a) {
        sums[a] += static_cast<double>(r->action_counts[a]);
      }
    }
    auto at = [&](Action a) { return sums[static_cast<std::size_t>(a)] / searches; };
    m.q_repin += at(Action::kRepin);
    m.q_click += at(Action::kClick);
    m.q_closeup += at(Action::kCloseup);
    m.q_longclick += at(Action::kLongclick);
    for (Action a : kAllActions) {
      if (is_positive_action(a)) m.q_engaged += at(a);
    }
    ++m.groups;
  }
  if (m.groups > 0) {
    const auto n = static_cast<double>(m.groups);
    m.q_repin /= n;
    m.q_click /= n;
    m.q_closeup /= n;
    m.q_longclick /= n;
    m.q_engaged /= n;
  }
  return m;
}

FreshLocalRatios freshness_localness(std::span<const RankedList> lists,
                                     const synthlog::Corpus& corpus,
                                     std::span<const synthlog::EngagementRecord> holdout,
                                     std::size_t k) {
  const auto groups = by_group(holdout);
  double imp = 0.0, local_imp = 0.0, fresh_imp = 0.0;
  double repins = 0.0, local_repins = 0.0, fresh_repins = 0.0;
  double clicks = 0.0, local_clicks = 0.0, fresh_clicks = 0.0;
  for (const auto& list : lists) {
    const auto& seg = corpus.segments[corpus.segment_index(list.segment_id)];
    auto is_local = [&](const synthlog::Pin& p) {
      return !seg.country.empty() && p.linked_country == seg.country;
    };
    const auto top = top_k_positions(list, k);
    for (const auto& [pin_id, r] : top) {
      const auto& pin = corpus.pins[corpus.pin_index(pin_id)];
      imp += 1.0;
      if (is_local(pin)) local_imp += 1.0;
      if (is_fresh(pin.age_days)) fresh_imp += 1.0;
    }
    auto it = groups.find(list.group());
    if (it == groups.end()) continue;
    for (const auto* rec : it->second) {
      if (!top.contains(rec->pin_id)) continue;
      const auto& pin = corpus.pins[corpus.pin_index(rec->pin_id)];
      const auto rp = static_cast<double>(rec->action_counts[static_cast<std::size_t>(Action::kRepin)]);
      const auto cl = static_cast<double>(rec->action_counts[static_cast<std::size_t>(Action::kClick)]);
      repins += rp;
      clicks += cl;
      if (is_local(pin)) {
        local_repins += rp;
        local_clicks += cl;
      }
      if (is_fresh(rec->age_days_at_impression)) {
        fresh_repins += rp;
        fresh_clicks += cl;
      }
    }
  }
  return {ratio(local_imp, imp),       ratio(fresh_imp, imp),       ratio(local_repins, repins),
          ratio(fresh_repins, repins), ratio(local_clicks, clicks), ratio(fresh_clicks, clicks)};
}

// ---------------------------------------------------------------------------

namespace {

std::string group_label(const GroupKey& g) {
  return std::to_string(g.query.value) + ":" + std::to_string(g.segment.value);
}

GroupKey parse_group_label(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw DataError("bad group key '" + s + "'");
  return {QueryId(std::stoll(s.substr(0, colon))), SegmentId(std::stoll(s.substr(colon + 1)))};
}

}  // namespace

Json EvalReport::to_json() const {
  Json qs = Json::array();
  for (const auto& g : queries) qs.push_back(group_label(g));
  Json pq = Json::object();
  for (const auto& [metric, values] : per_query) {
    Json m = Json::object();
    for (const auto& [g, v] : values) m[group_label(g)] = v;
    pq[metric] = std::move(m);
  }
  Json j{{"name", name}, {"queries", qs}, {"metrics", metrics}, {"counts", counts},
         {"per_query", pq}};
  if (!latency.is_null()) j["latency"] = latency;
  return j;
}

EvalReport EvalReport::from_json(const Json& j) {
  try {
    EvalReport r;
    r.name = j.value("name", std::string{});
    for (const auto& q : j.at("queries")) r.queries.push_back(parse_group_label(q.get<std::string>()));
    r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    r.counts = j.value("counts", std::map<std::string, std::size_t>{});
    if (j.contains("per_query")) {
      for (const auto& [metric, values] : j.at("per_query").items()) {
        for (const auto& [g, v] : values.items()) {
          r.per_query[metric][parse_group_label(g)] = v.get<double>();
        }
      }
    }
    r.latency = j.value("latency", Json(nullptr));
    return r;
  } catch (const Json::exception& e) {
    throw DataError(std::string("eval report: ") + e.what());
  }
}

std::string EvalReport::to_csv() const {
  std::size_t width = 6;
  for (const auto& [k, v] : metrics) width = std::max(width, k.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "metric" << ",value\n";
  out << std::setprecision(6) << std::fixed;
  for (const auto& [k, v] : metrics) {
    out << std::left << std::setw(static_cast<int>(width)) << k << "," << v << "\n";
  }
  return out.str();
}

void EvalReport::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "report.json", std::ios::binary) << to_json().dump(2) << '\n';
  std::ofstream(dir / "report.csv", std::ios::binary) << to_csv();
}

void add_ndcg(EvalReport& report, const std::string& prefix, const NdcgSummary& s) {
  const std::string key = prefix + "@" + std::to_string(s.p);
  report.metrics[key] = s.mean;
  report.counts[key + "_evaluated"] = s.evaluated;
  report.counts[key + "_excluded"] = s.excluded;
  report.per_query[key] = s.per_query;
}

void add_replay(EvalReport& report, const ReplayMetrics& m) {
  report.metrics["q_repin"] = m.q_repin;
  report.metrics["q_click"] = m.q_click;
  report.metrics["q_closeup"] = m.q_closeup;
  report.metrics["q_longclick"] = m.q_longclick;
  report.metrics["q_engaged"] = m.q_engaged;
  report.counts["replay_groups"] = m.groups;
}

void add_ratios(EvalReport& report, const FreshLocalRatios& r) {
  report.metrics["l_imp"] = r.l_imp;
  report.metrics["f_imp"] = r.f_imp;
  report.metrics["l_repin"] = r.l_repin;
  report.metrics["f_repin"] = r.f_repin;
  report.metrics["l_click"] = r.l_click;
  report.metrics["f_click"] = r.f_click;
}

std::vector<Delta> compare(const EvalReport& a, const EvalReport& b) {
  const std::set<GroupKey> qa(a.queries.begin(), a.queries.end());
  const std::set<GroupKey> qb(b.queries.begin(), b.queries.end());
  if (qa != qb) throw DataError("reports cover different query sets");
  std::vector<Delta> out;
  for (const auto& [metric, va] : a.metrics) {
    auto it = b.metrics.find(metric);
    if (it == b.metrics.end()) continue;
    Delta d{metric, va, it->second, std::nullopt};
    if (va != 0.0) d.relative = (it->second - va) / va;
    out.push_back(d);
  }
  return out;
}

std::string deltas_to_csv(std::span<const Delta> deltas) {
  std::size_t width = 6;
  for (const auto& d : deltas) width = std::max(width, d.metric.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "metric" << ",a,b,relative\n";
  out << std::setprecision(6) << std::fixed;
  for (const auto& d : deltas) {
    out << std::left << std::setw(static_cast<int>(width)) << d.metric << "," << d.a << "," << d.b
        << ",";
    if (d.relative) {
      out << std::showpos << *d.relative * 100.0 << std::noshowpos << "%";
    } else {
      out << "undefined";
    }
    out << "\n";
  }
  return out.str();
}

Json deltas_to_json(std::span<const Delta> deltas) {
  Json j = Json::object();
  for (const auto& d : deltas) {
    j[d.metric] = {{"a", d.a}, {"b", d.b},
                   {"relative", d.relative ? Json(*d.relative) : Json("undefined")}};
  }
  return j;
}

}  // namespace imgrank::evalkit
