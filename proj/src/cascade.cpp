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

#include "imgrank/cascade.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "imgrank/ensemble.hpp"

namespace imgrank::cascade {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

std::vector<std::string> CascadeConfig::violations(const featurize::FeatureSchema& schema) const {
  std::vector<std::string> out;
  if (stages.empty()) out.push_back("cascade has no stages");
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto& st = stages[s];
    const std::string where = "stage " + std::to_string(s) + " ('" + st.name + "')";
    if (st.keep_top == 0) out.push_back(where + ": keep_top must be positive");
    if (s > 0 && st.keep_top >= stages[s - 1].keep_top) {
      out.push_back(where + ": keep_top " + std::to_string(st.keep_top) +
                    " must be strictly below the previous stage's " +
                    std::to_string(stages[s - 1].keep_top));
    }
    if (!schema.subsets().contains(st.subset)) {
      out.push_back(where + ": unknown feature subset '" + st.subset + "'");
    }
    if (st.model.empty()) out.push_back(where + ": no model reference");
    if (st.model == kIdentityModel && st.name != kRerankStage) {
      out.push_back(where + ": the identity model is only valid in the rerank stage");
    }
    if (st.name == kRerankStage && s + 1 != stages.size()) {
      out.push_back(where + ": the rerank stage must be last");
    }
    if (s == 0 && st.model == kIdentityModel) out.push_back(where + ": first stage needs a model");
    if (st.early_exit && st.early_exit->chunk_size == 0) {
      out.push_back(where + ": early_exit chunk_size must be positive");
    }
  }
  const auto& p = rerank_policy;
  if (p.min_fresh_ratio && !(*p.min_fresh_ratio >= 0.0 && *p.min_fresh_ratio <= 1.0)) {
    out.push_back("rerank_policy.min_fresh_ratio must lie in [0, 1]");
  }
  if (!(p.diversity_penalty >= 0.0)) out.push_back("rerank_policy.diversity_penalty must be >= 0");
  return out;
}

void CascadeConfig::validate(const featurize::FeatureSchema& schema) const {
  const auto v = violations(schema);
  if (!v.empty()) throw ConfigError("cascade config: " + v.front());
}

Json to_json(const CascadeConfig& c) {
  Json stages = Json::array();
  for (const auto& s : c.stages) {
    Json js{{"name", s.name},
            {"model", s.model},
            {"subset", s.subset},
            {"keep_top", s.keep_top},
            {"latency_budget_ms", s.latency_budget_ms}};
    if (s.early_exit) {
      js["early_exit"] = {{"chunk_size", s.early_exit->chunk_size},
                          {"score_threshold", s.early_exit->score_threshold},
                          {"target", s.early_exit->target}};
    }
    stages.push_back(std::move(js));
  }
  Json policy{{"freshness_weight", c.rerank_policy.freshness_weight},
              {"localness_weight", c.rerank_policy.localness_weight},
              {"diversity_penalty", c.rerank_policy.diversity_penalty},
              {"min_fresh_ratio", nullptr}};
  if (c.rerank_policy.min_fresh_ratio) policy["min_fresh_ratio"] = *c.rerank_policy.min_fresh_ratio;
  Json j{{"stages", std::move(stages)}, {"rerank_policy", std::move(policy)}};
  if (!c.navboost.empty()) j["navboost"] = c.navboost;
  return j;
}

CascadeConfig cascade_config_from_json(const Json& j) {
  try {
    CascadeConfig c;
    for (const auto& js : j.at("stages")) {
      StageConfig s;
      s.name = js.at("name").get<std::string>();
      s.model = js.at("model").get<std::string>();
      s.subset = js.value("subset", s.name);
      s.keep_top = js.at("keep_top").get<std::size_t>();
      s.latency_budget_ms = js.value("latency_budget_ms", 0.0);
      if (js.contains("early_exit") && !js.at("early_exit").is_null()) {
        const auto& e = js.at("early_exit");
        EarlyExit ee;
        ee.chunk_size = e.value("chunk_size", ee.chunk_size);
        ee.score_threshold = e.at("score_threshold").get<double>();
        ee.target = e.value("target", ee.target);
        s.early_exit = ee;
      }
      c.stages.push_back(std::move(s));
    }
    if (j.contains("rerank_policy")) {
      const auto& p = j.at("rerank_policy");
      c.rerank_policy.freshness_weight = p.value("freshness_weight", 0.0);
      c.rerank_policy.localness_weight = p.value("localness_weight", 0.0);
      c.rerank_policy.diversity_penalty = p.value("diversity_penalty", 0.0);
      if (p.contains("min_fresh_ratio") && !p.at("min_fresh_ratio").is_null()) {
        c.rerank_policy.min_fresh_ratio = p.at("min_fresh_ratio").get<double>();
      }
    }
    c.navboost = j.value("navboost", std::string{});
    return c;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("cascade config: ") + e.what());
  }
}

CascadeConfig load_cascade_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read cascade config " + path.string());
  try {
    return cascade_config_from_json(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

CascadeConfig default_cascade(std::string light_model, std::string full_model,
                              std::string rerank_model) {
  CascadeConfig c;
  c.stages = {{"lightweight", std::move(light_model), "lightweight", 1000, 0.0, std::nullopt},
              {"full", std::move(full_model), "full", 100, 0.0, std::nullopt},
              {"rerank", std::move(rerank_model), "rerank", 25, 0.0, std::nullopt}};
  return c;
}

ModelMap load_models(const CascadeConfig& config, const std::filesystem::path& base_dir) {
  ModelMap out;
  for (const auto& s : config.stages) {
    if (s.model == kIdentityModel || out.contains(s.model)) continue;
    std::filesystem::path p(s.model);
    if (p.is_relative()) p = base_dir / p;
    out[s.model] = ensemble::load_scorer(p);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<RankedEntry> rerank(std::vector<RerankItem> items, const RerankPolicy& policy,
                                const models::Scorer* model, int diversity_column,
                                const synthlog::UserSegment& segment, std::size_t keep_top) {
  const std::size_t n = items.size();
  std::vector<double> base(n);
  for (std::size_t i = 0; i < n; ++i) {
    base[i] = model ? model->score(items[i].features) : items[i].entry.score;
  }
  const bool normalize = policy.freshness_weight != 0.0 || policy.localness_weight != 0.0 ||
                         policy.diversity_penalty != 0.0;
  double mean = 0.0, sd = 1.0;
  if (normalize && n > 0) {
    for (double b : base) mean += b;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double b : base) var += (b - mean) * (b - mean);
    sd = std::sqrt(var / static_cast<double>(n));
    if (!(sd > 1e-12)) sd = 1.0;
  }
  auto norm = [&](double s) { return normalize ? (s - mean) / sd : s; };

  std::vector<bool> fresh(n), local(n), placed(n, false);
  std::size_t fresh_left = 0;
  for (std::size_t i = 0; i < n; ++i) {
    fresh[i] = is_fresh(items[i].pin->age_days);
    local[i] = !segment.country.empty() && items[i].pin->linked_country == segment.country;
    if (fresh[i]) ++fresh_left;
  }
  std::vector<double> max_cos(n, 0.0);
  std::vector<RankedEntry> out;
  const std::size_t slots = std::min(n, keep_top);
  out.reserve(slots);
  std::size_t fresh_placed = 0;
  for (std::size_t k = 0; k < slots; ++k) {
    bool need_fresh = false;
    if (policy.min_fresh_ratio && fresh_left > 0) {
      const auto required = static_cast<std::size_t>(
          std::ceil(*policy.min_fresh_ratio * static_cast<double>(k + 1) - 1e-12));
      need_fresh = fresh_placed < required;
    }
    std::size_t best = n;
    double best_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (placed[i] || (need_fresh && !fresh[i])) continue;
      double s = base[i];
      if (model && diversity_column >= 0 && max_cos[i] != 0.0) {
        auto x = items[i].features;
        x[static_cast<std::size_t>(diversity_column)] = max_cos[i];
        s = model->score(x);
      }
      const double total = norm(s) + policy.freshness_weight * (fresh[i] ? 1.0 : 0.0) +
                           policy.localness_weight * (local[i] ? 1.0 : 0.0) -
                           policy.diversity_penalty * max_cos[i];
      if (best == n || total > best_total ||
          (total == best_total && items[i].entry.pin_id < items[best].entry.pin_id)) {
        best = i;
        best_total = total;
      }
    }
    placed[best] = true;
    if (fresh[best]) {
      ++fresh_placed;
      --fresh_left;
    }
    RankedEntry e = items[best].entry;
    e.score = best_total;
    e.stage_scores.push_back(best_total);
    out.push_back(std::move(e));
    if (policy.diversity_penalty != 0.0 || (model && diversity_column >= 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        if (placed[i]) continue;
        max_cos[i] = std::max(max_cos[i], std::max(0.0, featurize::cosine(
                                                            items[i].pin->latent_vec,
                                                            items[best].pin->latent_vec)));
      }
    }
  }
  return out;
}

Cascade::Cascade(CascadeConfig config, const featurize::Featurizer& featurizer, ModelMap models)
    : config_(std::move(config)), featurizer_(&featurizer), models_(std::move(models)) {
  const auto& schema = featurizer.schema();
  config_.validate(schema);
  for (const auto& st : config_.stages) {
    Stage stage;
    stage.columns = schema.subset_columns(st.subset);
    const auto& names = schema.subset(st.subset);
    auto it = std::find(names.begin(), names.end(),
                        featurize::feature_name(featurize::Feature::kDiversityPenalty));
    if (it != names.end()) stage.diversity_column = static_cast<int>(it - names.begin());
    if (st.model != kIdentityModel) {
      auto m = models_.find(st.model);
      if (m == models_.end() || !m->second) {
        throw ConfigError("stage '" + st.name + "': unresolved model '" + st.model + "'");
      }
      if (m->second->features() != names) {
        throw ConfigError("stage '" + st.name + "': model features do not match subset '" +
                          st.subset + "'");
      }
      stage.model = m->second.get();
    }
    stages_.push_back(std::move(stage));
  }
}

RankedList Cascade::run(const synthlog::Query& query, const synthlog::UserSegment& segment,
                        std::span<const synthlog::Pin* const> candidates) const {
  if (candidates.empty()) throw DataError("cascade needs at least one candidate");
  RankedList list;
  list.query_id = query.query_id;
  list.segment_id = segment.segment_id;
  list.counts.push_back(candidates.size());
  const auto ctx = featurizer_->prepare(query, segment);

  struct Cand {
    const synthlog::Pin* pin;
    RankedEntry entry;
  };
  std::vector<Cand> current;
  current.reserve(candidates.size());
  for (const auto* p : candidates) current.push_back({p, {p->pin_id, 0.0, {}}});
  auto before = [](const Cand& a, const Cand& b) { return ranks_before(a.entry, b.entry); };

  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const auto& cfg = config_.stages[s];
    const auto& stage = stages_[s];
    list.stages.push_back(cfg.name);
    const auto start = Clock::now();
    std::vector<double> x(stage.columns.size());

    if (cfg.name == kRerankStage) {
      std::vector<RerankItem> items;
      items.reserve(current.size());
      for (auto& c : current) {
        featurizer_->compute(ctx, *c.pin, stage.columns, x);
        items.push_back({c.pin, std::move(c.entry), x});
      }
      list.scored.push_back(items.size());
      auto placed = rerank(std::move(items), config_.rerank_policy, stage.model,
                           stage.diversity_column, segment, cfg.keep_top);
      list.entries = std::move(placed);
      current.clear();
    } else {
      std::size_t scored = 0;
      std::size_t reached = 0;
      for (auto& c : current) {
        if (cfg.early_exit && scored > 0 && scored % cfg.early_exit->chunk_size == 0 &&
            reached >= cfg.early_exit->target) {
          break;
        }
        featurizer_->compute(ctx, *c.pin, stage.columns, x);
        c.entry.score = stage.model->score(x);
        c.entry.stage_scores.push_back(c.entry.score);
        if (cfg.early_exit && c.entry.score >= cfg.early_exit->score_threshold) ++reached;
        ++scored;
      }
      current.resize(scored);
      list.scored.push_back(scored);
      const std::size_t keep = std::min(cfg.keep_top, current.size());
      if (keep < current.size()) {
        std::nth_element(current.begin(), current.begin() + static_cast<std::ptrdiff_t>(keep),
                         current.end(), before);
        current.resize(keep);
      }
      std::sort(current.begin(), current.end(), before);
    }
    list.stage_ms.push_back(elapsed_ms(start));
    list.counts.push_back(cfg.name == kRerankStage ? list.entries.size() : current.size());
  }
  if (!current.empty()) {
    list.entries.clear();
    for (auto& c : current) list.entries.push_back(std::move(c.entry));
  }
  return list;
}

// ---------------------------------------------------------------------------

LatencyHistogram LatencyHistogram::from_samples(std::vector<double> per_query_ms,
                                                std::vector<double> mean_stage_ms) {
  LatencyHistogram h;
  h.per_query_ms = std::move(per_query_ms);
  h.mean_stage_ms = std::move(mean_stage_ms);
  const std::size_t n = h.per_query_ms.size();
  if (n == 0) return h;
  std::array<std::size_t, 3> counts{};
  for (double ms : h.per_query_ms) {
    h.total_ms += ms;
    if (ms < 50.0) ++counts[0];
    else if (ms <= 200.0) ++counts[1];
    else ++counts[2];
  }
  for (std::size_t b = 0; b < 3; ++b) {
    h.fractions[b] = static_cast<double>(counts[b]) / static_cast<double>(n);
  }
  h.median_ms = median(h.per_query_ms);
  return h;
}

Json LatencyHistogram::to_json() const {
  return Json{{"buckets", {"<50ms", "50-200ms", ">200ms"}},
              {"fractions", fractions},
              {"median_ms", median_ms},
              {"total_ms", total_ms},
              {"mean_stage_ms", mean_stage_ms},
              {"per_query_ms", per_query_ms}};
}

LatencyHistogram measure_latency(const Cascade& cascade, std::span<const WorkItem> workload,
                                 std::size_t reps, std::size_t warmup) {
  if (workload.empty()) throw ConfigError("latency workload is empty");
  reps = std::max<std::size_t>(reps, 1);
  std::vector<double> per_query;
  std::vector<double> stage_sum;
  std::size_t stage_runs = 0;
  for (const auto& w : workload) {
    for (std::size_t r = 0; r < warmup; ++r) cascade.run(*w.query, *w.segment, w.candidates);
    std::vector<double> samples;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto start = Clock::now();
      const auto list = cascade.run(*w.query, *w.segment, w.candidates);
      samples.push_back(elapsed_ms(start));
      stage_sum.resize(std::max(stage_sum.size(), list.stage_ms.size()), 0.0);
      for (std::size_t s = 0; s < list.stage_ms.size(); ++s) stage_sum[s] += list.stage_ms[s];
      ++stage_runs;
    }
    per_query.push_back(median(samples));
  }
  for (auto& s : stage_sum) s /= static_cast<double>(stage_runs);
  return LatencyHistogram::from_samples(std::move(per_query), std::move(stage_sum));
}

LatencyHistogram simulated_latency(std::span<const RankedList> lists, const CostModel& cost) {
  std::vector<double> per_query;
  std::vector<double> stage_sum;
  for (const auto& l : lists) {
    double ms = cost.overhead_ms;
    stage_sum.resize(std::max(stage_sum.size(), l.scored.size()), 0.0);
    for (std::size_t s = 0; s < l.scored.size(); ++s) {
      const double c = s < cost.per_candidate_ms.size() ? cost.per_candidate_ms[s] : 0.0;
      const double stage_ms = c * static_cast<double>(l.scored[s]);
      ms += stage_ms;
      stage_sum[s] += stage_ms;
    }
    per_query.push_back(ms);
  }
  if (!lists.empty()) {
    for (auto& s : stage_sum) s /= static_cast<double>(lists.size());
  }
  return LatencyHistogram::from_samples(std::move(per_query), std::move(stage_sum));
}

}  // namespace imgrank::cascade
