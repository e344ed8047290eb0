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

#include "imgrank/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <set>

#include "imgrank/ensemble.hpp"
#include "imgrank/evalkit.hpp"

namespace imgrank::experiment {

namespace fs = std::filesystem;
using models::ModelKind;

namespace {

constexpr std::array<ModelKind, 6> kTrainable = {ModelKind::kGbdt,    ModelKind::kGbrt,
                                                 ModelKind::kRankSvm, ModelKind::kRankNet,
                                                 ModelKind::kDnn,     ModelKind::kCnn};

const std::set<std::string> kTopKeys = {"seed",   "corpus",   "simlog",  "judgments", "labels",
                                        "models", "stacking", "cascade", "eval",      "bench"};
const std::set<std::string> kCorpusKeys = {"n_pins",          "n_queries",     "n_segments",
                                           "n_categories",    "n_topics",      "latent_dim",
                                           "words_per_topic", "general_words", "pool_size",
                                           "fresh_fraction",  "countries"};
const std::set<std::string> kSimKeys = {"sessions", "position_bias", "page_size", "hide_rate"};
const std::set<std::string> kJudgmentKeys = {"pins_per_query", "raters", "rater_noise"};
const std::set<std::string> kLabelKeys = {"action_weights",      "tau",
                                          "lambda_pos",          "neg_cap",
                                          "discretize_cuts",     "max_pairs_per_group",
                                          "split_fractions",     "split_unit",
                                          "seed"};
const std::set<std::string> kRuleKeys = {"weights", "fresh_boost", "local_boost"};
const std::set<std::string> kStackingKeys = {"gamma_grid", "blend", "znorm"};
const std::set<std::string> kEvalKeys = {"k", "ndcg_at"};
const std::set<std::string> kBenchKeys = {"enabled",     "n_pins",
                                          "sessions",    "wall_queries",
                                          "reps",        "warmup",
                                          "simulated_queries", "early_exit_quantile",
                                          "early_exit_target", "chunk_size",
                                          "cost"};
const std::set<std::string> kCascadeKeys = {"stages", "rerank_policy", "navboost"};

void unused(const Json& j, const std::set<std::string>& known, const std::string& where,
            std::vector<std::string>& out) {
  if (!j.is_object()) return;
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) out.push_back(where.empty() ? key : where + "." + key);
  }
}

const Json& section(const Json& j, const char* name) {
  if (!j.contains(name)) throw ConfigError(std::string("missing '") + name + "' section");
  const Json& s = j.at(name);
  if (!s.is_object()) throw ConfigError(std::string("'") + name + "' must be an object");
  return s;
}

/// Model references a reproduce run produces.
std::set<std::string> produced_models() {
  std::set<std::string> out = {"rule_light", "ranksvm_light", "stacked_full", "stacked_gbrt_full",
                               std::string(cascade::kIdentityModel)};
  for (auto k : kTrainable) {
    out.insert(std::string(models::kind_name(k)) + "_engagement");
    out.insert(std::string(models::kind_name(k)) + "_relevance");
  }
  return out;
}

std::string instances_file(labelgen::Source source, SplitName split) {
  return std::string(labelgen::source_name(source)) + "/" + std::string(split_name(split)) +
         ".jsonl";
}

std::string features_file(labelgen::Source source, SplitName split) {
  return std::string(labelgen::source_name(source)) + "/" + std::string(split_name(split)) +
         ".features.jsonl";
}

void write_json(const fs::path& path, const Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Json default_experiment_json(std::uint64_t seed) {
  Json models = Json::object();
  for (auto k : kTrainable) {
    Json p = models::to_json(models::default_params(k));
    p.erase("seed");
    models[std::string(models::kind_name(k))] = p;
  }
  const RuleConfig rule;
  models["rule"] = {{"weights", rule.weights},
                    {"fresh_boost", rule.fresh_boost},
                    {"local_boost", rule.local_boost}};
  auto cascade = cascade::default_cascade("ranksvm_light", "stacked_full");
  cascade.stages[0].keep_top = 400;
  cascade.rerank_policy.freshness_weight = 0.3;
  cascade.rerank_policy.localness_weight = 0.3;
  cascade.rerank_policy.diversity_penalty = 0.1;
  const BenchConfig bench;
  const synthlog::CorpusParams corpus;
  const synthlog::SimParams sim;
  const synthlog::JudgmentParams judg;
  Json labels = labelgen::to_json(labelgen::LabelConfig{});
  labels.erase("seed");
  return Json{
      {"seed", seed},
      {"corpus",
       {{"n_pins", corpus.n_pins},
        {"n_queries", corpus.n_queries},
        {"n_segments", corpus.n_segments},
        {"n_categories", corpus.n_categories},
        {"n_topics", corpus.n_topics},
        {"latent_dim", corpus.latent_dim},
        {"words_per_topic", corpus.words_per_topic},
        {"general_words", corpus.general_words},
        {"pool_size", corpus.pool_size},
        {"fresh_fraction", corpus.fresh_fraction},
        {"countries", corpus.countries}}},
      {"simlog",
       {{"sessions", sim.n_sessions},
        {"position_bias", sim.position_bias},
        {"page_size", sim.page_size},
        {"hide_rate", sim.hide_rate}}},
      {"judgments",
       {{"pins_per_query", judg.pins_per_query},
        {"raters", judg.raters},
        {"rater_noise", judg.rater_noise}}},
      {"labels", labels},
      {"models", models},
      {"stacking", {{"gamma_grid", StackingConfig{}.gamma_grid}, {"blend", 0.5}, {"znorm", false}}},
      {"cascade", cascade::to_json(cascade)},
      {"eval", {{"k", EvalConfig{}.k}, {"ndcg_at", EvalConfig{}.ndcg_at}}},
      {"bench",
       {{"enabled", bench.enabled},
        {"n_pins", bench.n_pins},
        {"sessions", bench.sessions},
        {"wall_queries", bench.wall_queries},
        {"reps", bench.reps},
        {"warmup", bench.warmup},
        {"simulated_queries", bench.simulated_queries},
        {"early_exit_quantile", bench.early_exit_quantile},
        {"early_exit_target", bench.early_exit_target},
        {"chunk_size", bench.chunk_size},
        {"cost",
         {{"overhead_ms", bench.cost.overhead_ms},
          {"per_candidate_ms", bench.cost.per_candidate_ms}}}}}};
}

ExperimentConfig parse_experiment(const Json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    if (!j.contains("seed")) throw ConfigError("missing mandatory 'seed'");
    c.seed = j.at("seed").get<std::uint64_t>();

    const Json& corpus = section(j, "corpus");
    auto& cp = c.corpus;
    cp.seed = c.seed;
    cp.n_pins = corpus.value("n_pins", cp.n_pins);
    cp.n_queries = corpus.value("n_queries", cp.n_queries);
    cp.n_segments = corpus.value("n_segments", cp.n_segments);
    cp.n_categories = corpus.value("n_categories", cp.n_categories);
    cp.n_topics = corpus.value("n_topics", cp.n_topics);
    cp.latent_dim = corpus.value("latent_dim", cp.latent_dim);
    cp.words_per_topic = corpus.value("words_per_topic", cp.words_per_topic);
    cp.general_words = corpus.value("general_words", cp.general_words);
    cp.pool_size = corpus.value("pool_size", cp.pool_size);
    cp.fresh_fraction = corpus.value("fresh_fraction", cp.fresh_fraction);
    cp.countries = corpus.value("countries", cp.countries);
    cp.validate();

    const Json& sim = section(j, "simlog");
    c.sim.seed = mix_seed(c.seed, 1);
    c.sim.n_sessions = sim.value("sessions", c.sim.n_sessions);
    c.sim.position_bias = sim.value("position_bias", c.sim.position_bias);
    c.sim.page_size = sim.value("page_size", c.sim.page_size);
    c.sim.hide_rate = sim.value("hide_rate", c.sim.hide_rate);
    if (c.sim.position_bias < 0.0) throw ConfigError("simlog.position_bias must be >= 0");
    if (c.sim.n_sessions == 0) throw ConfigError("simlog.sessions must be at least 1");

    const Json& judg = section(j, "judgments");
    c.judgments.seed = mix_seed(c.seed, 2);
    c.judgments.pins_per_query = judg.value("pins_per_query", c.judgments.pins_per_query);
    c.judgments.raters = judg.value("raters", c.judgments.raters);
    c.judgments.rater_noise = judg.value("rater_noise", c.judgments.rater_noise);

    Json labels = section(j, "labels");
    if (!labels.contains("seed")) labels["seed"] = mix_seed(c.seed, 3);
    c.labels = labelgen::label_config_from_json(labels);

    const Json& models = section(j, "models");
    for (auto k : kTrainable) {
      const std::string name(models::kind_name(k));
      if (!models.contains(name)) throw ConfigError("missing 'models." + name + "' section");
      auto p = models::train_params_from_json(models.at(name), models::default_params(k));
      if (!models.at(name).contains("seed")) p.seed = mix_seed(c.seed, 100 + static_cast<int>(k));
      c.models[k] = p;
    }
    for (const auto& [name, value] : models.items()) {
      if (name != "rule") models::parse_kind(name);
    }
    if (models.contains("rule")) {
      const auto& r = models.at("rule");
      c.rule.weights = r.value("weights", c.rule.weights);
      c.rule.fresh_boost = r.value("fresh_boost", c.rule.fresh_boost);
      c.rule.local_boost = r.value("local_boost", c.rule.local_boost);
    }

    if (j.contains("stacking")) {
      const auto& s = j.at("stacking");
      c.stacking.gamma_grid = s.value("gamma_grid", c.stacking.gamma_grid);
      c.stacking.blend = s.value("blend", c.stacking.blend);
      c.stacking.znorm = s.value("znorm", c.stacking.znorm);
      if (c.stacking.gamma_grid.empty()) throw ConfigError("stacking.gamma_grid is empty");
      for (double g : c.stacking.gamma_grid) {
        if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("stacking.gamma_grid values must lie in [0, 1]");
      }
    }

    c.cascade = cascade::cascade_config_from_json(section(j, "cascade"));
    c.cascade.validate(featurize::FeatureSchema::standard());
    const auto produced = produced_models();
    for (const auto& st : c.cascade.stages) {
      if (!produced.contains(st.model)) {
        std::string valid;
        for (const auto& p : produced) valid += (valid.empty() ? "" : ", ") + p;
        throw ConfigError("cascade stage '" + st.name + "' references unknown model '" +
                          st.model + "' (valid: " + valid + ")");
      }
    }

    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      c.eval.k = e.value("k", c.eval.k);
      c.eval.ndcg_at = e.value("ndcg_at", c.eval.ndcg_at);
      if (c.eval.k == 0) throw ConfigError("eval.k must be at least 1");
      for (auto p : c.eval.ndcg_at) {
        if (p == 0) throw ConfigError("eval.ndcg_at cutoffs must be at least 1");
      }
    }

    if (j.contains("bench")) {
      const auto& b = j.at("bench");
      auto& bc = c.bench;
      bc.enabled = b.value("enabled", bc.enabled);
      bc.n_pins = b.value("n_pins", bc.n_pins);
      bc.sessions = b.value("sessions", bc.sessions);
      bc.wall_queries = b.value("wall_queries", bc.wall_queries);
      bc.reps = b.value("reps", bc.reps);
      bc.warmup = b.value("warmup", bc.warmup);
      bc.simulated_queries = b.value("simulated_queries", bc.simulated_queries);
      bc.early_exit_quantile = b.value("early_exit_quantile", bc.early_exit_quantile);
      bc.early_exit_target = b.value("early_exit_target", bc.early_exit_target);
      bc.chunk_size = b.value("chunk_size", bc.chunk_size);
      if (b.contains("cost")) {
        bc.cost.overhead_ms = b.at("cost").value("overhead_ms", bc.cost.overhead_ms);
        bc.cost.per_candidate_ms = b.at("cost").value("per_candidate_ms", bc.cost.per_candidate_ms);
      }
      if (bc.enabled && bc.n_pins <= 1000) {
        throw ConfigError("bench.n_pins must exceed the lightweight cut-off of 1000");
      }
      if (!(bc.early_exit_quantile >= 0.0 && bc.early_exit_quantile < 1.0)) {
        throw ConfigError("bench.early_exit_quantile must lie in [0, 1)");
      }
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_experiment(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    return parse_experiment(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Diagnostics validate_experiment(const Json& j) {
  Diagnostics d;
  if (!j.is_object()) {
    d.errors.push_back("config must be a JSON object");
    return d;
  }
  unused(j, kTopKeys, "", d.unused_keys);
  auto sub = [&](const char* name, const std::set<std::string>& keys) {
    if (j.contains(name)) unused(j.at(name), keys, name, d.unused_keys);
  };
  sub("corpus", kCorpusKeys);
  sub("simlog", kSimKeys);
  sub("judgments", kJudgmentKeys);
  sub("labels", kLabelKeys);
  sub("stacking", kStackingKeys);
  sub("eval", kEvalKeys);
  sub("bench", kBenchKeys);
  sub("cascade", kCascadeKeys);
  if (j.contains("models") && j.at("models").contains("rule")) {
    unused(j.at("models").at("rule"), kRuleKeys, "models.rule", d.unused_keys);
  }
  if (j.contains("cascade")) {
    try {
      const auto c = cascade::cascade_config_from_json(j.at("cascade"));
      for (auto& v : c.violations(featurize::FeatureSchema::standard())) d.errors.push_back(v);
    } catch (const Error& e) {
      d.errors.push_back(e.what());
    }
  }
  try {
    parse_experiment(j);
  } catch (const Error& e) {
    const std::string msg = e.what();
    if (std::find(d.errors.begin(), d.errors.end(), msg) == d.errors.end() &&
        msg.find("cascade config: ") != 0) {
      d.errors.push_back(msg);
    }
  }
  return d;
}

// ---------------------------------------------------------------------------

std::string_view split_name(SplitName s) {
  switch (s) {
    case SplitName::kTrain:
      return "train";
    case SplitName::kValidation:
      return "valid";
    case SplitName::kTest:
      return "test";
  }
  return "train";
}

LabelArtifacts make_labels(std::span<const synthlog::EngagementRecord> log,
                           std::span<const synthlog::RelevanceJudgment> judgments,
                           const synthlog::Corpus& corpus, const labelgen::LabelConfig& config) {
  config.validate();
  LabelArtifacts a;
  a.weights = config.action_weights.empty()
                  ? labelgen::default_weights(labelgen::log_volumes(log))
                  : config.action_weights;
  const auto eng = labelgen::engagement_instances(log, a.weights, config);
  const auto pruned = labelgen::flatten(labelgen::prune_groups(labelgen::group_instances(eng), config));
  a.engagement = labelgen::split_dataset(pruned, config.split_fractions, config.seed,
                                         config.split_unit);
  std::vector<labelgen::LabeledInstance> rel;
  rel.reserve(judgments.size());
  for (const auto& jd : judgments) rel.push_back(labelgen::average_judgment(jd));
  a.relevance = labelgen::split_dataset(rel, config.split_fractions, mix_seed(config.seed, 1),
                                        labelgen::SplitUnit::kQuery);

  a.engagement_cuts = config.discretize_cuts.value_or(labelgen::quartile_cuts(a.engagement.train));
  a.relevance_cuts = config.discretize_cuts.value_or(labelgen::quartile_cuts(a.relevance.train));
  for (auto* split : {&a.engagement.train, &a.engagement.validation, &a.engagement.test}) {
    for (auto& i : *split) i.ordinal_label = labelgen::discretize(i.label, a.engagement_cuts);
  }
  for (auto* split : {&a.relevance.train, &a.relevance.validation, &a.relevance.test}) {
    for (auto& i : *split) i.ordinal_label = labelgen::discretize(i.label, a.relevance_cuts);
  }

  std::set<GroupKey> train_groups, test_groups;
  for (const auto& i : a.engagement.train) train_groups.insert(i.group());
  for (const auto& i : a.engagement.test) test_groups.insert(i.group());
  a.navboost = featurize::build_navboost(log, corpus.queries, corpus.segments, {}, &train_groups);
  std::vector<std::set<GroupKey>> others(kNavboostFolds, train_groups);
  for (const auto& g : train_groups) {
    const auto f = static_cast<std::size_t>(mix_seed(config.seed, std::hash<GroupKey>{}(g)) %
                                            kNavboostFolds);
    a.fold_of[g] = f;
    others[f].erase(g);
  }
  for (const auto& allowed : others) {
    a.train_folds.push_back(
        featurize::build_navboost(log, corpus.queries, corpus.segments, {}, &allowed));
  }
  for (const auto& r : log) {
    if (test_groups.contains(r.group())) a.holdout.push_back(r);
  }
  return a;
}

void write_labels(const fs::path& dir, const LabelArtifacts& labels,
                  const synthlog::Corpus& corpus, const labelgen::LabelConfig& config) {
  fs::create_directories(dir);
  const auto schema = featurize::FeatureSchema::standard();
  const featurize::Featurizer featurizer(corpus.pins, labels.navboost, schema);
  auto to_rows = [](const data::Dataset& ds) {
    std::vector<featurize::FeatureRow> rows;
    rows.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto r = ds.row(i);
      rows.push_back({ds.groups[i].query, ds.groups[i].segment, ds.pins[i], {r.begin(), r.end()}});
    }
    return rows;
  };
  auto write_split = [&](labelgen::Source source, SplitName split,
                         const std::vector<labelgen::LabeledInstance>& instances) {
    auto sorted = instances;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.group() < b.group(); });
    std::vector<featurize::FeatureRow> rows;
    const bool cross_fit = source == labelgen::Source::kEngagement && split == SplitName::kTrain &&
                           labels.train_folds.size() == kNavboostFolds;
    if (!cross_fit) {
      rows = to_rows(data::build_dataset(sorted, corpus, featurizer));
    } else {
      std::vector<std::vector<featurize::FeatureRow>> per_fold;
      for (std::size_t f = 0; f < kNavboostFolds; ++f) {
        std::vector<labelgen::LabeledInstance> subset;
        for (std::size_t i = 0; i < sorted.size(); ++i) {
          if (labels.fold_of.at(sorted[i].group()) == f) subset.push_back(sorted[i]);
        }
        const featurize::Featurizer fold_featurizer(corpus.pins, labels.train_folds[f], schema);
        per_fold.push_back(to_rows(data::build_dataset(subset, corpus, fold_featurizer)));
      }
      std::vector<std::size_t> next(kNavboostFolds, 0);
      for (const auto& inst : sorted) {
        const auto f = labels.fold_of.at(inst.group());
        rows.push_back(std::move(per_fold[f][next[f]++]));
      }
    }
    fs::create_directories(dir / labelgen::source_name(source));
    labelgen::write_instances(sorted, dir / instances_file(source, split));
    featurize::write_feature_rows(rows, dir / features_file(source, split));
  };
  using labelgen::Source;
  write_split(Source::kEngagement, SplitName::kTrain, labels.engagement.train);
  write_split(Source::kEngagement, SplitName::kValidation, labels.engagement.validation);
  write_split(Source::kEngagement, SplitName::kTest, labels.engagement.test);
  write_split(Source::kRelevance, SplitName::kTrain, labels.relevance.train);
  write_split(Source::kRelevance, SplitName::kValidation, labels.relevance.validation);
  write_split(Source::kRelevance, SplitName::kTest, labels.relevance.test);

  write_json(dir / "schema.json", schema.to_json());
  write_json(dir / "navboost.json", labels.navboost.to_json());
  synthlog::write_log(labels.holdout, dir / "holdout.jsonl");
  Json weights = Json::object();
  for (const auto& [a, w] : labels.weights) weights[std::string(action_name(a))] = w;
  write_json(dir / "meta.json", Json{{"action_weights", weights},
                                     {"engagement_cuts", labels.engagement_cuts},
                                     {"relevance_cuts", labels.relevance_cuts},
                                     {"label_config", labelgen::to_json(config)}});
}

std::vector<labelgen::LabeledInstance> load_instances(const fs::path& dir, labelgen::Source source,
                                                      SplitName split) {
  return labelgen::read_instances(dir / instances_file(source, split));
}

data::Dataset load_dataset(const fs::path& dir, labelgen::Source source, SplitName split) {
  const auto schema = featurize::FeatureSchema::from_json(read_json(dir / "schema.json"));
  const auto instances = load_instances(dir, source, split);
  const auto rows = featurize::read_feature_rows(dir / features_file(source, split));
  if (rows.size() != instances.size()) {
    throw DataError("feature rows and instances differ in count for " +
                    instances_file(source, split));
  }
  data::Dataset d;
  d.feature_names = schema.names();
  d.schema_id = schema.schema_id();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& inst = instances[i];
    if (rows[i].pin_id != inst.pin_id || rows[i].query_id != inst.query_id) {
      throw DataError("feature row " + std::to_string(i + 1) + " does not match its instance");
    }
    d.add(rows[i].values, inst.label, inst.ordinal_label, inst.group(), inst.pin_id);
  }
  return d;
}

models::RankModel train_model(ModelKind kind, const data::Dataset& data, std::size_t max_pairs,
                              const models::TrainParams& params, const RuleConfig& rule) {
  switch (kind) {
    case ModelKind::kGbdt:
      return models::train_gbdt(data, params);
    case ModelKind::kDnn:
      return models::train_dnn(data, params);
    case ModelKind::kCnn:
      return models::train_cnn(data, params);
    case ModelKind::kRule:
      return models::rule_model(
          data.feature_names,
          models::make_rule(data.feature_names, rule.weights, rule.fresh_boost, rule.local_boost));
    default:
      break;
  }
  const auto pairs = data::build_pairs(data, max_pairs, params.seed);
  if (kind == ModelKind::kGbrt) return models::train_gbrt(data, pairs, params);
  if (kind == ModelKind::kRankSvm) return models::train_ranksvm(data, pairs, params);
  return models::train_ranknet(data, pairs, params);
}

std::vector<RankedList> rank_dataset(const models::Scorer& model, const data::Dataset& data) {
  const auto scores = models::score_rows(model, data);
  std::vector<RankedList> out;
  for (const auto& [begin, end] : data.group_ranges()) {
    RankedList list;
    list.query_id = data.groups[begin].query;
    list.segment_id = data.groups[begin].segment;
    list.stages = {"model"};
    for (std::size_t i = begin; i < end; ++i) {
      list.entries.push_back({data.pins[i], scores[i], {scores[i]}});
    }
    sort_entries(list.entries);
    list.counts = {end - begin, end - begin};
    list.scored = {end - begin};
    out.push_back(std::move(list));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::map<GroupKey, evalkit::LabelMap> dataset_labels(const data::Dataset& d) {
  std::map<GroupKey, evalkit::LabelMap> out;
  for (std::size_t i = 0; i < d.size(); ++i) out[d.groups[i]][d.pins[i]] = d.labels[i];
  return out;
}

/// NDCG^e and NDCG^r of a model on the two test sets.
evalkit::EvalReport offline_report(const std::string& name, const models::Scorer& model,
                                   const data::Dataset& eng, const data::Dataset& rel,
                                   const EvalConfig& eval) {
  evalkit::EvalReport r;
  r.name = name;
  const auto eng_lists = rank_dataset(model, eng);
  const auto rel_lists = rank_dataset(model, rel);
  const auto eng_labels = dataset_labels(eng);
  const auto rel_labels = dataset_labels(rel);
  for (const auto& l : eng_lists) r.queries.push_back(l.group());
  for (const auto& l : rel_lists) r.queries.push_back(l.group());
  for (auto p : eval.ndcg_at) {
    evalkit::add_ndcg(r, "ndcg_e", evalkit::ndcg_summary(eng_lists, eng_labels, p));
    evalkit::add_ndcg(r, "ndcg_r", evalkit::ndcg_summary(rel_lists, rel_labels, p));
  }
  return r;
}

/// One row per evaluated model, one column per metric.
void write_summary_csv(const std::filesystem::path& path, const Json& summary) {
  std::map<std::string, Json> rows;
  auto take = [&](const std::string& section, const std::string& prefix) {
    if (!summary.contains(section)) return;
    for (const auto& [name, entry] : summary.at(section).items()) {
      if (entry.is_object() && entry.contains("metrics")) rows[prefix + name] = entry.at("metrics");
    }
  };
  take("offline", "");
  take("lightweight", "");
  take("cascade", "cascade_");
  std::set<std::string> columns;
  for (const auto& [name, m] : rows) {
    for (const auto& [k, v] : m.items()) columns.insert(k);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "model";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  char buf[32];
  for (const auto& [name, m] : rows) {
    out << name;
    for (const auto& c : columns) {
      out << ',';
      if (m.contains(c) && m.at(c).is_number()) {
        std::snprintf(buf, sizeof buf, "%.6f", m.at(c).get<double>());
        out << buf;
      }
    }
    out << '\n';
  }
}

Json metrics_json(const evalkit::EvalReport& r) {
  return Json{{"metrics", r.metrics}, {"counts", r.counts}};
}

template <typename F>
auto run_stage(const std::string& name, std::ostream& log, F&& f) -> decltype(f()) {
  log << "[" << name << "]" << std::endl;
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError("stage '" + name + "': " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError("stage '" + name + "': " + e.what());
  } catch (const Error& e) {
    throw DataError("stage '" + name + "': " + e.what());
  } catch (const std::exception& e) {
    throw DataError("stage '" + name + "': " + e.what());
  }
}

struct Trained {
  std::map<std::string, std::shared_ptr<const models::Scorer>> by_name;
};

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
  return v[idx];
}

}  // namespace

void run_reproduce(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  fs::create_directories(out);
  Json summary;
  summary["seed"] = config.seed;

  const auto corpus = run_stage("gen", log, [&] {
    auto c = synthlog::generate_corpus(config.corpus);
    synthlog::save_corpus(c, out / "corpus");
    return c;
  });

  std::vector<synthlog::EngagementRecord> records;
  std::vector<synthlog::RelevanceJudgment> judgments;
  run_stage("simlog", log, [&] {
    records = synthlog::simulate_log(corpus, config.sim);
    judgments = synthlog::simulate_judgments(corpus, config.judgments);
    synthlog::write_log(records, out / "log.jsonl");
    synthlog::write_judgments(judgments, out / "judgments.jsonl");
  });

  const auto labels = run_stage("labels", log, [&] {
    auto a = make_labels(records, judgments, corpus, config.labels);
    write_labels(out / "labels", a, corpus, config.labels);
    return a;
  });
  using labelgen::Source;
  const fs::path label_dir = out / "labels";
  const auto eng_train = load_dataset(label_dir, Source::kEngagement, SplitName::kTrain);
  const auto eng_val = load_dataset(label_dir, Source::kEngagement, SplitName::kValidation);
  const auto eng_test = load_dataset(label_dir, Source::kEngagement, SplitName::kTest);
  const auto rel_train = load_dataset(label_dir, Source::kRelevance, SplitName::kTrain);
  const auto rel_val = load_dataset(label_dir, Source::kRelevance, SplitName::kValidation);
  const auto rel_test = load_dataset(label_dir, Source::kRelevance, SplitName::kTest);
  summary["data"] = {{"engagement", {{"train", eng_train.size()},
                                     {"validation", eng_val.size()},
                                     {"test", eng_test.size()}}},
                     {"relevance", {{"train", rel_train.size()},
                                    {"validation", rel_val.size()},
                                    {"test", rel_test.size()}}},
                     {"holdout_records", labels.holdout.size()},
                     {"engagement_cuts", labels.engagement_cuts},
                     {"relevance_cuts", labels.relevance_cuts}};

  const auto schema = featurize::FeatureSchema::standard();
  const auto& light_names = schema.subset(featurize::kLightweightSubset);
  const std::size_t max_pairs = config.labels.max_pairs_per_group;
  Trained trained;
  auto keep = [&](const std::string& name, auto model) {
    ensemble::save_scorer(model, out / "models" / (name + ".json"));
    trained.by_name[name] = std::make_shared<decltype(model)>(std::move(model));
  };

  run_stage("train", log, [&] {
    for (auto kind : kTrainable) {
      const auto& params = config.models.at(kind);
      const std::string kn(models::kind_name(kind));
      log << "  " << kn << std::endl;
      keep(kn + "_engagement", train_model(kind, eng_train, max_pairs, params));
      keep(kn + "_relevance", train_model(kind, rel_train, max_pairs, params));
    }
    const auto light = eng_train.select_features(light_names);
    keep("ranksvm_light",
         train_model(ModelKind::kRankSvm, light, max_pairs, config.models.at(ModelKind::kRankSvm)));
    keep("rule_light", train_model(ModelKind::kRule, light, max_pairs, {}, config.rule));
  });

  run_stage("stack", log, [&] {
    auto eng = std::dynamic_pointer_cast<const models::RankModel>(trained.by_name.at("gbrt_engagement"));
    auto rel = std::dynamic_pointer_cast<const models::RankModel>(trained.by_name.at("gbrt_relevance"));
    std::optional<std::pair<ensemble::ZNorm, ensemble::ZNorm>> norm;
    if (config.stacking.znorm) {
      norm = std::make_pair(ensemble::ZNorm::fit(models::score_rows(*eng, eng_val)),
                            ensemble::ZNorm::fit(models::score_rows(*rel, eng_val)));
    }
    const auto sel = ensemble::select_gamma(
        config.stacking.gamma_grid,
        [&](double g) {
          const ensemble::StackedModel m(eng, rel, g, norm);
          const auto e = evalkit::ndcg_summary(rank_dataset(m, eng_val), dataset_labels(eng_val), 10);
          const auto r = evalkit::ndcg_summary(rank_dataset(m, rel_val), dataset_labels(rel_val), 10);
          return std::make_pair(e.mean, r.mean);
        },
        config.stacking.blend);
    Json table = Json::array();
    for (const auto& row : sel.table) {
      table.push_back({{"gamma", row.gamma},
                       {"ndcg_e@10", row.ndcg_e},
                       {"ndcg_r@10", row.ndcg_r},
                       {"objective", row.objective}});
    }
    keep("stacked_full", ensemble::StackedModel(eng, rel, sel.gamma, norm));

    const auto eng_pairs = data::build_pairs(eng_train, max_pairs, config.labels.seed);
    const auto rel_pairs = data::build_pairs(rel_train, max_pairs, config.labels.seed);
    auto stacked = ensemble::train_stacked_gbrt(eng_train, eng_pairs, rel_train, rel_pairs,
                                                sel.gamma, config.models.at(ModelKind::kGbrt));
    const auto per_source = ensemble::trees_per_source(stacked);
    keep("stacked_gbrt_full", std::move(stacked));
    summary["stacking"] = {{"gamma", sel.gamma}, {"gamma_table", table},
                           {"trees_per_source", per_source}};
  });

  run_stage("eval-offline", log, [&] {
    Json offline = Json::object();
    std::map<std::string, evalkit::EvalReport> reports;
    for (const auto& [name, model] : trained.by_name) {
      if (name == "ranksvm_light" || name == "rule_light") continue;
      reports[name] = offline_report(name, *model, eng_test, rel_test, config.eval);
      reports[name].write(out / "eval" / "offline" / name);
      offline[name] = metrics_json(reports[name]);
    }
    summary["offline"] = offline;
    Json vs_baseline = Json::object();
    for (const auto& [name, r] : reports) {
      vs_baseline[name] = evalkit::deltas_to_json(evalkit::compare(reports.at("ranksvm_engagement"), r));
    }
    summary["full_vs_ranksvm"] = vs_baseline;

    const auto light_test = eng_test.select_features(light_names);
    const auto light_rel = rel_test.select_features(light_names);
    const auto rule = offline_report("rule_light", *trained.by_name.at("rule_light"), light_test,
                                     light_rel, config.eval);
    const auto svm = offline_report("ranksvm_light", *trained.by_name.at("ranksvm_light"),
                                    light_test, light_rel, config.eval);
    summary["lightweight"] = {{"rule_light", metrics_json(rule)},
                              {"ranksvm_light", metrics_json(svm)},
                              {"ranksvm_vs_rule", evalkit::deltas_to_json(evalkit::compare(rule, svm))}};
  });

  // Cascade over each held-out group's candidate pool.
  run_stage("rank", log, [&] {
    const featurize::Featurizer featurizer(corpus.pins, labels.navboost, schema);
    cascade::ModelMap models;
    for (const auto& st : config.cascade.stages) {
      if (st.model != cascade::kIdentityModel) models[st.model] = trained.by_name.at(st.model);
    }
    auto identity_cfg = config.cascade;
    identity_cfg.rerank_policy = {};
    const cascade::Cascade with_policy(config.cascade, featurizer, models);
    const cascade::Cascade identity(identity_cfg, featurizer, models);

    std::set<GroupKey> groups;
    for (const auto& g : eng_test.groups) groups.insert(g);
    std::vector<RankedList> lists_policy, lists_identity;
    for (const auto& g : groups) {
      const auto qi = corpus.query_index(g.query);
      const auto& seg = corpus.segments[corpus.segment_index(g.segment)];
      std::vector<const synthlog::Pin*> cands;
      for (auto pi : corpus.pools[qi]) cands.push_back(&corpus.pins[pi]);
      lists_policy.push_back(with_policy.run(corpus.queries[qi], seg, cands));
      lists_identity.push_back(identity.run(corpus.queries[qi], seg, cands));
    }
    for (const auto& [file, lists] : {std::pair{"ranked.jsonl", &lists_policy},
                                      std::pair{"ranked_identity.jsonl", &lists_identity}}) {
      std::ofstream f(out / file, std::ios::binary);
      for (const auto& l : *lists) f << to_json(l, false).dump() << '\n';
    }

    const auto eng_labels = dataset_labels(eng_test);
    const auto rel_labels = dataset_labels(rel_test);
    auto report = [&](const std::string& name, const std::vector<RankedList>& lists) {
      evalkit::EvalReport r;
      r.name = name;
      for (const auto& l : lists) r.queries.push_back(l.group());
      for (auto p : config.eval.ndcg_at) {
        evalkit::add_ndcg(r, "ndcg_e", evalkit::ndcg_summary(lists, eng_labels, p));
        evalkit::add_ndcg(r, "ndcg_r", evalkit::ndcg_summary(lists, rel_labels, p, true));
      }
      evalkit::add_replay(r, evalkit::replay_metrics(lists, labels.holdout, config.eval.k));
      evalkit::add_ratios(r, evalkit::freshness_localness(lists, corpus, labels.holdout,
                                                          config.eval.k));
      r.write(out / "eval" / "cascade" / name);
      return r;
    };
    const auto rp = report("rerank", lists_policy);
    const auto ri = report("identity", lists_identity);
    summary["cascade"] = {{"rerank", metrics_json(rp)},
                          {"identity", metrics_json(ri)},
                          {"rerank_vs_identity", evalkit::deltas_to_json(evalkit::compare(ri, rp))}};
  });

  if (config.bench.enabled) {
    run_stage("bench", log, [&] {
      const auto& b = config.bench;
      auto params = config.corpus;
      params.seed = mix_seed(config.seed, 50);
      params.n_pins = b.n_pins;
      params.pool_size = b.n_pins;
      const auto big = synthlog::generate_corpus(params);
      auto sim = config.sim;
      sim.seed = mix_seed(config.seed, 51);
      sim.n_sessions = b.sessions;
      const auto big_log = synthlog::simulate_log(big, sim);
      const auto nav = featurize::build_navboost(big_log, big.queries, big.segments, {});
      const featurize::Featurizer featurizer(big.pins, nav, schema);

      std::vector<const synthlog::Pin*> all;
      for (const auto& p : big.pins) all.push_back(&p);
      const auto& full = trained.by_name.at("stacked_full");

      // Early-exit threshold from full-model scores over a fixed sample.
      std::vector<double> sample;
      const auto full_cols = schema.subset_columns(featurize::kFullSubset);
      std::vector<double> x(full_cols.size());
      for (std::size_t q = 0; q < std::min<std::size_t>(5, big.queries.size()); ++q) {
        const auto ctx = featurizer.prepare(big.queries[q], big.segments[q % big.segments.size()]);
        for (std::size_t i = q; i < big.pins.size(); i += 97) {
          featurizer.compute(ctx, big.pins[i], full_cols, x);
          sample.push_back(full->score(x));
        }
      }
      const double threshold = quantile(sample, b.early_exit_quantile);

      auto bench_cascade = [&](const std::string& light) {
        auto cfg = cascade::default_cascade(light, "stacked_full");
        cfg.stages[1].early_exit = cascade::EarlyExit{b.chunk_size, threshold, b.early_exit_target};
        cfg.rerank_policy = config.cascade.rerank_policy;
        cascade::ModelMap m{{light, trained.by_name.at(light)}, {"stacked_full", full}};
        return cascade::Cascade(cfg, featurizer, m);
      };
      Json simulated = Json::object();
      for (const std::string light : {"rule_light", "ranksvm_light"}) {
        const auto c = bench_cascade(light);
        std::vector<RankedList> lists;
        for (std::size_t q = 0; q < std::min(b.simulated_queries, big.queries.size()); ++q) {
          lists.push_back(c.run(big.queries[q], big.segments[q % big.segments.size()], all));
        }
        auto h = cascade::simulated_latency(lists, b.cost);
        Json hj = h.to_json();
        std::size_t full_scored = 0;
        for (const auto& l : lists) full_scored += l.scored.at(1);
        hj["full_stage_scored"] = full_scored;
        simulated[light] = hj;
      }
      simulated["early_exit_threshold"] = threshold;
      summary["latency_simulated"] = simulated;

      // Wall clock: cascade with lightweight filter vs full model on all candidates.
      std::vector<cascade::WorkItem> work;
      for (std::size_t q = 0; q < std::min(b.wall_queries, big.queries.size()); ++q) {
        work.push_back({&big.queries[q], &big.segments[q % big.segments.size()], all});
      }
      auto funnel = cascade::default_cascade("ranksvm_light", "stacked_full");
      cascade::CascadeConfig full_only;
      full_only.stages = {{"full", "stacked_full", "full", 100, 0.0, std::nullopt}};
      cascade::ModelMap m{{"ranksvm_light", trained.by_name.at("ranksvm_light")},
                          {"stacked_full", full}};
      const auto lat_funnel = cascade::measure_latency(cascade::Cascade(funnel, featurizer, m), work,
                                                       b.reps, b.warmup);
      const auto lat_full = cascade::measure_latency(cascade::Cascade(full_only, featurizer, m),
                                                     work, b.reps, b.warmup);
      write_json(out / "latency.json",
                 Json{{"cascade", lat_funnel.to_json()},
                      {"full_on_all", lat_full.to_json()},
                      {"speedup", lat_funnel.total_ms > 0 ? lat_full.total_ms / lat_funnel.total_ms : 0.0}});
    });
  }

  write_json(out / "summary.json", summary);
  write_summary_csv(out / "summary.csv", summary);
  log << "[done] " << (out / "summary.json").string() << std::endl;
}

}  // namespace imgrank::experiment
