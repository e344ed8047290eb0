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

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

#include "imgrank/cascade.hpp"
#include "imgrank/ensemble.hpp"
#include "imgrank/evalkit.hpp"
#include "imgrank/experiment.hpp"

namespace fs = std::filesystem;
using namespace imgrank;

namespace {

struct Common {
  std::uint64_t seed = 7;
  bool seed_set = false;
  std::string out;
  std::string config;
  int jobs = 1;
};

void add_common(CLI::App* app, Common& c, bool out_required = true) {
  app->add_option("--seed", c.seed, "Random seed");
  auto* out = app->add_option("--out", c.out, "Output path");
  if (out_required) out->required();
  app->add_option("--config", c.config, "Config file");
  app->add_option("--jobs", c.jobs, "Worker cap")->check(CLI::PositiveNumber);
}

/// --config, else IMGRANK_CONFIG.
std::string config_path(const Common& c) {
  if (!c.config.empty()) return c.config;
  if (const char* env = std::getenv("IMGRANK_CONFIG")) return env;
  return {};
}

Json read_json_file(const fs::path& path, bool config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (config) throw ConfigError("cannot read " + path.string());
    throw DataError("cannot read " + path.string());
  }
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    if (config) throw ConfigError(path.string() + ": " + e.what());
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<RankedList> read_ranked(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<RankedList> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(ranked_list_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_ranked(const fs::path& path, std::span<const RankedList> lists, bool timings) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& l : lists) out << to_json(l, timings).dump() << '\n';
}

std::vector<GroupKey> read_query_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<GroupKey> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = Json::parse(line);
      out.push_back({QueryId{j.at("query_id").get<std::int64_t>()},
                     SegmentId{j.at("segment_id").get<std::int64_t>()}});
    } catch (const Json::exception& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  return out;
}

featurize::NavboostTable load_navboost(const std::string& path, const fs::path& base) {
  if (path.empty()) return {};
  fs::path p(path);
  if (p.is_relative()) p = base / p;
  return featurize::NavboostTable::from_json(read_json_file(p, false));
}

const synthlog::UserSegment& segment_of(const synthlog::Corpus& corpus, SegmentId id,
                                        synthlog::UserSegment& neutral) {
  if (id == kNeutralSegment) {
    neutral = synthlog::UserSegment::neutral(corpus.params.n_categories, corpus.params.latent_dim);
    return neutral;
  }
  return corpus.segments[corpus.segment_index(id)];
}

struct HyperFlags {
  std::optional<std::size_t> trees, min_leaf, epochs, batch_size, max_pairs;
  std::optional<double> learning_rate, margin, c, step;
  std::optional<int> max_depth;
  std::string params_file;

  void add(CLI::App* app) {
    app->add_option("--trees", trees);
    app->add_option("--learning-rate", learning_rate);
    app->add_option("--max-depth", max_depth);
    app->add_option("--min-leaf", min_leaf);
    app->add_option("--margin", margin);
    app->add_option("--c", c);
    app->add_option("--epochs", epochs);
    app->add_option("--step", step);
    app->add_option("--batch-size", batch_size);
    app->add_option("--max-pairs", max_pairs, "Preference pairs per group");
    app->add_option("--params", params_file, "Hyperparameter JSON");
  }

  models::TrainParams apply(models::TrainParams p) const {
    if (!params_file.empty()) p = models::train_params_from_json(read_json_file(params_file, true), p);
    if (trees) p.trees = *trees;
    if (learning_rate) p.learning_rate = *learning_rate;
    if (max_depth) p.max_depth = *max_depth;
    if (min_leaf) p.min_leaf = *min_leaf;
    if (margin) p.margin = *margin;
    if (c) p.c = *c;
    if (epochs) p.epochs = *epochs;
    if (step) p.step = *step;
    if (batch_size) p.batch_size = *batch_size;
    return p;
  }
};

experiment::SplitName parse_split(const std::string& s) {
  if (s == "train") return experiment::SplitName::kTrain;
  if (s == "valid" || s == "validation") return experiment::SplitName::kValidation;
  if (s == "test") return experiment::SplitName::kTest;
  throw ConfigError("unknown split '" + s + "' (valid: train, valid, test)");
}

data::Dataset with_subset(data::Dataset d, const std::string& subset) {
  if (subset.empty() || subset == featurize::kFullSubset) return d;
  return d.select_features(featurize::FeatureSchema::standard().subset(subset));
}

int run(int argc, char** argv) {
  CLI::App app{"Image search ranking toolkit"};
  app.require_subcommand(1);
  Common common;

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus");
  add_common(gen, common);
  synthlog::CorpusParams corpus_params;
  gen->add_option("--pins", corpus_params.n_pins);
  gen->add_option("--queries", corpus_params.n_queries);
  gen->add_option("--segments", corpus_params.n_segments);
  gen->add_option("--pool-size", corpus_params.pool_size);
  gen->add_option("--fresh-fraction", corpus_params.fresh_fraction);
  gen->callback([&] {
    auto p = corpus_params;
    if (auto path = config_path(common); !path.empty()) {
      const auto cfg = experiment::load_experiment(path);
      p = cfg.corpus;
      for (auto* opt : {"--pins", "--queries", "--segments", "--pool-size", "--fresh-fraction"}) {
        if (gen->count(opt) == 0) continue;
        if (std::string(opt) == "--pins") p.n_pins = corpus_params.n_pins;
        if (std::string(opt) == "--queries") p.n_queries = corpus_params.n_queries;
        if (std::string(opt) == "--segments") p.n_segments = corpus_params.n_segments;
        if (std::string(opt) == "--pool-size") p.pool_size = corpus_params.pool_size;
        if (std::string(opt) == "--fresh-fraction") p.fresh_fraction = corpus_params.fresh_fraction;
      }
    }
    if (gen->count("--seed") > 0) p.seed = common.seed;
    if (gen->count("--pool-size") == 0 && gen->count("--pins") > 0) {
      p.pool_size = std::min(p.pool_size, p.n_pins);
    }
    p.validate();
    synthlog::save_corpus(synthlog::generate_corpus(p), common.out);
  });

  // simlog
  auto* simlog = app.add_subcommand("simlog", "Simulate an engagement log");
  add_common(simlog, common);
  std::string corpus_dir, judgments_out;
  synthlog::SimParams sim;
  synthlog::JudgmentParams judg;
  simlog->add_option("--corpus", corpus_dir)->required();
  simlog->add_option("--sessions", sim.n_sessions);
  simlog->add_option("--pos-bias", sim.position_bias);
  simlog->add_option("--page-size", sim.page_size);
  simlog->add_option("--judgments", judgments_out, "Also write relevance judgments here");
  simlog->add_option("--raters", judg.raters);
  simlog->callback([&] {
    const auto corpus = synthlog::load_corpus(corpus_dir);
    auto s = sim;
    s.seed = mix_seed(common.seed, 1);
    if (s.position_bias < 0.0) throw ConfigError("--pos-bias must be >= 0");
    synthlog::write_log(synthlog::simulate_log(corpus, s), fs::path(common.out));
    if (!judgments_out.empty()) {
      auto jp = judg;
      jp.seed = mix_seed(common.seed, 2);
      synthlog::write_judgments(synthlog::simulate_judgments(corpus, jp), judgments_out);
    }
  });

  // labels
  auto* labels = app.add_subcommand("labels", "Build labels, splits and features");
  add_common(labels, common);
  std::string log_file, judgments_file;
  labels->add_option("--log", log_file)->required();
  labels->add_option("--judgments", judgments_file)->required();
  labels->add_option("--corpus", corpus_dir)->required();
  labels->callback([&] {
    Json cfg = Json::object();
    if (auto path = config_path(common); !path.empty()) {
      cfg = read_json_file(path, true);
      if (cfg.contains("labels")) cfg = cfg.at("labels");
    }
    if (labels->count("--seed") > 0 || !cfg.contains("seed")) cfg["seed"] = common.seed;
    const auto config = labelgen::label_config_from_json(cfg);
    const auto corpus = synthlog::load_corpus(corpus_dir);
    const auto log = synthlog::read_log(fs::path(log_file));
    const auto judgments = synthlog::read_judgments(judgments_file);
    const auto art = experiment::make_labels(log, judgments, corpus, config);
    experiment::write_labels(common.out, art, corpus, config);
  });

  // train
  auto* train = app.add_subcommand("train", "Train one model");
  add_common(train, common);
  std::string kind_name = "gbrt", data_dir, source_name = "engagement", split_name = "train",
              subset;
  HyperFlags hyper;
  train->add_option("--model", kind_name)->required();
  train->add_option("--data", data_dir)->required();
  train->add_option("--source", source_name);
  train->add_option("--split", split_name);
  train->add_option("--subset", subset, "Feature subset (lightweight, full, rerank)");
  hyper.add(train);
  train->callback([&] {
    const auto kind = models::parse_kind(kind_name);
    auto params = hyper.apply(models::default_params(kind));
    params.seed = common.seed;
    const auto ds = with_subset(experiment::load_dataset(data_dir, labelgen::parse_source(source_name),
                                                         parse_split(split_name)),
                                subset);
    const auto model = experiment::train_model(kind, ds, hyper.max_pairs.value_or(100), params);
    model.save(common.out);
  });

  // stack
  auto* stack = app.add_subcommand("stack", "Combine engagement and relevance models");
  add_common(stack, common);
  std::string eng_file, rel_file;
  double gamma = 0.5;
  stack->add_option("--eng", eng_file)->required();
  stack->add_option("--rel", rel_file)->required();
  stack->add_option("--gamma", gamma)->required();
  stack->callback([&] {
    auto eng = std::make_shared<models::RankModel>(models::RankModel::load(eng_file));
    auto rel = std::make_shared<models::RankModel>(models::RankModel::load(rel_file));
    ensemble::save_scorer(ensemble::StackedModel(eng, rel, gamma), common.out);
  });

  // stack-train
  auto* stack_train = app.add_subcommand("stack-train", "Boost on the combined objective");
  add_common(stack_train, common);
  bool pointwise = false;
  stack_train->add_option("--data", data_dir)->required();
  stack_train->add_option("--gamma", gamma)->required();
  stack_train->add_option("--subset", subset);
  stack_train->add_flag("--pointwise-relevance", pointwise);
  HyperFlags stack_hyper;
  stack_hyper.add(stack_train);
  stack_train->callback([&] {
    auto params = stack_hyper.apply(models::default_params(models::ModelKind::kGbrt));
    params.seed = common.seed;
    const auto eng = with_subset(experiment::load_dataset(data_dir, labelgen::Source::kEngagement,
                                                          experiment::SplitName::kTrain),
                                 subset);
    const auto rel = with_subset(experiment::load_dataset(data_dir, labelgen::Source::kRelevance,
                                                          experiment::SplitName::kTrain),
                                 subset);
    const auto max_pairs = stack_hyper.max_pairs.value_or(100);
    const auto ep = data::build_pairs(eng, max_pairs, common.seed);
    const auto rp = data::build_pairs(rel, max_pairs, common.seed);
    ensemble::train_stacked_gbrt(eng, ep, rel, rp, gamma, params, {pointwise}).save(common.out);
  });

  // rank
  auto* rank = app.add_subcommand("rank", "Run the cascade over queries");
  add_common(rank, common);
  std::string cascade_file, queries_file, navboost_file;
  rank->add_option("--cascade", cascade_file)->required();
  rank->add_option("--corpus", corpus_dir)->required();
  rank->add_option("--queries", queries_file)->required();
  rank->add_option("--navboost", navboost_file, "Overrides the cascade's navboost path");
  rank->callback([&] {
    const auto cfg = cascade::load_cascade_config(cascade_file);
    const auto schema = featurize::FeatureSchema::standard();
    cfg.validate(schema);
    const fs::path base = fs::path(cascade_file).parent_path();
    const auto corpus = synthlog::load_corpus(corpus_dir);
    const auto nav = navboost_file.empty() ? load_navboost(cfg.navboost, base)
                                           : load_navboost(navboost_file, fs::path{});
    const featurize::Featurizer featurizer(corpus.pins, nav, schema);
    const cascade::Cascade c(cfg, featurizer, cascade::load_models(cfg, base));
    std::vector<RankedList> lists;
    synthlog::UserSegment neutral;
    for (const auto& g : read_query_file(queries_file)) {
      const auto qi = corpus.query_index(g.query);
      std::vector<const synthlog::Pin*> cands;
      for (auto pi : corpus.pools[qi]) cands.push_back(&corpus.pins[pi]);
      lists.push_back(c.run(corpus.queries[qi], segment_of(corpus, g.segment, neutral), cands));
    }
    write_ranked(common.out, lists, false);
  });

  // rerank
  auto* rerank = app.add_subcommand("rerank", "Apply the rerank policy to ranked lists");
  add_common(rerank, common);
  std::string ranked_file;
  std::optional<double> fresh_w, local_w, div_w, min_fresh;
  std::optional<std::size_t> rerank_keep;
  rerank->add_option("--ranked", ranked_file)->required();
  rerank->add_option("--corpus", corpus_dir)->required();
  rerank->add_option("--cascade", cascade_file, "Source of the rerank model and policy");
  rerank->add_option("--navboost", navboost_file);
  rerank->add_option("--freshness", fresh_w);
  rerank->add_option("--localness", local_w);
  rerank->add_option("--diversity", div_w);
  rerank->add_option("--min-fresh-ratio", min_fresh);
  rerank->add_option("--keep-top", rerank_keep);
  rerank->callback([&] {
    const auto schema = featurize::FeatureSchema::standard();
    cascade::RerankPolicy policy;
    std::shared_ptr<const models::Scorer> model;
    std::size_t keep_top = 25;
    fs::path base;
    std::string nav_path = navboost_file;
    if (!cascade_file.empty()) {
      const auto cfg = cascade::load_cascade_config(cascade_file);
      cfg.validate(schema);
      base = fs::path(cascade_file).parent_path();
      policy = cfg.rerank_policy;
      if (nav_path.empty() && !cfg.navboost.empty()) nav_path = (base / cfg.navboost).string();
      const auto& last = cfg.stages.back();
      if (last.name == cascade::kRerankStage) {
        keep_top = last.keep_top;
        if (last.model != cascade::kIdentityModel) model = cascade::load_models(cfg, base).at(last.model);
      }
    }
    if (fresh_w) policy.freshness_weight = *fresh_w;
    if (local_w) policy.localness_weight = *local_w;
    if (div_w) policy.diversity_penalty = *div_w;
    if (min_fresh) policy.min_fresh_ratio = *min_fresh;
    if (rerank_keep) keep_top = *rerank_keep;
    const auto corpus = synthlog::load_corpus(corpus_dir);
    const auto nav = load_navboost(nav_path, fs::path{});
    const featurize::Featurizer featurizer(corpus.pins, nav, schema);
    const auto cols = schema.subset_columns(featurize::kRerankSubset);
    int div_col = -1;
    const auto& names = schema.subset(featurize::kRerankSubset);
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == featurize::feature_name(featurize::Feature::kDiversityPenalty)) {
        div_col = static_cast<int>(i);
      }
    }
    auto lists = read_ranked(ranked_file);
    synthlog::UserSegment neutral;
    for (auto& l : lists) {
      const auto& seg = segment_of(corpus, l.segment_id, neutral);
      const auto ctx = featurizer.prepare(corpus.queries[corpus.query_index(l.query_id)], seg);
      std::vector<cascade::RerankItem> items;
      for (const auto& e : l.entries) {
        cascade::RerankItem it;
        it.pin = &corpus.pins[corpus.pin_index(e.pin_id)];
        it.entry = e;
        it.features.resize(cols.size());
        featurizer.compute(ctx, *it.pin, cols, it.features);
        items.push_back(std::move(it));
      }
      l.entries = cascade::rerank(std::move(items), policy, model.get(), div_col, seg, keep_top);
      l.stages.push_back(std::string(cascade::kRerankStage));
      l.scored.push_back(l.counts.back());
      l.counts.push_back(l.entries.size());
      l.stage_ms.clear();
    }
    write_ranked(common.out, lists, false);
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate ranked lists");
  add_common(eval, common);
  std::string labels_dir, holdout_file, baseline_file, report_name = "run";
  std::size_t k = 25;
  std::vector<std::size_t> ndcg_at = {5, 10, 20};
  eval->add_option("--ranked", ranked_file)->required();
  eval->add_option("--labels", labels_dir)->required();
  eval->add_option("--holdout", holdout_file)->required();
  eval->add_option("--corpus", corpus_dir, "Enables freshness and localness ratios");
  eval->add_option("--k", k);
  eval->add_option("--ndcg-at", ndcg_at);
  eval->add_option("--name", report_name);
  eval->add_option("--baseline", baseline_file, "Report JSON to compare against");
  eval->callback([&] {
    if (k == 0) throw ConfigError("--k must be at least 1");
    const auto lists = read_ranked(ranked_file);
    const auto holdout = synthlog::read_log(fs::path(holdout_file));
    using labelgen::Source;
    using experiment::SplitName;
    const auto eng = evalkit::label_maps(
        experiment::load_instances(labels_dir, Source::kEngagement, SplitName::kTest), false);
    const auto rel = evalkit::label_maps(
        experiment::load_instances(labels_dir, Source::kRelevance, SplitName::kTest), true);
    evalkit::EvalReport r;
    r.name = report_name;
    for (const auto& l : lists) r.queries.push_back(l.group());
    for (auto p : ndcg_at) {
      evalkit::add_ndcg(r, "ndcg_e", evalkit::ndcg_summary(lists, eng, p));
      evalkit::add_ndcg(r, "ndcg_r", evalkit::ndcg_summary(lists, rel, p, true));
    }
    evalkit::add_replay(r, evalkit::replay_metrics(lists, holdout, k));
    if (!corpus_dir.empty()) {
      const auto corpus = synthlog::load_corpus(corpus_dir);
      evalkit::add_ratios(r, evalkit::freshness_localness(lists, corpus, holdout, k));
    }
    r.write(common.out);
    if (!baseline_file.empty()) {
      const auto base = evalkit::EvalReport::from_json(read_json_file(baseline_file, false));
      const auto deltas = evalkit::compare(base, r);
      write_json_file(fs::path(common.out) / "compare.json", evalkit::deltas_to_json(deltas));
      std::ofstream(fs::path(common.out) / "compare.csv") << evalkit::deltas_to_csv(deltas);
    }
    std::cout << r.to_csv();
  });

  // bench
  auto* bench = app.add_subcommand("bench", "Measure cascade latency");
  add_common(bench, common);
  std::size_t reps = 5, warmup = 3, n_queries = 5;
  bench->add_option("--cascade", cascade_file)->required();
  bench->add_option("--corpus", corpus_dir)->required();
  bench->add_option("--navboost", navboost_file);
  bench->add_option("--reps", reps)->check(CLI::PositiveNumber);
  bench->add_option("--warmup", warmup);
  bench->add_option("--queries", n_queries)->check(CLI::PositiveNumber);
  bench->callback([&] {
    const auto cfg = cascade::load_cascade_config(cascade_file);
    const auto schema = featurize::FeatureSchema::standard();
    cfg.validate(schema);
    const fs::path base = fs::path(cascade_file).parent_path();
    const auto corpus = synthlog::load_corpus(corpus_dir);
    const auto nav = navboost_file.empty() ? load_navboost(cfg.navboost, base)
                                           : load_navboost(navboost_file, fs::path{});
    const featurize::Featurizer featurizer(corpus.pins, nav, schema);
    const cascade::Cascade c(cfg, featurizer, cascade::load_models(cfg, base));
    std::vector<cascade::WorkItem> work;
    for (std::size_t q = 0; q < std::min(n_queries, corpus.queries.size()); ++q) {
      cascade::WorkItem w{&corpus.queries[q], &corpus.segments[q % corpus.segments.size()], {}};
      for (auto pi : corpus.pools[q]) w.candidates.push_back(&corpus.pins[pi]);
      work.push_back(std::move(w));
    }
    const auto h = cascade::measure_latency(c, work, reps, warmup);
    write_json_file(common.out, h.to_json());
    std::cout << h.to_json().dump(2) << '\n';
  });

  // reproduce
  auto* reproduce = app.add_subcommand("reproduce", "Run the full pipeline");
  add_common(reproduce, common);
  reproduce->callback([&] {
    const auto path = config_path(common);
    Json j = path.empty() ? experiment::default_experiment_json(common.seed)
                          : read_json_file(path, true);
    if (reproduce->count("--seed") > 0) j["seed"] = common.seed;
    const auto cfg = experiment::parse_experiment(j);
    experiment::run_reproduce(cfg, common.out, std::cerr);
  });

  // validate
  auto* validate = app.add_subcommand("validate", "Check an experiment config");
  add_common(validate, common, false);
  bool print_default = false;
  validate->add_flag("--print-default", print_default, "Print a default config and exit");
  validate->callback([&] {
    if (print_default) {
      std::cout << experiment::default_experiment_json(common.seed).dump(2) << '\n';
      return;
    }
    const auto path = config_path(common);
    if (path.empty()) throw ConfigError("validate needs --config or IMGRANK_CONFIG");
    Json j;
    experiment::Diagnostics d;
    try {
      j = read_json_file(path, true);
      d = experiment::validate_experiment(j);
    } catch (const ConfigError& e) {
      d.errors.push_back(e.what());
    }
    for (const auto& e : d.errors) std::cout << "error: " << e << '\n';
    for (const auto& u : d.unused_keys) std::cout << "unused key: " << u << '\n';
    if (d.ok()) std::cout << "ok\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
