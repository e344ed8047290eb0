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

// Acceptance checks, one PASS/FAIL line per criterion.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "imgrank/cascade.hpp"
#include "imgrank/ensemble.hpp"
#include "imgrank/evalkit.hpp"
#include "imgrank/experiment.hpp"
#include "imgrank/labelgen.hpp"
#include "imgrank/models.hpp"

namespace fs = std::filesystem;
using namespace imgrank;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

Json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("missing " + p.string());
  return Json::parse(in);
}

// ---------------------------------------------------------------------------

Outcome ndcg_oracle() {
  Outcome o;
  double worst = 0.0;
  std::size_t lists = 0;
  for (std::size_t n = 1; n <= 6; ++n) {
    std::vector<int> digits(n, 0);
    while (true) {
      std::vector<double> labels(digits.begin(), digits.end());
      auto sorted = labels;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t p = 1; p <= n; ++p) {
        double idcg = 0.0;
        auto perm = sorted;
        do {
          double d = 0.0;
          for (std::size_t r = 0; r < p; ++r) d += perm[r] / std::log2(static_cast<double>(r) + 2.0);
          idcg = std::max(idcg, d);
        } while (std::next_permutation(perm.begin(), perm.end()));
        double dcg = 0.0;
        for (std::size_t r = 0; r < p; ++r) dcg += labels[r] / std::log2(static_cast<double>(r) + 2.0);
        const auto got = evalkit::ndcg(labels, p);
        if (idcg == 0.0) {
          o.require(!got.has_value(), "zero IDCG list not excluded");
        } else {
          o.require(got.has_value(), "defined list returned no value");
          if (got) worst = std::max(worst, std::abs(*got - dcg / idcg));
        }
        ++lists;
      }
      std::size_t i = 0;
      while (i < n && ++digits[i] == 4) digits[i++] = 0;
      if (i == n) break;
    }
  }
  o.require(worst <= 1e-9, "max error " + fmt(worst));
  if (o.pass) o.detail = std::to_string(lists) + " lists, max error " + fmt(worst);
  return o;
}

Outcome label_invariants() {
  Outcome o;
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::int64_t> cnt(0, 6);
  labelgen::ActionWeights w = {{Action::kRepin, 1.0}, {Action::kClick, 0.4}, {Action::kCloseup, 0.1},
                               {Action::kLongclick, 0.6}, {Action::kHide, -1.0}};
  for (int t = 0; t < 2000; ++t) {
    ActionCounts a{}, b{}, sum{};
    for (std::size_t k = 0; k < kNumActions; ++k) {
      a[k] = cnt(rng);
      b[k] = cnt(rng);
      sum[k] = a[k] + b[k];
    }
    const double lhs = labelgen::aggregate_label(sum, w);
    const double rhs = labelgen::aggregate_label(a, w) + labelgen::aggregate_label(b, w);
    if (std::abs(lhs - rhs) > 1e-9) {
      o.require(false, "weighted sum not additive in counts");
      break;
    }
  }
  labelgen::LabelConfig c;
  for (std::int64_t pos = 0; pos < 100; pos += 7) {
    double prev = std::numeric_limits<double>::infinity();
    for (double age = c.tau; age < 2000.0; age += 13.0) {
      const double m = labelgen::normalization_multiplier(age, pos, c);
      if (!(m < prev)) o.require(false, "multiplier not decreasing in age at " + fmt(age));
      prev = m;
    }
  }
  for (double age : {1.0, 30.0, 90.0, 700.0}) {
    double prev = -1.0;
    for (std::int64_t pos = 0; pos < 200; ++pos) {
      const double m = labelgen::normalization_multiplier(age, pos, c);
      if (!(m > prev)) o.require(false, "multiplier not increasing in position");
      prev = m;
    }
  }
  std::uniform_int_distribution<int> size(1, 60);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  labelgen::Groups g;
  for (std::int64_t q = 0; q < 10000; ++q) {
    const int n = size(rng);
    const double rate = u(rng) * 0.4;
    for (int i = 0; i < n; ++i) {
      const double r = u(rng);
      labelgen::LabeledInstance inst;
      inst.query_id = QueryId{q};
      inst.segment_id = SegmentId{q % 5};
      inst.pin_id = PinId{i};
      inst.label = r < rate ? 0.5 + r : (r < 0.9 ? 0.0 : -0.3);
      g[inst.group()].push_back(inst);
    }
  }
  const auto pruned = labelgen::prune_groups(g, c);
  for (const auto& [key, group] : pruned) {
    std::size_t pos = 0, neg = 0;
    for (const auto& i : group) (i.label > 0.0 ? pos : neg)++;
    if (pos < 1 || neg > c.neg_cap) {
      o.require(false, "pruned group violates positive/negative bounds");
      break;
    }
  }
  if (o.pass) o.detail = "10000 groups, " + std::to_string(pruned.size()) + " kept";
  return o;
}

template <typename LossFn>
double fd_error(nn::Network& net, const std::vector<double>& analytic, std::size_t c, LossFn loss) {
  const double saved = net.params()[c];
  const double h = 1e-5;
  net.params()[c] = saved + h;
  const double up = loss();
  net.params()[c] = saved - h;
  const double down = loss();
  net.params()[c] = saved;
  return testing::relative_error(analytic[c], (up - down) / (2.0 * h));
}

Outcome gradient_checks() {
  Outcome o;
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0.0, 1.0);
  auto vec = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = g(rng);
    return v;
  };
  const std::size_t d = featurize::kNumFeatures;
  std::string summary;
  for (auto kind : {models::ModelKind::kRankNet, models::ModelKind::kDnn, models::ModelKind::kCnn}) {
    const auto p = models::default_params(kind);
    auto net = kind == models::ModelKind::kRankNet ? models::ranknet_network(d, p)
               : kind == models::ModelKind::kDnn   ? models::dnn_network(d, p)
                                                   : models::cnn_network(d, p);
    net.init(17);
    std::uniform_int_distribution<std::size_t> coord(0, net.num_params() - 1);
    nn::Workspace wa, wb;
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const auto a = vec(d), b = vec(d);
      const std::size_t label = static_cast<std::size_t>(t % 4);
      std::vector<double> grad(net.num_params(), 0.0), scratch(net.num_params());
      std::function<double()> loss;
      if (kind == models::ModelKind::kRankNet) {
        nn::pair_loss_and_grad(net, a, b, grad, wa, wb);
        loss = [&] { return nn::pair_loss_and_grad(net, a, b, scratch, wa, wb); };
      } else {
        nn::class_loss_and_grad(net, a, label, grad, wa);
        loss = [&] { return nn::class_loss_and_grad(net, a, label, scratch, wa); };
      }
      for (int k = 0; k < 5; ++k) worst = std::max(worst, fd_error(net, grad, coord(rng), loss));
    }
    o.require(worst < 1e-4, std::string(models::kind_name(kind)) + " error " + fmt(worst));
    summary += std::string(models::kind_name(kind)) + " " + fmt(worst) + " ";
  }
  if (o.pass) o.detail = "max relative error: " + summary;
  return o;
}

Outcome boosting_monotone() {
  Outcome o;
  const std::vector<std::function<double(std::span<const double>)>> utilities = {
      testing::linear_utility, testing::xor_utility,
      [](std::span<const double> x) { return std::sin(3.0 * x[0]) + x[1] * x[2]; }};
  for (std::size_t k = 0; k < utilities.size(); ++k) {
    const auto data = testing::planted_dataset(40, 15, 6, utilities[k], 100 + k);
    auto p = models::default_params(models::ModelKind::kGbdt);
    p.trees = 100;
    const auto gbdt = models::train_gbdt(data, p);
    const auto& c1 = gbdt.meta().loss_curve;
    o.require(c1.size() == 101, "gbdt curve length");
    for (std::size_t t = 1; t < c1.size(); ++t) {
      if (c1[t] > c1[t - 1]) o.require(false, "gbdt mse rose on dataset " + std::to_string(k));
    }
    p = models::default_params(models::ModelKind::kGbrt);
    p.trees = 100;
    const auto pairs = data::build_pairs(data, 50, 3);
    const auto gbrt = models::train_gbrt(data, pairs, p);
    const auto& c2 = gbrt.meta().loss_curve;
    for (std::size_t t = 1; t < c2.size(); ++t) {
      if (c2[t] > c2[t - 1] + 1e-9) o.require(false, "gbrt pair loss rose on dataset " + std::to_string(k));
    }
  }
  if (o.pass) o.detail = "3 datasets, T=100";
  return o;
}

double mean_ndcg10(const models::Scorer& m, const data::Dataset& d) {
  const auto s = models::score_rows(m, d);
  double total = 0.0;
  std::size_t n = 0;
  for (auto [b, e] : d.group_ranges()) {
    std::vector<std::size_t> idx(e - b);
    std::iota(idx.begin(), idx.end(), b);
    std::stable_sort(idx.begin(), idx.end(), [&](auto x, auto y) { return s[x] > s[y]; });
    std::vector<double> labels;
    for (auto i : idx) labels.push_back(d.labels[i]);
    if (const auto v = evalkit::ndcg(labels, 10)) {
      total += *v;
      ++n;
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

Outcome learnability() {
  Outcome o;
  const auto train = testing::planted_dataset(200, 10, 5, testing::linear_utility, 41);
  const auto held = testing::planted_dataset(100, 10, 5, testing::linear_utility, 42);
  const auto tp = data::build_pairs(train, 0, 1);
  const auto hp = data::build_pairs(held, 0, 1);
  auto svm = models::default_params(models::ModelKind::kRankSvm);
  auto net = models::default_params(models::ModelKind::kRankNet);
  net.seed = 5;
  auto gbrt = models::default_params(models::ModelKind::kGbrt);
  gbrt.trees = 300;
  const double a_svm = data::pair_accuracy(models::score_rows(models::train_ranksvm(train, tp, svm), held), hp);
  const double a_net = data::pair_accuracy(models::score_rows(models::train_ranknet(train, tp, net), held), hp);
  const double a_gbrt = data::pair_accuracy(models::score_rows(models::train_gbrt(train, tp, gbrt), held), hp);
  o.require(a_svm >= 0.95, "ranksvm " + fmt(a_svm));
  o.require(a_net >= 0.95, "ranknet " + fmt(a_net));
  o.require(a_gbrt >= 0.95, "gbrt " + fmt(a_gbrt));

  const auto xtrain = testing::planted_dataset(150, 20, 4, testing::xor_utility, 43);
  const auto xheld = testing::planted_dataset(100, 20, 4, testing::xor_utility, 44);
  const auto xp = data::build_pairs(xtrain, 0, 1);
  gbrt.trees = 100;
  const double n_gbrt = mean_ndcg10(models::train_gbrt(xtrain, xp, gbrt), xheld);
  const double n_svm = mean_ndcg10(models::train_ranksvm(xtrain, xp, svm), xheld);
  o.require(n_gbrt - n_svm >= 0.05, "xor gbrt " + fmt(n_gbrt) + " vs ranksvm " + fmt(n_svm));
  o.detail = "pair accuracy ranksvm " + fmt(a_svm) + ", ranknet " + fmt(a_net) + ", gbrt " +
             fmt(a_gbrt) + "; xor ndcg@10 gbrt " + fmt(n_gbrt) + " vs ranksvm " + fmt(n_svm) +
             (o.pass ? "" : " (" + o.detail + ")");
  return o;
}

Outcome stacking_endpoints() {
  Outcome o;
  const auto eng = testing::planted_dataset(1000, 10, 6, testing::linear_utility, 51);
  const auto rel = testing::planted_dataset(1000, 10, 6, testing::xor_utility, 52);
  const auto ep = data::build_pairs(eng, 20, 1);
  const auto rp = data::build_pairs(rel, 20, 1);
  auto p = models::default_params(models::ModelKind::kGbrt);
  p.trees = 20;
  auto e = std::make_shared<models::RankModel>(models::train_gbrt(eng, ep, p));
  auto r = std::make_shared<models::RankModel>(models::train_gbrt(rel, rp, p));
  const ensemble::StackedModel s1(e, r, 1.0), s0(e, r, 0.0);
  const auto order = [&](const models::Scorer& m) {
    const auto l = experiment::rank_dataset(m, eng);
    std::vector<std::vector<PinId>> out;
    for (const auto& x : l) out.push_back(x.pin_ids());
    return out;
  };
  o.require(order(s1) == order(*e), "gamma=1 ranking differs from engagement model");
  o.require(order(s0) == order(*r), "gamma=0 ranking differs from relevance model");
  p.trees = 10;
  const auto st = ensemble::train_stacked_gbrt(eng, ep, rel, rp, 0.5, p);
  const auto counts = ensemble::trees_per_source(st);
  const auto get = [&](const char* k) { return counts.contains(k) ? counts.at(k) : 0u; };
  o.require(get("engagement") == 5 && get("relevance") == 5,
            "trees per source " + std::to_string(get("engagement")) + "/" + std::to_string(get("relevance")));
  if (o.pass) o.detail = "1000 queries; 5 + 5 trees";
  return o;
}

// ---------------------------------------------------------------------------
// Pipeline runs shared by criteria 7, 8 and 9.

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(IMGRANK_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Runs {
  fs::path root;
  bool ok = false;
  std::string error;
  fs::path a() const { return root / "run_a"; }
  fs::path b() const { return root / "run_b"; }
};

const Runs& pipeline_runs() {
  static const Runs runs = [] {
    Runs r;
    r.root = fs::temp_directory_path() / ("imgrank_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(r.root);
    fs::create_directories(r.root);
    auto cfg = experiment::default_experiment_json(7);
    cfg["corpus"]["countries"] = {"US", "GB"};
    cfg["corpus"]["fresh_fraction"] = 0.5;
    std::ofstream(r.root / "config.json") << cfg.dump(2);
    for (const auto& dir : {r.a(), r.b()}) {
      const int code = run_cli("reproduce --config " + (r.root / "config.json").string() + " --out " +
                                   dir.string(),
                               r.root / (dir.filename().string() + ".log"));
      if (code != 0) {
        r.error = "reproduce exited with " + std::to_string(code);
        return r;
      }
    }
    r.ok = true;
    return r;
  }();
  return runs;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cascade_funnel() {
  Outcome o;
  synthlog::CorpusParams cp;
  cp.seed = 9;
  cp.n_pins = 100000;
  cp.n_queries = 2;
  cp.n_segments = 2;
  cp.pool_size = 100000;
  const auto corpus = synthlog::generate_corpus(cp);
  const featurize::NavboostTable nav;
  const featurize::Featurizer fz(corpus.pins, nav);
  const auto& schema = fz.schema();
  const auto rule = [&](std::string_view subset, std::map<std::string, double> w) {
    const auto& names = schema.subset(subset);
    return std::make_shared<models::RankModel>(models::rule_model(names, models::make_rule(names, w, 0.0, 0.0)));
  };
  cascade::ModelMap mm = {
      {"light", rule(featurize::kLightweightSubset, {{"bm25", 1.0}, {"categoryboost", 0.7}, {"social_score", 0.2}})},
      {"full", rule(featurize::kFullSubset, {{"embedding_sim", 1.0}, {"bm25", 0.5}, {"topicboost", 0.5}})}};
  const cascade::Cascade funnel(cascade::default_cascade("light", "full"), fz, mm);
  const auto light_cols = schema.subset_columns(featurize::kLightweightSubset);
  for (std::size_t q = 0; q < corpus.queries.size(); ++q) {
    const auto& query = corpus.queries[q];
    const auto& seg = corpus.segments[q % corpus.segments.size()];
    std::vector<const synthlog::Pin*> cands;
    for (auto i : corpus.pools[q]) cands.push_back(&corpus.pins[i]);
    const auto list = funnel.run(query, seg, cands);
    const auto ctx = fz.prepare(query, seg);
    std::vector<RankedEntry> s1;
    std::vector<double> x(light_cols.size());
    for (const auto* p : cands) {
      fz.compute(ctx, *p, light_cols, x);
      s1.push_back({p->pin_id, mm.at("light")->score(x), {}});
    }
    std::sort(s1.begin(), s1.end(), ranks_before);
    s1.resize(1000);
    std::vector<RankedEntry> s2;
    for (const auto& e : s1) {
      const auto full = fz.featurize(ctx, corpus.pins[corpus.pin_index(e.pin_id)]);
      s2.push_back({e.pin_id, mm.at("full")->score(full.values), {}});
    }
    std::sort(s2.begin(), s2.end(), ranks_before);
    s2.resize(25);
    std::vector<PinId> expect;
    for (const auto& e : s2) expect.push_back(e.pin_id);
    o.require(list.pin_ids() == expect, "survivors differ from brute-force top-k on query " + std::to_string(q));
  }

  const auto& runs = pipeline_runs();
  if (!runs.ok) {
    o.require(false, runs.error);
    return o;
  }
  const auto lat = read_json(runs.a() / "latency.json");
  const double speedup = lat.at("speedup").get<double>();
  o.require(speedup >= 5.0, "wall speedup " + fmt(speedup));
  const auto sim = read_json(runs.a() / "summary.json").at("latency_simulated");
  const auto rule_f = sim.at("rule_light").at("fractions").get<std::vector<double>>();
  const auto svm_f = sim.at("ranksvm_light").at("fractions").get<std::vector<double>>();
  double cr = 0.0, cs = 0.0;
  bool dominates = true, strict = false;
  for (std::size_t b = 0; b + 1 < rule_f.size(); ++b) {
    cr += rule_f[b];
    cs += svm_f[b];
    if (cs + 1e-12 < cr) dominates = false;
    if (cs > cr + 1e-12) strict = true;
  }
  o.require(dominates && strict, "simulated histogram not shifted lower");
  o.detail = "wall speedup " + fmt(speedup) + "x; simulated rule [" + fmt(rule_f[0]) + " " +
             fmt(rule_f[1]) + " " + fmt(rule_f[2]) + "] vs ranksvm [" + fmt(svm_f[0]) + " " +
             fmt(svm_f[1]) + " " + fmt(svm_f[2]) + "]" + (o.pass ? "" : " (" + o.detail + ")");
  return o;
}

Outcome reranker_effect() {
  Outcome o;
  const auto& runs = pipeline_runs();
  if (!runs.ok) {
    o.require(false, runs.error);
    return o;
  }
  const auto cmp = read_json(runs.a() / "summary.json").at("cascade").at("rerank_vs_identity");
  const auto delta = [&](const char* k) {
    return cmp.at(k).at("b").get<double>() - cmp.at(k).at("a").get<double>();
  };
  const double df = delta("f_imp"), dl = delta("l_imp"), dn = delta("ndcg_e@10");
  o.require(df > 0.0, "f_imp change " + fmt(df));
  o.require(dl > 0.0, "l_imp change " + fmt(dl));
  o.require(dn >= -0.02, "ndcg_e@10 change " + fmt(dn));
  o.detail = "f_imp +" + fmt(df) + ", l_imp +" + fmt(dl) + ", ndcg_e@10 change " + fmt(dn) +
             (o.pass ? "" : " (" + o.detail + ")");
  return o;
}

Outcome determinism() {
  Outcome o;
  const auto& runs = pipeline_runs();
  if (!runs.ok) {
    o.require(false, runs.error);
    return o;
  }
  std::size_t files = 0;
  std::set<std::string> seen;
  for (const auto& e : fs::recursive_directory_iterator(runs.a())) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), runs.a());
    seen.insert(rel.string());
    if (rel == "latency.json") continue;
    const auto other = runs.b() / rel;
    if (!fs::exists(other) || file_bytes(e.path()) != file_bytes(other)) {
      o.require(false, "differs: " + rel.string());
    }
    ++files;
  }
  for (const auto& e : fs::recursive_directory_iterator(runs.b())) {
    if (e.is_regular_file() && !seen.contains(fs::relative(e.path(), runs.b()).string())) {
      o.require(false, "only in second run: " + fs::relative(e.path(), runs.b()).string());
    }
  }

  const auto d = testing::planted_dataset(12, 10, 24, testing::linear_utility, 61);
  const auto pairs = data::build_pairs(d, 20, 1);
  std::mt19937_64 rng(62);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> probes(1000, std::vector<double>(24));
  for (auto& v : probes) {
    for (auto& x : v) x = g(rng);
  }
  std::vector<std::shared_ptr<const models::Scorer>> trained;
  for (auto kind : {models::ModelKind::kGbdt, models::ModelKind::kGbrt, models::ModelKind::kRankSvm,
                    models::ModelKind::kRankNet, models::ModelKind::kDnn, models::ModelKind::kCnn,
                    models::ModelKind::kRule}) {
    auto p = models::default_params(kind);
    p.trees = 10;
    p.epochs = 3;
    p.seed = 4;
    trained.push_back(std::make_shared<models::RankModel>(
        experiment::train_model(kind, d, 20, p, experiment::RuleConfig{{{"f0", 1.0}}, 0.0, 0.0})));
  }
  trained.push_back(std::make_shared<ensemble::StackedModel>(
      std::static_pointer_cast<const models::RankModel>(trained[1]),
      std::static_pointer_cast<const models::RankModel>(trained[2]), 0.4));
  const auto path = fs::temp_directory_path() / ("imgrank_acceptance_model_" + std::to_string(::getpid()) + ".json");
  for (const auto& m : trained) {
    ensemble::save_scorer(*m, path);
    const auto back = ensemble::load_scorer(path);
    for (const auto& v : probes) {
      const double a = m->score(v), b = back->score(v);
      if (std::memcmp(&a, &b, sizeof a) != 0) {
        o.require(false, m->kind_label() + " round-trip score differs");
        break;
      }
    }
  }
  fs::remove(path);
  if (o.pass) {
    o.detail = std::to_string(files) + " files identical; " + std::to_string(trained.size()) +
               " model kinds round-trip bitwise";
  }
  return o;
}

Outcome split_integrity() {
  Outcome o;
  auto cp = testing::small_corpus(71);
  cp.n_queries = 30;
  const auto corpus = synthlog::generate_corpus(cp);
  synthlog::SimParams sim;
  sim.n_sessions = 3000;
  const auto log = synthlog::simulate_log(corpus, sim);
  synthlog::JudgmentParams jp;
  jp.pins_per_query = 40;
  const auto judgments = synthlog::simulate_judgments(corpus, jp);
  const auto labels = experiment::make_labels(log, judgments, corpus, labelgen::LabelConfig{});
  const auto groups = [](const std::vector<labelgen::LabeledInstance>& v) {
    std::set<GroupKey> s;
    for (const auto& i : v) s.insert(i.group());
    return s;
  };
  for (const auto* split : {&labels.engagement, &labels.relevance}) {
    const auto tr = groups(split->train), va = groups(split->validation), te = groups(split->test);
    for (const auto& g : va) o.require(!tr.contains(g), "validation group in train");
    for (const auto& g : te) o.require(!tr.contains(g) && !va.contains(g), "test group in another split");
  }
  const auto train = groups(labels.engagement.train);
  const auto expect = featurize::build_navboost(log, corpus.queries, corpus.segments,
                                                labels.navboost.smoothing(), &train);
  o.require(labels.navboost == expect, "navboost table includes non-training records");
  // Perturbing held-out records must not change any training-split feature.
  auto tampered = log;
  for (auto& r : tampered) {
    if (!train.contains({r.query_id, r.segment_id})) r.action_counts[static_cast<std::size_t>(Action::kRepin)] += 5;
  }
  const auto again = featurize::build_navboost(tampered, corpus.queries, corpus.segments,
                                               labels.navboost.smoothing(), &train);
  const featurize::Featurizer f1(corpus.pins, labels.navboost), f2(corpus.pins, again);
  for (std::size_t i = 0; i < std::min<std::size_t>(labels.engagement.train.size(), 300); ++i) {
    const auto& inst = labels.engagement.train[i];
    const auto& q = corpus.queries[corpus.query_index(inst.query_id)];
    const auto& s = corpus.segments[corpus.segment_index(inst.segment_id)];
    const auto& p = corpus.pins[corpus.pin_index(inst.pin_id)];
    if (f1.featurize(q, s, p).values != f2.featurize(q, s, p).values) {
      o.require(false, "held-out records changed a training feature");
      break;
    }
  }
  if (o.pass) {
    o.detail = std::to_string(train.size()) + " train groups disjoint from " +
               std::to_string(groups(labels.engagement.validation).size() +
                              groups(labels.engagement.test).size()) +
               " held-out groups; navboost sees training records only";
  }
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"ndcg matches brute-force oracle", ndcg_oracle},
      {"label pipeline invariants", label_invariants},
      {"analytic gradients match finite differences", gradient_checks},
      {"boosting loss is non-increasing", boosting_monotone},
      {"pairwise learnability", learnability},
      {"stacking endpoints", stacking_endpoints},
      {"cascade funnel and latency direction", cascade_funnel},
      {"re-ranker raises fresh and local share", reranker_effect},
      {"determinism and round-trips", determinism},
      {"split integrity and leakage guard", split_integrity},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (i + 1) << ": " << criteria[i].first
              << " - " << o.detail << " [" << fmt(secs) << " s]" << std::endl;
    if (!o.pass) ++failures;
  }
  const auto& runs = pipeline_runs();
  if (runs.ok && failures == 0) fs::remove_all(runs.root);
  return failures == 0 ? 0 : 1;
}
