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

#include "imgrank/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>

namespace imgrank::models {

namespace {

constexpr std::array<std::string_view, 7> kKindNames = {"gbdt",   "gbrt", "ranksvm", "ranknet",
                                                        "dnn",    "cnn",  "rule"};
constexpr std::size_t kNumClasses = 4;
constexpr int kFormatVersion = 1;

void check_finite(double loss, std::string_view model, std::size_t epoch) {
  if (!std::isfinite(loss)) {
    throw NumericalError(std::string(model) + " training loss became non-finite at epoch " +
                         std::to_string(epoch));
  }
}

std::vector<double> standardized_rows(const data::Dataset& d, const Standardizer& s) {
  std::vector<double> z(d.x.size());
  const std::size_t f = d.num_features();
  for (std::size_t i = 0; i < d.size(); ++i) {
    s.apply(d.row(i), std::span<double>(z.data() + i * f, f));
  }
  return z;
}

void require_rows(const data::Dataset& d, std::string_view model) {
  if (d.empty()) throw DataError(std::string(model) + ": training data is empty");
  if (d.num_features() == 0) throw DataError(std::string(model) + ": training data has no features");
}

void require_pairs(std::span<const data::IndexPair> pairs, const data::Dataset& d,
                   std::string_view model) {
  if (pairs.empty()) throw DataError(std::string(model) + ": no preference pairs");
  for (const auto& p : pairs) {
    if (p.preferred >= d.size() || p.other >= d.size()) {
      throw DataError(std::string(model) + ": pair index out of range");
    }
  }
}

/// Mini-batch gradient descent with step decay over `n_items` items.
/// `item_grad(i, grad)` adds item i's gradient and returns its loss;
/// `epoch_loss()` returns the mean training loss after an epoch.
template <typename ItemGrad, typename EpochLoss>
std::vector<double> minibatch_descent(nn::Network& net, std::size_t n_items,
                                      const TrainParams& p, std::string_view model,
                                      ItemGrad item_grad, EpochLoss epoch_loss) {
  std::mt19937_64 rng(mix_seed(p.seed, 0x6e6eULL));
  std::vector<std::size_t> order(n_items);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(net.num_params());
  std::vector<double> curve;
  const std::size_t batch = std::max<std::size_t>(1, p.batch_size);
  const std::size_t every = std::max<std::size_t>(1, p.decay_every);
  for (std::size_t epoch = 0; epoch < p.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double step = p.step * std::pow(p.step_decay, static_cast<double>(epoch / every));
    for (std::size_t start = 0; start < n_items; start += batch) {
      const std::size_t end = std::min(n_items, start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;
      for (std::size_t k = start; k < end; ++k) loss += item_grad(order[k], std::span<double>(grad));
      check_finite(loss, model, epoch);
      const double scale = step / static_cast<double>(end - start);
      auto& w = net.params();
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= scale * grad[k];
    }
    const double loss = epoch_loss();
    check_finite(loss, model, epoch);
    curve.push_back(loss);
  }
  return curve;
}

TrainingMeta make_meta(std::vector<double> curve, const TrainParams& p) {
  TrainingMeta m;
  m.loss_curve = std::move(curve);
  m.seed = p.seed;
  m.hyperparameters = to_json(p);
  return m;
}

std::size_t class_index(int ordinal) {
  if (ordinal < 1 || ordinal > static_cast<int>(kNumClasses)) {
    throw DataError("ordinal label " + std::to_string(ordinal) + " is outside 1..4");
  }
  return static_cast<std::size_t>(ordinal - 1);
}

}  // namespace

std::string_view kind_name(ModelKind k) { return kKindNames.at(static_cast<std::size_t>(k)); }

ModelKind parse_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<ModelKind>(i);
  }
  throw ConfigError("unknown model kind '" + std::string(name) + "' (valid: " +
                    valid_kind_names() + ")");
}

std::string valid_kind_names() {
  std::string out;
  for (auto n : kKindNames) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

TrainParams default_params(ModelKind kind) {
  TrainParams p;
  switch (kind) {
    case ModelKind::kRankNet:
      p.hidden = {32};
      break;
    case ModelKind::kDnn:
      p.hidden = {64, 64};
      break;
    case ModelKind::kRankSvm:
      p.epochs = 300;
      p.step = 0.0;
      break;
    default:
      break;
  }
  return p;
}

Json to_json(const TrainParams& p) {
  return Json{{"trees", p.trees},
              {"learning_rate", p.learning_rate},
              {"max_depth", p.max_depth},
              {"min_leaf", p.min_leaf},
              {"margin", p.margin},
              {"c", p.c},
              {"epochs", p.epochs},
              {"step", p.step},
              {"batch_size", p.batch_size},
              {"step_decay", p.step_decay},
              {"decay_every", p.decay_every},
              {"hidden", p.hidden},
              {"conv_filters", p.conv_filters},
              {"conv_width", p.conv_width},
              {"pool", p.pool},
              {"fc", p.fc},
              {"seed", p.seed}};
}

TrainParams train_params_from_json(const Json& j, TrainParams p) {
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "trees") p.trees = value.get<std::size_t>();
      else if (key == "learning_rate") p.learning_rate = value.get<double>();
      else if (key == "max_depth") p.max_depth = value.get<int>();
      else if (key == "min_leaf") p.min_leaf = value.get<std::size_t>();
      else if (key == "margin") p.margin = value.get<double>();
      else if (key == "c") p.c = value.get<double>();
      else if (key == "epochs") p.epochs = value.get<std::size_t>();
      else if (key == "step") p.step = value.get<double>();
      else if (key == "batch_size") p.batch_size = value.get<std::size_t>();
      else if (key == "step_decay") p.step_decay = value.get<double>();
      else if (key == "decay_every") p.decay_every = value.get<std::size_t>();
      else if (key == "hidden") p.hidden = value.get<std::vector<std::size_t>>();
      else if (key == "conv_filters") p.conv_filters = value.get<std::vector<std::size_t>>();
      else if (key == "conv_width") p.conv_width = value.get<std::size_t>();
      else if (key == "pool") p.pool = value.get<std::size_t>();
      else if (key == "fc") p.fc = value.get<std::size_t>();
      else if (key == "seed") p.seed = value.get<std::uint64_t>();
      else throw ConfigError("unknown hyperparameter '" + key + "'");
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("hyperparameters: ") + e.what());
  }
  return p;
}

// ---------------------------------------------------------------------------

Standardizer Standardizer::fit(const data::Dataset& d) {
  const std::size_t f = d.num_features();
  Standardizer s;
  s.mean.assign(f, 0.0);
  s.scale.assign(f, 1.0);
  if (d.empty()) return s;
  const auto n = static_cast<double>(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto r = d.row(i);
    for (std::size_t c = 0; c < f; ++c) s.mean[c] += r[c];
  }
  for (auto& m : s.mean) m /= n;
  std::vector<double> var(f, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto r = d.row(i);
    for (std::size_t c = 0; c < f; ++c) var[c] += (r[c] - s.mean[c]) * (r[c] - s.mean[c]);
  }
  for (std::size_t c = 0; c < f; ++c) {
    const double sd = std::sqrt(var[c] / n);
    s.scale[c] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

void Standardizer::apply(std::span<const double> x, std::span<double> out) const {
  for (std::size_t c = 0; c < x.size(); ++c) out[c] = (x[c] - mean[c]) / scale[c];
}

// ---------------------------------------------------------------------------

RuleParams make_rule(std::span<const std::string> features,
                     const std::map<std::string, double>& weights, double fresh_boost,
                     double local_boost) {
  RuleParams r;
  r.weights.assign(features.size(), 0.0);
  for (const auto& [name, w] : weights) {
    auto it = std::find(features.begin(), features.end(), name);
    if (it == features.end()) throw ConfigError("rule weight names unknown feature '" + name + "'");
    r.weights[static_cast<std::size_t>(it - features.begin())] = w;
  }
  r.fresh_boost = fresh_boost;
  r.local_boost = local_boost;
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (features[k] == featurize::feature_name(featurize::Feature::kFreshness)) {
      r.fresh_column = static_cast<int>(k);
    }
    if (features[k] == featurize::feature_name(featurize::Feature::kLocaleMatch)) {
      r.local_column = static_cast<int>(k);
    }
  }
  return r;
}

RuleParams default_rule(std::span<const std::string> features) {
  std::map<std::string, double> w;
  for (const auto& [name, weight] :
       {std::pair<std::string_view, double>{"bm25", 1.0}, {"categoryboost", 1.0},
        {"social_score", 0.5}}) {
    if (std::find(features.begin(), features.end(), name) != features.end()) {
      w[std::string(name)] = weight;
    }
  }
  return make_rule(features, w, 0.2, 0.1);
}

double rule_based_score(std::span<const double> x, const RuleParams& rule) {
  double s = 0.0;
  for (std::size_t k = 0; k < rule.weights.size(); ++k) s += rule.weights[k] * x[k];
  // Freshness feature exp(-age/30) is at least e^-1 exactly for age <= 30.
  if (rule.fresh_column >= 0 && x[static_cast<std::size_t>(rule.fresh_column)] >= std::exp(-1.0)) {
    s += rule.fresh_boost;
  }
  if (rule.local_column >= 0 && x[static_cast<std::size_t>(rule.local_column)] >= 0.5) {
    s += rule.local_boost;
  }
  return s;
}

// ---------------------------------------------------------------------------

double classifier_score(std::span<const double> distribution) {
  if (distribution.size() != kNumClasses) {
    throw DataError("class distribution must have 4 entries");
  }
  double total = 0.0;
  double s = 0.0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const double p = distribution[k];
    if (!(p >= -1e-12) || !std::isfinite(p)) throw DataError("class probability out of range");
    total += p;
    s += static_cast<double>(k + 1) * p;
  }
  if (std::abs(total - 1.0) > 1e-6) throw DataError("class distribution does not sum to 1");
  return s;
}

double squared_hinge(double d) {
  const double m = std::max(0.0, 1.0 - d);
  return m * m;
}

double pair_hinge_loss(std::span<const double> scores, std::span<const data::IndexPair> pairs,
                       double margin) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : pairs) {
    const double m = std::max(0.0, margin - (scores[p.preferred] - scores[p.other]));
    total += m * m;
  }
  return total / static_cast<double>(pairs.size());
}

std::vector<double> pair_hinge_negative_gradient(std::span<const double> scores,
                                                 std::span<const data::IndexPair> pairs,
                                                 double margin) {
  std::vector<double> g(scores.size(), 0.0);
  for (const auto& p : pairs) {
    const double m = std::max(0.0, margin - (scores[p.preferred] - scores[p.other]));
    g[p.preferred] += 2.0 * m;
    g[p.other] -= 2.0 * m;
  }
  return g;
}

// ---------------------------------------------------------------------------

RankModel::RankModel(ModelKind kind, std::vector<std::string> features, Params params,
                     TrainingMeta meta)
    : kind_(kind),
      features_(std::move(features)),
      schema_id_(featurize::schema_id_for(features_)),
      params_(std::move(params)),
      meta_(std::move(meta)) {
  const bool ok = std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, BoostEnsemble>) {
          return kind_ == ModelKind::kGbdt || kind_ == ModelKind::kGbrt;
        } else if constexpr (std::is_same_v<T, LinearParams>) {
          return kind_ == ModelKind::kRankSvm && p.weights.size() == features_.size();
        } else if constexpr (std::is_same_v<T, NeuralParams>) {
          return (kind_ == ModelKind::kRankNet || kind_ == ModelKind::kDnn ||
                  kind_ == ModelKind::kCnn) &&
                 p.network.input_size() == features_.size();
        } else {
          return kind_ == ModelKind::kRule && p.weights.size() == features_.size();
        }
      },
      params_);
  if (!ok) throw DataError("model parameters do not match kind '" + kind_label() + "'");
}

std::vector<double> RankModel::class_probabilities(std::span<const double> x) const {
  const auto* np = std::get_if<NeuralParams>(&params_);
  if (!np || (kind_ != ModelKind::kDnn && kind_ != ModelKind::kCnn)) {
    throw ConfigError("model kind '" + kind_label() + "' has no class distribution");
  }
  thread_local nn::Workspace ws;
  thread_local std::vector<double> z;
  z.resize(x.size());
  np->scaler.apply(x, z);
  const auto logits = np->network.forward(z, ws);
  std::vector<double> probs(logits.size());
  nn::softmax(logits, probs);
  return probs;
}

double RankModel::score(std::span<const double> x) const {
  if (x.size() != features_.size()) {
    throw DataError("model expects " + std::to_string(features_.size()) + " features, got " +
                    std::to_string(x.size()));
  }
  switch (kind_) {
    case ModelKind::kGbdt:
    case ModelKind::kGbrt:
      return std::get<BoostEnsemble>(params_).predict(x);
    case ModelKind::kRankSvm: {
      const auto& lp = std::get<LinearParams>(params_);
      double s = lp.bias;
      for (std::size_t k = 0; k < x.size(); ++k) s += lp.weights[k] * x[k];
      return s;
    }
    case ModelKind::kRankNet: {
      const auto& np = std::get<NeuralParams>(params_);
      thread_local nn::Workspace ws;
      thread_local std::vector<double> z;
      z.resize(x.size());
      np.scaler.apply(x, z);
      return np.network.forward(z, ws)[0];
    }
    case ModelKind::kDnn:
    case ModelKind::kCnn: {
      const auto probs = class_probabilities(x);
      double s = 0.0;
      for (std::size_t k = 0; k < probs.size(); ++k) s += static_cast<double>(k + 1) * probs[k];
      return s;
    }
    case ModelKind::kRule:
      return rule_based_score(x, std::get<RuleParams>(params_));
  }
  return 0.0;
}

Json RankModel::to_json() const {
  Json params = std::visit(
      [](const auto& p) -> Json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, BoostEnsemble>) {
          return p.to_json();
        } else if constexpr (std::is_same_v<T, LinearParams>) {
          return Json{{"weights", p.weights}, {"bias", p.bias}};
        } else if constexpr (std::is_same_v<T, NeuralParams>) {
          return Json{{"network", p.network.to_json()},
                      {"scaler", {{"mean", p.scaler.mean}, {"scale", p.scaler.scale}}}};
        } else {
          return Json{{"weights", p.weights},
                      {"fresh_boost", p.fresh_boost},
                      {"local_boost", p.local_boost}};
        }
      },
      params_);
  return Json{{"format", "imgrank-model"},
              {"version", kFormatVersion},
              {"kind", kind_label()},
              {"schema_id", schema_id_},
              {"features", features_},
              {"seed", meta_.seed},
              {"hyperparameters", meta_.hyperparameters},
              {"training_meta", {{"loss_curve", meta_.loss_curve}}},
              {"params", std::move(params)}};
}

RankModel RankModel::from_json(const Json& j) {
  try {
    if (j.value("format", std::string{}) != "imgrank-model") throw DataError("not a model file");
    if (j.at("version").get<int>() != kFormatVersion) {
      throw DataError("unsupported model version " + j.at("version").dump());
    }
    const ModelKind kind = parse_kind(j.at("kind").get<std::string>());
    auto features = j.at("features").get<std::vector<std::string>>();
    TrainingMeta meta;
    meta.seed = j.value("seed", std::uint64_t{0});
    meta.hyperparameters = j.value("hyperparameters", Json::object());
    meta.loss_curve = j.at("training_meta").value("loss_curve", std::vector<double>{});
    const Json& p = j.at("params");
    Params params;
    switch (kind) {
      case ModelKind::kGbdt:
      case ModelKind::kGbrt:
        params = BoostEnsemble::from_json(p);
        break;
      case ModelKind::kRankSvm:
        params = LinearParams{p.at("weights").get<std::vector<double>>(), p.at("bias").get<double>()};
        break;
      case ModelKind::kRankNet:
      case ModelKind::kDnn:
      case ModelKind::kCnn:
        params = NeuralParams{nn::Network::from_json(p.at("network")),
                              {p.at("scaler").at("mean").get<std::vector<double>>(),
                               p.at("scaler").at("scale").get<std::vector<double>>()}};
        break;
      case ModelKind::kRule: {
        auto rule = make_rule(features, {}, p.at("fresh_boost").get<double>(),
                              p.at("local_boost").get<double>());
        rule.weights = p.at("weights").get<std::vector<double>>();
        params = rule;
        break;
      }
    }
    RankModel m(kind, std::move(features), std::move(params), std::move(meta));
    if (j.at("schema_id").get<std::string>() != m.schema_id()) {
      throw DataError("model schema_id does not match its feature list");
    }
    return m;
  } catch (const Json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

void RankModel::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

RankModel RankModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read model " + path.string());
  try {
    return from_json(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

BoostEnsemble boost_sources(std::span<const BoostSource> sources,
                            std::span<const std::size_t> schedule, const TrainParams& params,
                            std::vector<double>& loss_curve,
                            std::vector<std::vector<double>>* gradients) {
  if (params.learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
  const std::size_t n_sources = sources.size();
  std::vector<std::vector<double>> f(n_sources);
  std::vector<std::optional<TreeBuilder>> builders(n_sources);
  for (std::size_t s = 0; s < n_sources; ++s) {
    f[s].assign(sources[s].data->size(), 0.0);
  }

  auto source_loss = [&](std::size_t s, const std::vector<double>& scores) {
    const auto& src = sources[s];
    if (!src.pointwise) return pair_hinge_loss(scores, src.pairs, params.margin);
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double r = src.data->labels[i] - scores[i];
      total += r * r;
    }
    return scores.empty() ? 0.0 : total / static_cast<double>(scores.size());
  };
  auto combined = [&](const std::vector<std::vector<double>>& scores) {
    double total = 0.0;
    for (std::size_t s = 0; s < n_sources; ++s) {
      if (sources[s].weight != 0.0) total += sources[s].weight * source_loss(s, scores[s]);
    }
    return total;
  };

  BoostEnsemble ensemble;
  double current = combined(f);
  loss_curve.assign(1, current);
  std::vector<std::vector<double>> h(n_sources), trial(n_sources);
  for (std::size_t s : schedule) {
    if (s >= n_sources) throw ConfigError("boosting schedule names an unknown source");
    const auto& src = sources[s];
    std::vector<double> targets;
    if (src.pointwise) {
      targets.resize(f[s].size());
      for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = src.data->labels[i] - f[s][i];
    } else {
      targets = pair_hinge_negative_gradient(f[s], src.pairs, params.margin);
    }
    if (!builders[s]) builders[s].emplace(src.data->x, src.data->num_features());
    auto tree = builders[s]->fit(targets, params.max_depth, params.min_leaf);
    if (gradients) gradients->push_back(std::move(targets));

    for (std::size_t k = 0; k < n_sources; ++k) {
      const auto& d = *sources[k].data;
      h[k].resize(d.size());
      for (std::size_t i = 0; i < d.size(); ++i) h[k][i] = tree.predict(d.row(i));
    }
    double eta = params.learning_rate;
    double next = current;
    bool accepted = false;
    for (int attempt = 0; attempt < 30; ++attempt) {
      for (std::size_t k = 0; k < n_sources; ++k) {
        trial[k].resize(f[k].size());
        for (std::size_t i = 0; i < f[k].size(); ++i) trial[k][i] = f[k][i] + eta * h[k][i];
      }
      next = combined(trial);
      if (!std::isfinite(next)) {
        throw NumericalError("boosting loss became non-finite at tree " +
                             std::to_string(ensemble.size()));
      }
      if (next <= current) {
        accepted = true;
        break;
      }
      eta /= 2.0;
    }
    if (accepted) {
      std::swap(f, trial);
      current = next;
    } else {
      eta = 0.0;
    }
    ensemble.add(std::move(tree), eta, src.name);
    loss_curve.push_back(current);
  }
  return ensemble;
}

RankModel train_gbdt(const data::Dataset& d, const TrainParams& p) {
  require_rows(d, "gbdt");
  if (p.trees == 0) throw ConfigError("gbdt: number of trees must be at least 1");
  if (p.learning_rate <= 0.0) throw ConfigError("gbdt: learning rate must be positive");
  const std::size_t n = d.size();
  BoostEnsemble ensemble;
  ensemble.base_score =
      std::accumulate(d.labels.begin(), d.labels.end(), 0.0) / static_cast<double>(n);
  std::vector<double> f(n, ensemble.base_score), h(n), trial(n), r(n);
  auto mse = [&](const std::vector<double>& s) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += (d.labels[i] - s[i]) * (d.labels[i] - s[i]);
    return total / static_cast<double>(n);
  };
  std::vector<double> curve{mse(f)};
  TreeBuilder builder(d.x, d.num_features());
  for (std::size_t t = 0; t < p.trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) r[i] = d.labels[i] - f[i];
    auto tree = builder.fit(r, p.max_depth, p.min_leaf);
    for (std::size_t i = 0; i < n; ++i) h[i] = tree.predict(d.row(i));
    double eta = p.learning_rate;
    bool accepted = false;
    double next = curve.back();
    for (int attempt = 0; attempt < 30; ++attempt) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = f[i] + eta * h[i];
      next = mse(trial);
      check_finite(next, "gbdt", t);
      if (next <= curve.back()) {
        accepted = true;
        break;
      }
      eta /= 2.0;
    }
    if (accepted) {
      std::swap(f, trial);
    } else {
      eta = 0.0;
      next = curve.back();
    }
    ensemble.add(std::move(tree), eta);
    curve.push_back(next);
  }
  return RankModel(ModelKind::kGbdt, d.feature_names, std::move(ensemble),
                   make_meta(std::move(curve), p));
}

RankModel train_gbrt(const data::Dataset& d, std::span<const data::IndexPair> pairs,
                     const TrainParams& p) {
  require_rows(d, "gbrt");
  require_pairs(pairs, d, "gbrt");
  if (p.trees == 0) throw ConfigError("gbrt: number of trees must be at least 1");
  const BoostSource source{&d, pairs, {}, 1.0, false};
  const std::vector<std::size_t> schedule(p.trees, 0);
  std::vector<double> curve;
  auto ensemble = boost_sources(std::span(&source, 1), schedule, p, curve);
  return RankModel(ModelKind::kGbrt, d.feature_names, std::move(ensemble),
                   make_meta(std::move(curve), p));
}

RankModel train_ranksvm(const data::Dataset& d, std::span<const data::IndexPair> pairs,
                        const TrainParams& p) {
  require_rows(d, "ranksvm");
  require_pairs(pairs, d, "ranksvm");
  if (p.c < 0.0) throw ConfigError("ranksvm: C must be non-negative");
  const std::size_t nf = d.num_features();
  const auto scaler = Standardizer::fit(d);
  const auto z = standardized_rows(d, scaler);

  std::vector<double> diff(pairs.size() * nf);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    for (std::size_t c = 0; c < nf; ++c) {
      diff[k * nf + c] = z[pairs[k].preferred * nf + c] - z[pairs[k].other * nf + c];
    }
  }
  auto dot_row = [&](std::size_t k, const std::vector<double>& w) {
    double s = 0.0;
    for (std::size_t c = 0; c < nf; ++c) s += diff[k * nf + c] * w[c];
    return s;
  };

  // Largest eigenvalue of D^T D by power iteration bounds the curvature.
  std::vector<double> v(nf, 1.0 / std::sqrt(static_cast<double>(nf))), u(nf);
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    std::fill(u.begin(), u.end(), 0.0);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const double a = dot_row(k, v);
      for (std::size_t c = 0; c < nf; ++c) u[c] += a * diff[k * nf + c];
    }
    double norm = 0.0;
    for (double x : u) norm += x * x;
    norm = std::sqrt(norm);
    lambda = norm;
    if (norm == 0.0) break;
    for (std::size_t c = 0; c < nf; ++c) v[c] = u[c] / norm;
  }
  const double lipschitz = 1.0 + 2.0 * p.c * lambda * 1.05;
  const double step = p.step > 0.0 ? std::min(p.step, 1.0 / lipschitz) : 1.0 / lipschitz;

  std::vector<double> w(nf, 0.0), grad(nf);
  auto objective = [&](const std::vector<double>& wv) {
    double reg = 0.0;
    for (double x : wv) reg += x * x;
    double loss = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) loss += squared_hinge(dot_row(k, wv));
    return 0.5 * reg + p.c * loss;
  };
  std::vector<double> curve;
  for (std::size_t epoch = 0; epoch < p.epochs; ++epoch) {
    grad = w;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const double m = std::max(0.0, 1.0 - dot_row(k, w));
      if (m == 0.0) continue;
      for (std::size_t c = 0; c < nf; ++c) grad[c] -= 2.0 * p.c * m * diff[k * nf + c];
    }
    for (std::size_t c = 0; c < nf; ++c) w[c] -= step * grad[c];
    const double obj = objective(w);
    check_finite(obj, "ranksvm", epoch);
    curve.push_back(obj);
  }

  LinearParams lp;
  lp.weights.resize(nf);
  for (std::size_t c = 0; c < nf; ++c) {
    lp.weights[c] = w[c] / scaler.scale[c];
    lp.bias -= w[c] * scaler.mean[c] / scaler.scale[c];
  }
  return RankModel(ModelKind::kRankSvm, d.feature_names, std::move(lp),
                   make_meta(std::move(curve), p));
}

nn::Network ranknet_network(std::size_t inputs, const TrainParams& p) {
  nn::Network net(inputs);
  for (auto h : p.hidden) net.dense(h).tanh();
  net.dense(1);
  return net;
}

nn::Network dnn_network(std::size_t inputs, const TrainParams& p) {
  nn::Network net(inputs);
  for (auto h : p.hidden) net.dense(h).relu();
  net.dense(kNumClasses);
  return net;
}

nn::Network cnn_network(std::size_t inputs, const TrainParams& p) {
  if (p.conv_filters.empty()) throw ConfigError("cnn: at least one convolution block required");
  nn::Network net(inputs);
  std::size_t channels = 1;
  for (auto filters : p.conv_filters) {
    net.conv1d(channels, filters, p.conv_width).maxpool(filters, p.pool).relu();
    channels = filters;
  }
  net.dense(p.fc).relu().dense(kNumClasses);
  return net;
}

RankModel train_ranknet(const data::Dataset& d, std::span<const data::IndexPair> pairs,
                        const TrainParams& p) {
  require_rows(d, "ranknet");
  require_pairs(pairs, d, "ranknet");
  const std::size_t nf = d.num_features();
  NeuralParams np{ranknet_network(nf, p), Standardizer::fit(d)};
  np.network.init(p.seed);
  const auto z = standardized_rows(d, np.scaler);
  auto row = [&](std::size_t i) { return std::span<const double>(z.data() + i * nf, nf); };
  nn::Workspace wa, wb;
  auto curve = minibatch_descent(
      np.network, pairs.size(), p, "ranknet",
      [&](std::size_t k, std::span<double> grad) {
        return nn::pair_loss_and_grad(np.network, row(pairs[k].preferred), row(pairs[k].other),
                                      grad, wa, wb);
      },
      [&]() {
        double total = 0.0;
        for (const auto& pr : pairs) {
          const double sa = np.network.forward(row(pr.preferred), wa)[0];
          const double sb = np.network.forward(row(pr.other), wb)[0];
          total += nn::softplus_neg(sa - sb);
        }
        return total / static_cast<double>(pairs.size());
      });
  return RankModel(ModelKind::kRankNet, d.feature_names, std::move(np),
                   make_meta(std::move(curve), p));
}

namespace {

RankModel train_classifier(const data::Dataset& d, const TrainParams& p, ModelKind kind,
                           nn::Network net) {
  const auto name = kind_name(kind);
  std::vector<std::size_t> labels(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) labels[i] = class_index(d.ordinals[i]);
  const std::size_t nf = d.num_features();
  NeuralParams np{std::move(net), Standardizer::fit(d)};
  np.network.init(p.seed);
  const auto z = standardized_rows(d, np.scaler);
  auto row = [&](std::size_t i) { return std::span<const double>(z.data() + i * nf, nf); };
  nn::Workspace ws;
  std::vector<double> dlogits(kNumClasses);
  auto curve = minibatch_descent(
      np.network, d.size(), p, name,
      [&](std::size_t i, std::span<double> grad) {
        return nn::class_loss_and_grad(np.network, row(i), labels[i], grad, ws);
      },
      [&]() {
        double total = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
          total += nn::softmax_cross_entropy(np.network.forward(row(i), ws), labels[i], dlogits);
        }
        return total / static_cast<double>(d.size());
      });
  return RankModel(kind, d.feature_names, std::move(np), make_meta(std::move(curve), p));
}

}  // namespace

RankModel train_dnn(const data::Dataset& d, const TrainParams& p) {
  require_rows(d, "dnn");
  return train_classifier(d, p, ModelKind::kDnn, dnn_network(d.num_features(), p));
}

RankModel train_cnn(const data::Dataset& d, const TrainParams& p) {
  require_rows(d, "cnn");
  return train_classifier(d, p, ModelKind::kCnn, cnn_network(d.num_features(), p));
}

RankModel rule_model(std::vector<std::string> features, RuleParams rule) {
  return RankModel(ModelKind::kRule, std::move(features), std::move(rule));
}

// ---------------------------------------------------------------------------

std::vector<double> score_rows(const Scorer& model, const data::Dataset& d) {
  std::vector<double> out(d.size());
  if (model.features() == d.feature_names) {
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = model.score(d.row(i));
    return out;
  }
  std::vector<std::size_t> cols;
  for (const auto& name : model.features()) {
    auto it = std::find(d.feature_names.begin(), d.feature_names.end(), name);
    if (it == d.feature_names.end()) {
      throw ConfigError("dataset lacks model feature '" + name + "'");
    }
    cols.push_back(static_cast<std::size_t>(it - d.feature_names.begin()));
  }
  std::vector<double> x(cols.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto r = d.row(i);
    for (std::size_t k = 0; k < cols.size(); ++k) x[k] = r[cols[k]];
    out[i] = model.score(x);
  }
  return out;
}

double score(const Scorer& model, const featurize::FeatureVector& x) {
  if (x.schema_id != model.schema_id()) {
    throw ConfigError("feature schema " + x.schema_id + " does not match model schema " +
                      model.schema_id());
  }
  return model.score(x.values);
}

RankedList rank(const Scorer& model, std::span<const Candidate> candidates) {
  RankedList list;
  list.stages = {"model"};
  list.entries.reserve(candidates.size());
  for (const auto& c : candidates) {
    const double s = score(model, c.features);
    list.entries.push_back({c.pin_id, s, {s}});
  }
  sort_entries(list.entries);
  list.counts = {candidates.size(), candidates.size()};
  list.scored = {candidates.size()};
  return list;
}

}  // namespace imgrank::models
