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

#include "imgrank/synthlog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

namespace imgrank::synthlog {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::vector<double> dirichlet(Rng& rng, std::size_t n, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> v(n);
  double total = 0.0;
  for (auto& x : v) {
    x = gamma(rng);
    total += x;
  }
  if (total <= 0.0) {
    std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(n));
    return v;
  }
  for (auto& x : v) x /= total;
  return v;
}

/// Mixture of a point mass on `peak` and a Dirichlet draw, renormalized so
/// the sum is 1 to within rounding.
std::vector<double> peaked_dist(Rng& rng, std::size_t n, std::size_t peak,
                                double peak_mass, double alpha) {
  auto v = dirichlet(rng, n, alpha);
  for (auto& x : v) x *= (1.0 - peak_mass);
  v[peak] += peak_mass;
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  for (auto& x : v) x /= total;
  return v;
}

std::vector<double> gaussian_vec(Rng& rng, std::size_t n, double sigma) {
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

std::string topic_word(std::size_t topic, std::size_t word) {
  return "t" + std::to_string(topic) + "w" + std::to_string(word);
}

std::string general_word(std::size_t word) {
  return "g" + std::to_string(word);
}

/// Geometric-ish word rank so a few words per topic dominate.
std::size_t skewed_index(Rng& rng, std::size_t n) {
  std::geometric_distribution<std::size_t> geo(0.15);
  return std::min(geo(rng), n - 1);
}

std::vector<double> mix_latent(const std::vector<double>& weights,
                               const std::vector<std::vector<double>>& basis,
                               std::size_t dim, Rng& rng, double noise) {
  auto v = gaussian_vec(rng, dim, noise);
  for (std::size_t c = 0; c < weights.size(); ++c) {
    for (std::size_t k = 0; k < dim; ++k) v[k] += weights[c] * basis[c][k];
  }
  return v;
}

}  // namespace

UserSegment UserSegment::neutral(std::size_t n_categories,
                                 std::size_t latent_dim) {
  UserSegment s;
  s.segment_id = kNeutralSegment;
  s.gender = Gender::kUnknown;
  s.category_affinity.assign(n_categories,
                             1.0 / static_cast<double>(n_categories));
  s.latent_vec.assign(latent_dim, 0.0);
  return s;
}

void CorpusParams::validate() const {
  if (n_pins == 0 || n_queries == 0 || n_segments == 0) {
    throw ConfigError("corpus sizes must be at least 1");
  }
  if (n_categories == 0 || n_topics == 0 || latent_dim == 0) {
    throw ConfigError("corpus dims (C, Z, d) must be at least 1");
  }
  if (words_per_topic == 0 || general_words == 0) {
    throw ConfigError("vocabulary sizes must be at least 1");
  }
  if (countries.empty()) throw ConfigError("at least one country is required");
  if (fresh_fraction < 0.0 || fresh_fraction > 1.0) {
    throw ConfigError("fresh_fraction must lie in [0, 1]");
  }
  if (pool_size == 0) throw ConfigError("pool_size must be at least 1");
}

double PlantedTruth::utility(const Query& q, std::size_t query_index,
                             const Pin& p, std::size_t pin_index) const {
  const std::size_t topic = query_topic_.at(query_index);
  const double cat = cosine(q.category_dist, p.category_dist);
  const double top = topic < p.topic_dist.size() ? p.topic_dist[topic] : 0.0;
  const double lat = std::max(0.0, cosine(q.latent_vec, p.latent_vec));
  const double raw = 0.35 * cat + 0.25 * top + 0.15 * lat +
                     0.25 * hidden_quality_.at(pin_index);
  return std::clamp((raw - 0.3) / 0.7, 0.0, 1.0);
}

std::size_t Corpus::pin_index(PinId id) const {
  if (id.value >= 0 && static_cast<std::size_t>(id.value) < pins.size() &&
      pins[static_cast<std::size_t>(id.value)].pin_id == id) {
    return static_cast<std::size_t>(id.value);
  }
  for (std::size_t i = 0; i < pins.size(); ++i) {
    if (pins[i].pin_id == id) return i;
  }
  throw DataError("unknown pin_id " + std::to_string(id.value));
}

std::size_t Corpus::query_index(QueryId id) const {
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (queries[i].query_id == id) return i;
  }
  throw DataError("unknown query_id " + std::to_string(id.value));
}

std::size_t Corpus::segment_index(SegmentId id) const {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].segment_id == id) return i;
  }
  throw DataError("unknown segment_id " + std::to_string(id.value));
}

Corpus generate_corpus(const CorpusParams& params) {
  params.validate();
  Rng rng(params.seed);
  const std::size_t C = params.n_categories;
  const std::size_t Z = params.n_topics;
  const std::size_t d = params.latent_dim;

  std::vector<std::vector<double>> category_basis(C);
  for (auto& v : category_basis) v = gaussian_vec(rng, d, 1.0);
  std::vector<double> category_lean(C);
  for (auto& x : category_lean) x = 2.0 * uniform(rng) - 1.0;

  Corpus corpus;
  corpus.params = params;

  std::vector<double> hidden_quality(params.n_pins);
  corpus.pins.reserve(params.n_pins);
  for (std::size_t i = 0; i < params.n_pins; ++i) {
    Pin p;
    p.pin_id = PinId(static_cast<std::int64_t>(i));
    const std::size_t topic = uniform_index(rng, Z);
    p.topic_dist = peaked_dist(rng, Z, topic, 0.7, 0.3);
    p.category_dist = peaked_dist(rng, C, topic % C, 0.6, 0.3);
    // A small share of pins carry no annotations at all.
    const bool bare = uniform(rng) < 0.02;
    const std::size_t n_tokens = bare ? 0 : 4 + uniform_index(rng, 11);
    std::discrete_distribution<std::size_t> pick_topic(p.topic_dist.begin(),
                                                       p.topic_dist.end());
    for (std::size_t k = 0; k < n_tokens; ++k) {
      if (uniform(rng) < 0.75) {
        const std::size_t t = pick_topic(rng);
        p.annotations.push_back(
            topic_word(t, skewed_index(rng, params.words_per_topic)));
      } else {
        p.annotations.push_back(
            general_word(uniform_index(rng, params.general_words)));
      }
    }
    p.latent_vec = mix_latent(p.category_dist, category_basis, d, rng, 0.6);
    p.linked_country = params.countries[uniform_index(rng, params.countries.size())];
    if (uniform(rng) < params.fresh_fraction) {
      p.age_days = kFreshAgeDays * uniform(rng);
    } else {
      p.age_days = kFreshAgeDays + 1.0 +
                   std::exponential_distribution<double>(1.0 / 300.0)(rng);
    }
    p.social_score = uniform(rng);
    double lean = 0.0;
    for (std::size_t c = 0; c < C; ++c) lean += p.category_dist[c] * category_lean[c];
    p.gender_lean = std::clamp(lean + 0.2 * (uniform(rng) - 0.5), -1.0, 1.0);
    hidden_quality[i] = uniform(rng);
    corpus.pins.push_back(std::move(p));
  }

  std::vector<std::size_t> query_topic(params.n_queries);
  corpus.queries.reserve(params.n_queries);
  for (std::size_t i = 0; i < params.n_queries; ++i) {
    Query q;
    q.query_id = QueryId(static_cast<std::int64_t>(i));
    const std::size_t topic = uniform_index(rng, Z);
    query_topic[i] = topic;
    const std::size_t n_tokens = 1 + uniform_index(rng, 3);
    while (q.tokens.size() < n_tokens) {
      auto w = topic_word(topic, skewed_index(rng, params.words_per_topic));
      if (std::find(q.tokens.begin(), q.tokens.end(), w) == q.tokens.end()) {
        q.tokens.push_back(std::move(w));
      }
    }
    q.category_dist = peaked_dist(rng, C, topic % C, 0.6, 0.3);
    q.latent_vec = mix_latent(q.category_dist, category_basis, d, rng, 0.6);
    q.frequency = 1 + static_cast<std::int64_t>(1000.0 / static_cast<double>(i + 1));
    double lean = 0.0;
    for (std::size_t c = 0; c < C; ++c) lean += q.category_dist[c] * category_lean[c];
    q.male_oriented_score = std::clamp(0.5 + 0.5 * lean, 0.0, 1.0);
    corpus.queries.push_back(std::move(q));
  }

  corpus.segments.reserve(params.n_segments);
  for (std::size_t i = 0; i < params.n_segments; ++i) {
    UserSegment s;
    s.segment_id = SegmentId(static_cast<std::int64_t>(i));
    const double g = uniform(rng);
    s.gender = g < 0.6 ? Gender::kFemale : (g < 0.9 ? Gender::kMale : Gender::kUnknown);
    s.country = params.countries[uniform_index(rng, params.countries.size())];
    s.category_affinity = dirichlet(rng, C, 0.8);
    s.latent_vec = mix_latent(s.category_affinity, category_basis, d, rng, 0.6);
    corpus.segments.push_back(std::move(s));
  }

  const std::size_t pool = std::min(params.pool_size, params.n_pins);
  corpus.pools.resize(params.n_queries);
  std::vector<std::pair<double, std::size_t>> scored(params.n_pins);
  for (std::size_t qi = 0; qi < params.n_queries; ++qi) {
    for (std::size_t pi = 0; pi < params.n_pins; ++pi) {
      scored[pi] = {corpus.pins[pi].topic_dist[query_topic[qi]] + 0.3 * uniform(rng), pi};
    }
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(pool),
                      scored.end(), [](const auto& a, const auto& b) {
                        return a.first != b.first ? a.first > b.first : a.second < b.second;
                      });
    auto& out = corpus.pools[qi];
    out.reserve(pool);
    for (std::size_t k = 0; k < pool; ++k) out.push_back(scored[k].second);
    std::sort(out.begin(), out.end());
  }

  corpus.truth = PlantedTruth(std::move(hidden_quality), std::move(query_topic));
  return corpus;
}

// ---------------------------------------------------------------------------
// Corpus files: corpus.json (params, queries, segments, pools), pins.jsonl,
// truth.json.

namespace {

Json params_to_json(const CorpusParams& p) {
  return Json{{"seed", p.seed},
              {"n_pins", p.n_pins},
              {"n_queries", p.n_queries},
              {"n_segments", p.n_segments},
              {"n_categories", p.n_categories},
              {"n_topics", p.n_topics},
              {"latent_dim", p.latent_dim},
              {"words_per_topic", p.words_per_topic},
              {"general_words", p.general_words},
              {"pool_size", p.pool_size},
              {"fresh_fraction", p.fresh_fraction},
              {"countries", p.countries}};
}

CorpusParams params_from_json(const Json& j) {
  CorpusParams p;
  p.seed = j.value("seed", p.seed);
  p.n_pins = j.value("n_pins", p.n_pins);
  p.n_queries = j.value("n_queries", p.n_queries);
  p.n_segments = j.value("n_segments", p.n_segments);
  p.n_categories = j.value("n_categories", p.n_categories);
  p.n_topics = j.value("n_topics", p.n_topics);
  p.latent_dim = j.value("latent_dim", p.latent_dim);
  p.words_per_topic = j.value("words_per_topic", p.words_per_topic);
  p.general_words = j.value("general_words", p.general_words);
  p.pool_size = j.value("pool_size", p.pool_size);
  p.fresh_fraction = j.value("fresh_fraction", p.fresh_fraction);
  p.countries = j.value("countries", p.countries);
  return p;
}

Json pin_to_json(const Pin& p) {
  return Json{{"pin_id", p.pin_id},
              {"annotations", p.annotations},
              {"category_dist", p.category_dist},
              {"topic_dist", p.topic_dist},
              {"latent_vec", p.latent_vec},
              {"linked_country", p.linked_country},
              {"age_days", p.age_days},
              {"social_score", p.social_score},
              {"gender_lean", p.gender_lean}};
}

Pin pin_from_json(const Json& j) {
  Pin p;
  p.pin_id = j.at("pin_id").get<PinId>();
  p.annotations = j.at("annotations").get<std::vector<std::string>>();
  p.category_dist = j.at("category_dist").get<std::vector<double>>();
  p.topic_dist = j.at("topic_dist").get<std::vector<double>>();
  p.latent_vec = j.at("latent_vec").get<std::vector<double>>();
  p.linked_country = j.at("linked_country").get<std::string>();
  p.age_days = j.at("age_days").get<double>();
  p.social_score = j.at("social_score").get<double>();
  p.gender_lean = j.value("gender_lean", 0.0);
  if (p.age_days < 0.0) throw DataError("pin age_days must be non-negative");
  return p;
}

Json query_to_json(const Query& q) {
  return Json{{"query_id", q.query_id},
              {"tokens", q.tokens},
              {"category_dist", q.category_dist},
              {"latent_vec", q.latent_vec},
              {"frequency", q.frequency},
              {"male_oriented_score", q.male_oriented_score}};
}

Query query_from_json(const Json& j) {
  Query q;
  q.query_id = j.at("query_id").get<QueryId>();
  q.tokens = j.at("tokens").get<std::vector<std::string>>();
  q.category_dist = j.at("category_dist").get<std::vector<double>>();
  q.latent_vec = j.at("latent_vec").get<std::vector<double>>();
  q.frequency = j.at("frequency").get<std::int64_t>();
  q.male_oriented_score = j.at("male_oriented_score").get<double>();
  if (q.frequency < 1) throw DataError("query frequency must be >= 1");
  return q;
}

Json segment_to_json(const UserSegment& s) {
  return Json{{"segment_id", s.segment_id},
              {"gender", gender_name(s.gender)},
              {"country", s.country},
              {"category_affinity", s.category_affinity},
              {"latent_vec", s.latent_vec}};
}

UserSegment segment_from_json(const Json& j) {
  UserSegment s;
  s.segment_id = j.at("segment_id").get<SegmentId>();
  s.gender = parse_gender(j.at("gender").get<std::string>());
  s.country = j.at("country").get<std::string>();
  s.category_affinity = j.at("category_affinity").get<std::vector<double>>();
  s.latent_vec = j.at("latent_vec").get<std::vector<double>>();
  return s;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return in;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Json meta;
  meta["format"] = "imgrank-corpus";
  meta["version"] = 1;
  meta["params"] = params_to_json(corpus.params);
  meta["queries"] = Json::array();
  for (const auto& q : corpus.queries) meta["queries"].push_back(query_to_json(q));
  meta["segments"] = Json::array();
  for (const auto& s : corpus.segments) meta["segments"].push_back(segment_to_json(s));
  meta["pools"] = Json::array();
  for (const auto& pool : corpus.pools) {
    Json ids = Json::array();
    for (auto i : pool) ids.push_back(corpus.pins[i].pin_id);
    meta["pools"].push_back(std::move(ids));
  }
  open_out(dir / "corpus.json") << meta.dump() << '\n';

  auto pins = open_out(dir / "pins.jsonl");
  for (const auto& p : corpus.pins) pins << pin_to_json(p).dump() << '\n';

  Json truth{{"hidden_quality", corpus.truth.hidden_quality()},
             {"query_topic", corpus.truth.query_topic()}};
  open_out(dir / "truth.json") << truth.dump() << '\n';
}

Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus corpus;
  Json meta;
  try {
    meta = Json::parse(open_in(dir / "corpus.json"));
  } catch (const Json::exception& e) {
    throw DataError("corpus.json: " + std::string(e.what()));
  }
  try {
    corpus.params = params_from_json(meta.at("params"));
    for (const auto& q : meta.at("queries")) corpus.queries.push_back(query_from_json(q));
    for (const auto& s : meta.at("segments")) corpus.segments.push_back(segment_from_json(s));

    auto pins_in = open_in(dir / "pins.jsonl");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(pins_in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        corpus.pins.push_back(pin_from_json(Json::parse(line)));
      } catch (const Json::exception& e) {
        throw DataError("pins.jsonl line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    std::unordered_map<PinId, std::size_t> by_id;
    for (std::size_t i = 0; i < corpus.pins.size(); ++i) {
      by_id.emplace(corpus.pins[i].pin_id, i);
    }
    for (const auto& pool : meta.at("pools")) {
      std::vector<std::size_t> idx;
      for (const auto& id : pool) {
        auto it = by_id.find(id.get<PinId>());
        if (it == by_id.end()) throw DataError("pool references unknown pin");
        idx.push_back(it->second);
      }
      corpus.pools.push_back(std::move(idx));
    }
    if (corpus.pools.size() != corpus.queries.size()) {
      throw DataError("corpus.json: pool count does not match query count");
    }

    const auto truth_path = dir / "truth.json";
    if (std::filesystem::exists(truth_path)) {
      Json truth = Json::parse(open_in(truth_path));
      corpus.truth = PlantedTruth(
          truth.at("hidden_quality").get<std::vector<double>>(),
          truth.at("query_topic").get<std::vector<std::size_t>>());
    }
  } catch (const Json::exception& e) {
    throw DataError("corpus " + dir.string() + ": " + e.what());
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Engagement simulation.

std::vector<ActionType> default_action_volumes() {
  return {{Action::kCloseup, 50},
          {Action::kRepin, 20},
          {Action::kLongclick, 15},
          {Action::kClick, 10},
          {Action::kHide, 5}};
}

double position_discount(std::int64_t position, double lambda) {
  return std::pow(1.0 + static_cast<double>(position), -lambda);
}

double freshness_factor(double age_days) {
  return 0.5 + 0.5 * std::exp(-age_days / kFreshAgeDays);
}

std::vector<EngagementRecord> simulate_log(const Corpus& corpus,
                                           const SimParams& params) {
  if (corpus.pins.empty() || corpus.queries.empty() || corpus.segments.empty()) {
    throw DataError("cannot simulate a log over an empty corpus");
  }
  if (params.position_bias < 0.0) {
    throw ConfigError("position bias must be non-negative");
  }
  if (params.page_size == 0) throw ConfigError("page_size must be at least 1");

  std::vector<Action> positive;
  std::vector<double> positive_weights;
  bool has_hide = false;
  for (const auto& a : params.actions) {
    if (a.volume < 1) throw ConfigError("action volumes must be >= 1");
    if (a.name == Action::kHide) {
      has_hide = true;
    } else {
      positive.push_back(a.name);
      positive_weights.push_back(static_cast<double>(a.volume));
    }
  }

  Rng rng(params.seed);
  std::discrete_distribution<std::size_t> pick_action(positive_weights.begin(),
                                                      positive_weights.end());
  std::vector<EngagementRecord> log;
  log.reserve(params.n_sessions * params.page_size);
  std::vector<std::size_t> shown;

  for (std::size_t s = 0; s < params.n_sessions; ++s) {
    const std::size_t qi = uniform_index(rng, corpus.queries.size());
    const std::size_t si = uniform_index(rng, corpus.segments.size());
    const auto& pool = corpus.pools[qi];
    if (pool.empty()) continue;
    shown = pool;
    const std::size_t page = std::min(params.page_size, shown.size());
    // Partial Fisher-Yates: the first `page` entries are a uniform sample in
    // uniform random order, so shown position carries no utility signal.
    for (std::size_t k = 0; k < page; ++k) {
      const std::size_t j = k + uniform_index(rng, shown.size() - k);
      std::swap(shown[k], shown[j]);
    }
    for (std::size_t pos = 0; pos < page; ++pos) {
      const std::size_t pi = shown[pos];
      const Pin& pin = corpus.pins[pi];
      EngagementRecord r;
      r.query_id = corpus.queries[qi].query_id;
      r.segment_id = corpus.segments[si].segment_id;
      r.pin_id = pin.pin_id;
      r.position = static_cast<std::int64_t>(pos);
      r.age_days_at_impression = std::max(0.0, pin.age_days - 7.0 * uniform(rng));

      const double u = corpus.utility(qi, pi);
      const double disc = position_discount(r.position, params.position_bias);
      const double p_engage = u * disc * freshness_factor(r.age_days_at_impression);
      const double draw = uniform(rng);
      if (!positive.empty() && draw < p_engage) {
        r.action_counts[static_cast<std::size_t>(positive[pick_action(rng)])] += 1;
      }
      if (has_hide) {
        const double p_hide = params.hide_rate * (1.0 - u) * disc;
        if (uniform(rng) < p_hide) {
          r.action_counts[static_cast<std::size_t>(Action::kHide)] += 1;
        }
      }
      log.push_back(r);
    }
  }
  return log;
}

// ---------------------------------------------------------------------------
// JSON-lines log I/O.

Json record_to_json(const EngagementRecord& r) {
  Json counts = Json::object();
  for (Action a : kAllActions) {
    const auto c = r.action_counts[static_cast<std::size_t>(a)];
    if (c != 0) counts[std::string(action_name(a))] = c;
  }
  return Json{{"query_id", r.query_id},
              {"segment_id", r.segment_id},
              {"pin_id", r.pin_id},
              {"action_counts", std::move(counts)},
              {"position", r.position},
              {"age_days_at_impression", r.age_days_at_impression}};
}

namespace {

EngagementRecord parse_record(const Json& j, std::size_t line) {
  auto fail = [line](const std::string& msg) {
    return DataError("line " + std::to_string(line) + ": " + msg);
  };
  if (!j.is_object()) throw fail("expected a JSON object");
  for (const char* field : {"query_id", "segment_id", "pin_id", "action_counts",
                            "position", "age_days_at_impression"}) {
    if (!j.contains(field)) throw fail(std::string("missing field '") + field + "'");
  }
  EngagementRecord r;
  try {
    r.query_id = j.at("query_id").get<QueryId>();
    r.segment_id = j.at("segment_id").get<SegmentId>();
    r.pin_id = j.at("pin_id").get<PinId>();
    r.position = j.at("position").get<std::int64_t>();
    r.age_days_at_impression = j.at("age_days_at_impression").get<double>();
  } catch (const Json::exception& e) {
    throw fail(e.what());
  }
  if (r.position < 0) throw fail("position must be non-negative");
  if (r.age_days_at_impression < 0.0) throw fail("age must be non-negative");
  const auto& counts = j.at("action_counts");
  if (!counts.is_object()) throw fail("action_counts must be an object");
  for (const auto& [name, value] : counts.items()) {
    const auto action = parse_action(name);
    if (!action) {
      throw fail("unknown action type '" + name + "' (valid: " +
                 valid_action_names() + ")");
    }
    if (!value.is_number_integer()) throw fail("count for '" + name + "' must be an integer");
    const auto c = value.get<std::int64_t>();
    if (c < 0) throw fail("negative count " + std::to_string(c) + " for '" + name + "'");
    r.action_counts[static_cast<std::size_t>(*action)] = c;
  }
  return r;
}

}  // namespace

EngagementRecord record_from_json(const Json& j) { return parse_record(j, 0); }

void write_log(const std::vector<EngagementRecord>& records, std::ostream& out) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

void write_log(const std::vector<EngagementRecord>& records,
               const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto out = open_out(path);
  write_log(records, out);
}

std::vector<EngagementRecord> read_log(std::istream& in) {
  std::vector<EngagementRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    records.push_back(parse_record(j, line_no));
  }
  return records;
}

std::vector<EngagementRecord> read_log(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_log(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Relevance judgments.

std::vector<RelevanceJudgment> simulate_judgments(const Corpus& corpus,
                                                  const JudgmentParams& params) {
  if (params.raters == 0) throw ConfigError("at least one rater is required");
  Rng rng(params.seed);
  std::normal_distribution<double> noise(0.0, params.rater_noise);
  std::vector<RelevanceJudgment> out;
  for (std::size_t qi = 0; qi < corpus.queries.size(); ++qi) {
    const auto& pool = corpus.pools[qi];
    const std::size_t topic = corpus.truth.query_topic().at(qi);
    std::vector<std::size_t> on_topic, rest;
    for (auto pi : pool) {
      (corpus.pins[pi].topic_dist[topic] > 0.3 ? on_topic : rest).push_back(pi);
    }
    std::shuffle(on_topic.begin(), on_topic.end(), rng);
    std::shuffle(rest.begin(), rest.end(), rng);
    const std::size_t want = std::min(params.pins_per_query, pool.size());
    // Half on-topic, the rest from anywhere in the pool.
    const std::size_t n_on = std::min(want / 2, on_topic.size());
    std::vector<std::size_t> chosen(on_topic.begin(),
                                    on_topic.begin() + static_cast<std::ptrdiff_t>(n_on));
    rest.insert(rest.end(), on_topic.begin() + static_cast<std::ptrdiff_t>(n_on),
                on_topic.end());
    for (std::size_t k = 0; chosen.size() < want && k < rest.size(); ++k) {
      chosen.push_back(rest[k]);
    }
    std::sort(chosen.begin(), chosen.end());
    for (auto pi : chosen) {
      const double u = corpus.utility(qi, pi);
      RelevanceJudgment j;
      j.query_id = corpus.queries[qi].query_id;
      j.pin_id = corpus.pins[pi].pin_id;
      for (std::size_t r = 0; r < params.raters; ++r) {
        j.ratings.push_back(static_cast<int>(
            std::clamp(std::lround(2.0 * u + noise(rng)), 0L, 2L)));
      }
      out.push_back(std::move(j));
    }
  }
  return out;
}

void write_judgments(const std::vector<RelevanceJudgment>& judgments,
                     const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto out = open_out(path);
  for (const auto& j : judgments) {
    out << Json{{"query_id", j.query_id}, {"pin_id", j.pin_id}, {"ratings", j.ratings}}.dump()
        << '\n';
  }
}

std::vector<RelevanceJudgment> read_judgments(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<RelevanceJudgment> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json j = Json::parse(line);
      RelevanceJudgment r;
      r.query_id = j.at("query_id").get<QueryId>();
      r.pin_id = j.at("pin_id").get<PinId>();
      r.ratings = j.at("ratings").get<std::vector<int>>();
      out.push_back(std::move(r));
    } catch (const Json::exception& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace imgrank::synthlog
