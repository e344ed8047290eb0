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

#include "imgrank/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace imgrank::featurize {

namespace {

constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "bm25",
    "proximity_bm25",
    "categoryboost",
    "topicboost",
    "embedding_sim",
    "navboost_closeup",
    "navboost_click",
    "navboost_longclick",
    "navboost_repin",
    "navboost_gender_engaged",
    "navboost_pin_engaged",
    "tokenboost",
    "query_ctr",
    "gender_match",
    "personal_category",
    "personal_embedding",
    "query_length",
    "query_log_frequency",
    "query_male_score",
    "social_score",
    "freshness",
    "locale_match",
    "annotations_present",
    "diversity_penalty",
};

std::vector<std::string> names_of(std::initializer_list<Feature> fs) {
  std::vector<std::string> out;
  for (Feature f : fs) out.emplace_back(feature_name(f));
  return out;
}

}  // namespace

std::string_view feature_name(Feature f) {
  return kFeatureNames.at(static_cast<std::size_t>(f));
}

std::optional<Feature> parse_feature(std::string_view name) {
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    if (kFeatureNames[i] == name) return static_cast<Feature>(i);
  }
  return std::nullopt;
}

std::string schema_id_for(std::span<const std::string> names) {
  // FNV-1a over the newline-joined names.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& n : names) {
    for (unsigned char c : n) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= '\n';
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out = "fs-";
  for (int shift = 60; shift >= 0; shift -= 4) out += kHex[(h >> shift) & 0xf];
  return out;
}

FeatureSchema::FeatureSchema(std::vector<std::string> names,
                             std::map<std::string, std::vector<std::string>> subsets)
    : names_(std::move(names)), subsets_(std::move(subsets)) {
  for (const auto& [subset, members] : subsets_) {
    for (const auto& m : members) {
      if (std::find(names_.begin(), names_.end(), m) == names_.end()) {
        throw ConfigError("feature subset '" + subset + "' names unknown feature '" + m + "'");
      }
    }
  }
  schema_id_ = schema_id_for(names_);
}

FeatureSchema FeatureSchema::standard() {
  std::vector<std::string> all(kFeatureNames.begin(), kFeatureNames.end());
  std::map<std::string, std::vector<std::string>> subsets;
  subsets[std::string(kLightweightSubset)] =
      names_of({Feature::kBm25, Feature::kNavboostRepin, Feature::kNavboostClick,
                Feature::kTokenboost, Feature::kCategoryBoost, Feature::kFreshness,
                Feature::kSocialScore, Feature::kLocaleMatch});
  subsets[std::string(kFullSubset)] = all;
  subsets[std::string(kRerankSubset)] =
      names_of({Feature::kFreshness, Feature::kLocaleMatch, Feature::kNavboostRepin,
                Feature::kNavboostClick, Feature::kEmbeddingSim, Feature::kDiversityPenalty});
  return FeatureSchema(std::move(all), std::move(subsets));
}

const std::vector<std::string>& FeatureSchema::subset(std::string_view name) const {
  auto it = subsets_.find(std::string(name));
  if (it == subsets_.end()) {
    throw ConfigError("unknown feature subset '" + std::string(name) + "'");
  }
  return it->second;
}

std::vector<std::size_t> FeatureSchema::subset_columns(std::string_view name) const {
  std::vector<std::size_t> cols;
  for (const auto& n : subset(name)) {
    cols.push_back(static_cast<std::size_t>(
        std::find(names_.begin(), names_.end(), n) - names_.begin()));
  }
  return cols;
}

Json FeatureSchema::to_json() const {
  return Json{{"schema_id", schema_id_}, {"names", names_}, {"stage_subsets", subsets_}};
}

FeatureSchema FeatureSchema::from_json(const Json& j) {
  try {
    FeatureSchema s(j.at("names").get<std::vector<std::string>>(),
                    j.at("stage_subsets").get<std::map<std::string, std::vector<std::string>>>());
    if (j.contains("schema_id") && j.at("schema_id").get<std::string>() != s.schema_id()) {
      throw DataError("schema_id does not match feature names");
    }
    return s;
  } catch (const Json::exception& e) {
    throw DataError(std::string("feature schema: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

double categoryboost(std::span<const double> query_dist, std::span<const double> pin_dist) {
  return std::clamp(cosine(query_dist, pin_dist), 0.0, 1.0);
}

double topicboost(std::span<const double> query_dist, std::span<const double> pin_dist) {
  return std::clamp(cosine(query_dist, pin_dist), 0.0, 1.0);
}

double embedding_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("embedding dimensions differ");
  return cosine(a, b);
}

double gender_feature(const synthlog::Pin& pin, const synthlog::UserSegment& segment) {
  const double lean = std::clamp(pin.gender_lean, -1.0, 1.0);
  switch (segment.gender) {
    case Gender::kMale:
      return 1.0 - std::max(0.0, -lean);
    case Gender::kFemale:
      return 1.0 - std::max(0.0, lean);
    case Gender::kUnknown:
      break;
  }
  return 1.0 - 0.5 * std::abs(lean);
}

Personalization personalization_features(const synthlog::UserSegment& segment,
                                         const synthlog::Pin& pin) {
  return {categoryboost(segment.category_affinity, pin.category_dist),
          cosine(segment.latent_vec, pin.latent_vec)};
}

double freshness_feature(double age_days) {
  return std::exp(-std::max(0.0, age_days) / kFreshAgeDays);
}

// ---------------------------------------------------------------------------

double smoothed_propensity(double positives, double impressions,
                           const SmoothingParams& smoothing) {
  return (positives + smoothing.alpha) / (impressions + smoothing.alpha + smoothing.beta);
}

double NavboostTable::prior() const { return smoothed_propensity(0.0, 0.0, smoothing_); }

std::int64_t NavboostTable::gender_key(QueryId q, Gender g) {
  return q.value * 4 + static_cast<std::int64_t>(g);
}

void NavboostTable::add(const synthlog::EngagementRecord& record, Gender gender,
                        std::span<const std::string> query_tokens) {
  auto update = [&record](EngagementStats& s) {
    ++s.impressions;
    bool engaged = false;
    for (std::size_t a = 0; a < kNumActions; ++a) {
      if (record.action_counts[a] > 0) {
        ++s.positives[a];
        if (is_positive_action(static_cast<Action>(a))) engaged = true;
      }
    }
    if (engaged) ++s.engaged;
  };
  update(by_query_[record.query_id][record.pin_id]);
  update(by_query_gender_[gender_key(record.query_id, gender)][record.pin_id]);
  update(by_pin_[record.pin_id]);
  update(by_query_total_[record.query_id]);
  std::set<std::string_view> seen;
  for (const auto& tok : query_tokens) {
    if (seen.insert(tok).second) update(by_token_[tok][record.pin_id]);
  }
}

const NavboostTable::PinStats* NavboostTable::query_pins(QueryId q) const {
  auto it = by_query_.find(q);
  return it == by_query_.end() ? nullptr : &it->second;
}

const NavboostTable::PinStats* NavboostTable::query_gender_pins(QueryId q, Gender g) const {
  auto it = by_query_gender_.find(gender_key(q, g));
  return it == by_query_gender_.end() ? nullptr : &it->second;
}

const NavboostTable::PinStats* NavboostTable::token_pins(const std::string& token) const {
  auto it = by_token_.find(token);
  return it == by_token_.end() ? nullptr : &it->second;
}

const EngagementStats* NavboostTable::pin(PinId p) const {
  auto it = by_pin_.find(p);
  return it == by_pin_.end() ? nullptr : &it->second;
}

const EngagementStats* NavboostTable::query_total(QueryId q) const {
  auto it = by_query_total_.find(q);
  return it == by_query_total_.end() ? nullptr : &it->second;
}

double NavboostTable::propensity(const EngagementStats* stats, Action action) const {
  if (!stats) return prior();
  return smoothed_propensity(static_cast<double>(stats->positives[static_cast<std::size_t>(action)]),
                             static_cast<double>(stats->impressions), smoothing_);
}

double NavboostTable::engaged_propensity(const EngagementStats* stats) const {
  if (!stats) return prior();
  return smoothed_propensity(static_cast<double>(stats->engaged),
                             static_cast<double>(stats->impressions), smoothing_);
}

std::size_t NavboostTable::size() const {
  std::size_t n = by_pin_.size() + by_query_total_.size();
  for (const auto& [k, v] : by_query_) n += v.size();
  for (const auto& [k, v] : by_query_gender_) n += v.size();
  for (const auto& [k, v] : by_token_) n += v.size();
  return n;
}

namespace {

Json stats_json(const EngagementStats& s) {
  return Json{s.impressions, s.positives, s.engaged};
}

EngagementStats stats_from(const Json& j, std::size_t offset) {
  EngagementStats s;
  s.impressions = j.at(offset).get<std::int64_t>();
  s.positives = j.at(offset + 1).get<PerAction<std::int64_t>>();
  s.engaged = j.at(offset + 2).get<std::int64_t>();
  return s;
}

template <typename K, typename V>
std::vector<std::pair<K, const V*>> sorted_entries(const std::unordered_map<K, V>& m) {
  std::vector<std::pair<K, const V*>> out;
  for (const auto& [k, v] : m) out.emplace_back(k, &v);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

}  // namespace

Json NavboostTable::to_json() const {
  Json j;
  j["alpha"] = smoothing_.alpha;
  j["beta"] = smoothing_.beta;
  Json qp = Json::array();
  for (const auto& [q, pins] : sorted_entries(by_query_)) {
    for (const auto& [p, s] : sorted_entries(*pins)) {
      Json row{q, p};
      for (auto& v : stats_json(*s)) row.push_back(v);
      qp.push_back(std::move(row));
    }
  }
  j["query_pin"] = std::move(qp);
  Json qg = Json::array();
  for (const auto& [key, pins] : sorted_entries(by_query_gender_)) {
    for (const auto& [p, s] : sorted_entries(*pins)) {
      Json row{key, p};
      for (auto& v : stats_json(*s)) row.push_back(v);
      qg.push_back(std::move(row));
    }
  }
  j["query_gender_pin"] = std::move(qg);
  Json tp = Json::array();
  for (const auto& [tok, pins] : sorted_entries(by_token_)) {
    for (const auto& [p, s] : sorted_entries(*pins)) {
      Json row{tok, p};
      for (auto& v : stats_json(*s)) row.push_back(v);
      tp.push_back(std::move(row));
    }
  }
  j["token_pin"] = std::move(tp);
  Json pn = Json::array();
  for (const auto& [p, s] : sorted_entries(by_pin_)) {
    Json row{p};
    for (auto& v : stats_json(*s)) row.push_back(v);
    pn.push_back(std::move(row));
  }
  j["pin"] = std::move(pn);
  Json qt = Json::array();
  for (const auto& [q, s] : sorted_entries(by_query_total_)) {
    Json row{q};
    for (auto& v : stats_json(*s)) row.push_back(v);
    qt.push_back(std::move(row));
  }
  j["query_total"] = std::move(qt);
  return j;
}

NavboostTable NavboostTable::from_json(const Json& j) {
  try {
    NavboostTable t({j.at("alpha").get<double>(), j.at("beta").get<double>()});
    for (const auto& row : j.at("query_pin")) {
      t.by_query_[row.at(0).get<QueryId>()][row.at(1).get<PinId>()] = stats_from(row, 2);
    }
    for (const auto& row : j.at("query_gender_pin")) {
      t.by_query_gender_[row.at(0).get<std::int64_t>()][row.at(1).get<PinId>()] =
          stats_from(row, 2);
    }
    for (const auto& row : j.at("token_pin")) {
      t.by_token_[row.at(0).get<std::string>()][row.at(1).get<PinId>()] = stats_from(row, 2);
    }
    for (const auto& row : j.at("pin")) t.by_pin_[row.at(0).get<PinId>()] = stats_from(row, 1);
    for (const auto& row : j.at("query_total")) {
      t.by_query_total_[row.at(0).get<QueryId>()] = stats_from(row, 1);
    }
    return t;
  } catch (const Json::exception& e) {
    throw DataError(std::string("navboost table: ") + e.what());
  }
}

bool NavboostTable::operator==(const NavboostTable& o) const {
  return smoothing_.alpha == o.smoothing_.alpha && smoothing_.beta == o.smoothing_.beta &&
         by_query_ == o.by_query_ && by_query_gender_ == o.by_query_gender_ &&
         by_token_ == o.by_token_ && by_pin_ == o.by_pin_ && by_query_total_ == o.by_query_total_;
}

NavboostTable build_navboost(std::span<const synthlog::EngagementRecord> records,
                             const std::vector<synthlog::Query>& queries,
                             const std::vector<synthlog::UserSegment>& segments,
                             const SmoothingParams& smoothing,
                             const std::set<GroupKey>* allowed_groups) {
  std::unordered_map<QueryId, const synthlog::Query*> query_by_id;
  for (const auto& q : queries) query_by_id.emplace(q.query_id, &q);
  std::unordered_map<SegmentId, Gender> gender_by_id;
  for (const auto& s : segments) gender_by_id.emplace(s.segment_id, s.gender);

  NavboostTable table(smoothing);
  static const std::vector<std::string> kNoTokens;
  for (const auto& r : records) {
    if (allowed_groups && !allowed_groups->contains(r.group())) continue;
    auto q = query_by_id.find(r.query_id);
    auto g = gender_by_id.find(r.segment_id);
    table.add(r, g == gender_by_id.end() ? Gender::kUnknown : g->second,
              q == query_by_id.end() ? kNoTokens : q->second->tokens);
  }
  return table;
}

// ---------------------------------------------------------------------------

Featurizer::Featurizer(std::span<const synthlog::Pin> pins, const NavboostTable& navboost,
                       FeatureSchema schema, Bm25Params bm25, std::size_t proximity_window)
    : pins_(pins),
      navboost_(&navboost),
      schema_(std::move(schema)),
      bm25_(bm25),
      window_(proximity_window) {
  for (const auto& name : schema_.names()) {
    const auto f = parse_feature(name);
    if (!f) throw ConfigError("schema names unknown feature '" + name + "'");
    column_features_.push_back(*f);
  }
  std::vector<std::vector<std::string>> docs;
  docs.reserve(pins.size());
  for (std::size_t i = 0; i < pins.size(); ++i) {
    docs.push_back(pins[i].annotations);
    doc_of_.emplace(pins[i].pin_id, i);
  }
  index_ = TextIndex(docs);
}

std::size_t Featurizer::doc_index(const synthlog::Pin& pin) const {
  const auto v = pin.pin_id.value;
  if (v >= 0 && static_cast<std::size_t>(v) < pins_.size() &&
      pins_[static_cast<std::size_t>(v)].pin_id == pin.pin_id) {
    return static_cast<std::size_t>(v);
  }
  auto it = doc_of_.find(pin.pin_id);
  if (it == doc_of_.end()) {
    throw DataError("pin " + std::to_string(v) + " is not part of the featurized corpus");
  }
  return it->second;
}

QueryContext Featurizer::prepare(const synthlog::Query& query,
                                 const synthlog::UserSegment& segment) const {
  QueryContext ctx;
  ctx.query = &query;
  ctx.segment = &segment;
  const double n = static_cast<double>(index_.num_docs());
  for (const auto& tok : query.tokens) {
    if (auto id = index_.token_id(tok)) {
      ctx.token_ids.push_back(*id);
      ctx.token_idf.push_back(bm25_idf(n, static_cast<double>(index_.df(*id))));
    }
  }
  for (std::size_t k = 0; k + 1 < query.tokens.size(); ++k) {
    const auto a = index_.token_id(query.tokens[k]);
    const auto b = index_.token_id(query.tokens[k + 1]);
    if (!a || !b) continue;
    ctx.bigrams.push_back(
        {*a, *b, bm25_idf(n, static_cast<double>(index_.bigram_df(*a, *b, window_)))});
  }

  // Query topic distribution: mean topic mix of the pins whose annotations
  // contain a query token.
  std::size_t n_topics = pins_.empty() ? 0 : pins_.front().topic_dist.size();
  ctx.topic_dist.assign(n_topics, 0.0);
  double mass = 0.0;
  for (auto t : ctx.token_ids) {
    for (auto doc : index_.postings(t)) {
      const auto& td = pins_[doc].topic_dist;
      for (std::size_t z = 0; z < n_topics && z < td.size(); ++z) ctx.topic_dist[z] += td[z];
      mass += 1.0;
    }
  }
  if (mass > 0.0) {
    for (auto& x : ctx.topic_dist) x /= mass;
  } else if (n_topics > 0) {
    std::fill(ctx.topic_dist.begin(), ctx.topic_dist.end(), 1.0 / static_cast<double>(n_topics));
  }

  ctx.nav_query = navboost_->query_pins(query.query_id);
  ctx.nav_query_gender = navboost_->query_gender_pins(query.query_id, segment.gender);
  std::set<std::string_view> seen;
  for (const auto& tok : query.tokens) {
    if (seen.insert(tok).second) ctx.nav_tokens.push_back(navboost_->token_pins(tok));
  }
  ctx.query_ctr = navboost_->engaged_propensity(navboost_->query_total(query.query_id));
  return ctx;
}

namespace {

const EngagementStats* lookup(const NavboostTable::PinStats* m, PinId p) {
  if (!m) return nullptr;
  auto it = m->find(p);
  return it == m->end() ? nullptr : &it->second;
}

}  // namespace

double Featurizer::feature(const QueryContext& ctx, const synthlog::Pin& pin, Feature f) const {
  const auto& q = *ctx.query;
  const auto& seg = *ctx.segment;
  switch (f) {
    case Feature::kBm25: {
      const auto doc = index_.doc_tokens(doc_index(pin));
      double s = 0.0;
      for (std::size_t k = 0; k < ctx.token_ids.size(); ++k) {
        const auto tf = static_cast<double>(std::count(doc.begin(), doc.end(), ctx.token_ids[k]));
        if (tf > 0.0) {
          s += ctx.token_idf[k] * bm25_term_weight(tf, static_cast<double>(doc.size()),
                                                   index_.avg_doc_length(), bm25_);
        }
      }
      return s;
    }
    case Feature::kProximityBm25: {
      if (ctx.bigrams.empty()) return 0.0;
      const auto doc = index_.doc_tokens(doc_index(pin));
      double s = 0.0;
      for (const auto& bg : ctx.bigrams) {
        const auto tf = static_cast<double>(window_cooccurrences(doc, bg.a, bg.b, window_));
        if (tf > 0.0) {
          s += bg.idf * bm25_term_weight(tf, static_cast<double>(doc.size()),
                                         index_.avg_doc_length(), bm25_);
        }
      }
      return s;
    }
    case Feature::kCategoryBoost:
      return categoryboost(q.category_dist, pin.category_dist);
    case Feature::kTopicBoost:
      return topicboost(ctx.topic_dist, pin.topic_dist);
    case Feature::kEmbeddingSim:
      return cosine(q.latent_vec, pin.latent_vec);
    case Feature::kNavboostCloseup:
      return navboost_->propensity(lookup(ctx.nav_query, pin.pin_id), Action::kCloseup);
    case Feature::kNavboostClick:
      return navboost_->propensity(lookup(ctx.nav_query, pin.pin_id), Action::kClick);
    case Feature::kNavboostLongclick:
      return navboost_->propensity(lookup(ctx.nav_query, pin.pin_id), Action::kLongclick);
    case Feature::kNavboostRepin:
      return navboost_->propensity(lookup(ctx.nav_query, pin.pin_id), Action::kRepin);
    case Feature::kNavboostGenderEngaged:
      return navboost_->engaged_propensity(lookup(ctx.nav_query_gender, pin.pin_id));
    case Feature::kNavboostPinEngaged:
      return navboost_->engaged_propensity(navboost_->pin(pin.pin_id));
    case Feature::kTokenboost: {
      if (ctx.nav_tokens.empty()) return navboost_->prior();
      double s = 0.0;
      for (const auto* m : ctx.nav_tokens) {
        s += navboost_->engaged_propensity(lookup(m, pin.pin_id));
      }
      return s / static_cast<double>(ctx.nav_tokens.size());
    }
    case Feature::kQueryCtr:
      return ctx.query_ctr;
    case Feature::kGenderMatch:
      return gender_feature(pin, seg);
    case Feature::kPersonalCategory:
      return categoryboost(seg.category_affinity, pin.category_dist);
    case Feature::kPersonalEmbedding:
      return cosine(seg.latent_vec, pin.latent_vec);
    case Feature::kQueryLength:
      return static_cast<double>(q.tokens.size());
    case Feature::kQueryLogFrequency:
      return std::log1p(static_cast<double>(q.frequency));
    case Feature::kQueryMaleScore:
      return q.male_oriented_score;
    case Feature::kSocialScore:
      return pin.social_score;
    case Feature::kFreshness:
      return freshness_feature(pin.age_days);
    case Feature::kLocaleMatch:
      return !seg.country.empty() && seg.country == pin.linked_country ? 1.0 : 0.0;
    case Feature::kAnnotationsPresent:
      return pin.annotations.empty() ? 0.0 : 1.0;
    case Feature::kDiversityPenalty:
    case Feature::kCount:
      break;
  }
  return 0.0;
}

void Featurizer::compute(const QueryContext& ctx, const synthlog::Pin& pin,
                         std::span<const std::size_t> columns, std::span<double> out) const {
  for (std::size_t k = 0; k < columns.size(); ++k) {
    out[k] = feature(ctx, pin, column_features_[columns[k]]);
  }
}

FeatureVector Featurizer::featurize(const QueryContext& ctx, const synthlog::Pin& pin) const {
  FeatureVector v;
  v.schema_id = schema_.schema_id();
  v.values.resize(column_features_.size());
  for (std::size_t k = 0; k < column_features_.size(); ++k) {
    v.values[k] = feature(ctx, pin, column_features_[k]);
  }
  return v;
}

FeatureVector Featurizer::featurize(const synthlog::Query& query,
                                    const synthlog::UserSegment& segment,
                                    const synthlog::Pin& pin) const {
  return featurize(prepare(query, segment), pin);
}

// ---------------------------------------------------------------------------

void write_feature_rows(std::span<const FeatureRow> rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : rows) {
    out << Json{{"query_id", r.query_id},
                {"pin_id", r.pin_id},
                {"segment_id", r.segment_id},
                {"values", r.values}}
               .dump()
        << '\n';
  }
}

std::vector<FeatureRow> read_feature_rows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<FeatureRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      rows.push_back({j.at("query_id").get<QueryId>(), j.at("segment_id").get<SegmentId>(),
                      j.at("pin_id").get<PinId>(), j.at("values").get<std::vector<double>>()});
    } catch (const Json::exception& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace imgrank::featurize
