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

#include "imgrank/text_index.hpp"

#include <algorithm>
#include <cmath>

namespace imgrank::featurize {

double bm25_idf(double num_docs, double df) {
  return std::log((num_docs - df + 0.5) / (df + 0.5) + 1.0);
}

double bm25_term_weight(double tf, double doc_length, double avg_doc_length,
                        const Bm25Params& params) {
  if (tf <= 0.0) return 0.0;
  const double norm = avg_doc_length > 0.0 ? doc_length / avg_doc_length : 1.0;
  return tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm));
}

TextIndex::TextIndex(std::span<const std::vector<std::string>> documents) {
  docs_.reserve(documents.size());
  std::size_t total = 0;
  for (std::uint32_t d = 0; d < documents.size(); ++d) {
    std::vector<TokenId> ids;
    ids.reserve(documents[d].size());
    for (const auto& tok : documents[d]) {
      auto [it, inserted] = vocab_.try_emplace(tok, static_cast<TokenId>(vocab_.size()));
      if (inserted) postings_.emplace_back();
      ids.push_back(it->second);
      auto& plist = postings_[it->second];
      if (plist.empty() || plist.back() != d) plist.push_back(d);
    }
    total += ids.size();
    docs_.push_back(std::move(ids));
  }
  avg_len_ = docs_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs_.size());
}

std::optional<TokenId> TextIndex::token_id(std::string_view token) const {
  auto it = vocab_.find(std::string(token));
  if (it == vocab_.end()) return std::nullopt;
  return it->second;
}

std::vector<TokenId> TextIndex::intern(std::span<const std::string> tokens) const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (auto id = token_id(t)) out.push_back(*id);
  }
  return out;
}

std::size_t window_cooccurrences(std::span<const TokenId> doc, TokenId a,
                                 TokenId b, std::size_t window) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (doc[i] != a) continue;
    const std::size_t lo = i >= window ? i - window : 0;
    const std::size_t hi = std::min(doc.size() - 1, i + window);
    for (std::size_t j = lo; j <= hi; ++j) {
      if (j != i && doc[j] == b) ++count;
    }
  }
  return count;
}

std::size_t TextIndex::bigram_df(TokenId a, TokenId b, std::size_t window) const {
  const auto& pa = postings_[a];
  const auto& pb = postings_[b];
  std::size_t df = 0;
  std::size_t i = 0, j = 0;
  while (i < pa.size() && j < pb.size()) {
    if (pa[i] < pb[j]) {
      ++i;
    } else if (pb[j] < pa[i]) {
      ++j;
    } else {
      if (window_cooccurrences(docs_[pa[i]], a, b, window) > 0) ++df;
      ++i;
      ++j;
    }
  }
  return df;
}

namespace {

std::vector<TokenId> intern_with_unknown(const TextIndex& index,
                                         std::span<const std::string> tokens,
                                         TokenId unknown) {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(index.token_id(t).value_or(unknown));
  return out;
}

constexpr TokenId kUnknownToken = static_cast<TokenId>(-1);

}  // namespace

double bm25(std::span<const std::string> query,
            std::span<const std::string> annotations, const TextIndex& index,
            const Bm25Params& params) {
  const auto doc = intern_with_unknown(index, annotations, kUnknownToken);
  const double n = static_cast<double>(index.num_docs());
  double score = 0.0;
  for (const auto& tok : query) {
    const auto id = index.token_id(tok);
    if (!id) continue;
    const auto tf = static_cast<double>(std::count(doc.begin(), doc.end(), *id));
    if (tf == 0.0) continue;
    score += bm25_idf(n, static_cast<double>(index.df(*id))) *
             bm25_term_weight(tf, static_cast<double>(doc.size()), index.avg_doc_length(), params);
  }
  return score;
}

double proximity_bm25(std::span<const std::string> query,
                      std::span<const std::string> annotations,
                      const TextIndex& index, std::size_t window,
                      const Bm25Params& params) {
  if (query.size() < 2 || window == 0) return 0.0;
  const auto doc = intern_with_unknown(index, annotations, kUnknownToken);
  const double n = static_cast<double>(index.num_docs());
  double score = 0.0;
  for (std::size_t k = 0; k + 1 < query.size(); ++k) {
    const auto a = index.token_id(query[k]);
    const auto b = index.token_id(query[k + 1]);
    if (!a || !b) continue;
    const auto tf = static_cast<double>(window_cooccurrences(doc, *a, *b, window));
    if (tf == 0.0) continue;
    const auto df = static_cast<double>(index.bigram_df(*a, *b, window));
    score += bm25_idf(n, df) *
             bm25_term_weight(tf, static_cast<double>(doc.size()), index.avg_doc_length(), params);
  }
  return score;
}

}  // namespace imgrank::featurize
