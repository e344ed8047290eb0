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

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace imgrank::featurize {

using TokenId = std::uint32_t;

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// Non-negative idf: ln((N - df + 0.5) / (df + 0.5) + 1).
double bm25_idf(double num_docs, double df);

/// Saturated, length-normalized term weight for one occurrence count.
double bm25_term_weight(double tf, double doc_length, double avg_doc_length,
                        const Bm25Params& params);

/// Interned annotation corpus with document frequencies and postings, used
/// as the collection statistics for BM25 and proximity BM25.
class TextIndex {
 public:
  TextIndex() = default;
  explicit TextIndex(std::span<const std::vector<std::string>> documents);

  std::optional<TokenId> token_id(std::string_view token) const;
  std::size_t num_docs() const { return docs_.size(); }
  double avg_doc_length() const { return avg_len_; }
  std::size_t df(TokenId t) const { return postings_[t].size(); }
  std::span<const TokenId> doc_tokens(std::size_t doc) const { return docs_[doc]; }
  std::span<const std::uint32_t> postings(TokenId t) const { return postings_[t]; }

  /// Documents where `a` and `b` occur at distinct positions at most
  /// `window` apart (in either order).
  std::size_t bigram_df(TokenId a, TokenId b, std::size_t window) const;

  std::vector<TokenId> intern(std::span<const std::string> tokens) const;

 private:
  std::unordered_map<std::string, TokenId> vocab_;
  std::vector<std::vector<TokenId>> docs_;
  std::vector<std::vector<std::uint32_t>> postings_;
  double avg_len_ = 0.0;
};

/// Occurrences of the unordered pair (a, b) within `window` positions.
std::size_t window_cooccurrences(std::span<const TokenId> doc, TokenId a,
                                 TokenId b, std::size_t window);

/// Okapi BM25 of `query` against `annotations`, with collection statistics
/// from `index`. Query tokens absent from the index contribute nothing.
double bm25(std::span<const std::string> query,
            std::span<const std::string> annotations, const TextIndex& index,
            const Bm25Params& params = {});

/// BM25 over pseudo-terms formed by consecutive query token pairs that
/// co-occur within `window` positions in the annotations.
double proximity_bm25(std::span<const std::string> query,
                      std::span<const std::string> annotations,
                      const TextIndex& index, std::size_t window,
                      const Bm25Params& params = {});

}  // namespace imgrank::featurize
