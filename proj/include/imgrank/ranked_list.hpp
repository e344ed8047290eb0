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

#include <string>
#include <vector>

#include "imgrank/types.hpp"

namespace imgrank {

struct RankedEntry {
  PinId pin_id;
  double score = 0.0;
  /// Score from every stage the entry passed through, in stage order.
  std::vector<double> stage_scores;

  bool operator==(const RankedEntry&) const = default;
};

struct RankedList {
  QueryId query_id;
  SegmentId segment_id;
  std::vector<std::string> stages;
  std::vector<RankedEntry> entries;
  /// Candidate count entering the first stage, then survivors per stage.
  std::vector<std::size_t> counts;
  /// Candidates actually scored per stage.
  std::vector<std::size_t> scored;
  /// Wall time per stage in milliseconds; not part of equality.
  std::vector<double> stage_ms;

  GroupKey group() const { return {query_id, segment_id}; }
  std::vector<PinId> pin_ids() const;
  bool same_result(const RankedList& other) const;
};

/// Score descending, ties by ascending pin id.
bool ranks_before(const RankedEntry& a, const RankedEntry& b);
void sort_entries(std::vector<RankedEntry>& entries);

Json to_json(const RankedList& list, bool with_timings = true);
RankedList ranked_list_from_json(const Json& j);

}  // namespace imgrank
