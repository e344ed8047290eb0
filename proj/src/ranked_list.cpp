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

#include "imgrank/ranked_list.hpp"

#include <algorithm>

namespace imgrank {

std::vector<PinId> RankedList::pin_ids() const {
  std::vector<PinId> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.pin_id);
  return out;
}

bool RankedList::same_result(const RankedList& o) const {
  return query_id == o.query_id && segment_id == o.segment_id && stages == o.stages &&
         entries == o.entries && counts == o.counts && scored == o.scored;
}

bool ranks_before(const RankedEntry& a, const RankedEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.pin_id < b.pin_id;
}

void sort_entries(std::vector<RankedEntry>& entries) {
  std::sort(entries.begin(), entries.end(), ranks_before);
}

Json to_json(const RankedList& list, bool with_timings) {
  Json entries = Json::array();
  for (const auto& e : list.entries) {
    entries.push_back(Json{{"pin_id", e.pin_id}, {"score", e.score}, {"stage_scores", e.stage_scores}});
  }
  Json j{{"query_id", list.query_id},
         {"segment_id", list.segment_id},
         {"stages", list.stages},
         {"counts", list.counts},
         {"scored", list.scored},
         {"entries", std::move(entries)}};
  if (with_timings) j["stage_ms"] = list.stage_ms;
  return j;
}

RankedList ranked_list_from_json(const Json& j) {
  try {
    RankedList list;
    list.query_id = j.at("query_id").get<QueryId>();
    list.segment_id = j.at("segment_id").get<SegmentId>();
    list.stages = j.value("stages", std::vector<std::string>{});
    list.counts = j.value("counts", std::vector<std::size_t>{});
    list.scored = j.value("scored", std::vector<std::size_t>{});
    list.stage_ms = j.value("stage_ms", std::vector<double>{});
    for (const auto& e : j.at("entries")) {
      list.entries.push_back({e.at("pin_id").get<PinId>(), e.at("score").get<double>(),
                              e.value("stage_scores", std::vector<double>{})});
    }
    return list;
  } catch (const Json::exception& e) {
    throw DataError(std::string("ranked list: ") + e.what());
  }
}

}  // namespace imgrank
