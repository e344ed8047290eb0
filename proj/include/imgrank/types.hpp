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

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"

namespace imgrank {

using Json = nlohmann::json;

/// Integer identifier tagged with the entity it names, so a pin id can never
/// be passed where a query id is expected.
template <typename Tag>
struct StrongId {
  std::int64_t value = 0;

  constexpr StrongId() = default;
  constexpr explicit StrongId(std::int64_t v) : value(v) {}

  constexpr auto operator<=>(const StrongId&) const = default;
};

using PinId = StrongId<struct PinTag>;
using QueryId = StrongId<struct QueryTag>;
using SegmentId = StrongId<struct SegmentTag>;

template <typename Tag>
void to_json(Json& j, const StrongId<Tag>& id) {
  j = id.value;
}

template <typename Tag>
void from_json(const Json& j, StrongId<Tag>& id) {
  id.value = j.get<std::int64_t>();
}

/// Relevance judgments are not tied to a user segment; they are featurized
/// against a neutral segment carrying this id.
inline constexpr SegmentId kNeutralSegment{-1};

/// A (query, user-segment) training group.
struct GroupKey {
  QueryId query;
  SegmentId segment;

  auto operator<=>(const GroupKey&) const = default;
};

// Error taxonomy. The CLI maps each to a distinct exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

enum class Action : int { kRepin = 0, kClick, kCloseup, kLongclick, kHide };
inline constexpr std::size_t kNumActions = 5;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::kRepin, Action::kClick, Action::kCloseup, Action::kLongclick,
    Action::kHide};

std::string_view action_name(Action a);
std::optional<Action> parse_action(std::string_view name);
/// Comma separated list of valid action names, for error messages.
std::string valid_action_names();

constexpr bool is_positive_action(Action a) { return a != Action::kHide; }

/// Per-action values indexed by Action.
template <typename T>
using PerAction = std::array<T, kNumActions>;

using ActionCounts = PerAction<std::int64_t>;

enum class Gender { kFemale, kMale, kUnknown };

std::string_view gender_name(Gender g);
Gender parse_gender(std::string_view name);

/// Pins at most this many days old count as fresh.
inline constexpr double kFreshAgeDays = 30.0;

constexpr bool is_fresh(double age_days) { return age_days <= kFreshAgeDays; }

/// 64-bit mix used to derive independent per-group seeds from a run seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace imgrank

template <typename Tag>
struct std::hash<imgrank::StrongId<Tag>> {
  std::size_t operator()(const imgrank::StrongId<Tag>& id) const noexcept {
    return std::hash<std::int64_t>{}(id.value);
  }
};

template <>
struct std::hash<imgrank::GroupKey> {
  std::size_t operator()(const imgrank::GroupKey& k) const noexcept {
    return static_cast<std::size_t>(imgrank::mix_seed(
        static_cast<std::uint64_t>(k.query.value),
        static_cast<std::uint64_t>(k.segment.value)));
  }
};
