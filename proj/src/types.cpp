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

#include "imgrank/types.hpp"

namespace imgrank {

namespace {
constexpr std::array<std::string_view, kNumActions> kActionNames = {
    "repin", "click", "closeup", "longclick", "hide"};
}  // namespace

std::string_view action_name(Action a) {
  return kActionNames[static_cast<std::size_t>(a)];
}

std::optional<Action> parse_action(std::string_view name) {
  for (std::size_t i = 0; i < kNumActions; ++i) {
    if (kActionNames[i] == name) return static_cast<Action>(i);
  }
  return std::nullopt;
}

std::string valid_action_names() {
  std::string out;
  for (std::size_t i = 0; i < kNumActions; ++i) {
    if (i) out += ", ";
    out += kActionNames[i];
  }
  return out;
}

std::string_view gender_name(Gender g) {
  switch (g) {
    case Gender::kFemale:
      return "female";
    case Gender::kMale:
      return "male";
    case Gender::kUnknown:
      break;
  }
  return "unknown";
}

Gender parse_gender(std::string_view name) {
  if (name == "female") return Gender::kFemale;
  if (name == "male") return Gender::kMale;
  if (name == "unknown") return Gender::kUnknown;
  throw DataError("unknown gender '" + std::string(name) +
                  "' (valid: female, male, unknown)");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer over the combined value.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace imgrank
