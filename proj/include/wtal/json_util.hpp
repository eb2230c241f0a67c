// Copyright 2026 The wtal Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "wtal/error.hpp"

namespace wtal::json_util {

// Rejects any key of `obj` not in `allowed`.
inline void check_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                       const std::string& section) {
  if (!obj.is_object()) throw ConfigError(section + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(section + ": unknown key \"" + key + "\"");
    }
  }
}

// Reads obj[key] into out when present, with type errors reported as ConfigError.
template <typename T>
void read(const nlohmann::json& obj, const char* key, T& out, const std::string& section) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

inline nlohmann::json parse(std::string_view text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(what + ": invalid JSON: " + e.what());
  }
}

}  // namespace wtal::json_util
