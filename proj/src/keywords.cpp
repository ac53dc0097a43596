// Copyright 2026 The kanspot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kanspot/keywords.hpp"

#include "kanspot/error.hpp"

namespace kanspot {

const std::vector<std::string>& class_names() {
  static const std::vector<std::string> names{"SIL",  "FILLER", "take", "a",    "pic",
                                              "ture", "vo",     "lume", "up",   "down",
                                              "play", "mu",     "sic"};
  return names;
}

void KeywordSpec::validate() const {
  if (name.empty()) throw ContractError("keyword name is empty");
  if (subword_ids.empty()) throw ContractError("keyword '" + name + "' has no subwords");
  for (int id : subword_ids) {
    if (id < kFirstSubword || id >= kNumClasses) {
      throw ContractError("keyword '" + name + "' has subword id " + std::to_string(id) +
                          " outside [2, 12]");
    }
  }
}

const std::vector<KeywordSpec>& default_keywords() {
  static const std::vector<KeywordSpec> kw{{"take_a_picture", {2, 3, 4, 5}},
                                           {"volume_up", {6, 7, 8}},
                                           {"volume_down", {6, 7, 9}},
                                           {"play_music", {10, 11, 12}}};
  return kw;
}

const KeywordSpec& find_keyword(const std::vector<KeywordSpec>& keywords,
                                const std::string& name) {
  for (const auto& k : keywords) {
    if (k.name == name) return k;
  }
  throw ContractError("unknown keyword '" + name + "'");
}

}  // namespace kanspot
