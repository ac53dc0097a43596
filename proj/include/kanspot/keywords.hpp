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

// Class inventory shared by the data pipeline and the decoder.
//
//   0 SIL  1 FILLER  2 take  3 a  4 pic  5 ture  6 vo  7 lume
//   8 up   9 down   10 play 11 mu 12 sic

#pragma once

#include <string>
#include <vector>

namespace kanspot {

inline constexpr int kNumClasses = 13;
inline constexpr int kSil = 0;
inline constexpr int kFiller = 1;
inline constexpr int kFirstSubword = 2;

// Manifest keyword column value for non-keyword utterances.
inline constexpr const char* kNegative = "NEGATIVE";

const std::vector<std::string>& class_names();

struct KeywordSpec {
  std::string name;
  std::vector<int> subword_ids;

  // Nonempty name and ids, every id a subword class.
  void validate() const;
  bool operator==(const KeywordSpec&) const = default;
};

// take_a_picture, volume_up, volume_down, play_music
const std::vector<KeywordSpec>& default_keywords();

// Throws ContractError naming the keyword when it is not in the list.
const KeywordSpec& find_keyword(const std::vector<KeywordSpec>& keywords,
                                const std::string& name);

}  // namespace kanspot
