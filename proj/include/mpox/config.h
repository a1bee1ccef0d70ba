// Copyright 2026 The MpoxMamba Authors. All Rights Reserved.
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

// Flat "section.key=value" configuration text.
//
// Grammar: one assignment per line; '#' starts a comment; surrounding
// whitespace is ignored; a key may appear once. Lists are comma separated,
// booleans are true/false.

#ifndef MPOX_CONFIG_H_
#define MPOX_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace mpox {

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in, const std::string& source);
KeyValues read_key_values(const std::string& path);
std::string format_key_values(const KeyValues& kv);

// Typed accessors; all throw ConfigError naming the key on bad input.
std::size_t parse_size(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
std::vector<std::size_t> parse_size_list(const std::string& key,
                                         const std::string& value);
std::string format_size_list(const std::vector<std::size_t>& values);

}  // namespace mpox

#endif  // MPOX_CONFIG_H_
