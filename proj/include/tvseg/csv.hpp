// Copyright 2026 The tvseg Authors
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

// Minimal RFC 4180 CSV: quoted fields, doubled quotes, embedded newlines.

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tvseg/error.hpp"

namespace tvseg::csv {

// Reads one record; returns nothing at end of input. `line` is advanced by
// the number of physical lines consumed.
inline std::optional<std::vector<std::string>> read_record(std::istream& in, int& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false, any = false, after_quote = false;
  const int start_line = line + 1;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '\r') continue;
    if (c == '\n') {
      ++line;
      fields.push_back(std::move(field));
      return fields;
    }
    if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      after_quote = false;
      continue;
    }
    if (c == '"' && field.empty() && !after_quote) {
      quoted = true;
      continue;
    }
    if (after_quote) {
      throw DecodeError("line " + std::to_string(start_line) + ": text after closing quote");
    }
    field.push_back(c);
  }
  if (quoted) throw DecodeError("line " + std::to_string(start_line) + ": unterminated quote");
  if (!any) return std::nullopt;
  ++line;
  fields.push_back(std::move(field));
  return fields;
}

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(fields[i]);
  }
  return out;
}

}  // namespace tvseg::csv
