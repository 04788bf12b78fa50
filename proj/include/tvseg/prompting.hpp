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

// Stage 1: the dialog sent to the chat model, the parser for its reply and
// the text-prompt template that turns extracted attributes into the phrase
// handed to the detector.
//
// Templates are plain text with {concept}, {modality}, {color}, {shape} and
// {location} placeholders. A bracketed group "[ ... ]" is dropped whole when
// any attribute placeholder inside it has no value, so
//   "[{color} ][{shape} ]{concept}[ located at {location}]"
// degrades cleanly when the reply lacks some attributes.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tvseg/error.hpp"

namespace tvseg {

struct ConceptQuery {
  std::string concept_name;  // e.g. "polyp"
  std::string modality;      // e.g. "Endoscopy"
};

struct AttributeSet {
  std::optional<std::string> color;
  std::optional<std::string> shape;
  std::optional<std::string> location;
  std::string raw_reply;

  bool degraded() const noexcept { return !color && !shape && !location; }
  friend bool operator==(const AttributeSet&, const AttributeSet&) = default;
};

struct DescriptivePrompt {
  std::string text;
  AttributeSet attributes;
  std::string template_id;
};

enum class TemplateKind { dialog, prompt };

inline constexpr std::string_view kDefaultDialogTemplate =
    "You are helping to locate the {concept} in a {modality} image.\n"
    "Look at the image and describe the {concept} it contains.\n"
    "Answer with exactly three lines and nothing else:\n"
    "color: <the color of the {concept}>\n"
    "shape: <the shape of the {concept}>\n"
    "location: <where the {concept} is in the image>";

inline constexpr std::string_view kDefaultPromptTemplate =
    "[{color} ][{shape} ]{concept}[ located at {location}]";

namespace detail {

struct TemplatePiece {
  enum Kind { literal, placeholder, group_open, group_close } kind;
  std::string text;
};

inline bool known_placeholder(std::string_view name) {
  return name == "concept" || name == "modality" || name == "color" || name == "shape" ||
         name == "location";
}

inline std::vector<TemplatePiece> tokenize_template(std::string_view tpl, TemplateKind kind) {
  std::vector<TemplatePiece> out;
  std::string literal;
  int depth = 0;
  auto flush = [&] {
    if (!literal.empty()) out.push_back({TemplatePiece::literal, std::move(literal)});
    literal.clear();
  };
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    const char c = tpl[i];
    if (c == '{') {
      const auto end = tpl.find('}', i);
      if (end == std::string_view::npos) throw TemplateError("unterminated placeholder in template");
      const auto name = tpl.substr(i + 1, end - i - 1);
      if (!known_placeholder(name)) throw TemplateError("unknown placeholder {" + std::string(name) + "}");
      flush();
      out.push_back({TemplatePiece::placeholder, std::string(name)});
      i = end;
    } else if (c == '[' && kind == TemplateKind::prompt) {
      if (depth++ > 0) throw TemplateError("nested optional groups are not supported");
      flush();
      out.push_back({TemplatePiece::group_open, {}});
    } else if (c == ']' && kind == TemplateKind::prompt) {
      if (depth-- == 0) throw TemplateError("unbalanced ']' in template");
      flush();
      out.push_back({TemplatePiece::group_close, {}});
    } else {
      literal.push_back(c);
    }
  }
  if (depth != 0) throw TemplateError("unbalanced '[' in template");
  flush();
  return out;
}

using Values = std::map<std::string, std::optional<std::string>, std::less<>>;

inline std::string render_pieces(const std::vector<TemplatePiece>& pieces, const Values& values) {
  std::string out, group;
  bool in_group = false, group_ok = true;
  for (const auto& p : pieces) {
    std::string* sink = in_group ? &group : &out;
    switch (p.kind) {
      case TemplatePiece::literal:
        *sink += p.text;
        break;
      case TemplatePiece::placeholder: {
        auto it = values.find(p.text);
        if (it != values.end() && it->second) {
          *sink += *it->second;
        } else {
          group_ok = false;
        }
        break;
      }
      case TemplatePiece::group_open:
        in_group = true;
        group_ok = true;
        group.clear();
        break;
      case TemplatePiece::group_close:
        if (group_ok) out += group;
        in_group = false;
        group_ok = true;
        break;
    }
  }
  return out;
}

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace detail

// Versioned dialog and prompt templates, registered by id.
class TemplateRegistry {
 public:
  // Registry holding the built-in "default" dialog and prompt templates.
  static TemplateRegistry with_defaults() {
    TemplateRegistry r;
    r.add(TemplateKind::dialog, "default", std::string(kDefaultDialogTemplate));
    r.add(TemplateKind::prompt, "default", std::string(kDefaultPromptTemplate));
    return r;
  }

  void add(TemplateKind kind, const std::string& id, std::string text) {
    if (id.empty()) throw TemplateError("template id is empty");
    const auto pieces = detail::tokenize_template(text, kind);
    const bool has_concept = std::any_of(pieces.begin(), pieces.end(), [](const auto& p) {
      return p.kind == detail::TemplatePiece::placeholder && p.text == "concept";
    });
    if (!has_concept) throw TemplateError("template '" + id + "' never mentions {concept}");
    table(kind).insert_or_assign(id, std::move(text));
  }

  // Loads <dir>/dialog/*.txt and <dir>/prompt/*.txt; ids are file stems.
  // Missing subdirectories are skipped.
  void load_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
      throw TemplateError("template directory not found: " + dir.string());
    }
    for (auto [kind, sub] : {std::pair{TemplateKind::dialog, "dialog"},
                             std::pair{TemplateKind::prompt, "prompt"}}) {
      const auto d = dir / sub;
      if (!std::filesystem::is_directory(d)) continue;
      std::vector<std::filesystem::path> files;
      for (const auto& e : std::filesystem::directory_iterator(d)) {
        if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        std::ifstream in(f);
        std::stringstream ss;
        ss << in.rdbuf();
        auto text = ss.str();
        while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
        try {
          add(kind, f.stem().string(), std::move(text));
        } catch (const TemplateError& e) {
          throw TemplateError(f.string() + ": " + e.what());
        }
      }
    }
  }

  bool contains(TemplateKind kind, const std::string& id) const {
    return table(kind).count(id) != 0;
  }

  const std::string& get(TemplateKind kind, const std::string& id) const {
    const auto& t = table(kind);
    auto it = t.find(id);
    if (it == t.end()) {
      throw TemplateError(std::string("unknown ") + (kind == TemplateKind::dialog ? "dialog" : "prompt") +
                          " template '" + id + "'");
    }
    return it->second;
  }

 private:
  std::map<std::string, std::string>& table(TemplateKind k) { return k == TemplateKind::dialog ? dialog_ : prompt_; }
  const std::map<std::string, std::string>& table(TemplateKind k) const {
    return k == TemplateKind::dialog ? dialog_ : prompt_;
  }

  std::map<std::string, std::string> dialog_;
  std::map<std::string, std::string> prompt_;
};

inline std::string build_dialog(const ConceptQuery& query, const std::string& template_id,
                                const TemplateRegistry& registry) {
  if (detail::trim(query.concept_name).empty()) throw PreconditionError("concept is empty");
  const auto& tpl = registry.get(TemplateKind::dialog, template_id);
  const detail::Values values{{"concept", query.concept_name}, {"modality", query.modality},
                              {"color", std::nullopt}, {"shape", std::nullopt},
                              {"location", std::nullopt}};
  return detail::render_pieces(detail::tokenize_template(tpl, TemplateKind::dialog), values);
}

// Pulls the first "color:", "shape:" and "location:" lines out of a chat
// reply. Labels are case-insensitive; list bullets, numbering, headings and
// bold/italic markers around them are tolerated. Never throws.
inline AttributeSet parse_attributes(const std::string& reply) {
  AttributeSet out;
  out.raw_reply = reply;
  std::istringstream lines(reply);
  for (std::string line; std::getline(lines, line);) {
    std::string clean;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i + 1 < line.size() && (line[i] == '*' || line[i] == '_') && line[i + 1] == line[i]) {
        ++i;
        continue;
      }
      clean.push_back(line[i]);
    }
    std::string_view s = clean;
    auto skip_ws = [&s] {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    };
    skip_ws();
    while (!s.empty() && (s.front() == '-' || s.front() == '+' || s.front() == '*' || s.front() == '#' || s.front() == '>')) {
      s.remove_prefix(1);
      skip_ws();
    }
    if (s.rfind("\xE2\x80\xA2", 0) == 0) {  // U+2022 bullet
      s.remove_prefix(3);
      skip_ws();
    }
    std::size_t digits = 0;
    while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
    if (digits > 0 && digits < s.size() && (s[digits] == '.' || s[digits] == ')')) {
      s.remove_prefix(digits + 1);
      skip_ws();
    }
    const auto colon = s.find(':');
    if (colon == std::string_view::npos) continue;
    const auto label = detail::lower(detail::trim(s.substr(0, colon)));
    auto value = detail::trim(s.substr(colon + 1));
    while (!value.empty() && (value.back() == '.' || value.back() == ';')) value.pop_back();
    value = detail::trim(value);
    if (value.empty()) continue;
    std::optional<std::string>* slot = nullptr;
    if (label == "color" || label == "colour") slot = &out.color;
    else if (label == "shape") slot = &out.shape;
    else if (label == "location") slot = &out.location;
    if (slot && !*slot) *slot = std::move(value);
  }
  return out;
}

// Fills the prompt template from the attributes. A degraded attribute set
// renders to the bare concept name.
inline DescriptivePrompt render_prompt(const AttributeSet& attrs, const ConceptQuery& query,
                                       const std::string& template_id,
                                       const TemplateRegistry& registry) {
  const auto& tpl = registry.get(TemplateKind::prompt, template_id);
  if (detail::trim(query.concept_name).empty()) throw PreconditionError("concept is empty");
  DescriptivePrompt p{{}, attrs, template_id};
  if (attrs.degraded()) {
    p.text = detail::trim(query.concept_name);
    return p;
  }
  const detail::Values values{{"concept", query.concept_name}, {"modality", query.modality},
                              {"color", attrs.color}, {"shape", attrs.shape},
                              {"location", attrs.location}};
  p.text = detail::collapse_spaces(
      detail::render_pieces(detail::tokenize_template(tpl, TemplateKind::prompt), values));
  return p;
}

}  // namespace tvseg
