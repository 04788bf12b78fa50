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

// Run configuration: an INI/TOML-style key = value document.
//
//   seed = 7                      # global seed, inherited by mock backends
//   jobs = 4
//   manifest = data/manifest.csv  # comma-separated for several datasets
//   output = runs/demo
//   templates = templates         # optional; adds dialog/ and prompt/ files
//   dump_masks = false
//
//   [chat]
//   endpoint = mock:scripted      # or http://host:port
//   script = data/chat_script.json
//
//   [detector]
//   endpoint = mock:oracle
//   jitter = 2
//
//   [segmenter]
//   endpoint = mock:oracle
//
//   [auto_segmenter]              # optional; defaults to [segmenter]
//   endpoint = mock:grid_auto
//
//   [method.tvsam]                # one section per compared method
//   kind = tv_sam
//   selection = oracle_dice
//   nms_iou = 0.5
//   confidence = 0.5
//   top_k = 10
//
// Comment lines start with '#' or ';'. Relative paths resolve against the
// config file's directory. Values may be wrapped in double quotes.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvseg/backend.hpp"
#include "tvseg/error.hpp"
#include "tvseg/grounding.hpp"
#include "tvseg/pipeline.hpp"
#include "tvseg/segmenting.hpp"

namespace tvseg {

struct RunConfig {
  std::filesystem::path config_path;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::vector<std::filesystem::path> manifests;
  std::filesystem::path output;
  std::optional<std::filesystem::path> templates;
  bool dump_masks = false;
  std::optional<BackendConfig> chat;
  std::optional<BackendConfig> detector;
  std::optional<BackendConfig> segmenter;
  std::optional<BackendConfig> auto_segmenter;
  std::vector<MethodSpec> methods;

  // All settings with defaults filled in.
  nlohmann::json resolved() const;
};

namespace detail {

inline std::string unquote(std::string v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

inline long long to_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::logic_error&) {
    throw ConfigError("'" + key + "' must be an integer, got '" + v + "'");
  }
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::logic_error&) {
    throw ConfigError("'" + key + "' must be a number, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "' must be true or false, got '" + v + "'");
}

using Section = std::map<std::string, std::string>;

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

inline BackendConfig parse_backend(const std::string& name, const Section& sec,
                                   const std::filesystem::path& base, std::uint64_t global_seed) {
  BackendConfig b;
  b.seed = global_seed;
  for (const auto& [k, v] : sec) {
    const auto key = name + "." + k;
    if (k == "endpoint") b.endpoint = v;
    else if (k == "timeout_ms") b.timeout_ms = static_cast<int>(to_integer(key, v));
    else if (k == "max_retries") b.max_retries = static_cast<int>(to_integer(key, v));
    else if (k == "seed") b.seed = static_cast<std::uint64_t>(to_integer(key, v));
    else if (k == "token") b.token = v;
    else if (k == "max_in_flight") b.max_in_flight = static_cast<int>(to_integer(key, v));
    else if (k == "script") b.params[k] = resolve(base, v).string();
    else b.params[k] = v;
  }
  if (b.endpoint.empty()) throw ConfigError("[" + name + "] needs an endpoint");
  try {
    b.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("[" + name + "] " + e.what());
  }
  return b;
}

inline MethodSpec parse_method(const std::string& name, const Section& sec) {
  MethodSpec m;
  m.name = name;
  auto it = sec.find("kind");
  if (it == sec.end()) throw ConfigError("[method." + name + "] needs a kind");
  try {
    m.kind = method_kind_from_string(it->second);
  } catch (const InvalidArgument& e) {
    throw ConfigError("[method." + name + "] " + e.what());
  }
  const bool grounded = m.kind == MethodKind::tv_sam || m.kind == MethodKind::gsam;
  for (const auto& [k, v] : sec) {
    const auto key = "method." + name + "." + k;
    auto only = [&](bool allowed) {
      if (!allowed) throw ConfigError("'" + key + "' does not apply to " + to_string(m.kind));
    };
    if (k == "kind") continue;
    if (k == "selection") {
      try {
        m.selection.kind = selection_from_string(v);
      } catch (const InvalidArgument& e) {
        throw ConfigError("'" + key + "': " + e.what());
      }
    } else if (k == "nms_iou") {
      only(grounded);
      m.grounding.nms_iou_threshold = to_double(key, v);
    } else if (k == "confidence") {
      only(grounded);
      m.grounding.confidence_threshold = to_double(key, v);
    } else if (k == "top_k") {
      only(grounded);
      m.grounding.top_k = static_cast<int>(to_integer(key, v));
    } else if (k == "dialog_template") {
      only(m.kind == MethodKind::tv_sam);
      m.dialog_template = v;
    } else if (k == "prompt_template") {
      only(m.kind == MethodKind::tv_sam);
      m.prompt_template = v;
    } else if (k == "gold_box_mode") {
      only(m.kind == MethodKind::sam_bbox);
      try {
        m.gold_box_mode = box_mode_from_string(v);
      } catch (const InvalidArgument& e) {
        throw ConfigError("'" + key + "': " + e.what());
      }
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  try {
    m.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("[method." + name + "] " + e.what());
  }
  return m;
}

inline nlohmann::json backend_json(const BackendConfig& b) {
  nlohmann::json j = {{"endpoint", b.endpoint}, {"timeout_ms", b.timeout_ms},
                      {"max_retries", b.max_retries}, {"seed", b.seed},
                      {"max_in_flight", b.max_in_flight}, {"params", b.params}};
  if (!b.token.empty()) j["token"] = "<redacted>";
  return j;
}

}  // namespace detail

inline nlohmann::json method_json(const MethodSpec& m) {
  nlohmann::json j = {{"name", m.name}, {"kind", to_string(m.kind)},
                      {"selection", to_string(m.selection.kind)}};
  if (m.kind == MethodKind::tv_sam || m.kind == MethodKind::gsam) {
    j["nms_iou"] = m.grounding.nms_iou_threshold;
    j["confidence"] = m.grounding.confidence_threshold;
    j["top_k"] = m.grounding.top_k;
  }
  if (m.kind == MethodKind::tv_sam) {
    j["dialog_template"] = m.dialog_template;
    j["prompt_template"] = m.prompt_template;
  }
  if (m.kind == MethodKind::sam_bbox) j["gold_box_mode"] = to_string(m.gold_box_mode);
  return j;
}

inline nlohmann::json RunConfig::resolved() const {
  nlohmann::json j;
  j["config"] = config_path.string();
  j["seed"] = seed;
  j["jobs"] = jobs;
  j["manifests"] = nlohmann::json::array();
  for (const auto& m : manifests) j["manifests"].push_back(m.string());
  j["output"] = output.string();
  j["templates"] = templates ? templates->string() : std::string("<built-in>");
  j["dump_masks"] = dump_masks;
  nlohmann::json be = nlohmann::json::object();
  if (chat) be["chat"] = detail::backend_json(*chat);
  if (detector) be["detector"] = detail::backend_json(*detector);
  if (segmenter) be["segmenter"] = detail::backend_json(*segmenter);
  if (auto_segmenter) be["auto_segmenter"] = detail::backend_json(*auto_segmenter);
  j["backends"] = be;
  j["methods"] = nlohmann::json::array();
  for (const auto& m : methods) j["methods"].push_back(method_json(m));
  return j;
}

// Loads and validates a run configuration. `seed` and `jobs`, when given,
// override the file (backends without their own seed follow the global one).
inline RunConfig load_run_config(const std::filesystem::path& path,
                                 std::optional<std::uint64_t> seed_override = std::nullopt,
                                 std::optional<int> jobs_override = std::nullopt) {
  namespace pt = boost::property_tree;
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(path.string() + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  const auto base = path.parent_path();
  RunConfig cfg;
  cfg.config_path = path;

  detail::Section top;
  std::map<std::string, detail::Section> sections;
  std::vector<std::string> method_order;
  for (const auto& [key, node] : tree) {
    if (node.empty()) {
      top[key] = detail::unquote(node.data());
      continue;
    }
    detail::Section sec;
    for (const auto& [k, v] : node) sec[k] = detail::unquote(v.data());
    if (key.rfind("method.", 0) == 0) method_order.push_back(key.substr(7));
    sections[key] = std::move(sec);
  }

  for (const auto& [k, v] : top) {
    if (k == "seed") cfg.seed = static_cast<std::uint64_t>(detail::to_integer(k, v));
    else if (k == "jobs") cfg.jobs = static_cast<int>(detail::to_integer(k, v));
    else if (k == "output") cfg.output = detail::resolve(base, v);
    else if (k == "templates") cfg.templates = detail::resolve(base, v);
    else if (k == "dump_masks") cfg.dump_masks = detail::to_bool(k, v);
    else if (k == "manifest" || k == "manifests") {
      std::stringstream ss(v);
      for (std::string item; std::getline(ss, item, ',');) {
        const auto trimmed = detail::trim_copy(item);
        if (!trimmed.empty()) cfg.manifests.push_back(detail::resolve(base, trimmed));
      }
    } else {
      throw ConfigError("unknown top-level key '" + k + "'");
    }
  }
  if (seed_override) cfg.seed = *seed_override;
  if (jobs_override) cfg.jobs = *jobs_override;
  if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1");
  if (cfg.manifests.empty()) throw ConfigError("no manifest configured");

  static const std::set<std::string> kBackendSections = {"chat", "detector", "segmenter", "auto_segmenter"};
  for (const auto& [name, sec] : sections) {
    if (name.rfind("method.", 0) == 0) continue;
    if (!kBackendSections.count(name)) throw ConfigError("unknown section [" + name + "]");
    auto b = detail::parse_backend(name, sec, base, cfg.seed);
    if (name == "chat") cfg.chat = b;
    else if (name == "detector") cfg.detector = b;
    else if (name == "segmenter") cfg.segmenter = b;
    else cfg.auto_segmenter = b;
  }
  if (method_order.empty()) throw ConfigError("no [method.<name>] sections configured");
  for (const auto& name : method_order) {
    cfg.methods.push_back(detail::parse_method(name, sections["method." + name]));
  }

  for (const auto& m : cfg.methods) {
    auto need = [&](const auto& b, const char* role) {
      if (!b) throw ConfigError("method '" + m.name + "' needs a [" + role + "] backend");
    };
    if (m.kind == MethodKind::tv_sam) need(cfg.chat, "chat");
    if (m.kind == MethodKind::tv_sam || m.kind == MethodKind::gsam) need(cfg.detector, "detector");
    if (m.kind != MethodKind::sam_auto) need(cfg.segmenter, "segmenter");
    if (m.kind == MethodKind::sam_auto && !cfg.auto_segmenter && !cfg.segmenter) {
      throw ConfigError("method '" + m.name + "' needs a [segmenter] or [auto_segmenter] backend");
    }
  }
  return cfg;
}

// The fields of a run that determine its results, for report metadata.
// Endpoints are left out so a remote run of the same mocks reports
// identically to an in-process one.
inline nlohmann::json report_meta(const RunConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["methods"] = nlohmann::json::array();
  for (const auto& m : cfg.methods) j["methods"].push_back(method_json(m));
  j["templates"] = cfg.templates ? cfg.templates->filename().string() : std::string("<built-in>");
  return j;
}

}  // namespace tvseg
