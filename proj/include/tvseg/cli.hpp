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

// The tvseg command line.
//
//   tvseg run        --config <path> [--seed N] [--jobs N]
//   tvseg stage      <prompt|ground|segment> --config <path> --sample <id> [--method <name>]
//   tvseg mock-serve --config <path> --port N [--host 127.0.0.1]
//   tvseg sweep      --config <path> --ks 1,2,3,5,10 [--method <name>] [--seed N] [--jobs N]
//   tvseg report     --run <dir>
//   tvseg synth      --out <dir> [--n 50] [--seed 0] ...
//
// Exit codes: 0 success (warnings allowed), 1 usage or configuration error,
// 2 no evaluable samples, 3 runtime failure. Logs go to standard error;
// only `stage` writes to standard output.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tvseg/backends.hpp"
#include "tvseg/config.hpp"
#include "tvseg/datasets.hpp"
#include "tvseg/error.hpp"
#include "tvseg/image_io.hpp"
#include "tvseg/mock_server.hpp"
#include "tvseg/pipeline.hpp"
#include "tvseg/prompting.hpp"
#include "tvseg/report.hpp"
#include "tvseg/wire.hpp"

namespace tvseg::cli {

enum Exit : int { kOk = 0, kConfig = 1, kNoSamples = 2, kFailure = 3 };

// Set from a signal handler; `mock-serve` stops when it turns true.
inline std::atomic<bool>& stop_requested() {
  static std::atomic<bool> flag{false};
  return flag;
}

// Everything a command needs once the config is loaded.
struct Session {
  RunConfig config;
  std::vector<Manifest> manifests;
  std::shared_ptr<ManifestTruth> truth;
  TemplateRegistry templates;
};

inline Session open_session(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed,
                            std::optional<int> jobs) {
  Session s{load_run_config(config_path, seed, jobs), {}, nullptr, TemplateRegistry::with_defaults()};
  for (const auto& p : s.config.manifests) s.manifests.push_back(load_manifest(p));
  s.truth = std::make_shared<ManifestTruth>(s.manifests);
  if (s.config.templates) s.templates.load_directory(*s.config.templates);
  for (const auto& m : s.config.methods) {
    if (m.kind != MethodKind::tv_sam) continue;
    if (!s.templates.contains(TemplateKind::dialog, m.dialog_template)) {
      throw ConfigError("method '" + m.name + "': unknown dialog template '" + m.dialog_template + "'");
    }
    if (!s.templates.contains(TemplateKind::prompt, m.prompt_template)) {
      throw ConfigError("method '" + m.name + "': unknown prompt template '" + m.prompt_template + "'");
    }
  }
  return s;
}

inline Backends build_backends(const Session& s) {
  const auto& c = s.config;
  Backends be;
  if (c.chat) {
    be.chat = make_chat(*c.chat, s.truth);
    be.chat_limit = make_limiter(c.chat->max_in_flight);
  }
  if (c.detector) {
    be.detector = make_detector(*c.detector, s.truth);
    be.detector_limit = make_limiter(c.detector->max_in_flight);
  }
  if (c.segmenter) {
    be.segmenter = make_segmenter(*c.segmenter, s.truth);
    be.segmenter_limit = make_limiter(c.segmenter->max_in_flight);
  }
  if (c.auto_segmenter) {
    be.auto_segmenter = make_segmenter(*c.auto_segmenter, s.truth);
    be.auto_limit = make_limiter(c.auto_segmenter->max_in_flight);
  } else {
    be.auto_limit = be.segmenter_limit;
  }
  return be;
}

inline const MethodSpec& pick_method(const RunConfig& c, const std::string& name,
                                     std::initializer_list<MethodKind> kinds) {
  for (const auto& m : c.methods) {
    if (!name.empty() && m.name != name) continue;
    if (std::find(kinds.begin(), kinds.end(), m.kind) != kinds.end()) return m;
    if (!name.empty()) throw ConfigError("method '" + name + "' has the wrong kind for this command");
  }
  throw ConfigError(name.empty() ? "no suitable method in config" : "no method named '" + name + "'");
}

inline void prepare_output(const std::filesystem::path& dir) {
  if (dir.empty()) throw ConfigError("no output directory configured");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ConfigError("cannot create output directory " + dir.string());
  }
}

inline nlohmann::json skipped_json(const std::vector<SkippedSample>& skipped) {
  auto j = nlohmann::json::array();
  for (const auto& s : skipped) j.push_back({{"dataset", s.dataset}, {"sample_id", s.sample_id}, {"reason", s.reason}});
  return j;
}

// ---- commands --------------------------------------------------------------

struct RunOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

inline int cmd_run(const RunOptions& o) {
  Session s = open_session(o.config, o.seed, o.jobs);
  const auto be = build_backends(s);
  const auto& c = s.config;
  prepare_output(c.output);
  auto outcome = run_benchmark(s.manifests, c.methods, be, s.templates, c.jobs);
  const auto evaluable = outcome.samples_total - outcome.skipped.size();

  nlohmann::json run = {{"kind", "run"}, {"config", c.resolved()}, {"report_meta", report_meta(c)},
                        {"samples_total", outcome.samples_total}, {"samples_evaluated", evaluable},
                        {"warnings", outcome.warnings}, {"skipped", skipped_json(outcome.skipped)}};
  detail::write_text(c.output / "run.json", run.dump(2) + "\n");
  if (evaluable == 0) {
    spdlog::error("no evaluable samples ({} listed, all skipped)", outcome.samples_total);
    return kNoSamples;
  }

  detail::write_text(c.output / "results.csv", results_csv(outcome.results));
  detail::write_text(c.output / "timings.csv", timings_csv(outcome.results));
  detail::write_text(c.output / "quantiles.csv", quantiles_csv(outcome.results));
  const auto rendered = render_report(build_report(outcome.results), report_meta(c));
  detail::write_text(c.output / "report.md", rendered.markdown);
  detail::write_text(c.output / "report.json", rendered.json);

  if (c.dump_masks) {
    for (const auto& r : outcome.results) {
      if (!r.mask) continue;
      const auto dir = c.output / "masks" / r.dataset / r.method;
      std::filesystem::create_directories(dir);
      write_mask(dir / (r.sample_id + ".png"), rle_decode(*r.mask));
    }
  }
  spdlog::info("{} samples x {} methods -> {} ({} warning(s))", evaluable, c.methods.size(),
               c.output.string(), outcome.warnings);
  return kOk;
}

struct StageOptions {
  std::string stage;
  std::filesystem::path config;
  std::string sample;
  std::string method;
};

inline const Sample& find_sample(const std::vector<Manifest>& manifests, const std::string& id) {
  // Accepts either "<dataset>/<sample_id>" or a bare sample id if unambiguous.
  const Sample* found = nullptr;
  for (const auto& m : manifests) {
    for (const auto& s : m.samples) {
      if (s.source_id() == id) return s;
      if (s.sample_id == id) {
        if (found) throw InvalidArgument("sample id '" + id + "' is ambiguous; use <dataset>/<id>");
        found = &s;
      }
    }
  }
  if (!found) throw InvalidArgument("unknown sample '" + id + "'");
  return *found;
}

inline int cmd_stage(const StageOptions& o, std::ostream& out) {
  Session s = open_session(o.config, std::nullopt, std::nullopt);
  const auto be = build_backends(s);
  const Sample& sample = find_sample(s.manifests, o.sample);
  const auto ls = load_sample(sample);

  if (o.stage == "prompt" || o.stage == "ground") {
    const auto& m = pick_method(s.config, o.method, {MethodKind::tv_sam, MethodKind::gsam});
    auto spec = m;
    if (o.stage == "prompt") {
      // Stage 1 alone: no detector or segmenter calls.
      if (m.kind == MethodKind::gsam) {
        out << detail::trim(sample.concept_name) << "\n";
        return kOk;
      }
      const ConceptQuery q{sample.concept_name, sample.modality};
      const auto dialog = build_dialog(q, m.dialog_template, s.templates);
      const auto reply = chat_describe(detail::require(be.chat, "chat"), ls.image, dialog);
      out << render_prompt(parse_attributes(reply), q, m.prompt_template, s.templates).text << "\n";
      return kOk;
    }
    // Ground without segmenting: trace with an empty TOP-k cut would still
    // call the segmenter, so run the stage functions directly.
    const ConceptQuery q{sample.concept_name, sample.modality};
    DescriptivePrompt prompt{detail::trim(sample.concept_name), {}, "concept"};
    if (m.kind == MethodKind::tv_sam) {
      const auto dialog = build_dialog(q, m.dialog_template, s.templates);
      const auto reply = chat_describe(detail::require(be.chat, "chat"), ls.image, dialog);
      prompt = render_prompt(parse_attributes(reply), q, m.prompt_template, s.templates);
    }
    const auto grounded = ground_concept(ls.image, prompt, detail::require(be.detector, "detector"), spec.grounding);
    const auto top = select_top_k(grounded, spec.grounding.top_k);
    nlohmann::json j = {{"sample", sample.source_id()}, {"method", m.name}, {"prompt", prompt.text},
                        {"boxes", wire::encode_boxes(top)}};
    out << j.dump() << "\n";
    return kOk;
  }
  if (o.stage == "segment") {
    const auto& m = pick_method(s.config, o.method,
                                {MethodKind::tv_sam, MethodKind::gsam, MethodKind::sam_auto, MethodKind::sam_bbox});
    const auto r = run_method(sample, ls, be, s.templates, m);
    if (r.backend_error) throw Error(r.error);
    nlohmann::json j = {{"sample", sample.source_id()}, {"method", m.name}, {"prompt", r.prompt},
                        {"grounding_miss", r.grounding_miss}, {"rle", wire::encode_rle(*r.mask)}};
    j["dice"] = r.dice ? nlohmann::json(*r.dice) : nlohmann::json(nullptr);
    out << j.dump() << "\n";
    return kOk;
  }
  throw InvalidArgument("unknown stage '" + o.stage + "' (expected prompt, ground or segment)");
}

struct ServeOptions {
  std::filesystem::path config;
  std::string host = "127.0.0.1";
  int port = 0;
};

// Hosts the configured mock backends until stop_requested() turns true.
// `on_ready` receives the bound port once the server accepts connections.
inline int cmd_mock_serve(const ServeOptions& o, const std::function<void(int)>& on_ready = {}) {
  Session s = open_session(o.config, std::nullopt, std::nullopt);
  for (const auto* b : {&s.config.chat, &s.config.detector, &s.config.segmenter, &s.config.auto_segmenter}) {
    if (*b && !(*b)->is_mock()) throw ConfigError("mock-serve can only host mock: endpoints, got " + (*b)->endpoint);
  }
  const auto be = build_backends(s);
  MockServer server(HostedBackends{be.chat, be.detector, be.segmenter, be.auto_segmenter});
  int port = 0;
  try {
    port = server.bind(o.host, o.port);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
  std::thread worker([&] { server.serve(); });
  server.wait_until_ready();
  spdlog::info("serving tvseg/1 on http://{}:{}", o.host, port);
  if (on_ready) on_ready(port);
  while (!stop_requested().load()) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  spdlog::info("shutting down");
  server.stop();
  worker.join();
  return kOk;
}

struct SweepOptions {
  std::filesystem::path config;
  std::vector<int> ks = {1, 2, 3, 5, 10};
  std::string method;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

inline int cmd_sweep(const SweepOptions& o) {
  Session s = open_session(o.config, o.seed, o.jobs);
  const auto be = build_backends(s);
  const auto& c = s.config;
  const auto& m = pick_method(c, o.method, {MethodKind::tv_sam});
  prepare_output(c.output);
  const auto outcome = topk_sweep(s.manifests, be, s.templates, m, o.ks, c.jobs);
  auto meta = report_meta(c);
  meta["sweep_method"] = m.name;
  meta["ks"] = o.ks;
  nlohmann::json run = {{"kind", "sweep"}, {"config", c.resolved()}, {"report_meta", meta},
                        {"warnings", outcome.warnings}, {"skipped", skipped_json(outcome.skipped)}};
  detail::write_text(c.output / "run.json", run.dump(2) + "\n");
  if (outcome.rows.empty()) {
    spdlog::error("no evaluable samples");
    return kNoSamples;
  }
  detail::write_text(c.output / "results.csv", sweep_csv(outcome));
  const auto rendered = render_sweep_report(outcome, meta);
  detail::write_text(c.output / "report.md", rendered.markdown);
  detail::write_text(c.output / "report.json", rendered.json);
  spdlog::info("sweep over k={} -> {}", nlohmann::json(o.ks).dump(), c.output.string());
  return kOk;
}

inline SweepOutcome parse_sweep_csv(const std::string& text, std::vector<int> ks) {
  std::istringstream in(text);
  int line = 0;
  auto header = csv::read_record(in, line);
  const std::vector<std::string> expected = {"sample_id", "dataset", "k", "dice", "grounding_miss", "backend_error"};
  if (!header || *header != expected) throw DecodeError("results.csv: unexpected sweep header");
  SweepOutcome s;
  s.ks = std::move(ks);
  while (auto rec = csv::read_record(in, line)) {
    if (rec->size() != expected.size()) throw DecodeError("results.csv line " + std::to_string(line) + ": wrong field count");
    const auto& f = *rec;
    SweepRow r{f[0], f[1], std::stoi(f[2]), std::nullopt, f[4] == "1", f[5] == "1"};
    if (!f[3].empty()) r.dice = std::strtod(f[3].c_str(), nullptr);
    s.rows.push_back(std::move(r));
  }
  return s;
}

// Re-renders report.md / report.json from a run directory's results.csv.
inline int cmd_report(const std::filesystem::path& dir) {
  const auto run_path = dir / "run.json";
  if (!std::filesystem::is_regular_file(run_path)) throw ConfigError("not a run directory: " + dir.string());
  nlohmann::json run;
  try {
    run = nlohmann::json::parse(detail::read_text(run_path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(run_path.string() + ": " + e.what());
  }
  const auto meta = run.value("report_meta", nlohmann::json::object());
  const auto text = detail::read_text(dir / "results.csv");
  RenderedReport rendered;
  if (run.value("kind", std::string("run")) == "sweep") {
    rendered = render_sweep_report(parse_sweep_csv(text, meta.at("ks").get<std::vector<int>>()), meta);
  } else {
    const auto results = parse_results_csv(text);
    rendered = render_report(build_report(results), meta);
    detail::write_text(dir / "quantiles.csv", quantiles_csv(results));
  }
  detail::write_text(dir / "report.md", rendered.markdown);
  detail::write_text(dir / "report.json", rendered.json);
  spdlog::info("re-rendered {}", dir.string());
  return kOk;
}

inline int cmd_synth(const SyntheticSpec& spec, const std::filesystem::path& out) {
  const auto manifest = generate_synthetic(spec, out);
  spdlog::info("wrote {} samples to {}", spec.n, manifest.string());
  return kOk;
}

// ---- dispatch --------------------------------------------------------------

inline std::vector<int> parse_ks(const std::string& text) {
  std::vector<int> ks;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      const auto t = detail::trim_copy(item);
      ks.push_back(std::stoi(t, &used));
      if (used != t.size()) throw std::invalid_argument(t);
    } catch (const std::logic_error&) {
      throw InvalidArgument("--ks must be a comma-separated list of integers, got '" + text + "'");
    }
  }
  return ks;
}

inline void init_logging(const std::string& level) {
  auto logger = spdlog::get("tvseg");
  if (!logger) logger = spdlog::stderr_color_mt("tvseg");
  spdlog::set_default_logger(logger);
  const auto lvl = spdlog::level::from_str(level);
  if (lvl == spdlog::level::off && level != "off") throw InvalidArgument("unknown log level '" + level + "'");
  spdlog::set_level(lvl);
}

// Runs one command line. Usable in-process; never throws.
inline int dispatch(std::vector<std::string> args, std::ostream& out = std::cout) {
  CLI::App app{"Zero-shot segmentation pipeline runner and evaluation harness", "tvseg"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  RunOptions run;
  std::uint64_t seed = 0;
  int jobs = 0;
  auto* c_run = app.add_subcommand("run", "evaluate every configured method on every sample");
  c_run->add_option("--config", run.config, "run configuration file")->required();
  auto* run_seed = c_run->add_option("--seed", seed, "override the global seed");
  auto* run_jobs = c_run->add_option("--jobs", jobs, "samples evaluated concurrently")->check(CLI::PositiveNumber);

  StageOptions stage;
  auto* c_stage = app.add_subcommand("stage", "print one stage's output for one sample");
  c_stage->add_option("stage", stage.stage, "prompt, ground or segment")
      ->required()
      ->check(CLI::IsMember({"prompt", "ground", "segment"}));
  c_stage->add_option("--config", stage.config, "run configuration file")->required();
  c_stage->add_option("--sample", stage.sample, "<dataset>/<sample_id> or a unique sample_id")->required();
  c_stage->add_option("--method", stage.method, "method name (default: first applicable)");

  ServeOptions serve;
  auto* c_serve = app.add_subcommand("mock-serve", "host the configured mocks over HTTP");
  c_serve->add_option("--config", serve.config, "run configuration file")->required();
  c_serve->add_option("--port", serve.port, "port (0 picks a free one)")->required()->check(CLI::Range(0, 65535));
  c_serve->add_option("--host", serve.host, "bind address");

  SweepOptions sweep;
  std::string ks_text = "1,2,3,5,10";
  auto* c_sweep = app.add_subcommand("sweep", "TOP-k box selection sweep");
  c_sweep->add_option("--config", sweep.config, "run configuration file")->required();
  c_sweep->add_option("--ks", ks_text, "ascending k values");
  c_sweep->add_option("--method", sweep.method, "tv_sam method to sweep (default: first)");
  auto* sweep_seed = c_sweep->add_option("--seed", seed, "override the global seed");
  auto* sweep_jobs = c_sweep->add_option("--jobs", jobs, "samples evaluated concurrently")->check(CLI::PositiveNumber);

  std::filesystem::path report_dir;
  auto* c_report = app.add_subcommand("report", "re-render the report of a run directory");
  c_report->add_option("--run", report_dir, "run directory")->required();

  SyntheticSpec synth;
  std::filesystem::path synth_out;
  auto* c_synth = app.add_subcommand("synth", "write a seeded synthetic dataset");
  c_synth->add_option("--out", synth_out, "output directory")->required();
  c_synth->add_option("--n", synth.n, "number of samples");
  c_synth->add_option("--seed", synth.seed, "generator seed");
  c_synth->add_option("--width", synth.width);
  c_synth->add_option("--height", synth.height);
  c_synth->add_option("--shapes", synth.shapes, "shapes per image");
  c_synth->add_option("--noise", synth.noise, "pixel noise amplitude (0-72)");
  c_synth->add_option("--channels", synth.channels, "1 or 3");
  c_synth->add_option("--dataset", synth.dataset);
  c_synth->add_option("--modality", synth.modality);
  c_synth->add_option("--concept", synth.concept_name);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "tvseg: " << e.what() << "\n";
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
      std::cerr << "usage: tvseg " << sub->get_name() << " --help\n";
    }
    return kConfig;
  }

  try {
    init_logging(log_level);
    if (c_run->parsed()) {
      if (*run_seed) run.seed = seed;
      if (*run_jobs) run.jobs = jobs;
      return cmd_run(run);
    }
    if (c_stage->parsed()) return cmd_stage(stage, out);
    if (c_serve->parsed()) return cmd_mock_serve(serve);
    if (c_sweep->parsed()) {
      sweep.ks = parse_ks(ks_text);
      if (*sweep_seed) sweep.seed = seed;
      if (*sweep_jobs) sweep.jobs = jobs;
      return cmd_sweep(sweep);
    }
    if (c_report->parsed()) return cmd_report(report_dir);
    if (c_synth->parsed()) return cmd_synth(synth, synth_out);
  } catch (const ManifestError& e) {
    for (const auto& p : e.problems()) std::cerr << "tvseg: " << p << "\n";
    return kConfig;
  } catch (const ConfigError& e) {
    std::cerr << "tvseg: config error: " << e.what() << "\n";
    return kConfig;
  } catch (const TemplateError& e) {
    std::cerr << "tvseg: template error: " << e.what() << "\n";
    return kConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "tvseg: " << e.what() << "\n";
    return kConfig;
  } catch (const PreconditionError& e) {
    std::cerr << "tvseg: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "tvseg: " << e.what() << "\n";
    return kFailure;
  }
  return kConfig;
}

}  // namespace tvseg::cli
