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

// Run-directory files and report rendering.
//
//   results.csv    one row per sample x method
//   timings.csv    wall-clock stage timings (kept apart so results are
//                  reproducible byte for byte)
//   quantiles.csv  per method x dataset Dice distribution quantiles
//   report.md      methods x datasets table, CI table, paired tests
//   report.json    the same numbers at full precision ("tvseg-report/1")

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvseg/csv.hpp"
#include "tvseg/error.hpp"
#include "tvseg/evalstats.hpp"
#include "tvseg/pipeline.hpp"
#include "tvseg/results.hpp"

namespace tvseg {

inline constexpr std::string_view kReportSchema = "tvseg-report/1";

namespace detail {

// Shortest text that parses back to the same double.
inline std::string exact(double v) {
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json summary_json(const stats::Summary& s) {
  return {{"n", s.n}, {"mean", s.mean}, {"sd", s.sd}, {"ci_low", s.ci_low},
          {"ci_high", s.ci_high}, {"degenerate", s.degenerate}};
}

// Linear-interpolation quantile of sorted values.
inline double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Bold every entry whose 3-decimal rendering equals the column maximum.
inline std::vector<std::string> bold_column(const std::vector<std::optional<double>>& col) {
  std::string best;
  double best_v = -1;
  for (const auto& v : col) {
    if (v && *v > best_v) best_v = *v;
  }
  if (best_v >= 0) best = fixed3(best_v);
  std::vector<std::string> out;
  for (const auto& v : col) {
    if (!v) {
      out.push_back("-");
    } else if (fixed3(*v) == best) {
      out.push_back("**" + fixed3(*v) + "**");
    } else {
      out.push_back(fixed3(*v));
    }
  }
  return out;
}

inline std::string markdown_table(const std::vector<std::string>& header,
                                  const std::vector<std::vector<std::string>>& rows) {
  std::string out = "|";
  for (const auto& h : header) out += " " + h + " |";
  out += "\n|";
  for (std::size_t i = 0; i < header.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
  out += "\n";
  for (const auto& r : rows) {
    out += "|";
    for (const auto& c : r) out += " " + c + " |";
    out += "\n";
  }
  return out;
}

}  // namespace detail

// ---- results.csv -----------------------------------------------------------

inline const std::vector<std::string>& results_header() {
  static const std::vector<std::string> h = {"sample_id", "dataset", "method", "kind", "dice",
                                             "grounding_miss", "backend_error", "n_boxes",
                                             "prompt", "error"};
  return h;
}

inline std::string results_csv(const std::vector<SampleResult>& results) {
  std::string out = csv::join(results_header()) + "\n";
  for (const auto& r : results) {
    out += csv::join({r.sample_id, r.dataset, r.method, to_string(r.kind),
                      r.dice ? detail::exact(*r.dice) : std::string{},
                      r.grounding_miss ? "1" : "0", r.backend_error ? "1" : "0",
                      std::to_string(r.boxes.size()), r.prompt, r.error}) +
           "\n";
  }
  return out;
}

inline std::vector<SampleResult> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  int line = 0;
  auto header = csv::read_record(in, line);
  if (!header || *header != results_header()) throw DecodeError("results.csv: unexpected header");
  std::vector<SampleResult> out;
  while (auto rec = csv::read_record(in, line)) {
    if (rec->size() != results_header().size()) {
      throw DecodeError("results.csv line " + std::to_string(line) + ": wrong field count");
    }
    const auto& f = *rec;
    SampleResult r;
    r.sample_id = f[0];
    r.dataset = f[1];
    r.method = f[2];
    r.kind = method_kind_from_string(f[3]);
    if (!f[4].empty()) r.dice = std::strtod(f[4].c_str(), nullptr);
    r.grounding_miss = f[5] == "1";
    r.backend_error = f[6] == "1";
    r.prompt = f[8];
    r.error = f[9];
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string timings_csv(const std::vector<SampleResult>& results) {
  std::string out = "sample_id,dataset,method,prompt_ms,ground_ms,segment_ms\n";
  for (const auto& r : results) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.3f,%.3f,%.3f", r.timings.prompt_ms, r.timings.ground_ms,
                  r.timings.segment_ms);
    out += csv::join({r.sample_id, r.dataset, r.method}) + "," + buf + "\n";
  }
  return out;
}

// ---- aggregation over a run ------------------------------------------------

struct RunReport {
  std::vector<stats::MethodReport> methods;
  std::vector<stats::PairwiseTest> tests;
  std::vector<std::string> datasets;
};

// Groups results by method (first-appearance order), aggregates each and
// runs a pooled paired t-test for every method pair.
inline RunReport build_report(const std::vector<SampleResult>& results) {
  RunReport rep;
  std::vector<std::string> order;
  std::map<std::string, std::vector<SampleResult>> by_method;
  std::set<std::string> datasets;
  for (const auto& r : results) {
    if (!by_method.count(r.method)) order.push_back(r.method);
    by_method[r.method].push_back(r);
    if (r.dice) datasets.insert(r.dataset);
  }
  rep.datasets.assign(datasets.begin(), datasets.end());
  for (const auto& name : order) rep.methods.push_back(stats::aggregate(by_method[name]));
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      try {
        rep.tests.push_back(stats::paired_t_test(by_method[order[i]], by_method[order[j]]));
      } catch (const PreconditionError& e) {
        spdlog::warn("no paired test for {} vs {}: {}", order[i], order[j], e.what());
      }
    }
  }
  return rep;
}

inline std::string quantiles_csv(const std::vector<SampleResult>& results) {
  std::vector<std::string> order;
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const auto& r : results) {
    if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
    if (r.dice) groups[{r.method, r.dataset}].push_back(*r.dice);
  }
  std::string out = "method,dataset,n,min,q1,median,q3,max\n";
  for (const auto& m : order) {
    for (auto& [key, values] : groups) {
      if (key.first != m) continue;
      std::sort(values.begin(), values.end());
      out += csv::join({m, key.second, std::to_string(values.size())});
      for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) out += "," + detail::exact(detail::quantile_sorted(values, q));
      out += "\n";
    }
  }
  return out;
}

struct RenderedReport {
  std::string markdown;
  std::string json;
};

// `meta` is echoed into report.json and summarized in report.md; it must
// not contain anything that varies between identical runs.
inline RenderedReport render_report(const RunReport& rep, const nlohmann::json& meta) {
  if (rep.methods.empty()) throw PreconditionError("report needs at least one method");
  RenderedReport out;

  // Methods x datasets (+ pooled and macro columns).
  std::vector<std::string> header = {"Method"};
  for (const auto& d : rep.datasets) header.push_back(d);
  header.push_back("Pooled");
  header.push_back("Macro");
  std::vector<std::vector<std::optional<double>>> cols(header.size() - 1);
  for (const auto& m : rep.methods) {
    std::size_t c = 0;
    for (const auto& d : rep.datasets) {
      auto it = m.per_dataset.find(d);
      cols[c++].push_back(it == m.per_dataset.end() ? std::nullopt : std::optional(it->second.mean));
    }
    cols[c++].push_back(m.pooled.mean);
    cols[c++].push_back(m.macro.mean);
  }
  std::vector<std::vector<std::string>> bolded;
  for (const auto& col : cols) bolded.push_back(detail::bold_column(col));
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < rep.methods.size(); ++i) {
    std::vector<std::string> row = {rep.methods[i].method};
    for (const auto& col : bolded) row.push_back(col[i]);
    rows.push_back(std::move(row));
  }

  std::string md = "# Zero-shot segmentation report\n\n";
  md += "Values are mean Dice. Bold marks the best value in each column (all ties at three decimals are bold). ";
  md += "Pooled averages every scored sample; Macro averages the per-dataset means.\n\n";
  md += detail::markdown_table(header, rows);

  md += "\n## Pooled mean with 95% CI\n\n";
  std::vector<std::vector<std::string>> ci_rows;
  for (const auto& m : rep.methods) {
    ci_rows.push_back({m.method, to_string(m.kind), std::to_string(m.pooled.n), detail::fixed3(m.pooled.mean),
                       "[" + detail::fixed3(m.pooled.ci_low) + ", " + detail::fixed3(m.pooled.ci_high) + "]" +
                           (m.pooled.degenerate ? " (n=1)" : ""),
                       std::to_string(m.grounding_misses), std::to_string(m.backend_errors)});
  }
  md += detail::markdown_table({"Method", "Kind", "n", "Mean", "CI95", "Grounding misses", "Backend errors"},
                               ci_rows);

  md += "\n## Paired t-tests (pooled, two-sided)\n\n";
  if (rep.tests.empty()) {
    md += "No method pairs with at least two aligned samples.\n";
  } else {
    std::vector<std::vector<std::string>> t_rows;
    for (const auto& t : rep.tests) {
      char tbuf[32], pbuf[32];
      std::snprintf(tbuf, sizeof tbuf, "%.3f", t.t_statistic);
      std::snprintf(pbuf, sizeof pbuf, "%.3g", t.p_value);
      t_rows.push_back({t.method_a + " vs " + t.method_b, std::to_string(t.n), detail::fixed3(t.mean_difference),
                        t.degenerate ? std::string(t.t_statistic > 0 ? "inf" : "-inf") : std::string(tbuf),
                        std::to_string(static_cast<long long>(t.degrees_of_freedom)),
                        std::string(pbuf) + (t.degenerate ? " (zero variance)" : "")});
    }
    md += detail::markdown_table({"Comparison", "n", "Mean diff", "t", "df", "p"}, t_rows);
  }

  if (meta.contains("methods")) {
    md += "\n## Methods\n\n";
    for (const auto& m : meta["methods"]) md += "- `" + m.value("name", std::string{}) + "`: " + m.dump() + "\n";
  }

  nlohmann::json j;
  j["schema"] = kReportSchema;
  j["meta"] = meta;
  j["datasets"] = rep.datasets;
  j["methods"] = nlohmann::json::array();
  for (const auto& m : rep.methods) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [d, s] : m.per_dataset) per[d] = detail::summary_json(s);
    j["methods"].push_back({{"name", m.method}, {"kind", to_string(m.kind)}, {"samples", m.samples},
                            {"grounding_misses", m.grounding_misses}, {"backend_errors", m.backend_errors},
                            {"pooled", detail::summary_json(m.pooled)}, {"macro", detail::summary_json(m.macro)},
                            {"datasets", per}});
  }
  j["tests"] = nlohmann::json::array();
  for (const auto& t : rep.tests) {
    nlohmann::json tj = {{"method_a", t.method_a}, {"method_b", t.method_b}, {"n", t.n},
                         {"df", t.degrees_of_freedom}, {"p_value", t.p_value}, {"paired", t.paired},
                         {"mean_difference", t.mean_difference}, {"degenerate", t.degenerate}};
    tj["t"] = std::isfinite(t.t_statistic) ? nlohmann::json(t.t_statistic)
                                           : nlohmann::json(t.t_statistic > 0 ? "inf" : "-inf");
    j["tests"].push_back(std::move(tj));
  }
  out.markdown = md;
  out.json = j.dump(2) + "\n";
  return out;
}

// ---- TOP-k sweep files -----------------------------------------------------

inline std::string sweep_csv(const SweepOutcome& s) {
  std::string out = "sample_id,dataset,k,dice,grounding_miss,backend_error\n";
  for (const auto& r : s.rows) {
    out += csv::join({r.sample_id, r.dataset, std::to_string(r.k), r.dice ? detail::exact(*r.dice) : "",
                      r.grounding_miss ? "1" : "0", r.backend_error ? "1" : "0"}) +
           "\n";
  }
  return out;
}

// TOP-k x datasets table of mean oracle Dice.
inline RenderedReport render_sweep_report(const SweepOutcome& s, const nlohmann::json& meta) {
  std::set<std::string> ds;
  for (const auto& r : s.rows) ds.insert(r.dataset);
  const std::vector<std::string> datasets(ds.begin(), ds.end());
  std::map<int, std::map<std::string, std::vector<double>>> values;
  std::map<int, std::vector<double>> pooled;
  for (const auto& r : s.rows) {
    if (!r.dice) continue;
    values[r.k][r.dataset].push_back(*r.dice);
    pooled[r.k].push_back(*r.dice);
  }
  if (pooled.empty()) throw PreconditionError("sweep produced no scored samples");

  std::vector<std::string> header = {"Setting"};
  for (const auto& d : datasets) header.push_back(d);
  header.push_back("Pooled");
  std::vector<std::vector<std::optional<double>>> cols(header.size() - 1);
  nlohmann::json rows_json = nlohmann::json::array();
  for (int k : s.ks) {
    nlohmann::json per = nlohmann::json::object();
    std::size_t c = 0;
    for (const auto& d : datasets) {
      const auto& v = values[k][d];
      if (v.empty()) {
        cols[c++].push_back(std::nullopt);
        continue;
      }
      const auto sm = stats::summarize(v);
      cols[c++].push_back(sm.mean);
      per[d] = detail::summary_json(sm);
    }
    const auto sp = stats::summarize(pooled[k]);
    cols[c++].push_back(sp.mean);
    rows_json.push_back({{"k", k}, {"datasets", per}, {"pooled", detail::summary_json(sp)}});
  }
  std::vector<std::vector<std::string>> bolded;
  for (const auto& col : cols) bolded.push_back(detail::bold_column(col));
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < s.ks.size(); ++i) {
    std::vector<std::string> row = {"TOP-" + std::to_string(s.ks[i])};
    for (const auto& col : bolded) row.push_back(col[i]);
    rows.push_back(std::move(row));
  }
  RenderedReport out;
  out.markdown = "# TOP-k box selection sweep\n\n"
                 "Mean Dice of the best mask among those prompted by the k highest-ranked boxes. "
                 "Bold marks the best value in each column.\n\n" +
                 detail::markdown_table(header, rows);
  nlohmann::json j = {{"schema", kReportSchema}, {"kind", "topk_sweep"}, {"meta", meta},
                      {"datasets", datasets}, {"rows", rows_json}};
  out.json = j.dump(2) + "\n";
  return out;
}

}  // namespace tvseg
