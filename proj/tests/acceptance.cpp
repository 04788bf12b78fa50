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


// Acceptance suite. Prints one PASS/FAIL line per criterion with the measured
// runtime and its limit; exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <random>
#include <sstream>
#include <thread>

#include "support.hpp"
#include "tvseg/cli.hpp"

using namespace tvseg;
namespace tt = tvseg::testing;

namespace {

struct Verdict {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

int failures = 0;

void criterion(const std::string& name, double limit_s, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v.fail(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs >= limit_s) v.fail("over time limit");
  char timing[96];
  if (limit_s > 0) std::snprintf(timing, sizeof timing, "%.2f s, limit %.0f s", secs, limit_s);
  else std::snprintf(timing, sizeof timing, "%.2f s", secs);
  std::printf("%s  %-32s %s%s[%s]\n", v.ok ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(),
              v.detail.empty() ? "" : "  ", timing);
  std::fflush(stdout);
  if (!v.ok) ++failures;
}

bool rel_close(double got, double want, double rel = 1e-9) {
  return std::abs(got - want) <= rel * std::max(1.0, std::abs(want));
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

SampleResult result(std::string id, std::string method, double d) {
  SampleResult r;
  r.sample_id = std::move(id);
  r.dataset = "ref";
  r.method = std::move(method);
  r.dice = d;
  return r;
}

// ---- criteria --------------------------------------------------------------

Verdict dice_oracle() {
  Verdict v;
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> side(1, 64);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const int w = side(rng), h = side(rng);
    const auto a = tt::random_mask(rng, w, h, density(rng));
    const auto b = tt::random_mask(rng, w, h, density(rng));
    worst = std::max(worst, std::abs(dice(a, b) - tt::ref_dice(a, b)));
  }
  if (worst > 1e-12) v.fail(fmt("max deviation %.3g", worst));
  else v.detail = fmt("500 pairs, max deviation %.1g", worst);
  return v;
}

Verdict nms_oracle() {
  Verdict v;
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> coord(0, 30), size(1, 15), count(0, 10), sc(0, 5);
  int compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<tt::RefBox> ref;
    BoxSet set;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      const int x = coord(rng), y = coord(rng);
      // Coarse scores and repeated boxes exercise every tie-break.
      tt::RefBox b = (i > 0 && sc(rng) == 0) ? ref.back() : tt::RefBox{x, y, x + size(rng), y + size(rng), sc(rng) / 5.0};
      ref.push_back(b);
      set.insert(ScoredBox(b.x0, b.y0, b.x1, b.y1, b.score));
    }
    for (double thr : {0.0, 0.3, 0.5, 0.9, 1.0}) {
      const auto got = nms(set, thr);
      const auto want = tt::ref_nms(ref, thr);
      ++compared;
      bool same = got.size() == want.size();
      for (std::size_t i = 0; same && i < want.size(); ++i) {
        same = got[i] == ScoredBox(want[i].x0, want[i].y0, want[i].x1, want[i].y1, want[i].score);
      }
      if (!same) {
        v.fail(fmt("mismatch in set %.0f at threshold %.1f", trial, thr));
        return v;
      }
    }
  }
  v.detail = std::to_string(compared) + " (set, threshold) cases identical";
  return v;
}

Verdict rle_roundtrip() {
  Verdict v;
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> side(1, 48);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const auto m = tt::random_mask(rng, side(rng), side(rng), density(rng));
    if (rle_decode(rle_encode(m)) != m) {
      v.fail("round-trip mismatch at mask " + std::to_string(i));
      return v;
    }
  }
  int equal_pairs = 0;
  for (int i = 0; i < 1000; ++i) {
    const int w = side(rng), h = side(rng);
    const auto a = tt::random_mask(rng, w, h, density(rng));
    // Half the pairs are the same mask rebuilt pixel by pixel, half differ in one pixel.
    BinaryMask b(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (a.at(x, y)) b.set(x, y);
    if (i % 2) {
      const int x = static_cast<int>(rng() % w), y = static_cast<int>(rng() % h);
      b.set(x, y, !b.at(x, y));
    } else {
      ++equal_pairs;
    }
    if ((a == b) != (rle_encode(a) == rle_encode(b))) {
      v.fail("canonical encoding not unique at pair " + std::to_string(i));
      return v;
    }
  }
  v.detail = "10000 round-trips, 1000 pairs (" + std::to_string(equal_pairs) + " equal)";
  return v;
}

Verdict topk_monotone() {
  Verdict v;
  auto truth = std::make_shared<MapTruth>();
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> pos(0, 40), ext(3, 20);
  std::vector<std::pair<std::string, BinaryMask>> samples;
  for (int i = 0; i < 200; ++i) {
    BinaryMask gt(64, 64);
    for (int r = 0; r < 2; ++r) {
      const int x = pos(rng), y = pos(rng), w = ext(rng), h = ext(rng);
      for (int yy = y; yy < y + h; ++yy)
        for (int xx = x; xx < x + w; ++xx) gt.set(xx, yy);
    }
    const auto id = "pool/" + std::to_string(i);
    truth->add(id, gt, "lesion");
    samples.emplace_back(id, gt);
  }
  OracleDetector det(7, {5.0, 9, 0.4, 0.0, 0.0, BoxMode::per_component}, truth);
  ThresholdSegmenter seg(7, 128, "mock:threshold");
  const std::vector<std::size_t> ks = {1, 2, 3, 5, 10};
  int violations = 0, improved = 0;
  for (const auto& [id, gt] : samples) {
    const auto image = tt::gray_image(gt, id);
    const auto boxes = detect(det, image, "lesion").boxes.prefix(10);
    const auto pool = segment_candidates(image, boxes, seg);
    std::optional<double> prev;
    for (auto k : ks) {
      const auto best = best_dice_within_top_k(pool, k, gt).value_or(0.0);
      if (prev && best < *prev) ++violations;
      if (prev && best > *prev) ++improved;
      prev = best;
    }
  }
  if (violations) v.fail(std::to_string(violations) + " violations");
  else v.detail = "200 pools, 0 violations, " + std::to_string(improved) + " strict gains";
  return v;
}

struct SynthSet {
  tt::TempDir dir{"accept"};
  std::vector<Manifest> manifests;
  std::shared_ptr<ManifestTruth> truth;

  explicit SynthSet(int n) {
    SyntheticSpec spec;
    spec.n = n;
    spec.seed = 2024;
    manifests.push_back(load_manifest(generate_synthetic(spec, dir.path())));
    truth = std::make_shared<ManifestTruth>(manifests);
  }
};

std::vector<MethodSpec> all_methods() {
  std::vector<MethodSpec> out;
  for (auto [name, kind] : {std::pair{"tv_sam", MethodKind::tv_sam}, std::pair{"gsam", MethodKind::gsam},
                            std::pair{"sam_auto", MethodKind::sam_auto}, std::pair{"sam_bbox", MethodKind::sam_bbox}}) {
    MethodSpec m;
    m.name = name;
    m.kind = kind;
    m.selection.kind = SelectionKind::oracle_dice;
    out.push_back(m);
  }
  return out;
}

Verdict perfect_end_to_end() {
  Verdict v;
  SynthSet set(50);
  Backends be;
  be.chat = std::make_shared<ScriptedChat>(ScriptedChat::load_script(set.dir / "chat_script.json"), false, set.truth);
  be.detector = std::make_shared<OracleDetector>(1, OracleDetectorOptions{}, set.truth);
  be.segmenter = std::make_shared<OracleSegmenter>(set.truth);
  const auto out = run_benchmark(set.manifests, all_methods(), be, TemplateRegistry::with_defaults(), 1);
  if (out.results.size() != 200) v.fail("expected 200 results, got " + std::to_string(out.results.size()));
  for (const auto& r : out.results) {
    if (!r.dice || *r.dice != 1.0) {
      v.fail(r.method + " " + r.sample_id + " Dice " + (r.dice ? std::to_string(*r.dice) : "missing"));
      return v;
    }
  }
  for (const auto& m : build_report(out.results).methods) {
    if (m.pooled.mean != 1.0 || m.pooled.ci_high - m.pooled.ci_low != 0.0) {
      v.fail(m.method + " pooled mean or CI width off");
    }
  }
  if (v.ok) v.detail = "50 samples x 4 methods, all Dice 1, CI width 0";
  return v;
}

Verdict degradation() {
  Verdict v;
  SynthSet set(50);
  MethodSpec tv;
  tv.name = "tv_sam";
  tv.kind = MethodKind::tv_sam;
  const auto chat = std::make_shared<ScriptedChat>(ScriptedChat::load_script(set.dir / "chat_script.json"), false, set.truth);
  std::vector<std::vector<SampleResult>> arms;
  std::string means;
  for (double sigma : {0.0, 2.0, 4.0, 8.0}) {
    Backends be;
    be.chat = chat;
    be.detector = std::make_shared<OracleDetector>(17, OracleDetectorOptions{sigma}, set.truth);
    be.segmenter = std::make_shared<ThresholdSegmenter>(17, 128, "mock:threshold");
    arms.push_back(run_benchmark(set.manifests, {tv}, be, TemplateRegistry::with_defaults(), 1).results);
  }
  double prev = 2.0;
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const double mean = stats::aggregate(arms[i]).pooled.mean;
    means += (i ? " " : "") + fmt("%.4f", mean);
    if (mean > prev) v.fail("pooled mean rises: " + means);
    prev = mean;
  }
  const auto t = stats::paired_t_test(arms.front(), arms.back());
  if (!(t.p_value < 0.01)) v.fail(fmt("sigma 0 vs 8: p = %.3g", t.p_value));
  if (v.ok) v.detail = "means " + means + fmt(", p(0 vs 8) = %.2g", t.p_value);
  return v;
}

Verdict stats_oracle() {
  Verdict v;
  // Frozen reference values.
  std::vector<SampleResult> agg = {result("1", "m", 0.2), result("2", "m", 0.4), result("3", "m", 0.6),
                                   result("4", "m", 0.8)};
  const auto rep = stats::aggregate(agg);
  if (!rel_close(rep.pooled.mean, 0.5) || !rel_close(rep.pooled.sd, 0.2581988897471611) ||
      !rel_close(rep.pooled.ci_low, 0.089147948647824216) || !rel_close(rep.pooled.ci_high, 0.91085205135217584)) {
    v.fail(fmt("aggregate CI [%.17g, %.17g]", rep.pooled.ci_low, rep.pooled.ci_high));
  }
  const double da[] = {0.55, 0.48, 0.60, 0.53, 0.57};
  std::vector<SampleResult> a, b;
  for (int i = 0; i < 5; ++i) {
    a.push_back(result(std::to_string(i), "a", da[i]));
    b.push_back(result(std::to_string(i), "b", 0.5));
  }
  const auto t = stats::paired_t_test(a, b);
  if (!rel_close(t.t_statistic, 2.2829416681331391) || t.degrees_of_freedom != 4.0 ||
      !rel_close(t.p_value, 0.084511945778068087)) {
    v.fail(fmt("paired t = %.17g, df = %g, p = %.17g", t.t_statistic, t.degrees_of_freedom, t.p_value));
  }
  const std::pair<double, double> q[] = {{1, 12.706204736432095}, {3, 3.1824463052842629},
                                         {9, 2.2621571628540993}, {49, 2.0095752371292397},
                                         {100, 1.9839715184496334}};
  for (const auto& [df, want] : q) {
    if (!rel_close(stats::t_quantile(0.975, df), want)) v.fail(fmt("t quantile df %g", df));
  }

  // n = 1: the interval collapses onto the value.
  const auto one = stats::aggregate({result("1", "m", 0.7)});
  if (!one.pooled.degenerate || one.pooled.ci_low != 0.7 || one.pooled.ci_high != 0.7) v.fail("n=1 CI");
  // Identical arms.
  const auto same = stats::paired_t_test(a, a);
  if (same.t_statistic != 0.0 || same.p_value != 1.0) v.fail("identical arms");
  // Constant non-zero differences: zero variance.
  std::vector<SampleResult> shifted;
  for (int i = 0; i < 5; ++i) shifted.push_back(result(std::to_string(i), "c", 0.6));
  const auto flat = stats::paired_t_test(shifted, b);
  if (!flat.degenerate || !std::isinf(flat.t_statistic) || flat.t_statistic < 0 || flat.p_value != 0.0) {
    v.fail("zero-variance differences");
  }
  if (v.ok) v.detail = "frozen values within 1e-9, degenerate cases exact";
  return v;
}

// ---- CLI-level criteria ----------------------------------------------------

std::string config_text(const std::string& output, const std::string& endpoint_or_empty) {
  const bool remote = !endpoint_or_empty.empty();
  auto ep = [&](const char* mock) { return remote ? endpoint_or_empty : std::string("mock:") + mock; };
  return "seed = 31\njobs = 2\nmanifest = data/manifest.csv\noutput = " + output + "\n\n"
         "[chat]\nendpoint = " + ep("scripted") + "\nscript = data/chat_script.json\n\n"
         "[detector]\nendpoint = " + ep("oracle") + "\njitter = 3\ndistractors = 4\nscore_noise = 0.2\n\n"
         "[segmenter]\nendpoint = " + ep("threshold") + "\n\n"
         "[auto_segmenter]\nendpoint = " + ep("grid_auto") + "\n\n"
         "[method.tv_sam]\nkind = tv_sam\n\n[method.gsam]\nkind = gsam\n\n"
         "[method.sam_auto]\nkind = sam_auto\n\n[method.sam_bbox]\nkind = sam_bbox\n";
}

int cli_run(std::vector<std::string> args) {
  std::ostringstream sink;
  args.insert(args.begin(), {"--log-level", "off"});
  return cli::dispatch(std::move(args), sink);
}

struct Workspace {
  tt::TempDir dir{"accept_cli"};
  Workspace() {
    SyntheticSpec spec;
    spec.n = 24;
    spec.seed = 77;
    generate_synthetic(spec, dir / "data");
  }
};

const char* kReportFiles[] = {"results.csv", "report.md", "report.json"};

bool same_reports(const std::filesystem::path& a, const std::filesystem::path& b, std::string* which) {
  for (const char* f : kReportFiles) {
    if (tt::read_file(a / f) != tt::read_file(b / f)) {
      *which = f;
      return false;
    }
  }
  return true;
}

Verdict loopback() {
  Verdict v;
  Workspace ws;
  tt::write_file(ws.dir / "local.toml", config_text("local", ""));
  if (cli_run({"run", "--config", (ws.dir / "local.toml").string()}) != 0) {
    v.fail("in-process run failed");
    return v;
  }
  std::promise<int> ready;
  auto port_future = ready.get_future();
  cli::stop_requested() = false;
  std::thread server([&] {
    try {
      cli::cmd_mock_serve({ws.dir / "local.toml", "127.0.0.1", 0}, [&](int port) { ready.set_value(port); });
    } catch (...) {
      ready.set_exception(std::current_exception());
    }
  });
  int code = -1;
  try {
    const int port = port_future.get();
    tt::write_file(ws.dir / "remote.toml", config_text("remote", "http://127.0.0.1:" + std::to_string(port)));
    code = cli_run({"run", "--config", (ws.dir / "remote.toml").string()});
  } catch (const std::exception& e) {
    v.fail(std::string("server: ") + e.what());
  }
  cli::stop_requested() = true;
  server.join();
  cli::stop_requested() = false;
  if (!v.ok) return v;
  if (code != 0) {
    v.fail("remote run exited " + std::to_string(code));
    return v;
  }
  std::string which;
  if (!same_reports(ws.dir / "local", ws.dir / "remote", &which)) v.fail(which + " differs");
  else v.detail = "24 samples x 4 methods, reports byte-identical";
  return v;
}

Verdict determinism() {
  Verdict v;
  Workspace ws;
  tt::write_file(ws.dir / "a.toml", config_text("a", ""));
  tt::write_file(ws.dir / "b.toml", config_text("b", ""));
  tt::write_file(ws.dir / "c.toml", config_text("c", ""));
  const auto a = (ws.dir / "a.toml").string(), b = (ws.dir / "b.toml").string(), c = (ws.dir / "c.toml").string();
  std::string which;
  if (cli_run({"run", "--config", a, "--jobs", "1"}) || cli_run({"run", "--config", b, "--jobs", "1"}) ||
      cli_run({"run", "--config", c, "--jobs", "4"})) {
    v.fail("run failed");
    return v;
  }
  if (!same_reports(ws.dir / "a", ws.dir / "b", &which)) v.fail("run repeated: " + which + " differs");
  if (!same_reports(ws.dir / "a", ws.dir / "c", &which)) v.fail("run jobs 1 vs 4: " + which + " differs");
  if (cli_run({"sweep", "--config", a, "--jobs", "1", "--method", "tv_sam"}) ||
      cli_run({"sweep", "--config", b, "--jobs", "1", "--method", "tv_sam"}) ||
      cli_run({"sweep", "--config", c, "--jobs", "3", "--method", "tv_sam"})) {
    v.fail("sweep failed");
    return v;
  }
  if (!same_reports(ws.dir / "a", ws.dir / "b", &which)) v.fail("sweep repeated: " + which + " differs");
  if (!same_reports(ws.dir / "a", ws.dir / "c", &which)) v.fail("sweep jobs 1 vs 3: " + which + " differs");
  if (v.ok) v.detail = "run and sweep identical across repeats and --jobs";
  return v;
}

}  // namespace

int main() {
  cli::init_logging("off");
  criterion("dice-oracle", 2, dice_oracle);
  criterion("nms-oracle", 2, nms_oracle);
  criterion("rle-roundtrip", 5, rle_roundtrip);
  criterion("topk-monotonicity", 0, topk_monotone);
  criterion("perfect-backend-end-to-end", 10, perfect_end_to_end);
  criterion("degradation-ordering", 30, degradation);
  criterion("statistics-oracle", 0, stats_oracle);
  criterion("loopback-equivalence", 20, loopback);
  criterion("determinism", 0, determinism);
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
