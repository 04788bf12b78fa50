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

// Runs the four compared methods on dataset samples:
//
//   tv_sam    chat description -> text prompt -> grounding -> TOP-k -> masks
//   gsam      bare concept name -> grounding -> TOP-k -> masks
//   sam_auto  unprompted "everything" masks
//   sam_bbox  boxes derived from the ground-truth mask -> masks
//
// Each method ends with one selected mask per sample scored by Dice against
// the ground truth. Backend failures are recorded on the sample result and
// never escape the sample.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include <spdlog/spdlog.h>

#include "tvseg/backend.hpp"
#include "tvseg/datasets.hpp"
#include "tvseg/error.hpp"
#include "tvseg/geom.hpp"
#include "tvseg/grounding.hpp"
#include "tvseg/prompting.hpp"
#include "tvseg/results.hpp"
#include "tvseg/segmenting.hpp"

namespace tvseg {

struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::tv_sam;
  GroundingConfig grounding;             // tv_sam, gsam
  SelectionPolicy selection;
  BoxMode gold_box_mode = BoxMode::union_all;  // sam_bbox
  std::string dialog_template = "default";     // tv_sam
  std::string prompt_template = "default";     // tv_sam

  void validate() const {
    if (name.empty()) throw ConfigError("method name is empty");
    if (kind == MethodKind::tv_sam || kind == MethodKind::gsam) grounding.validate();
  }
};

// Caps concurrent calls against one backend.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(int limit) : available_(limit) {}

  class Permit {
   public:
    explicit Permit(InFlightLimiter* l) : l_(l) {
      if (!l_) return;
      std::unique_lock lock(l_->mu_);
      l_->cv_.wait(lock, [this] { return l_->available_ > 0; });
      --l_->available_;
    }
    ~Permit() {
      if (!l_) return;
      {
        std::lock_guard lock(l_->mu_);
        ++l_->available_;
      }
      l_->cv_.notify_one();
    }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

   private:
    InFlightLimiter* l_;
  };

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int available_;
};

inline std::shared_ptr<InFlightLimiter> make_limiter(int max_in_flight) {
  return max_in_flight > 0 ? std::make_shared<InFlightLimiter>(max_in_flight) : nullptr;
}

// Shared, read-only backend handles. `chat` may be absent when no method
// needs it; `auto_segmenter` defaults to `segmenter`.
struct Backends {
  std::shared_ptr<const ChatBackend> chat;
  std::shared_ptr<const DetectorBackend> detector;
  std::shared_ptr<const SegmenterBackend> segmenter;
  std::shared_ptr<const SegmenterBackend> auto_segmenter;
  std::shared_ptr<InFlightLimiter> chat_limit, detector_limit, segmenter_limit, auto_limit;

  const SegmenterBackend& auto_seg() const {
    const auto& s = auto_segmenter ? auto_segmenter : segmenter;
    if (!s) throw ConfigError("no segmenter backend configured");
    return *s;
  }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <class T>
const T& require(const std::shared_ptr<const T>& p, const char* role) {
  if (!p) throw ConfigError(std::string("no ") + role + " backend configured");
  return *p;
}

inline SampleResult start_result(const Sample& s, const MethodSpec& spec) {
  SampleResult r;
  r.sample_id = s.sample_id;
  r.dataset = s.dataset;
  r.method = spec.name;
  r.kind = spec.kind;
  return r;
}

// Scores the chosen mask (or an empty prediction) and stores it.
inline void finish_result(SampleResult& r, const LoadedSample& ls,
                          const std::optional<BinaryMask>& chosen) {
  const BinaryMask pred = chosen ? *chosen : BinaryMask(ls.image.width(), ls.image.height());
  r.mask = rle_encode(pred);
  if (ls.gt) r.dice = dice(pred, *ls.gt);
}

inline void record_failure(SampleResult& r, const std::exception& e) {
  r.backend_error = true;
  r.error = e.what();
}

}  // namespace detail

// Everything stages 1-3 produced for one sample, before mask selection.
struct TvSamTrace {
  std::string prompt;
  BoxSet grounded;  // after NMS and confidence filtering
  BoxSet prompts;   // TOP-k prefix sent to the segmenter
  std::vector<ScoredMaskCandidate> candidates;
  StageTimings timings;
};

// Shared stage chain of tv_sam and gsam. With `describe` false the prompt is
// the bare concept name and no chat call is made.
inline TvSamTrace trace_grounded(const Sample& s, const LoadedSample& ls, const Backends& be,
                                 const TemplateRegistry& templates, const MethodSpec& spec,
                                 bool describe) {
  TvSamTrace t;
  const ConceptQuery query{s.concept_name, s.modality};
  auto t0 = detail::Clock::now();
  DescriptivePrompt prompt;
  if (describe) {
    const auto dialog = build_dialog(query, spec.dialog_template, templates);
    std::string reply;
    {
      InFlightLimiter::Permit permit(be.chat_limit.get());
      reply = chat_describe(detail::require(be.chat, "chat"), ls.image, dialog);
    }
    prompt = render_prompt(parse_attributes(reply), query, spec.prompt_template, templates);
  } else {
    prompt = DescriptivePrompt{detail::trim(s.concept_name), {}, "concept"};
  }
  t.prompt = prompt.text;
  t.timings.prompt_ms = detail::ms_since(t0);

  t0 = detail::Clock::now();
  {
    InFlightLimiter::Permit permit(be.detector_limit.get());
    t.grounded = ground_concept(ls.image, prompt, detail::require(be.detector, "detector"), spec.grounding);
  }
  t.prompts = select_top_k(t.grounded, spec.grounding.top_k);
  t.timings.ground_ms = detail::ms_since(t0);

  t0 = detail::Clock::now();
  if (!t.prompts.empty()) {
    InFlightLimiter::Permit permit(be.segmenter_limit.get());
    t.candidates = segment_candidates(ls.image, t.prompts, detail::require(be.segmenter, "segmenter"));
  }
  t.timings.segment_ms = detail::ms_since(t0);
  return t;
}

namespace detail {
inline SampleResult run_grounded(const Sample& s, const LoadedSample& ls, const Backends& be,
                                 const TemplateRegistry& templates, const MethodSpec& spec,
                                 bool describe) {
  SampleResult r = start_result(s, spec);
  std::optional<BinaryMask> chosen;
  try {
    auto t = trace_grounded(s, ls, be, templates, spec, describe);
    r.prompt = t.prompt;
    r.boxes = t.prompts.boxes();
    r.timings = t.timings;
    if (t.prompts.empty()) {
      r.grounding_miss = true;
    } else {
      chosen = select_mask(t.candidates, spec.selection, ls.gt).mask;
    }
  } catch (const PreconditionError&) {
    throw;
  } catch (const TemplateError&) {
    throw;
  } catch (const std::exception& e) {
    record_failure(r, e);
  }
  finish_result(r, ls, chosen);
  return r;
}
}  // namespace detail

inline void check_selection(const MethodSpec& spec, const LoadedSample& ls) {
  if (spec.selection.requires_gt() && !ls.gt) {
    throw PreconditionError("oracle selection needs ground truth for '" + ls.image.source_id() + "'");
  }
}

inline SampleResult run_tvsam(const Sample& s, const LoadedSample& ls, const Backends& be,
                              const TemplateRegistry& templates, const MethodSpec& spec) {
  if (spec.kind != MethodKind::tv_sam) throw PreconditionError("run_tvsam needs a tv_sam method");
  check_selection(spec, ls);
  return detail::run_grounded(s, ls, be, templates, spec, true);
}

inline SampleResult run_gsam(const Sample& s, const LoadedSample& ls, const Backends& be,
                             const TemplateRegistry& templates, const MethodSpec& spec) {
  if (spec.kind != MethodKind::gsam) throw PreconditionError("run_gsam needs a gsam method");
  check_selection(spec, ls);
  return detail::run_grounded(s, ls, be, templates, spec, false);
}

inline SampleResult run_sam_auto(const Sample& s, const LoadedSample& ls, const Backends& be,
                                 const MethodSpec& spec) {
  if (spec.kind != MethodKind::sam_auto) throw PreconditionError("run_sam_auto needs a sam_auto method");
  check_selection(spec, ls);
  SampleResult r = detail::start_result(s, spec);
  std::optional<BinaryMask> chosen;
  const auto t0 = detail::Clock::now();
  try {
    std::vector<ScoredMaskCandidate> cands;
    {
      InFlightLimiter::Permit permit(be.auto_limit.get());
      cands = segment_auto(be.auto_seg(), ls.image);
    }
    if (!cands.empty()) chosen = select_mask(cands, spec.selection, ls.gt).mask;
  } catch (const PreconditionError&) {
    throw;
  } catch (const std::exception& e) {
    detail::record_failure(r, e);
  }
  r.timings.segment_ms = detail::ms_since(t0);
  detail::finish_result(r, ls, chosen);
  return r;
}

inline SampleResult run_sam_bbox(const Sample& s, const LoadedSample& ls, const Backends& be,
                                 const MethodSpec& spec) {
  if (spec.kind != MethodKind::sam_bbox) throw PreconditionError("run_sam_bbox needs a sam_bbox method");
  if (!ls.gt) throw PreconditionError("sam_bbox needs a ground-truth mask for '" + ls.image.source_id() + "'");
  SampleResult r = detail::start_result(s, spec);
  std::optional<BinaryMask> chosen;
  const auto t0 = detail::Clock::now();
  try {
    BoxSet gold;
    if (!ls.gt->empty()) gold = mask_to_bbox(*ls.gt, spec.gold_box_mode);
    r.boxes = gold.boxes();
    if (gold.empty()) {
      r.grounding_miss = true;
    } else {
      std::vector<ScoredMaskCandidate> cands;
      {
        InFlightLimiter::Permit permit(be.segmenter_limit.get());
        cands = segment_candidates(ls.image, gold, detail::require(be.segmenter, "segmenter"));
      }
      chosen = select_mask(cands, spec.selection, ls.gt).mask;
    }
  } catch (const PreconditionError&) {
    throw;
  } catch (const std::exception& e) {
    detail::record_failure(r, e);
  }
  r.timings.segment_ms = detail::ms_since(t0);
  detail::finish_result(r, ls, chosen);
  return r;
}

inline SampleResult run_method(const Sample& s, const LoadedSample& ls, const Backends& be,
                               const TemplateRegistry& templates, const MethodSpec& spec) {
  switch (spec.kind) {
    case MethodKind::tv_sam: return run_tvsam(s, ls, be, templates, spec);
    case MethodKind::gsam: return run_gsam(s, ls, be, templates, spec);
    case MethodKind::sam_auto: return run_sam_auto(s, ls, be, spec);
    case MethodKind::sam_bbox: return run_sam_bbox(s, ls, be, spec);
  }
  throw PreconditionError("unknown method kind");
}

struct SkippedSample {
  std::string dataset;
  std::string sample_id;
  std::string reason;
};

struct BenchmarkOutcome {
  std::vector<SampleResult> results;  // sorted by (dataset, sample_id, method order)
  std::vector<SkippedSample> skipped;
  std::size_t warnings = 0;
  std::size_t samples_total = 0;
};

// Calls `fn(index)` for 0..n-1 on up to `jobs` threads.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Evaluates every (sample, method) pair. A sample whose files cannot be
// loaded is skipped for all methods and counted as a warning. Output order
// does not depend on `jobs`.
inline BenchmarkOutcome run_benchmark(const std::vector<Manifest>& manifests,
                                      const std::vector<MethodSpec>& methods, const Backends& be,
                                      const TemplateRegistry& templates, int jobs) {
  if (methods.empty()) throw ConfigError("no methods configured");
  for (const auto& m : methods) m.validate();
  std::vector<const Sample*> samples;
  for (const auto& m : manifests) {
    for (const auto& s : m.samples) samples.push_back(&s);
  }
  BenchmarkOutcome out;
  out.samples_total = samples.size();
  std::mutex mu;
  std::vector<std::pair<std::size_t, SampleResult>> tagged;

  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    const Sample& s = *samples[i];
    std::optional<LoadedSample> ls;
    try {
      ls = load_sample(s);
    } catch (const std::exception& e) {
      spdlog::warn("skipping {}: {}", s.source_id(), e.what());
      std::lock_guard lock(mu);
      out.skipped.push_back({s.dataset, s.sample_id, e.what()});
      ++out.warnings;
      return;
    }
    std::vector<std::pair<std::size_t, SampleResult>> local;
    std::size_t local_warnings = 0;
    for (std::size_t m = 0; m < methods.size(); ++m) {
      SampleResult r;
      try {
        r = run_method(s, *ls, be, templates, methods[m]);
      } catch (const PreconditionError& e) {
        // Method undefined for this sample (e.g. sam_bbox without ground truth).
        r = detail::start_result(s, methods[m]);
        r.error = e.what();
        spdlog::warn("{} {}: {}", methods[m].name, s.source_id(), e.what());
        ++local_warnings;
      }
      if (r.backend_error) {
        spdlog::warn("{} {}: {}", methods[m].name, s.source_id(), r.error);
        ++local_warnings;
      }
      local.emplace_back(m, std::move(r));
    }
    std::lock_guard lock(mu);
    out.warnings += local_warnings;
    for (auto& x : local) tagged.push_back(std::move(x));
  });

  std::sort(tagged.begin(), tagged.end(), [](const auto& a, const auto& b) {
    return std::tie(a.second.dataset, a.second.sample_id, a.first) <
           std::tie(b.second.dataset, b.second.sample_id, b.first);
  });
  for (auto& [m, r] : tagged) out.results.push_back(std::move(r));
  std::sort(out.skipped.begin(), out.skipped.end(), [](const auto& a, const auto& b) {
    return std::tie(a.dataset, a.sample_id) < std::tie(b.dataset, b.sample_id);
  });
  return out;
}

// ---- TOP-k sweep -----------------------------------------------------------

struct SweepRow {
  std::string sample_id;
  std::string dataset;
  int k = 0;
  std::optional<double> dice;
  bool grounding_miss = false;
  bool backend_error = false;
};

struct SweepOutcome {
  std::vector<int> ks;
  std::vector<SweepRow> rows;  // sorted by (dataset, sample_id, k)
  std::vector<SkippedSample> skipped;
  std::size_t warnings = 0;
};

// Best oracle Dice among candidates prompted by the first k boxes.
inline std::optional<double> best_dice_within_top_k(const std::vector<ScoredMaskCandidate>& pool,
                                                    std::size_t k, const BinaryMask& gt) {
  std::optional<double> best;
  for (const auto& c : pool) {
    if (!c.source_index || *c.source_index >= k) continue;
    const double d = dice(c.mask, gt);
    if (!best || d > *best) best = d;
  }
  return best;
}

// Runs the tv_sam chain once per sample with k = max(ks), then scores oracle
// selection restricted to each TOP-k prefix of the box ranking. Backends are
// called once per sample regardless of how many k values are evaluated.
inline SweepOutcome topk_sweep(const std::vector<Manifest>& manifests, const Backends& be,
                               const TemplateRegistry& templates, MethodSpec base,
                               const std::vector<int>& ks, int jobs) {
  if (ks.empty()) throw PreconditionError("sweep needs at least one k");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < 1 || (i > 0 && ks[i] <= ks[i - 1])) {
      throw PreconditionError("sweep k values must be positive and strictly ascending");
    }
  }
  if (base.kind != MethodKind::tv_sam) throw PreconditionError("sweep needs a tv_sam method");
  base.grounding.top_k = ks.back();
  base.selection = SelectionPolicy{SelectionKind::oracle_dice};
  base.validate();

  std::vector<const Sample*> samples;
  for (const auto& m : manifests) {
    for (const auto& s : m.samples) samples.push_back(&s);
  }
  SweepOutcome out;
  out.ks = ks;
  std::mutex mu;
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    const Sample& s = *samples[i];
    std::optional<LoadedSample> ls;
    try {
      ls = load_sample(s);
      if (!ls->gt) throw PreconditionError("sweep needs ground truth");
    } catch (const std::exception& e) {
      spdlog::warn("skipping {}: {}", s.source_id(), e.what());
      std::lock_guard lock(mu);
      out.skipped.push_back({s.dataset, s.sample_id, e.what()});
      ++out.warnings;
      return;
    }
    std::vector<SweepRow> local;
    bool failed = false;
    TvSamTrace trace;
    try {
      trace = trace_grounded(s, *ls, be, templates, base, true);
    } catch (const TemplateError&) {
      throw;
    } catch (const std::exception& e) {
      spdlog::warn("sweep {}: {}", s.source_id(), e.what());
      failed = true;
    }
    const BinaryMask empty(ls->image.width(), ls->image.height());
    for (int k : ks) {
      SweepRow row{s.sample_id, s.dataset, k, std::nullopt, trace.prompts.empty(), failed};
      auto best = failed ? std::nullopt : best_dice_within_top_k(trace.candidates, k, *ls->gt);
      row.dice = best ? *best : dice(empty, *ls->gt);
      local.push_back(row);
    }
    std::lock_guard lock(mu);
    out.warnings += failed ? 1 : 0;
    for (auto& r : local) out.rows.push_back(std::move(r));
  });
  std::sort(out.rows.begin(), out.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.dataset, a.sample_id, a.k) < std::tie(b.dataset, b.sample_id, b.k);
  });
  std::sort(out.skipped.begin(), out.skipped.end(), [](const auto& a, const auto& b) {
    return std::tie(a.dataset, a.sample_id) < std::tie(b.dataset, b.sample_id);
  });
  return out;
}

}  // namespace tvseg
