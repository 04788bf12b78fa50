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

// HTTP clients for backends that speak tvseg/1 over the network.

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <memory>
#include <string>
#include <string_view>
#include <thread>

#include "tvseg/backend.hpp"
#include "tvseg/error.hpp"
#include "tvseg/wire.hpp"

namespace tvseg {

// POSTs JSON bodies with per-attempt timeouts. Connection failures, timeouts
// and 5xx/429 answers are retried up to max_retries times; any other non-200
// status is a protocol error and is not retried.
class HttpTransport {
 public:
  explicit HttpTransport(BackendConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.endpoint.rfind("http://", 0) != 0) {
      throw ConfigError("remote endpoint must start with http://, got '" + cfg_.endpoint + "'");
    }
    while (!cfg_.endpoint.empty() && cfg_.endpoint.back() == '/') cfg_.endpoint.pop_back();
  }

  const BackendConfig& config() const noexcept { return cfg_; }

  std::string post(std::string_view path, const std::string& body) const {
    const int attempts = cfg_.max_retries + 1;
    std::string last_error;
    int last_status = 0;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
      if (attempt > 1) {
        // 100 ms, 200 ms, 400 ms ... capped at 2 s.
        const auto wait = std::min(2000, 100 << std::min(attempt - 2, 5));
        std::this_thread::sleep_for(std::chrono::milliseconds(wait));
      }
      httplib::Client cli(cfg_.endpoint);
      const auto sec = cfg_.timeout_ms / 1000;
      const auto usec = (cfg_.timeout_ms % 1000) * 1000;
      cli.set_connection_timeout(sec, usec);
      cli.set_read_timeout(sec, usec);
      cli.set_write_timeout(sec, usec);
      httplib::Headers headers;
      if (!cfg_.token.empty()) headers.emplace("Authorization", "Bearer " + cfg_.token);
      auto res = cli.Post(std::string(path), headers, body, "application/json");
      if (!res) {
        last_error = cfg_.endpoint + std::string(path) + ": " + httplib::to_string(res.error());
        last_status = 0;
        continue;
      }
      if (res->status == 200) return res->body;
      last_status = res->status;
      std::string detail = "HTTP " + std::to_string(res->status);
      if (auto env = wire::parse_error(res->body)) detail += " " + env->code + ": " + env->message;
      last_error = cfg_.endpoint + std::string(path) + ": " + detail;
      if (res->status >= 500 || res->status == 429) continue;
      throw ProtocolError(last_error);
    }
    throw TransportError(last_error, attempts, last_status);
  }

 private:
  BackendConfig cfg_;
};

class RemoteChat : public ChatBackend {
 public:
  explicit RemoteChat(BackendConfig cfg) : http_(std::move(cfg)) {}

  std::string describe(const ImagePayload& image, const std::string& dialog) const override {
    wire::ChatRequest req{image, {{"user", dialog}}};
    return wire::parse_chat_response(http_.post(wire::kChatPath, wire::encode(req))).text;
  }

  std::string id() const override { return http_.config().endpoint; }

 private:
  HttpTransport http_;
};

class RemoteDetector : public DetectorBackend {
 public:
  explicit RemoteDetector(BackendConfig cfg) : http_(std::move(cfg)) {}

  Detection detect(const ImagePayload& image, const std::string& phrase) const override {
    wire::DetectRequest req{image, phrase};
    auto res = wire::parse_detect_response(http_.post(wire::kDetectPath, wire::encode(req)));
    return Detection{std::move(res.boxes), 0};
  }

  std::string id() const override { return http_.config().endpoint; }

 private:
  HttpTransport http_;
};

class RemoteSegmenter : public SegmenterBackend {
 public:
  explicit RemoteSegmenter(BackendConfig cfg) : http_(std::move(cfg)) {}

  std::vector<ScoredMaskCandidate> segment_with_boxes(const ImagePayload& image,
                                                      const BoxSet& boxes) const override {
    wire::SegmentRequest req{image, boxes};
    return wire::parse_segment_response(http_.post(wire::kSegmentPath, wire::encode(req)))
        .candidates;
  }

  std::vector<ScoredMaskCandidate> segment_auto(const ImagePayload& image) const override {
    wire::SegmentAutoRequest req{image};
    return wire::parse_segment_response(http_.post(wire::kSegmentAutoPath, wire::encode(req)))
        .candidates;
  }

  std::string id() const override { return http_.config().endpoint; }

 private:
  HttpTransport http_;
};

}  // namespace tvseg
