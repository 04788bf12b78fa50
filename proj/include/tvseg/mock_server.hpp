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

// Hosts backends behind the tvseg/1 HTTP protocol.

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <functional>
#include <memory>
#include <string>

#include "tvseg/backend.hpp"
#include "tvseg/error.hpp"
#include "tvseg/wire.hpp"

namespace tvseg {

struct HostedBackends {
  std::shared_ptr<const ChatBackend> chat;
  std::shared_ptr<const DetectorBackend> detector;
  std::shared_ptr<const SegmenterBackend> segmenter;
  std::shared_ptr<const SegmenterBackend> auto_segmenter;
};

class MockServer {
 public:
  explicit MockServer(HostedBackends backends) : backends_(std::move(backends)) {
    server_.Post(std::string(wire::kChatPath), [this](const auto& req, auto& res) {
      handle(req, res, [this](const std::string& body) {
        if (!backends_.chat) throw NotConfigured("chat");
        auto r = wire::parse_chat_request(body);
        std::string dialog;
        for (const auto& m : r.messages) {
          if (m.role == "user") dialog += (dialog.empty() ? "" : "\n") + m.text;
        }
        if (!r.image) throw ProtocolError("chat request carries no image");
        return wire::encode(wire::ChatResponse{chat_describe(*backends_.chat, *r.image, dialog)});
      });
    });
    server_.Post(std::string(wire::kDetectPath), [this](const auto& req, auto& res) {
      handle(req, res, [this](const std::string& body) {
        if (!backends_.detector) throw NotConfigured("detector");
        auto r = wire::parse_detect_request(body);
        auto det = detect(*backends_.detector, r.image, r.phrase);
        if (det.dropped > 0) spdlog::warn("detect {}: {} box(es) dropped", r.image.source_id(), det.dropped);
        return wire::encode(wire::DetectResponse{std::move(det.boxes)});
      });
    });
    server_.Post(std::string(wire::kSegmentPath), [this](const auto& req, auto& res) {
      handle(req, res, [this](const std::string& body) {
        if (!backends_.segmenter) throw NotConfigured("segmenter");
        auto r = wire::parse_segment_request(body);
        return wire::encode(
            wire::SegmentResponse{segment_with_boxes(*backends_.segmenter, r.image, r.boxes)});
      });
    });
    server_.Post(std::string(wire::kSegmentAutoPath), [this](const auto& req, auto& res) {
      handle(req, res, [this](const std::string& body) {
        const auto& seg = backends_.auto_segmenter ? backends_.auto_segmenter : backends_.segmenter;
        if (!seg) throw NotConfigured("auto segmenter");
        auto r = wire::parse_segment_auto_request(body);
        return wire::encode(wire::SegmentResponse{segment_auto(*seg, r.image)});
      });
    });
  }

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  // Binds to host:port (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
      bound = server_.bind_to_any_port(host);
    } else if (!server_.bind_to_port(host, port)) {
      bound = -1;
    }
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return bound;
  }

  // Blocks until stop(); in-flight requests finish before it returns.
  void serve() { server_.listen_after_bind(); }

  void stop() { server_.stop(); }
  bool running() const { return server_.is_running(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  struct NotConfigured : Error {
    explicit NotConfigured(const std::string& role) : Error(role + " backend is not configured") {}
  };

  static void reply_error(httplib::Response& res, int status, const std::string& code,
                          const std::string& message) {
    res.status = status;
    res.set_content(wire::encode(wire::ErrorEnvelope{code, message}), "application/json");
  }

  template <class Fn>
  void handle(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
    try {
      res.set_content(fn(req.body), "application/json");
      res.status = 200;
    } catch (const NotConfigured& e) {
      reply_error(res, 404, "not_configured", e.what());
    } catch (const ProtocolError& e) {
      reply_error(res, 400, "bad_request", e.what());
    } catch (const PreconditionError& e) {
      reply_error(res, 400, "bad_request", e.what());
    } catch (const std::exception& e) {
      reply_error(res, 500, "backend_error", e.what());
    }
    spdlog::info("{} {} -> {}", req.method, req.path, res.status);
  }

  HostedBackends backends_;
  httplib::Server server_;
};

}  // namespace tvseg
