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

// Builds backend handles from configuration: "mock:<name>" endpoints become
// in-process mocks, "http://..." endpoints become tvseg/1 clients.

#include <memory>

#include "tvseg/backend.hpp"
#include "tvseg/mocks.hpp"
#include "tvseg/remote.hpp"

namespace tvseg {

inline std::shared_ptr<ChatBackend> make_chat(const BackendConfig& cfg,
                                              std::shared_ptr<const GroundTruthSource> truth) {
  cfg.validate();
  if (cfg.is_mock()) return make_mock_chat(cfg, std::move(truth));
  return std::make_shared<RemoteChat>(cfg);
}

inline std::shared_ptr<DetectorBackend> make_detector(
    const BackendConfig& cfg, std::shared_ptr<const GroundTruthSource> truth) {
  cfg.validate();
  if (cfg.is_mock()) return make_mock_detector(cfg, std::move(truth));
  return std::make_shared<RemoteDetector>(cfg);
}

inline std::shared_ptr<SegmenterBackend> make_segmenter(
    const BackendConfig& cfg, std::shared_ptr<const GroundTruthSource> truth) {
  cfg.validate();
  if (cfg.is_mock()) return make_mock_segmenter(cfg, std::move(truth));
  return std::make_shared<RemoteSegmenter>(cfg);
}

}  // namespace tvseg
