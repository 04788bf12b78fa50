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

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tvseg {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two masks (or a mask and an image) disagree on width/height.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class EmptyMaskError : public Error {
 public:
  using Error::Error;
};

// Caller broke a documented precondition (empty concept, k == 0, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Network failure that survived every retry.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts, int http_status = 0)
      : Error(what + " (after " + std::to_string(attempts) + " attempt" +
              (attempts == 1 ? "" : "s") + ")"),
        attempts_(attempts), http_status_(http_status) {}

  int attempts() const noexcept { return attempts_; }
  // 0 when the failure happened below HTTP (connect, read, timeout).
  int http_status() const noexcept { return http_status_; }

 private:
  int attempts_;
  int http_status_;
};

// A peer sent something that does not follow the tvseg/1 wire schema.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Manifest problems are collected and reported together.
class ManifestError : public Error {
 public:
  explicit ManifestError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out = "invalid manifest";
    for (const auto& p : problems) {
      out += "\n  ";
      out += p;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

}  // namespace tvseg
