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

// tvseg/1 wire codec. Bodies are JSON objects with keys in lexicographic
// order and no insignificant whitespace, so encode(parse(x)) == x for every
// canonical message. Masks travel as canonical RLE, images as base64 bytes.
//
//   POST /v1/chat          {image, messages:[{role,text}]}  -> {text}
//   POST /v1/detect        {image, phrase}                  -> {boxes:[{x0,y0,x1,y1,score}]}
//   POST /v1/segment       {image, boxes:[...]}             -> {candidates:[{quality,rle,source_index}]}
//   POST /v1/segment_auto  {image}                          -> {candidates:[{quality,rle}]}
//   errors                 {error:{code,message}} with a non-200 status

#include <boost/beast/core/detail/base64.hpp>
#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tvseg/backend.hpp"
#include "tvseg/error.hpp"
#include "tvseg/geom.hpp"
#include "tvseg/image.hpp"

namespace tvseg::wire {

using json = nlohmann::json;

inline constexpr std::string_view kProtocol = "tvseg/1";
inline constexpr std::string_view kChatPath = "/v1/chat";
inline constexpr std::string_view kDetectPath = "/v1/detect";
inline constexpr std::string_view kSegmentPath = "/v1/segment";
inline constexpr std::string_view kSegmentAutoPath = "/v1/segment_auto";

struct ChatMessage {
  std::string role;  // "system" or "user"
  std::string text;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::optional<ImagePayload> image;
  std::vector<ChatMessage> messages;
};

struct ChatResponse {
  std::string text;
};

struct DetectRequest {
  ImagePayload image;
  std::string phrase;
};

struct DetectResponse {
  BoxSet boxes;
};

struct SegmentRequest {
  ImagePayload image;
  BoxSet boxes;
};

struct SegmentAutoRequest {
  ImagePayload image;
};

struct SegmentResponse {
  std::vector<ScoredMaskCandidate> candidates;
};

struct ErrorEnvelope {
  std::string code;
  std::string message;
};

// ---- field access ----------------------------------------------------------

namespace detail {

inline const json& field(const json& obj, const char* name) {
  if (!obj.is_object()) throw ProtocolError("expected a JSON object");
  auto it = obj.find(name);
  if (it == obj.end()) throw ProtocolError(std::string("missing field '") + name + "'");
  return *it;
}

inline std::int64_t get_int(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_number_integer()) throw ProtocolError(std::string("field '") + name + "' must be an integer");
  return v.get<std::int64_t>();
}

inline int get_int32(const json& obj, const char* name) {
  const auto v = get_int(obj, name);
  if (v < INT32_MIN || v > INT32_MAX) throw ProtocolError(std::string("field '") + name + "' out of range");
  return static_cast<int>(v);
}

inline double get_number(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_number()) throw ProtocolError(std::string("field '") + name + "' must be a number");
  return v.get<double>();
}

inline std::string get_string(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_string()) throw ProtocolError(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

inline const json& get_array(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_array()) throw ProtocolError(std::string("field '") + name + "' must be an array");
  return v;
}

inline json parse_body(std::string_view body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace detail

// ---- base64 ----------------------------------------------------------------

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  namespace b64 = boost::beast::detail::base64;
  std::string out(b64::encoded_size(bytes.size()), '\0');
  out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
  return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string_view text) {
  namespace b64 = boost::beast::detail::base64;
  if (text.size() % 4 != 0) throw ProtocolError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(b64::decoded_size(text.size()));
  auto [written, read] = b64::decode(out.data(), text.data(), text.size());
  // The decoder stops at padding; at most two '=' may follow.
  const auto rest = text.substr(read);
  if (rest.size() > 2 || rest.find_first_not_of('=') != std::string_view::npos) {
    throw ProtocolError("invalid base64 payload");
  }
  out.resize(written);
  return out;
}

// ---- value codecs ----------------------------------------------------------

inline json encode_image(const ImagePayload& img) {
  json j = {{"w", img.width()}, {"h", img.height()}, {"c", img.channels()},
            {"b64", base64_encode(img.pixels())}};
  if (!img.source_id().empty()) j["id"] = img.source_id();
  return j;
}

inline ImagePayload decode_image(const json& j) {
  const int w = detail::get_int32(j, "w");
  const int h = detail::get_int32(j, "h");
  const int c = detail::get_int32(j, "c");
  auto bytes = base64_decode(detail::get_string(j, "b64"));
  std::string id;
  if (j.contains("id")) id = detail::get_string(j, "id");
  try {
    return ImagePayload(w, h, c, std::move(bytes), std::move(id));
  } catch (const Error& e) {
    throw ProtocolError(std::string("bad image: ") + e.what());
  }
}

inline json encode_box(const ScoredBox& b) {
  return {{"x0", b.x_min()}, {"y0", b.y_min()}, {"x1", b.x_max()}, {"y1", b.y_max()},
          {"score", b.score()}};
}

inline ScoredBox decode_box(const json& j) {
  try {
    return ScoredBox(detail::get_int32(j, "x0"), detail::get_int32(j, "y0"),
                     detail::get_int32(j, "x1"), detail::get_int32(j, "y1"),
                     detail::get_number(j, "score"));
  } catch (const InvalidArgument& e) {
    throw ProtocolError(std::string("bad box: ") + e.what());
  }
}

inline json encode_boxes(const BoxSet& boxes) {
  json arr = json::array();
  for (const auto& b : boxes) arr.push_back(encode_box(b));
  return arr;
}

// Boxes in wire order; the wire carries no phrase, so none is set.
inline std::vector<ScoredBox> decode_box_list(const json& arr) {
  std::vector<ScoredBox> out;
  for (const auto& j : arr) out.push_back(decode_box(j));
  return out;
}

inline json encode_rle(const RleMask& r) {
  return {{"w", r.width}, {"h", r.height}, {"runs", r.runs}};
}

inline RleMask decode_rle(const json& j) {
  RleMask r;
  r.width = detail::get_int32(j, "w");
  r.height = detail::get_int32(j, "h");
  for (const auto& v : detail::get_array(j, "runs")) {
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() > UINT32_MAX) {
      throw ProtocolError("RLE runs must be non-negative 32-bit integers");
    }
    r.runs.push_back(v.get<std::uint32_t>());
  }
  return r;
}

inline BinaryMask decode_mask(const json& j) {
  try {
    return rle_decode(decode_rle(j));
  } catch (const DecodeError& e) {
    throw ProtocolError(std::string("bad RLE: ") + e.what());
  }
}

inline json encode_candidate(const ScoredMaskCandidate& c) {
  json j = {{"rle", encode_rle(rle_encode(c.mask))}, {"quality", c.predicted_quality}};
  if (c.source_index) j["source_index"] = *c.source_index;
  return j;
}

inline ScoredMaskCandidate decode_candidate(const json& j) {
  ScoredMaskCandidate c{decode_mask(detail::field(j, "rle")), detail::get_number(j, "quality"),
                        std::nullopt, std::nullopt};
  if (j.contains("source_index")) {
    const auto idx = detail::get_int(j, "source_index");
    if (idx < 0) throw ProtocolError("source_index must be non-negative");
    c.source_index = static_cast<std::size_t>(idx);
  }
  return c;
}

// ---- messages --------------------------------------------------------------

inline std::string encode(const ChatRequest& r) {
  json msgs = json::array();
  for (const auto& m : r.messages) msgs.push_back({{"role", m.role}, {"text", m.text}});
  json j = {{"messages", msgs}};
  if (r.image) j["image"] = encode_image(*r.image);
  return j.dump();
}

inline ChatRequest parse_chat_request(std::string_view body) {
  const auto j = detail::parse_body(body);
  ChatRequest r;
  for (const auto& m : detail::get_array(j, "messages")) {
    ChatMessage msg{detail::get_string(m, "role"), detail::get_string(m, "text")};
    if (msg.role != "system" && msg.role != "user") {
      throw ProtocolError("message role must be 'system' or 'user', got '" + msg.role + "'");
    }
    r.messages.push_back(std::move(msg));
  }
  if (r.messages.empty()) throw ProtocolError("chat request has no messages");
  if (j.contains("image")) r.image = decode_image(j["image"]);
  return r;
}

inline std::string encode(const ChatResponse& r) { return json{{"text", r.text}}.dump(); }

inline ChatResponse parse_chat_response(std::string_view body) {
  return ChatResponse{detail::get_string(detail::parse_body(body), "text")};
}

inline std::string encode(const DetectRequest& r) {
  return json{{"image", encode_image(r.image)}, {"phrase", r.phrase}}.dump();
}

inline DetectRequest parse_detect_request(std::string_view body) {
  const auto j = detail::parse_body(body);
  DetectRequest r{decode_image(detail::field(j, "image")), detail::get_string(j, "phrase")};
  if (r.phrase.empty()) throw ProtocolError("detect phrase is empty");
  return r;
}

inline std::string encode(const DetectResponse& r) {
  return json{{"boxes", encode_boxes(r.boxes)}}.dump();
}

inline DetectResponse parse_detect_response(std::string_view body) {
  const auto j = detail::parse_body(body);
  DetectResponse r;
  for (const auto& b : decode_box_list(detail::get_array(j, "boxes"))) r.boxes.insert(b);
  return r;
}

inline std::string encode(const SegmentRequest& r) {
  return json{{"image", encode_image(r.image)}, {"boxes", encode_boxes(r.boxes)}}.dump();
}

inline SegmentRequest parse_segment_request(std::string_view body) {
  const auto j = detail::parse_body(body);
  SegmentRequest r{decode_image(detail::field(j, "image")), {}};
  const auto list = decode_box_list(detail::get_array(j, "boxes"));
  if (list.empty()) throw ProtocolError("segment request has no boxes");
  for (const auto& b : list) r.boxes.insert(b);
  if (r.boxes.size() != list.size()) throw ProtocolError("segment request repeats a box");
  // Wire order must already be rank order so source_index means the same
  // thing on both sides.
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (!(r.boxes[i] == list[i])) throw ProtocolError("segment request boxes are not in rank order");
  }
  return r;
}

inline std::string encode(const SegmentAutoRequest& r) {
  return json{{"image", encode_image(r.image)}}.dump();
}

inline SegmentAutoRequest parse_segment_auto_request(std::string_view body) {
  const auto j = detail::parse_body(body);
  return SegmentAutoRequest{decode_image(detail::field(j, "image"))};
}

inline std::string encode(const SegmentResponse& r) {
  json arr = json::array();
  for (const auto& c : r.candidates) arr.push_back(encode_candidate(c));
  return json{{"candidates", arr}}.dump();
}

inline SegmentResponse parse_segment_response(std::string_view body) {
  const auto j = detail::parse_body(body);
  SegmentResponse r;
  for (const auto& c : detail::get_array(j, "candidates")) r.candidates.push_back(decode_candidate(c));
  return r;
}

inline std::string encode(const ErrorEnvelope& e) {
  return json{{"error", {{"code", e.code}, {"message", e.message}}}}.dump();
}

inline std::optional<ErrorEnvelope> parse_error(std::string_view body) {
  try {
    const auto j = json::parse(body);
    const auto& e = detail::field(j, "error");
    return ErrorEnvelope{detail::get_string(e, "code"), detail::get_string(e, "message")};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace tvseg::wire
