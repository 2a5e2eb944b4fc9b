#pragma once

// Message envelope and framing.
//
// A frame is a 4-byte big-endian payload length followed by a UTF-8 JSON
// document {"body":{...},"type":"<name>"}. Encoding is canonical: object keys
// are sorted, integral numbers below 2^53 are written as integers, other
// numbers in shortest round-trip form (f32 values use their float form).

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "json.hpp"
#include "netgym/error.hpp"
#include "netgym/spaces.hpp"

namespace netgym {

inline constexpr std::uint32_t kMaxFrameSize = 16u * 1024u * 1024u;
inline constexpr std::size_t kFrameHeaderSize = 4;

using EnvArgs = std::map<std::string, std::string>;

enum class DoneReason { kNone, kGameOver, kSimulationEnd };

inline std::string_view done_reason_name(DoneReason r) {
  switch (r) {
    case DoneReason::kGameOver: return "GameOver";
    case DoneReason::kSimulationEnd: return "SimulationEnd";
    default: return "";
  }
}

struct InitReq {
  EnvArgs args;
  bool operator==(const InitReq&) const = default;
};
struct InitResp {
  SpaceSpec observation_space;
  SpaceSpec action_space;
  bool operator==(const InitResp&) const = default;
};
struct ResetReq {
  bool operator==(const ResetReq&) const = default;
};
struct ResetResp {
  DataContainer observation;
  bool operator==(const ResetResp&) const = default;
};
struct StepReq {
  DataContainer action;
  bool operator==(const StepReq&) const = default;
};
struct StepResp {
  DataContainer observation;
  float reward = 0.0f;
  bool done = false;
  DoneReason done_reason = DoneReason::kNone;
  std::string info;
  bool operator==(const StepResp&) const = default;
};
struct CloseReq {
  bool operator==(const CloseReq&) const = default;
};
struct CloseResp {
  bool operator==(const CloseResp&) const = default;
};
struct ErrorResp {
  std::string code;
  std::string detail;
  bool operator==(const ErrorResp&) const = default;
};

using Message = std::variant<InitReq, InitResp, ResetReq, ResetResp, StepReq, StepResp, CloseReq, CloseResp, ErrorResp>;

inline std::string_view type_name(const Message& m) {
  static constexpr std::string_view kNames[] = {"init_req",  "init_resp", "reset_req",  "reset_resp", "step_req",
                                                "step_resp", "close_req", "close_resp", "error_resp"};
  return kNames[m.index()];
}

inline bool is_request(const Message& m) {
  return std::holds_alternative<InitReq>(m) || std::holds_alternative<ResetReq>(m) ||
         std::holds_alternative<StepReq>(m) || std::holds_alternative<CloseReq>(m);
}

namespace wire {

using Json = nlohmann::json;

inline constexpr double kExactIntegerLimit = 9007199254740992.0;  // 2^53

inline Json number(double x) {
  if (!std::isfinite(x)) throw ValidationError("non-finite number cannot be encoded");
  if (x == std::trunc(x) && std::abs(x) < kExactIntegerLimit) return Json(static_cast<std::int64_t>(x));
  return Json(x);
}

inline Json number(float x) {
  if (!std::isfinite(x)) throw ValidationError("non-finite number cannot be encoded");
  const double widened = x;
  if (widened == std::trunc(widened) && std::abs(widened) < kExactIntegerLimit) {
    return Json(static_cast<std::int64_t>(widened));
  }
  // Re-read the shortest float spelling as a double so the document carries
  // "0.1" rather than the widened 0.10000000149011612.
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  *res.ptr = '\0';
  return Json(std::strtod(buf, nullptr));
}

// -- reading helpers --------------------------------------------------------

[[noreturn]] inline void malformed(const std::string& what) { throw ParseError("malformed document: " + what); }

inline const Json& field(const Json& obj, const char* key) {
  if (!obj.is_object()) malformed(std::string("expected object holding '") + key + "'");
  auto it = obj.find(key);
  if (it == obj.end()) malformed(std::string("missing field '") + key + "'");
  return *it;
}

inline const std::string& as_string(const Json& j, const char* what) {
  if (!j.is_string()) malformed(std::string(what) + " must be a string");
  return j.get_ref<const std::string&>();
}

inline std::int64_t as_int(const Json& j, const char* what) {
  if (j.is_number_unsigned()) {
    const auto u = j.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      malformed(std::string(what) + " out of range");
    }
    return static_cast<std::int64_t>(u);
  }
  if (j.is_number_integer()) return j.get<std::int64_t>();
  malformed(std::string(what) + " must be an integer");
}

inline double as_double(const Json& j, const char* what) {
  if (!j.is_number()) malformed(std::string(what) + " must be a number");
  return j.get<double>();
}

inline bool as_bool(const Json& j, const char* what) {
  if (!j.is_boolean()) malformed(std::string(what) + " must be a boolean");
  return j.get<bool>();
}

inline Shape as_shape(const Json& j) {
  if (!j.is_array() || j.empty()) malformed("shape must be a non-empty array");
  Shape s;
  s.reserve(j.size());
  for (const auto& d : j) {
    const auto v = as_int(d, "shape dimension");
    if (v <= 0 || v > std::numeric_limits<std::uint32_t>::max()) malformed("shape dimension out of range");
    s.push_back(static_cast<std::uint32_t>(v));
  }
  return s;
}

inline DType as_dtype(const Json& j) {
  auto d = parse_dtype(as_string(j, "dtype"));
  if (!d) malformed("unknown dtype");
  return *d;
}

// -- spaces -----------------------------------------------------------------

inline Json to_json(const SpaceSpec& s) {
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DiscreteSpace>) {
          return Json{{"kind", "discrete"}, {"n", v.n}};
        } else if constexpr (std::is_same_v<T, BoxSpace>) {
          return Json{{"kind", "box"},
                      {"low", number(v.low)},
                      {"high", number(v.high)},
                      {"shape", v.shape},
                      {"dtype", std::string(dtype_name(v.dtype))}};
        } else if constexpr (std::is_same_v<T, TupleSpace>) {
          Json children = Json::array();
          for (const auto& c : v.children) children.push_back(to_json(c));
          return Json{{"kind", "tuple"}, {"children", std::move(children)}};
        } else {
          Json entries = Json::object();
          for (const auto& [k, c] : v.entries) entries[k] = to_json(c);
          return Json{{"kind", "dict"}, {"entries", std::move(entries)}};
        }
      },
      s.value);
}

inline SpaceSpec space_from_json(const Json& j, std::size_t depth = 1) {
  if (depth > kMaxSpaceDepth) malformed("space nesting deeper than 16");
  const auto& kind = as_string(field(j, "kind"), "kind");
  SpaceSpec out;
  if (kind == "discrete") {
    out = DiscreteSpace{as_int(field(j, "n"), "n")};
  } else if (kind == "box") {
    // Each part is parsed before aggregate construction: a throwing
    // initializer inside braces leaks earlier members on GCC 11.
    const double low = as_double(field(j, "low"), "low");
    const double high = as_double(field(j, "high"), "high");
    const DType dtype = as_dtype(field(j, "dtype"));
    Shape shape = as_shape(field(j, "shape"));
    out = BoxSpace{low, high, std::move(shape), dtype};
  } else if (kind == "tuple") {
    const auto& children = field(j, "children");
    if (!children.is_array()) malformed("children must be an array");
    TupleSpace t;
    for (const auto& c : children) t.children.push_back(space_from_json(c, depth + 1));
    out = std::move(t);
  } else if (kind == "dict") {
    const auto& entries = field(j, "entries");
    if (!entries.is_object()) malformed("entries must be an object");
    DictSpace d;
    for (const auto& [k, c] : entries.items()) d.entries.emplace(k, space_from_json(c, depth + 1));
    out = std::move(d);
  } else {
    malformed("unknown space kind '" + kind + "'");
  }
  try {
    if (depth == 1) validate(out);
  } catch (const ValidationError& e) {
    malformed(e.what());
  }
  return out;
}

// -- containers -------------------------------------------------------------

inline Json to_json(const DataContainer& c) {
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DiscreteValue>) {
          return Json{{"kind", "discrete"}, {"value", v.value}};
        } else if constexpr (std::is_same_v<T, BoxValue>) {
          Json data = Json::array();
          std::visit(
              [&data](const auto& vec) {
                for (const auto& x : vec) {
                  if constexpr (std::is_integral_v<std::decay_t<decltype(x)>>) {
                    data.push_back(x);
                  } else {
                    data.push_back(number(x));
                  }
                }
              },
              v.data);
          return Json{{"kind", "box"},
                      {"shape", v.shape},
                      {"dtype", std::string(dtype_name(v.dtype()))},
                      {"data", std::move(data)}};
        } else if constexpr (std::is_same_v<T, TupleValue>) {
          Json items = Json::array();
          for (const auto& i : v.items) items.push_back(to_json(i));
          return Json{{"kind", "tuple"}, {"items", std::move(items)}};
        } else {
          Json entries = Json::object();
          for (const auto& [k, i] : v.entries) entries[k] = to_json(i);
          return Json{{"kind", "dict"}, {"entries", std::move(entries)}};
        }
      },
      c.value);
}

template <typename T>
std::vector<T> box_data(const Json& arr, std::size_t expected) {
  if (!arr.is_array()) malformed("data must be an array");
  if (arr.size() != expected) malformed("data length does not match shape");
  std::vector<T> out;
  out.reserve(expected);
  for (const auto& x : arr) {
    if constexpr (std::is_integral_v<T>) {
      const auto v = as_int(x, "data element");
      if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max()) malformed("data element out of dtype range");
      out.push_back(static_cast<T>(v));
    } else {
      const double v = as_double(x, "data element");
      if (std::is_same_v<T, float> && std::abs(v) > std::numeric_limits<float>::max()) malformed("data element out of f32 range");
      out.push_back(static_cast<T>(v));
    }
  }
  return out;
}

inline DataContainer container_from_json(const Json& j, std::size_t depth = 1) {
  if (depth > kMaxSpaceDepth) malformed("container nesting deeper than 16");
  const auto& kind = as_string(field(j, "kind"), "kind");
  if (kind == "discrete") return DiscreteValue{as_int(field(j, "value"), "value")};
  if (kind == "box") {
    Shape shape = as_shape(field(j, "shape"));
    std::size_t n = 0;
    try {
      n = flat_len(shape);
    } catch (const RangeError& e) {
      malformed(e.what());
    }
    const auto& data = field(j, "data");
    BoxData values;
    switch (as_dtype(field(j, "dtype"))) {
      case DType::kU32: values = box_data<std::uint32_t>(data, n); break;
      case DType::kI32: values = box_data<std::int32_t>(data, n); break;
      case DType::kF32: values = box_data<float>(data, n); break;
      case DType::kF64: values = box_data<double>(data, n); break;
    }
    return BoxValue{std::move(shape), std::move(values)};
  }
  if (kind == "tuple") {
    const auto& items = field(j, "items");
    if (!items.is_array()) malformed("items must be an array");
    TupleValue t;
    for (const auto& i : items) t.items.push_back(container_from_json(i, depth + 1));
    return t;
  }
  if (kind == "dict") {
    const auto& entries = field(j, "entries");
    if (!entries.is_object()) malformed("entries must be an object");
    DictValue d;
    for (const auto& [k, i] : entries.items()) d.entries.emplace(k, container_from_json(i, depth + 1));
    return d;
  }
  malformed("unknown container kind '" + kind + "'");
}

// -- messages ---------------------------------------------------------------

inline Json body_of(const Message& m) {
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, InitReq>) {
          Json args = Json::object();
          for (const auto& [k, val] : v.args) args[k] = val;
          return Json{{"args", std::move(args)}};
        } else if constexpr (std::is_same_v<T, InitResp>) {
          return Json{{"observation_space", to_json(v.observation_space)}, {"action_space", to_json(v.action_space)}};
        } else if constexpr (std::is_same_v<T, ResetResp>) {
          return Json{{"observation", to_json(v.observation)}};
        } else if constexpr (std::is_same_v<T, StepReq>) {
          return Json{{"action", to_json(v.action)}};
        } else if constexpr (std::is_same_v<T, StepResp>) {
          return Json{{"observation", to_json(v.observation)},
                      {"reward", number(v.reward)},
                      {"done", v.done},
                      {"done_reason", std::string(done_reason_name(v.done_reason))},
                      {"info", v.info}};
        } else if constexpr (std::is_same_v<T, ErrorResp>) {
          return Json{{"code", v.code}, {"detail", v.detail}};
        } else {
          return Json::object();
        }
      },
      m);
}

inline Message message_from(std::string_view type, const Json& body) {
  if (type == "init_req") {
    const auto& args = field(body, "args");
    if (!args.is_object()) malformed("args must be an object");
    InitReq r;
    for (const auto& [k, v] : args.items()) r.args.emplace(k, as_string(v, "arg value"));
    return r;
  }
  if (type == "init_resp") {
    SpaceSpec obs = space_from_json(field(body, "observation_space"));
    SpaceSpec act = space_from_json(field(body, "action_space"));
    return InitResp{std::move(obs), std::move(act)};
  }
  if (type == "reset_req") return ResetReq{};
  if (type == "reset_resp") return ResetResp{container_from_json(field(body, "observation"))};
  if (type == "step_req") return StepReq{container_from_json(field(body, "action"))};
  if (type == "step_resp") {
    StepResp r;
    r.observation = container_from_json(field(body, "observation"));
    const double reward = as_double(field(body, "reward"), "reward");
    if (std::abs(reward) > std::numeric_limits<float>::max()) malformed("reward out of f32 range");
    r.reward = static_cast<float>(reward);
    r.done = as_bool(field(body, "done"), "done");
    const auto& reason = as_string(field(body, "done_reason"), "done_reason");
    if (reason == "GameOver") {
      r.done_reason = DoneReason::kGameOver;
    } else if (reason == "SimulationEnd") {
      r.done_reason = DoneReason::kSimulationEnd;
    } else if (reason.empty()) {
      r.done_reason = DoneReason::kNone;
    } else {
      malformed("unknown done_reason '" + reason + "'");
    }
    r.info = as_string(field(body, "info"), "info");
    return r;
  }
  if (type == "close_req") return CloseReq{};
  if (type == "close_resp") return CloseResp{};
  if (type == "error_resp") {
    std::string code = as_string(field(body, "code"), "code");
    std::string detail = as_string(field(body, "detail"), "detail");
    return ErrorResp{std::move(code), std::move(detail)};
  }
  throw ProtocolError("unknown message type '" + std::string(type) + "'");
}

}  // namespace wire

/// Canonical JSON text of a message, without the length prefix. Error
/// details may quote peer bytes, so invalid UTF-8 there becomes U+FFFD.
inline std::string encode_payload(const Message& m) {
  wire::Json doc{{"type", std::string(type_name(m))}, {"body", wire::body_of(m)}};
  try {
    if (std::holds_alternative<ErrorResp>(m)) return doc.dump(-1, ' ', false, wire::Json::error_handler_t::replace);
    return doc.dump();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("unencodable message: ") + e.what());
  }
}

inline void put_u32be(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>(v & 0xFF));
}

inline std::uint32_t get_u32be(std::string_view in) {
  auto b = [&in](std::size_t i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(in[i])); };
  return (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
}

inline std::string frame(std::string_view payload) {
  if (payload.size() > kMaxFrameSize) throw SizeError("payload exceeds 16 MiB");
  std::string out;
  out.reserve(kFrameHeaderSize + payload.size());
  put_u32be(out, static_cast<std::uint32_t>(payload.size()));
  out.append(payload);
  return out;
}

/// Length-prefixed canonical frame.
inline std::string encode(const Message& m) { return frame(encode_payload(m)); }

/// Parses one payload document. ParseError for malformed text or bodies,
/// ProtocolError for an unknown `type`.
inline Message decode_payload(std::string_view payload) {
  wire::Json doc;
  try {
    doc = wire::Json::parse(payload);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed document: ") + e.what());
  }
  if (!doc.is_object()) wire::malformed("top level must be an object");
  const auto& type = wire::as_string(wire::field(doc, "type"), "type");
  const auto& body = wire::field(doc, "body");
  if (!body.is_object()) wire::malformed("body must be an object");
  try {
    return wire::message_from(type, body);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed document: ") + e.what());
  }
}

/// Decodes exactly one complete frame.
inline Message decode(std::string_view bytes) {
  if (bytes.size() < kFrameHeaderSize) throw FramingError("truncated length prefix");
  const std::uint32_t len = get_u32be(bytes);
  if (len > kMaxFrameSize) throw SizeError("declared frame length exceeds 16 MiB");
  if (bytes.size() < kFrameHeaderSize + len) throw FramingError("truncated payload");
  if (bytes.size() > kFrameHeaderSize + len) throw FramingError("trailing bytes after frame");
  return decode_payload(bytes.substr(kFrameHeaderSize, len));
}

/// Incremental splitter for a byte stream of frames.
class FrameReader {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }

  /// Next complete payload, or nullopt when more bytes are needed. Throws
  /// SizeError on an oversized length prefix; the stream is then unusable.
  std::optional<std::string> next() {
    if (buffer_.size() < kFrameHeaderSize) return std::nullopt;
    const std::uint32_t len = get_u32be(buffer_);
    if (len > kMaxFrameSize) throw SizeError("declared frame length exceeds 16 MiB");
    if (buffer_.size() < kFrameHeaderSize + len) return std::nullopt;
    std::string payload = buffer_.substr(kFrameHeaderSize, len);
    buffer_.erase(0, kFrameHeaderSize + len);
    return payload;
  }

  /// Bytes held back waiting for the rest of a frame.
  std::size_t buffered() const noexcept { return buffer_.size(); }

 private:
  std::string buffer_;
};

}  // namespace netgym
