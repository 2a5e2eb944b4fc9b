#include <gtest/gtest.h>

#include "netgym/wire.hpp"
#include "support.hpp"

using namespace netgym;

namespace {

std::string hex_prefix(const std::string& bytes) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02x %02x %02x %02x", static_cast<unsigned char>(bytes[0]),
                static_cast<unsigned char>(bytes[1]), static_cast<unsigned char>(bytes[2]),
                static_cast<unsigned char>(bytes[3]));
  return buf;
}

DataContainer random_conforming(const SpaceSpec& s, RngStream& rng) { return sample(s, rng); }

}  // namespace

// The canonical close request is 30 bytes of text, so the prefix is 0x1e.
TEST(Encode, CloseRequestBytes) {
  const std::string bytes = encode(CloseReq{});
  const std::string text = R"({"body":{},"type":"close_req"})";
  EXPECT_EQ(text.size(), 30u);
  EXPECT_EQ(bytes.substr(4), text);
  EXPECT_EQ(bytes.size(), 4u + 30u);
  EXPECT_EQ(hex_prefix(bytes), "00 00 00 1e");
}

TEST(Encode, InitResponseForQueueSpaces) {
  InitResp r{box(0, 100, {5}, DType::kU32), box(0, 1023, {5}, DType::kU32)};
  const std::string payload = encode_payload(r);
  EXPECT_NE(payload.find(R"("observation_space":{"dtype":"u32","high":100,"kind":"box","low":0,"shape":[5]})"),
            std::string::npos)
      << payload;
}

TEST(Encode, StepResponseCanonicalText) {
  StepResp r{make_box<std::uint32_t>({4}, {0, 0, 1, 0}), -1.0f, false, DoneReason::kNone, "slot=3"};
  EXPECT_EQ(encode_payload(r),
            R"({"body":{"done":false,"done_reason":"","info":"slot=3","observation":{"data":[0,0,1,0],)"
            R"("dtype":"u32","kind":"box","shape":[4]},"reward":-1},"type":"step_resp"})");
}

TEST(Encode, FloatsUseShortestForm) {
  StepResp r{make_box<float>({2}, {0.1f, 1e-3f}), 0.1f, true, DoneReason::kGameOver, ""};
  const std::string payload = encode_payload(r);
  EXPECT_NE(payload.find(R"("data":[0.1,0.001])"), std::string::npos) << payload;
  EXPECT_NE(payload.find(R"("reward":0.1)"), std::string::npos) << payload;
  EXPECT_EQ(std::get<StepResp>(decode_payload(payload)), r);
}

TEST(Encode, DictOrderIsCanonical) {
  DictSpace a, b;
  a.entries.emplace("zeta", discrete(2));
  a.entries.emplace("alpha", discrete(3));
  b.entries.emplace("alpha", discrete(3));
  b.entries.emplace("zeta", discrete(2));
  EXPECT_EQ(encode(InitResp{a, discrete(1)}), encode(InitResp{b, discrete(1)}));
}

TEST(Encode, RejectsOversizedPayload) {
  EXPECT_THROW(frame(std::string(kMaxFrameSize + 1, 'x')), SizeError);
  EXPECT_NO_THROW(frame(std::string(16, 'x')));
}

TEST(Decode, ResetRequest) {
  EXPECT_TRUE(std::holds_alternative<ResetReq>(decode(encode(ResetReq{}))));
}

TEST(Decode, ToleratesUnsortedKeysAndWhitespace) {
  const auto m = decode_payload(R"({ "type" : "step_req", "body" : {"action": {"value": 2, "kind": "discrete"}} })");
  EXPECT_EQ(std::get<StepReq>(m).action, make_discrete(2));
}

TEST(Decode, ClassifiedFailures) {
  EXPECT_THROW(decode_payload(R"({"body":{},"type":"bogus"})"), ProtocolError);
  EXPECT_THROW(decode_payload(R"({"body":{},"type":)"), ParseError);
  EXPECT_THROW(decode_payload(R"([1,2])"), ParseError);
  EXPECT_THROW(decode_payload(R"({"body":[],"type":"reset_req"})"), ParseError);
  EXPECT_THROW(decode_payload(R"({"body":{},"type":"step_req"})"), ParseError);
  EXPECT_THROW(decode_payload(R"({"body":{"args":{"a":1}},"type":"init_req"})"), ParseError);
  // non-canonical but invalid container: data length disagrees with shape
  EXPECT_THROW(decode_payload(R"({"body":{"action":{"data":[1],"dtype":"u32","kind":"box","shape":[2]}},"type":"step_req"})"),
               ParseError);
  // invalid space inside InitResp
  EXPECT_THROW(decode_payload(R"({"body":{"action_space":{"kind":"discrete","n":0},)"
                              R"("observation_space":{"kind":"discrete","n":1}},"type":"init_resp"})"),
               ParseError);
}

TEST(Decode, FramingErrors) {
  std::string bytes;
  put_u32be(bytes, 10);
  bytes += "12345";
  EXPECT_THROW(decode(bytes), FramingError);
  EXPECT_THROW(decode("\x00\x00"), FramingError);
  std::string big;
  put_u32be(big, kMaxFrameSize + 1);
  EXPECT_THROW(decode(big), SizeError);
  EXPECT_THROW(decode(encode(ResetReq{}) + "x"), FramingError);
}

TEST(FrameReader, SplitsAcrossArbitraryChunks) {
  const std::string stream = encode(ResetReq{}) + encode(CloseReq{}) + encode(StepReq{make_discrete(3)});
  for (std::size_t chunk = 1; chunk <= stream.size(); chunk += 3) {
    FrameReader r;
    std::vector<Message> got;
    for (std::size_t at = 0; at < stream.size(); at += chunk) {
      r.feed(std::string_view(stream).substr(at, chunk));
      while (auto p = r.next()) got.push_back(decode_payload(*p));
    }
    ASSERT_EQ(got.size(), 3u);
    EXPECT_EQ(r.buffered(), 0u);
    EXPECT_EQ(got[2], Message(StepReq{make_discrete(3)}));
  }
  FrameReader bad;
  std::string header;
  put_u32be(header, kMaxFrameSize + 1);
  bad.feed(header);
  EXPECT_THROW(bad.next(), SizeError);
}

TEST(RoundTripProperty, RandomTreesSurviveEncoding) {
  RngStream rng(2718, 0);
  for (int i = 0; i < 1000; ++i) {
    const SpaceSpec obs = testkit::random_space(rng);
    const SpaceSpec act = testkit::random_space(rng);
    const DataContainer c = random_conforming(obs, rng);

    const Message init = InitResp{obs, act};
    const std::string init_bytes = encode(init);
    const Message init_back = decode(init_bytes);
    ASSERT_EQ(init_back, init) << encode_payload(init);
    ASSERT_EQ(encode(init_back), init_bytes);

    const Message step = StepResp{c, static_cast<float>(rng.uniform_real(-10, 10)), rng.bernoulli(0.5),
                                  DoneReason::kSimulationEnd, "i=" + std::to_string(i)};
    const std::string step_bytes = encode(step);
    const Message step_back = decode(step_bytes);
    ASSERT_EQ(step_back, step) << encode_payload(step);
    ASSERT_EQ(encode(step_back), step_bytes);
    ASSERT_TRUE(conforms(std::get<StepResp>(step_back).observation, obs));
  }
}

TEST(RoundTrip, EveryMessageType) {
  const std::vector<Message> all = {
      InitReq{{{"seed", "7"}, {"sim_time_s", "2"}}},
      InitResp{box(0, 1, {4}, DType::kU32), discrete(4)},
      ResetReq{},
      ResetResp{make_box<std::uint32_t>({4}, {1, 0, 0, 0})},
      StepReq{make_discrete(1)},
      StepResp{make_box<std::uint32_t>({4}, {0, 1, 0, 0}), 1.0f, true, DoneReason::kGameOver, "x"},
      CloseReq{},
      CloseResp{},
      ErrorResp{"bad_state", "step before init"},
  };
  for (const auto& m : all) {
    const auto bytes = encode(m);
    EXPECT_EQ(decode(bytes), m) << type_name(m);
    EXPECT_EQ(encode(decode(bytes)), bytes);
  }
}

TEST(FuzzProperty, MutatedFramesFailCleanly) {
  RngStream rng(31337, 0);
  const std::vector<std::string> seeds = {
      encode(InitReq{{{"seed", "1"}}}),
      encode(StepReq{make_box<std::uint32_t>({5}, {1, 2, 3, 4, 5})}),
      encode(StepResp{make_box<float>({2}, {0.5f, 2.0f}), 1.0f, false, DoneReason::kNone, "info"}),
      encode(InitResp{DictSpace{{{"a", discrete(3)}, {"b", box(-1, 1, {2, 2}, DType::kF64)}}}, discrete(2)}),
  };
  int ok = 0, classified = 0;
  for (int i = 0; i < 10'000; ++i) {
    std::string bytes = seeds[rng.below(seeds.size())];
    const auto mutations = rng.uniform_int(1, 4);
    for (std::int64_t k = 0; k < mutations; ++k) {
      switch (rng.below(4)) {
        case 0:
          if (!bytes.empty()) bytes[rng.below(bytes.size())] = static_cast<char>(rng.below(256));
          break;
        case 1: bytes.resize(rng.below(bytes.size() + 1)); break;
        case 2: bytes.insert(rng.below(bytes.size() + 1), 1, static_cast<char>(rng.below(256))); break;
        default:
          if (!bytes.empty()) bytes.erase(rng.below(bytes.size()), 1);
          break;
      }
    }
    try {
      decode(bytes);
      ++ok;
    } catch (const Error&) {
      ++classified;
    }
  }
  EXPECT_EQ(ok + classified, 10'000);
  EXPECT_GT(classified, 0);
}

TEST(Encode, ErrorDetailWithInvalidUtf8StillEncodes) {
  const std::string bytes = encode(ErrorResp{"protocol_error", "unknown message type '\xF8'"});
  const auto back = std::get<ErrorResp>(decode(bytes));
  EXPECT_EQ(back.detail, "unknown message type '\xEF\xBF\xBD'");
  EXPECT_THROW(encode(StepResp{make_discrete(0), 0.0f, false, DoneReason::kNone, "\xF8"}), ValidationError);
}
