#include <doctest.h>

#include "cabinsim/protocol.hpp"
#include "random_frames.hpp"

using namespace cabinsim;
using namespace cabinsim::protocol;
using cabinsim::testing::FrameGenerator;

TEST_SUITE("protocol") {
  TEST_CASE("minimal heartbeat") {
    const auto r = decode(R"({"type":"heartbeat","seq":1,"t_mono":0.0,"payload":{}})");
    REQUIRE(r.ok());
    CHECK(std::holds_alternative<Heartbeat>(r.envelope->payload));
    CHECK(r.envelope->seq == 1);

    const std::string line = encode(*r.envelope);
    CHECK(line.back() == '\n');
    CHECK(line.find('\n') == line.size() - 1);
    CHECK(decode(line).envelope == r.envelope);
  }

  TEST_CASE("control input keeps exact decimal values") {
    const Envelope e{7, 1.5, ControlInputMsg{0.1234567891234, 1.0 / 3.0, 2.0 / 7.0, std::nullopt}};
    const std::string line = encode(e);
    CHECK(line.find("0.1234567891234") != std::string::npos);
    CHECK(line.find("0.3333333333333333") != std::string::npos);
    CHECK(decode(line).envelope == e);
  }

  TEST_CASE("decode errors") {
    CHECK(decode(R"({"type":"heartbeat","seq":1,"t_mono":0.0,"payl)").error == DecodeError::MalformedFrame);
    CHECK(decode("").error == DecodeError::MalformedFrame);
    CHECK(decode(R"({"type":"teleport","seq":1,"t_mono":0,"payload":{}})").error == DecodeError::UnknownType);
    CHECK(decode(R"({"type":"heartbeat","seq":-1,"t_mono":0,"payload":{}})").error == DecodeError::MalformedFrame);
    CHECK(decode(R"({"type":"control_input","seq":1,"t_mono":0,"payload":{"throttle":"x"}})").error ==
          DecodeError::MalformedFrame);
  }

  TEST_CASE("unknown payload fields are ignored") {
    const auto r = decode(
        R"({"type":"control_input","seq":1,"t_mono":0,"extra":1,"payload":{"steering_norm":0.5,"throttle":0.2,"brake":0,"future":true}})");
    REQUIRE(r.ok());
    const auto& c = std::get<ControlInputMsg>(r.envelope->payload);
    CHECK(c.steering_norm == 0.5);
    CHECK(c.throttle == 0.2);
  }

  TEST_CASE("sequence numbers must increase per connection") {
    FrameDecoder d;
    CHECK(d.decode(R"({"type":"heartbeat","seq":7,"t_mono":0,"payload":{}})").ok());
    CHECK(d.decode(R"({"type":"heartbeat","seq":5,"t_mono":0,"payload":{}})").error == DecodeError::NonMonotonicSeq);
    CHECK(d.decode(R"({"type":"heartbeat","seq":7,"t_mono":0,"payload":{}})").error == DecodeError::NonMonotonicSeq);
    CHECK(d.decode(R"({"type":"heartbeat","seq":8,"t_mono":0,"payload":{}})").ok());
    CHECK(*d.last_seq() == 8);
  }

  TEST_CASE("registered types") {
    const auto& names = registered_types();
    for (const char* n : {"hello", "heartbeat", "control_input", "touch_event", "gaze_sample", "force_feedback",
                          "ui_state", "explanation", "request_explanation", "scenario_event", "session_end"}) {
      CHECK(std::find(names.begin(), names.end(), n) != names.end());
    }
  }

  TEST_CASE("10^5 random envelopes round trip") {
    FrameGenerator gen(2024);
    std::size_t mismatches = 0;
    for (std::uint64_t i = 0; i < 100000; ++i) {
      const Envelope e = gen.envelope(i);
      const std::string line = encode(e);
      if (line.find('\n') != line.size() - 1) ++mismatches;
      const auto r = decode(line);
      if (!r.ok() || *r.envelope != e) ++mismatches;
    }
    CHECK(mismatches == 0);
  }

  TEST_CASE("junk never decodes into a frame") {
    FrameGenerator gen(77);
    for (int i = 0; i < 20000; ++i) {
      const std::string line = encode(gen.envelope(1));
      const auto r = decode(gen.junk(line));
      if (r.ok()) {
        // A truncation can only succeed if it cut the trailing newline.
        CHECK(encode(*r.envelope) == line);
      }
    }
  }

  TEST_CASE("ui_state mirrors the world") {
    WorldState w;
    w.tick = 30;
    w.time = 0.5;
    w.ego.speed = 10.0;
    w.actors.push_back(make_actor(1, ActorKind::Car, {{10, 0}, {20, 0}}, 1.0));
    w.detected = detect_objects(w, 50.0);
    const UiState s = make_ui_state(w, {0.2, 0.3, 0.0, 0.0, std::nullopt}, std::nullopt, MusicState{});
    CHECK(s.speed == 10.0);
    CHECK(s.tick == 30);
    CHECK(s.contours == w.detected);
    CHECK(s.actors.size() == 1);
    CHECK(s.steering_norm == 0.2);
  }
}
