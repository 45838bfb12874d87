#include "doctest.h"

#include <deque>

#include "civsim/civ.hpp"

using namespace civsim;
using namespace civsim::civ;

namespace {

// Plays back a fixed list of draws.
struct ScriptedUrbg {
  using result_type = std::uint32_t;
  std::deque<result_type> values;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xffffffffu; }
  result_type operator()() {
    REQUIRE_FALSE(values.empty());
    const auto v = values.front();
    values.pop_front();
    return v;
  }
};

PlatformProfile random_profile(Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  PlatformProfile p;
  p.can_modify_cli = coin(rng);
  p.can_send_incall_dtmf = coin(rng);
  p.has_call_waiting = coin(rng);
  return p;
}

// What each variant needs from the two platforms, written out per variant.
bool feasible(Variant v, const PlatformProfile& a, const PlatformProfile& b) {
  switch (v) {
    case Variant::cli_dtmf:
      return b.can_modify_cli && a.can_send_incall_dtmf && a.has_call_waiting && b.has_call_waiting;
    case Variant::cli_cli:
      return b.can_modify_cli && a.can_modify_cli && a.has_call_waiting && b.has_call_waiting;
    case Variant::dtmf_dtmf_2setup:
      return a.can_send_incall_dtmf && a.has_call_waiting && b.has_call_waiting;
    case Variant::dtmf_dtmf_3setup: return true;
  }
  return false;
}

signaling::MissedCallEvent missed(std::string_view cli, std::string_view name = "") {
  signaling::MissedCallEvent ev;
  ev.displayed_cli = PhoneNumber::parse(cli);
  ev.displayed_name = std::string(name);
  return ev;
}

}  // namespace

TEST_CASE("variant for each prototype pair") {
  const auto sip = base_profile(ProfileName::sip);
  const auto cell = base_profile(ProfileName::cellular);
  const auto land = base_profile(ProfileName::landline_truecall);
  CHECK(select_variant(sip, sip) == Variant::cli_dtmf);
  CHECK(select_variant(sip, cell) == Variant::dtmf_dtmf_2setup);
  CHECK(select_variant(sip, land) == Variant::dtmf_dtmf_3setup);
  CHECK(select_variant(cell, sip) == Variant::dtmf_dtmf_3setup);
  CHECK(select_variant(cell, cell) == Variant::dtmf_dtmf_3setup);
  CHECK(select_variant(land, land) == Variant::dtmf_dtmf_3setup);
  CHECK(select_variant(land, sip) == Variant::dtmf_dtmf_3setup);

  CHECK(callee_holds_initial(Variant::dtmf_dtmf_3setup, sip, cell));
  CHECK_FALSE(callee_holds_initial(Variant::dtmf_dtmf_3setup, sip, land));
  CHECK_FALSE(callee_holds_initial(Variant::dtmf_dtmf_3setup, land, sip));
  CHECK(call_setups(Variant::cli_dtmf) == 2);
  CHECK(call_setups(Variant::dtmf_dtmf_2setup) == 2);
  CHECK(call_setups(Variant::cli_cli) == 3);
  CHECK(call_setups(Variant::dtmf_dtmf_3setup) == 3);

  for (auto v : {Variant::cli_dtmf, Variant::cli_cli, Variant::dtmf_dtmf_2setup, Variant::dtmf_dtmf_3setup})
    CHECK(variant_from_string(to_string(v)) == v);
  CHECK_THROWS_AS(variant_from_string("cli-sms"), Error);
}

TEST_CASE("selection picks the first feasible variant in preference order") {
  Rng rng(42);
  const std::array order{Variant::cli_dtmf, Variant::cli_cli, Variant::dtmf_dtmf_2setup, Variant::dtmf_dtmf_3setup};
  for (int trial = 0; trial < 2000; ++trial) {
    const auto a = random_profile(rng);
    const auto b = random_profile(rng);
    Variant expected = Variant::dtmf_dtmf_3setup;
    for (auto v : order)
      if (feasible(v, a, b)) {
        expected = v;
        break;
      }
    CHECK(select_variant(a, b) == expected);
  }
}

TEST_CASE("PBX index pool") {
  PbxState pbx;
  ScriptedUrbg rng{{5, 1005, 2005, 7, 999}};
  CHECK(pbx.register_outbound(11, rng) == "005");
  // 1005 and 2005 collide with 005 and are redrawn.
  CHECK(pbx.register_outbound(12, rng) == "007");
  CHECK(rng.values.size() == 1);
  CHECK(pbx.register_outbound(13, rng) == "999");
  CHECK(pbx.extension_for("007") == 12);
  CHECK(pbx.active() == 3);
  pbx.release("005");
  CHECK(pbx.active() == 2);
  try {
    pbx.extension_for("005");
    FAIL("released index still resolves");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownIndex);
  }
  rng.values = {5};
  CHECK(pbx.register_outbound(14, rng) == "005");
}

TEST_CASE("PBX pool exhaustion") {
  PbxState pbx;
  Rng rng(3);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < PbxState::kCapacity; ++i) seen.insert(pbx.register_outbound(i, rng));
  CHECK(seen.size() == 1000);
  try {
    pbx.register_outbound(0, rng);
    FAIL("not exhausted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Exhausted);
  }
}

TEST_CASE("PBX caller names") {
  CHECK(pbx_caller_name("ACME", "042") == "ACME#042*");
  const auto long_name = pbx_caller_name("Very Long Organisation", "001");
  CHECK(long_name.size() == kMaxNameLength);
  CHECK(long_name.back() == kCivFlag);
  CHECK(pbx_index_of(long_name) == "001");
  CHECK(pbx_index_of("ACME#042*") == "042");
  CHECK_FALSE(pbx_index_of("ACME*").has_value());
  CHECK_FALSE(pbx_index_of("ACME#4*").has_value());
  CHECK_FALSE(pbx_index_of("ACME#ab1").has_value());
  CHECK(PbxState::format(7) == "007");
}

TEST_CASE("recognising verification calls") {
  RecognitionContext pending{4, true, false};
  RecognitionContext idle{4, false, false};

  auto r = recognize_verification_call(missed("0391"), pending);
  CHECK(r.kind == MissedCallClass::challenge);
  CHECK(r.challenge->digits() == "0391");
  CHECK(recognize_verification_call(missed("039"), pending).kind == MissedCallClass::ordinary);
  CHECK(recognize_verification_call(missed("447700900100"), pending).kind == MissedCallClass::ordinary);
  CHECK(recognize_verification_call(missed("0391"), idle).kind == MissedCallClass::unsolicited);
  CHECK(recognize_verification_call(missed("447700900100"), idle).kind == MissedCallClass::ordinary);

  // Longer challenges only by the name marker.
  RecognitionContext marked{6, true, true};
  r = recognize_verification_call(missed("123456", "CIV"), marked);
  CHECK(r.kind == MissedCallClass::challenge);
  CHECK(r.challenge->digits() == "123456");
  CHECK(recognize_verification_call(missed("123456", "Bob"), marked).kind == MissedCallClass::ordinary);
  RecognitionContext unmarked{6, true, false};
  CHECK(recognize_verification_call(missed("123456", "CIV"), unmarked).kind == MissedCallClass::ordinary);
  CHECK(recognize_verification_call(missed("123456", "CIV"), {6, false, true}).kind ==
        MissedCallClass::unsolicited);
}

TEST_CASE("breakdown always sums to the added latency") {
  Rng rng(8);
  std::uniform_int_distribution<std::int64_t> step(0, 5'000'000);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 2000; ++trial) {
    VerificationSession v;
    v.started = SimTime(step(rng));
    v.response_call = coin(rng);
    SimTime t = v.started;
    auto maybe = [&](std::optional<SimTime>& slot) {
      t += SimDuration(step(rng));
      if (coin(rng)) slot = t;
    };
    maybe(v.challenge_start);
    maybe(v.challenge_received);
    maybe(v.response_start);
    t += SimDuration(step(rng));
    if (coin(rng) || trial % 7 == 0) v.decided = t;
    const auto b = v.breakdown();
    CHECK(b.total() == v.added_latency());
    CHECK(b.verification_call_setup.count() >= 0);
    CHECK(b.challenge_transmit.count() >= 0);
    CHECK(b.response_call_setup.count() >= 0);
    CHECK(b.response_transmit.count() >= 0);
    if (!v.response_call) CHECK(b.response_call_setup.count() == 0);
  }
  VerificationSession v;
  v.set_outcome(VerificationStatus::Verified);
  CHECK_THROWS_AS(v.set_outcome(VerificationStatus::NotVerified), Error);
}
