#include "civsim/profile.hpp"

#include <string>

namespace civsim::signaling {

std::string_view to_string(NetworkKind kind) {
  switch (kind) {
    case NetworkKind::pstn_analogue: return "pstn-analogue";
    case NetworkKind::cellular_cs: return "cellular-cs";
    case NetworkKind::voip_sip: return "voip-sip";
  }
  return "unknown";
}

NetworkKind network_kind_from_string(std::string_view s) {
  for (auto k : kAllNetworkKinds)
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::ConfigError, "unknown network kind: " + std::string(s));
}

dtmf::PathKind native_dtmf(NetworkKind kind) {
  switch (kind) {
    case NetworkKind::pstn_analogue: return dtmf::PathKind::analogue_inband;
    case NetworkKind::cellular_cs: return dtmf::PathKind::out_of_band;
    case NetworkKind::voip_sip: return dtmf::PathKind::digital_event;
  }
  return dtmf::PathKind::digital_event;
}

}  // namespace civsim::signaling

namespace civsim::civ {

std::string_view to_string(ProfileName name) {
  switch (name) {
    case ProfileName::sip: return "sip";
    case ProfileName::cellular: return "cellular";
    case ProfileName::landline_truecall: return "landline-truecall";
  }
  return "unknown";
}

ProfileName profile_from_string(std::string_view s) {
  for (auto p : kAllProfiles)
    if (to_string(p) == s) return p;
  throw Error(ErrorCode::ConfigError, "unknown platform profile: " + std::string(s));
}

PlatformProfile base_profile(ProfileName name) {
  PlatformProfile p;
  p.name = name;
  switch (name) {
    case ProfileName::sip:
      p.can_modify_cli = true;
      p.can_send_incall_dtmf = true;
      p.has_call_waiting = true;
      p.timing = dtmf::kSipTiming;
      p.home_network = signaling::NetworkKind::voip_sip;
      break;
    case ProfileName::cellular:
      // Android third-party API: call waiting, but DTMF only as a dial string.
      p.can_modify_cli = false;
      p.can_send_incall_dtmf = false;
      p.has_call_waiting = true;
      p.dial_string_pause_ms = kAndroidDialPauseMs;
      p.timing = dtmf::kTrueCallTiming;
      p.home_network = signaling::NetworkKind::cellular_cs;
      break;
    case ProfileName::landline_truecall:
      p.can_modify_cli = false;
      p.can_send_incall_dtmf = true;
      p.has_call_waiting = false;
      p.timing = dtmf::kTrueCallTiming;
      p.home_network = signaling::NetworkKind::pstn_analogue;
      break;
  }
  return p;
}

}  // namespace civsim::civ
