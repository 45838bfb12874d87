#pragma once

// Network kinds and platform capability profiles. Both the signaling layer
// and the protocol layer gate behaviour on these.

#include <array>
#include <string_view>

#include "civsim/dtmf.hpp"

namespace civsim::signaling {

enum class NetworkKind { pstn_analogue, cellular_cs, voip_sip };

inline constexpr std::array<NetworkKind, 3> kAllNetworkKinds{
    NetworkKind::pstn_analogue, NetworkKind::cellular_cs, NetworkKind::voip_sip};

std::string_view to_string(NetworkKind kind);
NetworkKind network_kind_from_string(std::string_view s);

inline constexpr std::size_t index_of(NetworkKind kind) { return static_cast<std::size_t>(kind); }

// How DTMF travels natively on a network of this kind.
dtmf::PathKind native_dtmf(NetworkKind kind);

}  // namespace civsim::signaling

namespace civsim::civ {

enum class ProfileName { sip, cellular, landline_truecall };

inline constexpr std::array<ProfileName, 3> kAllProfiles{
    ProfileName::sip, ProfileName::cellular, ProfileName::landline_truecall};

std::string_view to_string(ProfileName name);
ProfileName profile_from_string(std::string_view s);

inline constexpr std::size_t index_of(ProfileName name) { return static_cast<std::size_t>(name); }

struct PlatformProfile {
  ProfileName name = ProfileName::sip;
  bool can_modify_cli = false;
  bool can_send_incall_dtmf = false;
  bool has_call_waiting = false;
  double dtmf_recognition_delay_ms = 0.0;
  double dial_string_pause_ms = 0.0;
  dtmf::TimingConfig timing{};
  signaling::NetworkKind home_network = signaling::NetworkKind::voip_sip;
};

// Capability vector of each prototype platform. The recognition delay is a
// calibrated quantity and is filled in from the latency calibration.
PlatformProfile base_profile(ProfileName name);

inline constexpr double kAndroidDialPauseMs = 2000.0;

}  // namespace civsim::civ
