#pragma once

// Declarative description of networks, gateways, endpoints and CNAM
// records. See docs/formats.md for the file schema.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "civsim/json_util.hpp"
#include "civsim/profile.hpp"

namespace civsim::signaling {

inline constexpr std::string_view kTopologySchema = "civsim.topology/1";

struct NetworkDef {
  std::string id;
  NetworkKind kind = NetworkKind::voip_sip;
  dtmf::NoiseModel noise{};
};

// A gateway sits on every link joining networks of different kinds.
struct LinkDef {
  std::string a;
  std::string b;
};

enum class EndpointRole { phone, pbx };

struct EndpointDef {
  std::string id;
  PhoneNumber number;
  std::string name;  // display name without the CIV flag
  civ::ProfileName profile = civ::ProfileName::sip;
  std::string network;
  EndpointRole role = EndpointRole::phone;
  bool civ_enabled = true;
  std::size_t challenge_length = kDefaultChallengeLength;
  // Also accept verification calls marked in the caller name, not only by
  // number format.
  bool verification_marker = false;
  bool cnam_dip = false;
  std::optional<std::string> forward_to;
  std::optional<std::string> pbx;  // this endpoint is an extension behind that PBX
  std::vector<PhoneNumber> civ_contacts;
};

struct CnamEntry {
  PhoneNumber number;
  std::string name;
  bool civ_flag = false;
};

class Topology {
 public:
  std::vector<NetworkDef> networks;
  std::vector<LinkDef> links;
  std::vector<EndpointDef> endpoints;
  std::vector<CnamEntry> cnam;

  static Topology from_json(const jsonio::json& doc);
  static Topology load(const std::filesystem::path& path);
  jsonio::json to_json() const;

  // Checks referential integrity; throws ConfigError naming the field.
  void validate() const;

  std::optional<std::size_t> find_endpoint(std::string_view id) const;
  std::size_t endpoint_index(std::string_view id) const;  // throws ConfigError
  std::optional<std::size_t> find_network(std::string_view id) const;
  // Endpoint whose own number this is.
  std::optional<std::size_t> owner_of(const PhoneNumber& number) const;

  // Breadth-first network path, deterministic in link order. Empty when the
  // networks are disconnected.
  std::vector<std::size_t> route(std::size_t from_network, std::size_t to_network) const;
};

// Three networks (VoIP, cellular, PSTN) joined by gateways with one caller
// and one callee of the given platforms.
Topology make_pair_topology(civ::ProfileName caller, civ::ProfileName callee);

}  // namespace civsim::signaling
