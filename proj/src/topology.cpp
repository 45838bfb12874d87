#include "civsim/topology.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace civsim::signaling {

using jsonio::json;

namespace {

dtmf::NoiseModel parse_noise(const json& j, const std::string& path) {
  const auto kind = jsonio::require_string(j, "kind", path);
  if (kind == "none") return dtmf::NoiseModel::none();
  if (kind == "additive-gaussian")
    return dtmf::NoiseModel::gaussian(jsonio::require_number(j, "snr_db", path));
  jsonio::fail(jsonio::join(path, "kind"), "expected \"none\" or \"additive-gaussian\"");
}

json noise_to_json(const dtmf::NoiseModel& n) {
  if (n.kind == dtmf::NoiseModel::Kind::none) return {{"kind", "none"}};
  return {{"kind", "additive-gaussian"}, {"snr_db", n.snr_db}};
}

template <class T>
T wrap(const std::string& path, auto&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    jsonio::fail(path, e.what());
  }
}

bool optional_bool(const json& obj, const char* key, bool fallback, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_boolean()) jsonio::fail(jsonio::join(path, key), "expected a boolean");
  return it->get<bool>();
}

}  // namespace

Topology Topology::from_json(const json& doc) {
  jsonio::require_schema(doc, kTopologySchema, "topology");
  Topology t;

  const auto& networks = jsonio::require(doc, "networks", "");
  if (!networks.is_array()) jsonio::fail("networks", "expected an array");
  for (std::size_t i = 0; i < networks.size(); ++i) {
    const std::string path = "networks[" + std::to_string(i) + "]";
    NetworkDef n;
    n.id = jsonio::require_string(networks[i], "id", path);
    const auto kind = jsonio::require_string(networks[i], "kind", path);
    n.kind = wrap<NetworkKind>(path + ".kind", [&] { return network_kind_from_string(kind); });
    if (networks[i].contains("noise")) n.noise = parse_noise(networks[i]["noise"], path + ".noise");
    t.networks.push_back(std::move(n));
  }

  if (doc.contains("links")) {
    const auto& links = doc["links"];
    if (!links.is_array()) jsonio::fail("links", "expected an array");
    for (std::size_t i = 0; i < links.size(); ++i) {
      const std::string path = "links[" + std::to_string(i) + "]";
      t.links.push_back({jsonio::require_string(links[i], "a", path), jsonio::require_string(links[i], "b", path)});
    }
  }

  const auto& endpoints = jsonio::require(doc, "endpoints", "");
  if (!endpoints.is_array()) jsonio::fail("endpoints", "expected an array");
  for (std::size_t i = 0; i < endpoints.size(); ++i) {
    const std::string path = "endpoints[" + std::to_string(i) + "]";
    const auto& e = endpoints[i];
    EndpointDef d;
    d.id = jsonio::require_string(e, "id", path);
    const auto number = jsonio::require_string(e, "number", path);
    d.number = wrap<PhoneNumber>(path + ".number", [&] { return PhoneNumber::parse(number); });
    d.name = e.contains("name") ? jsonio::require_string(e, "name", path) : std::string{};
    if (d.name.size() >= kMaxNameLength) jsonio::fail(path + ".name", "display name must leave room for the CIV flag");
    const auto profile = jsonio::require_string(e, "profile", path);
    d.profile = wrap<civ::ProfileName>(path + ".profile", [&] { return civ::profile_from_string(profile); });
    d.network = jsonio::require_string(e, "network", path);
    if (e.contains("role")) {
      const auto role = jsonio::require_string(e, "role", path);
      if (role == "phone") d.role = EndpointRole::phone;
      else if (role == "pbx") d.role = EndpointRole::pbx;
      else jsonio::fail(path + ".role", "expected \"phone\" or \"pbx\"");
    }
    d.civ_enabled = optional_bool(e, "civ", true, path);
    d.verification_marker = optional_bool(e, "verification_marker", false, path);
    d.cnam_dip = optional_bool(e, "cnam_dip", false, path);
    if (e.contains("challenge_length")) {
      const auto& n = e["challenge_length"];
      if (!n.is_number_integer() || n.get<long long>() < 1 || n.get<long long>() > 15)
        jsonio::fail(path + ".challenge_length", "expected an integer in 1..15");
      d.challenge_length = n.get<std::size_t>();
    }
    if (e.contains("forward_to")) d.forward_to = jsonio::require_string(e, "forward_to", path);
    if (e.contains("pbx")) d.pbx = jsonio::require_string(e, "pbx", path);
    if (e.contains("civ_contacts")) {
      const auto& contacts = e["civ_contacts"];
      if (!contacts.is_array()) jsonio::fail(path + ".civ_contacts", "expected an array");
      for (std::size_t k = 0; k < contacts.size(); ++k) {
        const std::string cpath = path + ".civ_contacts[" + std::to_string(k) + "]";
        if (!contacts[k].is_string()) jsonio::fail(cpath, "expected a string");
        const auto digits = contacts[k].get<std::string>();
        d.civ_contacts.push_back(wrap<PhoneNumber>(cpath, [&] { return PhoneNumber::parse(digits); }));
      }
    }
    t.endpoints.push_back(std::move(d));
  }

  if (doc.contains("cnam")) {
    const auto& cnam = doc["cnam"];
    if (!cnam.is_array()) jsonio::fail("cnam", "expected an array");
    for (std::size_t i = 0; i < cnam.size(); ++i) {
      const std::string path = "cnam[" + std::to_string(i) + "]";
      CnamEntry c;
      const auto number = jsonio::require_string(cnam[i], "number", path);
      c.number = wrap<PhoneNumber>(path + ".number", [&] { return PhoneNumber::parse(number); });
      c.name = jsonio::require_string(cnam[i], "name", path);
      c.civ_flag = optional_bool(cnam[i], "civ_flag", false, path);
      t.cnam.push_back(std::move(c));
    }
  }

  t.validate();
  return t;
}

Topology Topology::load(const std::filesystem::path& path) {
  try {
    return from_json(jsonio::load_file(path));
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

json Topology::to_json() const {
  json doc;
  doc["schema"] = kTopologySchema;
  json nets = json::array();
  for (const auto& n : networks)
    nets.push_back({{"id", n.id}, {"kind", to_string(n.kind)}, {"noise", noise_to_json(n.noise)}});
  doc["networks"] = nets;
  json ls = json::array();
  for (const auto& l : links) ls.push_back({{"a", l.a}, {"b", l.b}});
  doc["links"] = ls;
  json eps = json::array();
  for (const auto& e : endpoints) {
    json j;
    j["id"] = e.id;
    j["number"] = e.number.digits();
    j["name"] = e.name;
    j["profile"] = civ::to_string(e.profile);
    j["network"] = e.network;
    j["role"] = e.role == EndpointRole::pbx ? "pbx" : "phone";
    j["civ"] = e.civ_enabled;
    j["challenge_length"] = e.challenge_length;
    j["verification_marker"] = e.verification_marker;
    j["cnam_dip"] = e.cnam_dip;
    if (e.forward_to) j["forward_to"] = *e.forward_to;
    if (e.pbx) j["pbx"] = *e.pbx;
    json contacts = json::array();
    for (const auto& c : e.civ_contacts) contacts.push_back(c.digits());
    j["civ_contacts"] = contacts;
    eps.push_back(j);
  }
  doc["endpoints"] = eps;
  json cn = json::array();
  for (const auto& c : cnam) cn.push_back({{"number", c.number.digits()}, {"name", c.name}, {"civ_flag", c.civ_flag}});
  doc["cnam"] = cn;
  return doc;
}

void Topology::validate() const {
  std::set<std::string> ids;
  for (std::size_t i = 0; i < networks.size(); ++i)
    if (!ids.insert(networks[i].id).second)
      jsonio::fail("networks[" + std::to_string(i) + "].id", "duplicate id '" + networks[i].id + "'");
  for (std::size_t i = 0; i < links.size(); ++i) {
    const std::string path = "links[" + std::to_string(i) + "]";
    if (!find_network(links[i].a)) jsonio::fail(path + ".a", "unknown network '" + links[i].a + "'");
    if (!find_network(links[i].b)) jsonio::fail(path + ".b", "unknown network '" + links[i].b + "'");
  }
  std::set<std::string> endpoint_ids;
  std::set<std::string> numbers;
  for (std::size_t i = 0; i < endpoints.size(); ++i) {
    const auto& e = endpoints[i];
    const std::string path = "endpoints[" + std::to_string(i) + "]";
    if (!endpoint_ids.insert(e.id).second) jsonio::fail(path + ".id", "duplicate id '" + e.id + "'");
    if (!find_network(e.network)) jsonio::fail(path + ".network", "unknown network '" + e.network + "'");
    if (!e.pbx && !numbers.insert(e.number.digits()).second)
      jsonio::fail(path + ".number", "number " + e.number.digits() + " is owned twice");
  }
  for (std::size_t i = 0; i < endpoints.size(); ++i) {
    const auto& e = endpoints[i];
    const std::string path = "endpoints[" + std::to_string(i) + "]";
    if (e.forward_to && !find_endpoint(*e.forward_to))
      jsonio::fail(path + ".forward_to", "unknown endpoint '" + *e.forward_to + "'");
    if (e.pbx) {
      const auto p = find_endpoint(*e.pbx);
      if (!p || endpoints[*p].role != EndpointRole::pbx)
        jsonio::fail(path + ".pbx", "'" + *e.pbx + "' is not a pbx endpoint");
    }
  }
  std::set<std::string> cnam_numbers;
  for (std::size_t i = 0; i < cnam.size(); ++i)
    if (!cnam_numbers.insert(cnam[i].number.digits()).second)
      jsonio::fail("cnam[" + std::to_string(i) + "].number", "duplicate CNAM record");
}

std::optional<std::size_t> Topology::find_endpoint(std::string_view id) const {
  for (std::size_t i = 0; i < endpoints.size(); ++i)
    if (endpoints[i].id == id) return i;
  return std::nullopt;
}

std::size_t Topology::endpoint_index(std::string_view id) const {
  if (auto i = find_endpoint(id)) return *i;
  throw Error(ErrorCode::ConfigError, "unknown endpoint '" + std::string(id) + "'");
}

std::optional<std::size_t> Topology::find_network(std::string_view id) const {
  for (std::size_t i = 0; i < networks.size(); ++i)
    if (networks[i].id == id) return i;
  return std::nullopt;
}

std::optional<std::size_t> Topology::owner_of(const PhoneNumber& number) const {
  for (std::size_t i = 0; i < endpoints.size(); ++i)
    if (!endpoints[i].pbx && endpoints[i].number == number) return i;
  return std::nullopt;
}

std::vector<std::size_t> Topology::route(std::size_t from_network, std::size_t to_network) const {
  if (from_network == to_network) return {from_network};
  std::vector<std::optional<std::size_t>> parent(networks.size());
  std::vector<bool> seen(networks.size(), false);
  std::deque<std::size_t> frontier{from_network};
  seen[from_network] = true;
  while (!frontier.empty()) {
    const auto at = frontier.front();
    frontier.pop_front();
    for (const auto& l : links) {
      const auto a = *find_network(l.a);
      const auto b = *find_network(l.b);
      std::optional<std::size_t> next;
      if (a == at) next = b;
      else if (b == at) next = a;
      if (!next || seen[*next]) continue;
      seen[*next] = true;
      parent[*next] = at;
      if (*next == to_network) {
        std::vector<std::size_t> path{to_network};
        while (path.back() != from_network) path.push_back(*parent[path.back()]);
        std::reverse(path.begin(), path.end());
        return path;
      }
      frontier.push_back(*next);
    }
  }
  return {};
}

Topology make_pair_topology(civ::ProfileName caller, civ::ProfileName callee) {
  Topology t;
  t.networks = {{"voip", NetworkKind::voip_sip, {}},
                {"cellular", NetworkKind::cellular_cs, {}},
                {"pstn", NetworkKind::pstn_analogue, {}}};
  t.links = {{"voip", "cellular"}, {"voip", "pstn"}, {"cellular", "pstn"}};
  const auto home = [](civ::ProfileName p) -> std::string {
    switch (civ::base_profile(p).home_network) {
      case NetworkKind::voip_sip: return "voip";
      case NetworkKind::cellular_cs: return "cellular";
      case NetworkKind::pstn_analogue: return "pstn";
    }
    return "voip";
  };
  EndpointDef alice;
  alice.id = "alice";
  alice.number = PhoneNumber::parse("447700900001");
  alice.name = "Alice";
  alice.profile = caller;
  alice.network = home(caller);
  EndpointDef bob;
  bob.id = "bob";
  bob.number = PhoneNumber::parse("447700900002");
  bob.name = "Bob";
  bob.profile = callee;
  bob.network = home(callee);
  t.endpoints = {alice, bob};
  return t;
}

}  // namespace civsim::signaling
