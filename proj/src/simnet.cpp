#include "civsim/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace civsim::simnet {

using jsonio::json;
using signaling::CallDetailRecord;
using signaling::CallOptions;
using signaling::CallPurpose;
using signaling::CallSession;
using signaling::CallState;
using signaling::Topology;

std::string_view to_string(AdversaryKind k) {
  switch (k) {
    case AdversaryKind::spoof_and_guess: return "spoof-and-guess";
    case AdversaryKind::downgrade: return "downgrade";
    case AdversaryKind::reflected_dos: return "reflected-dos";
  }
  return "unknown";
}

AdversaryKind adversary_kind_from_string(std::string_view s) {
  for (auto k : {AdversaryKind::spoof_and_guess, AdversaryKind::downgrade, AdversaryKind::reflected_dos})
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::ConfigError, "unknown adversary strategy: " + std::string(s));
}

namespace {

std::size_t require_count(const json& obj, const char* key, const std::string& path, std::size_t lo,
                          std::size_t hi) {
  const auto& v = jsonio::require(obj, key, path);
  if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(lo) ||
      v.get<long long>() > static_cast<long long>(hi))
    jsonio::fail(jsonio::join(path, key),
                 "expected an integer in " + std::to_string(lo) + ".." + std::to_string(hi));
  return v.get<std::size_t>();
}

bool optional_bool(const json& obj, const char* key, bool fallback, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_boolean()) jsonio::fail(jsonio::join(path, key), "expected a boolean");
  return it->get<bool>();
}

}  // namespace

json AdversaryStrategy::to_json() const {
  json j;
  j["kind"] = to_string(kind);
  j["attacker"] = attacker;
  j["victim"] = victim;
  j["targets"] = targets;
  j["n_guess_digits"] = n_guess_digits;
  j["guess_delay_ms"] = guess_delay_ms;
  j["rate_per_s"] = rate_per_s;
  j["linger_ms"] = linger_ms;
  return j;
}

AdversaryStrategy AdversaryStrategy::from_json(const json& j, const std::string& path) {
  if (!j.is_object()) jsonio::fail(path, "expected an object");
  AdversaryStrategy s;
  const auto kind = jsonio::require_string(j, "kind", path);
  try {
    s.kind = adversary_kind_from_string(kind);
  } catch (const Error& e) {
    jsonio::fail(jsonio::join(path, "kind"), e.what());
  }
  if (j.contains("attacker")) s.attacker = jsonio::require_string(j, "attacker", path);
  if (j.contains("victim")) s.victim = jsonio::require_string(j, "victim", path);
  if (j.contains("targets")) {
    const auto& t = j["targets"];
    if (!t.is_array() || t.empty()) jsonio::fail(jsonio::join(path, "targets"), "expected a non-empty array");
    s.targets.clear();
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!t[i].is_string())
        jsonio::fail(jsonio::join(path, "targets") + "[" + std::to_string(i) + "]", "expected a string");
      s.targets.push_back(t[i].get<std::string>());
    }
  }
  if (j.contains("n_guess_digits")) s.n_guess_digits = require_count(j, "n_guess_digits", path, 1, kMaxNumberDigits);
  if (j.contains("guess_delay_ms")) s.guess_delay_ms = jsonio::require_nonnegative(j, "guess_delay_ms", path);
  if (j.contains("rate_per_s")) {
    s.rate_per_s = jsonio::require_nonnegative(j, "rate_per_s", path);
    if (s.rate_per_s <= 0.0) jsonio::fail(jsonio::join(path, "rate_per_s"), "must be positive");
  }
  if (j.contains("linger_ms")) s.linger_ms = jsonio::require_nonnegative(j, "linger_ms", path);
  return s;
}

Scenario Scenario::from_json(const json& doc, const std::filesystem::path& base_dir) {
  jsonio::require_schema(doc, kScenarioSchema, "scenario");
  Scenario s;
  if (doc.contains("name")) s.name = jsonio::require_string(doc, "name", "");
  if (doc.contains("topology")) {
    std::filesystem::path p = jsonio::require_string(doc, "topology", "");
    s.topology_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }
  if (doc.contains("pair")) {
    const auto& p = doc["pair"];
    if (!p.is_object()) jsonio::fail("pair", "expected an object");
    auto profile = [&](const char* key) {
      const auto name = jsonio::require_string(p, key, "pair");
      try {
        return civ::profile_from_string(name);
      } catch (const Error& e) {
        jsonio::fail(jsonio::join("pair", key), e.what());
      }
    };
    const auto a = profile("caller");
    const auto b = profile("callee");
    s.pair = std::make_pair(a, b);
  }
  if (s.topology_path.has_value() == s.pair.has_value())
    jsonio::fail("topology", "give exactly one of 'topology' and 'pair'");
  if (doc.contains("caller")) s.caller = jsonio::require_string(doc, "caller", "");
  if (doc.contains("callee")) s.callee = jsonio::require_string(doc, "callee", "");
  if (doc.contains("present_number")) {
    const auto digits = jsonio::require_string(doc, "present_number", "");
    try {
      s.present_number = PhoneNumber::parse(digits);
    } catch (const Error& e) {
      jsonio::fail("present_number", e.what());
    }
  }
  if (doc.contains("adversary")) s.adversary = AdversaryStrategy::from_json(doc["adversary"], "adversary");
  if (doc.contains("variant")) {
    const auto name = jsonio::require_string(doc, "variant", "");
    try {
      s.variant = civ::variant_from_string(name);
    } catch (const Error& e) {
      jsonio::fail("variant", e.what());
    }
  }
  if (doc.contains("challenge_length")) s.challenge_length = require_count(doc, "challenge_length", "", 1, kMaxNumberDigits);
  if (doc.contains("repeat")) s.repeat = require_count(doc, "repeat", "", 1, 1000000);
  if (doc.contains("seed")) {
    const auto& v = doc["seed"];
    if (!v.is_number_unsigned()) jsonio::fail("seed", "expected a non-negative integer");
    s.seed = v.get<std::uint64_t>();
  }
  if (doc.contains("faults")) {
    const auto& f = doc["faults"];
    if (!f.is_object()) jsonio::fail("faults", "expected an object");
    s.faults.drop_challenge = optional_bool(f, "drop_challenge", false, "faults");
    s.faults.drop_response = optional_bool(f, "drop_response", false, "faults");
  }
  s.trace = optional_bool(doc, "trace", true, "");
  return s;
}

Scenario Scenario::load(const std::filesystem::path& path) {
  try {
    return from_json(jsonio::load_file(path), path.parent_path());
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

json Scenario::to_json() const {
  json doc;
  doc["schema"] = kScenarioSchema;
  doc["name"] = name;
  if (topology_path) doc["topology"] = topology_path->string();
  if (pair) doc["pair"] = {{"caller", civ::to_string(pair->first)}, {"callee", civ::to_string(pair->second)}};
  doc["caller"] = caller;
  doc["callee"] = callee;
  if (present_number) doc["present_number"] = present_number->digits();
  if (adversary) doc["adversary"] = adversary->to_json();
  if (variant) doc["variant"] = civ::to_string(*variant);
  if (challenge_length) doc["challenge_length"] = *challenge_length;
  doc["repeat"] = repeat;
  doc["seed"] = seed;
  doc["faults"] = {{"drop_challenge", faults.drop_challenge}, {"drop_response", faults.drop_response}};
  doc["trace"] = trace;
  return doc;
}

Topology Scenario::resolve_topology() const {
  if (topology_path) return Topology::load(*topology_path);
  return signaling::make_pair_topology(pair->first, pair->second);
}

void Scenario::validate(const Topology& topology) const {
  auto check = [&](const std::string& id, const std::string& field) {
    if (!topology.find_endpoint(id)) jsonio::fail(field, "unknown endpoint '" + id + "'");
  };
  if (adversary) {
    check(adversary->attacker, "adversary.attacker");
    check(adversary->victim, "adversary.victim");
    for (std::size_t i = 0; i < adversary->targets.size(); ++i)
      check(adversary->targets[i], "adversary.targets[" + std::to_string(i) + "]");
  } else {
    check(caller, "caller");
    check(callee, "callee");
  }
}

Simulation::Simulation(const Topology& topology, const LatencyCalibration& calibration, std::uint64_t seed,
                       const SimOptions& options)
    : topology_(topology),
      calibration_(calibration),
      rng_(seed),
      trace_(options.trace),
      net_(topology, calibration, queue_, trace_, rng_) {
  net_.set_fault_plan(options.faults);
  const auto n = topology.endpoints.size();
  agents_.resize(n);
  phones_.assign(n, nullptr);
  std::vector<civ::PbxState*> pbx_by_endpoint(n, nullptr);
  for (std::size_t i = 0; i < n; ++i) {
    if (topology.endpoints[i].role != signaling::EndpointRole::pbx) continue;
    pbx_states_.push_back(std::make_unique<civ::PbxState>());
    pbx_by_endpoint[i] = pbx_states_.back().get();
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = topology.endpoints[i];
    if (options.unmanaged.contains(e.id)) continue;
    if (e.role == signaling::EndpointRole::pbx) {
      agents_[i] = std::make_unique<civ::PbxAgent>(i, net_, *pbx_by_endpoint[i]);
    } else {
      civ::PhoneConfig cfg;
      cfg.id = i;
      cfg.profile = calibration.profile(e.profile);
      cfg.own_line = CallerLine{e.number, e.name, false};
      cfg.civ_enabled = e.civ_enabled;
      cfg.challenge_length = options.challenge_length.value_or(e.challenge_length);
      // Challenges longer than a short number can only be recognised by the
      // name marker.
      cfg.verification_marker = e.verification_marker || cfg.challenge_length > kMaxShortNumberDigits;
      cfg.civ_contacts = e.civ_contacts;
      cfg.directory = [this](const PhoneNumber& number) { return directory(number); };
      cfg.variant_override = options.variant;
      if (e.pbx) {
        const auto p = topology.endpoint_index(*e.pbx);
        cfg.pbx = pbx_by_endpoint[p];
        cfg.org_name = topology.endpoints[p].name;
        cfg.org_number = topology.endpoints[p].number;
      }
      auto phone = std::make_unique<civ::Phone>(std::move(cfg), net_, log_, rng_);
      phones_[i] = phone.get();
      agents_[i] = std::move(phone);
    }
    net_.attach(i, agents_[i].get());
  }
}

civ::Phone& Simulation::phone(std::string_view id) {
  auto* p = phones_.at(endpoint(id));
  if (!p) throw Error(ErrorCode::ConfigError, "endpoint '" + std::string(id) + "' is not a phone");
  return *p;
}

void Simulation::attach(EndpointId endpoint, std::unique_ptr<signaling::EndpointAgent> agent) {
  net_.attach(endpoint, agent.get());
  phones_.at(endpoint) = nullptr;
  agents_.at(endpoint) = std::move(agent);
}

civ::PlatformProfile Simulation::directory(const PhoneNumber& number) const {
  if (auto owner = topology_.owner_of(number)) return calibration_.profile(topology_.endpoints[*owner].profile);
  return calibration_.profile(civ::ProfileName::sip);
}

void Simulation::run(SimDuration horizon) { queue_.run(queue_.now() + horizon); }

std::size_t Simulation::filtered_total() const {
  std::size_t n = 0;
  for (const auto* p : phones_)
    if (p) n += p->filtered_unsolicited();
  return n;
}

Attacker::Attacker(EndpointId id, signaling::Network& net, Rng& rng, AdversaryStrategy strategy,
                   civ::Variant variant, CallerLine spoofed)
    : id_(id), net_(net), rng_(rng), strategy_(std::move(strategy)), variant_(variant), spoofed_(std::move(spoofed)) {}

SessionId Attacker::spoof_call(const PhoneNumber& target) {
  const auto id = net_.place_call(id_, target, spoofed_, CallOptions{{}, CallPurpose::initial, std::nullopt});
  placed_.push_back(id);
  return id;
}

bool Attacker::is_initial(SessionId id) const {
  return std::find(placed_.begin(), placed_.end(), id) != placed_.end();
}

void Attacker::schedule_response_call(SessionId initial) {
  if (!responded_.insert(initial).second) return;
  const auto target = net_.session(initial).callee_number;
  net_.queue().schedule_after(from_ms(strategy_.guess_delay_ms), [this, target] {
    const auto guess = generate_challenge(strategy_.n_guess_digits, rng_).digits();
    ++guesses_;
    CallerLine line = variant_ == civ::Variant::cli_cli
                          ? CallerLine{PhoneNumber::parse(guess), std::string(civ::kVerificationName), false}
                          : CallerLine{spoofed_.number, "", false};
    const auto id = net_.place_call(id_, target, line, CallOptions{{}, CallPurpose::response, std::nullopt});
    guess_calls_.insert(id);
  });
}

void Attacker::on_held(const CallSession& s) {
  if (!is_initial(s.id) || strategy_.kind != AdversaryKind::spoof_and_guess) return;
  if (variant_ == civ::Variant::cli_cli || variant_ == civ::Variant::dtmf_dtmf_3setup) schedule_response_call(s.id);
}

void Attacker::on_ended(const CallSession& s) {
  // A callee without call waiting terminates the call before challenging.
  if (is_initial(s.id) && strategy_.kind == AdversaryKind::spoof_and_guess &&
      variant_ == civ::Variant::dtmf_dtmf_3setup)
    schedule_response_call(s.id);
}

void Attacker::on_resumed(const CallSession& s) {
  if (!is_initial(s.id) || !responded_.insert(s.id).second) return;
  if (strategy_.kind == AdversaryKind::reflected_dos) {
    const auto id = s.id;
    net_.queue().schedule_after(from_ms(strategy_.linger_ms), [this, id] {
      if (net_.live(id)) net_.hangup(id, id_);
    });
    return;
  }
  if (strategy_.kind == AdversaryKind::spoof_and_guess &&
      (variant_ == civ::Variant::cli_dtmf || variant_ == civ::Variant::dtmf_dtmf_2setup)) {
    ++guesses_;
    net_.send_dtmf(s.id, id_, generate_challenge(strategy_.n_guess_digits, rng_).digits());
  }
}

void Attacker::on_ringback(const CallSession& s) {
  if (guess_calls_.contains(s.id) && variant_ == civ::Variant::cli_cli) net_.abandon_call(s.id);
}

void Attacker::on_answered(const CallSession& s) {
  if (guess_calls_.contains(s.id) && variant_ == civ::Variant::dtmf_dtmf_3setup) {
    net_.send_dtmf(s.id, id_, generate_challenge(strategy_.n_guess_digits, rng_).digits());
  }
}

namespace {

SimOptions options_for(const Scenario& sc) {
  SimOptions o;
  o.variant = sc.variant;
  o.challenge_length = sc.challenge_length;
  o.trace = sc.trace;
  o.faults = sc.faults;
  if (sc.adversary) o.unmanaged.insert(sc.adversary->attacker);
  return o;
}

struct AttackSetup {
  Attacker* attacker = nullptr;
  EndpointId victim = 0;
  PhoneNumber victim_number;
};

// Replaces the attacker endpoint with an adversary agent and schedules its
// calls.
AttackSetup arm_attacker(Simulation& sim, const AdversaryStrategy& st, std::optional<civ::Variant> variant_override,
                         std::size_t calls) {
  const auto& topo = sim.topology();
  const auto attacker_id = sim.endpoint(st.attacker);
  const auto victim_id = sim.endpoint(st.victim);
  const auto& victim = topo.endpoints[victim_id];
  CallerLine spoofed{victim.number, victim.name, false};
  if (st.kind != AdversaryKind::downgrade) {
    spoofed.name = flag_name(victim.name);
    spoofed.civ_flag = true;
  }
  const auto first_target = sim.endpoint(st.targets.front());
  const auto variant = variant_override.value_or(
      civ::select_variant(sim.directory(victim.number), sim.network().profile(first_target)));
  auto agent = std::make_unique<Attacker>(attacker_id, sim.network(), sim.rng(), st, variant, spoofed);
  Attacker* raw = agent.get();
  sim.attach(attacker_id, std::move(agent));

  std::vector<PhoneNumber> targets;
  for (const auto& t : st.targets) targets.push_back(topo.endpoints[sim.endpoint(t)].number);
  const SimDuration spacing = from_ms(1000.0 / st.rate_per_s);
  for (std::size_t i = 0; i < calls; ++i) {
    const auto target = targets[i % targets.size()];
    sim.queue().schedule_at(static_cast<std::int64_t>(i) * spacing, [raw, target] { raw->spoof_call(target); });
  }
  return {raw, victim_id, victim.number};
}

void fill_from_log(RunMetrics& m, Simulation& sim, SessionId initial) {
  auto& net = sim.network();
  if (const auto* entry = sim.log().find(initial)) {
    if (entry->challenge) m.variant = entry->variant;
    m.outcome = entry->outcome();
    if (entry->ring) {
      m.rang = true;
      m.warning = entry->ring->warning;
      m.call_alive = entry->ring->call_alive;
    }
    if (m.outcome && *m.outcome != VerificationStatus::NotAttempted) {
      m.total = entry->added_latency();
      m.breakdown = entry->breakdown();
    }
  }
  m.call_setups = net.cdrs().size();
  for (std::size_t i = 0; i < sim.topology().endpoints.size(); ++i)
    m.charges.emplace_back(sim.topology().endpoints[i].id, net.charges(i));
  m.cdrs = net.cdrs();
  m.dtmf_time = net.dtmf_time();
  m.filtered_unsolicited = sim.filtered_total();
  m.cnam_dips = net.cnam().dips();
}

}  // namespace

RunResult run_scenario(const Topology& topology, const Scenario& scenario, const LatencyCalibration& calibration,
                       std::uint64_t seed) {
  scenario.validate(topology);
  Simulation sim(topology, calibration, seed, options_for(scenario));
  RunMetrics m;
  SessionId initial = 0;
  if (scenario.adversary) {
    const auto& st = *scenario.adversary;
    const std::size_t calls = st.kind == AdversaryKind::reflected_dos ? st.targets.size() : 1;
    auto armed = arm_attacker(sim, st, scenario.variant, calls);
    sim.run();
    initial = armed.attacker->placed().empty() ? 0 : armed.attacker->placed().front();
    m.caller = st.attacker;
    m.callee = st.targets.front();
  } else {
    initial = sim.phone(scenario.caller).call(topology.endpoints[sim.endpoint(scenario.callee)].number,
                                              scenario.present_number);
    sim.run();
    m.caller = scenario.caller;
    m.callee = scenario.callee;
  }
  fill_from_log(m, sim, initial);
  return {std::move(m), std::move(sim.trace())};
}

civ::Breakdown latency_breakdown(const RunMetrics& metrics) {
  if (!metrics.outcome || *metrics.outcome == VerificationStatus::NotAttempted)
    throw Error(ErrorCode::NotApplicable, "no verification was attempted in this run");
  return metrics.breakdown;
}

json RunMetrics::to_json(const Topology& topology) const {
  auto ms = [](SimDuration d) { return to_ms(d); };
  json j;
  j["caller"] = caller;
  j["callee"] = callee;
  j["variant"] = variant ? json(civ::to_string(*variant)) : json(nullptr);
  j["outcome"] = outcome ? json(to_string(*outcome)) : json(nullptr);
  j["warning"] = warning;
  j["rang"] = rang;
  j["call_alive"] = call_alive;
  j["total_ms"] = ms(total);
  j["breakdown_ms"] = {{"verification_call_setup", ms(breakdown.verification_call_setup)},
                       {"challenge_transmit", ms(breakdown.challenge_transmit)},
                       {"response_call_setup", ms(breakdown.response_call_setup)},
                       {"response_transmit", ms(breakdown.response_transmit)}};
  j["call_setups"] = call_setups;
  json ch = json::object();
  for (const auto& [id, n] : charges) ch[id] = n;
  j["charges"] = ch;
  j["dtmf_ms"] = ms(dtmf_time);
  j["filtered_unsolicited"] = filtered_unsolicited;
  j["cnam_dips"] = cnam_dips;
  json log = json::array();
  for (const auto& c : cdrs) {
    json r;
    r["session"] = c.session;
    r["origin"] = topology.endpoints[c.origin].id;
    r["presented_cli"] = c.presented.number.digits();
    r["presented_name"] = c.presented.name;
    r["dialed"] = c.dialed.digits();
    r["terminating"] = topology.endpoints[c.terminating].id;
    r["purpose"] = signaling::to_string(c.purpose);
    r["start_ms"] = ms(c.start);
    r["answered_ms"] = c.answered ? json(ms(*c.answered)) : json(nullptr);
    r["end_ms"] = c.end ? json(ms(*c.end)) : json(nullptr);
    r["abandoned"] = c.abandoned;
    log.push_back(r);
  }
  j["cdrs"] = log;
  return j;
}

std::vector<CdrPair> correlate_reflections(const std::vector<CallDetailRecord>& cdrs, EndpointId victim,
                                           const PhoneNumber& victim_number) {
  std::vector<CdrPair> pairs;
  std::set<std::size_t> used;
  for (std::size_t v = 0; v < cdrs.size(); ++v) {
    const auto& ver = cdrs[v];
    if (ver.terminating != victim || !ver.abandoned || !ver.presented.number.is_nondialable_short()) continue;
    // A callee verifies queued calls one at a time and places the
    // verification call right after answering the one it is checking, so
    // prefer the most recently answered candidate, then the oldest.
    std::optional<std::size_t> best;
    auto answered_before = [&](const CallDetailRecord& c) {
      return c.answered && *c.answered <= ver.start ? c.answered : std::nullopt;
    };
    auto better = [&](const CallDetailRecord& a, const CallDetailRecord& b) {
      const auto aa = answered_before(a), ab = answered_before(b);
      if (aa.has_value() != ab.has_value()) return aa.has_value();
      if (aa && *aa != *ab) return *aa > *ab;
      return a.start < b.start;
    };
    for (std::size_t s = 0; s < cdrs.size(); ++s) {
      const auto& sp = cdrs[s];
      if (used.contains(s) || s == v) continue;
      if (sp.presented.number != victim_number || sp.origin == victim) continue;
      if (sp.terminating != ver.origin || ver.dialed != sp.presented.number) continue;
      if (sp.start > ver.start || (sp.end && *sp.end < ver.start)) continue;
      if (!best || better(sp, cdrs[*best])) best = s;
    }
    if (best) {
      used.insert(*best);
      pairs.push_back({*best, v});
    }
  }
  return pairs;
}

std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

AttackStats run_attack(const Topology& topology, const AdversaryStrategy& strategy, std::size_t trials,
                       std::uint64_t seed, const LatencyCalibration& calibration, unsigned jobs) {
  if (trials == 0) throw Error(ErrorCode::ConfigError, "trials must be at least 1");
  Scenario sc;
  sc.adversary = strategy;
  sc.validate(topology);

  AttackStats st;
  st.kind = strategy.kind;
  st.trials = trials;
  SimOptions opts;
  opts.trace = false;
  opts.unmanaged.insert(strategy.attacker);

  auto tally = [](AttackStats& st, const civ::VerificationSession* e) {
    if (!e || !e->outcome()) return;
    switch (*e->outcome()) {
      case VerificationStatus::Verified: ++st.verified; break;
      case VerificationStatus::NotVerified: ++st.not_verified; break;
      case VerificationStatus::NotAttempted: ++st.not_attempted; break;
    }
    if (e->ring) {
      ++st.rings;
      if (e->ring->call_alive) ++st.alive_rings;
      if (!e->ring->warning.empty()) ++st.warnings;
    }
  };

  if (strategy.kind == AdversaryKind::reflected_dos) {
    // One campaign; each trial is one spoofed call.
    Simulation sim(topology, calibration, seed, opts);
    auto armed = arm_attacker(sim, strategy, std::nullopt, trials);
    sim.run(kRunHorizon + static_cast<std::int64_t>(trials) * from_ms(1000.0 / strategy.rate_per_s));
    for (auto id : armed.attacker->placed()) tally(st, sim.log().find(id));
    const auto& cdrs = sim.network().cdrs();
    const auto pairs = correlate_reflections(cdrs, armed.victim, armed.victim_number);
    const auto attacker_id = sim.endpoint(strategy.attacker);
    st.reflected_calls = armed.attacker->placed().size();
    st.victim_missed_calls = sim.network().missed_calls(armed.victim);
    const auto* victim_phone = &sim.phone(strategy.victim);
    st.victim_filtered = victim_phone->filtered_unsolicited();
    st.cdr_pairs = pairs.size();
    for (const auto& p : pairs)
      if (cdrs[p.spoofed].origin == attacker_id) ++st.traced_to_attacker;
  } else {
    const auto target_number = topology.endpoints[topology.endpoint_index(strategy.targets.front())].number;
    // Trial t depends only on derive_seed(seed, t), and counts add up in any
    // order, so splitting the trials across workers leaves the result fixed.
    const unsigned workers = static_cast<unsigned>(std::clamp<std::size_t>(jobs, 1, trials));
    std::vector<AttackStats> partial(workers);
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](unsigned w) {
      try {
        for (std::size_t t = w; t < trials; t += workers) {
          Simulation sim(topology, calibration, derive_seed(seed, t), opts);
          auto armed = arm_attacker(sim, strategy, std::nullopt, 0);
          const auto id = armed.attacker->spoof_call(target_number);
          sim.run();
          tally(partial[w], sim.log().find(id));
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
      for (auto& th : pool) th.join();
    }
    for (unsigned w = 0; w < workers; ++w) {
      if (errors[w]) std::rethrow_exception(errors[w]);
      st.verified += partial[w].verified;
      st.not_verified += partial[w].not_verified;
      st.not_attempted += partial[w].not_attempted;
      st.rings += partial[w].rings;
      st.alive_rings += partial[w].alive_rings;
      st.warnings += partial[w].warnings;
    }
    // A guess of the wrong length never matches.
    const auto& target = topology.endpoints[topology.endpoint_index(strategy.targets.front())];
    if (strategy.kind == AdversaryKind::spoof_and_guess && strategy.n_guess_digits == target.challenge_length)
      st.expected_rate = std::pow(10.0, -static_cast<double>(strategy.n_guess_digits));
  }
  const std::size_t attempts = st.verified + st.not_verified + st.not_attempted;
  st.rate = attempts ? static_cast<double>(st.verified) / static_cast<double>(attempts) : 0.0;
  std::tie(st.ci_low, st.ci_high) = wilson_interval(st.verified, attempts, 3.0);
  return st;
}

}  // namespace civsim::simnet
