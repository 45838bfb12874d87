#include "civsim/signaling.hpp"

#include <algorithm>

namespace civsim::signaling {

std::string_view to_string(CallState state) {
  switch (state) {
    case CallState::dialing: return "dialing";
    case CallState::ringing: return "ringing";
    case CallState::answered: return "answered";
    case CallState::held: return "held";
    case CallState::ended: return "ended";
  }
  return "unknown";
}

std::string_view to_string(CallPurpose purpose) {
  switch (purpose) {
    case CallPurpose::ordinary: return "ordinary";
    case CallPurpose::initial: return "initial";
    case CallPurpose::verification: return "verification";
    case CallPurpose::response: return "response";
  }
  return "unknown";
}

void CnamDatabase::add(CnamRecord record) {
  const auto number = record.number;
  records_.insert_or_assign(number, std::move(record));
}

std::optional<CnamRecord> CnamDatabase::lookup(const PhoneNumber& number) {
  ++dips_;
  if (auto it = records_.find(number); it != records_.end()) return it->second;
  return std::nullopt;
}

DtmfPayload DtmfPayload::from_symbols(std::string_view symbols, NetworkKind kind,
                                      const dtmf::TimingConfig& timing) {
  DtmfPayload p;
  p.representation = native_dtmf(kind);
  p.timing = timing;
  if (p.representation == dtmf::PathKind::analogue_inband)
    p.audio = dtmf::synthesize(symbols, timing);
  else
    p.events = dtmf::to_events(symbols, timing);
  return p;
}

std::string DtmfPayload::symbols() const {
  if (representation == dtmf::PathKind::analogue_inband) return dtmf::decode(audio, timing);
  return dtmf::symbols_of(events);
}

DtmfPayload gateway_convert(const DtmfPayload& payload, NetworkKind from, NetworkKind to,
                            const dtmf::NoiseModel& leg_noise, Rng& rng) {
  if (from == to) {
    if (to != NetworkKind::pstn_analogue) return payload;
    DtmfPayload out = payload;
    out.audio = dtmf::apply_noise(payload.audio, leg_noise, rng);
    return out;
  }
  DtmfPayload out = DtmfPayload::from_symbols(payload.symbols(), to, payload.timing);
  if (to == NetworkKind::pstn_analogue) out.audio = dtmf::apply_noise(out.audio, leg_noise, rng);
  return out;
}

Network::Network(const Topology& topology, const simnet::LatencyCalibration& calibration,
                 simnet::EventQueue& queue, simnet::Trace& trace, Rng& rng)
    : topology_(topology), calibration_(calibration), queue_(queue), trace_(trace), rng_(rng) {
  const auto n = topology.endpoints.size();
  agents_.assign(n, nullptr);
  charges_.assign(n, 0);
  missed_.assign(n, 0);
  owned_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = topology.endpoints[i];
    profiles_.push_back(calibration.profile(e.profile));
    endpoint_network_.push_back(*topology.find_network(e.network));
    owned_[i].push_back(e.number);
    if (e.pbx) owned_[i].push_back(topology.endpoints[topology.endpoint_index(*e.pbx)].number);
  }
  for (const auto& e : topology.endpoints)
    if (e.forward_to) owned_[topology.endpoint_index(*e.forward_to)].push_back(e.number);
  for (const auto& c : topology.cnam) cnam_.add({c.number, c.name, c.civ_flag});
}

void Network::attach(EndpointId endpoint, EndpointAgent* agent) { agents_.at(endpoint) = agent; }

civ::PlatformProfile Network::profile(EndpointId endpoint) const { return profiles_.at(endpoint); }

NetworkKind Network::network_kind(EndpointId endpoint) const {
  return topology_.networks[endpoint_network_.at(endpoint)].kind;
}

const std::string& Network::endpoint_name(EndpointId endpoint) const {
  return topology_.endpoints.at(endpoint).id;
}

bool Network::owns(EndpointId endpoint, const PhoneNumber& number) const {
  const auto& owned = owned_.at(endpoint);
  return std::find(owned.begin(), owned.end(), number) != owned.end();
}

CallSession& Network::mut(SessionId id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::InvalidState, "unknown session " + std::to_string(id));
  return it->second;
}

const CallSession& Network::session(SessionId id) const {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::InvalidState, "unknown session " + std::to_string(id));
  return it->second;
}

bool Network::live(SessionId id) const {
  auto it = sessions_.find(id);
  return it != sessions_.end() && it->second.state != CallState::ended;
}

bool Network::in_call(EndpointId endpoint) const {
  for (const auto& [id, s] : sessions_)
    if (s.state != CallState::ended && (s.origin == endpoint || s.terminating == endpoint)) return true;
  return false;
}

void Network::record(EndpointId at, std::string event, std::string payload) {
  trace_.add(now(), endpoint_name(at), std::move(event), std::move(payload));
}

void Network::check_wall(const CallSession& s, EndpointId to) const {
  if (s.options.challenge_for && !owns(to, *s.options.challenge_for))
    throw Error(ErrorCode::CapabilityViolation,
                "challenge for " + s.options.challenge_for->digits() + " delivered to " + endpoint_name(to));
}

bool Network::dropped(const CallSession& s) const {
  switch (s.options.purpose) {
    case CallPurpose::verification: return faults_.drop_challenge;
    case CallPurpose::initial:
    case CallPurpose::response: return faults_.drop_response;
    case CallPurpose::ordinary: return false;
  }
  return false;
}

EndpointId Network::resolve(const PhoneNumber& to, std::vector<std::size_t>& networks) const {
  const auto owner = topology_.owner_of(to);
  if (!owner) throw Error(ErrorCode::Unroutable, "no endpoint owns " + to.digits());
  networks.push_back(endpoint_network_[*owner]);
  EndpointId target = *owner;
  if (const auto& fwd = topology_.endpoints[*owner].forward_to) {
    target = topology_.endpoint_index(*fwd);
    networks.push_back(endpoint_network_[target]);
  }
  return target;
}

SessionId Network::place_call(EndpointId from, const PhoneNumber& to, const CallerLine& presented,
                              CallOptions options) {
  const auto& caller_profile = profiles_.at(from);
  if (!owns(from, presented.number) && !caller_profile.can_modify_cli)
    throw Error(ErrorCode::CapabilityMissing,
                endpoint_name(from) + " cannot present " + presented.number.digits());
  if (!caller_profile.has_call_waiting && in_call(from))
    throw Error(ErrorCode::InvalidState, endpoint_name(from) + " is already in a call");

  std::vector<std::size_t> hops;
  const EndpointId target = resolve(to, hops);

  // Route leg by leg: origin to the number's home network, then on to the
  // forwarding target if there is one.
  std::vector<std::size_t> route{endpoint_network_[from]};
  double setup_ms = 0.0;
  for (const auto hop : hops) {
    const auto leg = topology_.route(route.back(), hop);
    if (leg.empty())
      throw Error(ErrorCode::Unroutable, "no path from " + topology_.networks[route.back()].id + " to " +
                                             topology_.networks[hop].id);
    setup_ms += calibration_.call_setup(topology_.networks[route.back()].kind, topology_.networks[hop].kind);
    route.insert(route.end(), leg.begin() + 1, leg.end());
  }
  if (calibration_.setup_jitter > 0.0) {
    std::uniform_real_distribution<double> jitter(1.0 - calibration_.setup_jitter, 1.0 + calibration_.setup_jitter);
    setup_ms *= jitter(rng_);
  }
  if (topology_.endpoints[from].pbx) setup_ms += calibration_.pbx_forward_ms;

  if (!profiles_[target].has_call_waiting && in_call(target)) {
    if (tracing()) record(from, "busy", to.digits());
    throw Error(ErrorCode::Busy, endpoint_name(target) + " is busy");
  }

  CallSession s;
  s.id = next_id_++;
  s.caller_line = presented;
  s.callee_number = to;
  s.origin = from;
  s.terminating = target;
  s.networks = route;
  for (std::size_t i = 0; i < route.size(); ++i) {
    s.path.push_back(topology_.networks[route[i]].kind);
    if (i > 0 && s.path[i] != s.path[i - 1]) ++s.gateways;
  }
  s.options = std::move(options);
  s.displayed = presented;
  if (topology_.endpoints[target].cnam_dip) {
    setup_ms += calibration_.cnam_lookup_ms;
    if (auto rec = cnam_.lookup(presented.number))
      s.displayed = CallerLine{presented.number, rec->registered_name, rec->civ_flag};
  }

  cdrs_.push_back({s.id, from, presented, to, target, s.options.purpose, now(), std::nullopt, std::nullopt, false});
  if (tracing())
    record(from, "place",
           "id=" + std::to_string(s.id) + " to=" + to.digits() + " cli=" + presented.number.digits() +
               " name=" + presented.name + " purpose=" + std::string(to_string(s.options.purpose)));

  const SessionId id = s.id;
  sessions_.emplace(id, std::move(s));
  queue_.schedule_after(from_ms(setup_ms), [this, id] {
    auto& s = mut(id);
    if (s.state != CallState::dialing) return;
    s.state = CallState::ringing;
    if (tracing()) record(s.terminating, "incoming", "id=" + std::to_string(id) + " cli=" + s.displayed.number.digits() + " name=" + s.displayed.name);
    if (auto* a = agent(s.terminating)) a->on_incoming(s);
    if (s.state == CallState::ended) return;
    if (auto* a = agent(s.origin)) a->on_ringback(s);
  });
  return id;
}

void Network::answer(SessionId id) {
  auto& s = mut(id);
  if (s.state != CallState::ringing || s.answer_pending)
    throw Error(ErrorCode::InvalidState, "answer in state " + std::string(to_string(s.state)));
  s.answer_pending = true;
  const auto delay = from_ms(calibration_.answer(profiles_[s.terminating].name));
  queue_.schedule_after(delay, [this, id] {
    auto& s = mut(id);
    s.answer_pending = false;
    if (s.state != CallState::ringing) return;
    s.state = CallState::answered;
    s.charge_to_caller = true;
    ++charges_[s.origin];
    cdrs_[id - 1].answered = now();
    if (tracing()) record(s.terminating, "answered", "id=" + std::to_string(id));
    if (auto* a = agent(s.origin)) a->on_answered(s);
    if (auto* a = agent(s.terminating)) a->on_answered(s);
    if (!s.options.dial_extension.empty()) {
      const auto pause = from_ms(profiles_[s.origin].dial_string_pause_ms);
      queue_.schedule_after(pause, [this, id] {
        const auto& s = session(id);
        if (s.state != CallState::answered) return;
        deliver_dtmf(id, s.origin, s.options.dial_extension);
      });
    }
  });
}

MissedCallEvent Network::abandon_call(SessionId id) {
  auto& s = mut(id);
  if (s.state != CallState::dialing && s.state != CallState::ringing)
    throw Error(ErrorCode::InvalidState, "abandon in state " + std::string(to_string(s.state)));
  s.state = CallState::ended;
  s.charge_to_caller = false;
  auto& cdr = cdrs_[id - 1];
  cdr.end = now();
  cdr.abandoned = true;
  if (tracing()) record(s.origin, "abandon", "id=" + std::to_string(id));

  MissedCallEvent ev{id, s.terminating, s.displayed.number, s.displayed.name, now()};
  if (!dropped(s)) {
    queue_.schedule_after(SimDuration{0}, [this, ev] {
      const auto& s = session(ev.session);
      check_wall(s, ev.at);
      ++missed_[ev.at];
      if (tracing()) record(ev.at, "missed-call", "id=" + std::to_string(ev.session) + " cli=" + ev.displayed_cli.digits() + " name=" + ev.displayed_name);
      if (auto* a = agent(ev.at)) a->on_missed_call(ev);
    });
  }
  return ev;
}

void Network::relay_missed_call(EndpointId to, MissedCallEvent event, SimDuration delay) {
  queue_.schedule_after(delay, [this, to, event]() mutable {
    check_wall(session(event.session), to);
    event.at = to;
    event.timestamp = now();
    ++missed_[to];
    if (tracing()) record(to, "missed-call", "relayed id=" + std::to_string(event.session) + " cli=" + event.displayed_cli.digits());
    if (auto* a = agent(to)) a->on_missed_call(event);
  });
}

void Network::hangup(SessionId id, EndpointId by) {
  auto& s = mut(id);
  if (by != s.origin && by != s.terminating)
    throw Error(ErrorCode::InvalidState, endpoint_name(by) + " is not a party to the call");
  if (s.state == CallState::ended) throw Error(ErrorCode::InvalidState, "hangup of an ended call");
  if (by == s.origin && (s.state == CallState::dialing || s.state == CallState::ringing)) {
    abandon_call(id);
    return;
  }
  s.state = CallState::ended;
  s.held_by.reset();
  cdrs_[id - 1].end = now();
  if (tracing()) record(by, "hangup", "id=" + std::to_string(id));
  const EndpointId other = by == s.origin ? s.terminating : s.origin;
  queue_.schedule_after(from_ms(calibration_.release_ms), [this, id, other] {
    if (tracing()) record(other, "ended", "id=" + std::to_string(id));
    if (auto* a = agent(other)) a->on_ended(session(id));
  });
}

void Network::hold(SessionId id, EndpointId by) {
  auto& s = mut(id);
  if (s.state != CallState::answered || now() < s.transition_until)
    throw Error(ErrorCode::InvalidState, "hold in state " + std::string(to_string(s.state)));
  if (!profiles_.at(by).has_call_waiting)
    throw Error(ErrorCode::CapabilityMissing, endpoint_name(by) + " has no call waiting");
  s.state = CallState::held;
  s.held_by = by;
  const auto delay = from_ms(calibration_.hold_toggle_ms);
  s.transition_until = now() + delay;
  queue_.schedule_after(delay, [this, id, by] {
    const auto& s = session(id);
    if (s.state != CallState::held) return;
    if (tracing()) record(by, "held", "id=" + std::to_string(id));
    if (auto* a = agent(s.origin)) a->on_held(s);
    if (auto* a = agent(s.terminating)) a->on_held(s);
  });
}

void Network::resume(SessionId id, EndpointId by) {
  auto& s = mut(id);
  if (s.state != CallState::held || now() < s.transition_until)
    throw Error(ErrorCode::InvalidState, "resume in state " + std::string(to_string(s.state)));
  if (!profiles_.at(by).has_call_waiting)
    throw Error(ErrorCode::CapabilityMissing, endpoint_name(by) + " has no call waiting");
  s.state = CallState::answered;
  s.held_by.reset();
  const auto delay = from_ms(calibration_.hold_toggle_ms);
  s.transition_until = now() + delay;
  queue_.schedule_after(delay, [this, id, by] {
    const auto& s = session(id);
    if (s.state != CallState::answered) return;
    if (tracing()) record(by, "resumed", "id=" + std::to_string(id));
    if (auto* a = agent(s.origin)) a->on_resumed(s);
    if (auto* a = agent(s.terminating)) a->on_resumed(s);
  });
}

void Network::send_dtmf(SessionId id, EndpointId from, std::string_view digits, DtmfMode mode) {
  if (mode == DtmfMode::dial_string_extension)
    throw Error(ErrorCode::InvalidState, "dial-string digits are given when the call is placed");
  dtmf::validate_symbols(digits);
  const auto& s = session(id);
  if (from != s.origin && from != s.terminating)
    throw Error(ErrorCode::InvalidState, endpoint_name(from) + " is not a party to the call");
  if (s.state != CallState::answered || now() < s.transition_until)
    throw Error(ErrorCode::InvalidState, "DTMF in state " + std::string(to_string(s.state)));
  if (!profiles_.at(from).can_send_incall_dtmf)
    throw Error(ErrorCode::CapabilityMissing, endpoint_name(from) + " cannot send in-call DTMF");
  deliver_dtmf(id, from, std::string(digits));
}

std::string Network::transport(const CallSession& s, const std::string& digits,
                               const dtmf::TimingConfig& timing) {
  bool noisy = false;
  for (auto n : s.networks)
    noisy |= topology_.networks[n].kind == NetworkKind::pstn_analogue &&
             topology_.networks[n].noise.kind != dtmf::NoiseModel::Kind::none;
  // Clean legs are lossless (decode inverts synthesize), so skip the audio.
  if (!noisy) return digits;

  const auto& first = topology_.networks[s.networks.front()];
  auto payload = DtmfPayload::from_symbols(digits, first.kind, timing);
  if (first.kind == NetworkKind::pstn_analogue)
    payload.audio = dtmf::apply_noise(payload.audio, first.noise, rng_);
  for (std::size_t i = 1; i < s.networks.size(); ++i) {
    const auto& prev = topology_.networks[s.networks[i - 1]];
    const auto& next = topology_.networks[s.networks[i]];
    payload = gateway_convert(payload, prev.kind, next.kind, next.noise, rng_);
  }
  return payload.symbols();
}

void Network::deliver_dtmf(SessionId id, EndpointId from, const std::string& digits) {
  const auto& s = session(id);
  const EndpointId to = from == s.origin ? s.terminating : s.origin;

  auto kind = dtmf::PathKind::digital_event;
  for (auto k : s.path) {
    if (k == NetworkKind::pstn_analogue) kind = dtmf::PathKind::analogue_inband;
    else if (k == NetworkKind::cellular_cs && kind != dtmf::PathKind::analogue_inband)
      kind = dtmf::PathKind::out_of_band;
  }
  const auto& timing = profiles_[from].timing;
  const auto& cost = calibration_.path_cost(kind);
  const SimTime base = now() + from_ms(cost.fixed_ms) +
                       static_cast<std::int64_t>(s.gateways) * from_ms(calibration_.gateway_conversion_ms);
  const SimDuration per = dtmf::per_digit_time(kind, timing, cost) + from_ms(profiles_[to].dtmf_recognition_delay_ms);

  if (tracing()) record(from, "dtmf-start", "id=" + std::to_string(id) + " digits=" + digits + " path=" + std::string(dtmf::to_string(kind)));
  if (auto* a = agent(from)) a->on_dtmf_start(s);
  if (dropped(s)) {
    if (tracing()) record(from, "dtmf-dropped", "id=" + std::to_string(id));
    return;
  }

  const std::string symbols = transport(s, digits, timing);
  if (!symbols.empty()) dtmf_time_ += base + static_cast<std::int64_t>(symbols.size()) * per - now();
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const char c = symbols[i];
    queue_.schedule_at(base + static_cast<std::int64_t>(i + 1) * per, [this, id, to, c] {
      const auto& s = session(id);
      if (s.state != CallState::answered) return;
      check_wall(s, to);
      if (tracing()) record(to, "dtmf", "id=" + std::to_string(id) + " symbol=" + std::string(1, c));
      if (auto* a = agent(to)) a->on_dtmf(s, c);
    });
  }
}

}  // namespace civsim::signaling
