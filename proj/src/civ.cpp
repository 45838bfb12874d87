#include "civsim/civ.hpp"

#include <algorithm>

namespace civsim::civ {

using signaling::CallOptions;
using signaling::CallPurpose;
using signaling::CallSession;
using signaling::CallState;
using signaling::MissedCallEvent;

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::cli_dtmf: return "cli-dtmf";
    case Variant::cli_cli: return "cli-cli";
    case Variant::dtmf_dtmf_2setup: return "dtmf-dtmf-2setup";
    case Variant::dtmf_dtmf_3setup: return "dtmf-dtmf-3setup";
  }
  return "unknown";
}

Variant variant_from_string(std::string_view s) {
  for (auto v : {Variant::cli_dtmf, Variant::cli_cli, Variant::dtmf_dtmf_2setup, Variant::dtmf_dtmf_3setup})
    if (to_string(v) == s) return v;
  throw Error(ErrorCode::ConfigError, "unknown variant: " + std::string(s));
}

Variant select_variant(const PlatformProfile& caller, const PlatformProfile& callee) {
  const bool both_hold = caller.has_call_waiting && callee.has_call_waiting;
  if (callee.can_modify_cli && both_hold) {
    if (caller.can_send_incall_dtmf) return Variant::cli_dtmf;
    if (caller.can_modify_cli) return Variant::cli_cli;
  }
  if (caller.can_send_incall_dtmf && both_hold) return Variant::dtmf_dtmf_2setup;
  return Variant::dtmf_dtmf_3setup;
}

bool callee_holds_initial(Variant v, const PlatformProfile& caller, const PlatformProfile& callee) {
  if (v != Variant::dtmf_dtmf_3setup) return true;
  return caller.has_call_waiting && callee.has_call_waiting;
}

std::size_t call_setups(Variant v) {
  switch (v) {
    case Variant::cli_dtmf:
    case Variant::dtmf_dtmf_2setup: return 2;
    case Variant::cli_cli:
    case Variant::dtmf_dtmf_3setup: return 3;
  }
  return 0;
}

void VerificationSession::set_outcome(VerificationStatus status) {
  if (outcome_) throw Error(ErrorCode::InvalidState, "verification outcome already set");
  outcome_ = status;
}

Breakdown VerificationSession::breakdown() const {
  const SimTime end = decided.value_or(started);
  auto next = [end](SimTime prev, const std::optional<SimTime>& t) {
    return std::clamp(t.value_or(prev), prev, std::max(prev, end));
  };
  Breakdown b;
  const SimTime cs = next(started, challenge_start);
  const SimTime cr = next(cs, challenge_received);
  b.verification_call_setup = cs - started;
  b.challenge_transmit = cr - cs;
  if (response_call) {
    const SimTime rs = next(cr, response_start);
    b.response_call_setup = rs - cr;
    b.response_transmit = std::max(end, rs) - rs;
  } else {
    b.response_transmit = std::max(end, cr) - cr;
  }
  return b;
}

SimDuration VerificationSession::added_latency() const {
  return decided ? *decided - started : SimDuration{0};
}

VerificationSession& VerificationLog::open(SessionId initial) {
  auto [it, inserted] = sessions_.try_emplace(initial);
  if (!inserted) throw Error(ErrorCode::InvalidState, "verification already open for call " + std::to_string(initial));
  it->second.initial_session = initial;
  return it->second;
}

VerificationSession* VerificationLog::find(SessionId initial) {
  auto it = sessions_.find(initial);
  return it == sessions_.end() ? nullptr : &it->second;
}

std::string PbxState::format(unsigned index) {
  std::string s = std::to_string(index);
  return std::string(3 - s.size(), '0') + s;
}

void PbxState::release(std::string_view index) {
  for (auto it = active_.begin(); it != active_.end(); ++it)
    if (format(it->first) == index) {
      active_.erase(it);
      return;
    }
}

EndpointId PbxState::extension_for(std::string_view index) const {
  for (const auto& [i, ext] : active_)
    if (format(i) == index) return ext;
  throw Error(ErrorCode::UnknownIndex, "no active call with index " + std::string(index));
}

std::string pbx_caller_name(std::string_view org_name, std::string_view index) {
  const std::size_t room = kMaxNameLength - 2 - index.size();  // '#' and the flag
  return std::string(org_name.substr(0, room)) + "#" + std::string(index) + kCivFlag;
}

std::optional<std::string> pbx_index_of(std::string_view name) {
  const auto hash = name.find('#');
  if (hash == std::string_view::npos || hash + 4 > name.size()) return std::nullopt;
  const auto idx = name.substr(hash + 1, 3);
  if (!is_decimal(idx)) return std::nullopt;
  return std::string(idx);
}

namespace {

bool has_marker(std::string_view name) { return name.substr(0, kVerificationName.size()) == kVerificationName; }

}  // namespace

Recognition recognize_verification_call(const MissedCallEvent& event, const RecognitionContext& ctx) {
  const auto& cli = event.displayed_cli;
  const bool right_length = cli.digits().size() == ctx.challenge_length;
  const bool by_format = cli.is_nondialable_short() && right_length;
  const bool by_marker = ctx.accept_name_marker && right_length && has_marker(event.displayed_name);
  const bool looks_like = cli.is_nondialable_short() || (ctx.accept_name_marker && has_marker(event.displayed_name));
  if ((by_format || by_marker) && ctx.verification_pending)
    return {MissedCallClass::challenge, Challenge::from_digits(cli.digits())};
  if (looks_like && !ctx.verification_pending) return {MissedCallClass::unsolicited, std::nullopt};
  return {MissedCallClass::ordinary, std::nullopt};
}

Phone::Phone(PhoneConfig config, signaling::Network& net, VerificationLog& log, Rng& rng)
    : cfg_(std::move(config)), net_(net), log_(log), rng_(rng) {}

bool Phone::is_verification_cli(const CallerLine& line) const {
  return line.number.is_nondialable_short() || (cfg_.verification_marker && has_marker(line.name));
}

SessionId Phone::call(const PhoneNumber& to, std::optional<PhoneNumber> presented, bool flagged) {
  CallerLine line;
  std::optional<std::string> index;
  if (cfg_.pbx) {
    line.number = presented.value_or(cfg_.org_number);
    if (flagged) {
      index = cfg_.pbx->register_outbound(cfg_.id, rng_);
      line.name = pbx_caller_name(cfg_.org_name, *index);
    } else {
      line.name = cfg_.org_name;
    }
  } else {
    line.number = presented.value_or(cfg_.own_line.number);
    line.name = flagged ? flag_name(cfg_.own_line.name) : cfg_.own_line.name;
  }
  line.civ_flag = flagged;
  const auto id = net_.place_call(cfg_.id, to, line, CallOptions{{}, CallPurpose::initial, std::nullopt});
  if (flagged && cfg_.civ_enabled) {
    Outgoing o;
    o.initial = id;
    o.callee = to;
    // Agreed from the presented number, as the callee sees it.
    o.variant = cfg_.variant_override.value_or(select_variant(cfg_.directory(line.number), cfg_.directory(to)));
    o.pbx_index = index;
    outgoing_.push_back(std::move(o));
  }
  return id;
}

Phone::Outgoing* Phone::outgoing_by_initial(SessionId id) {
  for (auto& o : outgoing_)
    if (!o.done && o.initial == id) return &o;
  return nullptr;
}

Phone::Outgoing* Phone::outgoing_by_call(SessionId id) {
  for (auto& o : outgoing_)
    if (!o.done && (o.verification_call == id || o.response_call == id)) return &o;
  return nullptr;
}

Phone::Outgoing* Phone::outgoing_awaiting_call_from(const PhoneNumber& number) {
  for (auto& o : outgoing_)
    if (!o.done && o.callee == number && !o.challenge && !o.verification_call &&
        (o.variant == Variant::dtmf_dtmf_2setup || o.variant == Variant::dtmf_dtmf_3setup))
      return &o;
  return nullptr;
}

Phone::Incoming* Phone::incoming_by_call(SessionId id) {
  for (auto& [initial, v] : incoming_)
    if (initial == id || v.verification_call == id || v.response_call == id) return &v;
  return nullptr;
}

void Phone::finish_outgoing(Outgoing& o) {
  o.done = true;
  if (cfg_.pbx && o.pbx_index) cfg_.pbx->release(*o.pbx_index);
  std::erase_if(outgoing_, [](const Outgoing& x) { return x.done; });
}

void Phone::ring_unverified(const CallSession& s, VerificationStatus status, std::string warning) {
  auto& entry = log_.open(s.id);
  entry.callee = cfg_.id;
  entry.displayed = s.displayed;
  entry.started = net_.now();
  entry.decided = net_.now();
  entry.set_outcome(status);
  RingEvent ring{s.id, s.displayed, status, std::move(warning), true, net_.now()};
  entry.ring = ring;
  rings_.push_back(ring);
  if (net_.trace().enabled())
    net_.trace().add(net_.now(), net_.endpoint_name(cfg_.id), "ring",
                     "id=" + std::to_string(s.id) + " status=" + std::string(to_string(status)) +
                         (ring.warning.empty() ? "" : " warning=" + ring.warning));
}

void Phone::on_incoming(const CallSession& s) {
  // Challenge carriers are left to ring out; their CLI arrives as a missed call.
  if (is_verification_cli(s.displayed)) return;

  if (auto* o = outgoing_awaiting_call_from(s.displayed.number)) {
    o->verification_call = s.id;
    net_.answer(s.id);
    return;
  }

  for (auto& [initial, v] : incoming_) {
    if (v.variant == Variant::dtmf_dtmf_3setup && v.challenge_sent && !v.response_call &&
        v.displayed.number == s.displayed.number) {
      v.response_call = s.id;
      net_.answer(s.id);
      return;
    }
  }

  if (!cfg_.civ_enabled) {
    ring_unverified(s, VerificationStatus::NotAttempted, "");
    return;
  }
  const bool contact = std::find(cfg_.civ_contacts.begin(), cfg_.civ_contacts.end(), s.displayed.number) !=
                       cfg_.civ_contacts.end();
  if (!s.displayed.civ_flag && !contact) {
    ring_unverified(s, VerificationStatus::NotAttempted, std::string(kUnverifiedWarning));
    return;
  }
  if (active_by_number_.contains(s.displayed.number)) {
    queued_[s.displayed.number].push_back(s.id);
    return;
  }
  start_verification(s);
}

void Phone::start_verification(const CallSession& s) {
  const auto peer = cfg_.directory(s.displayed.number);
  const Variant variant = cfg_.variant_override.value_or(select_variant(peer, cfg_.profile));
  Incoming v(s.id, s.displayed, variant, generate_challenge(cfg_.challenge_length, rng_),
             callee_holds_initial(variant, peer, cfg_.profile));

  auto& entry = log_.open(s.id);
  entry.callee = cfg_.id;
  entry.displayed = s.displayed;
  entry.challenge = v.challenge;
  entry.variant = variant;
  entry.started = net_.now();
  if (net_.trace().enabled())
    net_.trace().add(net_.now(), net_.endpoint_name(cfg_.id), "verify-start",
                     "id=" + std::to_string(s.id) + " variant=" + std::string(to_string(variant)) +
                         " challenge=" + v.challenge.digits());

  const SessionId id = s.id;
  active_by_number_[s.displayed.number] = id;
  v.timeout = net_.queue().schedule_after(kChallengeTimeout, [this, id] {
    if (net_.trace().enabled())
      net_.trace().add(net_.now(), net_.endpoint_name(cfg_.id), "timeout", "id=" + std::to_string(id));
    decide(id, VerificationStatus::NotVerified, std::nullopt);
  });
  auto [it, inserted] = incoming_.emplace(id, std::move(v));
  if (it->second.holds_initial) {
    net_.answer(id);  // held once answered
  } else {
    net_.hangup(id, cfg_.id);
    it->second.initial_alive = false;
    send_challenge(it->second);
  }
}

void Phone::send_challenge(Incoming& v) {
  const auto& number = v.displayed.number;
  CallOptions opts{{}, CallPurpose::verification, number};
  CallerLine line;
  if (v.variant == Variant::cli_dtmf || v.variant == Variant::cli_cli) {
    line.number = PhoneNumber::parse(v.challenge.digits());
    line.name = std::string(kVerificationName);
    if (auto idx = pbx_index_of(v.displayed.name)) line.name += "#" + *idx;
  } else {
    line = cfg_.own_line;
    if (!cfg_.profile.can_send_incall_dtmf) opts.dial_extension = v.challenge.digits();
  }
  v.challenge_sent = true;
  try {
    v.verification_call = net_.place_call(cfg_.id, number, line, opts);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Busy && e.code() != ErrorCode::Unroutable) throw;
    decide(v.initial, VerificationStatus::NotVerified, std::nullopt);
  }
}

void Phone::on_ringback(const CallSession& s) {
  if (s.origin != cfg_.id) return;
  if (auto* v = incoming_by_call(s.id); v && v->verification_call == s.id &&
                                         (v->variant == Variant::cli_dtmf || v->variant == Variant::cli_cli)) {
    net_.abandon_call(s.id);
    if (auto* e = log_entry(v->initial)) {
      e->challenge_start = net_.now();
      e->challenge_received = net_.now();
    }
    if (v->variant == Variant::cli_dtmf && v->initial_alive && net_.live(v->initial))
      net_.resume(v->initial, cfg_.id);
    return;
  }
  if (auto* o = outgoing_by_call(s.id); o && o->response_call == s.id && o->variant == Variant::cli_cli) {
    net_.abandon_call(s.id);
    if (auto* e = log_entry(o->initial)) e->response_start = net_.now();
    finish_outgoing(*o);
  }
}

void Phone::on_answered(const CallSession& s) {
  if (s.terminating == cfg_.id) {
    if (auto it = incoming_.find(s.id); it != incoming_.end() && it->second.holds_initial)
      net_.hold(s.id, cfg_.id);
    return;
  }
  // Calls this phone placed.
  if (auto* o = outgoing_by_initial(s.id)) {
    o->initial_answered = true;
    return;
  }
  if (auto* o = outgoing_by_call(s.id); o && o->response_call == s.id) {
    if (cfg_.profile.can_send_incall_dtmf && s.options.dial_extension.empty()) {
      net_.send_dtmf(s.id, cfg_.id, *o->challenge);
      finish_outgoing(*o);
    }
    return;
  }
  if (auto* v = incoming_by_call(s.id); v && v->verification_call == s.id) {
    if (cfg_.profile.can_send_incall_dtmf) net_.send_dtmf(s.id, cfg_.id, v->challenge.digits());
  }
}

void Phone::on_held(const CallSession& s) {
  if (s.origin == cfg_.id) {
    if (auto* o = outgoing_by_initial(s.id)) o->initial_answered = false;
    return;
  }
  if (auto it = incoming_.find(s.id); it != incoming_.end() && !it->second.challenge_sent)
    send_challenge(it->second);
}

void Phone::on_resumed(const CallSession& s) {
  if (s.origin != cfg_.id) return;
  if (auto* o = outgoing_by_initial(s.id)) {
    o->initial_answered = true;
    if (o->challenge) respond(*o);
  }
}

void Phone::respond(Outgoing& o) {
  const std::string& response = *o.challenge;
  switch (o.variant) {
    case Variant::cli_dtmf:
    case Variant::dtmf_dtmf_2setup: {
      if (!o.initial_answered || !net_.live(o.initial)) return;  // sent once resumed
      if (auto* e = log_entry(o.initial)) e->response_start = net_.now();
      net_.send_dtmf(o.initial, cfg_.id, response);
      finish_outgoing(o);
      return;
    }
    case Variant::cli_cli: {
      CallerLine line{PhoneNumber::parse(response), std::string(kVerificationName), false};
      if (auto* e = log_entry(o.initial)) e->response_call = true;
      o.response_call = net_.place_call(cfg_.id, o.callee, line, CallOptions{{}, CallPurpose::response, std::nullopt});
      return;
    }
    case Variant::dtmf_dtmf_3setup: {
      CallerLine line = net_.session(o.initial).caller_line;
      line.name = cfg_.own_line.name;
      line.civ_flag = false;
      CallOptions opts{{}, CallPurpose::response, std::nullopt};
      if (!cfg_.profile.can_send_incall_dtmf) opts.dial_extension = response;
      if (auto* e = log_entry(o.initial)) e->response_call = true;
      o.response_call = net_.place_call(cfg_.id, o.callee, line, opts);
      return;
    }
  }
}

void Phone::on_dtmf_start(const CallSession& s) {
  if (auto* v = incoming_by_call(s.id); v && v->verification_call == s.id) {
    if (auto* e = log_entry(v->initial); e && !e->challenge_start) e->challenge_start = net_.now();
    return;
  }
  if (auto* o = outgoing_by_call(s.id); o && o->response_call == s.id) {
    if (auto* e = log_entry(o->initial)) e->response_start = net_.now();
    if (!s.options.dial_extension.empty()) finish_outgoing(*o);
  }
}

void Phone::on_dtmf(const CallSession& s, char symbol) {
  // Challenge arriving on a verification call this phone answered.
  if (auto* o = outgoing_by_call(s.id); o && o->verification_call == s.id) {
    o->collected.push_back(symbol);
    if (o->collected.size() < cfg_.challenge_length) return;
    o->challenge = o->collected;
    if (auto* e = log_entry(o->initial)) e->challenge_received = net_.now();
    net_.hangup(s.id, cfg_.id);
    if (o->variant == Variant::dtmf_dtmf_3setup) respond(*o);
    return;
  }
  // Response arriving on the initial call or on a response call.
  for (auto& [initial, v] : incoming_) {
    const bool on_initial = initial == s.id && v.variant != Variant::dtmf_dtmf_3setup;
    const bool on_response = v.response_call == s.id;
    if (!on_initial && !on_response) continue;
    v.collected.push_back(symbol);
    if (v.collected.size() >= v.challenge.size()) {
      const auto status = verify_response(v.challenge, v.collected);
      decide(initial, status, std::nullopt);
    }
    return;
  }
}

void Phone::on_ended(const CallSession& s) {
  if (s.origin == cfg_.id) {
    if (auto* o = outgoing_by_initial(s.id)) {
      o->initial_answered = false;
      // Terminated by a callee that verifies with three setups; the
      // exchange continues on new calls.
      if (o->variant != Variant::dtmf_dtmf_3setup) finish_outgoing(*o);
      return;
    }
    if (auto* v = incoming_by_call(s.id); v && v->verification_call == s.id) {
      // The caller hung up after taking the challenge.
      if (v->variant == Variant::dtmf_dtmf_2setup && v->initial_alive && net_.live(v->initial) &&
          net_.session(v->initial).state == CallState::held)
        net_.resume(v->initial, cfg_.id);
    }
    return;
  }
  if (auto it = incoming_.find(s.id); it != incoming_.end()) {
    it->second.initial_alive = false;
    decide(s.id, VerificationStatus::NotVerified, std::nullopt);
  }
}

void Phone::on_missed_call(const MissedCallEvent& ev) {
  Outgoing* caller_side = nullptr;
  const auto index = pbx_index_of(ev.displayed_name);
  for (auto& o : outgoing_) {
    if (o.done || o.challenge || (o.variant != Variant::cli_dtmf && o.variant != Variant::cli_cli)) continue;
    if (index && o.pbx_index && *index != *o.pbx_index) continue;
    caller_side = &o;
    break;
  }
  Incoming* callee_side = nullptr;
  for (auto& [initial, v] : incoming_) {
    if (v.variant == Variant::cli_cli && v.challenge_sent && v.verification_call &&
        !net_.live(*v.verification_call)) {
      callee_side = &v;
      break;
    }
  }

  RecognitionContext ctx{cfg_.challenge_length, caller_side || callee_side, cfg_.verification_marker};
  const auto r = recognize_verification_call(ev, ctx);
  if (r.kind == MissedCallClass::unsolicited && cfg_.civ_enabled) {
    ++filtered_;
    if (net_.trace().enabled())
      net_.trace().add(net_.now(), net_.endpoint_name(cfg_.id), "filtered", "cli=" + ev.displayed_cli.digits());
    return;
  }
  if (r.kind != MissedCallClass::challenge || !cfg_.civ_enabled) {
    ++ordinary_missed_;
    return;
  }
  if (caller_side) {
    caller_side->challenge = r.challenge->digits();
    if (auto* e = log_entry(caller_side->initial)) e->challenge_received = net_.now();
    respond(*caller_side);
    return;
  }
  if (auto* e = log_entry(callee_side->initial)) e->response_start = net_.now();
  decide(callee_side->initial, verify_response(callee_side->challenge, r.challenge->digits()), std::nullopt);
}

void Phone::decide(SessionId initial, VerificationStatus status, std::optional<SessionId>) {
  auto it = incoming_.find(initial);
  if (it == incoming_.end()) return;
  Incoming v = std::move(it->second);
  incoming_.erase(it);
  net_.queue().cancel(v.timeout);

  if (v.verification_call && net_.live(*v.verification_call)) net_.hangup(*v.verification_call, cfg_.id);

  // The user-facing call: the initial call while it lives, else the
  // response call.
  SessionId user = initial;
  bool alive = net_.live(initial);
  if (alive) {
    if (v.response_call && net_.live(*v.response_call)) net_.hangup(*v.response_call, cfg_.id);
    const auto& s = net_.session(initial);
    if (s.state == CallState::held) {
      if (net_.now() >= s.transition_until) {
        net_.resume(initial, cfg_.id);
      } else {
        net_.queue().schedule_at(s.transition_until, [this, initial] {
          if (net_.live(initial) && net_.session(initial).state == CallState::held) net_.resume(initial, cfg_.id);
        });
      }
    }
  } else if (v.response_call && net_.live(*v.response_call)) {
    user = *v.response_call;
    alive = true;
  }

  RingEvent ring{user, v.displayed, status,
                 status == VerificationStatus::Verified ? std::string{} : std::string(kUnverifiedWarning), alive,
                 net_.now()};
  if (auto* e = log_entry(initial)) {
    e->decided = net_.now();
    e->set_outcome(status);
    e->ring = ring;
  }
  rings_.push_back(ring);
  if (net_.trace().enabled())
    net_.trace().add(net_.now(), net_.endpoint_name(cfg_.id), "ring",
                     "id=" + std::to_string(user) + " status=" + std::string(to_string(status)) +
                         " alive=" + (alive ? "1" : "0"));

  active_by_number_.erase(v.displayed.number);
  next_in_queue(v.displayed.number);
}

void Phone::next_in_queue(const PhoneNumber& displayed) {
  auto it = queued_.find(displayed);
  if (it == queued_.end()) return;
  while (!it->second.empty()) {
    const auto id = it->second.front();
    it->second.pop_front();
    if (net_.live(id) && net_.session(id).state == CallState::ringing) {
      start_verification(net_.session(id));
      break;
    }
  }
  if (it->second.empty()) queued_.erase(it);
}

PbxAgent::PbxAgent(EndpointId id, signaling::Network& net, PbxState& state) : id_(id), net_(net), state_(state) {}

void PbxAgent::on_incoming(const CallSession&) {}

void PbxAgent::on_missed_call(const MissedCallEvent& ev) {
  const auto index = pbx_index_of(ev.displayed_name);
  if (!index) {
    ++dropped_;
    return;
  }
  try {
    const auto ext = state_.extension_for(*index);
    net_.relay_missed_call(ext, ev, from_ms(net_.calibration().pbx_forward_ms));
    ++forwarded_;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnknownIndex) throw;
    ++dropped_;
  }
}

}  // namespace civsim::civ
