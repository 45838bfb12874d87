#pragma once

// Abstract call control over heterogeneous networks. Everything runs on the
// simulation's event queue: operations change state synchronously and
// schedule the notifications the other party will observe.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "civsim/calibration.hpp"
#include "civsim/event_queue.hpp"
#include "civsim/topology.hpp"

namespace civsim::signaling {

using SessionId = std::uint64_t;
using EndpointId = std::size_t;

enum class CallState { dialing, ringing, answered, held, ended };
std::string_view to_string(CallState state);

// What a call is for. Only used for fault injection and bookkeeping; the
// network never inspects it when routing.
enum class CallPurpose { ordinary, initial, verification, response };
std::string_view to_string(CallPurpose purpose);

struct CallOptions {
  // Digits after the ',' of a dial string; sent automatically once the call
  // is answered and the caller's dial pause has elapsed.
  std::string dial_extension;
  CallPurpose purpose = CallPurpose::ordinary;
  // Set on calls carrying a challenge: the number the challenge is for. The
  // engine refuses to deliver it to any endpoint not owning that number.
  std::optional<PhoneNumber> challenge_for;
};

struct CallSession {
  SessionId id = 0;
  CallerLine caller_line;  // as presented by the originating endpoint
  PhoneNumber callee_number;
  EndpointId origin = 0;
  EndpointId terminating = 0;
  CallState state = CallState::dialing;
  std::vector<NetworkKind> path;
  std::vector<std::size_t> networks;  // topology network indices along the route
  std::size_t gateways = 0;
  bool charge_to_caller = false;
  CallOptions options;
  CallerLine displayed;  // what the callee sees, after any CNAM dip
  std::optional<EndpointId> held_by;
  SimTime transition_until{0};
  bool answer_pending = false;
};

struct MissedCallEvent {
  SessionId session = 0;
  EndpointId at = 0;
  PhoneNumber displayed_cli;
  std::string displayed_name;
  SimTime timestamp{0};
};

struct CnamRecord {
  PhoneNumber number;
  std::string registered_name;
  bool civ_flag = false;
};

class CnamDatabase {
 public:
  void add(CnamRecord record);  // replaces an existing record for the number
  std::optional<CnamRecord> lookup(const PhoneNumber& number);
  std::size_t dips() const noexcept { return dips_; }

 private:
  std::map<PhoneNumber, CnamRecord> records_;
  std::size_t dips_ = 0;
};

struct CallDetailRecord {
  SessionId session = 0;
  EndpointId origin = 0;  // the endpoint that really placed the call
  CallerLine presented;
  PhoneNumber dialed;
  EndpointId terminating = 0;
  CallPurpose purpose = CallPurpose::ordinary;
  SimTime start{0};
  std::optional<SimTime> answered;
  std::optional<SimTime> end;
  bool abandoned = false;
};

// A DTMF string in the representation native to one network.
struct DtmfPayload {
  dtmf::PathKind representation = dtmf::PathKind::digital_event;
  dtmf::AudioBuffer audio;          // analogue-inband
  dtmf::DtmfEventSequence events;   // digital-event and out-of-band
  dtmf::TimingConfig timing{};

  static DtmfPayload from_symbols(std::string_view symbols, NetworkKind kind,
                                  const dtmf::TimingConfig& timing);
  // Decodes audio; copies event values.
  std::string symbols() const;
};

// Re-encodes a payload for the next network. Analogue legs re-synthesize
// the tones and pass them through the leg's noise model.
DtmfPayload gateway_convert(const DtmfPayload& payload, NetworkKind from, NetworkKind to,
                            const dtmf::NoiseModel& leg_noise, Rng& rng);

enum class DtmfMode { in_call, dial_string_extension };

// Callbacks an endpoint agent receives. Defaults ignore the event.
class EndpointAgent {
 public:
  virtual ~EndpointAgent() = default;
  virtual void on_incoming(const CallSession&) {}
  virtual void on_ringback(const CallSession&) {}
  virtual void on_answered(const CallSession&) {}
  virtual void on_held(const CallSession&) {}
  virtual void on_resumed(const CallSession&) {}
  virtual void on_ended(const CallSession&) {}
  virtual void on_missed_call(const MissedCallEvent&) {}
  // Sender side: the first tone leaves now.
  virtual void on_dtmf_start(const CallSession&) {}
  virtual void on_dtmf(const CallSession&, char) {}
};

// Drops deliveries to exercise the never-block property.
struct FaultPlan {
  bool drop_challenge = false;  // anything sent on verification calls
  bool drop_response = false;   // DTMF on initial calls, anything on response calls
};

class Network {
 public:
  Network(const Topology& topology, const simnet::LatencyCalibration& calibration,
          simnet::EventQueue& queue, simnet::Trace& trace, Rng& rng);

  const Topology& topology() const noexcept { return topology_; }
  const simnet::LatencyCalibration& calibration() const noexcept { return calibration_; }
  simnet::EventQueue& queue() noexcept { return queue_; }
  simnet::Trace& trace() noexcept { return trace_; }
  SimTime now() const noexcept { return queue_.now(); }

  void attach(EndpointId endpoint, EndpointAgent* agent);
  void set_fault_plan(const FaultPlan& plan) { faults_ = plan; }

  civ::PlatformProfile profile(EndpointId endpoint) const;
  NetworkKind network_kind(EndpointId endpoint) const;
  const std::string& endpoint_name(EndpointId endpoint) const;

  // Own number, numbers forwarded to this endpoint, and the organisation
  // number of its PBX.
  bool owns(EndpointId endpoint, const PhoneNumber& number) const;

  // Throws Unroutable, Busy, InvalidState (caller without call waiting is
  // already in a call) or CapabilityMissing (presenting a number it does
  // not own from a platform that cannot modify the CLI).
  SessionId place_call(EndpointId from, const PhoneNumber& to, const CallerLine& presented,
                       CallOptions options = {});
  // Completes after the answering platform's answer latency.
  void answer(SessionId id);
  MissedCallEvent abandon_call(SessionId id);
  // Abandons when the caller hangs up an unanswered call; otherwise ends the
  // call and notifies the other party after the release latency.
  void hangup(SessionId id, EndpointId by);
  void hold(SessionId id, EndpointId by);
  void resume(SessionId id, EndpointId by);
  void send_dtmf(SessionId id, EndpointId from, std::string_view digits,
                 DtmfMode mode = DtmfMode::in_call);
  // PBX relay of a missed call to an extension behind it.
  void relay_missed_call(EndpointId to, MissedCallEvent event, SimDuration delay);

  const CallSession& session(SessionId id) const;
  bool live(SessionId id) const;
  // Any non-ended session involving the endpoint.
  bool in_call(EndpointId endpoint) const;

  const std::vector<CallDetailRecord>& cdrs() const noexcept { return cdrs_; }
  std::size_t charges(EndpointId endpoint) const { return charges_.at(endpoint); }
  std::size_t missed_calls(EndpointId endpoint) const { return missed_.at(endpoint); }
  std::size_t call_count() const noexcept { return sessions_.size(); }
  CnamDatabase& cnam() noexcept { return cnam_; }

  // Time DTMF spent in flight: first tone leaving to the last symbol being
  // recognised, summed over all transmissions.
  SimDuration dtmf_time() const noexcept { return dtmf_time_; }

 private:
  CallSession& mut(SessionId id);
  EndpointAgent* agent(EndpointId endpoint) const { return agents_.at(endpoint); }
  EndpointId resolve(const PhoneNumber& to, std::vector<std::size_t>& networks) const;
  void check_wall(const CallSession& s, EndpointId to) const;
  void deliver_dtmf(SessionId id, EndpointId from, const std::string& digits);
  std::string transport(const CallSession& s, const std::string& digits,
                        const dtmf::TimingConfig& timing);
  void record(EndpointId at, std::string event, std::string payload = {});
  bool tracing() const noexcept { return trace_.enabled(); }
  bool dropped(const CallSession& s) const;

  const Topology& topology_;
  const simnet::LatencyCalibration& calibration_;
  simnet::EventQueue& queue_;
  simnet::Trace& trace_;
  Rng& rng_;
  std::vector<EndpointAgent*> agents_;
  std::vector<civ::PlatformProfile> profiles_;
  std::vector<std::size_t> endpoint_network_;
  std::vector<std::vector<PhoneNumber>> owned_;
  std::map<SessionId, CallSession> sessions_;
  std::vector<CallDetailRecord> cdrs_;
  std::vector<std::size_t> charges_;
  std::vector<std::size_t> missed_;
  CnamDatabase cnam_;
  FaultPlan faults_;
  SessionId next_id_ = 1;
  SimDuration dtmf_time_{0};
};

}  // namespace civsim::signaling
