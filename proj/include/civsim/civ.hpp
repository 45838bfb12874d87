#pragma once

// The CIV protocol: variant selection, the caller and callee state
// machines running on each phone, and PBX index forwarding.

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "civsim/signaling.hpp"

namespace civsim::civ {

using signaling::EndpointId;
using signaling::SessionId;

enum class Variant { cli_dtmf, cli_cli, dtmf_dtmf_2setup, dtmf_dtmf_3setup };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view s);

// Preference order: cli-dtmf, cli-cli, dtmf-dtmf with two setups, then
// three. CLI challenges need a callee that can modify the CLI and a call
// that both sides can hold; DTMF responses on the held initial call need
// the caller to hold it too.
Variant select_variant(const PlatformProfile& caller, const PlatformProfile& callee);

// Whether the callee keeps the initial call on hold while verifying. With
// three setups and a party lacking call waiting, it is terminated instead.
bool callee_holds_initial(Variant v, const PlatformProfile& caller, const PlatformProfile& callee);

// Calls placed per verification, the initial call included.
std::size_t call_setups(Variant v);

inline constexpr SimDuration kChallengeTimeout = std::chrono::seconds(30);
inline constexpr std::string_view kVerificationName = "CIV";
inline constexpr std::string_view kUnverifiedWarning = "caller not verified";

struct Breakdown {
  SimDuration verification_call_setup{0};
  SimDuration challenge_transmit{0};
  SimDuration response_call_setup{0};
  SimDuration response_transmit{0};

  SimDuration total() const {
    return verification_call_setup + challenge_transmit + response_call_setup + response_transmit;
  }
  friend bool operator==(const Breakdown&, const Breakdown&) = default;
};

struct RingEvent {
  SessionId call = 0;  // the user-facing call
  CallerLine displayed;
  VerificationStatus status = VerificationStatus::NotAttempted;
  std::string warning;
  bool call_alive = true;
  SimTime at{0};
};

// Milestones observed during one verification. Missing milestones collapse
// onto the previous one so that the breakdown always sums to the total.
struct VerificationSession {
  SessionId initial_session = 0;
  EndpointId callee = 0;
  CallerLine displayed;
  std::optional<Challenge> challenge;
  Variant variant = Variant::cli_dtmf;
  bool response_call = false;
  SimTime started{0};
  std::optional<SimTime> challenge_start;
  std::optional<SimTime> challenge_received;
  std::optional<SimTime> response_start;
  std::optional<SimTime> decided;
  std::optional<RingEvent> ring;

  const std::optional<VerificationStatus>& outcome() const noexcept { return outcome_; }
  // Throws InvalidState when already set.
  void set_outcome(VerificationStatus status);

  Breakdown breakdown() const;
  SimDuration added_latency() const;

 private:
  std::optional<VerificationStatus> outcome_;
};

// Verification records of a run, shared by the agents as instrumentation.
class VerificationLog {
 public:
  VerificationSession& open(SessionId initial);
  VerificationSession* find(SessionId initial);
  const std::map<SessionId, VerificationSession>& sessions() const noexcept { return sessions_; }

 private:
  std::map<SessionId, VerificationSession> sessions_;
};

class PbxState {
 public:
  // Draws uniformly from 000-999, redrawing on collision with an active
  // index. Throws Exhausted when all 1000 are in use.
  template <class URBG>
  std::string register_outbound(EndpointId extension, URBG& rng) {
    if (active_.size() >= kCapacity) throw Error(ErrorCode::Exhausted, "all PBX indices in use");
    for (;;) {
      const auto index = static_cast<unsigned>(rng() % kCapacity);
      if (active_.emplace(index, extension).second) return format(index);
    }
  }
  void release(std::string_view index);
  // Throws UnknownIndex.
  EndpointId extension_for(std::string_view index) const;
  std::size_t active() const noexcept { return active_.size(); }

  static constexpr std::size_t kCapacity = 1000;
  static std::string format(unsigned index);

 private:
  std::map<unsigned, EndpointId> active_;
};

// "<org>#<idx>*" within the 15 character name limit.
std::string pbx_caller_name(std::string_view org_name, std::string_view index);
// The index carried after '#' in a caller name, if any.
std::optional<std::string> pbx_index_of(std::string_view name);

struct RecognitionContext {
  std::size_t challenge_length = kDefaultChallengeLength;
  bool verification_pending = false;
  bool accept_name_marker = false;
};

enum class MissedCallClass { challenge, ordinary, unsolicited };

struct Recognition {
  MissedCallClass kind = MissedCallClass::ordinary;
  std::optional<Challenge> challenge;
};

// Number-format rule: a nondialable short CLI of the expected length.
// Optionally also accepts a CLI of that length whose name carries the
// verification marker. Short CLIs arriving with nothing pending are
// unsolicited.
Recognition recognize_verification_call(const signaling::MissedCallEvent& event,
                                        const RecognitionContext& ctx);

struct PhoneConfig {
  EndpointId id = 0;
  PlatformProfile profile;
  CallerLine own_line;  // unflagged
  bool civ_enabled = true;
  std::size_t challenge_length = kDefaultChallengeLength;
  bool verification_marker = false;
  std::vector<PhoneNumber> civ_contacts;
  // Platform behind a number, used to agree on a variant with the peer.
  std::function<PlatformProfile(const PhoneNumber&)> directory;
  std::optional<Variant> variant_override;
  // Set on extensions behind a PBX.
  PbxState* pbx = nullptr;
  std::string org_name;
  PhoneNumber org_number;
};

// A phone running CIV on both the calling and the called side.
class Phone : public signaling::EndpointAgent {
 public:
  Phone(PhoneConfig config, signaling::Network& net, VerificationLog& log, Rng& rng);

  // Places a CIV-flagged call. `presented` defaults to the own number; an
  // extension behind a PBX presents the organisation number.
  SessionId call(const PhoneNumber& to, std::optional<PhoneNumber> presented = std::nullopt,
                 bool flagged = true);

  const std::vector<RingEvent>& rings() const noexcept { return rings_; }
  std::size_t filtered_unsolicited() const noexcept { return filtered_; }
  std::size_t ordinary_missed() const noexcept { return ordinary_missed_; }
  const PhoneConfig& config() const noexcept { return cfg_; }

  void on_incoming(const signaling::CallSession& s) override;
  void on_ringback(const signaling::CallSession& s) override;
  void on_answered(const signaling::CallSession& s) override;
  void on_held(const signaling::CallSession& s) override;
  void on_resumed(const signaling::CallSession& s) override;
  void on_ended(const signaling::CallSession& s) override;
  void on_missed_call(const signaling::MissedCallEvent& ev) override;
  void on_dtmf_start(const signaling::CallSession& s) override;
  void on_dtmf(const signaling::CallSession& s, char symbol) override;

 private:
  // Caller side: one outgoing CIV call awaiting its challenge.
  struct Outgoing {
    SessionId initial = 0;
    PhoneNumber callee;
    Variant variant = Variant::cli_dtmf;
    std::optional<std::string> pbx_index;
    bool initial_answered = false;  // media flowing on the initial call
    std::optional<SessionId> verification_call;
    std::string collected;
    std::optional<std::string> challenge;  // as received, possibly corrupted
    std::optional<SessionId> response_call;
    bool done = false;
  };
  // Callee side: one verification in progress.
  struct Incoming {
    Incoming(SessionId id, CallerLine line, Variant v, Challenge c, bool holds)
        : initial(id), displayed(std::move(line)), variant(v), challenge(std::move(c)), holds_initial(holds) {}

    SessionId initial = 0;
    CallerLine displayed;
    Variant variant = Variant::cli_dtmf;
    Challenge challenge;
    bool holds_initial = true;
    bool initial_alive = true;
    std::optional<SessionId> verification_call;
    bool challenge_sent = false;
    std::optional<SessionId> response_call;
    std::string collected;
    simnet::EventQueue::EventId timeout = 0;
  };

  void start_verification(const signaling::CallSession& s);
  void send_challenge(Incoming& v);
  void decide(SessionId initial, VerificationStatus status, std::optional<SessionId> user_call);
  void ring_unverified(const signaling::CallSession& s, VerificationStatus status, std::string warning);
  void respond(Outgoing& o);
  void next_in_queue(const PhoneNumber& displayed);
  Outgoing* outgoing_by_initial(SessionId id);
  Outgoing* outgoing_by_call(SessionId id);
  Outgoing* outgoing_awaiting_call_from(const PhoneNumber& number);
  Incoming* incoming_by_call(SessionId id);
  void finish_outgoing(Outgoing& o);
  VerificationSession* log_entry(SessionId initial) { return log_.find(initial); }
  bool is_verification_cli(const CallerLine& line) const;

  PhoneConfig cfg_;
  signaling::Network& net_;
  VerificationLog& log_;
  Rng& rng_;
  std::vector<Outgoing> outgoing_;
  std::map<SessionId, Incoming> incoming_;
  std::map<PhoneNumber, SessionId> active_by_number_;
  std::map<PhoneNumber, std::deque<SessionId>> queued_;
  std::vector<RingEvent> rings_;
  std::size_t filtered_ = 0;
  std::size_t ordinary_missed_ = 0;
};

// Organisation switch: forwards challenges addressed to the organisation
// number to the extension named by the index echoed in the caller name.
class PbxAgent : public signaling::EndpointAgent {
 public:
  PbxAgent(EndpointId id, signaling::Network& net, PbxState& state);

  void on_missed_call(const signaling::MissedCallEvent& ev) override;
  void on_incoming(const signaling::CallSession& s) override;

  std::size_t forwarded() const noexcept { return forwarded_; }
  std::size_t dropped() const noexcept { return dropped_; }

 private:
  EndpointId id_;
  signaling::Network& net_;
  PbxState& state_;
  std::size_t forwarded_ = 0;
  std::size_t dropped_ = 0;
};

}  // namespace civsim::civ
