#pragma once

// The simulation engine: one run wires a topology, a calibration and a seed
// into a network with an agent per endpoint, drives it to quiescence and
// collects metrics. Adversaries are agents too, confined by the network's
// capability wall.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "civsim/civ.hpp"

namespace civsim::simnet {

using signaling::EndpointId;
using signaling::SessionId;

inline constexpr std::string_view kScenarioSchema = "civsim.scenario/1";
inline constexpr std::uint64_t kDefaultSeed = 20240917;
inline constexpr SimDuration kRunHorizon = std::chrono::minutes(30);

enum class AdversaryKind { spoof_and_guess, downgrade, reflected_dos };
std::string_view to_string(AdversaryKind k);
AdversaryKind adversary_kind_from_string(std::string_view s);

struct AdversaryStrategy {
  AdversaryKind kind = AdversaryKind::spoof_and_guess;
  std::string attacker = "mallory";
  std::string victim = "victim";  // owner of the spoofed number
  std::vector<std::string> targets{"target"};
  std::size_t n_guess_digits = kDefaultChallengeLength;
  // How long the attacker waits after its call is held before sending a
  // response on a new call (cli-cli and three-setup variants).
  double guess_delay_ms = 15000.0;
  // reflected-dos: calls per second and the time the attacker stays on
  // the line once its call has been resumed.
  double rate_per_s = 1.0;
  double linger_ms = 1000.0;

  jsonio::json to_json() const;
  static AdversaryStrategy from_json(const jsonio::json& j, const std::string& path);
};

struct Scenario {
  std::string name;
  // Either a topology file (relative paths resolve against the scenario
  // file) or a generated caller/callee pair.
  std::optional<std::filesystem::path> topology_path;
  std::optional<std::pair<civ::ProfileName, civ::ProfileName>> pair;
  std::string caller = "alice";
  std::string callee = "bob";
  std::optional<PhoneNumber> present_number;
  std::optional<AdversaryStrategy> adversary;
  std::optional<civ::Variant> variant;
  std::optional<std::size_t> challenge_length;
  std::size_t repeat = 1;
  std::uint64_t seed = kDefaultSeed;
  signaling::FaultPlan faults;
  bool trace = true;

  static Scenario from_json(const jsonio::json& doc, const std::filesystem::path& base_dir = {});
  static Scenario load(const std::filesystem::path& path);
  jsonio::json to_json() const;

  signaling::Topology resolve_topology() const;
  // Checks endpoints against the topology; throws ConfigError.
  void validate(const signaling::Topology& topology) const;
};

struct SimOptions {
  std::optional<civ::Variant> variant;
  std::optional<std::size_t> challenge_length;
  bool trace = true;
  signaling::FaultPlan faults;
  // Endpoints that get no phone; the caller attaches its own agent.
  std::set<std::string> unmanaged;
};

class Simulation {
 public:
  Simulation(const signaling::Topology& topology, const LatencyCalibration& calibration, std::uint64_t seed,
             const SimOptions& options = {});
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  signaling::Network& network() noexcept { return net_; }
  EventQueue& queue() noexcept { return queue_; }
  Trace& trace() noexcept { return trace_; }
  Rng& rng() noexcept { return rng_; }
  civ::VerificationLog& log() noexcept { return log_; }
  const signaling::Topology& topology() const noexcept { return topology_; }

  EndpointId endpoint(std::string_view id) const { return topology_.endpoint_index(id); }
  civ::Phone& phone(std::string_view id);
  void attach(EndpointId endpoint, std::unique_ptr<signaling::EndpointAgent> agent);
  // Calibrated platform of whoever owns the number; SIP when nobody does.
  civ::PlatformProfile directory(const PhoneNumber& number) const;

  // Runs until the queue drains or the horizon passes.
  void run(SimDuration horizon = kRunHorizon);
  std::size_t filtered_total() const;

 private:
  const signaling::Topology& topology_;
  const LatencyCalibration& calibration_;
  Rng rng_;
  EventQueue queue_;
  Trace trace_;
  signaling::Network net_;
  civ::VerificationLog log_;
  std::vector<std::unique_ptr<civ::PbxState>> pbx_states_;
  std::vector<std::unique_ptr<signaling::EndpointAgent>> agents_;
  std::vector<civ::Phone*> phones_;  // by endpoint, null when not a phone
};

// Adversary agent. It may spoof any CLI its platform lets it set, but it
// only ever receives what the network routes to numbers it owns.
class Attacker : public signaling::EndpointAgent {
 public:
  Attacker(EndpointId id, signaling::Network& net, Rng& rng, AdversaryStrategy strategy, civ::Variant variant,
           CallerLine spoofed);

  SessionId spoof_call(const PhoneNumber& target);
  const std::vector<SessionId>& placed() const noexcept { return placed_; }
  std::size_t guesses() const noexcept { return guesses_; }

  void on_held(const signaling::CallSession& s) override;
  void on_resumed(const signaling::CallSession& s) override;
  void on_ended(const signaling::CallSession& s) override;
  void on_ringback(const signaling::CallSession& s) override;
  void on_answered(const signaling::CallSession& s) override;

 private:
  bool is_initial(SessionId id) const;
  void schedule_response_call(SessionId initial);

  EndpointId id_;
  signaling::Network& net_;
  Rng& rng_;
  AdversaryStrategy strategy_;
  civ::Variant variant_;
  CallerLine spoofed_;
  std::vector<SessionId> placed_;
  std::set<SessionId> responded_;
  std::set<SessionId> guess_calls_;
  std::size_t guesses_ = 0;
};

struct RunMetrics {
  std::string caller;
  std::string callee;
  std::optional<civ::Variant> variant;
  std::optional<VerificationStatus> outcome;
  std::string warning;
  bool rang = false;
  bool call_alive = false;
  SimDuration total{0};
  civ::Breakdown breakdown;
  std::size_t call_setups = 0;
  std::vector<std::pair<std::string, std::size_t>> charges;
  std::vector<signaling::CallDetailRecord> cdrs;
  SimDuration dtmf_time{0};
  std::size_t filtered_unsolicited = 0;
  std::size_t cnam_dips = 0;

  // One structured document per run.
  jsonio::json to_json(const signaling::Topology& topology) const;
};

struct RunResult {
  RunMetrics metrics;
  Trace trace;
};

// Honest run of the scenario's caller calling its callee, or one trial of
// its adversary strategy.
RunResult run_scenario(const signaling::Topology& topology, const Scenario& scenario,
                       const LatencyCalibration& calibration, std::uint64_t seed);

// Throws NotApplicable for runs that never attempted verification.
civ::Breakdown latency_breakdown(const RunMetrics& metrics);

// A verification call CDR paired with the spoofed call that triggered it.
struct CdrPair {
  std::size_t spoofed;       // index into the CDR log
  std::size_t verification;  // index into the CDR log
};

// Pairs every abandoned short-CLI call to the victim with the call that
// presented the victim's number to that call's originator and was still
// up when the verification call was placed.
std::vector<CdrPair> correlate_reflections(const std::vector<signaling::CallDetailRecord>& cdrs,
                                           EndpointId victim, const PhoneNumber& victim_number);

struct AttackStats {
  AdversaryKind kind = AdversaryKind::spoof_and_guess;
  std::size_t trials = 0;
  std::size_t verified = 0;
  std::size_t not_verified = 0;
  std::size_t not_attempted = 0;
  std::size_t warnings = 0;
  std::size_t rings = 0;
  std::size_t alive_rings = 0;
  double expected_rate = 0.0;
  double rate = 0.0;
  double ci_low = 0.0;   // Wilson interval at z = 3
  double ci_high = 0.0;
  // reflected-dos
  std::size_t reflected_calls = 0;
  std::size_t victim_missed_calls = 0;
  std::size_t victim_filtered = 0;
  std::size_t cdr_pairs = 0;
  std::size_t traced_to_attacker = 0;
};

AttackStats run_attack(const signaling::Topology& topology, const AdversaryStrategy& strategy, std::size_t trials,
                       std::uint64_t seed, const LatencyCalibration& calibration, unsigned jobs = 1);

// Wilson score interval for k successes out of n at the given z.
std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double z);

}  // namespace civsim::simnet
