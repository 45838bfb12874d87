// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <thread>

#include "civsim/harness.hpp"

using namespace civsim;
using namespace civsim::simnet;
using civ::ProfileName;
using civ::Variant;
using harness::Report;
using signaling::Topology;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

const LatencyCalibration& shipped() {
  static const auto cal = LatencyCalibration::load(harness::data_dir() / "calibration.json");
  return cal;
}

Topology attack_topology() { return Topology::load(harness::data_dir() / "topologies" / "attack.json"); }

RunMetrics honest(ProfileName a, ProfileName b, std::optional<Variant> v, const LatencyCalibration& cal,
                  std::uint64_t seed, std::optional<std::size_t> n = std::nullopt) {
  Scenario sc;
  sc.pair = std::make_pair(a, b);
  sc.variant = v;
  sc.challenge_length = n;
  sc.trace = false;
  return run_scenario(sc.resolve_topology(), sc, cal, seed).metrics;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Positive calibration drawn from the ranges under which setup dominates
// every other component.
LatencyCalibration random_calibration(Rng& rng) {
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  LatencyCalibration c;
  for (auto& row : c.call_setup_ms)
    for (auto& v : row) v = u(2500.0, 10000.0);
  for (auto& v : c.answer_ms) v = u(1.0, 300.0);
  c.hold_toggle_ms = u(1.0, 300.0);
  c.release_ms = u(1.0, 100.0);
  for (auto& p : c.dtmf_path) p = {u(1.0, 100.0), u(1.0, 100.0)};
  for (auto& v : c.dtmf_recognition_delay_ms) v = u(1.0, 50.0);
  c.gateway_conversion_ms = u(1.0, 100.0);
  c.cnam_lookup_ms = u(1.0, 100.0);
  c.pbx_forward_ms = u(1.0, 100.0);
  c.noise_snr_db = shipped().noise_snr_db;
  return c;
}

// 1. 10^6 spoofed calls guessing a 4-digit challenge.
Outcome guess_attack() {
  const auto t0 = Clock::now();
  AdversaryStrategy st;
  st.n_guess_digits = 4;
  const auto stats = run_attack(attack_topology(), st, 1'000'000, kDefaultSeed, shipped(), workers());
  const double secs = seconds_since(t0);
  const bool ok = stats.verified >= 70 && stats.verified <= 130 && secs < 120.0;
  return {ok, fmt("verified %zu of %zu, want [70, 130]; %.1f s, want < 120 s", stats.verified, stats.trials, secs)};
}

// 2. Honest callers verify on every pair.
Outcome completeness() {
  std::size_t verified = 0, runs = 0;
  for (auto a : civ::kAllProfiles)
    for (auto b : civ::kAllProfiles)
      for (std::uint64_t k = 0; k < 100; ++k) {
        ++runs;
        if (honest(a, b, std::nullopt, shipped(), derive_seed(kDefaultSeed, k)).outcome == VerificationStatus::Verified)
          ++verified;
      }
  return {verified == 900 && runs == 900, fmt("%zu/%zu Verified, want 900/900", verified, runs)};
}

// 3. Fitted totals against the published values.
Outcome latency_totals() {
  struct Case {
    const char* name;
    ProfileName a, b;
    std::optional<Variant> v;
    double ms;
  };
  const Case cases[] = {
      {"sip cli-dtmf", ProfileName::sip, ProfileName::sip, Variant::cli_dtmf, 4700.0},
      {"sip dtmf-dtmf", ProfileName::sip, ProfileName::sip, Variant::dtmf_dtmf_2setup, 5700.0},
      {"sip cli-cli", ProfileName::sip, ProfileName::sip, Variant::cli_cli, 6800.0},
      {"landline-landline", ProfileName::landline_truecall, ProfileName::landline_truecall, std::nullopt, 13000.0},
      {"cellular-cellular", ProfileName::cellular, ProfileName::cellular, std::nullopt, 20000.0},
      {"landline-cellular", ProfileName::landline_truecall, ProfileName::cellular, std::nullopt, 29000.0},
      {"cellular-landline", ProfileName::cellular, ProfileName::landline_truecall, std::nullopt, 29000.0},
  };
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    const auto m = honest(c.a, c.b, c.v, shipped(), kDefaultSeed);
    const double got = to_ms(m.total);
    const double rel = (got - c.ms) / c.ms;
    const bool pass = m.outcome == VerificationStatus::Verified && std::abs(rel) <= 0.05;
    ok &= pass;
    detail += fmt("%s%s %.0f/%.0f ms (%+.2f%%)%s", detail.empty() ? "" : ", ", c.name, got, c.ms, 100.0 * rel,
                  pass ? "" : " OUT");
  }
  return {ok, detail + "; tolerance 5%"};
}

// 4. Variant ordering without the fitted calibration.
Outcome ordering() {
  Rng rng(derive_seed(kDefaultSeed, 4));
  std::size_t hold = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto cal = random_calibration(rng);
    const auto seed = derive_seed(kDefaultSeed, 4000 + static_cast<std::uint64_t>(i));
    const auto a = honest(ProfileName::sip, ProfileName::sip, Variant::cli_dtmf, cal, seed);
    const auto b = honest(ProfileName::sip, ProfileName::sip, Variant::dtmf_dtmf_2setup, cal, seed);
    const auto c = honest(ProfileName::sip, ProfileName::sip, Variant::cli_cli, cal, seed);
    const bool verified = a.outcome == VerificationStatus::Verified && b.outcome == VerificationStatus::Verified &&
                          c.outcome == VerificationStatus::Verified;
    if (verified && a.total < b.total && b.total < c.total) ++hold;
  }
  return {hold == 1000, fmt("cli-dtmf < dtmf-dtmf-2setup < cli-cli in %zu/1000 random calibrations, want 1000", hold)};
}

// 5. Breakdown components add up.
Outcome breakdown() {
  Rng rng(derive_seed(kDefaultSeed, 5));
  std::uniform_int_distribution<std::size_t> pick(0, 2), len(1, 8);
  std::bernoulli_distribution coin(0.5);
  std::size_t sums = 0, cli_dtmf = 0, cli_dtmf_ok = 0, three = 0, three_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto cal = coin(rng) ? shipped() : random_calibration(rng);
    const auto a = civ::kAllProfiles[pick(rng)];
    const auto b = civ::kAllProfiles[pick(rng)];
    const auto m = honest(a, b, std::nullopt, cal, rng(), len(rng));
    const auto br = latency_breakdown(m);
    if (br.total() == m.total) ++sums;
    if (m.variant == Variant::cli_dtmf) {
      ++cli_dtmf;
      if (br.challenge_transmit.count() == 0) ++cli_dtmf_ok;
    }
    if (m.variant == Variant::dtmf_dtmf_3setup) {
      ++three;
      if (br.response_call_setup.count() > 0) ++three_ok;
    }
  }
  const bool ok = sums == 1000 && cli_dtmf > 0 && cli_dtmf_ok == cli_dtmf && three > 0 && three_ok == three;
  return {ok, fmt("exact sums %zu/1000; cli-dtmf zero challenge %zu/%zu; 3-setup positive response setup %zu/%zu",
                  sums, cli_dtmf_ok, cli_dtmf, three_ok, three)};
}

// 6. DTMF reliability through the calibrated noisy line.
Outcome reliability() {
  const double snr = shipped().noise_snr_db;
  const auto& spec = NoiseCalibrationSpec{};
  const auto p60_150 = markspace_successes(60, 150, snr, 20, spec.seed);
  const auto p60_100 = markspace_successes(60, 100, snr, 20, spec.seed);
  const auto p50_150 = markspace_successes(50, 150, snr, 20, spec.seed);
  bool monotone = true;
  std::string curve;
  for (double space : {100.0, 150.0}) {
    std::size_t prev = 0;
    curve += fmt("%sspace %.0f:", curve.empty() ? "" : "; ", space);
    for (double mark : {20.0, 30.0, 40.0, 50.0, 60.0, 80.0, 100.0}) {
      const auto ok = markspace_successes(mark, space, snr, 200, kDefaultSeed);
      monotone &= ok >= prev;
      prev = ok;
      curve += fmt(" %zu", ok);
    }
  }
  const bool ok = p60_150 == 20 && p60_100 == 20 && p50_150 < 20 && monotone;
  return {ok, fmt("SNR %.2f dB; 60/150 %zu/20, 60/100 %zu/20, 50/150 %zu/20 (want 20, 20, < 20); "
                  "successes of 200 by mark (%s) %s",
                  snr, p60_150, p60_100, p50_150, curve.c_str(), monotone ? "non-decreasing" : "NOT monotone")};
}

// 7. Transmission time is linear in the challenge length.
Outcome linearity() {
  const auto r = harness::cmd_sweep_n(std::nullopt, {}, 1, 8, {});
  bool ok = true;
  double sip_slope = 0.0, min_analogue = 1e300, min_r2 = 1.0;
  std::size_t fits = 0;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    if (harness::as_string(r.at(i, "row")) != "fit") continue;
    ++fits;
    const auto a = harness::as_string(r.at(i, "caller"));
    const auto b = harness::as_string(r.at(i, "callee"));
    const double slope = harness::as_double(r.at(i, "slope_ms_per_digit"));
    const double r2 = harness::as_double(r.at(i, "r_squared"));
    min_r2 = std::min(min_r2, r2);
    ok &= r2 > 0.99;
    if (a == "sip" && b == "sip") sip_slope = slope;
    if (a == "landline-truecall" || b == "landline-truecall") min_analogue = std::min(min_analogue, slope);
  }
  ok &= fits == 9 && sip_slope > 0.0 && sip_slope < min_analogue;
  return {ok, fmt("%zu pairs, min R^2 %.6f (want > 0.99); sip-sip slope %.2f ms/digit < smallest analogue-leg "
                  "slope %.2f ms/digit",
                  fits, min_r2, sip_slope, min_analogue)};
}

// 8. Unflagged spoofed calls never verify and never block.
Outcome downgrade() {
  AdversaryStrategy st;
  st.kind = AdversaryKind::downgrade;
  const auto s = run_attack(attack_topology(), st, 1000, kDefaultSeed, shipped(), workers());
  const bool ok = s.verified == 0 && s.not_attempted == 1000 && s.warnings == 1000 && s.rings == 1000;
  return {ok, fmt("Verified %zu (want 0); NotAttempted %zu, warned %zu, rang %zu (want 1000 each)", s.verified,
                  s.not_attempted, s.warnings, s.rings)};
}

// 9. Reflected verification calls are filtered and traceable.
Outcome reflected_dos() {
  AdversaryStrategy st;
  st.kind = AdversaryKind::reflected_dos;
  st.targets = {"target", "reflector1", "reflector2", "reflector3"};
  const auto s = run_attack(attack_topology(), st, 100, kDefaultSeed, shipped());
  const bool ok = s.reflected_calls == 100 && s.victim_filtered == 100 && s.cdr_pairs == 100 &&
                  s.traced_to_attacker == 100;
  return {ok, fmt("%zu spoofed calls; victim filtered %zu, CDR pairs %zu, traced to the attacker %zu (want 100 each)",
                  s.reflected_calls, s.victim_filtered, s.cdr_pairs, s.traced_to_attacker)};
}

// 10. Same seed, same bytes.
Outcome determinism() {
  std::vector<std::pair<std::string, std::function<std::string()>>> runs;
  const auto scenarios = harness::data_dir() / "scenarios";
  for (const char* name : {"noisy-landline.json", "reflected-dos.json", "pbx.json", "landline-cellular.json"}) {
    runs.emplace_back(name, [path = scenarios / name] {
      auto sc = Scenario::load(path);
      sc.repeat = 1;
      const auto topology = sc.resolve_topology();
      const auto r = run_scenario(topology, sc, shipped(), sc.seed);
      return r.trace.to_text() + r.metrics.to_json(topology).dump() + harness::cmd_run(sc, {}).to_csv();
    });
  }
  runs.emplace_back("attack", [] {
    harness::CommonOptions opts;
    opts.jobs = workers();
    AdversaryStrategy st;
    return harness::cmd_attack(st, 20000, opts).to_json_text();
  });
  runs.emplace_back("sweep-n", [] { return harness::cmd_sweep_n(std::nullopt, {}, 1, 8, {}).to_csv(); });
  runs.emplace_back("sweep-markspace",
                    [] { return harness::cmd_sweep_markspace({40, 50, 60}, {100, 150}, 20, {}).to_csv(); });
  std::size_t same = 0;
  std::string diffs;
  for (const auto& [name, fn] : runs) {
    if (fn() == fn()) ++same;
    else diffs += " " + name;
  }
  // Thread count must not matter either.
  harness::CommonOptions one, many;
  many.jobs = 4;
  const bool jobs_same = harness::cmd_attack({}, 5000, one).to_csv() == harness::cmd_attack({}, 5000, many).to_csv();
  return {same == runs.size() && jobs_same,
          fmt("%zu/%zu repeated runs byte-identical%s; 1 vs 4 workers %s", same, runs.size(),
              diffs.empty() ? "" : (" (differ:" + diffs + ")").c_str(), jobs_same ? "identical" : "DIFFER")};
}

}  // namespace

int main() {
  const std::pair<const char*, Outcome (*)()> criteria[] = {
      {"guess-attack bound", guess_attack}, {"completeness", completeness},
      {"latency totals", latency_totals},   {"variant ordering", ordering},
      {"breakdown accounting", breakdown},  {"DTMF reliability", reliability},
      {"linearity in n", linearity},        {"downgrade attack", downgrade},
      {"DoS traceability", reflected_dos},  {"determinism", determinism},
  };
  int failures = 0;
  int index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failures;
}
