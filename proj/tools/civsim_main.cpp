// civsim: run scenarios, sweeps, attack campaigns and the calibration fit.

#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "civsim/harness.hpp"

namespace {

using namespace civsim;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

harness::ProfilePair parse_pair(const std::string& s) {
  const auto parts = split(s, ':');
  if (parts.size() != 2) throw Error(ErrorCode::ConfigError, "pair '" + s + "' is not <caller>:<callee>");
  return {civ::profile_from_string(parts[0]), civ::profile_from_string(parts[1])};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Caller identity verification simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  harness::CommonOptions common;
  std::uint64_t seed = 0;
  std::string calibration, topology, out;
  auto* seed_opt = app.add_option("--seed", seed, "Base seed (default: the scenario's, else 20240917)");
  app.add_option("--calibration", calibration, "Latency calibration file (default: data/calibration.json)");
  app.add_option("--topology", topology, "Topology file, overriding the scenario's");
  app.add_option("--out", out, "Report path; .csv or .json, or a stem for both");
  app.add_option("--jobs", common.jobs, "Worker threads")->check(CLI::Range(1u, 256u));

  auto* run = app.add_subcommand("run", "Run a scenario file");
  std::string scenario_path;
  run->add_option("scenario", scenario_path, "Scenario file")->required();

  auto* sweep_n = app.add_subcommand("sweep-n", "DTMF transmission time against challenge length");
  std::string sweep_scenario;
  std::vector<std::string> pair_args;
  std::size_t n_min = 1, n_max = 8;
  sweep_n->add_option("--scenario", sweep_scenario, "Sweep one scenario instead of profile pairs");
  sweep_n->add_option("--pairs", pair_args, "caller:callee profile pairs (default: all nine)")->delimiter(',');
  sweep_n->add_option("--n-min", n_min, "Smallest challenge length");
  sweep_n->add_option("--n-max", n_max, "Largest challenge length");

  auto* sweep_ms = app.add_subcommand("sweep-markspace", "DTMF decode success against mark and space");
  std::vector<double> marks{20, 30, 40, 50, 60, 80, 100};
  std::vector<double> spaces{50, 100, 150};
  std::size_t ms_trials = 20;
  sweep_ms->add_option("--marks", marks, "Mark durations in ms")->delimiter(',');
  sweep_ms->add_option("--spaces", spaces, "Space durations in ms")->delimiter(',');
  sweep_ms->add_option("--trials", ms_trials, "Codes per point (at least 20)");

  auto* attack = app.add_subcommand("attack", "Adversary campaign");
  simnet::AdversaryStrategy strategy;
  std::string kind = "spoof-and-guess", strategy_file;
  std::vector<std::string> targets;
  std::size_t attack_trials = 1000;
  attack->add_option("--kind", kind, "spoof-and-guess, downgrade or reflected-dos");
  attack->add_option("--strategy", strategy_file, "Strategy file; other strategy flags override it");
  attack->add_option("--trials", attack_trials, "Trials (calls, for reflected-dos)");
  auto* digits_opt = attack->add_option("--guess-digits", strategy.n_guess_digits, "Digits per guess");
  auto* attacker_opt = attack->add_option("--attacker", strategy.attacker, "Attacker endpoint");
  auto* victim_opt = attack->add_option("--victim", strategy.victim, "Endpoint whose number is spoofed");
  attack->add_option("--targets", targets, "Target endpoints")->delimiter(',');
  auto* rate_opt = attack->add_option("--rate", strategy.rate_per_s, "reflected-dos calls per second");

  auto* fit = app.add_subcommand("fit-calibration", "Fit the latency calibration to target totals");
  std::string targets_path = (harness::data_dir() / "targets.json").string();
  std::string bounds_path = (harness::data_dir() / "bounds.json").string();
  fit->add_option("--targets", targets_path, "Target totals");
  fit->add_option("--bounds", bounds_path, "Parameter bounds and priors");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*seed_opt) common.seed = seed;
    if (!calibration.empty()) common.calibration = calibration;
    if (!topology.empty()) common.topology = topology;
    if (!out.empty()) common.out = out;

    harness::Report report;
    if (*run) {
      report = harness::cmd_run(scenario_path, common);
    } else if (*sweep_n) {
      std::vector<harness::ProfilePair> pairs;
      for (const auto& p : pair_args) pairs.push_back(parse_pair(p));
      std::optional<std::filesystem::path> sc;
      if (!sweep_scenario.empty()) sc = sweep_scenario;
      report = harness::cmd_sweep_n(sc, pairs, n_min, n_max, common);
    } else if (*sweep_ms) {
      report = harness::cmd_sweep_markspace(marks, spaces, ms_trials, common);
    } else if (*attack) {
      simnet::AdversaryStrategy st;
      if (!strategy_file.empty()) st = simnet::AdversaryStrategy::from_json(jsonio::load_file(strategy_file), "");
      if (!attack->get_option("--kind")->empty() || strategy_file.empty())
        st.kind = simnet::adversary_kind_from_string(kind);
      if (*digits_opt) st.n_guess_digits = strategy.n_guess_digits;
      if (*attacker_opt) st.attacker = strategy.attacker;
      if (*victim_opt) st.victim = strategy.victim;
      if (*rate_opt) st.rate_per_s = strategy.rate_per_s;
      if (!targets.empty()) st.targets = targets;
      report = harness::cmd_attack(st, attack_trials, common);
    } else if (*fit) {
      report = harness::cmd_fit_calibration(targets_path, bounds_path, common);
    }
    std::cout << report.to_csv();
  } catch (const civsim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
