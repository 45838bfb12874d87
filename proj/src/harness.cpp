#include "civsim/harness.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <thread>

namespace civsim::harness {

using jsonio::json;
using simnet::Scenario;

namespace {

Cell opt_string(const std::optional<std::string>& s) {
  if (s) return *s;
  return std::monostate{};
}

std::filesystem::path output_stem(const std::filesystem::path& out) {
  const auto ext = out.extension().string();
  if (ext == ".csv" || ext == ".json") {
    auto p = out;
    p.replace_extension();
    return p;
  }
  return out;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  f << text;
  if (!f) throw Error(ErrorCode::ConfigError, "cannot write " + p.string());
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, std::string_view suffix) {
  auto p = stem;
  p += suffix;
  return p;
}

std::uint64_t seed_or(const CommonOptions& opts, std::uint64_t fallback) { return opts.seed.value_or(fallback); }

}  // namespace

std::filesystem::path data_dir() { return CIVSIM_DATA_DIR; }

simnet::LatencyCalibration load_calibration(const CommonOptions& opts) {
  return simnet::LatencyCalibration::load(opts.calibration.value_or(simnet::default_calibration_path()));
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw Error(ErrorCode::InvalidLength, "a line fit needs at least two matching points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error(ErrorCode::InvalidLength, "a line fit needs two distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += e * e;
  }
  // Residuals at rounding level count as a perfect fit.
  const double scale = std::max(1.0, syy);
  f.r_squared = ss_res <= 1e-18 * scale * n ? 1.0 : 1.0 - ss_res / syy;
  return f;
}

Report cmd_run(const std::filesystem::path& scenario_path, const CommonOptions& opts) {
  return cmd_run(Scenario::load(scenario_path), opts);
}

Report cmd_run(const Scenario& scenario, const CommonOptions& opts) {
  Scenario sc = scenario;
  if (opts.seed) sc.seed = *opts.seed;
  if (opts.topology) {
    sc.topology_path = *opts.topology;
    sc.pair.reset();
  }
  const auto topology = sc.resolve_topology();
  sc.validate(topology);
  const auto cal = load_calibration(opts);

  std::vector<std::optional<simnet::RunResult>> results(sc.repeat);
  parallel_for(sc.repeat, opts.jobs, [&](std::size_t k) {
    results[k] = simnet::run_scenario(topology, sc, cal, derive_seed(sc.seed, k));
  });

  Report r("run", {"row", "run", "seed", "caller", "callee", "variant", "outcome", "warning", "rang", "call_alive",
                   "total_ms", "verification_call_setup_ms", "challenge_transmit_ms", "response_call_setup_ms",
                   "response_transmit_ms", "call_setups", "dtmf_ms"});
  r.meta = {{"scenario", sc.name}, {"seed", sc.seed}, {"repeat", sc.repeat}};

  double sums[7] = {};
  for (std::size_t k = 0; k < sc.repeat; ++k) {
    const auto& m = results[k]->metrics;
    const double vals[7] = {to_ms(m.total),
                            to_ms(m.breakdown.verification_call_setup),
                            to_ms(m.breakdown.challenge_transmit),
                            to_ms(m.breakdown.response_call_setup),
                            to_ms(m.breakdown.response_transmit),
                            static_cast<double>(m.call_setups),
                            to_ms(m.dtmf_time)};
    for (int i = 0; i < 7; ++i) sums[i] += vals[i];
    r.add_row({std::string("run"), static_cast<std::int64_t>(k), std::to_string(derive_seed(sc.seed, k)), m.caller,
               m.callee, m.variant ? Cell(std::string(civ::to_string(*m.variant))) : Cell(),
               m.outcome ? Cell(std::string(to_string(*m.outcome))) : Cell(), m.warning,
               static_cast<std::int64_t>(m.rang), static_cast<std::int64_t>(m.call_alive), vals[0], vals[1], vals[2],
               vals[3], vals[4], static_cast<std::int64_t>(m.call_setups), vals[6]});
  }
  if (sc.repeat > 1) {
    const double n = static_cast<double>(sc.repeat);
    const auto& first = results.front()->metrics;
    std::optional<std::string> variant;
    if (first.variant) variant = std::string(civ::to_string(*first.variant));
    for (const auto& res : results)
      if (res->metrics.variant != first.variant) variant.reset();
    double rang = 0, alive = 0;
    for (const auto& res : results) {
      rang += res->metrics.rang;
      alive += res->metrics.call_alive;
    }
    r.add_row({std::string("mean"), Cell(), Cell(), first.caller, first.callee, opt_string(variant), Cell(), Cell(),
               rang / n, alive / n, sums[0] / n, sums[1] / n, sums[2] / n, sums[3] / n, sums[4] / n, sums[5] / n,
               sums[6] / n});
  }

  if (opts.out) {
    r.save(*opts.out);
    const auto stem = output_stem(*opts.out);
    std::string lines;
    for (const auto& res : results) lines += res->metrics.to_json(topology).dump() + "\n";
    write_text(with_suffix(stem, ".runs.jsonl"), lines);
    if (sc.trace) {
      std::string text;
      for (std::size_t k = 0; k < sc.repeat; ++k) {
        text += "# run " + std::to_string(k) + " seed " + std::to_string(derive_seed(sc.seed, k)) + "\n";
        text += results[k]->trace.to_text();
      }
      write_text(with_suffix(stem, ".trace.txt"), text);
    }
  }
  return r;
}

Report cmd_sweep_n(const std::optional<std::filesystem::path>& scenario_path, std::vector<ProfilePair> pairs,
                   std::size_t n_min, std::size_t n_max, const CommonOptions& opts) {
  if (n_min < 1 || n_max > kMaxNumberDigits || n_min > n_max)
    throw Error(ErrorCode::ConfigError, "n range must lie within 1.." + std::to_string(kMaxNumberDigits));
  if (n_max - n_min < 1) throw Error(ErrorCode::ConfigError, "n range needs at least two values");

  // One base scenario per swept pair.
  std::vector<Scenario> bases;
  std::vector<signaling::Topology> topologies;
  std::uint64_t seed = seed_or(opts, simnet::kDefaultSeed);
  if (scenario_path) {
    auto sc = Scenario::load(*scenario_path);
    if (opts.topology) {
      sc.topology_path = *opts.topology;
      sc.pair.reset();
    }
    if (sc.adversary) throw Error(ErrorCode::ConfigError, "sweep-n needs an honest scenario");
    seed = seed_or(opts, sc.seed);
    bases.push_back(sc);
  } else {
    if (pairs.empty())
      for (auto a : civ::kAllProfiles)
        for (auto b : civ::kAllProfiles) pairs.emplace_back(a, b);
    for (const auto& p : pairs) {
      Scenario sc;
      sc.name = std::string(civ::to_string(p.first)) + "-" + std::string(civ::to_string(p.second));
      sc.pair = p;
      bases.push_back(sc);
    }
  }
  for (auto& sc : bases) {
    sc.trace = false;
    topologies.push_back(sc.resolve_topology());
    sc.validate(topologies.back());
  }
  const auto cal = load_calibration(opts);

  const std::size_t per_pair = n_max - n_min + 1;
  std::vector<std::optional<simnet::RunMetrics>> results(bases.size() * per_pair);
  parallel_for(results.size(), opts.jobs, [&](std::size_t i) {
    auto sc = bases[i / per_pair];
    const std::size_t n = n_min + i % per_pair;
    sc.challenge_length = n;
    results[i] = simnet::run_scenario(topologies[i / per_pair], sc, cal, derive_seed(seed, n)).metrics;
  });

  Report r("sweep-n", {"row", "caller", "callee", "variant", "n", "outcome", "transmission_ms", "total_ms",
                       "slope_ms_per_digit", "intercept_ms", "r_squared"});
  r.meta = {{"seed", seed}, {"n_min", n_min}, {"n_max", n_max}};
  auto label = [&](std::size_t b, bool callee) -> std::string {
    if (bases[b].pair) return std::string(civ::to_string(callee ? bases[b].pair->second : bases[b].pair->first));
    return callee ? bases[b].callee : bases[b].caller;
  };
  auto variant_cell = [](const simnet::RunMetrics& m) {
    return m.variant ? Cell(std::string(civ::to_string(*m.variant))) : Cell();
  };
  for (std::size_t b = 0; b < bases.size(); ++b) {
    for (std::size_t k = 0; k < per_pair; ++k) {
      const auto& m = *results[b * per_pair + k];
      r.add_row({std::string("point"), label(b, false), label(b, true), variant_cell(m),
                 static_cast<std::int64_t>(n_min + k), m.outcome ? Cell(std::string(to_string(*m.outcome))) : Cell(),
                 to_ms(m.dtmf_time), to_ms(m.total), Cell(), Cell(), Cell()});
    }
  }
  for (std::size_t b = 0; b < bases.size(); ++b) {
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < per_pair; ++k) {
      xs.push_back(static_cast<double>(n_min + k));
      ys.push_back(to_ms(results[b * per_pair + k]->dtmf_time));
    }
    const auto f = fit_line(xs, ys);
    r.add_row({std::string("fit"), label(b, false), label(b, true), variant_cell(*results[b * per_pair]), Cell(),
               Cell(), Cell(), Cell(), f.slope, f.intercept, f.r_squared});
  }
  if (opts.out) r.save(*opts.out);
  return r;
}

Report cmd_sweep_markspace(const std::vector<double>& marks, const std::vector<double>& spaces,
                           std::size_t trials, const CommonOptions& opts) {
  if (trials < 20) throw Error(ErrorCode::ConfigError, "trials must be at least 20");
  if (marks.empty() || spaces.empty()) throw Error(ErrorCode::ConfigError, "mark and space lists must be non-empty");
  for (double v : marks)
    if (!(v > 0.0)) throw Error(ErrorCode::ConfigError, "marks must be positive");
  for (double v : spaces)
    if (!(v > 0.0)) throw Error(ErrorCode::ConfigError, "spaces must be positive");
  const auto cal = load_calibration(opts);
  const std::uint64_t seed = seed_or(opts, simnet::kDefaultSeed);

  std::vector<std::size_t> ok(marks.size() * spaces.size());
  parallel_for(ok.size(), opts.jobs, [&](std::size_t i) {
    ok[i] = simnet::markspace_successes(marks[i / spaces.size()], spaces[i % spaces.size()], cal.noise_snr_db,
                                        trials, seed);
  });

  Report r("sweep-markspace", {"mark_ms", "space_ms", "trials", "successes", "success_rate"});
  r.meta = {{"seed", seed}, {"snr_db", cal.noise_snr_db}};
  for (std::size_t i = 0; i < ok.size(); ++i) {
    r.add_row({marks[i / spaces.size()], spaces[i % spaces.size()], static_cast<std::int64_t>(trials),
               static_cast<std::int64_t>(ok[i]), static_cast<double>(ok[i]) / static_cast<double>(trials)});
  }
  if (opts.out) r.save(*opts.out);
  return r;
}

Report cmd_attack(const simnet::AdversaryStrategy& strategy, std::size_t trials, const CommonOptions& opts) {
  const auto topo_path = opts.topology.value_or(data_dir() / "topologies" / "attack.json");
  const auto topology = signaling::Topology::load(topo_path);
  const auto cal = load_calibration(opts);
  const std::uint64_t seed = seed_or(opts, simnet::kDefaultSeed);
  const auto st = simnet::run_attack(topology, strategy, trials, seed, cal, opts.jobs);

  auto i = [](std::size_t v) { return static_cast<std::int64_t>(v); };
  Report r("attack", {"kind", "trials", "verified", "not_verified", "not_attempted", "warnings", "rings",
                      "alive_rings", "rate", "expected_rate", "ci_low", "ci_high", "reflected_calls",
                      "victim_missed_calls", "victim_filtered", "cdr_pairs", "traced_to_attacker"});
  r.meta = {{"seed", seed}, {"strategy", strategy.to_json()}};
  r.add_row({std::string(simnet::to_string(st.kind)), i(st.trials), i(st.verified), i(st.not_verified),
             i(st.not_attempted), i(st.warnings), i(st.rings), i(st.alive_rings), st.rate, st.expected_rate, st.ci_low,
             st.ci_high, i(st.reflected_calls), i(st.victim_missed_calls), i(st.victim_filtered), i(st.cdr_pairs),
             i(st.traced_to_attacker)});
  if (opts.out) r.save(*opts.out);
  return r;
}

Report cmd_fit_calibration(const std::filesystem::path& targets_path, const std::filesystem::path& bounds_path,
                           const CommonOptions& opts) {
  if (!opts.out) throw Error(ErrorCode::ConfigError, "fit-calibration needs an output path for the calibration");
  const auto targets = simnet::FitTargets::load(targets_path);
  const auto bounds = simnet::FitBounds::load(bounds_path);
  const auto fit = simnet::fit_calibration(targets, bounds);
  fit.calibration.save(*opts.out);

  Report r("fit-calibration", {"target", "caller", "callee", "variant", "target_ms", "simulated_ms", "residual"});
  r.meta = {{"tolerance", targets.tolerance}, {"noise_snr_db", fit.calibration.noise_snr_db}};
  for (std::size_t k = 0; k < targets.targets.size(); ++k) {
    const auto& t = targets.targets[k];
    const auto& res = fit.residuals[k];
    r.add_row({t.name, std::string(civ::to_string(t.caller)), std::string(civ::to_string(t.callee)),
               t.variant ? Cell(std::string(civ::to_string(*t.variant))) : Cell(), res.target_ms, res.simulated_ms,
               res.relative});
  }
  return r;
}

}  // namespace civsim::harness
