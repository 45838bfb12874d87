#include "civsim/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "civsim/dtmf.hpp"

namespace civsim::simnet {

using jsonio::json;

namespace {

constexpr std::uint64_t kTargetSeed = 1;
// Step used to measure how each total responds to each parameter. Totals
// are affine in the parameters, so any step works; a large one keeps the
// microsecond rounding of event times out of the slopes.
constexpr double kProbeMs = 100.0;
constexpr int kMaxSweeps = 200000;

double optional_number(const json& obj, const char* key, double fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  return jsonio::require_number(obj, key, path);
}

std::string percent(double x) {
  std::ostringstream os;
  os.precision(3);
  os << x * 100.0 << "%";
  return os.str();
}

}  // namespace

FitTargets FitTargets::from_json(const json& doc) {
  jsonio::require_schema(doc, kTargetsSchema, "targets");
  FitTargets out;
  out.tolerance = optional_number(doc, "tolerance", out.tolerance, "");
  if (!(out.tolerance > 0.0 && out.tolerance < 1.0)) jsonio::fail("tolerance", "must lie in (0, 1)");
  const auto& list = jsonio::require(doc, "targets", "");
  if (!list.is_array() || list.empty()) jsonio::fail("targets", "expected a non-empty array");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = "targets[" + std::to_string(i) + "]";
    const auto& t = list[i];
    if (!t.is_object()) jsonio::fail(path, "expected an object");
    LatencyTarget target;
    target.name = jsonio::require_string(t, "name", path);
    auto profile = [&](const char* key) {
      const auto s = jsonio::require_string(t, key, path);
      try {
        return civ::profile_from_string(s);
      } catch (const Error&) {
        jsonio::fail(jsonio::join(path, key), "unknown profile '" + s + "'");
      }
    };
    target.caller = profile("caller");
    target.callee = profile("callee");
    if (t.contains("variant") && !t["variant"].is_null()) {
      const auto s = jsonio::require_string(t, "variant", path);
      try {
        target.variant = civ::variant_from_string(s);
      } catch (const Error&) {
        jsonio::fail(jsonio::join(path, "variant"), "unknown variant '" + s + "'");
      }
    }
    target.total_ms = jsonio::require_number(t, "total_ms", path);
    if (!(target.total_ms > 0.0)) jsonio::fail(jsonio::join(path, "total_ms"), "must be positive");
    out.targets.push_back(std::move(target));
  }
  return out;
}

FitTargets FitTargets::load(const std::filesystem::path& path) { return from_json(jsonio::load_file(path)); }

FitBounds FitBounds::from_json(const json& doc) {
  jsonio::require_schema(doc, kBoundsSchema, "bounds");
  FitBounds out;
  out.regularization = optional_number(doc, "regularization", out.regularization, "");
  if (!(out.regularization >= 0.0)) jsonio::fail("regularization", "must be non-negative");
  out.setup_jitter = optional_number(doc, "setup_jitter", out.setup_jitter, "");
  if (!(out.setup_jitter >= 0.0 && out.setup_jitter < 1.0)) jsonio::fail("setup_jitter", "must lie in [0, 1)");

  if (doc.contains("noise")) {
    const auto& n = doc["noise"];
    if (!n.is_object()) jsonio::fail("noise", "expected an object");
    auto& s = out.noise;
    s.fail_mark_ms = optional_number(n, "fail_mark_ms", s.fail_mark_ms, "noise");
    s.pass_mark_ms = optional_number(n, "pass_mark_ms", s.pass_mark_ms, "noise");
    s.space_ms = optional_number(n, "space_ms", s.space_ms, "noise");
    const double trials = optional_number(n, "trials", static_cast<double>(s.trials), "noise");
    if (trials < 1 || trials != std::floor(trials)) jsonio::fail("noise.trials", "must be a positive integer");
    s.trials = static_cast<std::size_t>(trials);
    const double seed = optional_number(n, "seed", static_cast<double>(s.seed), "noise");
    if (seed < 0 || seed != std::floor(seed)) jsonio::fail("noise.seed", "must be a non-negative integer");
    s.seed = static_cast<std::uint64_t>(seed);
    s.snr_start_db = optional_number(n, "snr_start_db", s.snr_start_db, "noise");
    s.snr_step_db = optional_number(n, "snr_step_db", s.snr_step_db, "noise");
    s.snr_min_db = optional_number(n, "snr_min_db", s.snr_min_db, "noise");
    if (!(s.snr_step_db > 0.0)) jsonio::fail("noise.snr_step_db", "must be positive");
    if (!(s.snr_min_db <= s.snr_start_db)) jsonio::fail("noise.snr_min_db", "must not exceed snr_start_db");
  }

  const auto& params = jsonio::require(doc, "parameters", "");
  if (!params.is_object()) jsonio::fail("parameters", "expected an object keyed by parameter name");
  for (const auto& [name, spec] : params.items()) {
    const std::string path = "parameters." + name;
    try {
      calibration_parameter(name);
    } catch (const Error&) {
      jsonio::fail(path, "unknown calibration parameter");
    }
    if (!spec.is_object()) jsonio::fail(path, "expected an object");
    ParameterBound b;
    b.name = name;
    b.min = jsonio::require_nonnegative(spec, "min", path);
    b.max = jsonio::require_number(spec, "max", path);
    if (b.max < b.min) jsonio::fail(jsonio::join(path, "max"), "must not be below min");
    b.prior = optional_number(spec, "prior", b.min, path);
    if (b.prior < b.min || b.prior > b.max) jsonio::fail(jsonio::join(path, "prior"), "must lie within [min, max]");
    b.scale = optional_number(spec, "scale", std::max(1.0, b.prior), path);
    if (!(b.scale > 0.0)) jsonio::fail(jsonio::join(path, "scale"), "must be positive");
    out.parameters.push_back(std::move(b));
  }
  for (const auto& p : calibration_parameters()) {
    const bool present = std::any_of(out.parameters.begin(), out.parameters.end(),
                                     [&](const ParameterBound& b) { return b.name == p.name; });
    if (!present) jsonio::fail("parameters." + p.name, "missing bound");
  }
  // Canonical order, whatever order the file used.
  std::vector<ParameterBound> ordered;
  for (const auto& p : calibration_parameters())
    ordered.push_back(*std::find_if(out.parameters.begin(), out.parameters.end(),
                                    [&](const ParameterBound& b) { return b.name == p.name; }));
  out.parameters = std::move(ordered);
  return out;
}

FitBounds FitBounds::load(const std::filesystem::path& path) { return from_json(jsonio::load_file(path)); }

double simulate_target(const LatencyTarget& target, const LatencyCalibration& cal) {
  Scenario sc;
  sc.name = target.name;
  sc.pair = std::make_pair(target.caller, target.callee);
  sc.variant = target.variant;
  sc.trace = false;
  const auto topology = sc.resolve_topology();
  const auto result = run_scenario(topology, sc, cal, kTargetSeed);
  if (result.metrics.outcome != VerificationStatus::Verified)
    throw Error(ErrorCode::Infeasible, "target '" + target.name + "' does not verify under this calibration");
  return to_ms(result.metrics.total);
}

bool markspace_trial(double mark_ms, double space_ms, double snr_db, std::uint64_t seed) {
  Rng rng(seed);
  const auto code = generate_challenge(kDefaultChallengeLength, rng);
  const dtmf::TimingConfig timing{mark_ms, space_ms};
  const auto clean = dtmf::synthesize(code.digits(), timing);
  const auto noisy = dtmf::apply_noise(clean, dtmf::NoiseModel::gaussian(snr_db), rng);
  return dtmf::decode(noisy, timing) == code.digits();
}

std::size_t markspace_successes(double mark_ms, double space_ms, double snr_db, std::size_t trials,
                                std::uint64_t seed) {
  std::size_t ok = 0;
  for (std::size_t t = 0; t < trials; ++t)
    if (markspace_trial(mark_ms, space_ms, snr_db, derive_seed(seed, t))) ++ok;
  return ok;
}

double calibrate_noise(const NoiseCalibrationSpec& spec) {
  for (long k = 0;; ++k) {
    // Grid points are computed, not accumulated, and rounded to 1e-6 dB so
    // the chosen value prints exactly.
    const double snr = std::round((spec.snr_start_db - static_cast<double>(k) * spec.snr_step_db) * 1e6) / 1e6;
    if (snr < spec.snr_min_db) break;
    const bool fails = markspace_successes(spec.fail_mark_ms, spec.space_ms, snr, spec.trials, spec.seed) <
                       spec.trials;
    if (!fails) continue;
    if (markspace_successes(spec.pass_mark_ms, spec.space_ms, snr, spec.trials, spec.seed) == spec.trials)
      return snr;
  }
  throw Error(ErrorCode::Infeasible, "no noise level separates mark " + std::to_string(spec.fail_mark_ms) +
                                         " ms from mark " + std::to_string(spec.pass_mark_ms) + " ms");
}

FitResult fit_calibration(const FitTargets& targets, const FitBounds& bounds) {
  const auto& params = calibration_parameters();
  const std::size_t np = params.size();
  const std::size_t nt = targets.targets.size();
  if (bounds.parameters.size() != np) throw Error(ErrorCode::ConfigError, "bounds must cover every parameter");

  auto build = [&](const std::vector<double>& x) {
    LatencyCalibration cal;
    for (std::size_t j = 0; j < np; ++j) params[j].set(cal, x[j]);
    cal.setup_jitter = 0.0;
    return cal;
  };
  auto totals = [&](const LatencyCalibration& cal) {
    std::vector<double> out(nt);
    for (std::size_t i = 0; i < nt; ++i) out[i] = simulate_target(targets.targets[i], cal);
    return out;
  };

  // Linear model around the prior: total_i(x) = base_i + sum_j a_ij (x_j - p_j).
  std::vector<double> prior(np), lo(np), hi(np), scale(np);
  for (std::size_t j = 0; j < np; ++j) {
    prior[j] = bounds.parameters[j].prior;
    lo[j] = bounds.parameters[j].min;
    hi[j] = bounds.parameters[j].max;
    scale[j] = bounds.parameters[j].scale;
  }
  const auto base = totals(build(prior));
  std::vector<std::vector<double>> a(nt, std::vector<double>(np, 0.0));
  for (std::size_t j = 0; j < np; ++j) {
    auto probe = prior;
    probe[j] += kProbeMs;
    const auto moved = totals(build(probe));
    for (std::size_t i = 0; i < nt; ++i) a[i][j] = (moved[i] - base[i]) / kProbeMs;
  }

  // Reachability of each target over the box, before any fitting.
  for (std::size_t i = 0; i < nt; ++i) {
    double reach_lo = base[i], reach_hi = base[i];
    for (std::size_t j = 0; j < np; ++j) {
      const double d1 = a[i][j] * (lo[j] - prior[j]);
      const double d2 = a[i][j] * (hi[j] - prior[j]);
      reach_lo += std::min(d1, d2);
      reach_hi += std::max(d1, d2);
    }
    const auto& t = targets.targets[i];
    if (reach_lo > t.total_ms * (1.0 + targets.tolerance) || reach_hi < t.total_ms * (1.0 - targets.tolerance)) {
      std::ostringstream os;
      os << "target '" << t.name << "' (" << t.total_ms << " ms) lies outside the reachable range [" << reach_lo
         << ", " << reach_hi << "] ms";
      throw Error(ErrorCode::Infeasible, os.str());
    }
  }

  // Minimise sum_i ((model_i - t_i) / t_i)^2 + lambda * sum_j ((x_j - p_j) / s_j)^2
  // over the box by cyclic coordinate descent.
  std::vector<double> x = prior;
  std::vector<double> r(nt);  // relative residuals
  std::vector<double> w(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    w[i] = 1.0 / targets.targets[i].total_ms;
    r[i] = (base[i] - targets.targets[i].total_ms) * w[i];
  }
  const double lambda = bounds.regularization;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double biggest = 0.0;
    for (std::size_t j = 0; j < np; ++j) {
      double g = lambda * (x[j] - prior[j]) / (scale[j] * scale[j]);
      double h = lambda / (scale[j] * scale[j]);
      for (std::size_t i = 0; i < nt; ++i) {
        const double c = a[i][j] * w[i];
        g += c * r[i];
        h += c * c;
      }
      if (h <= 0.0) continue;
      const double next = std::clamp(x[j] - g / h, lo[j], hi[j]);
      const double step = next - x[j];
      if (step == 0.0) continue;
      for (std::size_t i = 0; i < nt; ++i) r[i] += a[i][j] * w[i] * step;
      x[j] = next;
      biggest = std::max(biggest, std::abs(step));
    }
    if (biggest < 1e-9) break;
  }

  // Microsecond resolution, like the event clock.
  for (auto& v : x) v = std::clamp(std::round(v * 1000.0) / 1000.0, 0.0, std::numeric_limits<double>::max());
  FitResult out;
  out.calibration = build(x);
  out.calibration.setup_jitter = bounds.setup_jitter;

  const auto sim = totals(out.calibration);
  for (std::size_t i = 0; i < nt; ++i) {
    const auto& t = targets.targets[i];
    out.residuals.push_back({t.name, t.total_ms, sim[i], (sim[i] - t.total_ms) / t.total_ms});
  }
  for (const auto& res : out.residuals) {
    if (std::abs(res.relative) > targets.tolerance)
      throw Error(ErrorCode::Infeasible, "fitted total for '" + res.name + "' misses its target by " +
                                             percent(res.relative) + " (tolerance " +
                                             percent(targets.tolerance) + ")");
  }
  out.calibration.noise_snr_db = calibrate_noise(bounds.noise);
  out.calibration.validate();
  return out;
}

}  // namespace civsim::simnet
