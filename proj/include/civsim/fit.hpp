#pragma once

// Fitting the latency calibration to measured end-to-end totals, and
// choosing the analogue line noise from the mark/space reliability
// transition.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "civsim/simnet.hpp"

namespace civsim::simnet {

inline constexpr std::string_view kTargetsSchema = "civsim.targets/1";
inline constexpr std::string_view kBoundsSchema = "civsim.bounds/1";

struct LatencyTarget {
  std::string name;
  civ::ProfileName caller = civ::ProfileName::sip;
  civ::ProfileName callee = civ::ProfileName::sip;
  std::optional<civ::Variant> variant;
  double total_ms = 0.0;
};

struct FitTargets {
  std::vector<LatencyTarget> targets;
  double tolerance = 0.05;  // relative

  static FitTargets from_json(const jsonio::json& doc);
  static FitTargets load(const std::filesystem::path& path);
};

struct ParameterBound {
  std::string name;  // a calibration_parameters() name
  double min = 0.0;
  double max = 0.0;
  double prior = 0.0;
  double scale = 1.0;
};

// The reliability transition the noise level is chosen to reproduce: the
// largest SNR on the scan grid at which `fail_mark_ms` fails at least once
// and `pass_mark_ms` never fails, over the same `trials` codes.
struct NoiseCalibrationSpec {
  double fail_mark_ms = 50.0;
  double pass_mark_ms = 60.0;
  double space_ms = 150.0;
  std::size_t trials = 20;
  std::uint64_t seed = 1;
  double snr_start_db = 12.0;
  double snr_step_db = 0.05;
  double snr_min_db = -6.0;
};

struct FitBounds {
  std::vector<ParameterBound> parameters;
  double regularization = 1e-4;
  double setup_jitter = 0.0;
  NoiseCalibrationSpec noise;

  static FitBounds from_json(const jsonio::json& doc);
  static FitBounds load(const std::filesystem::path& path);
};

struct TargetResidual {
  std::string name;
  double target_ms = 0.0;
  double simulated_ms = 0.0;
  double relative = 0.0;  // (simulated - target) / target
};

struct FitResult {
  LatencyCalibration calibration;
  std::vector<TargetResidual> residuals;
};

// Added latency of an honest run for the target's pair under `cal`.
double simulate_target(const LatencyTarget& target, const LatencyCalibration& cal);

// One random 4-digit code synthesized, sent through additive noise at
// `snr_db` and decoded. The code and noise depend only on `seed`.
bool markspace_trial(double mark_ms, double space_ms, double snr_db, std::uint64_t seed);
// Trial t uses derive_seed(seed, t), so different timings see the same codes
// and the same noise streams.
std::size_t markspace_successes(double mark_ms, double space_ms, double snr_db, std::size_t trials,
                                std::uint64_t seed);

// Throws Infeasible when no grid point qualifies.
double calibrate_noise(const NoiseCalibrationSpec& spec);

// Regularised least squares over relative residuals, box-constrained,
// solved by cyclic coordinate descent on the (affine) latency model and
// checked by re-simulation. Throws Infeasible when a target lies outside
// what the bounds can reach, or when a residual exceeds the tolerance.
FitResult fit_calibration(const FitTargets& targets, const FitBounds& bounds);

}  // namespace civsim::simnet
