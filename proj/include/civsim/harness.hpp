#pragma once

// The commands behind the civsim tool. Each returns its report and writes
// files only when an output path is given.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "civsim/fit.hpp"
#include "civsim/report.hpp"

namespace civsim::harness {

using ProfilePair = std::pair<civ::ProfileName, civ::ProfileName>;

struct CommonOptions {
  std::optional<std::uint64_t> seed;  // overrides the scenario seed
  std::optional<std::filesystem::path> calibration;
  std::optional<std::filesystem::path> topology;
  std::optional<std::filesystem::path> out;
  unsigned jobs = 1;
};

std::filesystem::path data_dir();
simnet::LatencyCalibration load_calibration(const CommonOptions& opts);

// Runs fn(0..n-1) on up to `jobs` threads. Results must be written by index;
// the first exception, in index order, is rethrown.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};
// Ordinary least squares. A perfect fit, flat lines included, has R^2 = 1.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Runs `repeat` times with seeds derive_seed(seed, k). Per-run rows, then a
// mean row when repeat > 1. With an output path, also writes the per-run
// metrics as JSON lines next to it, and the trace when the scenario asks.
Report cmd_run(const std::filesystem::path& scenario_path, const CommonOptions& opts);
Report cmd_run(const simnet::Scenario& scenario, const CommonOptions& opts);

// DTMF transmission time and total against challenge length, for each pair
// (all nine by default), followed by one fit row per pair.
Report cmd_sweep_n(const std::optional<std::filesystem::path>& scenario_path, std::vector<ProfilePair> pairs,
                   std::size_t n_min, std::size_t n_max, const CommonOptions& opts);

// Decode success rate through the calibrated noisy analogue line.
Report cmd_sweep_markspace(const std::vector<double>& marks, const std::vector<double>& spaces,
                           std::size_t trials, const CommonOptions& opts);

// Uses data/topologies/attack.json unless a topology is given.
Report cmd_attack(const simnet::AdversaryStrategy& strategy, std::size_t trials, const CommonOptions& opts);

// Writes the calibration to opts.out (required) and reports the residuals.
Report cmd_fit_calibration(const std::filesystem::path& targets_path, const std::filesystem::path& bounds_path,
                           const CommonOptions& opts);

}  // namespace civsim::harness
