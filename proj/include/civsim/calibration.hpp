#pragma once

// Per-component durations that drive the discrete-event clock.

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "civsim/json_util.hpp"
#include "civsim/profile.hpp"

namespace civsim::simnet {

inline constexpr std::string_view kCalibrationSchema = "civsim.calibration/1";

struct LatencyCalibration {
  // Origin network kind x destination network kind: dial until ringing.
  std::array<std::array<double, 3>, 3> call_setup_ms{};
  // Automatic answer latency of each platform.
  std::array<double, 3> answer_ms{};
  // Putting a call on hold or taking it off hold.
  double hold_toggle_ms = 0.0;
  // Hang-up until both parties observe the release.
  double release_ms = 0.0;
  // Indexed by dtmf::PathKind.
  std::array<dtmf::PathCost, 3> dtmf_path{};
  // Per-digit decode latency of each platform.
  std::array<double, 3> dtmf_recognition_delay_ms{};
  double gateway_conversion_ms = 0.0;
  double cnam_lookup_ms = 0.0;
  double pbx_forward_ms = 0.0;
  // Multiplicative jitter on call setup, uniform in [1 - j, 1 + j].
  double setup_jitter = 0.0;
  // Line noise of analogue legs in the reliability experiments.
  double noise_snr_db = 0.0;

  double call_setup(signaling::NetworkKind from, signaling::NetworkKind to) const {
    return call_setup_ms[signaling::index_of(from)][signaling::index_of(to)];
  }
  double answer(civ::ProfileName p) const { return answer_ms[civ::index_of(p)]; }
  double recognition(civ::ProfileName p) const { return dtmf_recognition_delay_ms[civ::index_of(p)]; }
  const dtmf::PathCost& path_cost(dtmf::PathKind k) const {
    return dtmf_path[static_cast<std::size_t>(k)];
  }

  // Throws ConfigError naming the first negative or non-finite component.
  void validate() const;

  jsonio::json to_json() const;
  static LatencyCalibration from_json(const jsonio::json& doc);
  static LatencyCalibration load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // The profile with its calibrated recognition delay.
  civ::PlatformProfile profile(civ::ProfileName name) const;

  friend bool operator==(const LatencyCalibration&, const LatencyCalibration&) = default;
};

// Named scalar view of a calibration, used by the fitter and by the
// randomized property tests.
struct CalibrationParameter {
  std::string name;
  std::function<double(const LatencyCalibration&)> get;
  std::function<void(LatencyCalibration&, double)> set;
};

const std::vector<CalibrationParameter>& calibration_parameters();
const CalibrationParameter& calibration_parameter(std::string_view name);

// Path of the shipped fitted calibration.
std::filesystem::path default_calibration_path();

}  // namespace civsim::simnet
