#include "civsim/calibration.hpp"

#include <cmath>

namespace civsim::simnet {

using jsonio::json;
using signaling::NetworkKind;

namespace {

constexpr std::array<dtmf::PathKind, 3> kPathKinds{
    dtmf::PathKind::analogue_inband, dtmf::PathKind::digital_event, dtmf::PathKind::out_of_band};

void check(double v, const std::string& name) {
  if (!std::isfinite(v) || v < 0.0)
    throw Error(ErrorCode::ConfigError, "calibration component '" + name + "' must be finite and >= 0");
}

}  // namespace

void LatencyCalibration::validate() const {
  for (auto from : signaling::kAllNetworkKinds)
    for (auto to : signaling::kAllNetworkKinds)
      check(call_setup(from, to), "call_setup_ms." + std::string(signaling::to_string(from)) + "." +
                                      std::string(signaling::to_string(to)));
  for (auto p : civ::kAllProfiles) {
    check(answer(p), "answer_ms." + std::string(civ::to_string(p)));
    check(recognition(p), "dtmf_recognition_delay_ms." + std::string(civ::to_string(p)));
  }
  for (auto k : kPathKinds) {
    check(path_cost(k).fixed_ms, "dtmf_path." + std::string(dtmf::to_string(k)) + ".fixed_ms");
    check(path_cost(k).per_digit_ms, "dtmf_path." + std::string(dtmf::to_string(k)) + ".per_digit_ms");
  }
  check(hold_toggle_ms, "hold_toggle_ms");
  check(release_ms, "release_ms");
  check(gateway_conversion_ms, "gateway_conversion_ms");
  check(cnam_lookup_ms, "cnam_lookup_ms");
  check(pbx_forward_ms, "pbx_forward_ms");
  check(setup_jitter, "setup_jitter");
  if (setup_jitter >= 1.0) throw Error(ErrorCode::ConfigError, "calibration component 'setup_jitter' must be < 1");
  if (!std::isfinite(noise_snr_db))
    throw Error(ErrorCode::ConfigError, "calibration component 'noise_snr_db' must be finite");
}

json LatencyCalibration::to_json() const {
  json doc;
  doc["schema"] = kCalibrationSchema;
  json setup = json::object();
  for (auto from : signaling::kAllNetworkKinds) {
    json row = json::object();
    for (auto to : signaling::kAllNetworkKinds) row[std::string(signaling::to_string(to))] = call_setup(from, to);
    setup[std::string(signaling::to_string(from))] = row;
  }
  doc["call_setup_ms"] = setup;
  json answers = json::object();
  json recog = json::object();
  for (auto p : civ::kAllProfiles) {
    answers[std::string(civ::to_string(p))] = answer(p);
    recog[std::string(civ::to_string(p))] = recognition(p);
  }
  doc["answer_ms"] = answers;
  doc["hold_toggle_ms"] = hold_toggle_ms;
  doc["release_ms"] = release_ms;
  json paths = json::object();
  for (auto k : kPathKinds)
    paths[std::string(dtmf::to_string(k))] = {{"fixed_ms", path_cost(k).fixed_ms},
                                              {"per_digit_ms", path_cost(k).per_digit_ms}};
  doc["dtmf_path"] = paths;
  doc["dtmf_recognition_delay_ms"] = recog;
  doc["gateway_conversion_ms"] = gateway_conversion_ms;
  doc["cnam_lookup_ms"] = cnam_lookup_ms;
  doc["pbx_forward_ms"] = pbx_forward_ms;
  doc["setup_jitter"] = setup_jitter;
  doc["noise_snr_db"] = noise_snr_db;
  return doc;
}

LatencyCalibration LatencyCalibration::from_json(const json& doc) {
  jsonio::require_schema(doc, kCalibrationSchema, "calibration");
  LatencyCalibration cal;
  const auto& setup = jsonio::require(doc, "call_setup_ms", "");
  for (auto from : signaling::kAllNetworkKinds) {
    const std::string from_name(signaling::to_string(from));
    const auto& row = jsonio::require(setup, from_name, "call_setup_ms");
    for (auto to : signaling::kAllNetworkKinds)
      cal.call_setup_ms[signaling::index_of(from)][signaling::index_of(to)] =
          jsonio::require_nonnegative(row, signaling::to_string(to), "call_setup_ms." + from_name);
  }
  const auto& answers = jsonio::require(doc, "answer_ms", "");
  const auto& recog = jsonio::require(doc, "dtmf_recognition_delay_ms", "");
  for (auto p : civ::kAllProfiles) {
    cal.answer_ms[civ::index_of(p)] = jsonio::require_nonnegative(answers, civ::to_string(p), "answer_ms");
    cal.dtmf_recognition_delay_ms[civ::index_of(p)] =
        jsonio::require_nonnegative(recog, civ::to_string(p), "dtmf_recognition_delay_ms");
  }
  cal.hold_toggle_ms = jsonio::require_nonnegative(doc, "hold_toggle_ms", "");
  cal.release_ms = jsonio::require_nonnegative(doc, "release_ms", "");
  const auto& paths = jsonio::require(doc, "dtmf_path", "");
  for (auto k : kPathKinds) {
    const std::string name(dtmf::to_string(k));
    const auto& entry = jsonio::require(paths, name, "dtmf_path");
    auto& cost = cal.dtmf_path[static_cast<std::size_t>(k)];
    cost.fixed_ms = jsonio::require_nonnegative(entry, "fixed_ms", "dtmf_path." + name);
    cost.per_digit_ms = jsonio::require_nonnegative(entry, "per_digit_ms", "dtmf_path." + name);
  }
  cal.gateway_conversion_ms = jsonio::require_nonnegative(doc, "gateway_conversion_ms", "");
  cal.cnam_lookup_ms = jsonio::require_nonnegative(doc, "cnam_lookup_ms", "");
  cal.pbx_forward_ms = jsonio::require_nonnegative(doc, "pbx_forward_ms", "");
  cal.setup_jitter = jsonio::require_nonnegative(doc, "setup_jitter", "");
  cal.noise_snr_db = jsonio::require_number(doc, "noise_snr_db", "");
  cal.validate();
  return cal;
}

LatencyCalibration LatencyCalibration::load(const std::filesystem::path& path) {
  try {
    return from_json(jsonio::load_file(path));
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

void LatencyCalibration::save(const std::filesystem::path& path) const {
  jsonio::save_file(path, to_json());
}

civ::PlatformProfile LatencyCalibration::profile(civ::ProfileName name) const {
  auto p = civ::base_profile(name);
  p.dtmf_recognition_delay_ms = recognition(name);
  return p;
}

const std::vector<CalibrationParameter>& calibration_parameters() {
  static const std::vector<CalibrationParameter> params = [] {
    std::vector<CalibrationParameter> out;
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = a; b < 3; ++b) {
        const std::string name = "call_setup." + std::string(signaling::to_string(signaling::kAllNetworkKinds[a])) +
                                 "~" + std::string(signaling::to_string(signaling::kAllNetworkKinds[b]));
        out.push_back({name, [a, b](const LatencyCalibration& c) { return c.call_setup_ms[a][b]; },
                       [a, b](LatencyCalibration& c, double v) {
                         c.call_setup_ms[a][b] = v;
                         c.call_setup_ms[b][a] = v;
                       }});
      }
    }
    for (auto p : civ::kAllProfiles) {
      const auto i = civ::index_of(p);
      out.push_back({"answer." + std::string(civ::to_string(p)),
                     [i](const LatencyCalibration& c) { return c.answer_ms[i]; },
                     [i](LatencyCalibration& c, double v) { c.answer_ms[i] = v; }});
    }
    for (auto p : civ::kAllProfiles) {
      const auto i = civ::index_of(p);
      out.push_back({"recognition." + std::string(civ::to_string(p)),
                     [i](const LatencyCalibration& c) { return c.dtmf_recognition_delay_ms[i]; },
                     [i](LatencyCalibration& c, double v) { c.dtmf_recognition_delay_ms[i] = v; }});
    }
    for (auto k : kPathKinds) {
      const auto i = static_cast<std::size_t>(k);
      const std::string base = "dtmf." + std::string(dtmf::to_string(k));
      out.push_back({base + ".fixed", [i](const LatencyCalibration& c) { return c.dtmf_path[i].fixed_ms; },
                     [i](LatencyCalibration& c, double v) { c.dtmf_path[i].fixed_ms = v; }});
      out.push_back({base + ".per_digit", [i](const LatencyCalibration& c) { return c.dtmf_path[i].per_digit_ms; },
                     [i](LatencyCalibration& c, double v) { c.dtmf_path[i].per_digit_ms = v; }});
    }
    out.push_back({"hold_toggle", [](const LatencyCalibration& c) { return c.hold_toggle_ms; },
                   [](LatencyCalibration& c, double v) { c.hold_toggle_ms = v; }});
    out.push_back({"release", [](const LatencyCalibration& c) { return c.release_ms; },
                   [](LatencyCalibration& c, double v) { c.release_ms = v; }});
    out.push_back({"gateway_conversion", [](const LatencyCalibration& c) { return c.gateway_conversion_ms; },
                   [](LatencyCalibration& c, double v) { c.gateway_conversion_ms = v; }});
    out.push_back({"cnam_lookup", [](const LatencyCalibration& c) { return c.cnam_lookup_ms; },
                   [](LatencyCalibration& c, double v) { c.cnam_lookup_ms = v; }});
    out.push_back({"pbx_forward", [](const LatencyCalibration& c) { return c.pbx_forward_ms; },
                   [](LatencyCalibration& c, double v) { c.pbx_forward_ms = v; }});
    return out;
  }();
  return params;
}

const CalibrationParameter& calibration_parameter(std::string_view name) {
  for (const auto& p : calibration_parameters())
    if (p.name == name) return p;
  throw Error(ErrorCode::ConfigError, "unknown calibration parameter: " + std::string(name));
}

std::filesystem::path default_calibration_path() {
  return std::filesystem::path(CIVSIM_DATA_DIR) / "calibration.json";
}

}  // namespace civsim::simnet
