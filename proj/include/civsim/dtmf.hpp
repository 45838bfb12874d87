#pragma once

// DTMF codec: dual-tone synthesis, Goertzel decoding, digital event
// encoding, an additive line-noise channel and the affine transmission
// time model.

#include <array>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "civsim/core.hpp"

namespace civsim::dtmf {

// ITU-T Q.23 frequency groups.
inline constexpr std::array<double, 4> kLowGroupHz{697.0, 770.0, 852.0, 941.0};
inline constexpr std::array<double, 4> kHighGroupHz{1209.0, 1336.0, 1477.0, 1633.0};

// Keypad layout, row-major: row selects the low tone, column the high tone.
inline constexpr std::string_view kKeypad = "123A456B789C*0#D";

inline constexpr int kDefaultSampleRate = 8000;
inline constexpr double kToneAmplitude = 0.5;  // per tone, so the pair peaks at 1.0
inline constexpr double kMinDigitalEventMs = 40.0;

struct ToneFrequencies {
  double low_hz;
  double high_hz;
};

bool is_symbol(char c) noexcept;
ToneFrequencies frequencies(char symbol);  // throws InvalidSymbol
void validate_symbols(std::string_view symbols);

struct TimingConfig {
  double mark_ms = 50.0;
  double space_ms = 50.0;

  bool valid_for_digital_events() const noexcept {
    return mark_ms >= kMinDigitalEventMs && space_ms >= kMinDigitalEventMs;
  }
  friend bool operator==(const TimingConfig&, const TimingConfig&) = default;
};

inline constexpr TimingConfig kSipTiming{50.0, 50.0};
inline constexpr TimingConfig kTrueCallTiming{100.0, 100.0};

struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  double duration_ms() const {
    return 1000.0 * static_cast<double>(samples.size()) / sample_rate;
  }
};

struct NoiseModel {
  enum class Kind { none, additive_gaussian };

  Kind kind = Kind::none;
  // Measured against the nominal power of a full-level tone pair, not the
  // buffer average, so that the noise floor is a property of the line.
  double snr_db = std::numeric_limits<double>::infinity();

  static NoiseModel none() { return {}; }
  static NoiseModel gaussian(double snr_db) { return {Kind::additive_gaussian, snr_db}; }
  friend bool operator==(const NoiseModel&, const NoiseModel&) = default;
};

struct DtmfEvent {
  char symbol;
  double duration_ms;
  friend bool operator==(const DtmfEvent&, const DtmfEvent&) = default;
};
using DtmfEventSequence = std::vector<DtmfEvent>;

DtmfEventSequence to_events(std::string_view symbols, const TimingConfig& cfg);
std::string symbols_of(const DtmfEventSequence& events);

// Per digit: mark_ms of the summed sinusoids then space_ms of silence. The
// space after the final digit is included.
AudioBuffer synthesize(std::string_view symbols, const TimingConfig& cfg,
                       int sample_rate = kDefaultSampleRate);

// Goertzel energy for one frequency over a block of samples.
double goertzel_power(std::span<const double> block, double freq_hz, int sample_rate);

// The receiver analyses fixed blocks of 205 samples at 8 kHz (25.6 ms),
// scaled with the sample rate, advancing a quarter block at a time.
std::size_t decoder_frame_samples(int sample_rate);
std::size_t decoder_hop_samples(int sample_rate);

inline constexpr double kDominanceDb = 8.0;
inline constexpr double kMinToneAmplitude = 0.05;
// Below this on both groups a frame counts as a pause.
inline constexpr double kQuietAmplitude = 0.15;
// Consecutive agreeing frames that accept a symbol (about 41 ms of tone),
// and consecutive pause frames that allow the same symbol again.
inline constexpr int kAcceptFrames = 4;
inline constexpr int kRearmFrames = 2;

// The receiver does not know the sender's timing; `cfg` is only checked.
// Frames with tone energy that fail the dominance test break a run but do
// not re-arm, so a noisy stretch inside a long tone is not read twice.
std::string decode(const AudioBuffer& audio, const TimingConfig& cfg);

AudioBuffer apply_noise(const AudioBuffer& audio, const NoiseModel& model, Rng& rng);

enum class PathKind { analogue_inband, digital_event, out_of_band };

std::string_view to_string(PathKind kind);
PathKind path_kind_from_string(std::string_view s);

// Calibrated cost of one DTMF path: fixed overhead plus a per-digit cost.
// For analogue paths the per-digit cost is added to mark + space.
struct PathCost {
  double fixed_ms = 0.0;
  double per_digit_ms = 0.0;
  friend bool operator==(const PathCost&, const PathCost&) = default;
};

SimDuration per_digit_time(PathKind path, const TimingConfig& cfg, const PathCost& cost);

// fixed + num_digits * per_digit; affine in num_digits by construction.
SimDuration transmission_time(std::size_t num_digits, PathKind path, const TimingConfig& cfg,
                              const PathCost& cost);

// 16-bit mono PCM for listening to generated tones.
void write_wav(const AudioBuffer& audio, const std::filesystem::path& path);

}  // namespace civsim::dtmf
