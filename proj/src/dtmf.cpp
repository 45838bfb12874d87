#include "civsim/dtmf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>

namespace civsim::dtmf {

bool is_symbol(char c) noexcept { return kKeypad.find(c) != std::string_view::npos; }

ToneFrequencies frequencies(char symbol) {
  const auto pos = kKeypad.find(symbol);
  if (pos == std::string_view::npos)
    throw Error(ErrorCode::InvalidSymbol, std::string("not a DTMF symbol: '") + symbol + "'");
  return {kLowGroupHz[pos / 4], kHighGroupHz[pos % 4]};
}

void validate_symbols(std::string_view symbols) {
  for (char c : symbols) (void)frequencies(c);
}

DtmfEventSequence to_events(std::string_view symbols, const TimingConfig& cfg) {
  validate_symbols(symbols);
  DtmfEventSequence out;
  out.reserve(symbols.size());
  for (char c : symbols) out.push_back({c, cfg.mark_ms});
  return out;
}

std::string symbols_of(const DtmfEventSequence& events) {
  std::string out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(e.symbol);
  return out;
}

namespace {

std::size_t samples_for(double ms, int sample_rate) {
  return static_cast<std::size_t>(std::llround(ms * sample_rate / 1000.0));
}

}  // namespace

AudioBuffer synthesize(std::string_view symbols, const TimingConfig& cfg, int sample_rate) {
  validate_symbols(symbols);
  if (cfg.mark_ms <= 0.0 || cfg.space_ms <= 0.0)
    throw Error(ErrorCode::ConfigError, "mark and space must be positive");

  const std::size_t mark = samples_for(cfg.mark_ms, sample_rate);
  const std::size_t space = samples_for(cfg.space_ms, sample_rate);
  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.assign(symbols.size() * (mark + space), 0.0);

  const double dt = 1.0 / sample_rate;
  std::size_t offset = 0;
  for (char c : symbols) {
    const auto f = frequencies(c);
    const double wl = 2.0 * std::numbers::pi * f.low_hz;
    const double wh = 2.0 * std::numbers::pi * f.high_hz;
    for (std::size_t i = 0; i < mark; ++i) {
      const double t = static_cast<double>(i) * dt;
      out.samples[offset + i] = kToneAmplitude * (std::sin(wl * t) + std::sin(wh * t));
    }
    offset += mark + space;
  }
  return out;
}

double goertzel_power(std::span<const double> block, double freq_hz, int sample_rate) {
  const double coeff = 2.0 * std::cos(2.0 * std::numbers::pi * freq_hz / sample_rate);
  double s1 = 0.0;
  double s2 = 0.0;
  for (double x : block) {
    const double s0 = x + coeff * s1 - s2;
    s2 = s1;
    s1 = s0;
  }
  return std::max(0.0, s1 * s1 + s2 * s2 - coeff * s1 * s2);
}

std::size_t decoder_frame_samples(int sample_rate) {
  return std::max<std::size_t>(16, static_cast<std::size_t>(std::llround(205.0 * sample_rate / 8000.0)));
}

std::size_t decoder_hop_samples(int sample_rate) { return decoder_frame_samples(sample_rate) / 4; }

namespace {

constexpr char kAmbiguous = '\0';
constexpr char kPause = '\1';

char classify_frame(std::span<const double> frame, int sample_rate) {
  std::array<double, 8> amp{};
  const double n = static_cast<double>(frame.size());
  for (std::size_t i = 0; i < 4; ++i) {
    amp[i] = 2.0 * std::sqrt(goertzel_power(frame, kLowGroupHz[i], sample_rate)) / n;
    amp[4 + i] = 2.0 * std::sqrt(goertzel_power(frame, kHighGroupHz[i], sample_rate)) / n;
  }
  const auto lo = static_cast<std::size_t>(std::max_element(amp.begin(), amp.begin() + 4) - amp.begin());
  const auto hi = static_cast<std::size_t>(std::max_element(amp.begin() + 4, amp.end()) - amp.begin());
  if (std::max(amp[lo], amp[hi]) < kQuietAmplitude) return kPause;
  const double weaker = std::min(amp[lo], amp[hi]);
  if (weaker < kMinToneAmplitude) return kAmbiguous;

  double other = 0.0;
  for (std::size_t i = 0; i < amp.size(); ++i)
    if (i != lo && i != hi) other = std::max(other, amp[i]);
  if (other > 0.0 && 20.0 * std::log10(weaker / other) < kDominanceDb) return kAmbiguous;
  return kKeypad[lo * 4 + (hi - 4)];
}

}  // namespace

std::string decode(const AudioBuffer& audio, const TimingConfig& cfg) {
  if (cfg.mark_ms <= 0.0 || cfg.space_ms <= 0.0)
    throw Error(ErrorCode::ConfigError, "mark and space must be positive");
  const std::size_t frame = decoder_frame_samples(audio.sample_rate);
  const std::size_t hop = decoder_hop_samples(audio.sample_rate);
  const std::span<const double> samples(audio.samples);

  std::string out;
  char candidate = kAmbiguous;
  int run = 0;
  int pauses = 0;
  char last = kAmbiguous;  // most recent symbol, cleared by a pause
  for (std::size_t start = 0; start + frame <= samples.size(); start += hop) {
    const char c = classify_frame(samples.subspan(start, frame), audio.sample_rate);
    if (c == kAmbiguous || c == kPause) {
      candidate = kAmbiguous;
      run = 0;
      if (c == kPause) {
        if (++pauses >= kRearmFrames) last = kAmbiguous;
      } else {
        pauses = 0;
      }
      continue;
    }
    pauses = 0;
    if (c == candidate) {
      ++run;
    } else {
      candidate = c;
      run = 1;
    }
    if (run >= kAcceptFrames && c != last) {
      out.push_back(c);
      last = c;
    }
  }
  return out;
}

AudioBuffer apply_noise(const AudioBuffer& audio, const NoiseModel& model, Rng& rng) {
  if (model.kind == NoiseModel::Kind::none || std::isinf(model.snr_db)) return audio;
  // Nominal power of a tone pair: two sinusoids of amplitude A give A^2.
  const double reference_power = kToneAmplitude * kToneAmplitude;
  const double sigma = std::sqrt(reference_power / std::pow(10.0, model.snr_db / 10.0));
  std::normal_distribution<double> noise(0.0, sigma);
  AudioBuffer out = audio;
  for (auto& x : out.samples) x = std::clamp(x + noise(rng), -1.0, 1.0);
  return out;
}

std::string_view to_string(PathKind kind) {
  switch (kind) {
    case PathKind::analogue_inband: return "analogue-inband";
    case PathKind::digital_event: return "digital-event";
    case PathKind::out_of_band: return "out-of-band";
  }
  return "unknown";
}

PathKind path_kind_from_string(std::string_view s) {
  if (s == "analogue-inband") return PathKind::analogue_inband;
  if (s == "digital-event") return PathKind::digital_event;
  if (s == "out-of-band") return PathKind::out_of_band;
  throw Error(ErrorCode::ConfigError, "unknown DTMF path kind: " + std::string(s));
}

SimDuration per_digit_time(PathKind path, const TimingConfig& cfg, const PathCost& cost) {
  double ms = cost.per_digit_ms;
  if (path == PathKind::analogue_inband) ms += cfg.mark_ms + cfg.space_ms;
  return from_ms(ms);
}

SimDuration transmission_time(std::size_t num_digits, PathKind path, const TimingConfig& cfg,
                              const PathCost& cost) {
  return from_ms(cost.fixed_ms) +
         static_cast<std::int64_t>(num_digits) * per_digit_time(path, cfg, cost);
}

namespace {

void put_le(std::ofstream& out, std::uint32_t value, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((value >> (8 * i)) & 0xff));
}

}  // namespace

void write_wav(const AudioBuffer& audio, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  out.write("RIFF", 4);
  put_le(out, 36 + data_bytes, 4);
  out.write("WAVEfmt ", 8);
  put_le(out, 16, 4);
  put_le(out, 1, 2);  // PCM
  put_le(out, 1, 2);  // mono
  put_le(out, static_cast<std::uint32_t>(audio.sample_rate), 4);
  put_le(out, static_cast<std::uint32_t>(audio.sample_rate * 2), 4);
  put_le(out, 2, 2);
  put_le(out, 16, 2);
  out.write("data", 4);
  put_le(out, data_bytes, 4);
  for (double x : audio.samples) {
    const auto s = static_cast<std::int16_t>(std::lround(std::clamp(x, -1.0, 1.0) * 32767.0));
    put_le(out, static_cast<std::uint16_t>(s), 2);
  }
}

}  // namespace civsim::dtmf
