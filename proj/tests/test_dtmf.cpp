#include "doctest.h"

#include <cmath>
#include <complex>
#include <numbers>

#include "civsim/dtmf.hpp"
#include "civsim/fit.hpp"

using namespace civsim;
using namespace civsim::dtmf;

namespace {

// Direct evaluation of the DFT at an arbitrary frequency.
double dft_power(const std::vector<double>& x, double f, int fs) {
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double ph = -2.0 * std::numbers::pi * f * static_cast<double>(n) / fs;
    acc += x[n] * std::complex<double>(std::cos(ph), std::sin(ph));
  }
  return std::norm(acc);
}

std::string random_symbols(Rng& rng, std::size_t len) {
  std::uniform_int_distribution<std::size_t> pick(0, kKeypad.size() - 1);
  std::bernoulli_distribution repeat(0.3);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) {
    if (!s.empty() && repeat(rng)) s.push_back(s.back());
    else s.push_back(kKeypad[pick(rng)]);
  }
  return s;
}

}  // namespace

TEST_CASE("keypad frequencies") {
  CHECK(frequencies('1').low_hz == 697.0);
  CHECK(frequencies('1').high_hz == 1209.0);
  CHECK(frequencies('0').low_hz == 941.0);
  CHECK(frequencies('0').high_hz == 1336.0);
  CHECK(frequencies('D').high_hz == 1633.0);
  CHECK(frequencies('#').high_hz == 1477.0);
  CHECK_THROWS_AS(frequencies('E'), Error);
  CHECK_THROWS_AS(validate_symbols("12x"), Error);
  CHECK_NOTHROW(validate_symbols("0123456789*#ABCD"));
}

TEST_CASE("goertzel matches the direct DFT") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> block(205);
    for (auto& v : block) v = u(rng);
    for (double f : {697.0, 941.0, 1209.0, 1633.0, 1000.0}) {
      const double expected = dft_power(block, f, 8000);
      CHECK(goertzel_power(block, f, 8000) == doctest::Approx(expected).epsilon(1e-9));
    }
  }
  // A pure tone concentrates at its own frequency.
  const auto tone = synthesize("5", {100.0, 10.0});
  std::vector<double> block(tone.samples.begin(), tone.samples.begin() + 205);
  const auto f = frequencies('5');
  CHECK(goertzel_power(block, f.low_hz, 8000) > 50.0 * goertzel_power(block, 697.0, 8000));
  CHECK(goertzel_power(block, f.high_hz, 8000) > 50.0 * goertzel_power(block, 1477.0, 8000));
}

TEST_CASE("synthesis lengths") {
  const auto a = synthesize("1234", {50.0, 50.0});
  CHECK(a.samples.size() == 3200);
  CHECK(a.duration_ms() == doctest::Approx(400.0));
  const auto b = synthesize("1", {60.0, 150.0}, 16000);
  CHECK(b.samples.size() == 3360);
  for (double s : a.samples) CHECK(std::abs(s) <= 1.0);
  CHECK(decoder_frame_samples(8000) == 205);
  CHECK(decoder_hop_samples(8000) == 51);
  CHECK(decoder_frame_samples(16000) == 410);
}

TEST_CASE("clean round trips") {
  for (const char* s : {"7#2A", "0391", "1234", "11", "0000", "*#ABCD", "D"}) {
    CAPTURE(s);
    CHECK(decode(synthesize(s, kSipTiming), kSipTiming) == s);
    CHECK(decode(synthesize(s, kTrueCallTiming), kTrueCallTiming) == s);
  }
  // Random strings with repeated symbols, any timing at or above 40 ms.
  Rng rng(11);
  std::uniform_real_distribution<double> ms(40.0, 150.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_symbols(rng, 1 + trial % 12);
    const TimingConfig cfg{ms(rng), ms(rng)};
    CAPTURE(s);
    CAPTURE(cfg.mark_ms);
    CAPTURE(cfg.space_ms);
    CHECK(decode(synthesize(s, cfg), cfg) == s);
  }
}

TEST_CASE("decoder edge cases") {
  AudioBuffer silence;
  silence.samples.assign(8000, 0.0);
  CHECK(decode(silence, kSipTiming).empty());
  CHECK(decode(AudioBuffer{}, kSipTiming).empty());
  CHECK_THROWS_AS(decode(silence, {0.0, 50.0}), Error);
  // Tones too short for the accept run are not read.
  CHECK(decode(synthesize("5", {20.0, 50.0}), kSipTiming).empty());
}

TEST_CASE("digital events") {
  const auto ev = to_events("0391", kSipTiming);
  REQUIRE(ev.size() == 4);
  CHECK(ev[0] == DtmfEvent{'0', 50.0});
  CHECK(symbols_of(ev) == "0391");
  CHECK(kSipTiming.valid_for_digital_events());
  CHECK_FALSE(TimingConfig{30.0, 50.0}.valid_for_digital_events());
  CHECK_THROWS_AS(to_events("03x", kSipTiming), Error);
}

TEST_CASE("noise") {
  Rng rng(3);
  const auto clean = synthesize("5", {100.0, 100.0});
  CHECK(apply_noise(clean, NoiseModel::none(), rng).samples == clean.samples);
  // Noise power follows the nominal tone-pair reference.
  AudioBuffer zero;
  zero.samples.assign(200000, 0.0);
  const auto noisy = apply_noise(zero, NoiseModel::gaussian(10.0), rng);
  double p = 0.0;
  for (double v : noisy.samples) p += v * v;
  p /= static_cast<double>(noisy.samples.size());
  CHECK(p == doctest::Approx(kToneAmplitude * kToneAmplitude / 10.0).epsilon(0.02));
  // High SNR still decodes.
  const TimingConfig cfg{60.0, 100.0};
  CHECK(decode(apply_noise(synthesize("0391", cfg), NoiseModel::gaussian(20.0), rng), cfg) == "0391");
}

TEST_CASE("transmission time is affine in the digit count") {
  const PathCost cost{160.412, 80.412};
  const TimingConfig cfg{100.0, 100.0};
  for (auto path : {PathKind::analogue_inband, PathKind::digital_event, PathKind::out_of_band}) {
    const auto t0 = transmission_time(0, path, cfg, cost);
    const auto step = per_digit_time(path, cfg, cost);
    for (std::size_t n = 1; n <= 15; ++n) CHECK(transmission_time(n, path, cfg, cost) == t0 + step * n);
  }
  CHECK(per_digit_time(PathKind::analogue_inband, cfg, cost) == from_ms(280.412));
  CHECK(per_digit_time(PathKind::digital_event, cfg, cost) == from_ms(80.412));
  CHECK(path_kind_from_string("out-of-band") == PathKind::out_of_band);
  CHECK_THROWS_AS(path_kind_from_string("smoke"), Error);
}

TEST_CASE("success is monotone in mark under noise") {
  // Common codes and noise streams across marks.
  std::size_t previous = 0;
  for (double mark : {20.0, 30.0, 40.0, 50.0, 60.0, 80.0, 100.0}) {
    const auto ok = simnet::markspace_successes(mark, 150.0, 3.0, 60, 77);
    CAPTURE(mark);
    CHECK(ok >= previous);
    previous = ok;
  }
  CHECK(previous == 60);
}
