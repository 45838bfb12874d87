#pragma once

// Domain types shared by every module: phone numbers, caller lines,
// challenges, verification results, simulated time and the error type.

#include <chrono>
#include <compare>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace civsim {

enum class ErrorCode {
  InvalidNumber,
  NameTooLong,
  InvalidLength,
  InvalidSymbol,
  Unroutable,
  Busy,
  InvalidState,
  CapabilityMissing,
  CapabilityViolation,
  Exhausted,
  UnknownIndex,
  ConfigError,
  NotApplicable,
  Infeasible,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Simulated time. Integer microseconds so that latency components add up
// exactly.
using SimDuration = std::chrono::duration<std::int64_t, std::micro>;
using SimTime = SimDuration;

SimDuration from_ms(double ms);
double to_ms(SimDuration d);

// One injectable generator per run; nothing in the library touches global
// randomness.
using Rng = std::mt19937_64;

// Derives an independent stream seed (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

inline constexpr std::size_t kMaxNumberDigits = 15;
inline constexpr std::size_t kMaxShortNumberDigits = 4;
inline constexpr std::size_t kMaxNameLength = 15;
inline constexpr char kCivFlag = '*';
inline constexpr std::size_t kDefaultChallengeLength = 4;

enum class NumberKind { standard, nondialable_short };

class PhoneNumber {
 public:
  PhoneNumber() = default;

  // Throws InvalidNumber on empty input, non-digits or more than 15 digits.
  static PhoneNumber parse(std::string_view digits);

  const std::string& digits() const noexcept { return digits_; }
  NumberKind kind() const noexcept {
    return digits_.size() <= kMaxShortNumberDigits ? NumberKind::nondialable_short
                                                   : NumberKind::standard;
  }
  bool is_nondialable_short() const noexcept { return kind() == NumberKind::nondialable_short; }
  bool empty() const noexcept { return digits_.empty(); }

  friend auto operator<=>(const PhoneNumber&, const PhoneNumber&) = default;

 private:
  explicit PhoneNumber(std::string digits) : digits_(std::move(digits)) {}
  std::string digits_;
};

struct CallerLine {
  PhoneNumber number;
  std::string name;  // includes the trailing flag character when present
  bool civ_flag = false;

  friend bool operator==(const CallerLine&, const CallerLine&) = default;
};

CallerLine parse_caller_line(std::string_view raw_number, std::string_view raw_name);

// Appends the CIV flag to a display name, keeping the 15 character limit.
std::string flag_name(std::string_view name);

class Challenge {
 public:
  // Throws InvalidLength unless 1..15 decimal digits.
  static Challenge from_digits(std::string_view digits);

  const std::string& digits() const noexcept { return digits_; }
  std::size_t size() const noexcept { return digits_.size(); }

  friend bool operator==(const Challenge&, const Challenge&) = default;

 private:
  explicit Challenge(std::string digits) : digits_(std::move(digits)) {}
  std::string digits_;
};

// n uniform, independent decimal digits; leading zeros are kept.
Challenge generate_challenge(std::size_t n, Rng& rng);

enum class VerificationStatus { Verified, NotVerified, NotAttempted };

std::string_view to_string(VerificationStatus status);

VerificationStatus verify_response(const Challenge& challenge, std::string_view response);

bool is_decimal(std::string_view s) noexcept;

}  // namespace civsim
