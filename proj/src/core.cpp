#include "civsim/core.hpp"

#include <algorithm>
#include <cmath>

namespace civsim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidNumber: return "InvalidNumber";
    case ErrorCode::NameTooLong: return "NameTooLong";
    case ErrorCode::InvalidLength: return "InvalidLength";
    case ErrorCode::InvalidSymbol: return "InvalidSymbol";
    case ErrorCode::Unroutable: return "Unroutable";
    case ErrorCode::Busy: return "Busy";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::CapabilityMissing: return "CapabilityMissing";
    case ErrorCode::CapabilityViolation: return "CapabilityViolation";
    case ErrorCode::Exhausted: return "Exhausted";
    case ErrorCode::UnknownIndex: return "UnknownIndex";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::NotApplicable: return "NotApplicable";
    case ErrorCode::Infeasible: return "Infeasible";
  }
  return "Unknown";
}

SimDuration from_ms(double ms) {
  return SimDuration(static_cast<std::int64_t>(std::llround(ms * 1000.0)));
}

double to_ms(SimDuration d) { return static_cast<double>(d.count()) / 1000.0; }

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool is_decimal(std::string_view s) noexcept {
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

PhoneNumber PhoneNumber::parse(std::string_view digits) {
  if (digits.empty()) throw Error(ErrorCode::InvalidNumber, "empty number");
  if (digits.size() > kMaxNumberDigits)
    throw Error(ErrorCode::InvalidNumber, "more than 15 digits: " + std::string(digits));
  if (!is_decimal(digits))
    throw Error(ErrorCode::InvalidNumber, "non-digit characters: " + std::string(digits));
  return PhoneNumber(std::string(digits));
}

CallerLine parse_caller_line(std::string_view raw_number, std::string_view raw_name) {
  CallerLine line;
  line.number = PhoneNumber::parse(raw_number);
  if (raw_name.size() > kMaxNameLength)
    throw Error(ErrorCode::NameTooLong, "caller name exceeds 15 characters: " + std::string(raw_name));
  line.name = std::string(raw_name);
  line.civ_flag = !raw_name.empty() && raw_name.back() == kCivFlag;
  return line;
}

std::string flag_name(std::string_view name) {
  std::string out(name.substr(0, std::min(name.size(), kMaxNameLength - 1)));
  out.push_back(kCivFlag);
  return out;
}

Challenge Challenge::from_digits(std::string_view digits) {
  if (digits.empty() || digits.size() > kMaxNumberDigits || !is_decimal(digits))
    throw Error(ErrorCode::InvalidLength, "challenge must be 1-15 decimal digits");
  return Challenge(std::string(digits));
}

Challenge generate_challenge(std::size_t n, Rng& rng) {
  if (n == 0 || n > kMaxNumberDigits)
    throw Error(ErrorCode::InvalidLength, "challenge length must be 1..15, got " + std::to_string(n));
  std::uniform_int_distribution<int> digit(0, 9);
  std::string out(n, '0');
  for (auto& c : out) c = static_cast<char>('0' + digit(rng));
  return Challenge::from_digits(out);
}

std::string_view to_string(VerificationStatus status) {
  switch (status) {
    case VerificationStatus::Verified: return "Verified";
    case VerificationStatus::NotVerified: return "NotVerified";
    case VerificationStatus::NotAttempted: return "NotAttempted";
  }
  return "Unknown";
}

VerificationStatus verify_response(const Challenge& challenge, std::string_view response) {
  return response == challenge.digits() ? VerificationStatus::Verified
                                        : VerificationStatus::NotVerified;
}

}  // namespace civsim
