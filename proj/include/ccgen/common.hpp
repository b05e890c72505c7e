#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ccgen {

// Contract violation in caller-supplied input: bad config, malformed file,
// out-of-range coded value. The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A persisted artifact (checkpoint, vocabulary, pair file) cannot be decoded.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Optimization produced a non-finite loss or state.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a, used for config fingerprints.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value);

}  // namespace ccgen
