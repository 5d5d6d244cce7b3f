#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kicksq {

// Base of everything this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied a value outside an operation's domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A moment became non-finite during iteration. Carries the kick index at
// which it was detected.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, std::uint64_t kick_index)
      : Error(what + " (at kick " + std::to_string(kick_index) + ")"),
        kick_index_(kick_index) {}

  std::uint64_t kick_index() const noexcept { return kick_index_; }

 private:
  std::uint64_t kick_index_;
};

// The cycle map is not contracting, so no fixed point is attracting.
class NoStationaryState : public Error {
 public:
  explicit NoStationaryState(double spectral_radius)
      : Error("no stationary state: spectral radius of the cycle map is " +
              std::to_string(spectral_radius) + " >= 1"),
        spectral_radius_(spectral_radius) {}

  double spectral_radius() const noexcept { return spectral_radius_; }

 private:
  double spectral_radius_;
};

struct Diagnostic {
  int line = 0;  // 0 when the problem is not tied to a line (missing key)
  std::string field;
  std::string message;

  std::string str() const {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!field.empty()) out += field + ": ";
    return out + message;
  }
};

// Configuration rejected. Holds every problem found, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<Diagnostic> diagnostics)
      : Error(join(diagnostics)), diagnostics_(std::move(diagnostics)) {}

  const std::vector<Diagnostic>& diagnostics() const noexcept {
    return diagnostics_;
  }

 private:
  static std::string join(const std::vector<Diagnostic>& ds) {
    std::string out = "invalid configuration";
    for (const auto& d : ds) out += "\n  " + d.str();
    return out;
  }

  std::vector<Diagnostic> diagnostics_;
};

}  // namespace kicksq
