#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace jsaphase {

/// Invalid or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Too few events or counts for an estimate (CLI exit code 3).
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A fit failed to converge or is degenerate (CLI exit code 4). Carries the
/// objective profile that was scanned, if any.
class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, std::vector<std::pair<double, double>> profile = {})
      : std::runtime_error(what), profile_(std::move(profile)) {}

  const std::vector<std::pair<double, double>>& profile() const { return profile_; }

 private:
  std::vector<std::pair<double, double>> profile_;
};

}  // namespace jsaphase
