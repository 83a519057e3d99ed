#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace relcox {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file, unknown actor, empty stream.
class IngestError : public Error {
 public:
  IngestError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Invalid covariate, simulation or solver configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An observed receiver is not in the sender's risk set, or a receiver set is
// larger than the risk set.
class RiskSetError : public Error {
 public:
  using Error::Error;
};

// W_t(beta, i) == 0: the sender has no admissible receiver.
class DegenerateSenderError : public Error {
 public:
  using Error::Error;
};

class SingularInformationError : public Error {
 public:
  using Error::Error;
};

}  // namespace relcox
