#pragma once

#include <stdexcept>
#include <string>

namespace avsync {

// Exit codes used by the command-line tool. Library code throws; the tool maps
// exception types onto these codes.
enum class ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kBadConfig = 2,
  kInfeasibleAugmentation = 3,
  kNumericFailure = 4,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::kFailure)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format error: " + what) {}
};

class CorruptCorpusError : public Error {
 public:
  explicit CorruptCorpusError(const std::string& what)
      : Error("corrupted corpus: " + what) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what)
      : Error("dimension error: " + what, ExitCode::kNumericFailure) {}
};

class AugmentationInfeasible : public Error {
 public:
  explicit AugmentationInfeasible(const std::string& what)
      : Error("augmentation infeasible: " + what, ExitCode::kInfeasibleAugmentation) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error("numeric failure: " + what, ExitCode::kNumericFailure) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error("bad config: " + what, ExitCode::kBadConfig) {}
};

class UndefinedMetricError : public Error {
 public:
  explicit UndefinedMetricError(const std::string& what)
      : Error("undefined metric: " + what) {}
};

}  // namespace avsync
