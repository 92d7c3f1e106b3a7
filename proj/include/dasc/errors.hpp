#pragma once

#include <stdexcept>
#include <string>

namespace dasc {

// Exit codes used by the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept = 0;
};

/// Shape mismatches, invalid options, malformed profiles.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return kExitConfig; }
};

/// Missing clips, empty selections, unreadable stores.
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return kExitData; }
};

/// Corrupted or truncated binary files. Reported with the data exit code.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// NaN/Inf encountered in a forward value or a loss.
class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return kExitNumeric; }
};

}  // namespace dasc
