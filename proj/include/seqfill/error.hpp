#pragma once

#include <stdexcept>
#include <string>

namespace seqfill {

// Exit codes: 0 success, 1 data error, 2 config error, 3 runtime/scoring error.
class Error : public std::runtime_error {
 public:
  Error(std::string msg, int exit_code)
      : std::runtime_error(std::move(msg)), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error("data error: " + msg, 1) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("config error: " + msg, 2) {}
};

class ScoringError : public Error {
 public:
  explicit ScoringError(const std::string& msg) : Error("scoring error: " + msg, 3) {}
};

class DecodeError : public Error {
 public:
  explicit DecodeError(const std::string& msg) : Error("decode error: " + msg, 3) {}
};

class GrammarError : public Error {
 public:
  explicit GrammarError(const std::string& msg) : Error("grammar error: " + msg, 3) {}
};

class CompositionError : public Error {
 public:
  explicit CompositionError(const std::string& msg)
      : Error("composition error: " + msg, 3) {}
};

}  // namespace seqfill
