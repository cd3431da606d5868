#pragma once

#include <stdexcept>
#include <string>

namespace semcom {

// Every library error names the module that raised it so the CLI can report
// "<module>: <context>" on a single line.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message);
  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CorruptionError : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class MissingCheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace semcom
