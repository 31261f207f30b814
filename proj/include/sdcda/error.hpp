#pragma once

#include <stdexcept>
#include <string>

namespace sdcda {

// Every failure the library raises derives from Error; the CLI maps the
// concrete type onto its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

// Invalid argument to a mathematical routine (zero vector, empty batch, ...).
class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain"; }
};

class InternalError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "internal"; }
};

// Malformed external data (csv rows, manifests, containers).
class IngestionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "data"; }
};

// NaN/Inf in a loss or gradient, or a loss above its configured ceiling.
class DivergenceError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "divergence"; }
};

}  // namespace sdcda
