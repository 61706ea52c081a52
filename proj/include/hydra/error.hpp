#pragma once

#include <stdexcept>
#include <string>

namespace hydra {

/// Root of every exception thrown by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Memory histories fell out of lockstep or a step number was skipped.
class StateCorruption : public Error {
 public:
  using Error::Error;
};

/// Missing files, invalid configuration values, unusable datasets.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An LLM or embedding service could not be reached after retries.
class BackendUnavailable : public Error {
 public:
  using Error::Error;
};

class PlannerParseError : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix dimensions disagree with the network layout.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class ToolkitUnavailable : public Error {
 public:
  using Error::Error;
};

class ToolkitProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace hydra
