#pragma once

#include <stdexcept>
#include <string>

namespace bbmtraps {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Offspring law or other domain type failed its construction invariants.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A formula was evaluated outside its domain of validity.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Operation requires a supercritical offspring law (mean > 1).
class SubcriticalError : public Error {
 public:
  using Error::Error;
};

/// A query touched space outside the sampled trap window.
class WindowError : public Error {
 public:
  using Error::Error;
};

/// Simulation hit the particle cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Too many replicates were truncated by the particle cap.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// No replicate satisfied the conditioning event.
class AcceptanceError : public Error {
 public:
  using Error::Error;
};

/// Numerical refinement did not reach the requested tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration failed schema validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace bbmtraps
