#pragma once

#include <stdexcept>
#include <string>

namespace epicpt {

/// Trajectory or state that violates a model invariant (negative compartment,
/// infection without an infective, ...).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Non-finite likelihood or density where a finite value is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The latent-data proposal cannot produce a trajectory matching the counts.
class ProposalInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or input data, detected before any sampling.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sampler could not start or stalled.
class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable, unwritable or malformed file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void warn(const std::string& message);

}  // namespace epicpt
