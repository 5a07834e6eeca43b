#pragma once

#include <stdexcept>
#include <string>

namespace hetmed {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed inputs: bad CSV, bad config, violated data invariants. CLI exit code 2.
class InputError : public Error {
 public:
  explicit InputError(const std::string& msg) : Error(msg) {}
};

// Estimation failures: non-convergence, singular systems. CLI exit code 3.
class EstimationError : public Error {
 public:
  explicit EstimationError(const std::string& msg) : Error(msg) {}
};

class ConvergenceError : public EstimationError {
 public:
  explicit ConvergenceError(const std::string& msg) : EstimationError(msg) {}
};

class RankDeficiencyError : public EstimationError {
 public:
  explicit RankDeficiencyError(const std::string& msg) : EstimationError(msg) {}
};

// Raised when the moment system cannot pin down theta because the bread
// matrix is numerically singular, typically because var(M|A,X) barely moves
// with A. The second moment component draws its information from that
// heteroskedasticity, so a flat conditional variance leaves theta1
// unidentified.
class WeakIdentificationError : public EstimationError {
 public:
  explicit WeakIdentificationError(const std::string& msg) : EstimationError(msg) {}
};

class SingularBreadError : public EstimationError {
 public:
  explicit SingularBreadError(const std::string& msg) : EstimationError(msg) {}
};

}  // namespace hetmed
