// Common aliases and error types shared by every etse module.
#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace etse {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid scenario/model configuration. Messages name the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Model evaluation or integration failed (non-finite rates, step underflow).
class SimulationFault : public Error {
 public:
  using Error::Error;
};

/// A runtime guarantee was violated (e.g. the Zeno guard fired).
class AssertionFailure : public Error {
 public:
  using Error::Error;
};

/// Numerical routine could not produce a result (eigensolver, infeasible tuning).
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace etse
