#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace pcnn {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or index mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Physically inconsistent or out-of-domain geometry parameters.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration (unknown keys, bad values, missing sections).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Corrupt or inconsistent input data (datasets, checkpoints, matrix files).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure detected at runtime (non-finite values, refusal to
/// converge, undefined normalisations).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Quadrature refinement disagreed beyond tolerance.  Carries both estimates
/// of the worst matrix entry so the caller can judge the discrepancy.
class QuadratureError : public NumericalError {
 public:
  QuadratureError(const std::string& what, std::complex<double> coarse,
                  std::complex<double> fine, double delta)
      : NumericalError(what), coarse_estimate(coarse), fine_estimate(fine),
        max_entry_delta(delta) {}

  std::complex<double> coarse_estimate;
  std::complex<double> fine_estimate;
  double max_entry_delta;
};

/// Training hit a non-finite loss.  Carries the failing batch index.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, long epoch_in, long batch_in)
      : NumericalError(what), epoch(epoch_in), batch(batch_in) {}

  long epoch;
  long batch;
};

}  // namespace pcnn
