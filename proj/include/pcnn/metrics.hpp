#pragma once

#include "pcnn/errors.hpp"
#include "pcnn/linalg.hpp"
#include "pcnn/transfer.hpp"

namespace pcnn {

/// Similarity of a (lossy) transform to a unitary reference, insensitive to
/// overall power and global phase:
///   F = |tr(C^dag U)|^2 / (N ||C||_F^2).
/// Equals 1 iff C is a complex multiple of U; for a unitary C it reduces to
/// |tr(C^dag U) / N|^2.
inline double fidelity(const CMat& candidate, const CMat& reference) {
  if (candidate.rows() != reference.rows() ||
      candidate.cols() != reference.cols())
    throw ShapeError("fidelity: operand shapes differ");
  if (candidate.rows() != candidate.cols())
    throw ShapeError("fidelity: operands must be square");
  const double frob2 = candidate.squaredNorm();
  if (frob2 == 0.0) throw NumericalError("fidelity: candidate is zero");
  const Complex overlap = (candidate.adjoint() * reference).trace();
  const double n = static_cast<double>(candidate.rows());
  return std::norm(overlap) / (n * frob2);
}

inline double fidelity(const TransferMatrix& candidate,
                       const TransferMatrix& reference) {
  return fidelity(candidate.entries, reference.entries);
}

/// Mean power throughput over input ports: T = tr(C^dag C) / N.  Equals 1
/// for a unitary transform.
inline double transmission(const CMat& candidate) {
  if (candidate.cols() < 1) throw ShapeError("transmission: empty matrix");
  return candidate.squaredNorm() / static_cast<double>(candidate.cols());
}

inline double transmission(const TransferMatrix& candidate) {
  return transmission(candidate.entries);
}

}  // namespace pcnn
