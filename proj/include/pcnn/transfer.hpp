#pragma once

#include <utility>

#include "pcnn/errors.hpp"
#include "pcnn/linalg.hpp"

namespace pcnn {

enum class Provenance { ideal, star_coupler };

/// Complex field coupling coefficients of an optical transform.  Rows index
/// output ports, columns index input ports; both sides use centered port
/// indices (see CenteredRange).
struct TransferMatrix {
  CMat entries;
  Provenance provenance = Provenance::ideal;
  bool global_phase_removed = false;

  int outputs() const { return static_cast<int>(entries.rows()); }
  int inputs() const { return static_cast<int>(entries.cols()); }

  bool is_unitary(double tol = 1e-12) const {
    if (entries.rows() != entries.cols()) return false;
    CMat g = entries.adjoint() * entries;
    g.diagonal().array() -= Complex(1.0, 0.0);
    return g.cwiseAbs().maxCoeff() <= tol;
  }

  /// Power throughput per input port: column sums of |entry|^2.  For a
  /// unitary transform every value is exactly 1.
  RVec column_powers() const {
    return entries.cwiseAbs2().colwise().sum().transpose();
  }
};

}  // namespace pcnn
