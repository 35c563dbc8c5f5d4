#pragma once

#include <vector>

#include "pcnn/centered.hpp"
#include "pcnn/errors.hpp"
#include "pcnn/linalg.hpp"
#include "pcnn/transfer.hpp"

namespace pcnn {

/// Unitary discrete Fourier transform over centered indices:
///   F[m, n] = exp(-i 2 pi n m / N) / sqrt(N),
/// with n, m running over CenteredRange::of(N).  Pass inverse=true for the
/// conjugate (adjoint) transform.
inline TransferMatrix ideal_dft(int n, bool inverse = false) {
  const CenteredRange range = CenteredRange::of(n);
  const double sign = inverse ? 1.0 : -1.0;
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  CMat f(n, n);
  for (int mp = 0; mp < n; ++mp) {
    const int m = range.index(mp);
    for (int np = 0; np < n; ++np) {
      const int nn = range.index(np);
      const double phase = sign * 2.0 * kPi * static_cast<double>(nn) *
                           static_cast<double>(m) / static_cast<double>(n);
      f(mp, np) = Complex(std::cos(phase), std::sin(phase)) * norm;
    }
  }
  return TransferMatrix{std::move(f), Provenance::ideal, true};
}

/// Array-position permutation realised by applying the centered DFT twice:
/// the signal at centered index n moves to centered index -n (folded back
/// into the range modulo N, so for even N the edge index -N/2 is a fixed
/// point).  Returns p with (F F x)[i] == x[p[i]].
inline std::vector<int> reversal_permutation(int n) {
  const CenteredRange range = CenteredRange::of(n);
  std::vector<int> p(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    int src = -range.index(i);
    if (src > range.last()) src -= n;
    if (src < range.first) src += n;
    p[static_cast<size_t>(i)] = range.position(src);
  }
  return p;
}

/// Spectral pooling transform: the M centered-frequency rows of the size-N
/// unitary DFT.  Applying it keeps the M lowest centered frequencies of an
/// N-sample signal.  Requires M < N.
inline TransferMatrix ideal_pool_matrix(int m, int n) {
  if (m >= n) throw ShapeError("pooling requires fewer outputs than inputs");
  if (m < 1) throw ShapeError("pooling requires at least one output");
  const TransferMatrix full = ideal_dft(n);
  const CenteredRange rows = CenteredRange::of(m);
  const CenteredRange cols = CenteredRange::of(n);
  CMat f(m, n);
  for (int i = 0; i < m; ++i)
    f.row(i) = full.entries.row(cols.position(rows.index(i)));
  return TransferMatrix{std::move(f), Provenance::ideal, true};
}

}  // namespace pcnn
