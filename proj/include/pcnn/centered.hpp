#pragma once

#include <vector>

#include "pcnn/errors.hpp"

namespace pcnn {

/// A symmetric range of integer port indices around zero.  For even sizes the
/// range is [-N/2, N/2), for odd sizes [-(N-1)/2, (N-1)/2]; zero is always a
/// member.
struct CenteredRange {
  int size = 0;
  int first = 0;  // smallest index in the range

  static CenteredRange of(int n) {
    if (n < 1) throw ShapeError("centered range requires size >= 1");
    return CenteredRange{n, -(n / 2)};
  }

  int last() const { return first + size - 1; }
  bool contains(int idx) const { return idx >= first && idx <= last(); }

  /// Centered index for a 0-based array position.
  int index(int position) const { return first + position; }

  /// 0-based array position of a centered index.
  int position(int idx) const {
    if (!contains(idx)) throw ShapeError("centered index out of range");
    return idx - first;
  }

  std::vector<int> indices() const {
    std::vector<int> out(static_cast<size_t>(size));
    for (int i = 0; i < size; ++i) out[static_cast<size_t>(i)] = first + i;
    return out;
  }
};

}  // namespace pcnn
