#pragma once

#include <cmath>

#include "pcnn/geometry.hpp"

namespace pcnn {

/// Area model comparing an N-port Mach-Zehnder interferometer mesh against a
/// single star coupler of the same port count.
struct FootprintModel {
  double mzi_length = 100e-6;        // unit cell along propagation
  double mzi_width = 60e-6;          // unit cell across propagation
  double normalized_radius = 10e-6;  // target R_norm, fixes the edge angle
  double wavelength = 1550e-9;
  double slab_index = 2.85;
  double routing_margin = 0.0;       // extra clearance on every slab side
};

struct FootprintReport {
  int ports = 0;
  long mzi_count = 0;
  double mzi_area = 0.0;
  double edge_angle = 0.0;  // radians
  double radius = 0.0;
  double star_length = 0.0;
  double star_width = 0.0;
  double star_area = 0.0;
  double area_ratio = 0.0;  // mesh area / star area
};

/// Mesh size follows the butterfly decomposition of the DFT, so the port
/// count must be a power of two: N log2(N) / 2 crossing units.  The star slab
/// is bounded by its radius along propagation and by the waveguide fan-out
/// across it.
inline FootprintReport footprint_compare(int n, const FootprintModel& model = {}) {
  if (n < 2 || (n & (n - 1)) != 0)
    throw ShapeError("mesh comparison requires a power-of-two port count");
  if (model.mzi_length <= 0.0 || model.mzi_width <= 0.0)
    throw GeometryError("mesh unit cell dimensions must be positive");
  if (model.normalized_radius <= 0.0)
    throw GeometryError("normalized radius must be positive");
  if (model.routing_margin < 0.0)
    throw GeometryError("routing margin must be non-negative");

  const double lam = model.wavelength / model.slab_index;
  if (lam >= model.normalized_radius)
    throw GeometryError("normalized radius must exceed the slab wavelength");

  FootprintReport rep;
  rep.ports = n;
  int log2n = 0;
  for (int v = n; v > 1; v >>= 1) ++log2n;
  rep.mzi_count = static_cast<long>(n) * log2n / 2;
  rep.mzi_area =
      static_cast<double>(rep.mzi_count) * model.mzi_length * model.mzi_width;

  const double sin_edge = std::sqrt(lam / model.normalized_radius);
  rep.edge_angle = std::asin(sin_edge);
  rep.radius = radius_for_edge_angle(n, rep.edge_angle, lam);
  rep.star_length = rep.radius + 2.0 * model.routing_margin;
  rep.star_width = 2.0 * rep.radius * sin_edge + 2.0 * model.routing_margin;
  rep.star_area = rep.star_length * rep.star_width;
  rep.area_ratio = rep.mzi_area / rep.star_area;
  return rep;
}

}  // namespace pcnn
