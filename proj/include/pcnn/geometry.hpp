#pragma once

#include <cmath>
#include <string>

#include "pcnn/centered.hpp"
#include "pcnn/errors.hpp"
#include "pcnn/linalg.hpp"

namespace pcnn {

/// Bound on waveguide fan-out angles.  The scalar-diffraction model loses
/// accuracy away from the slab axis, so exceeding the bound either records a
/// warning on the geometry (default) or throws (strict).
struct ParaxialPolicy {
  double limit = radians(20.0);
  bool strict = false;
};

/// Confocal star coupler: two facing arcs of radius R whose waveguide mouths
/// sit at angles chosen so free propagation across the slab realises a
/// centered DFT.  Input ports live on one arc (transform_size of them),
/// output ports on the other (output_ports <= transform_size, same angular
/// pitch, so fewer ports truncate the frequency grid symmetrically).
struct StarCouplerGeometry {
  double wavelength = 0.0;  // vacuum wavelength, metres
  double slab_index = 1.0;  // effective index of the slab region
  double mode_width = 0.0;  // 1/e field half-width of the waveguide mode
  double radius = 0.0;      // arc radius, metres
  int transform_size = 0;   // N: input ports and DFT size
  int output_ports = 0;     // M: output ports
  RVec input_angles;        // radians, ordered by centered index
  RVec output_angles;
  std::string warning;      // non-empty if the paraxial bound was exceeded

  double slab_wavelength() const { return wavelength / slab_index; }
  double slab_wavenumber() const { return 2.0 * kPi / slab_wavelength(); }

  /// Largest absolute fan-out angle on the input side.
  double edge_angle() const { return input_angles.cwiseAbs().maxCoeff(); }
};

/// Angular pitch parameter: sin(theta_n) = n * sqrt(slab_wavelength / (N R)).
inline double angle_for_index(int idx, int n, double radius,
                              double slab_wavelength) {
  const double s = static_cast<double>(idx) *
                   std::sqrt(slab_wavelength / (static_cast<double>(n) * radius));
  if (std::abs(s) > 1.0)
    throw GeometryError("waveguide angle undefined: |sin| > 1 (radius too "
                        "small for the requested port count)");
  return std::asin(s);
}

/// Radius that places the edge waveguide (centered index n0 = -floor(N/2))
/// at the given fan-out angle:  R = n0^2 * slab_wavelength / (N sin^2 theta).
inline double radius_for_edge_angle(int n, double theta_edge,
                                    double slab_wavelength) {
  if (n < 1) throw GeometryError("port count must be >= 1");
  if (theta_edge <= 0.0 || theta_edge >= kPi / 2.0)
    throw GeometryError("edge angle must lie in (0, pi/2)");
  const double n0 = static_cast<double>(n / 2);
  const double s = std::sin(theta_edge);
  return n0 * n0 * slab_wavelength / (static_cast<double>(n) * s * s);
}

/// Size-independent radius scale R_norm = slab_wavelength / sin^2(theta_edge).
/// For even N the exact radius is (N/4) * R_norm.
inline double normalized_radius(double theta_edge, double slab_wavelength) {
  const double s = std::sin(theta_edge);
  if (s <= 0.0) throw GeometryError("edge angle must be positive");
  return slab_wavelength / (s * s);
}

inline StarCouplerGeometry make_dft_geometry(int n, int m, double wavelength,
                                             double slab_index,
                                             double mode_width, double radius,
                                             const ParaxialPolicy& policy = {}) {
  if (n < 1 || m < 1 || m > n)
    throw ShapeError("star coupler requires 1 <= outputs <= inputs");
  if (wavelength <= 0.0 || mode_width <= 0.0 || radius <= 0.0)
    throw GeometryError("wavelength, mode width and radius must be positive");
  if (slab_index < 1.0) throw GeometryError("slab index must be >= 1");
  if (mode_width >= radius / 20.0)
    throw GeometryError("mode width must be small compared to the radius");

  StarCouplerGeometry g;
  g.wavelength = wavelength;
  g.slab_index = slab_index;
  g.mode_width = mode_width;
  g.radius = radius;
  g.transform_size = n;
  g.output_ports = m;

  const double lam = g.slab_wavelength();
  const CenteredRange in_range = CenteredRange::of(n);
  const CenteredRange out_range = CenteredRange::of(m);
  g.input_angles.resize(n);
  for (int i = 0; i < n; ++i)
    g.input_angles[i] = angle_for_index(in_range.index(i), n, radius, lam);
  g.output_angles.resize(m);
  for (int i = 0; i < m; ++i)
    g.output_angles[i] = angle_for_index(out_range.index(i), n, radius, lam);

  const double worst = std::max(g.input_angles.cwiseAbs().maxCoeff(),
                                g.output_angles.cwiseAbs().maxCoeff());
  if (worst > policy.limit) {
    const std::string msg = "fan-out angle " + std::to_string(degrees(worst)) +
                            " deg exceeds the paraxial bound " +
                            std::to_string(degrees(policy.limit)) + " deg";
    if (policy.strict) throw GeometryError(msg);
    g.warning = msg;
  }
  return g;
}

}  // namespace pcnn
