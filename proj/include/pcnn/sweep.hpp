#pragma once

#include <filesystem>
#include <vector>

#include "pcnn/coupling.hpp"
#include "pcnn/csv.hpp"
#include "pcnn/dft.hpp"
#include "pcnn/metrics.hpp"

namespace pcnn {

struct TradeoffRow {
  double theta_edge;  // radians
  double radius;
  double normalized_radius;
  double fidelity;
  double transmission;
};

struct TradeoffOptions {
  double wavelength = 1550e-9;
  double slab_index = 2.85;
  double mode_width = 500e-9;
  QuadratureSpec quad{.points = 64, .refine_check = false};
  CouplingKernel kernel = CouplingKernel::exact_arc;
  ParaxialPolicy paraxial{};
};

/// Fidelity/transmission trade-off of an n-port coupler as the edge waveguide
/// angle sweeps a range (inclusive endpoints).  Larger angles shrink the
/// radius, raising transmission while degrading DFT fidelity.
inline std::vector<TradeoffRow> tradeoff_sweep(int n, double theta_min,
                                               double theta_max, int steps,
                                               const TradeoffOptions& opt = {}) {
  if (steps < 2) throw ShapeError("sweep needs at least 2 steps");
  if (!(theta_min > 0.0) || !(theta_max > theta_min))
    throw GeometryError("sweep needs 0 < theta_min < theta_max");
  const TransferMatrix reference = ideal_dft(n);
  const double lam = opt.wavelength / opt.slab_index;
  std::vector<TradeoffRow> rows;
  rows.reserve(static_cast<size_t>(steps));
  for (int s = 0; s < steps; ++s) {
    const double theta =
        theta_min + (theta_max - theta_min) * static_cast<double>(s) /
                        static_cast<double>(steps - 1);
    const double radius = radius_for_edge_angle(n, theta, lam);
    const StarCouplerGeometry g =
        make_dft_geometry(n, n, opt.wavelength, opt.slab_index, opt.mode_width,
                          radius, opt.paraxial);
    const TransferMatrix c = coupling_matrix(g, opt.quad, opt.kernel);
    rows.push_back(TradeoffRow{theta, radius, normalized_radius(theta, lam),
                               fidelity(c, reference), transmission(c)});
  }
  return rows;
}

inline void write_tradeoff_csv(const std::filesystem::path& path,
                               const std::vector<TradeoffRow>& rows) {
  CsvWriter csv(path);
  csv.row({"theta_deg", "radius_m", "normalized_radius_m", "fidelity",
           "transmission"});
  for (const auto& r : rows)
    csv.row({format_full(degrees(r.theta_edge)), format_full(r.radius),
             format_full(r.normalized_radius), format_full(r.fidelity),
             format_full(r.transmission)});
}

}  // namespace pcnn
