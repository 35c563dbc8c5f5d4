#pragma once

#include <cmath>
#include <thread>
#include <vector>

#include "pcnn/geometry.hpp"
#include "pcnn/quadrature.hpp"
#include "pcnn/transfer.hpp"

namespace pcnn {

/// Scalar-diffraction model used for port-to-port coupling.
///
///  - exact_arc: double quadrature over both waveguide mouths using the exact
///    Euclidean distance between points on the two confocal arcs, cylindrical
///    kernel exp(-i k d)/sqrt(lambda d) and obliquity cos(theta)cos(theta').
///    Reciprocal by construction; the default.
///  - separable: classic Fraunhofer-style factorisation into an emission and
///    a reception integral tied together by exp(i k R)/sqrt(i lambda R).
///    Cheaper (O(points) per entry instead of O(points^2)) but slightly less
///    faithful near the arc edges.
enum class CouplingKernel { exact_arc, separable };

struct QuadratureSpec {
  int points = 64;                  // Gauss-Legendre order per dimension
  double window_half_widths = 5.0;  // half-window in units of the mode width
  bool refine_check = true;         // re-evaluate at double order and compare
  double refine_tol = 1e-6;         // max allowed entry disagreement
  int threads = 1;                  // 0 = hardware concurrency
};

namespace detail {

struct PortTable {
  // Per-port arrays of quadrature nodes (angles) and folded weights.
  std::vector<RVec> theta;   // node angles
  std::vector<RVec> weight;  // GL weight * window * mode profile * extras
};

inline CMat coupling_entries(const StarCouplerGeometry& g,
                             CouplingKernel kernel, int points,
                             double window_half_widths, int threads) {
  const double r = g.radius;
  const double w = g.mode_width;
  const double lam = g.slab_wavelength();
  const double k = g.slab_wavenumber();
  const int n = g.transform_size;
  const int m = g.output_ports;
  const GaussLegendreRule& rule = gauss_legendre(points);
  const double half = window_half_widths * w / r;  // angular half-window
  const double mode_amp = std::pow(2.0 / (kPi * w * w), 0.25);

  auto make_table = [&](const RVec& centers, bool obliquity) {
    PortTable t;
    const int ports = static_cast<int>(centers.size());
    t.theta.resize(static_cast<size_t>(ports));
    t.weight.resize(static_cast<size_t>(ports));
    for (int p = 0; p < ports; ++p) {
      RVec th(points), wt(points);
      for (int i = 0; i < points; ++i) {
        const double theta = centers[p] + half * rule.nodes[i];
        const double u = r * (theta - centers[p]) / w;
        double val = rule.weights[i] * half * mode_amp * std::exp(-u * u) * r;
        if (obliquity) val *= std::cos(theta);
        th[i] = theta;
        wt[i] = val;
      }
      t.theta[static_cast<size_t>(p)] = std::move(th);
      t.weight[static_cast<size_t>(p)] = std::move(wt);
    }
    return t;
  };

  CMat out(m, n);
  if (kernel == CouplingKernel::exact_arc) {
    // Transmit arc is centred at (R, 0) and passes through the origin;
    // receive arc is centred at the origin.  Both have radius R, so each
    // arc's mouths focus onto the opposite arc (confocal layout).
    const PortTable tin = make_table(g.input_angles, true);
    const PortTable tout = make_table(g.output_angles, true);
    std::vector<RVec> px(static_cast<size_t>(n)), py(static_cast<size_t>(n));
    for (int c = 0; c < n; ++c) {
      px[static_cast<size_t>(c)] =
          r - r * tin.theta[static_cast<size_t>(c)].array().cos();
      py[static_cast<size_t>(c)] =
          -r * tin.theta[static_cast<size_t>(c)].array().sin();
    }
    std::vector<RVec> qx(static_cast<size_t>(m)), qy(static_cast<size_t>(m));
    for (int c = 0; c < m; ++c) {
      qx[static_cast<size_t>(c)] =
          r * tout.theta[static_cast<size_t>(c)].array().cos();
      qy[static_cast<size_t>(c)] =
          r * tout.theta[static_cast<size_t>(c)].array().sin();
    }
    const Complex quarter_turn = std::polar(1.0, -kPi / 4.0);  // 1/sqrt(i)
    auto entry = [&](int mi, int ni) {
      const RVec& wi = tin.weight[static_cast<size_t>(ni)];
      const RVec& wo = tout.weight[static_cast<size_t>(mi)];
      const RVec& pxi = px[static_cast<size_t>(ni)];
      const RVec& pyi = py[static_cast<size_t>(ni)];
      const RVec& qxo = qx[static_cast<size_t>(mi)];
      const RVec& qyo = qy[static_cast<size_t>(mi)];
      Complex acc(0.0, 0.0);
      for (int i = 0; i < points; ++i) {
        Complex row_acc(0.0, 0.0);
        for (int j = 0; j < points; ++j) {
          const double dx = qxo[j] - pxi[i];
          const double dy = qyo[j] - pyi[i];
          const double d = std::sqrt(dx * dx + dy * dy);
          row_acc += wo[j] * std::polar(1.0 / std::sqrt(lam * d), -k * d);
        }
        acc += wi[i] * row_acc;
      }
      return quarter_turn * acc;
    };
    auto fill = [&](int begin, int end) {
      for (int idx = begin; idx < end; ++idx)
        out(idx % m, idx / m) = entry(idx % m, idx / m);
    };
    int nthreads = threads == 0
                       ? static_cast<int>(std::thread::hardware_concurrency())
                       : threads;
    if (nthreads < 1) nthreads = 1;
    const int total = m * n;
    if (nthreads == 1 || total < 4 * nthreads) {
      fill(0, total);
    } else {
      std::vector<std::thread> pool;
      const int chunk = (total + nthreads - 1) / nthreads;
      for (int t = 0; t < nthreads; ++t) {
        const int begin = t * chunk;
        const int end = std::min(total, begin + chunk);
        if (begin < end) pool.emplace_back(fill, begin, end);
      }
      for (auto& th : pool) th.join();
    }
  } else {
    // Separable kernel: emission integral over the transmit mouth against the
    // receive direction, reception integral over the receive mouth against
    // the transmit direction, joined by the on-axis propagator.
    const PortTable tin = make_table(g.input_angles, true);
    const PortTable tout = make_table(g.output_angles, false);
    const Complex prefactor =
        std::polar(1.0 / std::sqrt(lam * r), k * r - kPi / 4.0);
    for (int ni = 0; ni < n; ++ni) {
      const RVec& thi = tin.theta[static_cast<size_t>(ni)];
      const RVec& wi = tin.weight[static_cast<size_t>(ni)];
      const double sin_in = std::sin(g.input_angles[ni]);
      for (int mi = 0; mi < m; ++mi) {
        const RVec& tho = tout.theta[static_cast<size_t>(mi)];
        const RVec& wo = tout.weight[static_cast<size_t>(mi)];
        const double sin_out = std::sin(g.output_angles[mi]);
        Complex emit(0.0, 0.0);
        for (int i = 0; i < points; ++i)
          emit += wi[i] * std::polar(1.0, -k * r * std::sin(thi[i]) * sin_out);
        Complex recv(0.0, 0.0);
        for (int j = 0; j < points; ++j)
          recv += wo[j] * std::polar(1.0, -k * r *
                                              (tho[j] - g.output_angles[mi]) *
                                              sin_in);
        out(mi, ni) = prefactor * emit * recv;
      }
    }
  }
  return out;
}

inline void remove_global_phase(CMat& k, int n, int m) {
  const Complex center = k(m / 2, n / 2);
  const double mag = std::abs(center);
  if (mag == 0.0)
    throw NumericalError("global phase undefined: centre coupling is zero");
  k *= std::conj(center) / mag;
}

}  // namespace detail

/// Transfer matrix of a star coupler under scalar diffraction.  The result
/// has its global phase removed so the centre entry (input port 0 to output
/// port 0) is real and positive.  When spec.refine_check is set the matrix is
/// recomputed at twice the quadrature order and the run aborts with
/// QuadratureError if any entry moves by more than spec.refine_tol; the
/// refined matrix is returned.
inline TransferMatrix coupling_matrix(const StarCouplerGeometry& g,
                                      const QuadratureSpec& spec = {},
                                      CouplingKernel kernel =
                                          CouplingKernel::exact_arc) {
  if (spec.points < 2)
    throw NumericalError("coupling quadrature needs at least 2 points");
  if (spec.window_half_widths <= 0.0)
    throw NumericalError("integration window must be positive");
  const int n = g.transform_size;
  const int m = g.output_ports;
  CMat base = detail::coupling_entries(g, kernel, spec.points,
                                       spec.window_half_widths, spec.threads);
  detail::remove_global_phase(base, n, m);
  if (!spec.refine_check) {
    if (!all_finite(base))
      throw NumericalError("coupling integral produced non-finite entries");
    return TransferMatrix{std::move(base), Provenance::star_coupler, true};
  }
  CMat fine = detail::coupling_entries(g, kernel, 2 * spec.points,
                                       spec.window_half_widths, spec.threads);
  detail::remove_global_phase(fine, n, m);
  if (!all_finite(fine))
    throw NumericalError("coupling integral produced non-finite entries");
  Eigen::Index wr = 0, wc = 0;
  const double delta = (base - fine).cwiseAbs().maxCoeff(&wr, &wc);
  if (delta > spec.refine_tol)
    throw QuadratureError(
        "coupling quadrature did not settle: worst entry moved by " +
            std::to_string(delta) + " when doubling the order",
        base(wr, wc), fine(wr, wc), delta);
  return TransferMatrix{std::move(fine), Provenance::star_coupler, true};
}

}  // namespace pcnn
