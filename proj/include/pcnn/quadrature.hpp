#pragma once

#include <cmath>
#include <map>
#include <mutex>

#include "pcnn/errors.hpp"
#include "pcnn/linalg.hpp"

namespace pcnn {

/// Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
  RVec nodes;
  RVec weights;
};

/// Nodes and weights for an n-point Gauss-Legendre rule, computed by Newton
/// iteration on the Legendre recurrence and cached per order.
inline const GaussLegendreRule& gauss_legendre(int n) {
  if (n < 1) throw NumericalError("quadrature order must be >= 1");
  static std::map<int, GaussLegendreRule> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(kPi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 0; k < n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k + 1.0) * x * p1 - static_cast<double>(k) * p2) /
             (static_cast<double>(k) + 1.0);
      }
      dp = static_cast<double>(n) * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  auto [pos, inserted] = cache.emplace(n, std::move(rule));
  return pos->second;
}

}  // namespace pcnn
