#pragma once

#include <random>
#include <span>
#include <vector>

#include "pcnn/metrics.hpp"
#include "pcnn/network.hpp"
#include "pcnn/trainer.hpp"

namespace pcnn {

/// Which part of the multiplicative per-element error is applied.
enum class NoiseKind { phase_only, amplitude_only, complex_noise };

/// Fabrication/control error model: every targeted complex element is
/// multiplied by a * exp(i dphi) with dphi ~ N(0, (2 pi sigma)^2) and
/// a = clamp(1 - |N(0, sigma^2)|, 0, 1) (loss only, never gain).
struct NoiseSpec {
  double sigma = 0.0;
  NoiseKind kind = NoiseKind::complex_noise;
  bool target_couplers = true;  // fixed transforms
  bool target_masks = true;     // trainable diagonal stages
  uint64_t seed = 1;
};

inline const char* to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::phase_only: return "phase";
    case NoiseKind::amplitude_only: return "amplitude";
    case NoiseKind::complex_noise: return "complex";
  }
  return "?";
}

namespace detail {

class NoiseDraw {
 public:
  NoiseDraw(double sigma, NoiseKind kind, uint64_t seed)
      : sigma_(sigma), kind_(kind), rng_(seed), normal_(0.0, 1.0) {}

  Complex factor() {
    double amp = 1.0;
    double phase = 0.0;
    if (kind_ != NoiseKind::phase_only) {
      amp = 1.0 - std::abs(sigma_ * normal_(rng_));
      amp = std::clamp(amp, 0.0, 1.0);
    }
    if (kind_ != NoiseKind::amplitude_only)
      phase = 2.0 * kPi * sigma_ * normal_(rng_);
    return std::polar(amp, phase);
  }

  void perturb(CMat& m) {
    // Column-major entry order (Eigen storage order).
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) *= factor();
  }

  void perturb(FilterMask& mask) {
    CVec f(mask.size);
    for (int i = 0; i < mask.size; ++i) f[i] = factor();
    if (mask.noise.size() == 0)
      mask.noise = std::move(f);
    else
      mask.noise = mask.noise.cwiseProduct(f);
  }

 private:
  double sigma_;
  NoiseKind kind_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

}  // namespace detail

/// Copy of the network with frozen multiplicative errors applied to the
/// selected element classes.  Mask parameters stay trainable; their noise is
/// a fixed factor on top of whatever the parameters realise.
inline Network inject_noise(const Network& base, const NoiseSpec& spec) {
  if (spec.sigma < 0.0) throw ConfigError("noise: sigma must be >= 0");
  if (!spec.target_couplers && !spec.target_masks)
    throw ConfigError("noise: at least one target class required");
  Network noisy = base;
  detail::NoiseDraw draw(spec.sigma, spec.kind, spec.seed);
  for (Layer& layer : noisy.layers()) {
    if (auto* conv = std::get_if<ConvolutionLayer>(&layer)) {
      if (spec.target_couplers) {
        draw.perturb(conv->f_in);
        draw.perturb(conv->f_out);
      }
      if (spec.target_masks) draw.perturb(conv->mask);
    } else if (auto* stage = std::get_if<PhaseStageLayer>(&layer)) {
      if (spec.target_couplers) draw.perturb(stage->f);
      if (spec.target_masks) draw.perturb(stage->mask);
    } else if (auto* fixed = std::get_if<TransformLayer>(&layer)) {
      if (spec.target_couplers) draw.perturb(fixed->f);
    }
    // Dense layers model electronic or calibrated mesh weights; the
    // multiplicative optical error classes above do not apply to them.
  }
  return noisy;
}

struct NoisePoint {
  double sigma = 0.0;
  NoiseKind kind = NoiseKind::complex_noise;
  int instances = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
};

/// Accuracy under increasing error strength, averaged over freshly seeded
/// noise instances.  Deterministic for a given base seed.
inline std::vector<NoisePoint> degradation_sweep(
    Network& net, const Dataset& test, std::span<const double> sigmas,
    std::span<const NoiseKind> kinds, int instances, uint64_t seed,
    long max_test = 0, bool target_couplers = true, bool target_masks = true) {
  if (instances < 1) throw ConfigError("noise sweep: instances must be >= 1");
  if (sigmas.empty() || kinds.empty())
    throw ConfigError("noise sweep: nothing to sweep");
  std::vector<NoisePoint> points;
  uint64_t counter = 0;
  for (NoiseKind kind : kinds) {
    for (double sigma : sigmas) {
      NoisePoint pt;
      pt.sigma = sigma;
      pt.kind = kind;
      pt.instances = instances;
      std::vector<double> accs;
      accs.reserve(static_cast<size_t>(instances));
      for (int inst = 0; inst < instances; ++inst) {
        NoiseSpec spec;
        spec.sigma = sigma;
        spec.kind = kind;
        spec.target_couplers = target_couplers;
        spec.target_masks = target_masks;
        spec.seed = seed + 0x9e3779b97f4a7c15ULL * ++counter;
        Network noisy = inject_noise(net, spec);
        accs.push_back(evaluate(noisy, test, max_test).accuracy);
      }
      double mean = 0.0;
      for (double a : accs) mean += a;
      mean /= static_cast<double>(instances);
      double var = 0.0;
      for (double a : accs) var += (a - mean) * (a - mean);
      pt.mean_accuracy = mean;
      pt.std_accuracy =
          instances > 1 ? std::sqrt(var / static_cast<double>(instances - 1))
                        : 0.0;
      points.push_back(pt);
    }
  }
  return points;
}

inline void write_noise_csv(const std::filesystem::path& path,
                            const std::vector<NoisePoint>& points) {
  CsvWriter csv(path);
  csv.row({"kind", "sigma", "instances", "mean_accuracy", "std_accuracy"});
  for (const NoisePoint& p : points)
    csv.row({to_string(p.kind), format_full(p.sigma),
             std::to_string(p.instances), format_full(p.mean_accuracy),
             format_full(p.std_accuracy)});
}

/// Retrain a perturbed network.  The frozen noise factors and couplers stay
/// as they are; the scope decides whether every mask/weight moves or only the
/// dense output layer.  Output scale calibration is disabled.  The previous
/// trainable flags are restored before returning.
inline TrainReport retrain(Network& noisy, const Dataset& train_data,
                           const Dataset& test_data, RetrainScope scope,
                           TrainSpec spec = TrainSpec{.epochs = 10}) {
  const std::vector<bool> before = noisy.apply_scope(scope);
  spec.calibrate_scale = false;
  try {
    TrainReport report = train(noisy, train_data, test_data, spec);
    noisy.restore_flags(before);
    return report;
  } catch (...) {
    noisy.restore_flags(before);
    throw;
  }
}

struct BiasNoisePoint {
  double delta = 0.0;
  int instances = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
};

/// Additive N(0, delta^2) perturbation of the activation bias parameters.
/// Requires the network to have trainable biases.
inline std::vector<BiasNoisePoint> bias_noise_sweep(
    Network& net, const Dataset& test, std::span<const double> deltas,
    int instances, uint64_t seed, long max_test = 0) {
  if (instances < 1) throw ConfigError("bias sweep: instances must be >= 1");
  std::vector<ParamId> bias_ids;
  for (size_t i = 0; i < net.params().size(); ++i)
    if (net.params().at(i).name.ends_with(".bias")) bias_ids.push_back(i);
  if (bias_ids.empty())
    throw ConfigError("bias sweep: network has no bias parameters");
  std::vector<BiasNoisePoint> points;
  uint64_t counter = 0;
  for (double delta : deltas) {
    BiasNoisePoint pt;
    pt.delta = delta;
    pt.instances = instances;
    std::vector<double> accs;
    for (int inst = 0; inst < instances; ++inst) {
      std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * ++counter);
      std::normal_distribution<double> normal(0.0, 1.0);
      Network noisy = net;
      for (ParamId id : bias_ids) {
        RMat& v = noisy.params().at(id).value;
        for (Eigen::Index i = 0; i < v.size(); ++i)
          v(i) += delta * normal(rng);
      }
      accs.push_back(evaluate(noisy, test, max_test).accuracy);
    }
    double mean = 0.0;
    for (double a : accs) mean += a;
    mean /= static_cast<double>(instances);
    double var = 0.0;
    for (double a : accs) var += (a - mean) * (a - mean);
    pt.mean_accuracy = mean;
    pt.std_accuracy =
        instances > 1 ? std::sqrt(var / static_cast<double>(instances - 1))
                      : 0.0;
    points.push_back(pt);
  }
  return points;
}

struct FidelityAccuracyPoint {
  double theta_edge = 0.0;  // radians
  double radius = 0.0;      // of the first (largest) coupler
  double fidelity = 0.0;    // of that coupler against the ideal DFT
  double accuracy = 0.0;    // trained test accuracy
};

/// Train the same architecture at several coupler geometries and report how
/// transform fidelity maps to task accuracy.
inline std::vector<FidelityAccuracyPoint> fidelity_accuracy_sweep(
    const NetworkConfig& base, std::span<const double> thetas,
    const Dataset& train_data, const Dataset& test_data,
    const TrainSpec& train_spec) {
  if (thetas.empty()) throw ConfigError("fidelity sweep: no angles given");
  std::vector<FidelityAccuracyPoint> points;
  for (double theta : thetas) {
    NetworkConfig cfg = base;
    cfg.optics = OpticsMode::physical;
    cfg.physical.theta_edge = theta;
    const int n = cfg.input_size();
    const double lam = cfg.physical.wavelength / cfg.physical.slab_index;
    FidelityAccuracyPoint pt;
    pt.theta_edge = theta;
    pt.radius = radius_for_edge_angle(n, theta, lam);
    const StarCouplerGeometry g = make_dft_geometry(
        n, n, cfg.physical.wavelength, cfg.physical.slab_index,
        cfg.physical.mode_width, pt.radius, cfg.physical.paraxial);
    pt.fidelity = fidelity(coupling_matrix(g, cfg.physical.quad,
                                           cfg.physical.kernel),
                           ideal_dft(n));
    Network net(cfg);
    TrainReport report = train(net, train_data, test_data, train_spec);
    pt.accuracy = report.final_stats.test_accuracy;
    points.push_back(pt);
  }
  return points;
}

inline void write_fidelity_accuracy_csv(
    const std::filesystem::path& path,
    const std::vector<FidelityAccuracyPoint>& points) {
  CsvWriter csv(path);
  csv.row({"theta_deg", "radius_m", "fidelity", "accuracy"});
  for (const auto& p : points)
    csv.row({format_full(degrees(p.theta_edge)), format_full(p.radius),
             format_full(p.fidelity), format_full(p.accuracy)});
}

}  // namespace pcnn
