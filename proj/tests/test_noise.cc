// Multiplicative fabrication-error model: draw statistics, targeting rules,
// determinism, composition, degradation sweeps, and post-noise retraining.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pcnn/noise.hpp"
#include "pcnn/trainer.hpp"
#include "test_util.hpp"

using namespace pcnn;

namespace {

NetworkConfig toy_config(uint64_t seed) {
  NetworkConfig cfg;
  cfg.stack = {LayerSpec{LayerSpec::Kind::conv, 40, 20},
               LayerSpec{LayerSpec::Kind::fc, 20, 10}};
  cfg.seed = seed;
  return cfg;
}

const ConvolutionLayer& conv_layer(const Network& net, size_t i) {
  return std::get<ConvolutionLayer>(net.layers().at(i));
}

/// Standard normal CDF.
double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// One-sample Kolmogorov-Smirnov statistic against N(0, s^2).
double ks_against_normal(std::vector<double> xs, double s) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double f = phi(xs[i] / s);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

}  // namespace

TEST(NoiseDraw, AmplitudeAndPhaseMoments) {
  const double sigma = 0.1;
  const int n = 200000;
  detail::NoiseDraw draw(sigma, NoiseKind::complex_noise, 99);
  double amp_sum = 0.0;
  std::vector<double> phases;
  phases.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Complex f = draw.factor();
    const double a = std::abs(f);
    EXPECT_LE(a, 1.0 + 1e-12);
    EXPECT_GE(a, 0.0);
    amp_sum += a;
    phases.push_back(std::arg(f));
  }
  // a = 1 - |sigma N| has mean 1 - sigma sqrt(2/pi) while the clamp at zero
  // is a ten-sigma event at this strength.
  const double expect_amp = 1.0 - sigma * std::sqrt(2.0 / kPi);
  EXPECT_NEAR(amp_sum / n, expect_amp, 1e-3);

  double mean = 0.0;
  for (double p : phases) mean += p;
  mean /= n;
  double var = 0.0;
  for (double p : phases) var += (p - mean) * (p - mean);
  const double sd = std::sqrt(var / n);
  EXPECT_NEAR(mean, 0.0, 5e-3);
  EXPECT_NEAR(sd, 2.0 * kPi * sigma, 5e-3);
  // Distribution shape, not just moments (KS at the 1% level).
  EXPECT_LT(ks_against_normal(std::move(phases), 2.0 * kPi * sigma) *
                std::sqrt(static_cast<double>(n)),
            1.63);
}

TEST(NoiseDraw, KindsTouchOnlyTheirComponent) {
  detail::NoiseDraw phase_draw(0.2, NoiseKind::phase_only, 5);
  for (int i = 0; i < 1000; ++i)
    EXPECT_NEAR(std::abs(phase_draw.factor()), 1.0, 1e-12);

  detail::NoiseDraw amp_draw(0.2, NoiseKind::amplitude_only, 5);
  for (int i = 0; i < 1000; ++i) {
    const Complex f = amp_draw.factor();
    EXPECT_EQ(f.imag(), 0.0);
    EXPECT_GE(f.real(), 0.0);
    EXPECT_LE(f.real(), 1.0);
  }

  detail::NoiseDraw off(0.0, NoiseKind::complex_noise, 5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(off.factor(), Complex(1.0, 0.0));

  // Strong amplitude noise hits the clamp: losses only, never gain.
  detail::NoiseDraw strong(10.0, NoiseKind::amplitude_only, 7);
  int zeros = 0;
  for (int i = 0; i < 1000; ++i) {
    const double a = strong.factor().real();
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    if (a == 0.0) ++zeros;
  }
  EXPECT_GT(zeros, 800);  // P(|N| < 0.1) is small
}

TEST(InjectNoise, PhaseKindPreservesMagnitudes) {
  Network base(toy_config(3));
  NoiseSpec spec;
  spec.sigma = 0.1;
  spec.kind = NoiseKind::phase_only;
  spec.seed = 11;
  const Network noisy = inject_noise(base, spec);
  const CMat& a = conv_layer(base, 0).f_in;
  const CMat& b = conv_layer(noisy, 0).f_in;
  ASSERT_EQ(a.rows(), b.rows());
  EXPECT_LT((a.cwiseAbs() - b.cwiseAbs()).cwiseAbs().maxCoeff(), 1e-12);
  // But the entries themselves moved.
  EXPECT_GT((a - b).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(InjectNoise, AmplitudeKindPreservesPhases) {
  Network base(toy_config(3));
  NoiseSpec spec;
  spec.sigma = 0.05;
  spec.kind = NoiseKind::amplitude_only;
  spec.seed = 13;
  const Network noisy = inject_noise(base, spec);
  const CMat& a = conv_layer(base, 0).f_out;
  const CMat& b = conv_layer(noisy, 0).f_out;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(std::arg(b(i) / a(i))));
  EXPECT_LT(worst, 1e-12);
  EXPECT_GT((a - b).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(InjectNoise, RespectsTargetSelection) {
  Network base(toy_config(3));

  NoiseSpec masks_only;
  masks_only.sigma = 0.2;
  masks_only.target_couplers = false;
  masks_only.seed = 17;
  const Network m = inject_noise(base, masks_only);
  EXPECT_EQ((conv_layer(base, 0).f_in - conv_layer(m, 0).f_in)
                .cwiseAbs()
                .maxCoeff(),
            0.0);
  EXPECT_EQ((conv_layer(base, 0).f_out - conv_layer(m, 0).f_out)
                .cwiseAbs()
                .maxCoeff(),
            0.0);
  ASSERT_EQ(conv_layer(m, 0).mask.noise.size(), 20);
  EXPECT_GT((conv_layer(m, 0).mask.noise.array() - Complex(1.0, 0.0))
                .abs()
                .maxCoeff(),
            1e-3);

  NoiseSpec couplers_only;
  couplers_only.sigma = 0.2;
  couplers_only.target_masks = false;
  couplers_only.seed = 17;
  const Network c = inject_noise(base, couplers_only);
  EXPECT_EQ(conv_layer(c, 0).mask.noise.size(), 0);
  EXPECT_GT((conv_layer(base, 0).f_in - conv_layer(c, 0).f_in)
                .cwiseAbs()
                .maxCoeff(),
            1e-3);

  // Dense-layer weights model electronics and never receive optical noise.
  const ParamId w = base.params().id_of("fc1.w");
  EXPECT_EQ((base.params().at(w).value - c.params().at(w).value)
                .cwiseAbs()
                .maxCoeff(),
            0.0);
  EXPECT_EQ((base.params().at(w).value - m.params().at(w).value)
                .cwiseAbs()
                .maxCoeff(),
            0.0);
}

TEST(InjectNoise, DeterministicPerSeed) {
  Network base(toy_config(3));
  NoiseSpec spec;
  spec.sigma = 0.1;
  spec.seed = 23;
  const Network a = inject_noise(base, spec);
  const Network b = inject_noise(base, spec);
  EXPECT_EQ((conv_layer(a, 0).f_in - conv_layer(b, 0).f_in)
                .cwiseAbs()
                .maxCoeff(),
            0.0);
  EXPECT_EQ((conv_layer(a, 0).mask.noise - conv_layer(b, 0).mask.noise)
                .cwiseAbs()
                .maxCoeff(),
            0.0);

  spec.seed = 24;
  const Network c = inject_noise(base, spec);
  EXPECT_GT((conv_layer(a, 0).f_in - conv_layer(c, 0).f_in)
                .cwiseAbs()
                .maxCoeff(),
            0.0);
}

TEST(InjectNoise, MaskNoiseComposesAcrossInjections) {
  Network base(toy_config(3));
  NoiseSpec first;
  first.sigma = 0.1;
  first.target_couplers = false;
  first.seed = 31;
  NoiseSpec second = first;
  second.seed = 32;

  const Network one = inject_noise(base, first);
  const Network two = inject_noise(one, second);
  const Network only_second = inject_noise(base, second);

  const CVec expect = conv_layer(one, 0).mask.noise.cwiseProduct(
      conv_layer(only_second, 0).mask.noise);
  EXPECT_EQ((conv_layer(two, 0).mask.noise - expect).cwiseAbs().maxCoeff(),
            0.0);
}

TEST(InjectNoise, ZeroSigmaIsTheIdentity) {
  Network base(toy_config(3));
  NoiseSpec spec;
  spec.sigma = 0.0;
  const Network same = inject_noise(base, spec);
  std::mt19937_64 rng(4);
  const CMat x = testutil::random_cmat(40, 5, rng).cwiseAbs();
  Network base_copy = base;   // predict() is non-const (builds a tape)
  Network same_copy = same;
  EXPECT_EQ(base_copy.predict(x), same_copy.predict(x));
  EXPECT_EQ((conv_layer(base, 0).f_in - conv_layer(same, 0).f_in)
                .cwiseAbs()
                .maxCoeff(),
            0.0);
}

TEST(InjectNoise, RejectsBadSpecs) {
  Network base(toy_config(3));
  NoiseSpec negative;
  negative.sigma = -0.1;
  EXPECT_THROW(inject_noise(base, negative), ConfigError);
  NoiseSpec nothing;
  nothing.target_couplers = false;
  nothing.target_masks = false;
  EXPECT_THROW(inject_noise(base, nothing), ConfigError);
}

TEST(DegradationSweep, GridShapeBaselineAndDeterminism) {
  Network net(toy_config(7));
  const Dataset test_set = testutil::toy_dataset(40, 60, 19);
  const double clean = evaluate(net, test_set).accuracy;

  const std::vector<double> sigmas = {0.0, 0.05};
  const std::vector<NoiseKind> kinds = {NoiseKind::phase_only,
                                        NoiseKind::complex_noise};
  const auto pts = degradation_sweep(net, test_set, sigmas, kinds, 3, 77);
  ASSERT_EQ(pts.size(), 4u);
  // Kind-major order with sigma varying fastest.
  EXPECT_EQ(pts[0].kind, NoiseKind::phase_only);
  EXPECT_DOUBLE_EQ(pts[0].sigma, 0.0);
  EXPECT_DOUBLE_EQ(pts[1].sigma, 0.05);
  EXPECT_EQ(pts[2].kind, NoiseKind::complex_noise);
  for (const NoisePoint& p : pts) EXPECT_EQ(p.instances, 3);

  // sigma = 0 reproduces the clean network exactly in every instance.
  EXPECT_DOUBLE_EQ(pts[0].mean_accuracy, clean);
  EXPECT_DOUBLE_EQ(pts[0].std_accuracy, 0.0);
  EXPECT_DOUBLE_EQ(pts[2].mean_accuracy, clean);

  const auto again = degradation_sweep(net, test_set, sigmas, kinds, 3, 77);
  for (size_t i = 0; i < pts.size(); ++i) {
    EXPECT_EQ(pts[i].mean_accuracy, again[i].mean_accuracy);
    EXPECT_EQ(pts[i].std_accuracy, again[i].std_accuracy);
  }

  EXPECT_THROW(degradation_sweep(net, test_set, sigmas, kinds, 0, 1),
               ConfigError);
  EXPECT_THROW(degradation_sweep(net, test_set, {}, kinds, 1, 1), ConfigError);
  EXPECT_THROW(degradation_sweep(net, test_set, sigmas, {}, 1, 1),
               ConfigError);
}

TEST(DegradationSweep, OverwhelmingNoiseDestroysATrainedNetwork) {
  const Dataset train_set = testutil::toy_dataset(40, 200, 61);
  const Dataset test_set = testutil::toy_dataset(40, 100, 62);
  Network net(toy_config(7));
  TrainSpec spec;
  spec.epochs = 15;
  spec.seed = 2;
  train(net, train_set, test_set, spec);
  const double clean = evaluate(net, test_set).accuracy;
  ASSERT_GE(clean, 0.8);

  const std::vector<double> sigmas = {1.0};
  const std::vector<NoiseKind> kinds = {NoiseKind::complex_noise};
  const auto pts = degradation_sweep(net, test_set, sigmas, kinds, 5, 5);
  EXPECT_LT(pts[0].mean_accuracy, clean - 0.3)
      << "unit-strength complex noise should wreck the trained network";
}

TEST(NoiseCsv, HeaderAndKindNames) {
  std::vector<NoisePoint> pts(2);
  pts[0].kind = NoiseKind::phase_only;
  pts[0].sigma = 0.01;
  pts[0].instances = 5;
  pts[0].mean_accuracy = 0.5;
  pts[1].kind = NoiseKind::complex_noise;
  const auto path =
      std::filesystem::temp_directory_path() / "pcnn_noise_csv_test.csv";
  write_noise_csv(path, pts);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "kind,sigma,instances,mean_accuracy,std_accuracy");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 6), "phase,");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 8), "complex,");
  std::filesystem::remove(path);
}

TEST(Retrain, RecoversAccuracyAndRestoresFlags) {
  const Dataset train_set = testutil::toy_dataset(40, 200, 71);
  const Dataset test_set = testutil::toy_dataset(40, 100, 72);
  Network net(toy_config(9));
  TrainSpec spec;
  spec.epochs = 15;
  spec.seed = 4;
  train(net, train_set, test_set, spec);

  NoiseSpec noise;
  noise.sigma = 0.3;
  noise.seed = 41;
  Network noisy = inject_noise(net, noise);
  const double hurt = evaluate(noisy, test_set).accuracy;

  std::vector<bool> flags_before;
  for (ParamId id : noisy.params().all_ids())
    flags_before.push_back(noisy.params().at(id).trainable);

  TrainSpec rspec;
  rspec.epochs = 8;
  rspec.seed = 5;
  const TrainReport rep =
      retrain(noisy, train_set, test_set, RetrainScope::full, rspec);
  ASSERT_EQ(rep.epochs.size(), 8u);
  const double recovered = evaluate(noisy, test_set).accuracy;
  EXPECT_GT(recovered, hurt);

  for (ParamId id : noisy.params().all_ids())
    EXPECT_EQ(noisy.params().at(id).trainable, flags_before[id])
        << noisy.params().at(id).name;
}

TEST(Retrain, FinalLayerScopeOnlyMovesTheDenseOutput) {
  const Dataset train_set = testutil::toy_dataset(40, 80, 81);
  Network net(toy_config(9));
  NoiseSpec noise;
  noise.sigma = 0.2;
  noise.seed = 51;
  Network noisy = inject_noise(net, noise);

  ParameterStore snapshot = noisy.params();
  TrainSpec rspec;
  rspec.epochs = 2;
  retrain(noisy, train_set, Dataset{}, RetrainScope::final_layer_only, rspec);

  const ParamId w = noisy.params().id_of("fc1.w");
  for (ParamId id : noisy.params().all_ids()) {
    const double delta =
        (noisy.params().at(id).value - snapshot.at(id).value)
            .cwiseAbs()
            .maxCoeff();
    if (id == w)
      EXPECT_GT(delta, 0.0) << "output weights should have moved";
    else
      EXPECT_EQ(delta, 0.0) << noisy.params().at(id).name;
  }
}

TEST(Retrain, RestoresFlagsWhenTrainingThrows) {
  const Dataset train_set = testutil::toy_dataset(40, 16, 91);
  Network noisy = inject_noise(Network(toy_config(9)), NoiseSpec{.sigma = 0.1});
  std::vector<bool> before;
  for (ParamId id : noisy.params().all_ids())
    before.push_back(noisy.params().at(id).trainable);

  TrainSpec bad;
  bad.epochs = 0;  // rejected by train()
  EXPECT_THROW(
      retrain(noisy, train_set, Dataset{}, RetrainScope::final_layer_only, bad),
      ConfigError);
  for (ParamId id : noisy.params().all_ids())
    EXPECT_EQ(noisy.params().at(id).trainable, before[id]);
}

TEST(BiasNoiseSweep, PerturbsOnlyNetworksWithBiases) {
  NetworkConfig cfg;
  cfg.stack = {LayerSpec{LayerSpec::Kind::fc, 40, 16},
               LayerSpec{LayerSpec::Kind::fc, 16, 10}};
  cfg.fc_act = ActivationSpec{ActKind::modrelu, BiasKind::per_element, 0.0};
  cfg.seed = 3;
  Network net(cfg);
  const Dataset test_set = testutil::toy_dataset(40, 40, 95);

  const std::vector<double> deltas = {0.0, 0.05};
  const auto pts = bias_noise_sweep(net, test_set, deltas, 3, 7);
  ASSERT_EQ(pts.size(), 2u);
  const double clean = evaluate(net, test_set).accuracy;
  EXPECT_DOUBLE_EQ(pts[0].mean_accuracy, clean);
  EXPECT_DOUBLE_EQ(pts[0].std_accuracy, 0.0);
  EXPECT_EQ(pts[1].instances, 3);

  const auto again = bias_noise_sweep(net, test_set, deltas, 3, 7);
  EXPECT_EQ(pts[1].mean_accuracy, again[1].mean_accuracy);

  EXPECT_THROW(bias_noise_sweep(net, test_set, deltas, 0, 7), ConfigError);

  Network no_bias(toy_config(3));
  EXPECT_THROW(bias_noise_sweep(no_bias, test_set, deltas, 3, 7), ConfigError);
}

TEST(FidelityAccuracySweep, MapsGeometryQualityToTaskAccuracy) {
  NetworkConfig base;
  base.stack = {LayerSpec{LayerSpec::Kind::conv, 16, 16},
                LayerSpec{LayerSpec::Kind::fc, 16, 10}};
  base.seed = 5;
  base.physical.quad.points = 32;
  const Dataset train_set = testutil::toy_dataset(16, 60, 101);
  const Dataset test_set = testutil::toy_dataset(16, 30, 102);
  TrainSpec spec;
  spec.epochs = 2;
  spec.seed = 1;

  const std::vector<double> thetas = {radians(10.0), radians(14.0)};
  const auto pts =
      fidelity_accuracy_sweep(base, thetas, train_set, test_set, spec);
  ASSERT_EQ(pts.size(), 2u);
  // Larger edge angle means a smaller slab; fidelity stays high but drops.
  EXPECT_GT(pts[0].radius, pts[1].radius);
  EXPECT_GE(pts[0].fidelity, pts[1].fidelity);
  for (const auto& p : pts) {
    EXPECT_GT(p.fidelity, 0.9);
    EXPECT_LE(p.fidelity, 1.0 + 1e-9);
    EXPECT_GE(p.accuracy, 0.0);
    EXPECT_LE(p.accuracy, 1.0);
  }

  EXPECT_THROW(
      fidelity_accuracy_sweep(base, {}, train_set, test_set, spec),
      ConfigError);
}
