#pragma once

#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pcnn/coupling.hpp"
#include "pcnn/dft.hpp"
#include "pcnn/layers.hpp"

namespace pcnn {

/// Whether fixed transforms are exact centered DFTs or simulated couplers.
enum class OpticsMode { ideal, physical };

/// Geometry shared by every coupler of a physical network.  Radii differ per
/// coupler: each one is sized so its edge waveguide sits at theta_edge.
struct PhysicalSpec {
  double wavelength = 1550e-9;
  double slab_index = 2.85;
  double mode_width = 500e-9;
  double theta_edge = radians(13.49);
  CouplingKernel kernel = CouplingKernel::exact_arc;
  QuadratureSpec quad{.points = 64, .refine_check = false};
  ParaxialPolicy paraxial{};
};

struct LayerSpec {
  enum class Kind { conv, fc, stage, transform };
  Kind kind = Kind::conv;
  int in = 0;
  int out = 0;
};

struct NetworkConfig {
  std::string name = "custom";
  std::vector<LayerSpec> stack;
  MaskMode mask_mode = MaskMode::phase_only;
  ActivationSpec conv_act{ActKind::linear, BiasKind::none, 0.0};
  ActivationSpec fc_act{ActKind::abs, BiasKind::none, 0.0};
  ActivationSpec final_act{ActKind::linear, BiasKind::none, 0.0};
  OpticsMode optics = OpticsMode::ideal;
  PhysicalSpec physical{};
  uint64_t seed = 1;

  int input_size() const {
    if (stack.empty()) throw ConfigError("empty network stack");
    return stack.front().in;
  }
  int output_size() const {
    if (stack.empty()) throw ConfigError("empty network stack");
    return stack.back().out;
  }
};

/// Named architectures.  Convolution stages use spectral pooling; mask line
/// counts match the reported model sizes (the output power scale and modReLU
/// biases are excluded from those counts).
inline NetworkConfig preset_config(const std::string& name) {
  using K = LayerSpec::Kind;
  NetworkConfig cfg;
  cfg.name = name;
  auto conv = [](int in, int out) { return LayerSpec{K::conv, in, out}; };
  auto fc = [](int in, int out) { return LayerSpec{K::fc, in, out}; };
  if (name == "pcnn-784") {
    cfg.stack = {conv(784, 784), conv(784, 392), conv(392, 196), fc(196, 56),
                 fc(56, 10)};
    return cfg;
  }
  if (name == "pcnn-112-16" || name == "pcnn-112-32" ||
      name == "pcnn-256-16" || name == "pcnn-256-32") {
    const int mask1 = name[5] == '1' ? 112 : 256;
    const int hidden = name.substr(name.size() - 2) == "16" ? 16 : 32;
    cfg.stack = {conv(784, mask1), conv(mask1, mask1 / 2), fc(mask1 / 2, hidden),
                 fc(hidden, 10)};
    return cfg;
  }
  if (name == "mlp-784") {
    cfg.stack = {fc(784, 16), fc(16, 10)};
    return cfg;
  }
  if (name == "d2nn-16") {
    // Sixteen transform+mask stages with magnitude readout between them,
    // then a closing transform onto the ten centered readout ports.
    cfg.conv_act = ActivationSpec{ActKind::abs, BiasKind::none, 0.0};
    cfg.stack.reserve(17);
    for (int i = 0; i < 16; ++i)
      cfg.stack.push_back(LayerSpec{K::stage, 784, 784});
    cfg.stack.push_back(LayerSpec{K::transform, 784, 10});
    return cfg;
  }
  throw ConfigError("unknown preset: " + name);
}

inline const char* to_string(MaskMode m) {
  switch (m) {
    case MaskMode::amp_phase: return "amp_phase";
    case MaskMode::amp_only: return "amp_only";
    case MaskMode::phase_only: return "phase_only";
  }
  return "?";
}

/// Which parameters a post-perturbation retraining pass may touch.  The
/// output power scale stays frozen in both scopes.
enum class RetrainScope { full, final_layer_only };

struct BatchResult {
  double loss = 0.0;
  Eigen::VectorXi predictions;
};

class Network {
 public:
  explicit Network(NetworkConfig cfg) : cfg_(std::move(cfg)) { build(); }

  const NetworkConfig& config() const { return cfg_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  ParamId output_scale_id() const { return scale_id_; }

  /// Model size as conventionally reported (masks and dense weights; the
  /// output power scale and modReLU biases are excluded).
  long parameter_count() const { return store_.counted_values(); }

  Tape::NodeId forward(Tape& tape, const CMat& batch) const {
    if (batch.rows() != cfg_.input_size())
      throw ShapeError("network input size mismatch");
    Tape::NodeId node = tape.input(batch);
    for (const Layer& layer : layers_)
      node = std::visit(
          [&](const auto& l) { return pcnn::forward(tape, l, node); }, layer);
    return node;
  }

  /// Forward (and optionally backward) over one batch.  Gradients accumulate
  /// into the parameter store; callers zero it between steps.
  BatchResult batch(const CMat& x, std::span<const int> labels,
                    bool with_grad) {
    Tape tape(store_);
    Tape::NodeId out = forward(tape, x);
    BatchResult res;
    res.loss = tape.power_softmax_xent(out, scale_id_, labels);
    res.predictions = Tape::argmax_power(tape.value(out));
    if (with_grad) tape.backward();
    return res;
  }

  Eigen::VectorXi predict(const CMat& x) {
    Tape tape(store_);
    Tape::NodeId out = forward(tape, x);
    return Tape::argmax_power(tape.value(out));
  }

  /// Set the output power scale so initial logits have unit standard
  /// deviation on the given calibration batch.
  void calibrate_output_scale(const CMat& x) {
    Tape tape(store_);
    Tape::NodeId out = forward(tape, x);
    const RMat powers = tape.value(out).cwiseAbs2();
    const double mean = powers.mean();
    const double var =
        (powers.array() - mean).square().sum() / static_cast<double>(powers.size());
    const double sd = std::sqrt(var);
    if (sd > 0.0) store_.at(scale_id_).value(0) = 1.0 / std::sqrt(sd);
  }

  /// Apply a retraining scope by toggling trainable flags.  Returns the
  /// previous flags so callers can restore them.
  std::vector<bool> apply_scope(RetrainScope scope) {
    std::vector<bool> before(store_.size());
    for (size_t i = 0; i < store_.size(); ++i)
      before[i] = store_.at(i).trainable;
    ParamId last_w = 0, last_b = 0;
    bool has_fc = false, has_b = false;
    for (const Layer& layer : layers_) {
      if (const auto* fc = std::get_if<FullyConnectedLayer>(&layer)) {
        last_w = fc->weights;
        has_fc = true;
        has_b = fc->bias.has_value();
        if (has_b) last_b = *fc->bias;
      }
    }
    for (size_t i = 0; i < store_.size(); ++i) {
      Parameter& p = store_.at(i);
      if (i == scale_id_) {
        p.trainable = false;
      } else if (scope == RetrainScope::full) {
        p.trainable = true;
      } else {
        p.trainable = (has_fc && i == last_w) || (has_b && i == last_b);
      }
    }
    if (scope == RetrainScope::final_layer_only && !has_fc)
      throw ConfigError("final-layer retraining needs a dense output layer");
    return before;
  }

  void restore_flags(const std::vector<bool>& flags) {
    if (flags.size() != store_.size())
      throw ShapeError("trainable flag snapshot size mismatch");
    for (size_t i = 0; i < store_.size(); ++i)
      store_.at(i).trainable = flags[i];
  }

 private:
  /// Rows of `m` corresponding to the `keep` centered indices out of `total`.
  static CMat centered_rows(const CMat& m, int keep, int total) {
    const CenteredRange big = CenteredRange::of(total);
    const CenteredRange small = CenteredRange::of(keep);
    CMat out(keep, m.cols());
    for (int i = 0; i < keep; ++i)
      out.row(i) = m.row(big.position(small.index(i)));
    return out;
  }

  /// Square forward transform of the given size (ideal DFT or simulated
  /// coupler), cached per size.
  const CMat& square_transform(int n) {
    auto it = transforms_.find(n);
    if (it != transforms_.end()) return it->second;
    CMat f;
    if (cfg_.optics == OpticsMode::ideal) {
      f = ideal_dft(n).entries;
    } else {
      const PhysicalSpec& ph = cfg_.physical;
      const double lam = ph.wavelength / ph.slab_index;
      const double radius = radius_for_edge_angle(n, ph.theta_edge, lam);
      const StarCouplerGeometry g =
          make_dft_geometry(n, n, ph.wavelength, ph.slab_index, ph.mode_width,
                            radius, ph.paraxial);
      f = coupling_matrix(g, ph.quad, ph.kernel).entries;
    }
    return transforms_.emplace(n, std::move(f)).first->second;
  }

  FilterMask make_mask(const std::string& prefix, int size,
                       std::mt19937_64& rng) {
    FilterMask mask;
    mask.mode = cfg_.mask_mode;
    mask.size = size;
    std::uniform_real_distribution<double> phase(0.0, 1.0);
    std::uniform_real_distribution<double> amp(0.5, 1.0);
    if (cfg_.mask_mode != MaskMode::amp_only) {
      RMat t(size, 1);
      for (int i = 0; i < size; ++i) t(i, 0) = phase(rng);
      mask.theta = store_.add(prefix + ".theta", std::move(t));
    }
    if (cfg_.mask_mode != MaskMode::phase_only) {
      RMat a(size, 1);
      for (int i = 0; i < size; ++i) a(i, 0) = amp(rng);
      mask.alpha = store_.add(prefix + ".alpha", std::move(a));
    }
    return mask;
  }

  std::optional<ParamId> make_bias(const std::string& prefix,
                                   const ActivationSpec& act, int size) {
    if (!act.needs_bias_param()) return std::nullopt;
    const int rows = act.bias == BiasKind::shared_scalar ? 1 : size;
    // Biases start at zero; counted=false keeps reported model sizes
    // comparable across bias variants.
    return store_.add(prefix + ".bias", RMat::Zero(rows, 1), true, false);
  }

  void build() {
    if (cfg_.stack.empty()) throw ConfigError("empty network stack");
    validate_activation(cfg_.conv_act);
    validate_activation(cfg_.fc_act);
    validate_activation(cfg_.final_act);
    std::mt19937_64 rng(cfg_.seed);
    int conv_no = 0, fc_no = 0, stage_no = 0;
    int expect = cfg_.stack.front().in;
    int fc_total = 0;
    for (const LayerSpec& s : cfg_.stack)
      if (s.kind == LayerSpec::Kind::fc) ++fc_total;

    for (size_t li = 0; li < cfg_.stack.size(); ++li) {
      const LayerSpec& s = cfg_.stack[li];
      if (s.in != expect)
        throw ShapeError("layer " + std::to_string(li + 1) +
                         " input size does not chain");
      switch (s.kind) {
        case LayerSpec::Kind::conv: {
          if (s.out < 1 || s.out > s.in)
            throw ShapeError("conv layer needs 1 <= out <= in");
          const std::string name = "conv" + std::to_string(++conv_no);
          ConvolutionLayer layer;
          // Opening transform pools when out < in (keep the centered rows);
          // the closing transform is another forward DFT of the pooled size,
          // so each convolution stage index-reverses its output and the
          // downstream trainable stages absorb the flip.
          const CMat& fwd = square_transform(s.in);
          layer.f_in = s.out == s.in ? fwd : centered_rows(fwd, s.out, s.in);
          layer.f_out = square_transform(s.out);
          layer.mask = make_mask(name, s.out, rng);
          layer.act = cfg_.conv_act;
          layer.bias = make_bias(name, layer.act, s.out);
          layers_.emplace_back(std::move(layer));
          break;
        }
        case LayerSpec::Kind::fc: {
          ++fc_no;
          const std::string name = "fc" + std::to_string(fc_no);
          FullyConnectedLayer layer;
          layer.in = s.in;
          layer.out = s.out;
          const double bound = std::sqrt(6.0 / (s.in + s.out));
          std::uniform_real_distribution<double> dist(-bound, bound);
          RMat w(s.out, s.in);
          for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = dist(rng);
          layer.weights = store_.add(name + ".w", std::move(w));
          layer.act = fc_no == fc_total ? cfg_.final_act : cfg_.fc_act;
          layer.bias = make_bias(name, layer.act, s.out);
          layers_.emplace_back(std::move(layer));
          break;
        }
        case LayerSpec::Kind::stage: {
          if (s.out != s.in)
            throw ShapeError("diffractive stage keeps its port count");
          const std::string name = "stage" + std::to_string(++stage_no);
          PhaseStageLayer layer;
          layer.f = square_transform(s.in);
          layer.mask = make_mask(name, s.in, rng);
          layer.act = cfg_.conv_act;
          layer.bias = make_bias(name, layer.act, s.out);
          layers_.emplace_back(std::move(layer));
          break;
        }
        case LayerSpec::Kind::transform: {
          if (s.out > s.in)
            throw ShapeError("transform layer cannot add ports");
          TransformLayer layer;
          const CMat& fwd = square_transform(s.in);
          layer.f = s.out == s.in ? fwd : centered_rows(fwd, s.out, s.in);
          layers_.emplace_back(std::move(layer));
          break;
        }
      }
      expect = s.out;
    }
    scale_id_ = store_.add("output_scale", RMat::Ones(1, 1), true, false);
    transforms_.clear();
  }

  NetworkConfig cfg_;
  ParameterStore store_;
  std::vector<Layer> layers_;
  ParamId scale_id_ = 0;
  std::map<int, CMat> transforms_;
};

}  // namespace pcnn
