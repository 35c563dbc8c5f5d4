#pragma once

#include <optional>
#include <variant>
#include <vector>

#include <Eigen/SVD>

#include "pcnn/autograd.hpp"
#include "pcnn/dft.hpp"
#include "pcnn/errors.hpp"
#include "pcnn/linalg.hpp"

namespace pcnn {

/// Nonlinearity applied after a layer.
///  - linear:  no-op.
///  - abs:     zero-phase modReLU; with no bias this is |z|.
///  - modrelu: phase-preserving modReLU, ReLU(|z| + b) exp(i arg z).
enum class ActKind { linear, abs, modrelu };

/// Where the modReLU bias comes from.
enum class BiasKind { none, fixed, shared_scalar, per_element };

struct ActivationSpec {
  ActKind kind = ActKind::linear;
  BiasKind bias = BiasKind::none;
  double fixed_value = 0.0;

  bool needs_bias_param() const {
    return kind != ActKind::linear &&
           (bias == BiasKind::shared_scalar || bias == BiasKind::per_element);
  }
};

/// Restrict to the supported combinations: linear takes no bias, abs is used
/// bias-free, and modrelu accepts any bias kind.
inline void validate_activation(const ActivationSpec& spec) {
  switch (spec.kind) {
    case ActKind::linear:
      if (spec.bias != BiasKind::none)
        throw ConfigError("linear activation takes no bias");
      return;
    case ActKind::abs:
      if (spec.bias != BiasKind::none)
        throw ConfigError("abs activation takes no bias");
      return;
    case ActKind::modrelu:
      return;
  }
  throw ConfigError("unknown activation kind");
}

/// Trainable diagonal mask between two transforms.  Holds parameter ids, not
/// values; `noise` is an optional frozen per-element complex factor applied
/// on top of the trained mask.
struct FilterMask {
  MaskMode mode = MaskMode::phase_only;
  std::optional<ParamId> alpha;
  std::optional<ParamId> theta;
  CVec noise;  // empty = clean
  int size = 0;
};

/// Convolution block: fixed transform in, trainable diagonal mask, fixed
/// transform out.  Both transforms are forward DFTs (two identical couplers),
/// so with mask spectrum c the block realises the index-reversed circular
/// convolution y[p] = (k (*) u)[-p] where c = sqrt(M) F k.  Spectral pooling
/// is folded into f_in, which may keep only the centered rows of a larger
/// transform; f_out is square at the mask size.
struct ConvolutionLayer {
  CMat f_in;   // mask ports x input ports
  CMat f_out;  // mask ports x mask ports
  FilterMask mask;
  ActivationSpec act;
  std::optional<ParamId> bias;
};

/// Dense real-weight layer followed by the activation.
struct FullyConnectedLayer {
  ParamId weights = 0;
  int in = 0, out = 0;
  ActivationSpec act;
  std::optional<ParamId> bias;
};

/// Single diffractive stage: fixed transform then a trainable mask and the
/// activation (no closing transform).
struct PhaseStageLayer {
  CMat f;
  FilterMask mask;
  ActivationSpec act;
  std::optional<ParamId> bias;
};

/// Fixed transform with no trainable part (e.g. a closing coupler).
struct TransformLayer {
  CMat f;
};

using Layer = std::variant<ConvolutionLayer, FullyConnectedLayer,
                           PhaseStageLayer, TransformLayer>;

inline Tape::NodeId apply_mask(Tape& tape, const FilterMask& mask,
                               Tape::NodeId v) {
  return tape.diagonal_mask(mask.alpha, mask.theta, v, mask.mode,
                            mask.noise.size() > 0 ? &mask.noise : nullptr);
}

inline Tape::NodeId apply_activation(Tape& tape, const ActivationSpec& act,
                                     std::optional<ParamId> bias,
                                     Tape::NodeId v) {
  switch (act.kind) {
    case ActKind::linear:
      return v;
    case ActKind::abs:
      return tape.modrelu(v, bias, act.fixed_value, /*keep_phase=*/false);
    case ActKind::modrelu:
      return tape.modrelu(v, bias, act.fixed_value, /*keep_phase=*/true);
  }
  throw ConfigError("unknown activation kind");
}

inline Tape::NodeId forward(Tape& tape, const ConvolutionLayer& layer,
                            Tape::NodeId v) {
  Tape::NodeId h = tape.matvec(layer.f_in, v);
  h = apply_mask(tape, layer.mask, h);
  h = tape.matvec(layer.f_out, h);
  return apply_activation(tape, layer.act, layer.bias, h);
}

inline Tape::NodeId forward(Tape& tape, const FullyConnectedLayer& layer,
                            Tape::NodeId v) {
  Tape::NodeId h = tape.weight_matvec(layer.weights, v);
  return apply_activation(tape, layer.act, layer.bias, h);
}

inline Tape::NodeId forward(Tape& tape, const PhaseStageLayer& layer,
                            Tape::NodeId v) {
  Tape::NodeId h = tape.matvec(layer.f, v);
  h = apply_mask(tape, layer.mask, h);
  return apply_activation(tape, layer.act, layer.bias, h);
}

inline Tape::NodeId forward(Tape& tape, const TransformLayer& layer,
                            Tape::NodeId v) {
  return tape.matvec(layer.f, v);
}

/// Spectral pooling: keep the m lowest centered frequencies of an n-signal.
inline Tape::NodeId pool(Tape& tape, int m, Tape::NodeId v) {
  const int n = static_cast<int>(tape.value(v).rows());
  return tape.matvec(ideal_pool_matrix(m, n).entries, v);
}

/// SVD split of a real weight matrix for optical implementation:
///   W = U diag(s) V^adj, with the singular values rescaled by
///   beta_amp = max(1, s_max) so the passive diagonal stage never amplifies.
/// The discarded factor only scales output powers uniformly, so power-argmax
/// predictions are unchanged.
struct SvdFactorization {
  RMat u;
  RVec singular_values;  // rescaled: s / beta_amp
  RMat v_adjoint;
  double beta_amp = 1.0;
};

inline SvdFactorization svd_check(const RMat& w, double tol = 1e-9) {
  if (w.size() == 0) throw ShapeError("svd_check: empty matrix");
  Eigen::JacobiSVD<RMat> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdFactorization f;
  f.beta_amp = std::max(1.0, svd.singularValues().maxCoeff());
  f.u = svd.matrixU();
  f.singular_values = svd.singularValues() / f.beta_amp;
  f.v_adjoint = svd.matrixV().transpose();
  const RMat rebuilt =
      f.beta_amp * f.u * f.singular_values.asDiagonal() * f.v_adjoint;
  const double err = (rebuilt - w).cwiseAbs().maxCoeff();
  if (err > tol)
    throw NumericalError("svd_check: reconstruction error " +
                         std::to_string(err) + " exceeds tolerance");
  return f;
}

}  // namespace pcnn
