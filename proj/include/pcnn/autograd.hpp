#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pcnn/errors.hpp"
#include "pcnn/linalg.hpp"

namespace pcnn {

/// Real-valued model parameter.  Complex quantities are always expressed
/// through real parameters (phases as turns, amplitudes, weights), so
/// gradients are plain real arrays.
struct Parameter {
  std::string name;
  RMat value;
  RMat grad;
  bool trainable = true;
  /// Whether the parameter contributes to the reported model size.  The
  /// output power scale and similar calibration knobs are excluded.
  bool counted = true;

  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

using ParamId = size_t;

/// Owning, name-indexed parameter container.  Ids are dense and stable;
/// copying the store deep-copies every parameter (ids keep their meaning).
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore& other) { copy_from(other); }
  ParameterStore& operator=(const ParameterStore& other) {
    if (this != &other) {
      params_.clear();
      by_name_.clear();
      copy_from(other);
    }
    return *this;
  }
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  ParamId add(std::string name, RMat value, bool trainable = true,
              bool counted = true) {
    if (by_name_.count(name))
      throw Error("duplicate parameter name: " + name);
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->value = std::move(value);
    p->trainable = trainable;
    p->counted = counted;
    p->zero_grad();
    by_name_.emplace(std::move(name), params_.size());
    params_.push_back(std::move(p));
    return params_.size() - 1;
  }

  Parameter& at(ParamId id) {
    if (id >= params_.size()) throw Error("parameter id out of range");
    return *params_[id];
  }
  const Parameter& at(ParamId id) const {
    if (id >= params_.size()) throw Error("parameter id out of range");
    return *params_[id];
  }

  /// Id of a parameter by name; throws if absent.
  ParamId id_of(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw Error("no parameter named " + name);
    return it->second;
  }
  bool has(const std::string& name) const { return by_name_.count(name) > 0; }

  size_t size() const { return params_.size(); }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  /// Number of scalar values across counted parameters (model size as
  /// conventionally reported).
  long counted_values() const {
    long total = 0;
    for (const auto& p : params_)
      if (p->counted) total += static_cast<long>(p->size());
    return total;
  }

  std::vector<ParamId> all_ids() const {
    std::vector<ParamId> ids(params_.size());
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    return ids;
  }

  std::vector<ParamId> trainable_ids() const {
    std::vector<ParamId> ids;
    for (size_t i = 0; i < params_.size(); ++i)
      if (params_[i]->trainable) ids.push_back(i);
    return ids;
  }

 private:
  void copy_from(const ParameterStore& other) {
    params_.reserve(other.params_.size());
    for (const auto& p : other.params_)
      params_.push_back(std::make_unique<Parameter>(*p));
    by_name_ = other.by_name_;
  }

  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, ParamId> by_name_;
};

/// How a diagonal filter mask is parameterised.
enum class MaskMode { amp_phase, amp_only, phase_only };

/// Eager reverse-mode tape over complex matrix nodes.  Columns are batch
/// samples.  Gradients with respect to a complex intermediate z are stored in
/// the convention  adj(z) = dL/dRe(z) + i dL/dIm(z),  which composes through
/// holomorphic factors by multiplication with their conjugate and lets real
/// parameters read off  dL/dp = sum Re(conj(adj(y)) dy/dp).
class Tape {
 public:
  using NodeId = size_t;

  explicit Tape(ParameterStore& store) : store_(&store) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf holding a constant complex batch (size x batch).
  NodeId input(CMat value) {
    if (value.size() == 0) throw ShapeError("empty input batch");
    return push(std::move(value));
  }

  const CMat& value(NodeId id) const { return node(id).value; }

  /// y = M v for a constant complex matrix M.  The matrix is copied so the
  /// caller may discard it.
  NodeId matvec(const CMat& m, NodeId v) {
    check_rows(m.cols(), v, "matvec");
    NodeId out = push(m * node(v).value);
    ops_.push_back(Op{[this, m, v, out]() {
      node(v).adjoint.noalias() += m.adjoint() * node(out).adjoint;
    }});
    return out;
  }

  /// y = W v for a real trainable weight matrix.
  NodeId weight_matvec(ParamId w, NodeId v) {
    const RMat& wv = store_->at(w).value;
    check_rows(wv.cols(), v, "weight_matvec");
    NodeId out = push(wv * node(v).value);
    ops_.push_back(Op{[this, w, v, out]() {
      const CMat& ay = node(out).adjoint;
      node(v).adjoint.noalias() +=
          store_->at(w).value.transpose().cast<Complex>() * ay;
      store_->at(w).grad.noalias() +=
          (ay * node(v).value.adjoint()).real();
    }});
    return out;
  }

  /// Diagonal filter mask  y_m = noise_m * a_m * exp(i 2 pi theta_m) * v_m.
  /// Amplitudes are max-normalised: a_m = |alpha_m| / max_k |alpha_k|, with
  /// the max treated as selecting a fixed winner index for the backward pass
  /// (ties resolved to the lowest index; sign subgradient 0 at alpha = 0).
  /// Depending on the mode either factor degenerates to 1.  `noise` is an
  /// optional fixed complex per-element factor (not a parameter).
  NodeId diagonal_mask(std::optional<ParamId> alpha, std::optional<ParamId> theta,
                       NodeId v, MaskMode mode, const CVec* noise = nullptr) {
    const Eigen::Index size = node(v).value.rows();
    const bool use_amp = mode != MaskMode::phase_only;
    const bool use_phase = mode != MaskMode::amp_only;
    if (use_amp != alpha.has_value() || use_phase != theta.has_value())
      throw Error("diagonal_mask: parameters do not match the mask mode");
    if (noise && noise->size() != size)
      throw ShapeError("diagonal_mask: noise vector size mismatch");

    RVec a = RVec::Ones(size);
    Eigen::Index winner = 0;
    double max_abs = 1.0;
    if (use_amp) {
      const RMat& av = store_->at(*alpha).value;
      if (av.size() != size)
        throw ShapeError("diagonal_mask: amplitude parameter size mismatch");
      max_abs = 0.0;
      for (Eigen::Index i = 0; i < size; ++i) {
        const double mag = std::abs(av(i));
        if (mag > max_abs) {
          max_abs = mag;
          winner = i;
        }
      }
      if (max_abs == 0.0)
        throw NumericalError(
            "diagonal_mask: amplitude normalisation undefined (all zero)");
      for (Eigen::Index i = 0; i < size; ++i) a[i] = std::abs(av(i)) / max_abs;
    }
    CVec unit = CVec::Ones(size);  // everything except the amplitude
    if (use_phase) {
      const RMat& tv = store_->at(*theta).value;
      if (tv.size() != size)
        throw ShapeError("diagonal_mask: phase parameter size mismatch");
      for (Eigen::Index i = 0; i < size; ++i)
        unit[i] = std::polar(1.0, 2.0 * kPi * tv(i));
    }
    if (noise) unit = unit.cwiseProduct(*noise);
    const CVec diag = unit.cwiseProduct(a.cast<Complex>());

    NodeId out = push(diag.asDiagonal() * node(v).value);
    ops_.push_back(Op{[this, alpha, theta, v, out, unit, diag, winner, max_abs,
                       use_amp, use_phase]() {
      const CMat& ay = node(out).adjoint;
      node(v).adjoint.noalias() += diag.conjugate().asDiagonal() * ay;
      if (use_phase) {
        // dL/dphi_m = sum_b Re(conj(ay) i y) = -sum_b Im(conj(ay) y);
        // theta is in turns, so a further factor 2 pi.
        const CMat& y = node(out).value;
        RMat& g = store_->at(*theta).grad;
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
          double acc = 0.0;
          for (Eigen::Index b = 0; b < y.cols(); ++b)
            acc += -(std::conj(ay(i, b)) * y(i, b)).imag();
          g(i) += 2.0 * kPi * acc;
        }
      }
      if (use_amp) {
        const CMat& vin = node(v).value;
        const RMat& av = store_->at(*alpha).value;
        RMat& g = store_->at(*alpha).grad;
        // First dL/da_m, then through the max-normalisation with the winner
        // held fixed.
        const Eigen::Index size = av.size();
        RVec ga(size);
        double pull = 0.0;
        for (Eigen::Index i = 0; i < size; ++i) {
          double acc = 0.0;
          for (Eigen::Index b = 0; b < vin.cols(); ++b)
            acc += (std::conj(ay(i, b)) * unit[i] * vin(i, b)).real();
          ga[i] = acc;
          pull += acc * std::abs(av(i));
        }
        auto sgn = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };
        for (Eigen::Index i = 0; i < size; ++i)
          g(i) += ga[i] * sgn(av(i)) / max_abs;
        g(winner) += -pull * sgn(av(winner)) / (max_abs * max_abs);
      }
    }});
    return out;
  }

  /// modReLU activation:  r = |v|, s = [r + b > 0],
  ///   keep_phase:  y = s (r + b) v / r      (y = s * b at r = 0)
  ///   zero phase:  y = s (r + b)            (real output)
  /// The bias is either a trainable parameter (per element: size x 1, or a
  /// shared scalar: 1 x 1) or the fixed value.  Subgradient conventions: 0 at
  /// the ReLU kink and at r = 0.
  NodeId modrelu(NodeId v, std::optional<ParamId> bias, double fixed_bias,
                 bool keep_phase) {
    const CMat& x = node(v).value;
    const Eigen::Index rows = x.rows(), cols = x.cols();
    bool shared = false;
    if (bias) {
      const RMat& bv = store_->at(*bias).value;
      shared = bv.size() == 1;
      if (!shared && bv.size() != rows)
        throw ShapeError("modrelu: bias size must be 1 or the port count");
    }
    auto bias_at = [this, bias, fixed_bias, shared](Eigen::Index i) {
      if (!bias) return fixed_bias;
      const RMat& bv = store_->at(*bias).value;
      return shared ? bv(0) : bv(i);
    };

    CMat y(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double b = bias_at(i);
      for (Eigen::Index c = 0; c < cols; ++c) {
        const Complex u = x(i, c);
        const double r = std::abs(u);
        const double t = r + b;
        if (t <= 0.0) {
          y(i, c) = Complex(0.0, 0.0);
        } else if (!keep_phase) {
          y(i, c) = Complex(t, 0.0);
        } else {
          y(i, c) = r > 0.0 ? u * (t / r) : Complex(t, 0.0);
        }
      }
    }
    NodeId out = push(std::move(y));
    ops_.push_back(Op{[this, v, out, bias, keep_phase, bias_at, rows, cols,
                       shared]() {
      const CMat& x = node(v).value;
      const CMat& ay = node(out).adjoint;
      CMat& av = node(v).adjoint;
      RMat* bg = bias ? &store_->at(*bias).grad : nullptr;
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double b = bias_at(i);
        double bacc = 0.0;
        for (Eigen::Index c = 0; c < cols; ++c) {
          const Complex u = x(i, c);
          const double r = std::abs(u);
          const double t = r + b;
          if (t <= 0.0) continue;  // inactive or kink: subgradient 0
          const Complex g = ay(i, c);
          if (!keep_phase) {
            // y = r + b (real); dy/du direction u/r, dy/db = 1.
            if (r > 0.0) av(i, c) += g.real() * (u / r);
            bacc += g.real();
          } else if (r > 0.0) {
            const double re_gu = (std::conj(g) * u).real();
            av(i, c) += g * (t / r) - (b * re_gu / (r * r * r)) * u;
            bacc += re_gu / r;
          } else {
            // r = 0, t = b > 0: y = b, phase convention arg(0) = 0.
            bacc += g.real();
          }
        }
        if (bg) {
          if (shared)
            (*bg)(0) += bacc;
          else
            (*bg)(i) += bacc;
        }
      }
    }});
    return out;
  }

  /// Mean cross-entropy of softmax(scale^2 |v_m|^2) against integer labels,
  /// one label per batch column.  Seeds the backward pass; returns the loss.
  double power_softmax_xent(NodeId v, ParamId scale,
                            std::span<const int> labels) {
    const CMat& x = node(v).value;
    const Eigen::Index rows = x.rows(), cols = x.cols();
    if (static_cast<Eigen::Index>(labels.size()) != cols)
      throw ShapeError("loss: one label per batch column required");
    if (store_->at(scale).value.size() != 1)
      throw ShapeError("loss: scale parameter must be a scalar");
    for (int lbl : labels)
      if (lbl < 0 || lbl >= rows)
        throw ShapeError("loss: label out of range");
    if (loss_set_) throw Error("loss already recorded on this tape");
    const double beta = store_->at(scale).value(0);

    RMat powers = x.cwiseAbs2().real();
    RMat logits = beta * beta * powers;
    RMat softmax(rows, cols);
    double loss = 0.0;
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double mx = logits.col(c).maxCoeff();
      RVec e = (logits.col(c).array() - mx).exp();
      const double z = e.sum();
      softmax.col(c) = e / z;
      loss += std::log(z) - (logits(labels[static_cast<size_t>(c)], c) - mx);
    }
    loss /= static_cast<double>(cols);
    if (!std::isfinite(loss)) throw NumericalError("loss is not finite");

    std::vector<int> lbl(labels.begin(), labels.end());
    ops_.push_back(Op{[this, v, scale, powers, softmax, lbl, beta, cols]() {
      // dL/dlogit = (softmax - onehot) / B; logit = beta^2 |u|^2.
      const CMat& x = node(v).value;
      CMat& av = node(v).adjoint;
      RMat dlogit = softmax;
      for (Eigen::Index c = 0; c < cols; ++c)
        dlogit(lbl[static_cast<size_t>(c)], c) -= 1.0;
      dlogit /= static_cast<double>(cols);
      av += (2.0 * beta * beta) * dlogit.cast<Complex>().cwiseProduct(x);
      store_->at(scale).grad(0) +=
          2.0 * beta * dlogit.cwiseProduct(powers).sum();
    }});
    loss_set_ = true;
    loss_value_ = loss;
    return loss;
  }

  double loss() const {
    if (!loss_set_) throw Error("no loss recorded");
    return loss_value_;
  }

  /// Reverse pass.  May be called once per tape; gradients accumulate into
  /// the parameter store (call store.zero_grad() between steps).
  void backward() {
    if (!loss_set_) throw Error("backward: no loss recorded");
    if (backward_done_) throw Error("backward already ran on this tape");
    backward_done_ = true;
    for (auto& n : nodes_) n.adjoint.setZero(n.value.rows(), n.value.cols());
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) it->run();
  }

  /// Index of the largest |value|^2 per batch column.
  static Eigen::VectorXi argmax_power(const CMat& v) {
    Eigen::VectorXi out(v.cols());
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      Eigen::Index row = 0;
      v.col(c).cwiseAbs2().maxCoeff(&row);
      out[c] = static_cast<int>(row);
    }
    return out;
  }

 private:
  struct NodeSlot {
    CMat value;
    CMat adjoint;
  };
  struct Op {
    std::function<void()> run;
  };

  NodeId push(CMat value) {
    nodes_.push_back(NodeSlot{std::move(value), CMat()});
    return nodes_.size() - 1;
  }
  NodeSlot& node(NodeId id) { return nodes_[id]; }
  const NodeSlot& node(NodeId id) const { return nodes_[id]; }

  void check_rows(Eigen::Index expect, NodeId v, const char* what) const {
    if (node(v).value.rows() != expect)
      throw ShapeError(std::string(what) + ": dimension mismatch");
  }

  ParameterStore* store_;
  std::vector<NodeSlot> nodes_;
  std::vector<Op> ops_;
  bool loss_set_ = false;
  bool backward_done_ = false;
  double loss_value_ = 0.0;
};

/// Result of comparing analytic gradients against central finite differences.
struct GradCheckEntry {
  std::string name;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst_rel_err = 0.0;
};

/// `run(false)` must evaluate the loss from the current parameter values;
/// `run(true)` must additionally leave analytic gradients in the store
/// (zeroed beforehand by this function).  Every scalar of every listed
/// parameter is perturbed by +-h.
///
/// Per-entry errors are measured relative to the parameter's gradient scale
/// (the max-norm over its analytic and numeric gradients): central
/// differences cannot resolve entries far below that scale, as the
/// subtraction noise of the two loss evaluations divided by 2h dominates any
/// genuinely tiny component.
inline GradCheckReport check_gradients(ParameterStore& store,
                                       std::span<const ParamId> params,
                                       const std::function<double(bool)>& run,
                                       double h = 1e-6) {
  if (h <= 0.0) throw NumericalError("finite-difference step must be positive");
  store.zero_grad();
  run(true);
  // Snapshot analytic gradients before finite differencing.
  std::vector<RMat> analytic;
  analytic.reserve(params.size());
  for (ParamId id : params) analytic.push_back(store.at(id).grad);

  GradCheckReport report;
  for (size_t k = 0; k < params.size(); ++k) {
    Parameter& p = store.at(params[k]);
    GradCheckEntry entry;
    entry.name = p.name;
    RMat fd(p.value.rows(), p.value.cols());
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double keep = p.value(i);
      p.value(i) = keep + h;
      const double up = run(false);
      p.value(i) = keep - h;
      const double down = run(false);
      p.value(i) = keep;
      fd(i) = (up - down) / (2.0 * h);
    }
    const double scale = std::max(
        {fd.cwiseAbs().maxCoeff(), analytic[k].cwiseAbs().maxCoeff(), 1e-8});
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double an = analytic[k](i);
      const double abs_err = std::abs(fd(i) - an);
      const double rel =
          abs_err / std::max({std::abs(fd(i)), std::abs(an), scale});
      entry.max_abs_err = std::max(entry.max_abs_err, abs_err);
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.worst_rel_err = std::max(report.worst_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace pcnn
