#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcnn/coupling.hpp"
#include "pcnn/footprint.hpp"
#include "pcnn/network.hpp"
#include "pcnn/noise.hpp"
#include "pcnn/trainer.hpp"

namespace pcnn {

using nlohmann::json;

namespace detail {

inline void check_keys(const json& j, const std::string& where,
                       const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw ConfigError("unknown key \"" + item.key() + "\" in " + where);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for \"") + key + "\"");
  }
}

}  // namespace detail

struct DataConfig {
  std::string root = "data/mnist";
  long max_train = 0;  // 0 = all
  long max_test = 0;
};

struct DesignConfig {
  int ports = 21;
  int outputs = 21;
  double wavelength = 1550e-9;
  double slab_index = 2.85;
  double mode_width = 500e-9;
  double radius = 340.9e-6;
  CouplingKernel kernel = CouplingKernel::exact_arc;
  QuadratureSpec quad{};
  // Sweep range (used by the sweep command).
  double theta_min = radians(5.0);
  double theta_max = radians(15.0);
  int steps = 9;
};

struct NoiseConfig {
  std::vector<double> sigmas{0.01};
  std::vector<NoiseKind> kinds{NoiseKind::complex_noise};
  int instances = 5;
  bool target_couplers = true;
  bool target_masks = true;
  RetrainScope scope = RetrainScope::full;
  int retrain_epochs = 10;
};

struct ExperimentConfig {
  uint64_t seed = 1;
  std::string preset = "pcnn-112-16";
  std::string checkpoint;  // optional initial weights
  NetworkConfig network = preset_config("pcnn-112-16");
  DataConfig data{};
  TrainSpec train{};
  DesignConfig design{};
  NoiseConfig noise{};
  FootprintModel footprint{};
  int footprint_ports = 256;
};

namespace detail {

inline MaskMode parse_mask_mode(const std::string& s) {
  if (s == "amp_phase") return MaskMode::amp_phase;
  if (s == "amp_only") return MaskMode::amp_only;
  if (s == "phase_only") return MaskMode::phase_only;
  throw ConfigError("unknown mask mode: " + s);
}

inline ActKind parse_act_kind(const std::string& s) {
  if (s == "linear") return ActKind::linear;
  if (s == "abs") return ActKind::abs;
  if (s == "modrelu") return ActKind::modrelu;
  throw ConfigError("unknown activation kind: " + s);
}

inline BiasKind parse_bias_kind(const std::string& s) {
  if (s == "none") return BiasKind::none;
  if (s == "fixed") return BiasKind::fixed;
  if (s == "shared_scalar") return BiasKind::shared_scalar;
  if (s == "per_element") return BiasKind::per_element;
  throw ConfigError("unknown bias kind: " + s);
}

inline CouplingKernel parse_kernel(const std::string& s) {
  if (s == "exact_arc") return CouplingKernel::exact_arc;
  if (s == "separable") return CouplingKernel::separable;
  throw ConfigError("unknown coupling kernel: " + s);
}

inline NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "phase") return NoiseKind::phase_only;
  if (s == "amplitude") return NoiseKind::amplitude_only;
  if (s == "complex") return NoiseKind::complex_noise;
  throw ConfigError("unknown noise kind: " + s);
}

inline RetrainScope parse_scope(const std::string& s) {
  if (s == "full") return RetrainScope::full;
  if (s == "final_layer") return RetrainScope::final_layer_only;
  throw ConfigError("unknown retrain scope: " + s);
}

inline ActivationSpec parse_activation(const json& j, const std::string& where) {
  check_keys(j, where, {"kind", "bias", "fixed_value"});
  ActivationSpec spec;
  spec.kind = parse_act_kind(get_or<std::string>(j, "kind", "linear"));
  spec.bias = parse_bias_kind(get_or<std::string>(j, "bias", "none"));
  spec.fixed_value = get_or<double>(j, "fixed_value", 0.0);
  validate_activation(spec);
  return spec;
}

inline QuadratureSpec parse_quadrature(const json& j, const std::string& where) {
  check_keys(j, where, {"points", "window_half_widths", "refine_check",
                        "refine_tol", "threads"});
  QuadratureSpec q;
  q.points = detail::get_or<int>(j, "points", q.points);
  q.window_half_widths =
      detail::get_or<double>(j, "window_half_widths", q.window_half_widths);
  q.refine_check = detail::get_or<bool>(j, "refine_check", q.refine_check);
  q.refine_tol = detail::get_or<double>(j, "refine_tol", q.refine_tol);
  q.threads = detail::get_or<int>(j, "threads", q.threads);
  return q;
}

}  // namespace detail

/// Parse and validate a configuration.  Unknown keys anywhere are an error;
/// every section is optional and falls back to defaults.
inline ExperimentConfig parse_config(const json& j) {
  detail::check_keys(j, "config root",
                     {"seed", "network", "data", "train", "design", "noise",
                      "footprint"});
  ExperimentConfig cfg;
  cfg.seed = detail::get_or<uint64_t>(j, "seed", cfg.seed);

  if (j.contains("network")) {
    const json& n = j.at("network");
    detail::check_keys(n, "network",
                       {"preset", "mask_mode", "conv_activation",
                        "fc_activation", "final_activation", "optics",
                        "physical", "checkpoint"});
    cfg.preset = detail::get_or<std::string>(n, "preset", cfg.preset);
    cfg.network = preset_config(cfg.preset);
    if (n.contains("mask_mode"))
      cfg.network.mask_mode =
          detail::parse_mask_mode(n.at("mask_mode").get<std::string>());
    if (n.contains("conv_activation"))
      cfg.network.conv_act =
          detail::parse_activation(n.at("conv_activation"), "conv_activation");
    if (n.contains("fc_activation"))
      cfg.network.fc_act =
          detail::parse_activation(n.at("fc_activation"), "fc_activation");
    if (n.contains("final_activation"))
      cfg.network.final_act = detail::parse_activation(n.at("final_activation"),
                                                       "final_activation");
    if (n.contains("optics")) {
      const std::string mode = n.at("optics").get<std::string>();
      if (mode == "ideal")
        cfg.network.optics = OpticsMode::ideal;
      else if (mode == "physical")
        cfg.network.optics = OpticsMode::physical;
      else
        throw ConfigError("unknown optics mode: " + mode);
    }
    if (n.contains("physical")) {
      const json& p = n.at("physical");
      detail::check_keys(p, "physical",
                         {"wavelength", "slab_index", "mode_width",
                          "theta_edge_deg", "kernel", "quadrature"});
      PhysicalSpec& ph = cfg.network.physical;
      ph.wavelength = detail::get_or<double>(p, "wavelength", ph.wavelength);
      ph.slab_index = detail::get_or<double>(p, "slab_index", ph.slab_index);
      ph.mode_width = detail::get_or<double>(p, "mode_width", ph.mode_width);
      if (p.contains("theta_edge_deg"))
        ph.theta_edge = radians(p.at("theta_edge_deg").get<double>());
      if (p.contains("kernel"))
        ph.kernel = detail::parse_kernel(p.at("kernel").get<std::string>());
      if (p.contains("quadrature"))
        ph.quad = detail::parse_quadrature(p.at("quadrature"), "quadrature");
    }
    cfg.checkpoint = detail::get_or<std::string>(n, "checkpoint", "");
  }
  cfg.network.seed = cfg.seed;

  if (j.contains("data")) {
    const json& d = j.at("data");
    detail::check_keys(d, "data", {"root", "max_train", "max_test"});
    cfg.data.root = detail::get_or<std::string>(d, "root", cfg.data.root);
    cfg.data.max_train = detail::get_or<long>(d, "max_train", 0);
    cfg.data.max_test = detail::get_or<long>(d, "max_test", 0);
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    detail::check_keys(t, "train",
                       {"batch_size", "epochs", "lr", "beta1", "beta2",
                        "epsilon", "calibrate_scale", "calibration_batch",
                        "eval_batch", "verbose"});
    cfg.train.batch_size = detail::get_or<int>(t, "batch_size", 8);
    cfg.train.epochs = detail::get_or<int>(t, "epochs", 80);
    cfg.train.adam.lr = detail::get_or<double>(t, "lr", 1e-3);
    cfg.train.adam.beta1 = detail::get_or<double>(t, "beta1", 0.9);
    cfg.train.adam.beta2 = detail::get_or<double>(t, "beta2", 0.999);
    cfg.train.adam.epsilon = detail::get_or<double>(t, "epsilon", 1e-8);
    cfg.train.calibrate_scale =
        detail::get_or<bool>(t, "calibrate_scale", true);
    cfg.train.calibration_batch =
        detail::get_or<int>(t, "calibration_batch", 64);
    cfg.train.eval_batch = detail::get_or<int>(t, "eval_batch", 256);
    cfg.train.verbose = detail::get_or<bool>(t, "verbose", false);
  }
  cfg.train.seed = cfg.seed;

  if (j.contains("design")) {
    const json& d = j.at("design");
    detail::check_keys(d, "design",
                       {"ports", "outputs", "wavelength", "slab_index",
                        "mode_width", "radius", "kernel", "quadrature",
                        "theta_min_deg", "theta_max_deg", "steps"});
    cfg.design.ports = detail::get_or<int>(d, "ports", cfg.design.ports);
    cfg.design.outputs = detail::get_or<int>(d, "outputs", cfg.design.ports);
    cfg.design.wavelength =
        detail::get_or<double>(d, "wavelength", cfg.design.wavelength);
    cfg.design.slab_index =
        detail::get_or<double>(d, "slab_index", cfg.design.slab_index);
    cfg.design.mode_width =
        detail::get_or<double>(d, "mode_width", cfg.design.mode_width);
    cfg.design.radius = detail::get_or<double>(d, "radius", cfg.design.radius);
    if (d.contains("kernel"))
      cfg.design.kernel =
          detail::parse_kernel(d.at("kernel").get<std::string>());
    if (d.contains("quadrature"))
      cfg.design.quad =
          detail::parse_quadrature(d.at("quadrature"), "design.quadrature");
    if (d.contains("theta_min_deg"))
      cfg.design.theta_min = radians(d.at("theta_min_deg").get<double>());
    if (d.contains("theta_max_deg"))
      cfg.design.theta_max = radians(d.at("theta_max_deg").get<double>());
    cfg.design.steps = detail::get_or<int>(d, "steps", cfg.design.steps);
  }

  if (j.contains("noise")) {
    const json& n = j.at("noise");
    detail::check_keys(n, "noise",
                       {"sigma", "kind", "instances", "target_couplers",
                        "target_masks", "scope", "retrain_epochs"});
    if (n.contains("sigma")) {
      cfg.noise.sigmas.clear();
      if (n.at("sigma").is_array())
        for (const auto& v : n.at("sigma"))
          cfg.noise.sigmas.push_back(v.get<double>());
      else
        cfg.noise.sigmas.push_back(n.at("sigma").get<double>());
    }
    if (n.contains("kind")) {
      cfg.noise.kinds.clear();
      if (n.at("kind").is_array())
        for (const auto& v : n.at("kind"))
          cfg.noise.kinds.push_back(
              detail::parse_noise_kind(v.get<std::string>()));
      else
        cfg.noise.kinds.push_back(
            detail::parse_noise_kind(n.at("kind").get<std::string>()));
    }
    cfg.noise.instances = detail::get_or<int>(n, "instances", 5);
    cfg.noise.target_couplers =
        detail::get_or<bool>(n, "target_couplers", true);
    cfg.noise.target_masks = detail::get_or<bool>(n, "target_masks", true);
    if (n.contains("scope"))
      cfg.noise.scope = detail::parse_scope(n.at("scope").get<std::string>());
    cfg.noise.retrain_epochs = detail::get_or<int>(n, "retrain_epochs", 10);
  }

  if (j.contains("footprint")) {
    const json& f = j.at("footprint");
    detail::check_keys(f, "footprint",
                       {"ports", "mzi_length", "mzi_width",
                        "normalized_radius", "wavelength", "slab_index",
                        "routing_margin"});
    cfg.footprint_ports = detail::get_or<int>(f, "ports", cfg.footprint_ports);
    cfg.footprint.mzi_length =
        detail::get_or<double>(f, "mzi_length", cfg.footprint.mzi_length);
    cfg.footprint.mzi_width =
        detail::get_or<double>(f, "mzi_width", cfg.footprint.mzi_width);
    cfg.footprint.normalized_radius = detail::get_or<double>(
        f, "normalized_radius", cfg.footprint.normalized_radius);
    cfg.footprint.wavelength =
        detail::get_or<double>(f, "wavelength", cfg.footprint.wavelength);
    cfg.footprint.slab_index =
        detail::get_or<double>(f, "slab_index", cfg.footprint.slab_index);
    cfg.footprint.routing_margin =
        detail::get_or<double>(f, "routing_margin", cfg.footprint.routing_margin);
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return parse_config(j);
}

inline const char* to_string(ActKind k) {
  switch (k) {
    case ActKind::linear: return "linear";
    case ActKind::abs: return "abs";
    case ActKind::modrelu: return "modrelu";
  }
  return "?";
}

inline const char* to_string(BiasKind k) {
  switch (k) {
    case BiasKind::none: return "none";
    case BiasKind::fixed: return "fixed";
    case BiasKind::shared_scalar: return "shared_scalar";
    case BiasKind::per_element: return "per_element";
  }
  return "?";
}

inline json activation_json(const ActivationSpec& a) {
  return json{{"kind", to_string(a.kind)},
              {"bias", to_string(a.bias)},
              {"fixed_value", a.fixed_value}};
}

/// Fully resolved configuration (every effective value, defaults included),
/// suitable for reproducing a run.
inline json resolved_config(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  json n;
  n["preset"] = cfg.preset;
  n["mask_mode"] = to_string(cfg.network.mask_mode);
  n["conv_activation"] = activation_json(cfg.network.conv_act);
  n["fc_activation"] = activation_json(cfg.network.fc_act);
  n["final_activation"] = activation_json(cfg.network.final_act);
  n["optics"] =
      cfg.network.optics == OpticsMode::ideal ? "ideal" : "physical";
  n["physical"] = json{
      {"wavelength", cfg.network.physical.wavelength},
      {"slab_index", cfg.network.physical.slab_index},
      {"mode_width", cfg.network.physical.mode_width},
      {"theta_edge_deg", degrees(cfg.network.physical.theta_edge)},
      {"kernel", cfg.network.physical.kernel == CouplingKernel::exact_arc
                     ? "exact_arc"
                     : "separable"},
      {"quadrature",
       json{{"points", cfg.network.physical.quad.points},
            {"window_half_widths",
             cfg.network.physical.quad.window_half_widths},
            {"refine_check", cfg.network.physical.quad.refine_check},
            {"refine_tol", cfg.network.physical.quad.refine_tol},
            {"threads", cfg.network.physical.quad.threads}}}};
  if (!cfg.checkpoint.empty()) n["checkpoint"] = cfg.checkpoint;
  j["network"] = n;
  j["data"] = json{{"root", cfg.data.root},
                   {"max_train", cfg.data.max_train},
                   {"max_test", cfg.data.max_test}};
  j["train"] = json{{"batch_size", cfg.train.batch_size},
                    {"epochs", cfg.train.epochs},
                    {"lr", cfg.train.adam.lr},
                    {"beta1", cfg.train.adam.beta1},
                    {"beta2", cfg.train.adam.beta2},
                    {"epsilon", cfg.train.adam.epsilon},
                    {"calibrate_scale", cfg.train.calibrate_scale},
                    {"calibration_batch", cfg.train.calibration_batch},
                    {"eval_batch", cfg.train.eval_batch},
                    {"verbose", cfg.train.verbose}};
  j["design"] = json{
      {"ports", cfg.design.ports},
      {"outputs", cfg.design.outputs},
      {"wavelength", cfg.design.wavelength},
      {"slab_index", cfg.design.slab_index},
      {"mode_width", cfg.design.mode_width},
      {"radius", cfg.design.radius},
      {"kernel", cfg.design.kernel == CouplingKernel::exact_arc ? "exact_arc"
                                                                : "separable"},
      {"quadrature", json{{"points", cfg.design.quad.points},
                          {"window_half_widths",
                           cfg.design.quad.window_half_widths},
                          {"refine_check", cfg.design.quad.refine_check},
                          {"refine_tol", cfg.design.quad.refine_tol},
                          {"threads", cfg.design.quad.threads}}},
      {"theta_min_deg", degrees(cfg.design.theta_min)},
      {"theta_max_deg", degrees(cfg.design.theta_max)},
      {"steps", cfg.design.steps}};
  json kinds = json::array();
  for (NoiseKind k : cfg.noise.kinds) kinds.push_back(to_string(k));
  j["noise"] = json{{"sigma", cfg.noise.sigmas},
                    {"kind", kinds},
                    {"instances", cfg.noise.instances},
                    {"target_couplers", cfg.noise.target_couplers},
                    {"target_masks", cfg.noise.target_masks},
                    {"scope", cfg.noise.scope == RetrainScope::full
                                  ? "full"
                                  : "final_layer"},
                    {"retrain_epochs", cfg.noise.retrain_epochs}};
  j["footprint"] = json{{"ports", cfg.footprint_ports},
                        {"mzi_length", cfg.footprint.mzi_length},
                        {"mzi_width", cfg.footprint.mzi_width},
                        {"normalized_radius", cfg.footprint.normalized_radius},
                        {"wavelength", cfg.footprint.wavelength},
                        {"slab_index", cfg.footprint.slab_index},
                        {"routing_margin", cfg.footprint.routing_margin}};
  return j;
}

}  // namespace pcnn
