// Command-line front end: coupler design studies, network training and
// evaluation, robustness sweeps and footprint reports.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <zlib.h>

#include "pcnn/pcnn.hpp"

namespace fs = std::filesystem;
using pcnn::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  bool force = false;
  long long seed = -1;  // -1 = from config
  std::string data_root;
  std::string preset;
};

pcnn::ExperimentConfig resolve_config(const CommonOpts& opts) {
  pcnn::ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = pcnn::load_config(opts.config_path);
  if (!opts.preset.empty()) {
    cfg.preset = opts.preset;
    const pcnn::MaskMode mode = cfg.network.mask_mode;
    const pcnn::ActivationSpec conv = cfg.network.conv_act;
    const pcnn::ActivationSpec fcact = cfg.network.fc_act;
    const pcnn::ActivationSpec fin = cfg.network.final_act;
    const pcnn::OpticsMode optics = cfg.network.optics;
    const pcnn::PhysicalSpec phys = cfg.network.physical;
    cfg.network = pcnn::preset_config(opts.preset);
    cfg.network.mask_mode = mode;
    cfg.network.conv_act = conv;
    cfg.network.fc_act = fcact;
    cfg.network.final_act = fin;
    cfg.network.optics = optics;
    cfg.network.physical = phys;
  }
  if (opts.seed >= 0) cfg.seed = static_cast<uint64_t>(opts.seed);
  cfg.network.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  if (!opts.data_root.empty()) {
    cfg.data.root = opts.data_root;
  } else if (opts.config_path.empty() || cfg.data.root == "data/mnist") {
    if (const char* env = std::getenv("PCNN_DATA_DIR")) cfg.data.root = env;
  }
  return cfg;
}

/// Create the output directory.  Refuses to reuse a non-empty directory
/// unless --force is given.
fs::path prepare_out_dir(const CommonOpts& opts, const std::string& command) {
  fs::path dir = opts.out_dir.empty() ? fs::path("pcnn_" + command + "_out")
                                      : fs::path(opts.out_dir);
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir))
      throw pcnn::ConfigError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir) && !opts.force)
      throw pcnn::ConfigError(dir.string() +
                              " is not empty (use --force to overwrite)");
  } else {
    fs::create_directories(dir);
  }
  return dir;
}

uint32_t file_crc32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw pcnn::DataError("cannot read back " + path.string());
  uLong crc = crc32(0L, Z_NULL, 0);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    crc = crc32(crc, reinterpret_cast<const Bytef*>(buf),
                static_cast<uInt>(in.gcount()));
    if (!in) break;
  }
  return static_cast<uint32_t>(crc);
}

/// Write resolved_config.json plus manifest.json listing every produced file
/// with its size and CRC-32.
void finish_out_dir(const fs::path& dir, const std::string& command,
                    const pcnn::ExperimentConfig& cfg) {
  {
    std::ofstream out(dir / "resolved_config.json");
    out << pcnn::resolved_config(cfg).dump(2) << "\n";
  }
  json files = json::array();
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().filename() == "manifest.json") continue;
    char crc_hex[16];
    std::snprintf(crc_hex, sizeof crc_hex, "%08x", file_crc32(entry.path()));
    files.push_back(json{{"name", entry.path().filename().string()},
                         {"bytes", fs::file_size(entry.path())},
                         {"crc32", crc_hex}});
  }
  json manifest{{"command", command},
                {"seed", cfg.seed},
                {"files", files}};
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
}

pcnn::MnistData load_data(const pcnn::ExperimentConfig& cfg) {
  return pcnn::load_mnist(cfg.data.root);
}

void apply_desk_scale(pcnn::ExperimentConfig& cfg, bool desk, bool config_given) {
  if (!desk) return;
  cfg.data.max_train = cfg.data.max_train > 0
                           ? std::min<long>(cfg.data.max_train, 10000)
                           : 10000;
  cfg.data.max_test =
      cfg.data.max_test > 0 ? std::min<long>(cfg.data.max_test, 2000) : 2000;
  if (!config_given) cfg.train.epochs = 10;
  else cfg.train.epochs = std::min(cfg.train.epochs, 10);
}

int cmd_design(const CommonOpts& opts) {
  pcnn::ExperimentConfig cfg = resolve_config(opts);
  const fs::path dir = prepare_out_dir(opts, "design");
  const pcnn::DesignConfig& d = cfg.design;
  const pcnn::StarCouplerGeometry g = pcnn::make_dft_geometry(
      d.ports, d.outputs, d.wavelength, d.slab_index, d.mode_width, d.radius);
  if (!g.warning.empty()) std::cerr << "warning: " << g.warning << "\n";
  const pcnn::TransferMatrix c = pcnn::coupling_matrix(g, d.quad, d.kernel);
  pcnn::save_matrix(c.entries, dir / "coupler.cmat");

  pcnn::CsvWriter csv(dir / "design.csv");
  csv.row({"ports", "outputs", "radius_m", "edge_angle_deg", "fidelity",
           "transmission"});
  double fid = 0.0;
  if (d.ports == d.outputs)
    fid = pcnn::fidelity(c, pcnn::ideal_dft(d.ports));
  const double tr = pcnn::transmission(c);
  csv.row({std::to_string(d.ports), std::to_string(d.outputs),
           pcnn::format_full(d.radius), pcnn::format_full(pcnn::degrees(g.edge_angle())),
           pcnn::format_full(fid), pcnn::format_full(tr)});
  std::cout << "ports=" << d.ports << " radius=" << d.radius
            << " fidelity=" << fid << " transmission=" << tr << "\n";
  finish_out_dir(dir, "design", cfg);
  return 0;
}

int cmd_sweep(const CommonOpts& opts) {
  pcnn::ExperimentConfig cfg = resolve_config(opts);
  const fs::path dir = prepare_out_dir(opts, "sweep");
  pcnn::TradeoffOptions topt;
  topt.wavelength = cfg.design.wavelength;
  topt.slab_index = cfg.design.slab_index;
  topt.mode_width = cfg.design.mode_width;
  topt.kernel = cfg.design.kernel;
  topt.quad = cfg.design.quad;
  topt.quad.refine_check = false;
  const auto rows = pcnn::tradeoff_sweep(cfg.design.ports, cfg.design.theta_min,
                                         cfg.design.theta_max,
                                         cfg.design.steps, topt);
  pcnn::write_tradeoff_csv(dir / "tradeoff.csv", rows);
  for (const auto& r : rows)
    std::cout << "theta=" << pcnn::degrees(r.theta_edge)
              << " deg  R=" << r.radius << "  F=" << r.fidelity
              << "  T=" << r.transmission << "\n";
  finish_out_dir(dir, "sweep", cfg);
  return 0;
}

int cmd_train(const CommonOpts& opts, bool desk, bool config_given) {
  pcnn::ExperimentConfig cfg = resolve_config(opts);
  apply_desk_scale(cfg, desk, config_given);
  const fs::path dir = prepare_out_dir(opts, "train");
  pcnn::MnistData data = load_data(cfg);
  pcnn::Network net(cfg.network);
  if (!cfg.checkpoint.empty())
    pcnn::load_checkpoint(net.params(), cfg.checkpoint);
  std::cout << "training " << cfg.preset << " ("
            << net.parameter_count() << " parameters)\n";
  pcnn::TrainSpec spec = cfg.train;
  spec.max_train = cfg.data.max_train;
  spec.max_test = cfg.data.max_test;
  spec.verbose = true;
  const pcnn::TrainReport report = pcnn::train(net, data.train, data.test, spec);
  pcnn::write_train_csv(dir / "train_report.csv", report);
  pcnn::save_checkpoint(net.params(), dir / "checkpoint.bin");
  std::cout << "final test accuracy " << report.final_stats.test_accuracy
            << "\n";
  finish_out_dir(dir, "train", cfg);
  return 0;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& checkpoint) {
  pcnn::ExperimentConfig cfg = resolve_config(opts);
  const fs::path dir = prepare_out_dir(opts, "evaluate");
  pcnn::MnistData data = load_data(cfg);
  pcnn::Network net(cfg.network);
  const std::string ckpt = checkpoint.empty() ? cfg.checkpoint : checkpoint;
  if (!ckpt.empty()) pcnn::load_checkpoint(net.params(), ckpt);
  const pcnn::EvalResult res =
      pcnn::evaluate(net, data.test, cfg.data.max_test, cfg.train.eval_batch);
  pcnn::CsvWriter csv(dir / "evaluation.csv");
  csv.row({"samples", "accuracy", "mean_loss"});
  csv.row({std::to_string(res.samples), pcnn::format_full(res.accuracy),
           pcnn::format_full(res.mean_loss)});
  pcnn::CsvWriter conf(dir / "confusion.csv");
  {
    std::string header = "true\\pred";
    for (int c = 0; c < res.confusion.cols(); ++c)
      header += "," + std::to_string(c);
    conf.line(header);
    for (int r = 0; r < res.confusion.rows(); ++r) {
      std::string line = std::to_string(r);
      for (int c = 0; c < res.confusion.cols(); ++c)
        line += "," + std::to_string(res.confusion(r, c));
      conf.line(line);
    }
  }
  std::cout << "accuracy " << res.accuracy << " over " << res.samples
            << " samples\n";
  finish_out_dir(dir, "evaluate", cfg);
  return 0;
}

int cmd_gradcheck(const CommonOpts& opts, int batch, double step,
                  double tolerance) {
  pcnn::ExperimentConfig cfg = resolve_config(opts);
  const fs::path dir = prepare_out_dir(opts, "gradcheck");
  pcnn::Network net(cfg.network);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  pcnn::CMat x(cfg.network.input_size(), batch);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x(i) = pcnn::Complex(uni(rng), uni(rng));
  std::vector<int> labels(static_cast<size_t>(batch));
  for (auto& l : labels)
    l = static_cast<int>(rng() % static_cast<uint64_t>(cfg.network.output_size()));

  auto run = [&](bool with_grad) {
    pcnn::Tape tape(net.params());
    pcnn::Tape::NodeId out = net.forward(tape, x);
    const double loss =
        tape.power_softmax_xent(out, net.output_scale_id(), labels);
    if (with_grad) tape.backward();
    return loss;
  };
  const std::vector<pcnn::ParamId> ids = net.params().all_ids();
  const pcnn::GradCheckReport report =
      pcnn::check_gradients(net.params(), ids, run, step);

  pcnn::CsvWriter csv(dir / "gradcheck.csv");
  csv.row({"parameter", "max_abs_err", "max_rel_err"});
  for (const auto& e : report.entries)
    csv.row({e.name, pcnn::format_full(e.max_abs_err),
             pcnn::format_full(e.max_rel_err)});
  std::cout << "worst relative gradient error " << report.worst_rel_err
            << " (tolerance " << tolerance << ")\n";
  finish_out_dir(dir, "gradcheck", cfg);
  return report.worst_rel_err <= tolerance ? 0 : 1;
}

int cmd_noise(const CommonOpts& opts, const std::string& checkpoint,
              bool desk, bool config_given) {
  pcnn::ExperimentConfig cfg = resolve_config(opts);
  apply_desk_scale(cfg, desk, config_given);
  const fs::path dir = prepare_out_dir(opts, "noise");
  pcnn::MnistData data = load_data(cfg);
  pcnn::Network net(cfg.network);
  const std::string ckpt = checkpoint.empty() ? cfg.checkpoint : checkpoint;
  if (ckpt.empty())
    throw pcnn::ConfigError("noise sweep needs trained weights (--checkpoint)");
  pcnn::load_checkpoint(net.params(), ckpt);
  const auto points = pcnn::degradation_sweep(
      net, data.test, cfg.noise.sigmas, cfg.noise.kinds, cfg.noise.instances,
      cfg.seed, cfg.data.max_test, cfg.noise.target_couplers,
      cfg.noise.target_masks);
  pcnn::write_noise_csv(dir / "noise_sweep.csv", points);
  for (const auto& p : points)
    std::cout << pcnn::to_string(p.kind) << " sigma=" << p.sigma << " acc="
              << p.mean_accuracy << " +- " << p.std_accuracy << "\n";
  finish_out_dir(dir, "noise", cfg);
  return 0;
}

int cmd_retrain(const CommonOpts& opts, const std::string& checkpoint,
                double sigma, const std::string& scope_name, bool desk,
                bool config_given) {
  pcnn::ExperimentConfig cfg = resolve_config(opts);
  apply_desk_scale(cfg, desk, config_given);
  const fs::path dir = prepare_out_dir(opts, "retrain");
  pcnn::MnistData data = load_data(cfg);
  pcnn::Network net(cfg.network);
  const std::string ckpt = checkpoint.empty() ? cfg.checkpoint : checkpoint;
  if (ckpt.empty())
    throw pcnn::ConfigError("retrain needs trained weights (--checkpoint)");
  pcnn::load_checkpoint(net.params(), ckpt);

  const pcnn::RetrainScope scope =
      scope_name.empty() ? cfg.noise.scope : pcnn::detail::parse_scope(scope_name);
  const double sig = sigma >= 0.0 ? sigma : cfg.noise.sigmas.front();

  const double clean_acc =
      pcnn::evaluate(net, data.test, cfg.data.max_test).accuracy;
  pcnn::NoiseSpec nspec;
  nspec.sigma = sig;
  nspec.kind = pcnn::NoiseKind::complex_noise;
  nspec.target_couplers = cfg.noise.target_couplers;
  nspec.target_masks = cfg.noise.target_masks;
  nspec.seed = cfg.seed;
  pcnn::Network noisy = pcnn::inject_noise(net, nspec);
  const double noisy_acc =
      pcnn::evaluate(noisy, data.test, cfg.data.max_test).accuracy;

  pcnn::TrainSpec spec = cfg.train;
  spec.epochs = cfg.noise.retrain_epochs;
  spec.max_train = cfg.data.max_train;
  spec.max_test = cfg.data.max_test;
  spec.verbose = true;
  const pcnn::TrainReport report =
      pcnn::retrain(noisy, data.train, data.test, scope, spec);
  const double retrained_acc = report.final_stats.test_accuracy;

  const std::string scope_str =
      scope == pcnn::RetrainScope::full ? "full" : "final_layer";
  pcnn::CsvWriter csv(dir / "retrain_report.csv");
  csv.row({"scope", "sigma", "epoch", "train_loss", "train_accuracy",
           "test_loss", "test_accuracy"});
  for (const auto& s : report.epochs)
    csv.row({scope_str, pcnn::format_full(sig), std::to_string(s.epoch),
             pcnn::format_full(s.train_loss), pcnn::format_full(s.train_accuracy),
             pcnn::format_full(s.test_loss), pcnn::format_full(s.test_accuracy)});
  csv.row({scope_str, pcnn::format_full(sig), "final",
           pcnn::format_full(report.final_stats.train_loss),
           pcnn::format_full(report.final_stats.train_accuracy),
           pcnn::format_full(report.final_stats.test_loss),
           pcnn::format_full(retrained_acc)});
  pcnn::CsvWriter summary(dir / "retrain_summary.csv");
  summary.row({"scope", "sigma", "clean_accuracy", "noisy_accuracy",
               "retrained_accuracy"});
  summary.row({scope_str, pcnn::format_full(sig), pcnn::format_full(clean_acc),
               pcnn::format_full(noisy_acc), pcnn::format_full(retrained_acc)});
  pcnn::save_checkpoint(noisy.params(), dir / "retrained_checkpoint.bin");
  std::cout << "clean " << clean_acc << " -> noisy " << noisy_acc
            << " -> retrained(" << scope_str << ") " << retrained_acc << "\n";
  finish_out_dir(dir, "retrain", cfg);
  return 0;
}

int cmd_footprint(const CommonOpts& opts, int ports) {
  pcnn::ExperimentConfig cfg = resolve_config(opts);
  const fs::path dir = prepare_out_dir(opts, "footprint");
  const int n = ports > 0 ? ports : cfg.footprint_ports;
  const pcnn::FootprintReport rep = pcnn::footprint_compare(n, cfg.footprint);
  pcnn::CsvWriter csv(dir / "footprint.csv");
  csv.row({"ports", "mzi_count", "mzi_area_m2", "edge_angle_deg", "radius_m",
           "star_length_m", "star_width_m", "star_area_m2", "area_ratio"});
  csv.row({std::to_string(rep.ports), std::to_string(rep.mzi_count),
           pcnn::format_full(rep.mzi_area),
           pcnn::format_full(pcnn::degrees(rep.edge_angle)),
           pcnn::format_full(rep.radius), pcnn::format_full(rep.star_length),
           pcnn::format_full(rep.star_width), pcnn::format_full(rep.star_area),
           pcnn::format_full(rep.area_ratio)});
  std::cout << "ports=" << rep.ports << " mzi_count=" << rep.mzi_count
            << " mzi_area=" << rep.mzi_area << " m^2  star_area="
            << rep.star_area << " m^2  ratio=" << rep.area_ratio << "\n";
  finish_out_dir(dir, "footprint", cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photonic convolutional network design and training toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  bool desk = false;
  app.add_option("--config", opts.config_path, "JSON configuration file");
  app.add_option("--out", opts.out_dir, "output directory");
  app.add_flag("--force", opts.force, "allow writing into a non-empty directory");
  app.add_option("--seed", opts.seed, "override the experiment seed");
  app.add_option("--data-root", opts.data_root,
                 "dataset directory (default: config, then $PCNN_DATA_DIR)");
  app.add_option("--preset", opts.preset, "network preset name");
  app.add_flag("--desk-scale", desk,
               "clamp to 10k train / 2k test samples and 10 epochs");

  auto* design = app.add_subcommand("design", "simulate one star coupler");
  auto* sweep = app.add_subcommand("sweep", "fidelity/transmission trade-off");
  auto* train = app.add_subcommand("train", "train a network on MNIST");
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint");
  std::string checkpoint;
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint file");
  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient audit");
  int gc_batch = 4;
  double gc_step = 1e-6, gc_tol = 1e-4;
  gradcheck->add_option("--batch", gc_batch, "batch size");
  gradcheck->add_option("--step", gc_step, "finite-difference step");
  gradcheck->add_option("--tolerance", gc_tol, "max relative error");
  auto* noise = app.add_subcommand("noise", "accuracy under fabrication noise");
  std::string noise_ckpt;
  noise->add_option("--checkpoint", noise_ckpt, "checkpoint file");
  auto* retrain = app.add_subcommand("retrain", "retrain after perturbation");
  std::string retrain_ckpt, retrain_scope;
  double retrain_sigma = -1.0;
  retrain->add_option("--checkpoint", retrain_ckpt, "checkpoint file");
  retrain->add_option("--sigma", retrain_sigma, "noise strength");
  retrain->add_option("--scope", retrain_scope,
                      "retraining scope: full | final_layer");
  auto* footprint = app.add_subcommand("footprint", "mesh vs star area");
  int fp_ports = 0;
  footprint->add_option("--ports", fp_ports, "port count (power of two)");

  for (CLI::App* sub : {design, sweep, train, evaluate, gradcheck, noise,
                        retrain, footprint})
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  const bool config_given = !opts.config_path.empty();

  try {
    if (design->parsed()) return cmd_design(opts);
    if (sweep->parsed()) return cmd_sweep(opts);
    if (train->parsed()) return cmd_train(opts, desk, config_given);
    if (evaluate->parsed()) return cmd_evaluate(opts, checkpoint);
    if (gradcheck->parsed())
      return cmd_gradcheck(opts, gc_batch, gc_step, gc_tol);
    if (noise->parsed()) return cmd_noise(opts, noise_ckpt, desk, config_given);
    if (retrain->parsed())
      return cmd_retrain(opts, retrain_ckpt, retrain_sigma, retrain_scope,
                         desk, config_given);
    if (footprint->parsed()) return cmd_footprint(opts, fp_ports);
  } catch (const pcnn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
