#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "dzsr/checkpoint.hpp"
#include "dzsr/config.hpp"
#include "dzsr/dataset.hpp"
#include "dzsr/error.hpp"
#include "dzsr/evaluation.hpp"
#include "dzsr/log.hpp"
#include "dzsr/png_io.hpp"
#include "dzsr/runtime.hpp"
#include "dzsr/training.hpp"

namespace fs = std::filesystem;
using namespace dzsr;

namespace {

TrainConfig resolve_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
  TrainConfig cfg = path.empty() ? TrainConfig{} : load_config(path);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

void write_degradation_log(const fs::path& path, const DegradationRun& run) {
  std::ofstream os(path);
  os << "epoch,l1,centroid,total\n";
  for (const auto& e : run.epochs) {
    os << e.epoch + 1 << ',' << format_metric(e.l1) << ',' << format_metric(e.centroid) << ','
       << format_metric(e.total) << '\n';
  }
}

void write_zooming_log(const fs::path& path, const ZoomingRun& run) {
  std::ofstream os(path);
  os << "epoch,loss,l1,sw\n";
  for (const auto& e : run.epochs) {
    os << e.epoch + 1 << ',' << format_metric(e.loss) << ',' << format_metric(e.l1) << ',' << format_metric(e.sw)
       << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-zoom self-supervised super-resolution"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Synthesize a dual-zoom dataset");
  GenerateOptions gopt;
  std::string gen_out;
  bool no_noise = false;
  gen->add_option("--scenes", gopt.scenes, "Number of scenes")->check(CLI::PositiveNumber);
  gen->add_option("--ratio", gopt.ratio, "Zoom ratio r")->check(CLI::IsMember({2, 4}));
  gen->add_option("--warp-bound", gopt.pair.warp_bound, "Max residual warp in telephoto pixels");
  gen->add_option("--size", gopt.size, "Telephoto side length in pixels");
  gen->add_option("--seed", gopt.seed, "Generator seed");
  gen->add_flag("--no-noise", no_noise, "Skip LR noise injection");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // train-degradation
  auto* tdeg = app.add_subcommand("train-degradation", "Stage 1: train the degradation network");
  std::string tdeg_data, tdeg_cfg, tdeg_out;
  std::optional<std::uint64_t> tdeg_seed;
  tdeg->add_option("--data", tdeg_data, "Dataset directory")->required();
  tdeg->add_option("--config", tdeg_cfg, "key=value config file (defaults when omitted)");
  tdeg->add_option("--seed", tdeg_seed, "Overrides the config seed");
  tdeg->add_option("--out", tdeg_out, "Checkpoint path")->required();

  // train
  auto* train = app.add_subcommand("train", "Stage 2: train the zooming network");
  std::string tr_data, tr_deg, tr_cfg, tr_out, tr_mode = "full";
  std::optional<std::uint64_t> tr_seed;
  train->add_option("--data", tr_data, "Dataset directory")->required();
  train->add_option("--deg-ckpt", tr_deg, "Stage-1 checkpoint (not needed for --ablation none)");
  train->add_option("--config", tr_cfg, "key=value config file (defaults when omitted)");
  train->add_option("--ablation", tr_mode, "full | no_lr_align | no_ref_align | none | stn | deform_direct");
  train->add_option("--seed", tr_seed, "Overrides the config seed");
  train->add_option("--out", tr_out, "Checkpoint path")->required();

  // infer
  auto* inf = app.add_subcommand("infer", "Super-resolve one short-focus image");
  std::string in_short, in_tele, in_ckpt, in_out;
  inf->add_option("--short", in_short, "Short-focus PNG")->required();
  inf->add_option("--tele", in_tele, "Telephoto PNG")->required();
  inf->add_option("--ckpt", in_ckpt, "Zooming checkpoint")->required();
  inf->add_option("--out", in_out, "Output PNG (16-bit)")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Full-Image / Corner-Image evaluation");
  std::string ev_data, ev_ckpt, ev_report;
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--ckpt", ev_ckpt, "Zooming checkpoint")->required();
  ev->add_option("--report", ev_report, "CSV report path")->required();

  CLI11_PARSE(app, argc, argv);
  log::set_level(log_level);

  try {
    configure_threads();
    if (*gen) {
      if (no_noise) gopt.pair.noise_enabled = false;
      if (gopt.pair.warp_bound < 0) throw ConfigError("--warp-bound must be >= 0");
      write_dataset(gen_out, generate_dataset(gopt));
      log::info("wrote " + std::to_string(gopt.scenes) + " samples to " + gen_out);
    } else if (*tdeg) {
      const auto cfg = resolve_config(tdeg_cfg, tdeg_seed);
      const auto data = read_dataset(tdeg_data);
      auto run = train_degradation(data, cfg);
      save_degradation(tdeg_out, run.net, cfg);
      write_degradation_log(tdeg_out + ".log.csv", run);
      log::info("saved " + tdeg_out + " (" + file_digest(tdeg_out) + ")");
    } else if (*train) {
      const auto cfg = resolve_config(tr_cfg, tr_seed);
      const auto mode = parse_ablation(tr_mode);
      const auto data = read_dataset(tr_data);
      DegradationNet deg{nullptr};
      if (needs_pseudo_lr(mode)) {
        if (tr_deg.empty()) throw ConfigError("--deg-ckpt is required for ablation mode " + tr_mode);
        deg = load_degradation(tr_deg, &cfg);
      }
      auto run = train_selfdzsr(data, deg, cfg, mode);
      save_zooming(tr_out, run.net);
      write_zooming_log(tr_out + ".log.csv", run);
      log::info("saved " + tr_out + " (" + file_digest(tr_out) + ")");
    } else if (*inf) {
      auto net = load_zooming(in_ckpt);
      const Image out = infer(net, read_png(in_short), read_png(in_tele));
      write_png16(in_out, out);
    } else if (*ev) {
      auto net = load_zooming(ev_ckpt);
      const auto report = evaluate(net, read_dataset(ev_data));
      write_report(ev_report, report);
      std::cout << report.summary();
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
