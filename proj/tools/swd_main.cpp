#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "swd/config.hpp"
#include "swd/gradcheck_suite.hpp"
#include "swd/metrics.hpp"
#include "swd/model.hpp"
#include "swd/sample_io.hpp"
#include "swd/synthgen.hpp"
#include "swd/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct GenArgs {
  int scenes = 1;
  int per_scene = 1;
  std::string mode = "mixed";
  uint64_t seed = 0;
  std::string out;
  int width = 96;
  int height = 48;
  int layers = 3;
  int min_disparity = 2;
  int max_disparity = 10;
};

int run_gen(const GenArgs& a) {
  int written = 0;
  for (int scene = 0; scene < a.scenes; ++scene) {
    swd::SceneSpec spec;
    spec.seed = a.seed + static_cast<uint64_t>(scene);
    spec.width = a.width;
    spec.height = a.height;
    spec.layers = a.layers;
    spec.min_disparity = a.min_disparity;
    spec.max_disparity = a.max_disparity;
    spec.mode = swd::drop_mode_from_name(a.mode);
    auto samples = swd::make_scene_samples(spec, a.per_scene);
    for (int k = 0; k < a.per_scene; ++k) {
      char name[64];
      std::snprintf(name, sizeof(name), "scene%04d_v%02d", scene, k);
      swd::write_sample(samples[static_cast<size_t>(k)], a.out + "/" + name);
      ++written;
    }
  }
  std::cout << "wrote " << written << " samples to " << a.out << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string config_file;
  swd::TrainConfig cfg;
  CLI::App* cmd = nullptr;
};

int run_train(TrainArgs& a) {
  swd::TrainConfig cfg;
  if (!a.config_file.empty()) cfg = swd::load_train_config(a.config_file);
  // Explicit flags override the config file.
  auto used = [&](const std::string& flag) { return a.cmd->count(flag) > 0; };
  if (used("--data")) cfg.data_dir = a.cfg.data_dir;
  if (used("--out")) cfg.out_checkpoint = a.cfg.out_checkpoint;
  if (used("--log")) cfg.log_csv = a.cfg.log_csv;
  if (used("--lr")) cfg.lr = a.cfg.lr;
  if (used("--epochs")) cfg.epochs = a.cfg.epochs;
  if (used("--batch")) cfg.batch = a.cfg.batch;
  if (used("--seed")) cfg.seed = a.cfg.seed;
  if (used("--variant")) cfg.variant = a.cfg.variant;
  if (used("--alpha")) cfg.alpha = a.cfg.alpha;
  if (used("--width")) cfg.width = a.cfg.width;
  if (used("--height")) cfg.height = a.cfg.height;
  if (used("--stem-channels")) cfg.stem_channels = a.cfg.stem_channels;
  if (used("--extractor-seed")) cfg.extractor_seed = a.cfg.extractor_seed;
  if (used("--save-every")) cfg.save_every = a.cfg.save_every;
  if (used("--no-augment")) cfg.augment = false;
  if (cfg.data_dir.empty())
    throw CLI::ValidationError("train", "--data (or a config with data=) is required");

  auto result = swd::train(cfg);
  for (const auto& l : result.log)
    if (l.step % 50 == 0 || l.step == 1)
      std::cout << "step " << l.step << " epoch " << l.epoch << " lr " << l.lr << " loss "
                << l.loss_total << " (P " << l.loss_p << ", C " << l.loss_c << ")\n";
  if (result.halted_nonfinite) {
    std::cerr << "training halted: " << result.halt_reason << "\n";
    if (!result.checkpoint_path.empty())
      std::cerr << "last good checkpoint: " << result.checkpoint_path << "\n";
    return kExitNumeric;
  }
  std::cout << "finished " << result.steps << " steps; checkpoint at "
            << result.checkpoint_path << "\n";
  return kExitOk;
}

struct InferArgs {
  std::string ckpt, sample_dir, out;
};

int run_infer(const InferArgs& a) {
  auto lm = swd::load_model_checkpoint(a.ckpt);
  auto sample = swd::read_sample(a.sample_dir);
  auto r = swd::infer(lm.model, sample.i_l, sample.i_r);
  fs::create_directories(a.out);
  swd::write_tensor_file(a.out + "/out_l.swdt", r.out_l);
  swd::write_tensor_file(a.out + "/out_r.swdt", r.out_r);
  swd::write_tensor_file(a.out + "/disp_l.swdt", r.disp_l);
  swd::write_tensor_file(a.out + "/disp_r.swdt", r.disp_r);
  swd::write_ppm(a.out + "/out_l.ppm", r.out_l);
  swd::write_ppm(a.out + "/out_r.ppm", r.out_r);
  swd::write_ppm(a.out + "/in_l.ppm", sample.i_l);
  swd::write_ppm(a.out + "/in_r.ppm", sample.i_r);
  std::cout << "wrote restored pair to " << a.out << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string pred, gt, report;
};

int run_eval(const EvalArgs& a) {
  auto gt_dirs = swd::list_sample_dirs(a.gt);
  if (gt_dirs.empty()) throw swd::FormatError("eval: no samples under " + a.gt);
  swd::EvalReport report;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& dir : gt_dirs) {
    const std::string name = fs::path(dir).filename().string();
    const std::string pdir = a.pred + "/" + name;
    auto gt = swd::read_sample(dir);
    auto out_l = swd::read_tensor_file(pdir + "/out_l.swdt");
    auto out_r = swd::read_tensor_file(pdir + "/out_r.swdt");
    swd::EvalRow row;
    row.sample = name;
    row.psnr_l = swd::psnr(out_l, gt.clean_l);
    row.psnr_r = swd::psnr(out_r, gt.clean_r);
    row.ssim_l = swd::ssim_auto(out_l, gt.clean_l);
    row.ssim_r = swd::ssim_auto(out_r, gt.clean_r);
    report.rows.push_back(row);
  }
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!a.report.empty()) swd::write_eval_csv(a.report, report);
  auto agg = report.aggregate();
  std::cout << "samples " << report.rows.size() << "  psnr " << agg.psnr_l << "/"
            << agg.psnr_r << "  ssim " << agg.ssim_l << "/" << agg.ssim_r << "\n";
  return kExitOk;
}

struct GradcheckArgs {
  std::string module = "all";
  uint64_t seed = 1;
};

int run_gradcheck(const GradcheckArgs& a) {
  std::vector<std::string> modules;
  if (a.module == "all")
    modules = swd::gradcheck_module_names();
  else
    modules.push_back(a.module);
  bool all_ok = true;
  for (const auto& mod : modules) {
    for (const auto& entry : swd::gradcheck_module(mod, a.seed)) {
      const bool ok = entry.ok();
      all_ok = all_ok && ok;
      std::printf("%-10s %-24s %-12.3e %s\n", mod.c_str(), entry.target.c_str(),
                  entry.max_rel_err, ok ? "PASS" : "FAIL");
      if (!entry.error.empty()) std::printf("  %s\n", entry.error.c_str());
    }
  }
  return all_ok ? kExitOk : kExitNumeric;
}

struct AblateArgs {
  std::string variants = "default,mono,TTT";
  std::string data;
  std::string out;
  int epochs = 30;
  uint64_t seed = 0;
};

int run_ablate(const AblateArgs& a) {
  std::vector<std::string> variants;
  {
    std::istringstream ss(a.variants);
    std::string tok;
    while (std::getline(ss, tok, ',')) variants.push_back(tok);
  }
  auto dirs = swd::list_sample_dirs(a.data);
  if (dirs.empty()) throw swd::FormatError("ablate: no samples under " + a.data);
  std::vector<swd::StereoSample> samples;
  for (const auto& d : dirs) samples.push_back(swd::read_sample(d));
  fs::create_directories(a.out);

  std::ofstream csv(a.out + "/ablation.csv");
  csv << "variant,psnr,ssim\n";
  for (const auto& variant : variants) {
    swd::TrainConfig cfg;
    cfg.data_dir = a.data;
    cfg.variant = variant;
    cfg.epochs = a.epochs;
    cfg.seed = a.seed;
    cfg.width = samples[0].width;
    cfg.height = samples[0].height;
    cfg.out_checkpoint = a.out + "/" + variant + ".swdckpt";
    cfg.log_csv = a.out + "/" + variant + "_log.csv";
    auto result = swd::train(cfg, samples);
    if (result.halted_nonfinite) {
      std::cerr << "variant " << variant << " halted: " << result.halt_reason << "\n";
      return kExitNumeric;
    }
    auto lm = swd::load_model_checkpoint(result.checkpoint_path);
    double psnr_acc = 0.0, ssim_acc = 0.0;
    for (const auto& s : samples) {
      auto r = swd::infer(lm.model, s.i_l, s.i_r);
      psnr_acc += 0.5 * (swd::psnr(r.out_l, s.clean_l) + swd::psnr(r.out_r, s.clean_r));
      ssim_acc += 0.5 * (swd::ssim_auto(r.out_l, s.clean_l) +
                         swd::ssim_auto(r.out_r, s.clean_r));
    }
    const double n = static_cast<double>(samples.size());
    csv << variant << "," << psnr_acc / n << "," << ssim_acc / n << "\n";
    csv.flush();
    std::cout << variant << ": psnr " << psnr_acc / n << " ssim " << ssim_acc / n << "\n";
  }
  std::cout << "wrote " << a.out << "/ablation.csv\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stereo waterdrop removal: synthetic data, training, inference, evaluation"};
  app.require_subcommand(1);

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen", "generate synthetic stereo waterdrop samples");
  gen->add_option("--scenes", gen_args.scenes, "number of background scenes");
  gen->add_option("--per-scene", gen_args.per_scene, "corrupted takes per scene");
  gen->add_option("--mode", gen_args.mode, "drops|mist|mixed")
      ->check(CLI::IsMember({"drops", "mist", "mixed"}));
  gen->add_option("--seed", gen_args.seed, "base seed");
  gen->add_option("--out", gen_args.out, "output directory")->required();
  gen->add_option("--width", gen_args.width, "image width (multiple of 16)");
  gen->add_option("--height", gen_args.height, "image height (multiple of 16)");
  gen->add_option("--layers", gen_args.layers, "depth layers per scene");
  gen->add_option("--min-disparity", gen_args.min_disparity, "pixels");
  gen->add_option("--max-disparity", gen_args.max_disparity, "pixels");

  TrainArgs train_args;
  auto* tr = app.add_subcommand("train", "train a variant on a sample directory");
  train_args.cmd = tr;
  tr->add_option("--data", train_args.cfg.data_dir, "sample directory");
  tr->add_option("--config", train_args.config_file, "key = value config file");
  tr->add_option("--variant", train_args.cfg.variant,
                 "default|TTT|RTT|RRR|FD|1row|5row|mono|nocat|noAC");
  tr->add_option("--out", train_args.cfg.out_checkpoint, "checkpoint path");
  tr->add_option("--log", train_args.cfg.log_csv, "metrics CSV path");
  tr->add_option("--lr", train_args.cfg.lr, "initial learning rate");
  tr->add_option("--epochs", train_args.cfg.epochs, "training epochs");
  tr->add_option("--batch", train_args.cfg.batch, "batch size");
  tr->add_option("--seed", train_args.cfg.seed, "training seed");
  tr->add_option("--alpha", train_args.cfg.alpha, "consistency weight");
  tr->add_option("--width", train_args.cfg.width, "image width");
  tr->add_option("--height", train_args.cfg.height, "image height");
  tr->add_option("--stem-channels", train_args.cfg.stem_channels, "encoder stem width");
  tr->add_option("--extractor-seed", train_args.cfg.extractor_seed,
                 "perceptual extractor seed");
  tr->add_option("--save-every", train_args.cfg.save_every, "checkpoint cadence (epochs)");
  tr->add_flag("--no-augment", "disable flip augmentation");

  InferArgs infer_args;
  auto* inf = app.add_subcommand("infer", "restore one sample with a checkpoint");
  inf->add_option("--ckpt", infer_args.ckpt, "checkpoint file")->required();
  inf->add_option("--sample", infer_args.sample_dir, "sample directory")->required();
  inf->add_option("--out", infer_args.out, "output directory")->required();

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "PSNR/SSIM of predictions against ground truth");
  ev->add_option("--pred", eval_args.pred, "prediction root (per-sample subdirs)")
      ->required();
  ev->add_option("--gt", eval_args.gt, "ground-truth sample root")->required();
  ev->add_option("--report", eval_args.report, "report CSV path");

  GradcheckArgs gc_args;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient checks (64-bit)");
  gc->add_option("--module", gc_args.module,
                 "all|diffcore|encoder|rda|disparity|decoder|losses|model");
  gc->add_option("--seed", gc_args.seed, "seed");

  AblateArgs ab_args;
  auto* ab = app.add_subcommand("ablate", "train variants and emit a comparison CSV");
  ab->add_option("--variants", ab_args.variants, "comma-separated variant list");
  ab->add_option("--data", ab_args.data, "sample directory")->required();
  ab->add_option("--out", ab_args.out, "output directory")->required();
  ab->add_option("--epochs", ab_args.epochs, "epochs per variant");
  ab->add_option("--seed", ab_args.seed, "training seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return run_gen(gen_args);
    if (tr->parsed()) return run_train(train_args);
    if (inf->parsed()) return run_infer(infer_args);
    if (ev->parsed()) return run_eval(eval_args);
    if (gc->parsed()) return run_gradcheck(gc_args);
    if (ab->parsed()) return run_ablate(ab_args);
  } catch (const swd::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const swd::FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
