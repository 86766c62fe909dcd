#include "nelf/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nelf/bench.hpp"
#include "nelf/flops.hpp"
#include "nelf/metrics.hpp"
#include "nelf/training.hpp"

namespace nelf {

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitIncompatible = 4;

uint64_t derive_seed(uint64_t seed, uint64_t tag) {
  return Rng::with_tag(seed, tag).next_u64();
}

constexpr uint64_t kSeedReal = 101;
constexpr uint64_t kSeedPseudo = 102;
constexpr uint64_t kSeedHoldout = 103;

RunConfig make_config(const std::string& config_path,
                      const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = RunConfig::load(config_path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ValidationError("--set expects key=value, got '" + kv + "'");
    cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

Vector parse_code(const std::string& csv, int d_e) {
  Vector e = Vector::Zero(d_e);
  if (csv.empty()) return e;
  std::stringstream ss(csv);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= d_e) throw ValidationError("expression code has more than d_e entries");
    try {
      e(i++) = std::stod(item);
    } catch (const std::exception&) {
      throw ValidationError("bad expression component '" + item + "'");
    }
  }
  return e;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << text;
  if (!os) throw IoError("write failed for " + path);
}

std::string frame_name(int index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d.%s", index, ext);
  return buf;
}

int cmd_make_data(const RunConfig& cfg, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir);

  const SceneParams scene = cfg.scene();
  SimulatedRealSet real =
      simulate_real_set(scene, cfg.real_count, cfg.noise(),
                        derive_seed(cfg.seed, kSeedReal), cfg.image_size,
                        cfg.image_size);
  write_dataset(real.frames, out_dir + "/real.lavds");

  auto pseudo = synthesize_pseudo_set(scene, real.frames, cfg.pseudo_count,
                                      derive_seed(cfg.seed, kSeedPseudo));
  write_dataset(pseudo, out_dir + "/pseudo.lavds");

  auto holdout = synthesize_pseudo_set(scene, real.frames, cfg.holdout_count,
                                       derive_seed(cfg.seed, kSeedHoldout));
  write_dataset(holdout, out_dir + "/holdout.lavds");

  cfg.save(out_dir + "/config.txt");

  std::cout << "seed=" << cfg.seed << "\n";
  std::cout << "real_frames=" << real.frames.size() << "\n";
  std::cout << "pseudo_frames=" << pseudo.size() << "\n";
  std::cout << "holdout_frames=" << holdout.size() << "\n";
  std::cout << "out_dir=" << out_dir << "\n";
  return kExitOk;
}

Stage parse_stage(const std::string& s) {
  if (s == "1") return Stage::Stage1;
  if (s == "2") return Stage::Stage2;
  if (s == "finetune" || s == "3") return Stage::Finetune;
  throw ValidationError("unknown stage '" + s + "' (expected 1, 2 or finetune)");
}

int cmd_train(const RunConfig& cfg, const std::string& stage_str,
              const std::string& data_dir, const std::string& in_ckpt,
              const std::string& out_ckpt, std::string log_csv) {
  const Stage stage = parse_stage(stage_str);
  const uint64_t hash = cfg.arch_hash();

  auto pseudo_frames = read_dataset(data_dir + "/pseudo.lavds");
  std::vector<ExpressionFrame> real_frames;
  if (stage == Stage::Finetune) {
    real_frames = read_dataset(data_dir + "/real.lavds");
    check(static_cast<int>(real_frames.size()) == cfg.real_count,
          "train: real dataset size does not match config real_count");
  }
  auto pseudo = build_train_frames(pseudo_frames);
  auto real = build_train_frames(real_frames);

  ModelBundle bundle;
  bundle.init(cfg.model(), cfg.seed);

  const uint64_t stage_start = stage_start_iteration(cfg, stage);
  const uint64_t stage_total = stage_total_iters(cfg, stage);
  uint64_t iteration = 0;
  if (!in_ckpt.empty()) {
    iteration = load_checkpoint(in_ckpt, bundle, nullptr, hash).iteration;
  } else if (stage != Stage::Stage1) {
    throw ValidationError("train: stage " + stage_str +
                          " requires an input checkpoint (--in)");
  }
  if (iteration < stage_start)
    throw ValidationError(
        "train: input checkpoint has not completed the prerequisite stage (iteration " +
        std::to_string(iteration) + " < " + std::to_string(stage_start) + ")");
  if (iteration >= stage_start + stage_total)
    throw ValidationError("train: stage already complete at iteration " +
                          std::to_string(iteration));

  Adam adam = Adam::create(bundle, stage_prefixes(stage, bundle.cfg.expression_mode),
                           cfg);
  if (iteration > stage_start) {
    // Mid-stage resume: restore the optimizer as well.
    const auto info = load_checkpoint(in_ckpt, bundle, &adam, hash);
    if (!info.optimizer_loaded)
      throw IncompatibleError("train: checkpoint lacks optimizer state for resume");
  }

  PerceptualExtractor extractor(cfg.perc_seed);
  const PerceptualExtractor* ext = cfg.lambda_perc > 0.0 ? &extractor : nullptr;

  LossLog log;
  const uint64_t n_iters = stage_start + stage_total - iteration;
  run_stage(stage, bundle, adam, pseudo, real, cfg, iteration - stage_start, n_iters,
            ext, &log);

  save_checkpoint(out_ckpt, bundle, &adam, stage_start + stage_total, hash);

  if (log_csv.empty()) log_csv = out_ckpt + ".loss.csv";
  std::ostringstream csv;
  csv << "iteration,loss\n";
  for (const auto& [it, loss] : log) csv << it << "," << loss << "\n";
  write_text_file(log_csv, csv.str());

  std::cout << "stage=" << stage_str << "\n";
  std::cout << "iterations=" << n_iters << "\n";
  if (!log.empty()) {
    std::cout << "loss_first=" << log.front().second << "\n";
    std::cout << "loss_last=" << log.back().second << "\n";
  }
  std::cout << "checkpoint=" << out_ckpt << "\n";
  return kExitOk;
}

int cmd_render(const RunConfig& cfg, const std::string& ckpt,
               const std::string& out_dir, const std::string& dataset_path,
               int index, const std::string& expr_csv, int traj_frames,
               bool report_psnr, bool lavimg) {
  ModelBundle bundle;
  bundle.init(cfg.model(), cfg.seed);
  load_checkpoint(ckpt, bundle, nullptr, cfg.arch_hash());

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir);

  if (!dataset_path.empty()) {
    auto frames = read_dataset(dataset_path);
    check(!frames.empty(), "render: dataset is empty");
    int lo = 0, hi = static_cast<int>(frames.size());
    if (index >= 0) {
      check(index < hi, "render: frame index out of range");
      lo = index;
      hi = index + 1;
    }
    for (int i = lo; i < hi; ++i) {
      const auto& f = frames[static_cast<size_t>(i)];
      Image img = render(f.e, f.camera, f.shoulder_rotation, bundle, kRelaxedOrthoTol);
      write_png(img, out_dir + "/" + frame_name(i, "png"));
      if (lavimg) write_lavimg(img, out_dir + "/" + frame_name(i, "lavimg"));
      if (report_psnr)
        std::cout << "frame=" << i << " psnr=" << std::fixed << std::setprecision(9)
                  << psnr(img, f.image) << "\n";
    }
    std::cout << "rendered=" << (hi - lo) << "\n";
    return kExitOk;
  }

  // Orbit trajectory at a fixed expression code.
  check(traj_frames >= 1, "render: trajectory needs at least one frame");
  const Vector e = parse_code(expr_csv, cfg.d_e);
  for (int i = 0; i < traj_frames; ++i) {
    const double s = traj_frames > 1 ? static_cast<double>(i) / (traj_frames - 1) : 0.5;
    const double az = (-35.0 + 70.0 * s) * M_PI / 180.0;
    CameraPose cam = make_orbit_camera(2.5, az, 0.1, cfg.image_size, cfg.image_size);
    std::optional<Mat3> shoulder;
    if (cfg.shoulder) shoulder = Mat3::Identity();
    Image img = render(e, cam, shoulder, bundle);
    write_png(img, out_dir + "/" + frame_name(i, "png"));
    if (lavimg) write_lavimg(img, out_dir + "/" + frame_name(i, "lavimg"));
  }
  std::cout << "rendered=" << traj_frames << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, const std::string& ckpt,
             const std::string& dataset_path, const std::string& out_report,
             const std::string& out_csv, bool self_check) {
  ModelBundle bundle;
  if (!self_check) {
    bundle.init(cfg.model(), cfg.seed);
    load_checkpoint(ckpt, bundle, nullptr, cfg.arch_hash());
  }
  auto frames = read_dataset(dataset_path);
  check(!frames.empty(), "eval: dataset is empty");

  PerceptualExtractor extractor(cfg.perc_seed);
  std::vector<FrameMetrics> rows;
  rows.reserve(frames.size());
  for (const auto& f : frames) {
    // --self scores the stored images against themselves (metric and data
    // plumbing sanity check).
    Image img = self_check ? f.image
                           : render(f.e, f.camera, f.shoulder_rotation, bundle,
                                    kRelaxedOrthoTol);
    FrameMetrics m;
    m.psnr = psnr(img, f.image);
    m.ssim = ssim(img, f.image);
    m.perceptual = perceptual_metric(extractor, img, f.image);
    rows.push_back(m);
  }
  MetricReport report = make_report(rows);
  std::cout << report.to_text();
  if (!out_report.empty()) write_text_file(out_report, report.to_text());
  if (!out_csv.empty()) write_text_file(out_csv, report.to_csv());
  return kExitOk;
}

int cmd_flops(const RunConfig& cfg, bool paper_scale, int resolution,
              const std::string& out_csv) {
  ModelConfig model = paper_scale ? paper_scale_model() : cfg.model();
  if (resolution <= 0) resolution = paper_scale ? 512 : cfg.image_size;
  FlopsBreakdown bd = flops_per_pixel(model, resolution, resolution);
  std::cout << bd.to_text();

  // Sensitivity of the total to the undocumented sampling parameters.
  std::cout << "# sensitivity (total MACs/pixel)\n";
  for (int k : {8, 16, 32}) {
    for (int pe : {4, 6, 10}) {
      ModelConfig m = model;
      m.ray.k_samples = k;
      m.ray.pe_freqs = pe;
      const auto b = flops_per_pixel(m, resolution, resolution);
      std::printf("total[k=%d,pe=%d]=%.1f\n", k, pe, b.total_macs_per_pixel);
    }
  }
  if (!out_csv.empty()) write_text_file(out_csv, bd.to_csv());
  return kExitOk;
}

int cmd_bench(const RunConfig& cfg, const std::string& ckpt, int resolution,
              int warmup, int iters) {
  ModelBundle bundle;
  bundle.init(cfg.model(), cfg.seed);
  if (!ckpt.empty()) load_checkpoint(ckpt, bundle, nullptr, cfg.arch_hash());
  Vector e = Vector::Zero(cfg.d_e);
  e(0) = 0.4;
  std::optional<Mat3> shoulder;
  if (cfg.shoulder) shoulder = Mat3::Identity();
  BenchResult r = bench_fps(bundle, e, shoulder, resolution, warmup, iters);
  std::printf("resolution=%d\n", resolution);
  std::printf("iters=%d\n", iters);
  std::printf("mean_ms=%.3f\n", r.mean_ms);
  std::printf("std_ms=%.3f\n", r.std_ms);
  std::printf("mean_fps=%.3f\n", r.mean_fps);
  for (size_t i = 0; i < r.frame_ms.size(); ++i)
    std::printf("frame_ms[%zu]=%.3f\n", i, r.frame_ms[i]);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Expression-conditioned neural light field renderer"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "Config file (key=value lines)");
  app.add_option("--set", overrides, "Override a config key (key=value)");

  auto* sc_data = app.add_subcommand("make-data", "Synthesize training datasets");
  std::string out_dir;
  sc_data->add_option("--out", out_dir, "Output directory")->required();

  auto* sc_train = app.add_subcommand("train", "Run one training stage");
  std::string stage_str, data_dir, in_ckpt, out_ckpt, log_csv;
  sc_train->add_option("--stage", stage_str, "1, 2 or finetune")->required();
  sc_train->add_option("--data", data_dir, "Dataset directory")->required();
  sc_train->add_option("--in", in_ckpt, "Input checkpoint");
  sc_train->add_option("--out", out_ckpt, "Output checkpoint")->required();
  sc_train->add_option("--log", log_csv, "Loss CSV path");

  auto* sc_render = app.add_subcommand("render", "Render frames from a checkpoint");
  std::string r_ckpt, r_out, r_dataset, r_expr;
  int r_index = -1, r_frames = 10;
  bool r_psnr = false, r_lavimg = false;
  sc_render->add_option("--ckpt", r_ckpt, "Checkpoint")->required();
  sc_render->add_option("--out", r_out, "Output directory")->required();
  sc_render->add_option("--dataset", r_dataset, "Render the frames of this dataset");
  sc_render->add_option("--index", r_index, "Single frame index within --dataset");
  sc_render->add_option("--expr", r_expr, "Expression code (comma separated)");
  sc_render->add_option("--frames", r_frames, "Trajectory frame count");
  sc_render->add_flag("--report-psnr", r_psnr, "Print PSNR vs dataset images");
  sc_render->add_flag("--lavimg", r_lavimg, "Also write float containers");

  auto* sc_eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string e_ckpt, e_dataset, e_report, e_csv;
  bool e_self = false;
  sc_eval->add_option("--ckpt", e_ckpt, "Checkpoint");
  sc_eval->add_option("--dataset", e_dataset, "Dataset file")->required();
  sc_eval->add_option("--out", e_report, "Report file (key=value lines)");
  sc_eval->add_option("--csv", e_csv, "Per-frame CSV");
  sc_eval->add_flag("--self", e_self, "Score dataset images against themselves");

  auto* sc_flops = app.add_subcommand("flops", "Analytic per-pixel cost");
  bool f_paper = false;
  int f_resolution = 0;
  std::string f_csv;
  sc_flops->add_flag("--paper-scale", f_paper, "Use the full-scale architecture");
  sc_flops->add_option("--resolution", f_resolution, "Output resolution");
  sc_flops->add_option("--csv", f_csv, "Per-layer CSV");

  auto* sc_bench = app.add_subcommand("bench", "Rendering throughput");
  std::string b_ckpt;
  int b_resolution = 256, b_warmup = 1, b_iters = 5;
  sc_bench->add_option("--ckpt", b_ckpt, "Checkpoint (random weights if omitted)");
  sc_bench->add_option("--resolution", b_resolution, "Square output resolution");
  sc_bench->add_option("--warmup", b_warmup, "Discarded warmup renders");
  sc_bench->add_option("--iters", b_iters, "Timed renders");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    const RunConfig cfg = make_config(config_path, overrides);
    if (sc_data->parsed()) return cmd_make_data(cfg, out_dir);
    if (sc_train->parsed())
      return cmd_train(cfg, stage_str, data_dir, in_ckpt, out_ckpt, log_csv);
    if (sc_render->parsed())
      return cmd_render(cfg, r_ckpt, r_out, r_dataset, r_index, r_expr, r_frames,
                        r_psnr, r_lavimg);
    if (sc_eval->parsed()) {
      check(e_self || !e_ckpt.empty(), "eval: --ckpt is required unless --self");
      return cmd_eval(cfg, e_ckpt, e_dataset, e_report, e_csv, e_self);
    }
    if (sc_flops->parsed()) return cmd_flops(cfg, f_paper, f_resolution, f_csv);
    if (sc_bench->parsed())
      return cmd_bench(cfg, b_ckpt, b_resolution, b_warmup, b_iters);
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IncompatibleError& e) {
    std::cerr << "incompatibility error: " << e.what() << "\n";
    return kExitIncompatible;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace nelf
