// Command-line front end: dataset generation, two-stage training,
// KITTI-protocol evaluation, BEV rendering, and diagnostics.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "monobev/bev_render.hpp"
#include "monobev/config.hpp"
#include "monobev/evaluation.hpp"
#include "monobev/grad_check.hpp"
#include "monobev/kitti_io.hpp"
#include "monobev/synthdata.hpp"
#include "monobev/training.hpp"

namespace fs = std::filesystem;
using namespace monobev;

namespace {

struct CommonFlags {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig cfg;
  if (flags.config_path) cfg.load_file(*flags.config_path);
  if (flags.seed) cfg.set_seed(*flags.seed);
  return cfg;
}

std::vector<fs::path> sorted_files(const std::string& dir, const std::string& ext) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

bool iequals(const std::string& a, const std::string& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

int cmd_gen_data(const CommonFlags& flags, std::optional<int> n,
                 std::optional<int> crop_size) {
  RunConfig cfg = resolve_config(flags);
  if (n) cfg.synth.n = *n;
  if (crop_size) cfg.set_crop_size(*crop_size);
  cfg.echo(flags.out_dir);
  synth::make_dataset(cfg.synth, flags.out_dir);
  std::printf("wrote %d samples to %s\n", cfg.synth.n, flags.out_dir.c_str());
  return 0;
}

int cmd_train(const CommonFlags& flags, int stage, const std::string& dataset_dir,
              const std::string& ckpt, std::optional<double> lambda_depth,
              std::optional<int> epochs, bool no_augment) {
  RunConfig cfg = resolve_config(flags);
  if (lambda_depth) cfg.trainer.lambda_depth = *lambda_depth;
  if (no_augment) cfg.trainer.augment = false;
  const synth::Dataset ds = synth::load_dataset(dataset_dir);
  cfg.set_crop_size(ds.config.crop_size);
  if (epochs) {
    (stage == 1 ? cfg.trainer.epochs_stage1 : cfg.trainer.epochs_stage2) = *epochs;
  }
  cfg.echo(flags.out_dir);

  train::StageResult result;
  if (stage == 1) {
    result = train::train_stage1(ds.samples, cfg.trainer, cfg.branch, flags.out_dir);
  } else {
    if (ckpt.empty()) {
      throw std::runtime_error("train --stage 2 needs --ckpt pointing at the "
                               "stage-1 checkpoint");
    }
    result = train::train_stage2(ds.samples, cfg.trainer, ckpt, flags.out_dir);
  }
  train::write_history((fs::path(flags.out_dir) / "history.csv").string(),
                       result.history);
  const auto& last = result.history.back();
  std::printf("stage %d done: loss %.6g, val mean IoU %.4f, hit@0.5 %.4f\n", stage,
              last.loss_total, last.val.mean_iou, last.val.hit50);
  if (stage == 2) {
    std::printf("  median z err %.3f m, median yaw err %.2f deg\n",
                last.val.med_z_err, last.val.med_yaw_deg);
  }
  std::printf("checkpoint: %s\n", result.checkpoint_path.c_str());
  return 0;
}

kitti::Difficulty tier_from_name(const std::string& name) {
  if (iequals(name, "easy")) return kitti::Difficulty::Easy;
  if (iequals(name, "moderate")) return kitti::Difficulty::Moderate;
  if (iequals(name, "hard")) return kitti::Difficulty::Hard;
  throw std::runtime_error("unknown tier: " + name);
}

int cmd_eval(const CommonFlags& flags, const std::string& pred_dir,
             const std::string& gt_dir, std::vector<double> thresholds,
             const std::string& tier, const std::string& geom_name,
             const std::string& class_filter) {
  RunConfig cfg = resolve_config(flags);
  cfg.echo(flags.out_dir);
  if (thresholds.empty()) thresholds = {0.5, 0.75, 0.9};
  std::vector<kitti::Difficulty> tiers;
  if (tier == "all") {
    tiers = {kitti::Difficulty::Easy, kitti::Difficulty::Moderate,
             kitti::Difficulty::Hard};
  } else {
    tiers = {tier_from_name(tier)};
  }
  const eval::IouGeometry geom =
      geom_name == "2d" ? eval::IouGeometry::Frontal : eval::IouGeometry::Bev;

  std::vector<std::vector<eval::EvalDetection>> dets;
  std::vector<std::vector<eval::EvalObject>> gts;
  for (const auto& gt_path : sorted_files(gt_dir, ".txt")) {
    std::vector<eval::EvalObject> frame_gt;
    for (const auto& r : kitti::load_label_file(gt_path.string())) {
      if (!iequals(r.class_name, class_filter)) continue;
      frame_gt.push_back(
          {bev_footprint(kitti::to_box3d(r)), r.bbox, kitti::classify_difficulty(r)});
    }
    std::vector<eval::EvalDetection> frame_det;
    const fs::path pred_path = fs::path(pred_dir) / gt_path.filename();
    if (fs::exists(pred_path)) {
      for (const auto& r : kitti::load_label_file(pred_path.string())) {
        if (!iequals(r.class_name, class_filter)) continue;
        frame_det.push_back(
            {bev_footprint(kitti::to_box3d(r)), r.bbox, r.score.value_or(0.0)});
      }
    }
    gts.push_back(std::move(frame_gt));
    dets.push_back(std::move(frame_det));
  }
  if (gts.empty()) throw std::runtime_error("no .txt label files in " + gt_dir);

  const auto table = eval::evaluate_ap_table(dets, gts, thresholds, tiers, geom);

  std::ofstream csv(fs::path(flags.out_dir) / "ap_table.csv");
  csv << "tier,iou_thr,ap,num_gt,num_det\n";
  for (const auto& cell : table) {
    char line[160];
    std::snprintf(line, sizeof line, "%s,%.2f,%.17g,%d,%d",
                  kitti::difficulty_name(cell.tier), cell.iou_thr, cell.ap,
                  cell.num_gt, cell.num_det);
    csv << line << '\n';
    std::printf("AP[%-8s iou>=%.2f] = %.4f  (gt %d, det %d)\n",
                kitti::difficulty_name(cell.tier), cell.iou_thr, cell.ap,
                cell.num_gt, cell.num_det);
    char name[64];
    std::snprintf(name, sizeof name, "prcurve_%s_%02d.csv",
                  kitti::difficulty_name(cell.tier),
                  static_cast<int>(std::lround(cell.iou_thr * 100)));
    std::ofstream pr(fs::path(flags.out_dir) / name);
    pr << "recall,precision\n";
    for (size_t i = 0; i < cell.curve.recall.size(); ++i) {
      char row[80];
      std::snprintf(row, sizeof row, "%.17g,%.17g", cell.curve.recall[i],
                    cell.curve.precision[i]);
      pr << row << '\n';
    }
  }
  return 0;
}

int cmd_render_bev(const CommonFlags& flags, const std::string& ckpt,
                   const std::string& dataset_dir, int max_renders) {
  RunConfig cfg = resolve_config(flags);
  cfg.echo(flags.out_dir);
  auto loaded = nn::load_checkpoint(ckpt);
  const synth::Dataset ds = synth::load_dataset(dataset_dir);
  const auto split = train::split_dataset(ds.samples.size());
  const auto& idx = split.val.empty() ? split.train : split.val;

  Rng unused(0);
  const int crop_size = loaded.model.config().crop_size;
  std::vector<BevRect> all_pred, all_gt;
  const int count = std::min<int>(max_renders, static_cast<int>(idx.size()));
  for (int i = 0; i < count; ++i) {
    const synth::Sample& s = ds.samples[idx[static_cast<size_t>(i)]];
    nn::Tensor crops({1, 1, crop_size, crop_size});
    std::copy(s.crop.begin(), s.crop.end(), crops.values.begin());
    nn::Tensor bbox({1, 4}, {s.bbox_norm.x1, s.bbox_norm.y1, s.bbox_norm.x2,
                             s.bbox_norm.y2});
    auto out = loaded.model.forward(crops, bbox, false, unused, true, false);
    const BevRect pred = canonicalize_rect(
        {out.bev.values[0], out.bev.values[1], out.bev.values[2], out.bev.values[3]});
    all_pred.push_back(pred);
    all_gt.push_back(s.bev_rect);
    char name[64];
    std::snprintf(name, sizeof name, "overlay_%06d.ppm", i);
    render::write_image(render::render_overlay({pred}, {s.bev_rect}),
                        (fs::path(flags.out_dir) / name).string(),
                        render::ImageFormat::PPM);
  }
  render::write_image(render::render_overlay(all_pred, all_gt),
                      (fs::path(flags.out_dir) / "overlay_all.ppm").string(),
                      render::ImageFormat::PPM);
  render::write_image(render::grid_to_image(render::rasterize_grid(all_pred)),
                      (fs::path(flags.out_dir) / "grid_pred.pgm").string(),
                      render::ImageFormat::PGM);
  render::write_image(render::grid_to_image(render::rasterize_grid(all_gt)),
                      (fs::path(flags.out_dir) / "grid_gt.pgm").string(),
                      render::ImageFormat::PGM);
  std::printf("rendered %d overlays to %s\n", count, flags.out_dir.c_str());
  return 0;
}

int cmd_inspect_labels(const std::string& kitti_dir, const std::string& out_dir) {
  std::map<std::string, std::array<int, 4>> hist;
  int files = 0;
  for (const auto& path : sorted_files(kitti_dir, ".txt")) {
    ++files;
    for (const auto& r : kitti::load_label_file(path.string())) {
      hist[r.class_name][static_cast<int>(kitti::classify_difficulty(r))]++;
    }
  }
  if (files == 0) throw std::runtime_error("no .txt label files in " + kitti_dir);
  std::printf("%d label files\n", files);
  std::printf("%-16s %8s %8s %8s %8s\n", "class", "easy", "moderate", "hard",
              "ignored");
  for (const auto& [cls, counts] : hist) {
    std::printf("%-16s %8d %8d %8d %8d\n", cls.c_str(), counts[0], counts[1],
                counts[2], counts[3]);
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "difficulty_hist.csv");
    csv << "class,easy,moderate,hard,ignored\n";
    for (const auto& [cls, counts] : hist) {
      csv << cls << ',' << counts[0] << ',' << counts[1] << ',' << counts[2] << ','
          << counts[3] << '\n';
    }
  }
  return 0;
}

int cmd_grad_check(std::uint64_t seed) {
  nn::BranchConfig bcfg;
  nn::Model model(bcfg);
  Rng rng(seed);
  model.init_params(rng);
  const int s = bcfg.crop_size;
  nn::Tensor crops({2, 1, s, s});
  for (double& v : crops.values) v = rng.uniform01();
  nn::Tensor bbox({2, 4});
  for (double& v : bbox.values) v = rng.uniform(-1.0, 1.0);
  nn::Tensor bev({2, 4}), target({2, bcfg.out_dim});
  for (double& v : bev.values) v = rng.uniform(-0.5, 0.5);
  for (double& v : target.values) v = rng.uniform(-0.5, 0.5);
  const auto res = nn::grad_check_model(model, crops, bbox, bev, target, 1e-5, 400,
                                        seed + 1);
  std::printf("composite gradient check: %lld params, max relative error %.3g\n",
              static_cast<long long>(res.checked), res.max_rel_err);
  if (res.max_rel_err > 1e-4) {
    std::fprintf(stderr, "gradient check FAILED (tolerance 1e-4)\n");
    return 2;
  }
  std::printf("OK\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monocular BEV 3D vehicle localization pipeline"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::optional<int> n_flag, crop_flag, epochs_flag;
  std::optional<double> lambda_flag;
  int stage = 1;
  int max_renders = 32;
  bool no_augment = false;
  std::string dataset_dir, ckpt, pred_dir, gt_dir, kitti_dir;
  std::string tier = "all", geom = "bev", class_filter = "Car";
  std::vector<double> ious;
  std::uint64_t gc_seed = 1;

  auto add_common = [&](CLI::App* cmd, bool need_out) {
    cmd->add_option("--config", flags.config_path, "flat JSON config file");
    cmd->add_option("--seed", flags.seed, "master RNG seed");
    auto* out = cmd->add_option("--out", flags.out_dir, "output directory");
    if (need_out) out->required();
  };

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen, true);
  gen->add_option("--n", n_flag, "number of samples");
  gen->add_option("--crop-size", crop_flag, "crop resolution");

  auto* tr = app.add_subcommand("train", "run one training stage");
  add_common(tr, true);
  tr->add_option("--stage", stage, "1 or 2")->required()->check(CLI::Range(1, 2));
  tr->add_option("--dataset", dataset_dir, "generated dataset directory")->required();
  tr->add_option("--ckpt", ckpt, "stage-1 checkpoint (stage 2 only)");
  tr->add_option("--epochs", epochs_flag, "override epoch count for this stage");
  tr->add_option("--lambda-depth", lambda_flag, "depth penalty weight");
  tr->add_flag("--no-augment", no_augment, "disable training augmentation");

  auto* ev = app.add_subcommand("eval", "KITTI-protocol AP evaluation");
  add_common(ev, true);
  ev->add_option("--pred", pred_dir, "directory of prediction label files")->required();
  ev->add_option("--gt", gt_dir, "directory of ground-truth label files")->required();
  ev->add_option("--iou", ious, "IoU threshold (repeatable)");
  ev->add_option("--tier", tier, "easy|moderate|hard|all");
  ev->add_option("--geom", geom, "bev|2d matching geometry");
  ev->add_option("--class", class_filter, "class token to evaluate");

  auto* rb = app.add_subcommand("render-bev", "render BEV overlays from a checkpoint");
  add_common(rb, true);
  rb->add_option("--ckpt", ckpt, "model checkpoint")->required();
  rb->add_option("--dataset", dataset_dir, "generated dataset directory")->required();
  rb->add_option("--n", max_renders, "max per-sample overlays");

  auto* il = app.add_subcommand("inspect-labels", "parse labels, difficulty histogram");
  il->add_option("--kitti-dir", kitti_dir, "directory of KITTI label files")->required();
  il->add_option("--out", flags.out_dir, "optional output directory");

  auto* gc = app.add_subcommand("grad-check", "finite-difference gradient check");
  gc->add_option("--seed", gc_seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(flags, n_flag, crop_flag);
    if (tr->parsed()) {
      return cmd_train(flags, stage, dataset_dir, ckpt, lambda_flag, epochs_flag,
                       no_augment);
    }
    if (ev->parsed()) {
      return cmd_eval(flags, pred_dir, gt_dir, ious, tier, geom, class_filter);
    }
    if (rb->parsed()) return cmd_render_bev(flags, ckpt, dataset_dir, max_renders);
    if (il->parsed()) return cmd_inspect_labels(kitti_dir, flags.out_dir);
    if (gc->parsed()) return cmd_grad_check(gc_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
