#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "monobev/model.hpp"
#include "monobev/synthdata.hpp"
#include "monobev/training.hpp"

namespace monobev {

// One flat key space covering generation, model, and training. Defaults
// live in the structs; a config file overrides defaults and command-line
// flags override the file. The fully resolved view is echoed into the
// output directory of every run.
struct RunConfig {
  nn::BranchConfig branch;
  train::TrainConfig trainer;
  synth::SynthConfig synth;
  std::uint64_t seed = 0;

  void set_seed(std::uint64_t s) {
    seed = s;
    trainer.seed = s;
    synth.seed = s;
  }
  void set_crop_size(int s) {
    branch.crop_size = s;
    synth.crop_size = s;
  }

  nlohmann::json to_flat_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["crop_size"] = branch.crop_size;
    j["n"] = synth.n;
    j["fx"] = synth.fx;
    j["fy"] = synth.fy;
    j["image_w"] = synth.image_w;
    j["image_h"] = synth.image_h;
    j["min_objects"] = synth.min_objects;
    j["max_objects"] = synth.max_objects;
    j["max_bev_overlap"] = synth.max_bev_overlap;
    j["feature_dim"] = branch.feature_dim;
    j["br2_widths"] = branch.br2_widths;
    j["br3_widths"] = branch.br3_widths;
    j["br4_widths"] = branch.br4_widths;
    j["out_dim"] = branch.out_dim;
    j["dropout_p"] = branch.dropout_p;
    j["backbone_trainable"] = branch.backbone_trainable;
    j["epochs_stage1"] = trainer.epochs_stage1;
    j["epochs_stage2"] = trainer.epochs_stage2;
    j["batch_size"] = trainer.batch_size;
    j["lr0"] = trainer.lr0;
    j["decay_period"] = trainer.decay_period;
    j["momentum"] = trainer.momentum;
    j["lambda_depth"] = trainer.lambda_depth;
    j["eval_every"] = trainer.eval_every;
    j["augment"] = trainer.augment;
    return j;
  }

  void apply_flat_json(const nlohmann::json& j) {
    bool saw_br4 = false;
    for (const auto& [key, value] : j.items()) {
      if (key == "seed") set_seed(value.get<std::uint64_t>());
      else if (key == "crop_size") set_crop_size(value.get<int>());
      else if (key == "n") synth.n = value.get<int>();
      else if (key == "fx") synth.fx = value.get<double>();
      else if (key == "fy") synth.fy = value.get<double>();
      else if (key == "image_w") synth.image_w = value.get<int>();
      else if (key == "image_h") synth.image_h = value.get<int>();
      else if (key == "min_objects") synth.min_objects = value.get<int>();
      else if (key == "max_objects") synth.max_objects = value.get<int>();
      else if (key == "max_bev_overlap") synth.max_bev_overlap = value.get<double>();
      else if (key == "feature_dim") branch.feature_dim = value.get<int>();
      else if (key == "br2_widths") branch.br2_widths = value.get<std::vector<int>>();
      else if (key == "br3_widths") branch.br3_widths = value.get<std::vector<int>>();
      else if (key == "br4_widths") {
        branch.br4_widths = value.get<std::vector<int>>();
        saw_br4 = true;
      } else if (key == "out_dim") branch.out_dim = value.get<int>();
      else if (key == "dropout_p") branch.dropout_p = value.get<double>();
      else if (key == "backbone_trainable") branch.backbone_trainable = value.get<bool>();
      else if (key == "epochs_stage1") trainer.epochs_stage1 = value.get<int>();
      else if (key == "epochs_stage2") trainer.epochs_stage2 = value.get<int>();
      else if (key == "batch_size") trainer.batch_size = value.get<int>();
      else if (key == "lr0") trainer.lr0 = value.get<double>();
      else if (key == "decay_period") trainer.decay_period = value.get<int>();
      else if (key == "momentum") trainer.momentum = value.get<double>();
      else if (key == "lambda_depth") trainer.lambda_depth = value.get<double>();
      else if (key == "eval_every") trainer.eval_every = value.get<int>();
      else if (key == "augment") trainer.augment = value.get<bool>();
      else throw std::runtime_error("unknown config key: " + key);
    }
    // A changed out_dim keeps the default head widths usable.
    if (!saw_br4 && branch.br4_widths.back() != branch.out_dim) {
      branch.br4_widths.back() = branch.out_dim;
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    apply_flat_json(nlohmann::json::parse(in));
  }

  void echo(const std::string& out_dir) const {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(std::filesystem::path(out_dir) / "resolved_config.json");
    out << to_flat_json().dump(2) << '\n';
  }
};

}  // namespace monobev
