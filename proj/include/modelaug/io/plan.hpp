#pragma once

// JSON serialization of staged transfer plans. Schema (version 1):
// {
//   "format": "modelaug-plan", "version": 1,
//   "stages": [{
//     "name": str, "role": "intermediate"|"target", "epochs": int,
//     "learning_rate": num,
//     "lr_multipliers": {group: num, ...},            // optional
//     "trainable": ["new_input"|"trunk"|"output_head", ...],
//     "augment": { "rotation_deg": num, "horizontal_flip": bool,
//                  "crop_fraction": num, "scale_min": num, "scale_max": num,
//                  "translate_px": int }              // optional, keys optional
//   }, ...]
// }

#include <filesystem>
#include <string>

#include <json.hpp>

#include "modelaug/errors.hpp"
#include "modelaug/io/text.hpp"
#include "modelaug/trainer.hpp"

namespace modelaug::io {

inline nlohmann::json plan_to_json(const StagedTransferPlan& plan) {
  nlohmann::json stages = nlohmann::json::array();
  for (const TrainingStage& s : plan.stages) {
    nlohmann::json js;
    js["name"] = s.name;
    js["role"] = to_string(s.role);
    js["epochs"] = s.epochs;
    js["learning_rate"] = s.learning_rate;
    nlohmann::json trainable = nlohmann::json::array();
    for (ParamGroup g : s.trainable) trainable.push_back(to_string(g));
    js["trainable"] = trainable;
    if (!s.lr_multipliers.empty()) {
      nlohmann::json mult;
      for (const auto& [g, m] : s.lr_multipliers) mult[to_string(g)] = m;
      js["lr_multipliers"] = mult;
    }
    if (s.augment.any()) {
      nlohmann::json aug;
      if (s.augment.rotation_deg) aug["rotation_deg"] = *s.augment.rotation_deg;
      if (s.augment.horizontal_flip) aug["horizontal_flip"] = true;
      if (s.augment.crop_fraction) aug["crop_fraction"] = *s.augment.crop_fraction;
      if (s.augment.scale_range) {
        aug["scale_min"] = s.augment.scale_range->first;
        aug["scale_max"] = s.augment.scale_range->second;
      }
      if (s.augment.translate_px) aug["translate_px"] = *s.augment.translate_px;
      js["augment"] = aug;
    }
    stages.push_back(js);
  }
  nlohmann::json root;
  root["format"] = "modelaug-plan";
  root["version"] = 1;
  root["stages"] = stages;
  return root;
}

inline std::string plan_to_string(const StagedTransferPlan& plan) {
  return plan_to_json(plan).dump(2) + "\n";
}

inline StagedTransferPlan plan_from_json(const nlohmann::json& root) {
  try {
    if (root.at("format").get<std::string>() != "modelaug-plan")
      throw io_error("plan: unknown format tag");
    if (root.at("version").get<int>() != 1) throw io_error("plan: unsupported version");
    StagedTransferPlan plan;
    for (const nlohmann::json& js : root.at("stages")) {
      TrainingStage s;
      s.name = js.at("name").get<std::string>();
      s.role = dataset_role_from_string(js.at("role").get<std::string>());
      s.epochs = js.at("epochs").get<std::size_t>();
      s.learning_rate = js.at("learning_rate").get<double>();
      for (const nlohmann::json& g : js.at("trainable"))
        s.trainable.push_back(param_group_from_string(g.get<std::string>()));
      if (js.contains("lr_multipliers"))
        for (const auto& [key, value] : js.at("lr_multipliers").items())
          s.lr_multipliers[param_group_from_string(key)] = value.get<double>();
      if (js.contains("augment")) {
        const nlohmann::json& aug = js.at("augment");
        if (aug.contains("rotation_deg")) s.augment.rotation_deg = aug.at("rotation_deg").get<double>();
        if (aug.contains("horizontal_flip"))
          s.augment.horizontal_flip = aug.at("horizontal_flip").get<bool>();
        if (aug.contains("crop_fraction")) s.augment.crop_fraction = aug.at("crop_fraction").get<double>();
        if (aug.contains("scale_min") != aug.contains("scale_max"))
          throw io_error("plan: scale_min and scale_max must appear together");
        if (aug.contains("scale_min"))
          s.augment.scale_range = {aug.at("scale_min").get<double>(), aug.at("scale_max").get<double>()};
        if (aug.contains("translate_px")) s.augment.translate_px = aug.at("translate_px").get<int>();
      }
      plan.stages.push_back(std::move(s));
    }
    validate_plan(plan);
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("plan: ") + e.what());
  } catch (const invalid_input& e) {
    throw io_error(std::string("plan: ") + e.what());
  }
}

inline StagedTransferPlan read_plan_file(const std::filesystem::path& path) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw io_error(path.string() + ": " + e.what());
  }
  return plan_from_json(root);
}

inline void write_plan_file(const std::filesystem::path& path, const StagedTransferPlan& plan) {
  atomic_write(path, plan_to_string(plan));
}

}  // namespace modelaug::io
