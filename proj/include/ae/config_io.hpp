#pragma once

// JSON forms of the run configs. Parsing starts from the defaults, rejects
// unknown keys and wrong types (Config errors), then validates. The *_json
// functions echo every field, defaults included.

#include <filesystem>

#include "ae/neuralnet.hpp"
#include "ae/synthgen.hpp"
#include "ae/train.hpp"
#include "json.hpp"

namespace ae::config {

synth::ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_json(const synth::ScenarioConfig& c);

nn::ModelConfig model_from_json(const nlohmann::json& j);
nlohmann::json model_json(const nn::ModelConfig& c);

nn::TrainConfig train_from_json(const nlohmann::json& j);
nlohmann::json train_json(const nn::TrainConfig& c);

// Io error if unreadable, Config error if not valid JSON.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace ae::config
