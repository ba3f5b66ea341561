#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "mal/crf.hpp"
#include "mal/roi.hpp"
#include "mal/training.hpp"

namespace mal {

/// Everything one labelling run depends on. Serialized as flat JSON;
/// every key is written by `config init` and unknown keys are rejected.
struct RunConfig {
  CrfParams crf;
  LossWeights weights;
  ExpansionParams expansion;
  int crop_width = 512;
  int crop_height = 512;
  LogitConfig logit;
  std::uint64_t seed = 0;
  /// Worker pool size for per-box work; MAL_THREADS overrides it.
  int threads = 1;
  std::string output_dir = "mal_out";

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

nlohmann::ordered_json to_json(const RunConfig& cfg);
/// Missing keys keep their defaults. Throws ConfigError on unknown keys,
/// wrong types, or invalid values.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace mal
