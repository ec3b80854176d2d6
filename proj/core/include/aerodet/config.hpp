#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "aerodet/dataset.hpp"
#include "aerodet/decode_fuse.hpp"
#include "aerodet/eval.hpp"
#include "aerodet/heatmap.hpp"
#include "aerodet/label_tree.hpp"
#include "aerodet/loss.hpp"
#include "aerodet/mrm.hpp"
#include "aerodet/nmm.hpp"
#include "aerodet/refine.hpp"
#include "aerodet/synth.hpp"

namespace aerodet {

struct DatasetConfig {
  /// "visdrone", "coco", or "auto" (directories are visdrone, files coco).
  std::string format = "auto";
  std::string path;
  std::string images_dir;
  std::string sizes_file;
  /// "visdrone", "uavdt", or a label tree JSON file.
  std::string label_tree = "visdrone";
  bool ignore_others = true;
};

struct PipelineConfig {
  NmmConfig nmm;
  RefineConfig refine;
  HeatmapConfig heatmap;
  LossConfig loss;
  FuseConfig fuse;
  EvalConfig eval;
  MrmConfig mrm;
  RarityRule rarity;
  SceneConfig scene;
  OracleConfig oracle;
  DatasetConfig dataset;
  std::uint64_t seed = 0;
  /// 0 = all available cores.
  unsigned jobs = 0;

  void validate() const;
};

/// Sections may be partial; missing fields keep their defaults. Unknown keys and
/// wrongly typed values raise ConfigError.
PipelineConfig parse_pipeline_config(std::string_view text);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Every field, in a form parse_pipeline_config accepts.
std::string pipeline_config_to_json(const PipelineConfig& cfg);

LabelTree resolve_label_tree(const DatasetConfig& cfg);
std::vector<ImageRecord> load_dataset(const DatasetConfig& cfg, const LabelTree& tree);

}  // namespace aerodet
