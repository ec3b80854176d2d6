#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aerodet/dataset.hpp"
#include "aerodet/decode_fuse.hpp"
#include "aerodet/image_io.hpp"
#include "aerodet/nmm.hpp"

namespace aerodet {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct SceneConfig {
  ImageDims dims{1920.0, 1080.0};
  int n_dense_clusters = 3;
  IntRange objects_per_cluster{8, 24};
  /// Side lengths of small objects, pixels.
  Range small_size{8.0, 32.0};
  /// Standard deviation of object centers around a cluster center, pixels.
  double cluster_spread = 60.0;
  int n_large = 2;
  Range large_size{120.0, 240.0};
  /// Category id -> sampling weight.
  std::map<int, double> class_distribution{{1, 1.0}, {2, 1.0}, {3, 1.0}, {4, 1.0}, {5, 1.0},
                                           {6, 1.0}, {7, 1.0}, {8, 1.0}, {9, 1.0}, {10, 1.0}};
  /// Placement attempts allowed per object before giving up.
  int max_attempts = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Places Gaussian-spread groups of small boxes plus sparse large boxes, with no two
/// boxes intersecting. Throws DataError when an object cannot be placed.
ImageRecord generate_scene(const SceneConfig& cfg, const std::string& image_id = "scene");

/// Colored rectangles on a dark background, one color per category.
Image render_scene(const ImageRecord& record);

enum class ScoreModel { kJitter, kConstant };

struct OracleConfig {
  double center_jitter_sd = 0.0;
  /// Relative standard deviation applied to width and height.
  double size_jitter_sd = 0.0;
  double miss_rate = 0.0;
  /// Expected false positives over a whole image; chips get an area share.
  double fp_rate_per_image = 0.0;
  Range fp_size{8.0, 48.0};
  ScoreModel score_model = ScoreModel::kJitter;
  std::uint64_t seed = 0;

  void validate() const;
  bool zero_noise() const noexcept;
};

/// Detections of the non-ignored annotations intersecting `chip`, jittered, dropped
/// with miss_rate, cropped to the chip and expressed in chip-local coordinates, plus
/// Poisson false positives. Deterministic in (record, chip, cfg).
std::vector<Detection> oracle_detect(const ImageRecord& record, const BBox& chip, const OracleConfig& cfg);

/// True when some annotation overlaps a window without lying fully inside it.
bool has_straddlers(const ImageRecord& record, const std::vector<BBox>& windows);

/// Chip-level input for fuse: NMM windows of the record as chips, the oracle run on
/// each chip, and a whole-image oracle pass restricted to objects too large for
/// clustering.
ImageChipResults oracle_chip_results(const ImageRecord& record, const NmmConfig& nmm_cfg,
                                     const OracleConfig& oracle_cfg);

}  // namespace aerodet
