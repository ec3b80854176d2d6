#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "aerodet/dataset.hpp"
#include "aerodet/grid.hpp"
#include "aerodet/label_tree.hpp"

namespace aerodet {

struct Size2 {
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const Size2&, const Size2&) = default;
};

struct HeatmapConfig {
  /// Output stride: one heatmap cell per R x R input pixels.
  int R = 4;
  /// Keypoint radius rule parameter (minimum IoU of a corner-perturbed box).
  double gaussian_min_overlap = 0.7;

  void validate() const;
};

/// Dense training targets for one image. The heatmap has ceil(W/R) x ceil(H/R)
/// cells and one channel per base class followed by one per stacked class.
/// Per-object vectors are parallel and indexed by object.
struct DenseTargetSet {
  std::string image_id;
  int R = 4;
  ImageDims image_dims;
  DenseGrid heatmap;
  std::vector<Size2> sizes;
  std::vector<Point2> offsets;
  std::vector<Cell> peak_cells;
  std::vector<int> object_base_class;
  std::size_t n_objects = 0;

  /// Input extent after padding up to a multiple of R.
  int padded_width() const noexcept { return heatmap.width() * R; }
  int padded_height() const noexcept { return heatmap.height() * R; }

  friend bool operator==(const DenseTargetSet&, const DenseTargetSet&) = default;
};

/// Radius (in cells) such that a box with both corners displaced by up to the
/// radius still has IoU >= min_overlap with the original. Returns 0 at
/// min_overlap == 1; strictly decreasing in min_overlap and linear in box scale.
double gaussian_radius(double box_w, double box_h, double min_overlap);

/// Integer kernel half-width used when splatting: floor(radius), at least 1.
int kernel_radius(double radius);

/// Unnormalized Gaussian weight at offset (dx, dy) for a kernel of half-width
/// `radius`; sigma = (2 * radius + 1) / 6 and the center weight is exactly 1.
double gaussian_weight(int dx, int dy, int radius);

/// Writes a kernel centered at `center` into `channel`, keeping the elementwise max
/// with existing values. Cells beyond `radius` or off-grid are untouched.
void draw_gaussian(DenseGrid& grid, int channel, Cell center, int radius);

/// Splat every non-ignored object into its base-class channel and its stacked
/// parent channel. Throws DataError when an object center lies outside the image
/// or its category is not a base class of `tree`.
DenseTargetSet splat_targets(const ImageRecord& record, const LabelTree& tree,
                             const HeatmapConfig& cfg);

/// Raw float32 dump, row-major channel-last.
void write_grid_dump(const DenseGrid& grid, const std::filesystem::path& path);
DenseGrid read_grid_dump(const std::filesystem::path& path, int width, int height, int channels);

/// Writes `<stem>.json` sidecar plus `<stem>.bin` heatmap. `json_path` must end in .json.
void save_targets(const DenseTargetSet& targets, const std::filesystem::path& json_path);
DenseTargetSet load_targets(const std::filesystem::path& json_path);

}  // namespace aerodet
