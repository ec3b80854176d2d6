#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "aerodet/dataset.hpp"
#include "aerodet/grid.hpp"
#include "aerodet/heatmap.hpp"
#include "aerodet/label_tree.hpp"

namespace aerodet {

struct Peak {
  Cell cell;
  int channel = 0;
  double score = 0.0;

  friend bool operator==(const Peak&, const Peak&) = default;
};

/// Cells whose value equals the max of their in-bounds 3x3 neighborhood within the
/// same channel, ranked by score (ties in row-major, channel-last scan order),
/// truncated to k.
std::vector<Peak> extract_peaks(const DenseGrid& heatmap, std::size_t k);

/// Dense 2-channel size (w, h in pixels) and offset maps at heatmap resolution.
struct RegressionMaps {
  DenseGrid size;
  DenseGrid offset;

  std::vector<Size2> gather_sizes(const std::vector<Peak>& peaks) const;
  std::vector<Point2> gather_offsets(const std::vector<Peak>& peaks) const;
};

/// Maps holding each object's size and offset at its peak cell, zero elsewhere.
RegressionMaps regression_maps_from_targets(const DenseTargetSet& targets);

/// center = (p + offset) * R, box = center -/+ size / 2, score = peak value. Peaks on
/// stacked channels and boxes with non-positive size are dropped. `sizes` and
/// `offsets` are parallel to `peaks`.
std::vector<Detection> decode_boxes(const std::vector<Peak>& peaks, const std::vector<Size2>& sizes,
                                    const std::vector<Point2>& offsets, int R,
                                    const LabelTree& tree);

struct ChipOrigin {
  std::string image_id;
  Point2 offset;
  ImageDims chip;
  /// Extent of the parent image.
  ImageDims image;

  BBox window() const noexcept { return {offset.x, offset.y, chip.width, chip.height}; }
};

struct ChipResult {
  ChipOrigin origin;
  std::vector<Detection> detections;
};

/// Translate chip-local detections to image coordinates, clip to the image, and
/// drop boxes with nothing left.
std::vector<Detection> chip_to_global(const std::vector<Detection>& dets, const ChipOrigin& origin);

/// Per-class greedy NMS by descending score (ties keep input order). A detection is
/// suppressed when its IoU with a kept same-class box exceeds `iou_thresh`.
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_thresh);

/// Interior chip boundary segment: x = coord for vertical edges spanning y in
/// [lo, hi], y = coord for horizontal edges spanning x in [lo, hi].
struct ChipEdge {
  bool vertical = true;
  double coord = 0.0;
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const ChipEdge&, const ChipEdge&) = default;
};

/// The four sides of every chip, minus sides lying on the image border.
std::vector<ChipEdge> chip_edges(const std::vector<ChipOrigin>& chips, const ImageDims& image);

struct FuseConfig {
  std::size_t peaks_per_chip = 100;
  std::size_t max_detections = 500;
  double nms_iou = 0.5;
  /// Distance (pixels) within which a box side counts as lying on a chip edge.
  double boundary_delta = 2.0;
  /// Minimum overlap of the two parts along the edge, relative to the shorter part.
  double boundary_overlap = 0.5;

  void validate() const;
};

/// Merge same-class detections split by a chip edge into their union box (score =
/// max of the parts), repeating until no pair qualifies. A pair qualifies at edge e
/// when one box has a side on e (within boundary_delta) with its body on one side,
/// the other box starts at or before e (within boundary_delta) and extends beyond
/// both e and the first box's side, and their extents along e overlap by at least
/// boundary_overlap of the shorter.
std::vector<Detection> merge_split_boxes(const std::vector<Detection>& dets,
                                         const std::vector<ChipEdge>& edges, const FuseConfig& cfg);

/// Chip detections (chip-local, mapped through chip_to_global) plus whole-image
/// detections -> split-box merging at interior chip edges -> NMS -> top
/// `max_detections` by score, clipped to the image.
std::vector<Detection> fuse(const std::vector<ChipResult>& chips,
                            const std::vector<Detection>& global_dets, const ImageDims& image,
                            const FuseConfig& cfg);

/// Detections keyed by image. JSON: {"images": [{"image_id", "detections":
/// [{"bbox": [x, y, w, h], "category", "score"}]}]}; a flat COCO results array
/// ([{image_id, bbox, category_id, score}]) is accepted on input.
struct ImageDetections {
  std::string image_id;
  std::vector<Detection> detections;

  friend bool operator==(const ImageDetections&, const ImageDetections&) = default;
};

std::string detections_to_json(const std::vector<ImageDetections>& images,
                               const std::string& meta_json = {});
std::vector<ImageDetections> detections_from_json(std::string_view text);
std::vector<ImageDetections> load_detections(const std::filesystem::path& path);

/// Chip-level detector output for `fuse`: {"images": [{"image_id", "width", "height",
/// "chips": [{"x", "y", "w", "h", "detections": [...]}], "global": [...]}]}. Chip
/// detections are in chip-local coordinates.
struct ImageChipResults {
  std::string image_id;
  ImageDims dims;
  std::vector<ChipResult> chips;
  std::vector<Detection> global_dets;
};

std::string chip_results_to_json(const std::vector<ImageChipResults>& images,
                                 const std::string& meta_json = {});
std::vector<ImageChipResults> chip_results_from_json(std::string_view text);
std::vector<ImageChipResults> load_chip_results(const std::filesystem::path& path);

std::vector<Detection> fuse_image(const ImageChipResults& results, const FuseConfig& cfg);

}  // namespace aerodet
