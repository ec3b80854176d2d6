#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aerodet/dataset.hpp"
#include "aerodet/decode_fuse.hpp"

namespace aerodet {

struct EvalConfig {
  std::vector<double> iou_thresholds = default_thresholds();
  int recall_points = 101;
  std::size_t per_image_cap = 500;

  /// 0.50, 0.55, ..., 0.95.
  static std::vector<double> default_thresholds();
  void validate() const;
};

enum class MatchKind { kTruePositive, kFalsePositive, kIgnored };

struct Match {
  std::size_t det_index = 0;
  double score = 0.0;
  MatchKind kind = MatchKind::kFalsePositive;
  /// Matched ground truth (non-ignored GT for TPs, the ignore region for kIgnored).
  std::optional<std::size_t> gt_index;
};

/// Detection ranking used everywhere in evaluation: score descending, then bbox
/// lexicographic (x, y, w, h), then category.
bool detection_rank_less(const Detection& a, const Detection& b) noexcept;

/// Greedy matching for one image and one category, processing detections in
/// detection_rank_less order. Each detection takes the unmatched non-ignored GT with
/// the highest IoU >= iou_thresh. Otherwise, if at least `iou_thresh` of the
/// detection lies inside an ignore-flagged GT, it is kIgnored. Returned in
/// processing order.
std::vector<Match> match_detections(const std::vector<Detection>& dets,
                                    const std::vector<ObjectAnnotation>& gts, double iou_thresh);

/// One scored TP/FP outcome pooled across images.
struct RankedOutcome {
  double score = 0.0;
  bool true_positive = false;
  /// Stable secondary keys for equal scores.
  std::size_t image_index = 0;
  BBox bbox;
};

/// Interpolated AP: precision made monotone from the right, sampled at
/// `recall_points` evenly spaced recalls in [0, 1]. nullopt when num_gt == 0.
std::optional<double> average_precision(std::vector<RankedOutcome> outcomes, std::size_t num_gt,
                                        int recall_points);

struct CategoryResult {
  int category = 0;
  std::size_t num_gt = 0;
  /// AP per configured IoU threshold.
  std::vector<double> per_threshold;
  double ap = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
};

struct EvalSummary {
  double ap = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
  std::vector<double> thresholds;
  /// Mean over categories at each threshold.
  std::vector<double> per_threshold;
  std::vector<CategoryResult> per_category;
};

/// COCO-style summary. Categories without non-ignored ground truth are excluded.
/// Detections for images absent from `gts` raise DataError; so does a ground truth
/// set without any non-ignored annotation.
EvalSummary ap_summary(const std::vector<ImageDetections>& dets, const std::vector<ImageRecord>& gts,
                       const EvalConfig& cfg, unsigned jobs = 1);

std::string summary_to_json(const EvalSummary& summary, const LabelTree* tree = nullptr,
                            const std::string& meta_json = {});
std::string summary_to_csv(const EvalSummary& summary, const LabelTree* tree = nullptr);

}  // namespace aerodet
