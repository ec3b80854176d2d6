#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aerodet/dataset.hpp"
#include "aerodet/geometry.hpp"

namespace aerodet {

/// Fixed-size chip window plus the annotation indices merged into it.
struct Cluster {
  BBox window;
  std::vector<std::size_t> members;
  std::size_t seed = 0;

  friend bool operator==(const Cluster&, const Cluster&) = default;
};

struct NmmConfig {
  double w_b = 512.0;
  double h_b = 512.0;
  /// A box joins a cluster when more than `tau` of its area lies in the window.
  double tau = 0.8;
  /// Boxes with max(w, h) <= small_max_side are clustered; larger ones are left
  /// to the whole-image pass.
  double small_max_side = 96.0;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// Indices ordered top-to-bottom, then left-to-right, then by original index.
std::vector<std::size_t> sort_boxes(const std::vector<ObjectAnnotation>& annotations);

bool is_small(const ObjectAnnotation& ann, const NmmConfig& cfg) noexcept;

/// Greedy single-pass merge of the small, non-ignored annotations into w_b x h_b
/// windows. Each unvisited box (in sort_boxes order) seeds a window recentered on
/// its center; every later unvisited box with coverage > tau joins it. Member and
/// seed indices refer to `annotations`.
std::vector<Cluster> nmm(const std::vector<ObjectAnnotation>& annotations, const ImageDims& dims,
                         const NmmConfig& cfg);

struct ImageClusters {
  std::string image_id;
  ImageDims dims;
  std::vector<Cluster> clusters;
  /// Candidate confidence, present once clusters come from a predictor.
  std::vector<double> scores;

  friend bool operator==(const ImageClusters&, const ImageClusters&) = default;
};

struct ClusterDataset {
  NmmConfig config;
  std::vector<ImageClusters> images;

  /// Number of images per cluster count.
  std::map<std::size_t, std::size_t> count_histogram() const;
};

/// Runs nmm over every record using up to `jobs` worker threads; output follows
/// the input record order.
ClusterDataset generate_cluster_ground_truth(const std::vector<ImageRecord>& records,
                                             const NmmConfig& cfg, unsigned jobs = 1);

/// Cluster JSON: {"images": [{image_id, width, height, clusters: [{cx, cy, w, h,
/// member_indices, seed_index[, score]}]}]}. `meta` is embedded verbatim when non-empty.
std::string cluster_dataset_to_json(const std::vector<ImageClusters>& images,
                                    const std::string& meta_json = {});
std::vector<ImageClusters> cluster_dataset_from_json(std::string_view text);
std::vector<ImageClusters> load_cluster_json(const std::filesystem::path& path);

}  // namespace aerodet
