#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aerodet/geometry.hpp"
#include "aerodet/label_tree.hpp"

namespace aerodet {

struct ObjectAnnotation {
  BBox bbox;
  int category = 0;
  std::optional<int> truncation;
  std::optional<int> occlusion;
  /// Excluded from training targets; unpenalized region for evaluation.
  bool ignore = false;

  friend bool operator==(const ObjectAnnotation&, const ObjectAnnotation&) = default;
};

struct ImageRecord {
  std::string image_id;
  ImageDims dims;
  std::optional<std::string> path;
  std::vector<ObjectAnnotation> annotations;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Detection {
  BBox bbox;
  int category = 0;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct VisdroneOptions {
  /// Directory holding the images; dimensions are read from image headers.
  std::optional<std::filesystem::path> images_dir;
  /// JSON object {image_id: [width, height]}; takes precedence over image headers.
  std::optional<std::filesystem::path> sizes_file;
};

/// Parses one `left,top,width,height,score,category,truncation,occlusion` line.
/// Returns nullopt for zero-area boxes. Throws DataError on malformed input.
std::optional<ObjectAnnotation> parse_visdrone_line(std::string_view line, const LabelTree& tree);

/// Loads every `*.txt` annotation file (sorted by name) from `dir/annotations` when
/// that exists, otherwise from `dir`. Images default to `dir/images` when present.
std::vector<ImageRecord> load_visdrone(const std::filesystem::path& dir, const LabelTree& tree,
                                       const VisdroneOptions& options = {});

/// Single visDrone annotation file for an image of known size.
ImageRecord load_visdrone_file(const std::filesystem::path& file, const ImageDims& dims,
                               const LabelTree& tree);

std::vector<ImageRecord> load_coco(const std::filesystem::path& file, const LabelTree& tree);
std::vector<ImageRecord> parse_coco(std::string_view text, const LabelTree& tree);
std::string to_coco(const std::vector<ImageRecord>& records, const LabelTree& tree);
void save_coco(const std::vector<ImageRecord>& records, const LabelTree& tree,
               const std::filesystem::path& file);

/// Clip annotations to the image and drop those left with zero area.
void clamp_annotations(ImageRecord& record);

}  // namespace aerodet
