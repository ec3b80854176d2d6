#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aerodet/dataset.hpp"
#include "aerodet/heatmap.hpp"
#include "aerodet/image_io.hpp"
#include "aerodet/label_tree.hpp"

namespace aerodet {

/// Binary paste-allowed grid at image resolution (1 = allowed, e.g. road).
class MaskRaster {
 public:
  MaskRaster() = default;
  MaskRaster(int width, int height, bool allowed = false);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  ImageDims dims() const noexcept { return {double(width_), double(height_)}; }

  bool allowed(int x, int y) const noexcept { return cells_[index(x, y)] != 0; }
  void set(int x, int y, bool allowed);
  /// Marks every pixel whose center lies inside `box`.
  void fill(const BBox& box, bool allowed);

  /// Allowed pixels inside the integer rectangle [x, x+w) x [y, y+h) (clipped).
  std::size_t count_allowed(int x, int y, int w, int h) const;

  friend bool operator==(const MaskRaster&, const MaskRaster&) = default;

 private:
  std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width_ + x; }
  void rebuild_integral() const;

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> cells_;
  mutable std::vector<std::uint32_t> integral_;
  mutable bool integral_dirty_ = true;
};

/// Any nonzero sample (in any channel) marks the pixel allowed.
MaskRaster mask_from_image(const Image& image);
MaskRaster read_mask(const std::filesystem::path& path);
void write_mask(const MaskRaster& mask, const std::filesystem::path& path);

/// Add-on ground-truth mask: allow the footprint of every non-ignored annotation.
void add_annotation_footprints(MaskRaster& mask, const ImageRecord& record);

struct PoolEntry {
  std::string crop_id;
  int category = 0;
  Size2 dims;
  std::string source_image;
  BBox source_box;
  std::optional<Image> pixels;
  /// Nonzero where the crop's pixels belong to the object.
  std::optional<Image> alpha;
};

struct RarityRule {
  enum class Kind { kBelowMedian, kExplicit };
  Kind kind = Kind::kBelowMedian;
  /// Used by kExplicit, and added to the below-median selection otherwise.
  std::set<int> categories;
};

/// Categories (among those with at least one instance) whose count is strictly
/// below the median count, plus any explicitly listed ones.
std::set<int> select_rare_categories(const std::map<int, std::size_t>& counts, const RarityRule& rule);

/// Pool of crops of rare base categories, in record/annotation order. Crop ids
/// are "<image_id>#<annotation index>". Warnings are appended for an empty dataset.
std::vector<PoolEntry> build_object_pool(const std::vector<ImageRecord>& records, const LabelTree& tree,
                                         const RarityRule& rule,
                                         std::vector<std::string>* warnings = nullptr);

/// Integer pixel crop covering `box` (clipped to the image).
Image extract_crop(const Image& image, const BBox& box);

/// Loads each entry's pixels from its source image. Records provide image paths;
/// relative paths resolve against `image_root`. Missing images produce warnings.
void attach_pool_pixels(std::vector<PoolEntry>& pool, const std::vector<ImageRecord>& records,
                        const std::filesystem::path& image_root, std::vector<std::string>* warnings = nullptr);

/// Manifest JSON: {"entries": [{crop_id, category, width, height, source_image,
/// source_bbox, pixels?, alpha?}]}; raster paths are relative to the manifest.
/// Saving writes entry rasters as PNG next to the manifest.
void save_pool_manifest(const std::vector<PoolEntry>& pool, const std::filesystem::path& path);
std::vector<PoolEntry> load_pool_manifest(const std::filesystem::path& path, bool load_pixels = true);

struct MrmConfig {
  std::size_t k = 5;
  /// (a) Minimum fraction of the paste footprint that must be mask-allowed.
  double mask_coverage = 0.95;
  /// (b) Maximum IoU with any annotation or previously accepted paste.
  double max_overlap = 0.1;
  /// (c) Pasted size must lie within +/- this fraction of the reference size.
  double scale_jitter = 0.25;
  /// Candidate draws allowed per requested paste.
  std::size_t retries_per_paste = 100;
  /// OR the annotation footprints into the mask before planning.
  bool ground_truth_mask = false;

  void validate() const;
};

/// Median object size (sqrt(w*h)) per size group; a group is the stacked parent of
/// a base class, or the class itself when it has none.
struct ReferenceSizes {
  std::map<int, double> by_group;
};

int size_group(int category, const LabelTree& tree);
ReferenceSizes reference_sizes(const std::vector<ImageRecord>& records, const LabelTree& tree);

struct Paste {
  std::string crop_id;
  int category = 0;
  /// Integer-aligned footprint inside the image.
  BBox box;
  /// Drawn size multiplier applied to the pool entry.
  double scale = 1.0;

  friend bool operator==(const Paste&, const Paste&) = default;
};

struct PastePlan {
  std::string image_id;
  std::vector<Paste> pastes;
  std::vector<std::string> warnings;

  friend bool operator==(const PastePlan&, const PastePlan&) = default;
};

/// Reference size used for constraint (c): the median size of same-group objects in
/// the image, else the dataset median for the group, else the entry's own size.
double paste_reference_size(const ImageRecord& record, const PoolEntry& entry, const LabelTree& tree,
                            const ReferenceSizes* dataset_refs);

/// Seeded rejection sampling of up to cfg.k pastes satisfying (a) mask coverage,
/// (b) overlap, and (c) scale constraints. Shortfalls are reported as warnings.
PastePlan plan_pastes(const ImageRecord& record, const MaskRaster& mask, const std::vector<PoolEntry>& pool,
                      const LabelTree& tree, const MrmConfig& cfg, std::uint64_t seed,
                      const ReferenceSizes* dataset_refs = nullptr);

/// Re-checks every paste of a plan; returns one message per violated constraint.
std::vector<std::string> check_plan(const PastePlan& plan, const ImageRecord& record, const MaskRaster& mask,
                                    const std::vector<PoolEntry>& pool, const LabelTree& tree,
                                    const MrmConfig& cfg, const ReferenceSizes* dataset_refs = nullptr);

struct CompositeResult {
  Image image;
  ImageRecord record;
  std::vector<std::string> warnings;
};

/// Nearest-neighbor scales each crop to its paste box and copies pixels where the
/// alpha footprint is set; one annotation is appended per applied paste.
CompositeResult composite(const Image& image, const ImageRecord& record, const PastePlan& plan,
                          const std::vector<PoolEntry>& pool);

std::string plans_to_json(const std::vector<PastePlan>& plans, const std::string& meta_json = {});
std::vector<PastePlan> plans_from_json(std::string_view text);
std::vector<PastePlan> load_plans(const std::filesystem::path& path);

}  // namespace aerodet
