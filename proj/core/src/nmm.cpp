#include "aerodet/nmm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "aerodet/error.hpp"
#include "aerodet/parallel.hpp"
#include "json_util.hpp"

namespace aerodet {
using detail::json;

void NmmConfig::validate() const {
  if (!(w_b > 0.0) || !(h_b > 0.0)) throw ConfigError("nmm: w_b and h_b must be positive");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("nmm: tau must lie in (0, 1]");
  if (!(small_max_side > 0.0)) throw ConfigError("nmm: small_max_side must be positive");
}

std::vector<std::size_t> sort_boxes(const std::vector<ObjectAnnotation>& annotations) {
  std::vector<std::size_t> order(annotations.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const BBox& ba = annotations[a].bbox;
    const BBox& bb = annotations[b].bbox;
    if (ba.y != bb.y) return ba.y < bb.y;
    return ba.x < bb.x;
  });
  return order;
}

bool is_small(const ObjectAnnotation& ann, const NmmConfig& cfg) noexcept {
  return !ann.ignore && std::max(ann.bbox.w, ann.bbox.h) <= cfg.small_max_side;
}

namespace {

// Uniform bucket grid over box extents; each box is registered in every cell it
// touches so a window query only visits nearby boxes.
class BoxGrid {
 public:
  BoxGrid(const std::vector<BBox>& boxes, const ImageDims& dims, double cell)
      : cell_(cell),
        cols_(std::max(1, static_cast<int>(std::ceil(dims.width / cell)))),
        rows_(std::max(1, static_cast<int>(std::ceil(dims.height / cell)))),
        buckets_(static_cast<std::size_t>(cols_) * rows_) {
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const auto [c0, r0, c1, r1] = span(boxes[i]);
      for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) buckets_[static_cast<std::size_t>(r) * cols_ + c].push_back(i);
    }
  }

  // Appends indices of boxes whose buckets overlap `query`; may contain duplicates.
  void query(const BBox& q, std::vector<std::size_t>& out) const {
    const auto [c0, r0, c1, r1] = span(q);
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) {
        const auto& b = buckets_[static_cast<std::size_t>(r) * cols_ + c];
        out.insert(out.end(), b.begin(), b.end());
      }
  }

 private:
  std::array<int, 4> span(const BBox& b) const {
    auto col = [&](double v) { return std::clamp(static_cast<int>(std::floor(v / cell_)), 0, cols_ - 1); };
    auto row = [&](double v) { return std::clamp(static_cast<int>(std::floor(v / cell_)), 0, rows_ - 1); };
    return {col(b.x), row(b.y), col(b.right()), row(b.bottom())};
  }

  double cell_;
  int cols_;
  int rows_;
  std::vector<std::vector<std::size_t>> buckets_;
};

}  // namespace

std::vector<Cluster> nmm(const std::vector<ObjectAnnotation>& annotations, const ImageDims& dims,
                         const NmmConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> small;
  for (std::size_t i = 0; i < annotations.size(); ++i)
    if (is_small(annotations[i], cfg)) small.push_back(i);
  if (small.empty()) return {};

  // Work in sorted order: position k in `boxes` is the k-th box of sort_boxes.
  std::vector<ObjectAnnotation> subset;
  subset.reserve(small.size());
  for (auto i : small) subset.push_back(annotations[i]);
  const auto order = sort_boxes(subset);
  std::vector<BBox> boxes;
  std::vector<std::size_t> original;
  boxes.reserve(order.size());
  for (auto k : order) {
    boxes.push_back(subset[k].bbox);
    original.push_back(small[k]);
  }

  const BoxGrid grid(boxes, dims, std::max({cfg.w_b, cfg.h_b, 1.0}));
  std::vector<char> visited(boxes.size(), 0);
  std::vector<Cluster> clusters;
  std::vector<std::size_t> candidates;

  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (visited[i]) continue;
    visited[i] = 1;
    Cluster cluster;
    cluster.window = recenter(boxes[i].center(), cfg.w_b, cfg.h_b, dims);
    cluster.seed = original[i];
    cluster.members.push_back(original[i]);

    candidates.clear();
    grid.query(cluster.window, candidates);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    for (std::size_t j : candidates) {
      if (j <= i || visited[j]) continue;
      if (coverage(boxes[j], cluster.window) > cfg.tau) {
        visited[j] = 1;
        cluster.members.push_back(original[j]);
      }
    }
    clusters.push_back(std::move(cluster));
  }
  return clusters;
}

std::map<std::size_t, std::size_t> ClusterDataset::count_histogram() const {
  std::map<std::size_t, std::size_t> hist;
  for (const auto& img : images) ++hist[img.clusters.size()];
  return hist;
}

ClusterDataset generate_cluster_ground_truth(const std::vector<ImageRecord>& records,
                                             const NmmConfig& cfg, unsigned jobs) {
  cfg.validate();
  ClusterDataset out;
  out.config = cfg;
  out.images.resize(records.size());
  parallel_for(records.size(), jobs, [&](std::size_t i) {
    const auto& r = records[i];
    out.images[i] = {r.image_id, r.dims, nmm(r.annotations, r.dims, cfg), {}};
  });
  return out;
}

std::string cluster_dataset_to_json(const std::vector<ImageClusters>& images,
                                    const std::string& meta_json) {
  json arr = json::array();
  for (const auto& img : images) {
    json clusters = json::array();
    for (std::size_t c = 0; c < img.clusters.size(); ++c) {
      const auto& cl = img.clusters[c];
      const Point2 center = cl.window.center();
      json entry = {{"cx", center.x},         {"cy", center.y},
                    {"w", cl.window.w},       {"h", cl.window.h},
                    {"member_indices", cl.members}, {"seed_index", cl.seed}};
      if (c < img.scores.size()) entry["score"] = img.scores[c];
      clusters.push_back(std::move(entry));
    }
    arr.push_back({{"image_id", img.image_id},
                   {"width", img.dims.width},
                   {"height", img.dims.height},
                   {"clusters", std::move(clusters)}});
  }
  json doc = {{"images", std::move(arr)}};
  if (!meta_json.empty()) doc["meta"] = json::parse(meta_json);
  return doc.dump(2) + "\n";
}

std::vector<ImageClusters> cluster_dataset_from_json(std::string_view text) {
  const json doc = detail::parse_json(text, "cluster JSON");
  const json& arr = doc.is_array() ? doc : doc.value("images", json::array());
  std::vector<ImageClusters> out;
  for (const auto& img : arr) {
    const std::string where = "cluster JSON image";
    ImageClusters ic;
    ic.image_id = detail::get_field<std::string>(img, "image_id", where);
    ic.dims = {img.value("width", 0.0), img.value("height", 0.0)};
    bool any_score = false;
    bool all_score = true;
    for (const auto& c : img.value("clusters", json::array())) {
      const std::string cw = where + " " + ic.image_id;
      Cluster cl;
      const double w = detail::get_field<double>(c, "w", cw);
      const double h = detail::get_field<double>(c, "h", cw);
      cl.window = BBox::centered({detail::get_field<double>(c, "cx", cw),
                                  detail::get_field<double>(c, "cy", cw)},
                                 w, h);
      cl.members = c.value("member_indices", std::vector<std::size_t>{});
      cl.seed = c.value("seed_index", cl.members.empty() ? std::size_t{0} : cl.members.front());
      if (!(w > 0.0) || !(h > 0.0)) throw DataError(cw + ": cluster size must be positive");
      if (c.contains("score")) {
        any_score = true;
        ic.scores.push_back(c.at("score").get<double>());
      } else {
        all_score = false;
      }
      ic.clusters.push_back(std::move(cl));
    }
    if (any_score && !all_score)
      throw DataError("cluster JSON image " + ic.image_id + ": score present on only some clusters");
    out.push_back(std::move(ic));
  }
  return out;
}

std::vector<ImageClusters> load_cluster_json(const std::filesystem::path& path) {
  try {
    return cluster_dataset_from_json(detail::read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace aerodet
