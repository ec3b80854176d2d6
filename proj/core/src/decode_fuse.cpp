#include "aerodet/decode_fuse.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "aerodet/error.hpp"
#include "json_util.hpp"

namespace aerodet {
namespace fs = std::filesystem;
using detail::json;

std::vector<Peak> extract_peaks(const DenseGrid& heatmap, std::size_t k) {
  const int W = heatmap.width();
  const int H = heatmap.height();
  const int C = heatmap.channels();
  std::vector<std::pair<double, std::size_t>> found;  // (score, scan index)
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        const double v = heatmap.at(x, y, c);
        bool is_max = true;
        for (int dy = -1; dy <= 1 && is_max; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
            if (heatmap.at(nx, ny, c) > v) {
              is_max = false;
              break;
            }
          }
        if (is_max) found.emplace_back(v, heatmap.index(x, y, c));
      }

  const auto ranked = [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  };
  const std::size_t n = std::min(k, found.size());
  std::partial_sort(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(n), found.end(), ranked);

  std::vector<Peak> peaks;
  peaks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t idx = found[i].second;
    const int c = static_cast<int>(idx % C);
    const std::size_t cell = idx / C;
    peaks.push_back({{static_cast<int>(cell % W), static_cast<int>(cell / W)}, c, found[i].first});
  }
  return peaks;
}

std::vector<Size2> RegressionMaps::gather_sizes(const std::vector<Peak>& peaks) const {
  std::vector<Size2> out;
  out.reserve(peaks.size());
  for (const auto& p : peaks) out.push_back({size.at(p.cell.x, p.cell.y, 0), size.at(p.cell.x, p.cell.y, 1)});
  return out;
}

std::vector<Point2> RegressionMaps::gather_offsets(const std::vector<Peak>& peaks) const {
  std::vector<Point2> out;
  out.reserve(peaks.size());
  for (const auto& p : peaks)
    out.push_back({offset.at(p.cell.x, p.cell.y, 0), offset.at(p.cell.x, p.cell.y, 1)});
  return out;
}

RegressionMaps regression_maps_from_targets(const DenseTargetSet& t) {
  RegressionMaps maps{DenseGrid(t.heatmap.width(), t.heatmap.height(), 2),
                      DenseGrid(t.heatmap.width(), t.heatmap.height(), 2)};
  for (std::size_t i = 0; i < t.n_objects; ++i) {
    const Cell p = t.peak_cells[i];
    maps.size.at(p.x, p.y, 0) = t.sizes[i].w;
    maps.size.at(p.x, p.y, 1) = t.sizes[i].h;
    maps.offset.at(p.x, p.y, 0) = t.offsets[i].x;
    maps.offset.at(p.x, p.y, 1) = t.offsets[i].y;
  }
  return maps;
}

std::vector<Detection> decode_boxes(const std::vector<Peak>& peaks, const std::vector<Size2>& sizes,
                                    const std::vector<Point2>& offsets, int R,
                                    const LabelTree& tree) {
  if (sizes.size() != peaks.size() || offsets.size() != peaks.size())
    throw DataError("decode: sizes and offsets must be parallel to peaks");
  std::vector<Detection> out;
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    const Peak& p = peaks[i];
    if (tree.is_stacked_channel(p.channel)) continue;
    const Size2 s = sizes[i];
    if (!(s.w > 0.0) || !(s.h > 0.0)) continue;
    const Point2 center{(p.cell.x + offsets[i].x) * R, (p.cell.y + offsets[i].y) * R};
    out.push_back({BBox::centered(center, s.w, s.h), tree.class_at_channel(p.channel), p.score});
  }
  return out;
}

std::vector<Detection> chip_to_global(const std::vector<Detection>& dets, const ChipOrigin& origin) {
  std::vector<Detection> out;
  out.reserve(dets.size());
  for (const auto& d : dets) {
    BBox moved{d.bbox.x + origin.offset.x, d.bbox.y + origin.offset.y, d.bbox.w, d.bbox.h};
    if (auto clipped = clamp_to_image(moved, origin.image)) out.push_back({*clipped, d.category, d.score});
  }
  return out;
}

namespace {

std::vector<std::size_t> score_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

}  // namespace

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_thresh) {
  std::vector<Detection> kept;
  for (std::size_t idx : score_order(dets)) {
    const Detection& d = dets[idx];
    const bool clear = std::none_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.category == d.category && iou(k.bbox, d.bbox) > iou_thresh;
    });
    if (clear) kept.push_back(d);
  }
  return kept;
}

std::vector<ChipEdge> chip_edges(const std::vector<ChipOrigin>& chips, const ImageDims& image) {
  constexpr double kBorderTol = 1e-9;
  std::vector<ChipEdge> edges;
  auto add = [&](bool vertical, double coord, double lo, double hi, double limit) {
    if (coord <= kBorderTol || coord >= limit - kBorderTol) return;
    ChipEdge e{vertical, coord, lo, hi};
    if (std::find(edges.begin(), edges.end(), e) == edges.end()) edges.push_back(e);
  };
  for (const auto& c : chips) {
    const BBox w = c.window();
    add(true, w.x, w.y, w.bottom(), image.width);
    add(true, w.right(), w.y, w.bottom(), image.width);
    add(false, w.y, w.x, w.right(), image.height);
    add(false, w.bottom(), w.x, w.right(), image.height);
  }
  return edges;
}

void FuseConfig::validate() const {
  if (peaks_per_chip < 1) throw ConfigError("fuse: peaks_per_chip must be positive");
  if (max_detections < 1) throw ConfigError("fuse: max_detections must be positive");
  if (!(nms_iou > 0.0 && nms_iou < 1.0)) throw ConfigError("fuse: nms_iou must lie in (0, 1)");
  if (!(boundary_delta >= 0.0)) throw ConfigError("fuse: boundary_delta must be non-negative");
  if (!(boundary_overlap > 0.0 && boundary_overlap <= 1.0))
    throw ConfigError("fuse: boundary_overlap must lie in (0, 1]");
}

namespace {

struct Interval {
  double lo, hi;
};

// Extent of a box across the edge normal (a) and along the edge (b).
Interval across(const BBox& b, bool vertical) { return vertical ? Interval{b.x, b.right()} : Interval{b.y, b.bottom()}; }
Interval along(const BBox& b, bool vertical) { return vertical ? Interval{b.y, b.bottom()} : Interval{b.x, b.right()}; }

double overlap(Interval a, Interval b) { return std::max(0.0, std::min(a.hi, b.hi) - std::max(a.lo, b.lo)); }

// `cut` ends at the edge with its body on one side; `rest` starts at or before the
// edge (within delta) and extends past both the edge and the cut side.
bool split_pair(const BBox& cut, const BBox& rest, const ChipEdge& e, double delta) {
  const Interval c = across(cut, e.vertical);
  const Interval r = across(rest, e.vertical);
  if (overlap(along(cut, e.vertical), {e.lo, e.hi}) <= 0.0) return false;
  const bool cut_from_below = std::abs(c.hi - e.coord) <= delta && c.lo < e.coord;
  if (cut_from_below && r.hi > std::max(c.hi, e.coord) && r.lo <= e.coord + delta) return true;
  const bool cut_from_above = std::abs(c.lo - e.coord) <= delta && c.hi > e.coord;
  return cut_from_above && r.lo < std::min(c.lo, e.coord) && r.hi >= e.coord - delta;
}

bool mergeable(const BBox& a, const BBox& b, const std::vector<ChipEdge>& edges, const FuseConfig& cfg) {
  for (const auto& e : edges) {
    const Interval pa = along(a, e.vertical);
    const Interval pb = along(b, e.vertical);
    const double shorter = std::min(pa.hi - pa.lo, pb.hi - pb.lo);
    if (overlap(pa, pb) < cfg.boundary_overlap * shorter) continue;
    if (split_pair(a, b, e, cfg.boundary_delta) || split_pair(b, a, e, cfg.boundary_delta)) return true;
  }
  return false;
}

}  // namespace

std::vector<Detection> merge_split_boxes(const std::vector<Detection>& dets,
                                         const std::vector<ChipEdge>& edges, const FuseConfig& cfg) {
  std::vector<Detection> work;
  work.reserve(dets.size());
  for (std::size_t idx : score_order(dets)) work.push_back(dets[idx]);
  if (edges.empty()) return work;

  // Parts of one split object touch or overlap; reject distant pairs cheaply.
  const auto near = [&](const BBox& a, const BBox& b) {
    const double d = cfg.boundary_delta;
    return a.x <= b.right() + d && b.x <= a.right() + d && a.y <= b.bottom() + d && b.y <= a.bottom() + d;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < work.size(); ++i) {
      std::size_t j = i + 1;
      while (j < work.size()) {
        if (work[i].category == work[j].category && near(work[i].bbox, work[j].bbox) &&
            mergeable(work[i].bbox, work[j].bbox, edges, cfg)) {
          work[i].bbox = union_box(work[i].bbox, work[j].bbox);
          work[i].score = std::max(work[i].score, work[j].score);
          work.erase(work.begin() + static_cast<std::ptrdiff_t>(j));
          changed = true;
          j = i + 1;
        } else {
          ++j;
        }
      }
    }
  }
  return work;
}

std::vector<Detection> fuse(const std::vector<ChipResult>& chips,
                            const std::vector<Detection>& global_dets, const ImageDims& image,
                            const FuseConfig& cfg) {
  cfg.validate();
  std::vector<Detection> all;
  std::vector<ChipOrigin> origins;
  for (const auto& chip : chips) {
    ChipOrigin origin = chip.origin;
    origin.image = image;
    origins.push_back(origin);
    const auto moved = chip_to_global(chip.detections, origin);
    all.insert(all.end(), moved.begin(), moved.end());
  }
  for (const auto& d : global_dets)
    if (auto clipped = clamp_to_image(d.bbox, image)) all.push_back({*clipped, d.category, d.score});

  auto merged = merge_split_boxes(all, chip_edges(origins, image), cfg);
  auto kept = nms(merged, cfg.nms_iou);
  if (kept.size() > cfg.max_detections) kept.resize(cfg.max_detections);
  return kept;
}

std::vector<Detection> fuse_image(const ImageChipResults& results, const FuseConfig& cfg) {
  return fuse(results.chips, results.global_dets, results.dims, cfg);
}

namespace {

json detection_json(const Detection& d) {
  return {{"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}}, {"category", d.category}, {"score", d.score}};
}

Detection parse_detection(const json& j, const std::string& where) {
  const auto box = detail::get_field<std::vector<double>>(j, "bbox", where);
  if (box.size() != 4) throw DataError(where + ": bbox must have 4 values");
  Detection d;
  d.bbox = {box[0], box[1], box[2], box[3]};
  if (j.contains("category")) d.category = detail::get_field<int>(j, "category", where);
  else d.category = detail::get_field<int>(j, "category_id", where);
  d.score = detail::get_field<double>(j, "score", where);
  if (!(d.score >= 0.0 && d.score <= 1.0)) throw DataError(where + ": score outside [0, 1]");
  if (!d.bbox.valid()) throw DataError(where + ": bbox must have positive size");
  return d;
}

std::vector<Detection> parse_detection_list(const json& arr, const std::string& where) {
  std::vector<Detection> out;
  if (!arr.is_array()) throw DataError(where + ": expected an array of detections");
  for (const auto& j : arr) out.push_back(parse_detection(j, where));
  return out;
}

json detection_list_json(const std::vector<Detection>& dets) {
  json arr = json::array();
  for (const auto& d : dets) arr.push_back(detection_json(d));
  return arr;
}

std::string image_key(const json& id) { return id.is_string() ? id.get<std::string>() : id.dump(); }

}  // namespace

std::string detections_to_json(const std::vector<ImageDetections>& images, const std::string& meta_json) {
  json arr = json::array();
  for (const auto& img : images)
    arr.push_back({{"image_id", img.image_id}, {"detections", detection_list_json(img.detections)}});
  json doc = {{"images", std::move(arr)}};
  if (!meta_json.empty()) doc["meta"] = json::parse(meta_json);
  return doc.dump(2) + "\n";
}

std::vector<ImageDetections> detections_from_json(std::string_view text) {
  const json doc = detail::parse_json(text, "detections JSON");
  std::vector<ImageDetections> out;
  if (doc.is_array()) {
    // Flat COCO results list; images appear in first-seen order.
    std::map<std::string, std::size_t> index;
    for (const auto& j : doc) {
      if (!j.contains("image_id")) throw DataError("detections JSON: entry without image_id");
      const std::string key = image_key(j.at("image_id"));
      auto [it, inserted] = index.emplace(key, out.size());
      if (inserted) out.push_back({key, {}});
      out[it->second].detections.push_back(parse_detection(j, "detection for image " + key));
    }
    return out;
  }
  for (const auto& img : detail::get_field<json>(doc, "images", "detections JSON")) {
    ImageDetections d;
    d.image_id = image_key(detail::get_field<json>(img, "image_id", "detections JSON"));
    d.detections = parse_detection_list(img.value("detections", json::array()), "image " + d.image_id);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<ImageDetections> load_detections(const fs::path& path) {
  try {
    return detections_from_json(detail::read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string chip_results_to_json(const std::vector<ImageChipResults>& images, const std::string& meta_json) {
  json arr = json::array();
  for (const auto& img : images) {
    json chips = json::array();
    for (const auto& c : img.chips)
      chips.push_back({{"x", c.origin.offset.x},
                       {"y", c.origin.offset.y},
                       {"w", c.origin.chip.width},
                       {"h", c.origin.chip.height},
                       {"detections", detection_list_json(c.detections)}});
    arr.push_back({{"image_id", img.image_id},
                   {"width", img.dims.width},
                   {"height", img.dims.height},
                   {"chips", std::move(chips)},
                   {"global", detection_list_json(img.global_dets)}});
  }
  json doc = {{"images", std::move(arr)}};
  if (!meta_json.empty()) doc["meta"] = json::parse(meta_json);
  return doc.dump(2) + "\n";
}

std::vector<ImageChipResults> chip_results_from_json(std::string_view text) {
  const json doc = detail::parse_json(text, "chip results JSON");
  std::vector<ImageChipResults> out;
  for (const auto& img : detail::get_field<json>(doc, "images", "chip results JSON")) {
    ImageChipResults r;
    r.image_id = image_key(detail::get_field<json>(img, "image_id", "chip results JSON"));
    const std::string where = "chip results image " + r.image_id;
    r.dims = {detail::get_field<double>(img, "width", where), detail::get_field<double>(img, "height", where)};
    if (!(r.dims.width > 0.0) || !(r.dims.height > 0.0)) throw DataError(where + ": non-positive dimensions");
    for (const auto& c : img.value("chips", json::array())) {
      ChipResult chip;
      chip.origin = {r.image_id,
                     {detail::get_field<double>(c, "x", where), detail::get_field<double>(c, "y", where)},
                     {detail::get_field<double>(c, "w", where), detail::get_field<double>(c, "h", where)},
                     r.dims};
      if (!contains(image_box(r.dims), chip.origin.window(), 1e-6))
        throw DataError(where + ": chip window outside the image");
      chip.detections = parse_detection_list(c.value("detections", json::array()), where);
      r.chips.push_back(std::move(chip));
    }
    r.global_dets = parse_detection_list(img.value("global", json::array()), where);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ImageChipResults> load_chip_results(const fs::path& path) {
  try {
    return chip_results_from_json(detail::read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace aerodet
