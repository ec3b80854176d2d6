#include "aerodet/mrm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <unordered_map>

#include "aerodet/error.hpp"
#include "json_util.hpp"

namespace aerodet {
using detail::json;
namespace fs = std::filesystem;

MaskRaster::MaskRaster(int width, int height, bool allowed)
    : width_(width), height_(height), cells_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0),
                                             allowed ? 1 : 0) {
  if (width <= 0 || height <= 0) throw DataError("mask dimensions must be positive");
}

void MaskRaster::set(int x, int y, bool allowed) {
  cells_[index(x, y)] = allowed ? 1 : 0;
  integral_dirty_ = true;
}

void MaskRaster::fill(const BBox& box, bool allowed) {
  const int x0 = std::max(0, static_cast<int>(std::ceil(box.x - 0.5)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(box.y - 0.5)));
  const int x1 = std::min(width_, static_cast<int>(std::ceil(box.right() - 0.5)));
  const int y1 = std::min(height_, static_cast<int>(std::ceil(box.bottom() - 0.5)));
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) cells_[index(x, y)] = allowed ? 1 : 0;
  integral_dirty_ = true;
}

void MaskRaster::rebuild_integral() const {
  const std::size_t stride = static_cast<std::size_t>(width_) + 1;
  integral_.assign(stride * (static_cast<std::size_t>(height_) + 1), 0);
  for (int y = 0; y < height_; ++y) {
    std::uint32_t row = 0;
    for (int x = 0; x < width_; ++x) {
      row += cells_[index(x, y)];
      integral_[(y + 1) * stride + x + 1] = integral_[y * stride + x + 1] + row;
    }
  }
  integral_dirty_ = false;
}

std::size_t MaskRaster::count_allowed(int x, int y, int w, int h) const {
  const int x0 = std::clamp(x, 0, width_), x1 = std::clamp(x + w, 0, width_);
  const int y0 = std::clamp(y, 0, height_), y1 = std::clamp(y + h, 0, height_);
  if (x1 <= x0 || y1 <= y0) return 0;
  if (integral_dirty_) rebuild_integral();
  const std::size_t stride = static_cast<std::size_t>(width_) + 1;
  auto I = [&](int xx, int yy) { return static_cast<std::int64_t>(integral_[yy * stride + xx]); };
  return static_cast<std::size_t>(I(x1, y1) - I(x0, y1) - I(x1, y0) + I(x0, y0));
}

MaskRaster mask_from_image(const Image& image) {
  MaskRaster mask(image.width, image.height);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      bool on = false;
      for (int c = 0; c < image.channels; ++c) on = on || image.at(x, y, c) != 0;
      if (on) mask.set(x, y, true);
    }
  return mask;
}

MaskRaster read_mask(const fs::path& path) { return mask_from_image(read_image(path)); }

void write_mask(const MaskRaster& mask, const fs::path& path) {
  Image img(mask.width(), mask.height(), 1);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) img.at(x, y) = mask.allowed(x, y) ? 255 : 0;
  write_image(img, path);
}

void add_annotation_footprints(MaskRaster& mask, const ImageRecord& record) {
  for (const auto& a : record.annotations)
    if (!a.ignore) mask.fill(a.bbox, true);
}

std::set<int> select_rare_categories(const std::map<int, std::size_t>& counts, const RarityRule& rule) {
  std::set<int> out = rule.categories;
  if (rule.kind == RarityRule::Kind::kExplicit) return out;
  std::vector<double> present;
  for (const auto& [cat, n] : counts)
    if (n > 0) present.push_back(static_cast<double>(n));
  if (present.empty()) return out;
  std::sort(present.begin(), present.end());
  const std::size_t m = present.size();
  const double median = m % 2 ? present[m / 2] : 0.5 * (present[m / 2 - 1] + present[m / 2]);
  for (const auto& [cat, n] : counts)
    if (n > 0 && static_cast<double>(n) < median) out.insert(cat);
  return out;
}

std::vector<PoolEntry> build_object_pool(const std::vector<ImageRecord>& records, const LabelTree& tree,
                                         const RarityRule& rule, std::vector<std::string>* warnings) {
  std::map<int, std::size_t> counts;
  for (const auto& r : records)
    for (const auto& a : r.annotations)
      if (!a.ignore && tree.is_base(a.category)) ++counts[a.category];
  if (counts.empty() && warnings) warnings->push_back("object pool: dataset has no usable annotations");

  const std::set<int> rare = select_rare_categories(counts, rule);
  std::vector<PoolEntry> pool;
  for (const auto& r : records)
    for (std::size_t i = 0; i < r.annotations.size(); ++i) {
      const auto& a = r.annotations[i];
      if (a.ignore || !tree.is_base(a.category) || !rare.contains(a.category)) continue;
      if (!(a.bbox.w > 0 && a.bbox.h > 0)) continue;
      PoolEntry e;
      e.crop_id = r.image_id + "#" + std::to_string(i);
      e.category = a.category;
      e.dims = {a.bbox.w, a.bbox.h};
      e.source_image = r.image_id;
      e.source_box = a.bbox;
      pool.push_back(std::move(e));
    }
  if (pool.empty() && warnings && !counts.empty()) warnings->push_back("object pool: no rare categories selected");
  return pool;
}

Image extract_crop(const Image& image, const BBox& box) {
  const int x0 = std::clamp(static_cast<int>(std::floor(box.x)), 0, image.width);
  const int y0 = std::clamp(static_cast<int>(std::floor(box.y)), 0, image.height);
  const int x1 = std::clamp(static_cast<int>(std::ceil(box.right())), 0, image.width);
  const int y1 = std::clamp(static_cast<int>(std::ceil(box.bottom())), 0, image.height);
  if (x1 <= x0 || y1 <= y0) return {};
  Image out(x1 - x0, y1 - y0, image.channels);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      for (int c = 0; c < image.channels; ++c) out.at(x - x0, y - y0, c) = image.at(x, y, c);
  return out;
}

void attach_pool_pixels(std::vector<PoolEntry>& pool, const std::vector<ImageRecord>& records,
                        const fs::path& image_root, std::vector<std::string>* warnings) {
  std::map<std::string, const ImageRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.image_id, &r);
  std::map<std::string, std::optional<Image>> cache;
  for (auto& e : pool) {
    auto [it, fresh] = cache.try_emplace(e.source_image);
    if (fresh) {
      auto rec = by_id.find(e.source_image);
      if (rec != by_id.end() && rec->second->path) {
        fs::path p = *rec->second->path;
        if (p.is_relative()) p = image_root / p;
        try {
          it->second = read_image(p);
        } catch (const DataError& err) {
          if (warnings) warnings->push_back(std::string("pool: ") + err.what());
        }
      } else if (warnings) {
        warnings->push_back("pool: no image path for '" + e.source_image + "'");
      }
    }
    if (it->second) {
      Image crop = extract_crop(*it->second, e.source_box);
      if (!crop.empty()) e.pixels = std::move(crop);
    }
  }
}

namespace {

std::string safe_file_stem(const std::string& id) {
  std::string s = id;
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return s;
}

json box_json(const BBox& b) { return json::array({b.x, b.y, b.w, b.h}); }

BBox box_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) throw DataError(where + ": bbox must be [x, y, w, h]");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  } catch (const json::exception& e) {
    throw DataError(where + ": bad bbox: " + e.what());
  }
}

}  // namespace

void save_pool_manifest(const std::vector<PoolEntry>& pool, const fs::path& path) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  json entries = json::array();
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& e = pool[i];
    json j = {{"crop_id", e.crop_id},
              {"category", e.category},
              {"width", e.dims.w},
              {"height", e.dims.h},
              {"source_image", e.source_image},
              {"source_bbox", box_json(e.source_box)}};
    const std::string stem = "crop_" + std::to_string(i) + "_" + safe_file_stem(e.crop_id);
    if (e.pixels) {
      const std::string name = stem + ".png";
      write_image(*e.pixels, dir / name);
      j["pixels"] = name;
    }
    if (e.alpha) {
      const std::string name = stem + "_alpha.png";
      write_image(*e.alpha, dir / name);
      j["alpha"] = name;
    }
    entries.push_back(std::move(j));
  }
  detail::write_text_file(path, json{{"entries", entries}}.dump(2) + "\n");
}

std::vector<PoolEntry> load_pool_manifest(const fs::path& path, bool load_pixels) {
  const json doc = detail::read_json_file(path);
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  const std::string where = path.string();
  const json entries = detail::get_field<json>(doc, "entries", where);
  if (!entries.is_array()) throw DataError(where + ": 'entries' must be an array");
  std::vector<PoolEntry> pool;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const json& j = entries[i];
    const std::string w = where + ": entries[" + std::to_string(i) + "]";
    PoolEntry e;
    e.crop_id = detail::get_field<std::string>(j, "crop_id", w);
    e.category = detail::get_field<int>(j, "category", w);
    e.dims = {detail::get_field<double>(j, "width", w), detail::get_field<double>(j, "height", w)};
    if (!(e.dims.w > 0 && e.dims.h > 0)) throw DataError(w + ": dims must be positive");
    if (!seen.insert(e.crop_id).second) throw DataError(w + ": duplicate crop_id '" + e.crop_id + "'");
    e.source_image = j.value("source_image", std::string{});
    if (j.contains("source_bbox")) e.source_box = box_from_json(j["source_bbox"], w);
    if (load_pixels && j.contains("pixels")) e.pixels = read_image(dir / j["pixels"].get<std::string>());
    if (load_pixels && j.contains("alpha")) e.alpha = read_image(dir / j["alpha"].get<std::string>());
    pool.push_back(std::move(e));
  }
  return pool;
}

void MrmConfig::validate() const {
  if (k < 1) throw ConfigError("mrm: k must be positive");
  if (!(mask_coverage >= 0.0 && mask_coverage <= 1.0)) throw ConfigError("mrm: mask_coverage must lie in [0, 1]");
  if (!(max_overlap >= 0.0 && max_overlap <= 1.0)) throw ConfigError("mrm: max_overlap must lie in [0, 1]");
  if (!(scale_jitter >= 0.0 && scale_jitter < 1.0)) throw ConfigError("mrm: scale_jitter must lie in [0, 1)");
  if (retries_per_paste < 1) throw ConfigError("mrm: retries_per_paste must be positive");
}

int size_group(int category, const LabelTree& tree) {
  if (auto p = tree.parent_of(category)) return *p;
  return category;
}

namespace {

double object_size(double w, double h) { return std::sqrt(w * h); }

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

}  // namespace

ReferenceSizes reference_sizes(const std::vector<ImageRecord>& records, const LabelTree& tree) {
  std::map<int, std::vector<double>> sizes;
  for (const auto& r : records)
    for (const auto& a : r.annotations)
      if (!a.ignore && tree.is_base(a.category))
        sizes[size_group(a.category, tree)].push_back(object_size(a.bbox.w, a.bbox.h));
  ReferenceSizes out;
  for (auto& [g, v] : sizes) out.by_group[g] = median_of(std::move(v));
  return out;
}

double paste_reference_size(const ImageRecord& record, const PoolEntry& entry, const LabelTree& tree,
                            const ReferenceSizes* dataset_refs) {
  const int group = size_group(entry.category, tree);
  std::vector<double> local;
  for (const auto& a : record.annotations)
    if (!a.ignore && tree.is_base(a.category) && size_group(a.category, tree) == group)
      local.push_back(object_size(a.bbox.w, a.bbox.h));
  if (!local.empty()) return median_of(std::move(local));
  if (dataset_refs) {
    auto it = dataset_refs->by_group.find(group);
    if (it != dataset_refs->by_group.end()) return it->second;
  }
  return object_size(entry.dims.w, entry.dims.h);
}

namespace {

struct Candidate {
  std::size_t entry = 0;
  int x = 0, y = 0, w = 0, h = 0;
  double scale = 1.0;
};

bool mask_ok(const MaskRaster& mask, const BBox& box, double rho) {
  const int x = static_cast<int>(std::lround(box.x)), y = static_cast<int>(std::lround(box.y));
  const int w = static_cast<int>(std::lround(box.w)), h = static_cast<int>(std::lround(box.h));
  const double area = static_cast<double>(w) * h;
  return area > 0 && static_cast<double>(mask.count_allowed(x, y, w, h)) >= rho * area;
}

bool overlap_ok(const BBox& box, const ImageRecord& record, const std::vector<Paste>& accepted, double omega) {
  for (const auto& a : record.annotations)
    if (iou(box, a.bbox) > omega) return false;
  for (const auto& p : accepted)
    if (iou(box, p.box) > omega) return false;
  return true;
}

bool scale_ok(const PoolEntry& e, double scale, double ref, double jitter) {
  const double s = scale * object_size(e.dims.w, e.dims.h);
  return std::abs(s / ref - 1.0) <= jitter + 1e-12;
}

void check_mask_dims(const MaskRaster& mask, const ImageRecord& record) {
  if (mask.width() != static_cast<int>(std::lround(record.dims.width)) ||
      mask.height() != static_cast<int>(std::lround(record.dims.height)))
    throw DataError("mask size " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                    " does not match image '" + record.image_id + "'");
}

}  // namespace

PastePlan plan_pastes(const ImageRecord& record, const MaskRaster& mask_in, const std::vector<PoolEntry>& pool,
                      const LabelTree& tree, const MrmConfig& cfg, std::uint64_t seed,
                      const ReferenceSizes* dataset_refs) {
  cfg.validate();
  check_mask_dims(mask_in, record);
  PastePlan plan;
  plan.image_id = record.image_id;

  MaskRaster gt_mask;
  const MaskRaster* mask = &mask_in;
  if (cfg.ground_truth_mask) {
    gt_mask = mask_in;
    add_annotation_footprints(gt_mask, record);
    mask = &gt_mask;
  }

  auto shortfall = [&](const std::string& why) {
    for (std::size_t i = plan.pastes.size(); i < cfg.k; ++i)
      plan.warnings.push_back("paste " + std::to_string(i + 1) + " of " + std::to_string(cfg.k) + ": " + why);
  };
  if (pool.empty()) {
    shortfall("object pool is empty");
    return plan;
  }

  std::vector<double> refs(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) refs[i] = paste_reference_size(record, pool[i], tree, dataset_refs);

  const int W = mask->width(), H = mask->height();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_real_distribution<double> jitter(1.0 - cfg.scale_jitter, 1.0 + cfg.scale_jitter);

  const std::size_t budget = cfg.retries_per_paste * cfg.k;
  std::size_t attempts = 0;
  while (plan.pastes.size() < cfg.k && attempts < budget) {
    ++attempts;
    const std::size_t ei = pick(rng);
    const PoolEntry& e = pool[ei];
    const double scale = refs[ei] * jitter(rng) / object_size(e.dims.w, e.dims.h);
    const int w = std::max(1, static_cast<int>(std::lround(e.dims.w * scale)));
    const int h = std::max(1, static_cast<int>(std::lround(e.dims.h * scale)));
    if (w > W || h > H) continue;
    const int x = std::uniform_int_distribution<int>(0, W - w)(rng);
    const int y = std::uniform_int_distribution<int>(0, H - h)(rng);
    const BBox box{double(x), double(y), double(w), double(h)};
    if (!scale_ok(e, scale, refs[ei], cfg.scale_jitter)) continue;
    if (!mask_ok(*mask, box, cfg.mask_coverage)) continue;
    if (!overlap_ok(box, record, plan.pastes, cfg.max_overlap)) continue;
    plan.pastes.push_back({e.crop_id, e.category, box, scale});
  }
  if (plan.pastes.size() < cfg.k)
    shortfall("no feasible placement within " + std::to_string(budget) + " attempts");
  return plan;
}

std::vector<std::string> check_plan(const PastePlan& plan, const ImageRecord& record, const MaskRaster& mask_in,
                                    const std::vector<PoolEntry>& pool, const LabelTree& tree,
                                    const MrmConfig& cfg, const ReferenceSizes* dataset_refs) {
  check_mask_dims(mask_in, record);
  MaskRaster gt_mask;
  const MaskRaster* mask = &mask_in;
  if (cfg.ground_truth_mask) {
    gt_mask = mask_in;
    add_annotation_footprints(gt_mask, record);
    mask = &gt_mask;
  }
  std::unordered_map<std::string, const PoolEntry*> by_id;
  for (const auto& e : pool) by_id.emplace(e.crop_id, &e);

  std::vector<std::string> issues;
  if (plan.pastes.size() > cfg.k) issues.push_back("plan exceeds k pastes");
  const BBox image = image_box(record.dims);
  std::vector<Paste> earlier;
  for (std::size_t i = 0; i < plan.pastes.size(); ++i) {
    const Paste& p = plan.pastes[i];
    const std::string tag = "paste " + std::to_string(i) + " (" + p.crop_id + "): ";
    auto it = by_id.find(p.crop_id);
    if (it == by_id.end()) {
      issues.push_back(tag + "unknown crop");
      continue;
    }
    if (!contains(image, p.box, 0.0)) issues.push_back(tag + "box outside image");
    if (p.box.x != std::round(p.box.x) || p.box.y != std::round(p.box.y) || p.box.w != std::round(p.box.w) ||
        p.box.h != std::round(p.box.h))
      issues.push_back(tag + "box not pixel aligned");
    if (!mask_ok(*mask, p.box, cfg.mask_coverage)) issues.push_back(tag + "mask coverage below threshold");
    if (!overlap_ok(p.box, record, earlier, cfg.max_overlap)) issues.push_back(tag + "overlap above threshold");
    const double ref = paste_reference_size(record, *it->second, tree, dataset_refs);
    if (!scale_ok(*it->second, p.scale, ref, cfg.scale_jitter)) issues.push_back(tag + "scale outside jitter band");
    earlier.push_back(p);
  }
  return issues;
}

namespace {

std::uint8_t sample(const Image& src, int x, int y, int c, int out_channels) {
  if (src.channels == out_channels) return src.at(x, y, c);
  if (src.channels == 1) return src.at(x, y, 0);
  // Multi-channel crop into a gray image: average.
  int sum = 0;
  for (int k = 0; k < src.channels; ++k) sum += src.at(x, y, k);
  return static_cast<std::uint8_t>(sum / src.channels);
}

}  // namespace

CompositeResult composite(const Image& image, const ImageRecord& record, const PastePlan& plan,
                          const std::vector<PoolEntry>& pool) {
  if (image.width != static_cast<int>(std::lround(record.dims.width)) ||
      image.height != static_cast<int>(std::lround(record.dims.height)))
    throw DataError("raster size does not match image '" + record.image_id + "'");
  std::unordered_map<std::string, const PoolEntry*> by_id;
  for (const auto& e : pool) by_id.emplace(e.crop_id, &e);

  CompositeResult out{image, record, {}};
  for (const Paste& p : plan.pastes) {
    auto it = by_id.find(p.crop_id);
    if (it == by_id.end() || !it->second->pixels || it->second->pixels->empty()) {
      out.warnings.push_back("paste '" + p.crop_id + "' skipped: crop pixels unavailable");
      continue;
    }
    const Image& src = *it->second->pixels;
    const Image* alpha = it->second->alpha ? &*it->second->alpha : nullptr;
    if (alpha && (alpha->width != src.width || alpha->height != src.height)) {
      out.warnings.push_back("paste '" + p.crop_id + "' skipped: alpha size mismatch");
      continue;
    }
    const int x0 = static_cast<int>(std::lround(p.box.x)), y0 = static_cast<int>(std::lround(p.box.y));
    const int w = static_cast<int>(std::lround(p.box.w)), h = static_cast<int>(std::lround(p.box.h));
    for (int dy = 0; dy < h; ++dy) {
      const int ty = y0 + dy;
      if (ty < 0 || ty >= image.height) continue;
      const int sy = std::min(src.height - 1, static_cast<int>((dy + 0.5) * src.height / h));
      for (int dx = 0; dx < w; ++dx) {
        const int tx = x0 + dx;
        if (tx < 0 || tx >= image.width) continue;
        const int sx = std::min(src.width - 1, static_cast<int>((dx + 0.5) * src.width / w));
        if (alpha && alpha->at(sx, sy, 0) == 0) continue;
        for (int c = 0; c < out.image.channels; ++c) out.image.at(tx, ty, c) = sample(src, sx, sy, c, image.channels);
      }
    }
    ObjectAnnotation a;
    a.bbox = p.box;
    a.category = p.category;
    out.record.annotations.push_back(a);
  }
  return out;
}

std::string plans_to_json(const std::vector<PastePlan>& plans, const std::string& meta_json) {
  json arr = json::array();
  for (const auto& plan : plans) {
    json pastes = json::array();
    for (const auto& p : plan.pastes)
      pastes.push_back({{"crop_id", p.crop_id}, {"category", p.category}, {"bbox", box_json(p.box)}, {"scale", p.scale}});
    arr.push_back({{"image_id", plan.image_id}, {"pastes", pastes}, {"warnings", plan.warnings}});
  }
  json doc = {{"plans", arr}};
  if (!meta_json.empty()) doc["meta"] = json::parse(meta_json);
  return doc.dump(2) + "\n";
}

std::vector<PastePlan> plans_from_json(std::string_view text) {
  const json doc = detail::parse_json(text, "plans");
  const json arr = detail::get_field<json>(doc, "plans", "plans");
  if (!arr.is_array()) throw DataError("plans: 'plans' must be an array");
  std::vector<PastePlan> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string w = "plans[" + std::to_string(i) + "]";
    PastePlan plan;
    plan.image_id = detail::get_field<std::string>(arr[i], "image_id", w);
    for (const auto& p : detail::get_field<json>(arr[i], "pastes", w)) {
      Paste paste;
      paste.crop_id = detail::get_field<std::string>(p, "crop_id", w);
      paste.category = detail::get_field<int>(p, "category", w);
      paste.box = box_from_json(detail::get_field<json>(p, "bbox", w), w);
      paste.scale = detail::get_field<double>(p, "scale", w);
      plan.pastes.push_back(std::move(paste));
    }
    if (arr[i].contains("warnings")) plan.warnings = arr[i]["warnings"].get<std::vector<std::string>>();
    out.push_back(std::move(plan));
  }
  return out;
}

std::vector<PastePlan> load_plans(const fs::path& path) {
  try {
    return plans_from_json(detail::read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace aerodet
