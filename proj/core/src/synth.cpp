#include "aerodet/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "aerodet/error.hpp"

namespace aerodet {

void SceneConfig::validate() const {
  if (!(dims.width > 0 && dims.height > 0)) throw ConfigError("scene: dims must be positive");
  if (n_dense_clusters < 0 || n_large < 0) throw ConfigError("scene: counts must be non-negative");
  if (objects_per_cluster.lo < 0 || objects_per_cluster.hi < objects_per_cluster.lo)
    throw ConfigError("scene: objects_per_cluster must be a valid range");
  auto check = [](const Range& r, const char* name) {
    if (!(r.lo > 0 && r.hi >= r.lo)) throw ConfigError(std::string("scene: ") + name + " must be a valid positive range");
  };
  check(small_size, "small_size");
  check(large_size, "large_size");
  if (!(cluster_spread >= 0)) throw ConfigError("scene: cluster_spread must be non-negative");
  double total = 0.0;
  for (const auto& [cat, w] : class_distribution) {
    if (!(w >= 0)) throw ConfigError("scene: class weights must be non-negative");
    total += w;
  }
  if (!(total > 0)) throw ConfigError("scene: class weights must sum to a positive value");
  if (max_attempts < 1) throw ConfigError("scene: max_attempts must be positive");
}

namespace {

bool collides(const BBox& b, const std::vector<ObjectAnnotation>& placed) {
  for (const auto& a : placed)
    if (intersection_area(b, a.bbox) > 0.0) return true;
  return false;
}

}  // namespace

ImageRecord generate_scene(const SceneConfig& cfg, const std::string& image_id) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::vector<int> cats;
  std::vector<double> weights;
  for (const auto& [cat, w] : cfg.class_distribution) {
    cats.push_back(cat);
    weights.push_back(w);
  }
  std::discrete_distribution<std::size_t> pick_cat(weights.begin(), weights.end());
  std::uniform_real_distribution<double> ux(0.0, cfg.dims.width), uy(0.0, cfg.dims.height);

  ImageRecord rec;
  rec.image_id = image_id;
  rec.dims = cfg.dims;
  const BBox image = image_box(cfg.dims);

  auto place = [&](auto&& propose, const char* what) {
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
      const BBox b = propose();
      if (!contains(image, b) || collides(b, rec.annotations)) continue;
      ObjectAnnotation a;
      a.bbox = b;
      a.category = cats[pick_cat(rng)];
      rec.annotations.push_back(a);
      return;
    }
    throw DataError(std::string("scene: cannot place ") + what + " object without overlap after " +
                    std::to_string(cfg.max_attempts) + " attempts");
  };

  std::uniform_real_distribution<double> small_side(cfg.small_size.lo, cfg.small_size.hi);
  std::uniform_real_distribution<double> large_side(cfg.large_size.lo, cfg.large_size.hi);
  std::normal_distribution<double> spread(0.0, cfg.cluster_spread);
  std::uniform_int_distribution<int> per_cluster(cfg.objects_per_cluster.lo, cfg.objects_per_cluster.hi);

  // Large objects first so the dense groups fill around them.
  for (int i = 0; i < cfg.n_large; ++i)
    place(
        [&] {
          const double w = large_side(rng), h = large_side(rng);
          return BBox{ux(rng) * std::max(0.0, 1.0 - w / cfg.dims.width), uy(rng) * std::max(0.0, 1.0 - h / cfg.dims.height),
                      w, h};
        },
        "large");
  for (int c = 0; c < cfg.n_dense_clusters; ++c) {
    const Point2 center{ux(rng), uy(rng)};
    const int n = per_cluster(rng);
    for (int i = 0; i < n; ++i)
      place(
          [&] {
            const double w = small_side(rng), h = small_side(rng);
            return BBox::centered({center.x + spread(rng), center.y + spread(rng)}, w, h);
          },
          "small");
  }
  return rec;
}

Image render_scene(const ImageRecord& record) {
  const int W = static_cast<int>(std::lround(record.dims.width));
  const int H = static_cast<int>(std::lround(record.dims.height));
  Image img(W, H, 3, 24);
  for (const auto& a : record.annotations) {
    const unsigned h = static_cast<unsigned>(a.category) * 2654435761u;
    const std::uint8_t col[3] = {static_cast<std::uint8_t>(64 + (h >> 8) % 192),
                                 static_cast<std::uint8_t>(64 + (h >> 16) % 192),
                                 static_cast<std::uint8_t>(64 + (h >> 24) % 192)};
    const int x0 = std::clamp(static_cast<int>(std::floor(a.bbox.x)), 0, W);
    const int y0 = std::clamp(static_cast<int>(std::floor(a.bbox.y)), 0, H);
    const int x1 = std::clamp(static_cast<int>(std::ceil(a.bbox.right())), 0, W);
    const int y1 = std::clamp(static_cast<int>(std::ceil(a.bbox.bottom())), 0, H);
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x)
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = col[c];
  }
  return img;
}

void OracleConfig::validate() const {
  if (!(center_jitter_sd >= 0) || !(size_jitter_sd >= 0)) throw ConfigError("oracle: jitter must be non-negative");
  if (!(miss_rate >= 0 && miss_rate <= 1)) throw ConfigError("oracle: miss_rate must lie in [0, 1]");
  if (!(fp_rate_per_image >= 0)) throw ConfigError("oracle: fp_rate_per_image must be non-negative");
  if (!(fp_size.lo > 0 && fp_size.hi >= fp_size.lo)) throw ConfigError("oracle: fp_size must be a valid positive range");
}

bool OracleConfig::zero_noise() const noexcept {
  return center_jitter_sd == 0 && size_jitter_sd == 0 && miss_rate == 0 && fp_rate_per_image == 0;
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::mt19937_64 chip_rng(const ImageRecord& record, const BBox& chip, std::uint64_t seed) {
  const std::uint64_t parts[] = {seed,
                                 fnv1a(record.image_id),
                                 std::bit_cast<std::uint64_t>(chip.x),
                                 std::bit_cast<std::uint64_t>(chip.y),
                                 std::bit_cast<std::uint64_t>(chip.w),
                                 std::bit_cast<std::uint64_t>(chip.h)};
  std::vector<std::uint32_t> words;
  for (std::uint64_t p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace

std::vector<Detection> oracle_detect(const ImageRecord& record, const BBox& chip, const OracleConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng = chip_rng(record, chip, cfg.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  std::vector<Detection> out;
  std::vector<int> seen_categories;
  for (const auto& a : record.annotations) {
    if (a.ignore) continue;
    if (std::find(seen_categories.begin(), seen_categories.end(), a.category) == seen_categories.end())
      seen_categories.push_back(a.category);
    if (intersection_area(a.bbox, chip) <= 0.0) continue;
    // Draws happen unconditionally so one knob does not reshuffle the others.
    const double miss = u01(rng);
    const double dx = cfg.center_jitter_sd * unit(rng), dy = cfg.center_jitter_sd * unit(rng);
    const double sw = cfg.size_jitter_sd * unit(rng), sh = cfg.size_jitter_sd * unit(rng);
    if (miss < cfg.miss_rate) continue;

    const double w = a.bbox.w * std::max(0.05, 1.0 + sw);
    const double h = a.bbox.h * std::max(0.05, 1.0 + sh);
    const BBox moved{a.bbox.x + dx - (w - a.bbox.w) / 2, a.bbox.y + dy - (h - a.bbox.h) / 2, w, h};
    const auto cropped = intersect(moved, chip);
    if (!cropped) continue;

    double score = 1.0;
    if (cfg.score_model == ScoreModel::kJitter && !cfg.zero_noise()) {
      const double norm = std::hypot(dx, dy) / std::sqrt(a.bbox.area()) + 0.5 * (std::abs(sw) + std::abs(sh));
      score = std::clamp(1.0 - norm, 0.05, 1.0);
    }
    out.push_back({{cropped->x - chip.x, cropped->y - chip.y, cropped->w, cropped->h}, a.category, score});
  }

  if (cfg.fp_rate_per_image > 0) {
    const double share = chip.area() / std::max(record.dims.width * record.dims.height, 1e-9);
    std::poisson_distribution<int> n_fp(cfg.fp_rate_per_image * std::min(share, 1.0));
    const int n = n_fp(rng);
    std::uniform_real_distribution<double> side(cfg.fp_size.lo, cfg.fp_size.hi);
    std::uniform_real_distribution<double> fp_score(0.05, 0.5);
    for (int i = 0; i < n; ++i) {
      const double w = std::min(side(rng), chip.w), h = std::min(side(rng), chip.h);
      const double x = u01(rng) * (chip.w - w), y = u01(rng) * (chip.h - h);
      const int cat = seen_categories.empty()
                          ? 1
                          : seen_categories[std::uniform_int_distribution<std::size_t>(0, seen_categories.size() - 1)(rng)];
      out.push_back({{x, y, w, h}, cat, fp_score(rng)});
    }
  }
  return out;
}

bool has_straddlers(const ImageRecord& record, const std::vector<BBox>& windows) {
  for (const auto& a : record.annotations) {
    if (a.ignore) continue;
    for (const auto& w : windows)
      if (intersection_area(a.bbox, w) > 0.0 && !contains(w, a.bbox)) return true;
  }
  return false;
}

ImageChipResults oracle_chip_results(const ImageRecord& record, const NmmConfig& nmm_cfg,
                                     const OracleConfig& oracle_cfg) {
  ImageChipResults out;
  out.image_id = record.image_id;
  out.dims = record.dims;
  for (const auto& c : nmm(record.annotations, record.dims, nmm_cfg)) {
    ChipResult chip;
    chip.origin = {record.image_id, {c.window.x, c.window.y}, {c.window.w, c.window.h}, record.dims};
    chip.detections = oracle_detect(record, c.window, oracle_cfg);
    out.chips.push_back(std::move(chip));
  }
  ImageRecord large = record;
  std::erase_if(large.annotations, [&](const ObjectAnnotation& a) { return a.ignore || is_small(a, nmm_cfg); });
  out.global_dets = oracle_detect(large, image_box(record.dims), oracle_cfg);
  return out;
}

}  // namespace aerodet
