#include "aerodet/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "aerodet/error.hpp"
#include "json_util.hpp"

namespace aerodet {
namespace fs = std::filesystem;
using detail::json;

void HeatmapConfig::validate() const {
  if (R < 1) throw ConfigError("heatmap: R must be at least 1");
  if (!(gaussian_min_overlap > 0.0 && gaussian_min_overlap < 1.0))
    throw ConfigError("heatmap: gaussian_min_overlap must lie in (0, 1)");
}

double gaussian_radius(double box_w, double box_h, double min_overlap) {
  const double s = box_w + box_h;
  const double area = box_w * box_h;
  const double m = min_overlap;

  // One corner inside, one outside: (w-r)(h-r) / (2wh - (w-r)(h-r)) = m.
  const double c1 = area * (1.0 - m) / (1.0 + m);
  const double r1 = 0.5 * (s - std::sqrt(std::max(0.0, s * s - 4.0 * c1)));

  // Both corners inside: (w-2r)(h-2r) / wh = m.
  const double c2 = (1.0 - m) * area;
  const double r2 = (2.0 * s - std::sqrt(std::max(0.0, 4.0 * s * s - 16.0 * c2))) / 8.0;

  // Both corners outside: wh / ((w+2r)(h+2r)) = m.
  const double a3 = 4.0 * m;
  const double b3 = 2.0 * m * s;
  const double c3 = (m - 1.0) * area;
  const double r3 = (-b3 + std::sqrt(std::max(0.0, b3 * b3 - 4.0 * a3 * c3))) / (2.0 * a3);

  return std::max(0.0, std::min({r1, r2, r3}));
}

int kernel_radius(double radius) {
  return std::max(1, static_cast<int>(std::floor(radius)));
}

double gaussian_weight(int dx, int dy, int radius) {
  if (std::abs(dx) > radius || std::abs(dy) > radius) return 0.0;
  const double sigma = (2.0 * radius + 1.0) / 6.0;
  return std::exp(-(double(dx) * dx + double(dy) * dy) / (2.0 * sigma * sigma));
}

void draw_gaussian(DenseGrid& grid, int channel, Cell center, int radius) {
  const int x0 = std::max(0, center.x - radius);
  const int x1 = std::min(grid.width() - 1, center.x + radius);
  const int y0 = std::max(0, center.y - radius);
  const int y1 = std::min(grid.height() - 1, center.y + radius);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double& v = grid.at(x, y, channel);
      v = std::max(v, gaussian_weight(x - center.x, y - center.y, radius));
    }
}

DenseTargetSet splat_targets(const ImageRecord& record, const LabelTree& tree,
                             const HeatmapConfig& cfg) {
  cfg.validate();
  if (!(record.dims.width > 0.0) || !(record.dims.height > 0.0))
    throw DataError(record.image_id + ": image dimensions must be positive");
  const int R = cfg.R;
  const int out_w = static_cast<int>(std::ceil(record.dims.width / R));
  const int out_h = static_cast<int>(std::ceil(record.dims.height / R));

  DenseTargetSet t;
  t.image_id = record.image_id;
  t.R = R;
  t.image_dims = record.dims;
  t.heatmap = DenseGrid(out_w, out_h, static_cast<int>(tree.num_channels()));

  for (const auto& ann : record.annotations) {
    if (ann.ignore) continue;
    const auto base_channel = tree.channel_of(ann.category);
    if (!tree.is_base(ann.category) || !base_channel)
      throw DataError(record.image_id + ": category " + std::to_string(ann.category) +
                      " is not a base class");
    const Point2 c = ann.bbox.center();
    if (!(c.x >= 0.0 && c.x < record.dims.width && c.y >= 0.0 && c.y < record.dims.height))
      throw DataError(record.image_id + ": object center outside the image");

    const Point2 scaled{c.x / R, c.y / R};
    const Cell p{static_cast<int>(std::floor(scaled.x)), static_cast<int>(std::floor(scaled.y))};
    const int radius = kernel_radius(
        gaussian_radius(ann.bbox.w / R, ann.bbox.h / R, cfg.gaussian_min_overlap));

    draw_gaussian(t.heatmap, *base_channel, p, radius);
    if (auto parent = tree.parent_of(ann.category))
      draw_gaussian(t.heatmap, *tree.channel_of(*parent), p, radius);

    t.sizes.push_back({ann.bbox.w, ann.bbox.h});
    t.offsets.push_back({scaled.x - p.x, scaled.y - p.y});
    t.peak_cells.push_back(p);
    t.object_base_class.push_back(ann.category);
  }
  t.n_objects = t.peak_cells.size();
  return t;
}

void write_grid_dump(const DenseGrid& grid, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dump: " + path.string());
  std::vector<float> buf(grid.data().begin(), grid.data().end());
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

DenseGrid read_grid_dump(const fs::path& path, int width, int height, int channels) {
  if (width <= 0 || height <= 0 || channels <= 0)
    throw DataError(path.string() + ": invalid grid shape");
  DenseGrid grid(width, height, channels);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dump: " + path.string());
  std::vector<float> buf(grid.size());
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  if (static_cast<std::size_t>(in.gcount()) != buf.size() * 4 || in.peek() != EOF)
    throw DataError(path.string() + ": dump size does not match shape [" + std::to_string(height) +
                    ", " + std::to_string(width) + ", " + std::to_string(channels) + "]");
  std::copy(buf.begin(), buf.end(), grid.data().begin());
  return grid;
}

void save_targets(const DenseTargetSet& t, const fs::path& json_path) {
  fs::path bin = json_path;
  bin.replace_extension(".bin");
  write_grid_dump(t.heatmap, bin);
  json objects = json::array();
  for (std::size_t i = 0; i < t.n_objects; ++i)
    objects.push_back({{"peak", {t.peak_cells[i].x, t.peak_cells[i].y}},
                       {"size", {t.sizes[i].w, t.sizes[i].h}},
                       {"offset", {t.offsets[i].x, t.offsets[i].y}},
                       {"category", t.object_base_class[i]}});
  json doc = {{"kind", "targets"},
              {"image_id", t.image_id},
              {"data", bin.filename().string()},
              {"dtype", "float32"},
              {"layout", "HWC"},
              {"shape", {t.heatmap.height(), t.heatmap.width(), t.heatmap.channels()}},
              {"R", t.R},
              {"image_dims", {t.image_dims.width, t.image_dims.height}},
              {"padded_dims", {t.padded_width(), t.padded_height()}},
              {"n_objects", t.n_objects},
              {"objects", objects}};
  detail::write_text_file(json_path, doc.dump(2) + "\n");
}

DenseTargetSet load_targets(const fs::path& json_path) {
  const json doc = detail::read_json_file(json_path);
  const std::string where = json_path.string();
  const auto shape = detail::get_field<std::vector<int>>(doc, "shape", where);
  if (shape.size() != 3) throw DataError(where + ": shape must be [H, W, C]");
  DenseTargetSet t;
  t.image_id = doc.value("image_id", "");
  t.R = detail::get_field<int>(doc, "R", where);
  const auto dims = detail::get_field<std::vector<double>>(doc, "image_dims", where);
  if (dims.size() != 2) throw DataError(where + ": image_dims must be [W, H]");
  t.image_dims = {dims[0], dims[1]};
  t.heatmap = read_grid_dump(json_path.parent_path() / detail::get_field<std::string>(doc, "data", where),
                             shape[1], shape[0], shape[2]);
  for (const auto& o : detail::get_field<json>(doc, "objects", where)) {
    const auto peak = detail::get_field<std::vector<int>>(o, "peak", where);
    const auto size = detail::get_field<std::vector<double>>(o, "size", where);
    const auto off = detail::get_field<std::vector<double>>(o, "offset", where);
    if (peak.size() != 2 || size.size() != 2 || off.size() != 2)
      throw DataError(where + ": object entries need 2-vectors");
    t.peak_cells.push_back({peak[0], peak[1]});
    t.sizes.push_back({size[0], size[1]});
    t.offsets.push_back({off[0], off[1]});
    t.object_base_class.push_back(detail::get_field<int>(o, "category", where));
  }
  t.n_objects = t.peak_cells.size();
  if (doc.value("n_objects", t.n_objects) != t.n_objects)
    throw DataError(where + ": n_objects disagrees with the object list");
  return t;
}

}  // namespace aerodet
