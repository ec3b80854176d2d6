#include "aerodet/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>

#include "aerodet/error.hpp"
#include "aerodet/image_io.hpp"
#include "json_util.hpp"

namespace aerodet {
namespace fs = std::filesystem;
using detail::json;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  // visDrone files occasionally end lines with a trailing comma.
  if (fields.size() == 9 && fields.back().empty()) fields.pop_back();
  return fields;
}

template <typename T>
T parse_number(std::string_view field, int index) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty())
    throw DataError("field " + std::to_string(index + 1) + " is not a number: '" +
                    std::string(field) + "'");
  return value;
}

const std::array<const char*, 5> kImageExtensions = {".jpg", ".jpeg", ".png", ".ppm", ".pgm"};

std::optional<ImageDims> dims_from_images(const fs::path& images_dir, const std::string& stem) {
  for (const char* ext : kImageExtensions) {
    const fs::path candidate = images_dir / (stem + ext);
    if (fs::exists(candidate)) return probe_image_size(candidate);
  }
  return std::nullopt;
}

std::optional<std::string> image_path(const fs::path& images_dir, const std::string& stem) {
  for (const char* ext : kImageExtensions) {
    const fs::path candidate = images_dir / (stem + ext);
    if (fs::exists(candidate)) return candidate.string();
  }
  return std::nullopt;
}

std::map<std::string, ImageDims> read_sizes_file(const fs::path& path) {
  const json doc = detail::read_json_file(path);
  if (!doc.is_object()) throw DataError(path.string() + ": expected an object of [w, h] pairs");
  std::map<std::string, ImageDims> sizes;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_array() || value.size() != 2)
      throw DataError(path.string() + ": size of '" + key + "' must be [width, height]");
    sizes[key] = {value[0].get<double>(), value[1].get<double>()};
  }
  return sizes;
}

}  // namespace

std::optional<ObjectAnnotation> parse_visdrone_line(std::string_view line, const LabelTree& tree) {
  const auto fields = split_fields(trim(line));
  if (fields.size() != 8)
    throw DataError("expected 8 comma-separated fields, found " + std::to_string(fields.size()));
  ObjectAnnotation ann;
  ann.bbox = {parse_number<double>(fields[0], 0), parse_number<double>(fields[1], 1),
              parse_number<double>(fields[2], 2), parse_number<double>(fields[3], 3)};
  (void)parse_number<double>(fields[4], 4);
  ann.category = parse_number<int>(fields[5], 5);
  ann.truncation = parse_number<int>(fields[6], 6);
  ann.occlusion = parse_number<int>(fields[7], 7);
  if (!tree.known(ann.category))
    throw DataError("unknown category id " + std::to_string(ann.category));
  ann.ignore = tree.ignored(ann.category);
  if (!(ann.bbox.w > 0.0) || !(ann.bbox.h > 0.0)) return std::nullopt;
  return ann;
}

void clamp_annotations(ImageRecord& record) {
  std::vector<ObjectAnnotation> kept;
  kept.reserve(record.annotations.size());
  for (auto& ann : record.annotations) {
    if (auto clipped = clamp_to_image(ann.bbox, record.dims)) {
      ann.bbox = *clipped;
      kept.push_back(std::move(ann));
    }
  }
  record.annotations = std::move(kept);
}

ImageRecord load_visdrone_file(const fs::path& file, const ImageDims& dims, const LabelTree& tree) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open annotation file: " + file.string());
  ImageRecord record;
  record.image_id = file.stem().string();
  record.dims = dims;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      if (auto ann = parse_visdrone_line(line, tree)) record.annotations.push_back(*ann);
    } catch (const DataError& e) {
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  clamp_annotations(record);
  return record;
}

std::vector<ImageRecord> load_visdrone(const fs::path& dir, const LabelTree& tree,
                                       const VisdroneOptions& options) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  const fs::path ann_dir = fs::is_directory(dir / "annotations") ? dir / "annotations" : dir;
  std::optional<fs::path> images_dir = options.images_dir;
  if (!images_dir && fs::is_directory(dir / "images")) images_dir = dir / "images";

  std::map<std::string, ImageDims> sizes;
  if (options.sizes_file) sizes = read_sizes_file(*options.sizes_file);
  else if (fs::exists(dir / "image_sizes.json")) sizes = read_sizes_file(dir / "image_sizes.json");

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(ann_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::vector<ImageRecord> records;
  records.reserve(files.size());
  for (const auto& file : files) {
    const std::string stem = file.stem().string();
    std::optional<ImageDims> dims;
    if (auto it = sizes.find(stem); it != sizes.end()) dims = it->second;
    else if (images_dir) dims = dims_from_images(*images_dir, stem);
    if (!dims || dims->width <= 0 || dims->height <= 0)
      throw DataError("cannot determine image size for " + file.string() +
                      " (provide images or an image_sizes.json)");
    ImageRecord record = load_visdrone_file(file, *dims, tree);
    if (images_dir) record.path = image_path(*images_dir, stem);
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<ImageRecord> parse_coco(std::string_view text, const LabelTree& tree) {
  const json doc = detail::parse_json(text, "COCO document");
  if (!doc.is_object() || !doc.contains("images") || !doc.contains("annotations"))
    throw DataError("COCO document needs 'images' and 'annotations' arrays");

  std::vector<ImageRecord> records;
  std::map<std::string, std::size_t> by_id;
  for (const auto& img : doc.at("images")) {
    const std::string where = "COCO image";
    if (!img.contains("id")) throw DataError(where + ": missing field 'id'");
    const std::string key = img.at("id").dump();
    ImageRecord record;
    if (img.contains("file_name")) record.path = img.at("file_name").get<std::string>();
    if (img.contains("name")) record.image_id = img.at("name").get<std::string>();
    else if (record.path) record.image_id = fs::path(*record.path).stem().string();
    else record.image_id = img.at("id").is_string() ? img.at("id").get<std::string>() : key;
    record.dims = {detail::get_field<double>(img, "width", where + " " + key),
                   detail::get_field<double>(img, "height", where + " " + key)};
    if (record.dims.width <= 0 || record.dims.height <= 0)
      throw DataError("COCO image " + key + ": non-positive dimensions");
    if (!by_id.emplace(key, records.size()).second)
      throw DataError("COCO image id " + key + " appears twice");
    records.push_back(std::move(record));
  }

  for (const auto& a : doc.at("annotations")) {
    const std::string where = "COCO annotation " + (a.contains("id") ? a.at("id").dump() : "?");
    if (!a.contains("image_id")) throw DataError(where + ": missing field 'image_id'");
    const std::string image_key = a.at("image_id").dump();
    auto it = by_id.find(image_key);
    if (it == by_id.end())
      throw DataError(where + ": references missing image id " + image_key);
    const auto box = detail::get_field<std::vector<double>>(a, "bbox", where);
    if (box.size() != 4) throw DataError(where + ": bbox must have 4 values");
    ObjectAnnotation ann;
    ann.bbox = {box[0], box[1], box[2], box[3]};
    ann.category = detail::get_field<int>(a, "category_id", where);
    if (!tree.known(ann.category))
      throw DataError(where + ": unknown category id " + std::to_string(ann.category));
    if (a.contains("truncation")) ann.truncation = a.at("truncation").get<int>();
    if (a.contains("occlusion")) ann.occlusion = a.at("occlusion").get<int>();
    if (a.contains("ignore")) {
      const auto& ig = a.at("ignore");
      ann.ignore = ig.is_boolean() ? ig.get<bool>() : ig.get<int>() != 0;
    } else {
      ann.ignore = tree.ignored(ann.category) || a.value("iscrowd", 0) != 0;
    }
    if (!(ann.bbox.w > 0.0) || !(ann.bbox.h > 0.0)) continue;
    records[it->second].annotations.push_back(ann);
  }
  for (auto& r : records) clamp_annotations(r);
  return records;
}

std::vector<ImageRecord> load_coco(const fs::path& file, const LabelTree& tree) {
  try {
    return parse_coco(detail::read_text_file(file), tree);
  } catch (const DataError& e) {
    throw DataError(file.string() + ": " + e.what());
  }
}

std::string to_coco(const std::vector<ImageRecord>& records, const LabelTree& tree) {
  json images = json::array();
  json annotations = json::array();
  int ann_id = 1;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    json img = {{"id", i + 1}, {"name", r.image_id}, {"width", r.dims.width},
                {"height", r.dims.height}};
    if (r.path) img["file_name"] = *r.path;
    images.push_back(std::move(img));
    for (const auto& a : r.annotations) {
      json ann = {{"id", ann_id++},
                  {"image_id", i + 1},
                  {"category_id", a.category},
                  {"bbox", {a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h}},
                  {"area", a.bbox.area()},
                  {"iscrowd", a.ignore ? 1 : 0},
                  {"ignore", a.ignore}};
      if (a.truncation) ann["truncation"] = *a.truncation;
      if (a.occlusion) ann["occlusion"] = *a.occlusion;
      annotations.push_back(std::move(ann));
    }
  }
  json categories = json::array();
  for (const auto& c : tree.base_classes()) {
    json cat = {{"id", c.id}, {"name", c.name}};
    if (auto parent = tree.parent_of(c.id)) cat["supercategory"] = tree.name_of(*parent);
    categories.push_back(std::move(cat));
  }
  for (const auto& c : tree.region_classes()) categories.push_back({{"id", c.id}, {"name", c.name}});
  json doc = {{"images", images}, {"annotations", annotations}, {"categories", categories}};
  return doc.dump(2) + "\n";
}

void save_coco(const std::vector<ImageRecord>& records, const LabelTree& tree, const fs::path& file) {
  detail::write_text_file(file, to_coco(records, tree));
}

}  // namespace aerodet
