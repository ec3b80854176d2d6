#include "aerodet/config.hpp"

#include <set>
#include <type_traits>

#include "aerodet/error.hpp"
#include "json_util.hpp"

namespace aerodet {
using detail::json;
namespace fs = std::filesystem;

namespace {

template <class V> void visit(V& v, NmmConfig& c) {
  v("w_b", c.w_b);
  v("h_b", c.h_b);
  v("tau", c.tau);
  v("small_max_side", c.small_max_side);
}
template <class V> void visit(V& v, RefineConfig& c) {
  v("k", c.k);
  v("pr_overlap", c.pr_overlap);
}
template <class V> void visit(V& v, HeatmapConfig& c) {
  v("R", c.R);
  v("gaussian_min_overlap", c.gaussian_min_overlap);
}
template <class V> void visit(V& v, LossConfig& c) {
  v("alpha", c.alpha);
  v("beta", c.beta);
  v("lambda_shm", c.lambda_shm);
  v("lambda_wh", c.lambda_wh);
  v("lambda_off", c.lambda_off);
  v("clamp_eps", c.clamp_eps);
}
template <class V> void visit(V& v, FuseConfig& c) {
  v("peaks_per_chip", c.peaks_per_chip);
  v("max_detections", c.max_detections);
  v("nms_iou", c.nms_iou);
  v("boundary_delta", c.boundary_delta);
  v("boundary_overlap", c.boundary_overlap);
}
template <class V> void visit(V& v, EvalConfig& c) {
  v("iou_thresholds", c.iou_thresholds);
  v("recall_points", c.recall_points);
  v("per_image_cap", c.per_image_cap);
}
template <class V> void visit(V& v, MrmConfig& c) {
  v("k", c.k);
  v("mask_coverage", c.mask_coverage);
  v("max_overlap", c.max_overlap);
  v("scale_jitter", c.scale_jitter);
  v("retries_per_paste", c.retries_per_paste);
  v("ground_truth_mask", c.ground_truth_mask);
}
template <class V> void visit(V& v, RarityRule& c) {
  v("rule", c.kind);
  v("categories", c.categories);
}
template <class V> void visit(V& v, SceneConfig& c) {
  v("dims", c.dims);
  v("n_dense_clusters", c.n_dense_clusters);
  v("objects_per_cluster", c.objects_per_cluster);
  v("small_size", c.small_size);
  v("cluster_spread", c.cluster_spread);
  v("n_large", c.n_large);
  v("large_size", c.large_size);
  v("class_distribution", c.class_distribution);
  v("max_attempts", c.max_attempts);
}
template <class V> void visit(V& v, OracleConfig& c) {
  v("center_jitter_sd", c.center_jitter_sd);
  v("size_jitter_sd", c.size_jitter_sd);
  v("miss_rate", c.miss_rate);
  v("fp_rate_per_image", c.fp_rate_per_image);
  v("fp_size", c.fp_size);
  v("score_model", c.score_model);
}
template <class V> void visit(V& v, DatasetConfig& c) {
  v("format", c.format);
  v("path", c.path);
  v("images_dir", c.images_dir);
  v("sizes_file", c.sizes_file);
  v("label_tree", c.label_tree);
  v("ignore_others", c.ignore_others);
}

// ---- json <-> value ----

json to_value(const Range& r) { return json::array({r.lo, r.hi}); }
json to_value(const IntRange& r) { return json::array({r.lo, r.hi}); }
json to_value(const ImageDims& d) { return json::array({d.width, d.height}); }
json to_value(ScoreModel m) { return m == ScoreModel::kJitter ? "jitter" : "constant"; }
json to_value(RarityRule::Kind k) { return k == RarityRule::Kind::kBelowMedian ? "below_median" : "explicit"; }
json to_value(const std::map<int, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[std::to_string(k)] = v;
  return j;
}
template <class T> json to_value(const T& v) { return json(v); }

[[noreturn]] void bad(const std::string& what) { throw ConfigError(what); }

void from_value(const json& j, bool& v, const std::string& where) {
  if (!j.is_boolean()) bad(where + ": expected a boolean");
  v = j.get<bool>();
}
void from_value(const json& j, std::string& v, const std::string& where) {
  if (!j.is_string()) bad(where + ": expected a string");
  v = j.get<std::string>();
}
template <class T>
  requires std::is_arithmetic_v<T>
void from_value(const json& j, T& v, const std::string& where) {
  if (!j.is_number()) bad(where + ": expected a number");
  if constexpr (std::is_integral_v<T>) {
    if (!j.is_number_integer()) bad(where + ": expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)
        bad(where + ": expected a non-negative integer");
    }
  }
  v = j.get<T>();
}
void from_value(const json& j, Range& r, const std::string& where) {
  if (!j.is_array() || j.size() != 2) bad(where + ": expected [lo, hi]");
  from_value(j[0], r.lo, where);
  from_value(j[1], r.hi, where);
}
void from_value(const json& j, IntRange& r, const std::string& where) {
  if (!j.is_array() || j.size() != 2) bad(where + ": expected [lo, hi]");
  from_value(j[0], r.lo, where);
  from_value(j[1], r.hi, where);
}
void from_value(const json& j, ImageDims& d, const std::string& where) {
  if (!j.is_array() || j.size() != 2) bad(where + ": expected [width, height]");
  from_value(j[0], d.width, where);
  from_value(j[1], d.height, where);
}
void from_value(const json& j, ScoreModel& m, const std::string& where) {
  std::string s;
  from_value(j, s, where);
  if (s == "jitter") m = ScoreModel::kJitter;
  else if (s == "constant") m = ScoreModel::kConstant;
  else bad(where + ": expected \"jitter\" or \"constant\"");
}
void from_value(const json& j, RarityRule::Kind& k, const std::string& where) {
  std::string s;
  from_value(j, s, where);
  if (s == "below_median") k = RarityRule::Kind::kBelowMedian;
  else if (s == "explicit") k = RarityRule::Kind::kExplicit;
  else bad(where + ": expected \"below_median\" or \"explicit\"");
}
void from_value(const json& j, std::vector<double>& v, const std::string& where) {
  if (!j.is_array()) bad(where + ": expected an array");
  v.clear();
  for (const auto& e : j) from_value(e, v.emplace_back(), where);
}
void from_value(const json& j, std::set<int>& v, const std::string& where) {
  if (!j.is_array()) bad(where + ": expected an array");
  v.clear();
  for (const auto& e : j) {
    int x = 0;
    from_value(e, x, where);
    v.insert(x);
  }
}
void from_value(const json& j, std::map<int, double>& m, const std::string& where) {
  if (!j.is_object()) bad(where + ": expected an object of category -> weight");
  m.clear();
  for (const auto& [k, val] : j.items()) {
    int id = 0;
    try {
      std::size_t used = 0;
      id = std::stoi(k, &used);
      if (used != k.size()) throw std::invalid_argument(k);
    } catch (const std::exception&) {
      bad(where + ": category key '" + k + "' is not an integer");
    }
    from_value(val, m[id], where);
  }
}

struct Reader {
  const json& obj;
  std::string section;
  std::set<std::string> known;

  template <class T> void operator()(const char* key, T& v) {
    known.insert(key);
    if (obj.contains(key)) from_value(obj.at(key), v, section + "." + key);
  }
  void finish() const {
    for (const auto& [k, _] : obj.items())
      if (!known.contains(k)) bad("unknown config key '" + section + "." + k + "'");
  }
};

struct Writer {
  json& obj;
  template <class T> void operator()(const char* key, const T& v) { obj[key] = to_value(v); }
};

template <class T> void read_section(const json& doc, const char* name, T& target) {
  if (!doc.contains(name)) return;
  const json& sec = doc.at(name);
  if (!sec.is_object()) bad(std::string("config section '") + name + "' must be an object");
  Reader r{sec, name, {}};
  visit(r, target);
  r.finish();
}

template <class T> void write_section(json& doc, const char* name, const T& source) {
  json sec = json::object();
  Writer w{sec};
  visit(w, const_cast<T&>(source));
  doc[name] = std::move(sec);
}

}  // namespace

void PipelineConfig::validate() const {
  nmm.validate();
  refine.validate();
  heatmap.validate();
  loss.validate();
  fuse.validate();
  eval.validate();
  mrm.validate();
  scene.validate();
  oracle.validate();
  if (dataset.format != "auto" && dataset.format != "visdrone" && dataset.format != "coco")
    throw ConfigError("dataset.format must be \"auto\", \"visdrone\" or \"coco\"");
}

PipelineConfig parse_pipeline_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  static const std::set<std::string> sections = {"nmm",   "refine", "heatmap", "loss",   "fuse", "eval", "mrm",
                                                 "rarity", "scene", "oracle",  "dataset", "seed", "jobs"};
  for (const auto& [k, _] : doc.items())
    if (!sections.contains(k)) bad("unknown config key '" + k + "'");

  PipelineConfig cfg;
  read_section(doc, "nmm", cfg.nmm);
  read_section(doc, "refine", cfg.refine);
  read_section(doc, "heatmap", cfg.heatmap);
  read_section(doc, "loss", cfg.loss);
  read_section(doc, "fuse", cfg.fuse);
  read_section(doc, "eval", cfg.eval);
  read_section(doc, "mrm", cfg.mrm);
  read_section(doc, "rarity", cfg.rarity);
  read_section(doc, "scene", cfg.scene);
  read_section(doc, "oracle", cfg.oracle);
  read_section(doc, "dataset", cfg.dataset);
  if (doc.contains("seed")) from_value(doc["seed"], cfg.seed, "seed");
  if (doc.contains("jobs")) from_value(doc["jobs"], cfg.jobs, "jobs");
  cfg.validate();
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::string text;
  try {
    text = detail::read_text_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  try {
    return parse_pipeline_config(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string pipeline_config_to_json(const PipelineConfig& cfg) {
  json doc = json::object();
  write_section(doc, "nmm", cfg.nmm);
  write_section(doc, "refine", cfg.refine);
  write_section(doc, "heatmap", cfg.heatmap);
  write_section(doc, "loss", cfg.loss);
  write_section(doc, "fuse", cfg.fuse);
  write_section(doc, "eval", cfg.eval);
  write_section(doc, "mrm", cfg.mrm);
  write_section(doc, "rarity", cfg.rarity);
  write_section(doc, "scene", cfg.scene);
  write_section(doc, "oracle", cfg.oracle);
  write_section(doc, "dataset", cfg.dataset);
  doc["seed"] = cfg.seed;
  doc["jobs"] = cfg.jobs;
  return doc.dump(2);
}

LabelTree resolve_label_tree(const DatasetConfig& cfg) {
  if (cfg.label_tree == "visdrone") return visdrone_label_tree(cfg.ignore_others);
  if (cfg.label_tree == "uavdt") return uavdt_label_tree();
  return load_label_tree(cfg.label_tree);
}

std::vector<ImageRecord> load_dataset(const DatasetConfig& cfg, const LabelTree& tree) {
  if (cfg.path.empty()) throw ConfigError("no dataset path given");
  const fs::path p = cfg.path;
  if (!fs::exists(p)) throw DataError("dataset not found: " + p.string());
  std::string format = cfg.format;
  if (format == "auto") format = fs::is_directory(p) ? "visdrone" : "coco";
  if (format == "coco") return load_coco(p, tree);
  VisdroneOptions opts;
  if (!cfg.images_dir.empty()) opts.images_dir = cfg.images_dir;
  if (!cfg.sizes_file.empty()) opts.sizes_file = cfg.sizes_file;
  return load_visdrone(p, tree, opts);
}

}  // namespace aerodet
