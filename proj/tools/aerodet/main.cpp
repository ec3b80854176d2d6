// aerodet command-line driver.
#include <CLI11.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "aerodet/config.hpp"
#include "aerodet/error.hpp"
#include "aerodet/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aerodet;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<unsigned> jobs;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct DatasetFlags {
  std::string input;
  std::string format;
  std::string images_dir;
  std::string sizes_file;
  std::string label_tree;
};

void add_dataset_flags(CLI::App* cmd, DatasetFlags& f, const std::string& input_name = "--input") {
  cmd->add_option(input_name, f.input, "Dataset: visDrone directory or COCO JSON file");
  cmd->add_option("--format", f.format, "Dataset format")->check(CLI::IsMember({"auto", "visdrone", "coco"}));
  cmd->add_option("--images-dir", f.images_dir, "Image directory (visDrone)");
  cmd->add_option("--sizes-file", f.sizes_file, "JSON {image_id: [width, height]} (visDrone)");
  cmd->add_option("--label-tree", f.label_tree, "visdrone, uavdt, or a label tree JSON file");
}

void apply(DatasetConfig& d, const DatasetFlags& f) {
  if (!f.input.empty()) d.path = f.input;
  if (!f.format.empty()) d.format = f.format;
  if (!f.images_dir.empty()) d.images_dir = f.images_dir;
  if (!f.sizes_file.empty()) d.sizes_file = f.sizes_file;
  if (!f.label_tree.empty()) d.label_tree = f.label_tree;
}

template <class T> void override_if(T& target, const std::optional<T>& v) {
  if (v) target = *v;
}

unsigned resolve_jobs(const PipelineConfig& cfg) { return cfg.jobs == 0 ? default_jobs() : cfg.jobs; }

std::string meta_json(const std::string& command, const PipelineConfig& cfg, const json& extra = json::object()) {
  json meta = {{"tool", "aerodet"}, {"command", command}, {"config", json::parse(pipeline_config_to_json(cfg))}};
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  return meta.dump();
}

/// Writes to `path`, or stdout when empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  const fs::path p = path;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

fs::path require_out_dir(const GlobalOptions& g, const char* command) {
  if (g.out.empty()) throw ConfigError(std::string(command) + " needs --out <directory>");
  fs::create_directories(g.out);
  return g.out;
}

std::string file_stem_for(const std::string& image_id) {
  std::string s = image_id;
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  return s;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Per-image seed that does not depend on dataset order.
std::uint64_t image_seed(std::uint64_t seed, const std::string& image_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(fnv1a(image_id)), static_cast<std::uint32_t>(fnv1a(image_id) >> 32)};
  std::mt19937_64 rng(seq);
  return rng();
}

// ---------------------------------------------------------------- nmm

struct NmmFlags {
  DatasetFlags data;
  std::optional<double> tau, chip_size, small_max_side;
};

int run_nmm(const GlobalOptions& g, PipelineConfig cfg, const NmmFlags& f) {
  apply(cfg.dataset, f.data);
  override_if(cfg.nmm.tau, f.tau);
  if (f.chip_size) cfg.nmm.w_b = cfg.nmm.h_b = *f.chip_size;
  override_if(cfg.nmm.small_max_side, f.small_max_side);
  cfg.validate();

  const LabelTree tree = resolve_label_tree(cfg.dataset);
  const auto records = load_dataset(cfg.dataset, tree);
  const ClusterDataset result = generate_cluster_ground_truth(records, cfg.nmm, resolve_jobs(cfg));

  json hist = json::object();
  std::size_t total = 0;
  for (const auto& [count, images] : result.count_histogram()) hist[std::to_string(count)] = images;
  for (const auto& img : result.images) total += img.clusters.size();
  const json summary = {{"images", result.images.size()}, {"clusters", total}, {"cluster_count_histogram", hist}};
  std::cerr << "nmm: " << result.images.size() << " images, " << total << " clusters\n";
  emit(g.out, cluster_dataset_to_json(result.images, meta_json("nmm", cfg, {{"summary", summary}})));
  return 0;
}

// ---------------------------------------------------------------- refine

struct RefineFlags {
  std::string input;
  std::optional<std::size_t> k;
  std::optional<double> pr_overlap;
};

int run_refine(const GlobalOptions& g, PipelineConfig cfg, const RefineFlags& f) {
  override_if(cfg.refine.k, f.k);
  override_if(cfg.refine.pr_overlap, f.pr_overlap);
  cfg.validate();
  if (f.input.empty()) throw ConfigError("refine needs --input <cluster JSON>");

  auto images = load_cluster_json(f.input);
  std::size_t before = 0, after = 0;
  for (auto& img : images) {
    std::vector<ClusterCandidate> cands;
    for (std::size_t i = 0; i < img.clusters.size(); ++i) {
      // Without predictor scores, denser clusters rank first.
      const double score = i < img.scores.size() ? img.scores[i] : static_cast<double>(img.clusters[i].members.size());
      cands.push_back({img.clusters[i].window, score});
    }
    const auto kept = position_refinement(take_topk(cands, cfg.refine.k), cfg.refine.pr_overlap);
    std::vector<char> used(cands.size(), 0);
    ImageClusters out{img.image_id, img.dims, {}, {}};
    for (const auto& c : kept)
      for (std::size_t i = 0; i < cands.size(); ++i)
        if (!used[i] && cands[i] == c) {
          used[i] = 1;
          out.clusters.push_back(img.clusters[i]);
          out.scores.push_back(c.score);
          break;
        }
    before += cands.size();
    after += out.clusters.size();
    img = std::move(out);
  }
  std::cerr << "refine: " << before << " candidates -> " << after << " kept\n";
  emit(g.out, cluster_dataset_to_json(images, meta_json("refine", cfg, {{"candidates_in", before}, {"kept", after}})));
  return 0;
}

// ---------------------------------------------------------------- targets

struct TargetsFlags {
  DatasetFlags data;
  std::vector<std::string> image_ids;
  std::optional<int> R;
  std::optional<double> min_overlap;
};

int run_targets(const GlobalOptions& g, PipelineConfig cfg, const TargetsFlags& f) {
  apply(cfg.dataset, f.data);
  override_if(cfg.heatmap.R, f.R);
  override_if(cfg.heatmap.gaussian_min_overlap, f.min_overlap);
  cfg.validate();
  const fs::path out = require_out_dir(g, "targets");

  const LabelTree tree = resolve_label_tree(cfg.dataset);
  auto records = load_dataset(cfg.dataset, tree);
  if (!f.image_ids.empty()) {
    std::vector<ImageRecord> chosen;
    for (const auto& id : f.image_ids) {
      auto it = std::find_if(records.begin(), records.end(), [&](const ImageRecord& r) { return r.image_id == id; });
      if (it == records.end()) throw DataError("image '" + id + "' not in dataset");
      chosen.push_back(*it);
    }
    records = std::move(chosen);
  }
  std::vector<std::string> files(records.size());
  parallel_for(records.size(), resolve_jobs(cfg), [&](std::size_t i) {
    const DenseTargetSet t = splat_targets(records[i], tree, cfg.heatmap);
    files[i] = file_stem_for(records[i].image_id) + ".json";
    save_targets(t, out / files[i]);
  });
  json index = {{"targets", files}, {"meta", json::parse(meta_json("targets", cfg))}};
  emit((out / "index.json").string(), index.dump(2) + "\n");
  std::cerr << "targets: wrote " << files.size() << " target sets to " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- loss-check

struct LossFlags {
  std::string targets;
  std::string prediction;
  bool grad_check = false;
  double step = 1e-5;
  double tolerance = 1e-4;
};

int run_loss_check(const GlobalOptions& g, PipelineConfig cfg, const LossFlags& f) {
  cfg.validate();
  if (f.targets.empty()) throw ConfigError("loss-check needs --targets <sidecar JSON>");
  const DenseTargetSet target = load_targets(f.targets);
  const Prediction pred = f.prediction.empty() ? ideal_prediction(target) : load_prediction(f.prediction);
  const LossReport report = evaluate_loss(target, pred, cfg.loss);

  json doc = {{"image_id", target.image_id},
              {"prediction", f.prediction.empty() ? "ideal" : f.prediction},
              {"loss", {{"shm", report.parts.shm}, {"wh", report.parts.wh}, {"off", report.parts.off}, {"total", report.total}}}};
  int rc = 0;
  if (f.grad_check) {
    const double err = focal_grad_check(target, pred.heatmap, cfg.loss, f.step);
    const bool pass = err <= f.tolerance;
    doc["grad_check"] = {{"max_rel_error", err}, {"step", f.step}, {"tolerance", f.tolerance}, {"pass", pass}};
    if (!pass) {
      std::cerr << "loss-check: gradient check failed (" << err << " > " << f.tolerance << ")\n";
      rc = 2;
    }
  }
  doc["meta"] = json::parse(meta_json("loss-check", cfg));
  emit(g.out, doc.dump(2) + "\n");
  return rc;
}

// ---------------------------------------------------------------- fuse

struct FuseFlags {
  std::string input;
  std::optional<std::size_t> max_detections;
  std::optional<double> nms_iou, boundary_delta;
};

int run_fuse(const GlobalOptions& g, PipelineConfig cfg, const FuseFlags& f) {
  override_if(cfg.fuse.max_detections, f.max_detections);
  override_if(cfg.fuse.nms_iou, f.nms_iou);
  override_if(cfg.fuse.boundary_delta, f.boundary_delta);
  cfg.validate();
  if (f.input.empty()) throw ConfigError("fuse needs --input <chip results JSON>");

  const auto chips = load_chip_results(f.input);
  std::vector<ImageDetections> out(chips.size());
  parallel_for(chips.size(), resolve_jobs(cfg),
               [&](std::size_t i) { out[i] = {chips[i].image_id, fuse_image(chips[i], cfg.fuse)}; });
  std::size_t n = 0;
  for (const auto& o : out) n += o.detections.size();
  std::cerr << "fuse: " << out.size() << " images, " << n << " detections\n";
  emit(g.out, detections_to_json(out, meta_json("fuse", cfg)));
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalFlags {
  DatasetFlags gt;
  std::string detections;
  std::string csv;
  std::optional<std::size_t> per_image_cap;
};

int run_eval(const GlobalOptions& g, PipelineConfig cfg, const EvalFlags& f) {
  apply(cfg.dataset, f.gt);
  override_if(cfg.eval.per_image_cap, f.per_image_cap);
  cfg.validate();
  if (f.detections.empty()) throw ConfigError("eval needs --detections <JSON>");

  const LabelTree tree = resolve_label_tree(cfg.dataset);
  const auto gts = load_dataset(cfg.dataset, tree);
  const auto dets = load_detections(f.detections);
  const EvalSummary s = ap_summary(dets, gts, cfg.eval, resolve_jobs(cfg));
  if (!f.csv.empty()) emit(f.csv, summary_to_csv(s, &tree));
  std::cerr << "eval: AP " << s.ap << "  AP50 " << s.ap50 << "  AP75 " << s.ap75 << "\n";
  emit(g.out, summary_to_json(s, &tree, meta_json("eval", cfg)));
  return 0;
}

// ---------------------------------------------------------------- mrm-plan

struct MrmPlanFlags {
  DatasetFlags data;
  std::string mask_dir;
  std::string mask_fill;
  std::string pool;
  std::string pool_out;
  std::optional<std::size_t> k;
  bool gt_mask = false;
  std::vector<int> rare;
};

std::optional<fs::path> find_mask(const fs::path& dir, const std::string& image_id) {
  for (const char* ext : {".png", ".pgm", ".ppm"}) {
    const fs::path p = dir / (image_id + ext);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

fs::path dataset_image_root(const DatasetConfig& d) {
  if (!d.images_dir.empty()) return d.images_dir;
  const fs::path p = d.path;
  return fs::is_directory(p) ? p : p.parent_path();
}

int run_mrm_plan(const GlobalOptions& g, PipelineConfig cfg, const MrmPlanFlags& f) {
  apply(cfg.dataset, f.data);
  override_if(cfg.mrm.k, f.k);
  if (f.gt_mask) cfg.mrm.ground_truth_mask = true;
  if (!f.rare.empty()) {
    cfg.rarity.kind = RarityRule::Kind::kExplicit;
    cfg.rarity.categories = {f.rare.begin(), f.rare.end()};
  }
  cfg.validate();
  if (f.mask_dir.empty() && f.mask_fill.empty())
    throw ConfigError("mrm-plan needs --mask-dir and/or --mask-fill");

  const LabelTree tree = resolve_label_tree(cfg.dataset);
  const auto records = load_dataset(cfg.dataset, tree);
  std::vector<std::string> warnings;
  std::vector<PoolEntry> pool;
  if (!f.pool.empty()) {
    pool = load_pool_manifest(f.pool, false);
  } else {
    pool = build_object_pool(records, tree, cfg.rarity, &warnings);
    if (!f.pool_out.empty()) {
      attach_pool_pixels(pool, records, dataset_image_root(cfg.dataset), &warnings);
      save_pool_manifest(pool, f.pool_out);
    }
  }
  const ReferenceSizes refs = reference_sizes(records, tree);

  std::vector<PastePlan> plans(records.size());
  parallel_for(records.size(), resolve_jobs(cfg), [&](std::size_t i) {
    const ImageRecord& r = records[i];
    MaskRaster mask;
    std::optional<fs::path> file = f.mask_dir.empty() ? std::nullopt : find_mask(f.mask_dir, r.image_id);
    if (file) {
      mask = read_mask(*file);
    } else if (!f.mask_fill.empty()) {
      mask = MaskRaster(static_cast<int>(std::lround(r.dims.width)), static_cast<int>(std::lround(r.dims.height)),
                        f.mask_fill == "allowed");
    } else {
      throw DataError("no mask for image '" + r.image_id + "' in " + f.mask_dir);
    }
    plans[i] = plan_pastes(r, mask, pool, tree, cfg.mrm, image_seed(cfg.seed, r.image_id), &refs);
  });

  std::size_t accepted = 0, warned = 0;
  for (const auto& p : plans) {
    accepted += p.pastes.size();
    warned += p.warnings.size();
  }
  for (const auto& w : warnings) std::cerr << "mrm-plan: warning: " << w << "\n";
  std::cerr << "mrm-plan: " << accepted << " pastes planned over " << plans.size() << " images, " << warned
            << " shortfall warnings\n";
  emit(g.out, plans_to_json(plans, meta_json("mrm-plan", cfg, {{"pool_size", pool.size()}, {"warnings", warnings}})));
  return 0;
}

// ---------------------------------------------------------------- mrm-composite

struct MrmCompositeFlags {
  DatasetFlags data;
  std::string plans;
  std::string pool;
};

int run_mrm_composite(const GlobalOptions& g, PipelineConfig cfg, const MrmCompositeFlags& f) {
  apply(cfg.dataset, f.data);
  cfg.validate();
  if (f.plans.empty() || f.pool.empty()) throw ConfigError("mrm-composite needs --plans and --pool");
  const fs::path out = require_out_dir(g, "mrm-composite");

  const LabelTree tree = resolve_label_tree(cfg.dataset);
  const auto records = load_dataset(cfg.dataset, tree);
  const auto plans = load_plans(f.plans);
  const auto pool = load_pool_manifest(f.pool, true);
  const fs::path root = dataset_image_root(cfg.dataset);

  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < records.size(); ++i) by_id.emplace(records[i].image_id, i);
  for (const auto& p : plans)
    if (!by_id.contains(p.image_id)) throw DataError("plan references unknown image '" + p.image_id + "'");

  std::vector<ImageRecord> augmented(plans.size());
  std::vector<std::vector<std::string>> warnings(plans.size());
  parallel_for(plans.size(), resolve_jobs(cfg), [&](std::size_t i) {
    const ImageRecord& r = records[by_id.at(plans[i].image_id)];
    if (!r.path) throw DataError("no image path for '" + r.image_id + "'");
    fs::path src = *r.path;
    if (src.is_relative()) src = root / src;
    const CompositeResult res = composite(read_image(src), r, plans[i], pool);
    const std::string name = file_stem_for(r.image_id) + ".png";
    write_image(res.image, out / name);
    augmented[i] = res.record;
    augmented[i].path = name;
    warnings[i] = res.warnings;
  });
  json report = json::array();
  for (std::size_t i = 0; i < plans.size(); ++i) {
    for (const auto& w : warnings[i]) std::cerr << "mrm-composite: " << plans[i].image_id << ": " << w << "\n";
    report.push_back({{"image_id", plans[i].image_id}, {"warnings", warnings[i]}});
  }
  save_coco(augmented, tree, out / "annotations.json");
  emit((out / "report.json").string(),
       json{{"images", report}, {"meta", json::parse(meta_json("mrm-composite", cfg))}}.dump(2) + "\n");
  std::cerr << "mrm-composite: wrote " << plans.size() << " images to " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- synth

struct SynthFlags {
  int count = 1;
  bool raster = false;
  bool chips = true;
};

int run_synth(const GlobalOptions& g, PipelineConfig cfg, const SynthFlags& f) {
  cfg.validate();
  if (f.count < 0) throw ConfigError("synth: --count must be non-negative");
  const fs::path out = require_out_dir(g, "synth");
  if (f.raster) fs::create_directories(out / "images");
  const LabelTree tree = resolve_label_tree(cfg.dataset);
  for (const auto& [cat, w] : cfg.scene.class_distribution)
    if (!tree.is_base(cat)) throw ConfigError("synth: category " + std::to_string(cat) + " is not a base class");

  const std::size_t n = static_cast<std::size_t>(f.count);
  std::vector<ImageRecord> records(n);
  std::vector<ImageChipResults> chips(n);
  parallel_for(n, resolve_jobs(cfg), [&](std::size_t i) {
    SceneConfig sc = cfg.scene;
    sc.seed = cfg.seed + i;
    char id[32];
    std::snprintf(id, sizeof id, "scene_%05zu", i);
    records[i] = generate_scene(sc, id);
    if (f.raster) {
      records[i].path = std::string("images/") + id + ".png";
      write_image(render_scene(records[i]), out / *records[i].path);
    }
    if (f.chips) {
      OracleConfig oc = cfg.oracle;
      oc.seed = cfg.seed;
      chips[i] = oracle_chip_results(records[i], cfg.nmm, oc);
    }
  });
  save_coco(records, tree, out / "dataset.json");
  if (f.chips) emit((out / "chips.json").string(), chip_results_to_json(chips, meta_json("synth", cfg)));
  emit((out / "config.json").string(), pipeline_config_to_json(cfg) + "\n");
  std::cerr << "synth: wrote " << n << " scenes to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aerodet: coarse-to-fine aerial detection pipeline tools"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "Pipeline config JSON");
  app.add_option("--jobs", g.jobs, "Worker threads (0 = all cores)");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out", g.out, "Output file or directory (stdout when omitted)");

  NmmFlags nmm_f;
  auto* nmm_cmd = app.add_subcommand("nmm", "Cluster ground truth from annotations");
  add_dataset_flags(nmm_cmd, nmm_f.data);
  nmm_cmd->add_option("--tau", nmm_f.tau, "Coverage threshold for joining a cluster");
  nmm_cmd->add_option("--chip-size", nmm_f.chip_size, "Cluster window side, pixels");
  nmm_cmd->add_option("--small-max-side", nmm_f.small_max_side, "Largest side of a clustered object");

  RefineFlags refine_f;
  auto* refine_cmd = app.add_subcommand("refine", "Top-k and position refinement of cluster candidates");
  refine_cmd->add_option("--input", refine_f.input, "Cluster JSON; member count is the score when none given");
  refine_cmd->add_option("--k", refine_f.k, "Candidates kept before refinement");
  refine_cmd->add_option("--pr-overlap", refine_f.pr_overlap, "IoU above which a candidate is dropped");

  TargetsFlags targets_f;
  auto* targets_cmd = app.add_subcommand("targets", "Dense heatmap, size and offset targets");
  add_dataset_flags(targets_cmd, targets_f.data);
  targets_cmd->add_option("--image", targets_f.image_ids, "Restrict to these image ids");
  targets_cmd->add_option("--R", targets_f.R, "Output stride");
  targets_cmd->add_option("--min-overlap", targets_f.min_overlap, "Gaussian radius overlap parameter");

  LossFlags loss_f;
  auto* loss_cmd = app.add_subcommand("loss-check", "Evaluate the loss and check its gradient");
  loss_cmd->add_option("--targets", loss_f.targets, "Target sidecar JSON");
  loss_cmd->add_option("--prediction", loss_f.prediction, "Prediction sidecar JSON (default: ideal prediction)");
  loss_cmd->add_flag("--grad-check", loss_f.grad_check, "Compare analytic and numerical gradients");
  loss_cmd->add_option("--step", loss_f.step, "Finite-difference step");
  loss_cmd->add_option("--tolerance", loss_f.tolerance, "Maximum relative gradient error");

  FuseFlags fuse_f;
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse chip and whole-image detections");
  fuse_cmd->add_option("--input", fuse_f.input, "Chip results JSON");
  fuse_cmd->add_option("--max-detections", fuse_f.max_detections, "Detections kept per image");
  fuse_cmd->add_option("--nms-iou", fuse_f.nms_iou, "NMS IoU threshold");
  fuse_cmd->add_option("--boundary-delta", fuse_f.boundary_delta, "Chip edge tolerance, pixels");

  EvalFlags eval_f;
  auto* eval_cmd = app.add_subcommand("eval", "COCO-style AP of detections against ground truth");
  add_dataset_flags(eval_cmd, eval_f.gt, "--gt");
  eval_cmd->add_option("--detections", eval_f.detections, "Detections JSON");
  eval_cmd->add_option("--csv", eval_f.csv, "Also write the per-category table as CSV");
  eval_cmd->add_option("--per-image-cap", eval_f.per_image_cap, "Detections considered per image");

  MrmPlanFlags plan_f;
  auto* plan_cmd = app.add_subcommand("mrm-plan", "Plan mask-guided pastes of rare objects");
  add_dataset_flags(plan_cmd, plan_f.data);
  plan_cmd->add_option("--mask-dir", plan_f.mask_dir, "Directory of <image_id>.png|.pgm masks");
  plan_cmd->add_option("--mask-fill", plan_f.mask_fill, "Mask for images without a mask file")
      ->check(CLI::IsMember({"allowed", "blocked"}));
  plan_cmd->add_option("--pool", plan_f.pool, "Pool manifest (default: built from the dataset)");
  plan_cmd->add_option("--pool-out", plan_f.pool_out, "Write the built pool manifest with crops here");
  plan_cmd->add_option("--k", plan_f.k, "Pastes per image");
  plan_cmd->add_flag("--gt-mask", plan_f.gt_mask, "Also allow annotation footprints");
  plan_cmd->add_option("--rare", plan_f.rare, "Explicit rare category ids");

  MrmCompositeFlags comp_f;
  auto* comp_cmd = app.add_subcommand("mrm-composite", "Apply paste plans to images");
  add_dataset_flags(comp_cmd, comp_f.data);
  comp_cmd->add_option("--plans", comp_f.plans, "Plans JSON from mrm-plan");
  comp_cmd->add_option("--pool", comp_f.pool, "Pool manifest with crop rasters");

  SynthFlags synth_f;
  auto* synth_cmd = app.add_subcommand("synth", "Synthetic scenes and oracle chip detections");
  synth_cmd->add_option("--count", synth_f.count, "Number of scenes");
  synth_cmd->add_flag("--raster", synth_f.raster, "Also render PNG images");
  synth_cmd->add_flag("!--no-chips", synth_f.chips, "Skip the oracle chip results");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    PipelineConfig cfg = g.config_path.empty() ? PipelineConfig{} : load_pipeline_config(g.config_path);
    override_if(cfg.jobs, g.jobs);
    override_if(cfg.seed, g.seed);

    if (nmm_cmd->parsed()) return run_nmm(g, cfg, nmm_f);
    if (refine_cmd->parsed()) return run_refine(g, cfg, refine_f);
    if (targets_cmd->parsed()) return run_targets(g, cfg, targets_f);
    if (loss_cmd->parsed()) return run_loss_check(g, cfg, loss_f);
    if (fuse_cmd->parsed()) return run_fuse(g, cfg, fuse_f);
    if (eval_cmd->parsed()) return run_eval(g, cfg, eval_f);
    if (plan_cmd->parsed()) return run_mrm_plan(g, cfg, plan_f);
    if (comp_cmd->parsed()) return run_mrm_composite(g, cfg, comp_f);
    if (synth_cmd->parsed()) return run_synth(g, cfg, synth_f);
  } catch (const ConfigError& e) {
    std::cerr << "aerodet: usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "aerodet: data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "aerodet: error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
