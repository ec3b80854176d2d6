#include "aerodet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "aerodet/error.hpp"
#include "aerodet/parallel.hpp"
#include "json_util.hpp"

namespace aerodet {
using detail::json;

std::vector<double> EvalConfig::default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

void EvalConfig::validate() const {
  if (iou_thresholds.empty()) throw ConfigError("eval: at least one IoU threshold is required");
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    const double t = iou_thresholds[i];
    if (!(t > 0.0 && t < 1.0)) throw ConfigError("eval: IoU thresholds must lie in (0, 1)");
    if (i > 0 && !(t > iou_thresholds[i - 1]))
      throw ConfigError("eval: IoU thresholds must be strictly increasing");
  }
  if (recall_points < 2) throw ConfigError("eval: recall_points must be at least 2");
  if (per_image_cap < 1) throw ConfigError("eval: per_image_cap must be positive");
}

namespace {

auto bbox_key(const BBox& b) { return std::tie(b.x, b.y, b.w, b.h); }

}  // namespace

bool detection_rank_less(const Detection& a, const Detection& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  if (bbox_key(a.bbox) != bbox_key(b.bbox)) return bbox_key(a.bbox) < bbox_key(b.bbox);
  return a.category < b.category;
}

std::vector<Match> match_detections(const std::vector<Detection>& dets,
                                    const std::vector<ObjectAnnotation>& gts, double iou_thresh) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return detection_rank_less(dets[a], dets[b]); });

  std::vector<char> taken(gts.size(), 0);
  std::vector<Match> out;
  out.reserve(dets.size());
  for (std::size_t di : order) {
    const BBox& box = dets[di].bbox;
    Match m{di, dets[di].score, MatchKind::kFalsePositive, std::nullopt};
    double best = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].ignore || taken[g]) continue;
      const double v = iou(box, gts[g].bbox);
      if (v >= iou_thresh && v > best) {
        best = v;
        m.gt_index = g;
      }
    }
    if (m.gt_index) {
      taken[*m.gt_index] = 1;
      m.kind = MatchKind::kTruePositive;
    } else {
      for (std::size_t g = 0; g < gts.size(); ++g)
        if (gts[g].ignore && coverage(box, gts[g].bbox) >= iou_thresh) {
          m.kind = MatchKind::kIgnored;
          m.gt_index = g;
          break;
        }
    }
    out.push_back(m);
  }
  return out;
}

std::optional<double> average_precision(std::vector<RankedOutcome> outcomes, std::size_t num_gt,
                                        int recall_points) {
  if (num_gt == 0) return std::nullopt;
  std::stable_sort(outcomes.begin(), outcomes.end(), [](const RankedOutcome& a, const RankedOutcome& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image_index != b.image_index) return a.image_index < b.image_index;
    return bbox_key(a.bbox) < bbox_key(b.bbox);
  });

  const std::size_t n = outcomes.size();
  std::vector<double> recall(n), precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (outcomes[i].true_positive) ++tp;
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

  double sum = 0.0;
  for (int j = 0; j < recall_points; ++j) {
    const double r = static_cast<double>(j) / (recall_points - 1);
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / recall_points;
}

namespace {

struct ImageView {
  // Per evaluated category: detections and the GT list (own GT plus applicable ignores).
  std::map<int, std::vector<Detection>> dets;
  std::map<int, std::vector<ObjectAnnotation>> gts;
};

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

EvalSummary ap_summary(const std::vector<ImageDetections>& dets, const std::vector<ImageRecord>& gts,
                       const EvalConfig& cfg, unsigned jobs) {
  cfg.validate();
  std::map<std::string, std::size_t> image_index;
  for (std::size_t i = 0; i < gts.size(); ++i)
    if (!image_index.emplace(gts[i].image_id, i).second)
      throw DataError("ground truth lists image '" + gts[i].image_id + "' twice");

  std::map<int, std::size_t> num_gt;
  for (const auto& r : gts)
    for (const auto& a : r.annotations)
      if (!a.ignore) ++num_gt[a.category];
  if (num_gt.empty()) throw DataError("evaluation needs at least one non-ignored ground-truth object");

  std::vector<std::vector<Detection>> per_image(gts.size());
  for (const auto& img : dets) {
    auto it = image_index.find(img.image_id);
    if (it == image_index.end())
      throw DataError("detections reference unknown image '" + img.image_id + "'");
    auto& bucket = per_image[it->second];
    bucket.insert(bucket.end(), img.detections.begin(), img.detections.end());
  }

  std::vector<ImageView> views(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    auto& d = per_image[i];
    std::stable_sort(d.begin(), d.end(), detection_rank_less);
    if (d.size() > cfg.per_image_cap) d.resize(cfg.per_image_cap);
    for (const auto& det : d)
      if (num_gt.contains(det.category)) views[i].dets[det.category].push_back(det);
    for (const auto& [cat, _] : num_gt) {
      auto& list = views[i].gts[cat];
      for (const auto& a : gts[i].annotations)
        if (a.category == cat || (a.ignore && !num_gt.contains(a.category))) list.push_back(a);
    }
  }

  const std::size_t nt = cfg.iou_thresholds.size();
  std::vector<double> thresholds = cfg.iou_thresholds;
  // AP50 / AP75 are always reported, even if absent from the configured sweep.
  for (double fixed : {0.5, 0.75})
    if (std::find(thresholds.begin(), thresholds.end(), fixed) == thresholds.end()) thresholds.push_back(fixed);

  std::vector<int> categories;
  for (const auto& [cat, _] : num_gt) categories.push_back(cat);

  // outcomes[t][c][image] so images can be matched concurrently.
  std::vector<std::vector<std::vector<std::vector<RankedOutcome>>>> outcomes(
      thresholds.size(), std::vector<std::vector<std::vector<RankedOutcome>>>(
                             categories.size(), std::vector<std::vector<RankedOutcome>>(gts.size())));
  parallel_for(gts.size(), jobs, [&](std::size_t i) {
    for (std::size_t c = 0; c < categories.size(); ++c) {
      const int cat = categories[c];
      auto dit = views[i].dets.find(cat);
      if (dit == views[i].dets.end()) continue;
      const auto& cat_gts = views[i].gts.at(cat);
      for (std::size_t t = 0; t < thresholds.size(); ++t)
        for (const Match& m : match_detections(dit->second, cat_gts, thresholds[t])) {
          if (m.kind == MatchKind::kIgnored) continue;
          outcomes[t][c][i].push_back(
              {m.score, m.kind == MatchKind::kTruePositive, i, dit->second[m.det_index].bbox});
        }
    }
  });

  auto ap_at = [&](std::size_t t, std::size_t c) {
    std::vector<RankedOutcome> pooled;
    for (const auto& v : outcomes[t][c]) pooled.insert(pooled.end(), v.begin(), v.end());
    return *average_precision(std::move(pooled), num_gt.at(categories[c]), cfg.recall_points);
  };
  auto index_of = [&](double t) {
    return static_cast<std::size_t>(std::find(thresholds.begin(), thresholds.end(), t) - thresholds.begin());
  };

  EvalSummary s;
  s.thresholds = cfg.iou_thresholds;
  s.per_threshold.assign(nt, 0.0);
  std::vector<double> all, ap50s, ap75s;
  for (std::size_t c = 0; c < categories.size(); ++c) {
    CategoryResult r;
    r.category = categories[c];
    r.num_gt = num_gt.at(categories[c]);
    for (std::size_t t = 0; t < nt; ++t) {
      const double v = ap_at(t, c);
      r.per_threshold.push_back(v);
      s.per_threshold[t] += v / static_cast<double>(categories.size());
      all.push_back(v);
    }
    r.ap = mean(r.per_threshold);
    r.ap50 = ap_at(index_of(0.5), c);
    r.ap75 = ap_at(index_of(0.75), c);
    ap50s.push_back(r.ap50);
    ap75s.push_back(r.ap75);
    s.per_category.push_back(std::move(r));
  }
  s.ap = mean(all);
  s.ap50 = mean(ap50s);
  s.ap75 = mean(ap75s);
  return s;
}

namespace {

std::string category_name(int id, const LabelTree* tree) {
  if (tree && tree->known(id)) return tree->name_of(id);
  return std::to_string(id);
}

}  // namespace

std::string summary_to_json(const EvalSummary& s, const LabelTree* tree, const std::string& meta_json) {
  json cats = json::array();
  for (const auto& c : s.per_category)
    cats.push_back({{"category", c.category},
                    {"name", category_name(c.category, tree)},
                    {"num_gt", c.num_gt},
                    {"AP", c.ap},
                    {"AP50", c.ap50},
                    {"AP75", c.ap75},
                    {"per_threshold", c.per_threshold}});
  json doc = {{"AP", s.ap},
              {"AP50", s.ap50},
              {"AP75", s.ap75},
              {"iou_thresholds", s.thresholds},
              {"per_threshold", s.per_threshold},
              {"per_category", cats}};
  if (!meta_json.empty()) doc["meta"] = json::parse(meta_json);
  return doc.dump(2) + "\n";
}

std::string summary_to_csv(const EvalSummary& s, const LabelTree* tree) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6);
  out << "category,name,num_gt,AP,AP50,AP75\n";
  for (const auto& c : s.per_category)
    out << c.category << ',' << category_name(c.category, tree) << ',' << c.num_gt << ',' << c.ap << ','
        << c.ap50 << ',' << c.ap75 << '\n';
  out << "all,all,," << s.ap << ',' << s.ap50 << ',' << s.ap75 << '\n';
  return out.str();
}

}  // namespace aerodet
