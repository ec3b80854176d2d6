#include "aerodet/loss.hpp"

#include <algorithm>
#include <cmath>

#include "aerodet/error.hpp"
#include "json_util.hpp"

namespace aerodet {
namespace fs = std::filesystem;
using detail::json;

void LossConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0) throw ConfigError("loss: alpha and beta must be non-negative");
  if (lambda_shm < 0.0 || lambda_wh < 0.0 || lambda_off < 0.0)
    throw ConfigError("loss: lambdas must be non-negative");
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw ConfigError("loss: clamp_eps must lie in (0, 0.5)");
}

namespace {

struct CellLoss {
  double value;
  double deriv;  // d value / d p
};

CellLoss peak_term(double p, double alpha) {
  const double q = 1.0 - p;
  const double log_p = std::log(p);
  const double value = std::pow(q, alpha) * log_p;
  const double deriv =
      (alpha == 0.0 ? 0.0 : -alpha * std::pow(q, alpha - 1.0) * log_p) + std::pow(q, alpha) / p;
  return {value, deriv};
}

CellLoss background_term(double y, double p, double alpha, double beta) {
  const double weight = std::pow(1.0 - y, beta);
  const double log_q = std::log1p(-p);
  const double value = weight * std::pow(p, alpha) * log_q;
  const double deriv =
      weight * ((alpha == 0.0 ? 0.0 : alpha * std::pow(p, alpha - 1.0) * log_q) -
                std::pow(p, alpha) / (1.0 - p));
  return {value, deriv};
}

double l1_sign(double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); }

}  // namespace

ValueAndGrid focal_loss_shm(const DenseTargetSet& target, const DenseGrid& heatmap_hat,
                            const LossConfig& cfg) {
  cfg.validate();
  if (!target.heatmap.same_shape(heatmap_hat))
    throw DataError("focal loss: prediction shape does not match target");
  ValueAndGrid out{0.0, DenseGrid(heatmap_hat.width(), heatmap_hat.height(), heatmap_hat.channels())};
  if (target.n_objects == 0) return out;

  const double inv_n = 1.0 / static_cast<double>(target.n_objects);
  const double lo = cfg.clamp_eps;
  const double hi = 1.0 - cfg.clamp_eps;
  const auto y = target.heatmap.data();
  const auto yhat = heatmap_hat.data();
  auto grad = out.grad.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double raw = yhat[i];
    const double p = std::clamp(raw, lo, hi);
    const CellLoss term = y[i] == 1.0 ? peak_term(p, cfg.alpha) : background_term(y[i], p, cfg.alpha, cfg.beta);
    sum += term.value;
    grad[i] = (raw < lo || raw > hi) ? 0.0 : -inv_n * term.deriv;
  }
  out.value = -inv_n * sum;
  return out;
}

ValueAndPairs size_loss_wh(const DenseTargetSet& target, const std::vector<Size2>& sizes_hat) {
  if (sizes_hat.size() != target.n_objects)
    throw DataError("size loss: expected " + std::to_string(target.n_objects) + " predicted sizes");
  ValueAndPairs out;
  if (target.n_objects == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(target.n_objects);
  double sum = 0.0;
  for (std::size_t k = 0; k < target.n_objects; ++k) {
    const double dw = sizes_hat[k].w - target.sizes[k].w;
    const double dh = sizes_hat[k].h - target.sizes[k].h;
    sum += std::abs(dw) + std::abs(dh);
    out.grad.push_back({inv_n * l1_sign(dw), inv_n * l1_sign(dh)});
  }
  out.value = inv_n * sum;
  return out;
}

ValueAndPairs offset_loss(const DenseTargetSet& target, const std::vector<Point2>& offsets_hat) {
  if (offsets_hat.size() != target.n_objects)
    throw DataError("offset loss: expected " + std::to_string(target.n_objects) + " predicted offsets");
  ValueAndPairs out;
  if (target.n_objects == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(target.n_objects);
  double sum = 0.0;
  for (std::size_t k = 0; k < target.n_objects; ++k) {
    const double dx = offsets_hat[k].x - target.offsets[k].x;
    const double dy = offsets_hat[k].y - target.offsets[k].y;
    sum += std::abs(dx) + std::abs(dy);
    out.grad.push_back({inv_n * l1_sign(dx), inv_n * l1_sign(dy)});
  }
  out.value = inv_n * sum;
  return out;
}

double total_loss(const LossParts& parts, const LossConfig& cfg) {
  return cfg.lambda_shm * parts.shm + cfg.lambda_wh * parts.wh + cfg.lambda_off * parts.off;
}

LossReport evaluate_loss(const DenseTargetSet& target, const Prediction& pred,
                         const LossConfig& cfg) {
  LossReport r;
  r.parts.shm = focal_loss_shm(target, pred.heatmap, cfg).value;
  r.parts.wh = size_loss_wh(target, pred.sizes).value;
  r.parts.off = offset_loss(target, pred.offsets).value;
  r.total = total_loss(r.parts, cfg);
  return r;
}

double focal_grad_check(const DenseTargetSet& target, const DenseGrid& heatmap_hat,
                        const LossConfig& cfg, double h, double grad_floor) {
  const DenseGrid analytic = focal_loss_shm(target, heatmap_hat, cfg).grad;
  DenseGrid probe = heatmap_hat;
  auto data = probe.data();
  double worst = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = data[i];
    if (v - 2.0 * h < cfg.clamp_eps || v + 2.0 * h > 1.0 - cfg.clamp_eps) continue;
    data[i] = v + h;
    const double up = focal_loss_shm(target, probe, cfg).value;
    data[i] = v - h;
    const double down = focal_loss_shm(target, probe, cfg).value;
    data[i] = v;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.data()[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), grad_floor});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

Prediction ideal_prediction(const DenseTargetSet& target) {
  Prediction p;
  p.heatmap = DenseGrid(target.heatmap.width(), target.heatmap.height(), target.heatmap.channels());
  const auto y = target.heatmap.data();
  auto out = p.heatmap.data();
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] == 1.0 ? 1.0 : 0.0;
  p.sizes = target.sizes;
  p.offsets = target.offsets;
  return p;
}

void save_prediction(const Prediction& pred, const fs::path& json_path) {
  fs::path bin = json_path;
  bin.replace_extension(".bin");
  write_grid_dump(pred.heatmap, bin);
  json sizes = json::array();
  for (const auto& s : pred.sizes) sizes.push_back({s.w, s.h});
  json offsets = json::array();
  for (const auto& o : pred.offsets) offsets.push_back({o.x, o.y});
  json doc = {{"kind", "prediction"},
              {"data", bin.filename().string()},
              {"dtype", "float32"},
              {"layout", "HWC"},
              {"shape", {pred.heatmap.height(), pred.heatmap.width(), pred.heatmap.channels()}},
              {"sizes", sizes},
              {"offsets", offsets}};
  detail::write_text_file(json_path, doc.dump(2) + "\n");
}

Prediction load_prediction(const fs::path& json_path) {
  const json doc = detail::read_json_file(json_path);
  const std::string where = json_path.string();
  const auto shape = detail::get_field<std::vector<int>>(doc, "shape", where);
  if (shape.size() != 3) throw DataError(where + ": shape must be [H, W, C]");
  Prediction p;
  p.heatmap = read_grid_dump(json_path.parent_path() / detail::get_field<std::string>(doc, "data", where),
                             shape[1], shape[0], shape[2]);
  for (const auto& s : detail::get_field<std::vector<std::vector<double>>>(doc, "sizes", where)) {
    if (s.size() != 2) throw DataError(where + ": sizes entries must be [w, h]");
    p.sizes.push_back({s[0], s[1]});
  }
  for (const auto& o : detail::get_field<std::vector<std::vector<double>>>(doc, "offsets", where)) {
    if (o.size() != 2) throw DataError(where + ": offsets entries must be [x, y]");
    p.offsets.push_back({o[0], o[1]});
  }
  return p;
}

}  // namespace aerodet
