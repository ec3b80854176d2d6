#pragma once

#include <filesystem>
#include <vector>

#include "aerodet/grid.hpp"
#include "aerodet/heatmap.hpp"

namespace aerodet {

struct LossConfig {
  double alpha = 2.0;
  double beta = 4.0;
  double lambda_shm = 1.0;
  double lambda_wh = 0.1;
  double lambda_off = 1.0;
  /// Predicted heatmap values are clamped to [clamp_eps, 1 - clamp_eps].
  double clamp_eps = 1e-4;

  void validate() const;
};

/// Network outputs evaluated against a DenseTargetSet. Sizes and offsets are
/// given per ground-truth peak, in the target's object order.
struct Prediction {
  DenseGrid heatmap;
  std::vector<Size2> sizes;
  std::vector<Point2> offsets;
};

struct ValueAndGrid {
  double value = 0.0;
  DenseGrid grad;
};

struct ValueAndPairs {
  double value = 0.0;
  /// d value / d prediction, one (x, y) or (w, h) pair per object.
  std::vector<Point2> grad;
};

/// Hierarchical focal loss over every cell and channel:
///   -(1/N) sum [ (1-p)^a log p            where Y == 1
///                (1-Y)^b p^a log(1-p)     otherwise ]
/// with p the clamped prediction. `grad` is the analytic derivative with respect to
/// the unclamped prediction (zero where clamping is active). N == 0 gives 0.
ValueAndGrid focal_loss_shm(const DenseTargetSet& target, const DenseGrid& heatmap_hat,
                            const LossConfig& cfg);

/// (1/N) sum_k |w_hat - w| + |h_hat - h|; subgradient 0 at 0.
ValueAndPairs size_loss_wh(const DenseTargetSet& target, const std::vector<Size2>& sizes_hat);

/// (1/N) sum_p |ox_hat - ox| + |oy_hat - oy| against the fractional peak offsets.
ValueAndPairs offset_loss(const DenseTargetSet& target, const std::vector<Point2>& offsets_hat);

struct LossParts {
  double shm = 0.0;
  double wh = 0.0;
  double off = 0.0;
};

double total_loss(const LossParts& parts, const LossConfig& cfg);

struct LossReport {
  LossParts parts;
  double total = 0.0;
};

/// Evaluates all three terms; throws DataError on shape or object-count mismatch.
LossReport evaluate_loss(const DenseTargetSet& target, const Prediction& pred,
                         const LossConfig& cfg);

/// Largest relative error between the analytic focal-loss gradient and central
/// differences with step `h`, over cells at least 2h away from the clamp bounds.
/// Relative error is |a - n| / max(|a|, |n|, grad_floor).
double focal_grad_check(const DenseTargetSet& target, const DenseGrid& heatmap_hat,
                        const LossConfig& cfg, double h = 1e-5, double grad_floor = 1e-6);

/// Ideal network output: 1 at every ground-truth peak, 0 elsewhere, exact sizes
/// and offsets.
Prediction ideal_prediction(const DenseTargetSet& target);

/// Writes `<stem>.json` + `<stem>.bin`; sizes/offsets are stored per peak.
void save_prediction(const Prediction& pred, const std::filesystem::path& json_path);
Prediction load_prediction(const std::filesystem::path& json_path);

}  // namespace aerodet
