#include "aerodet/refine.hpp"

#include <algorithm>
#include <numeric>

#include "aerodet/error.hpp"

namespace aerodet {

void RefineConfig::validate() const {
  if (k < 1) throw ConfigError("refine: k must be at least 1");
  if (!(pr_overlap >= 0.0 && pr_overlap < 1.0))
    throw ConfigError("refine: pr_overlap must lie in [0, 1)");
}

namespace {

std::vector<std::size_t> by_score(const std::vector<ClusterCandidate>& candidates) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].score > candidates[b].score;
  });
  return order;
}

}  // namespace

std::vector<ClusterCandidate> take_topk(const std::vector<ClusterCandidate>& candidates,
                                        std::size_t k) {
  if (k < 1) throw ConfigError("take_topk: k must be at least 1");
  const auto order = by_score(candidates);
  std::vector<ClusterCandidate> out;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) out.push_back(candidates[order[i]]);
  return out;
}

std::vector<ClusterCandidate> position_refinement(const std::vector<ClusterCandidate>& candidates,
                                                  double pr_overlap) {
  std::vector<ClusterCandidate> kept;
  for (std::size_t idx : by_score(candidates)) {
    const auto& cand = candidates[idx];
    const bool clear = std::all_of(kept.begin(), kept.end(), [&](const ClusterCandidate& k) {
      return iou(cand.window, k.window) <= pr_overlap;
    });
    if (clear) kept.push_back(cand);
  }
  return kept;
}

}  // namespace aerodet
