#pragma once

#include <cstddef>
#include <vector>

#include "aerodet/geometry.hpp"

namespace aerodet {

struct ClusterCandidate {
  BBox window;
  double score = 0.0;

  friend bool operator==(const ClusterCandidate&, const ClusterCandidate&) = default;
};

struct RefineConfig {
  /// Top-k cluster centers consumed per image (10 for visDrone, 5 for UAVDT).
  std::size_t k = 10;
  /// Candidates overlapping a kept window by more than this IoU are dropped.
  double pr_overlap = 0.5;

  void validate() const;
};

/// Highest-k candidates by score in descending order; ties keep input order.
std::vector<ClusterCandidate> take_topk(const std::vector<ClusterCandidate>& candidates,
                                        std::size_t k);

/// Position refinement: greedy keep in descending score (ties by input order);
/// a candidate survives iff its IoU with every kept window is <= pr_overlap.
std::vector<ClusterCandidate> position_refinement(const std::vector<ClusterCandidate>& candidates,
                                                  double pr_overlap);

}  // namespace aerodet
