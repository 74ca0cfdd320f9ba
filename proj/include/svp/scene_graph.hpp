#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "svp/descriptor_io.hpp"

namespace svp {

struct SimilarityGraph {
  std::uint32_t num_frames = 0;
  std::vector<double> matrix;  // num_frames * num_frames, row-major

  double at(std::uint32_t i, std::uint32_t j) const {
    return matrix[static_cast<std::size_t>(i) * num_frames + j];
  }
  double& at(std::uint32_t i, std::uint32_t j) {
    return matrix[static_cast<std::size_t>(i) * num_frames + j];
  }
};

struct DensityEstimate {
  std::vector<std::uint32_t> per_frame_counts;
  double density = 0.0;
  double threshold = 0.0;
};

struct SimilarityOptions {
  int workers = 1;
  // Fraction of zero-norm descriptor rows tolerated before erroring.
  // The default rejects any zero-norm row, naming the offending frames.
  // Rows tolerated under a raised fraction get an all-zero similarity row.
  double max_zero_norm_fraction = 0.0;
};

// Pairwise cosine similarity, clamped to [-1, 1], unit diagonal. Row blocks
// may be computed in parallel; results are identical for any worker count.
SimilarityGraph similarity_matrix(const DescriptorSet& set,
                                  const SimilarityOptions& options = {});

// Counts, per frame, the other frames with similarity strictly above the
// threshold; density is the mean count. threshold must lie in (-1, 1).
DensityEstimate density(const SimilarityGraph& graph, double threshold);

// K = override if given (validated against [1, n]), otherwise
// clamp(round(density), 1, min(k_max, n)).
std::uint32_t group_count(const DensityEstimate& estimate,
                          std::uint32_t k_max, std::uint32_t n,
                          std::optional<std::uint32_t> override_k = {});

struct SimilarityStats {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

// Off-diagonal entry statistics ({1,1,1} for a single-frame graph).
SimilarityStats similarity_stats(const SimilarityGraph& graph);

}  // namespace svp
