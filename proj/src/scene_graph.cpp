#include "svp/scene_graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "svp/errors.hpp"

namespace svp {

SimilarityGraph similarity_matrix(const DescriptorSet& set,
                                  const SimilarityOptions& options) {
  const std::uint32_t n = set.num_frames;
  const std::uint32_t c = set.channels;
  if (n == 0 || set.descriptors.size() != static_cast<std::size_t>(n) * c) {
    throw data_error("descriptor set dimensions do not match its payload");
  }

  std::vector<double> norms(n);
  std::vector<std::uint32_t> zero_rows;
  for (std::uint32_t i = 0; i < n; ++i) {
    const float* row = set.row(i);
    double sq = 0.0;
    for (std::uint32_t ch = 0; ch < c; ++ch) {
      if (!std::isfinite(row[ch])) {
        throw data_error("non-finite descriptor value at frame " +
                         std::to_string(i) + ", channel " +
                         std::to_string(ch));
      }
      sq += static_cast<double>(row[ch]) * row[ch];
    }
    norms[i] = std::sqrt(sq);
    if (norms[i] == 0.0) zero_rows.push_back(i);
  }
  if (static_cast<double>(zero_rows.size()) >
      options.max_zero_norm_fraction * n) {
    std::ostringstream msg;
    msg << "zero-norm descriptor rows at frame";
    if (zero_rows.size() > 1) msg << "s";
    for (std::uint32_t i : zero_rows) msg << " " << i;
    throw data_error(msg.str());
  }

  SimilarityGraph graph;
  graph.num_frames = n;
  graph.matrix.assign(static_cast<std::size_t>(n) * n, 0.0);

  auto fill_rows = [&](std::uint32_t begin, std::uint32_t end) {
    for (std::uint32_t i = begin; i < end; ++i) {
      if (norms[i] == 0.0) continue;  // tolerated zero rows stay all-zero
      const float* ri = set.row(i);
      for (std::uint32_t j = 0; j < n; ++j) {
        if (norms[j] == 0.0) continue;
        if (j == i) {
          graph.at(i, i) = 1.0;
          continue;
        }
        const float* rj = set.row(j);
        double dot = 0.0;
        for (std::uint32_t ch = 0; ch < c; ++ch) {
          dot += static_cast<double>(ri[ch]) * rj[ch];
        }
        graph.at(i, j) = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
      }
    }
  };

  int workers = std::max(1, options.workers);
  if (workers == 1 || n < 64) {
    fill_rows(0, n);
  } else {
    std::vector<std::thread> pool;
    std::uint32_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      std::uint32_t begin = std::min<std::uint32_t>(w * chunk, n);
      std::uint32_t end = std::min<std::uint32_t>(begin + chunk, n);
      if (begin < end) pool.emplace_back(fill_rows, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  return graph;
}

DensityEstimate density(const SimilarityGraph& graph, double threshold) {
  if (!(threshold > -1.0 && threshold < 1.0)) {
    throw config_error("similarity threshold must lie in (-1, 1), got " +
                       std::to_string(threshold));
  }
  const std::uint32_t n = graph.num_frames;
  DensityEstimate est;
  est.threshold = threshold;
  est.per_frame_counts.resize(n, 0);
  std::uint64_t total = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint32_t count = 0;
    for (std::uint32_t j = 0; j < n; ++j) {
      if (j != i && graph.at(i, j) > threshold) ++count;
    }
    est.per_frame_counts[i] = count;
    total += count;
  }
  est.density = n == 0 ? 0.0 : static_cast<double>(total) / n;
  return est;
}

std::uint32_t group_count(const DensityEstimate& estimate, std::uint32_t k_max,
                          std::uint32_t n,
                          std::optional<std::uint32_t> override_k) {
  if (k_max < 1) throw config_error("k_max must be >= 1");
  if (override_k) {
    if (*override_k < 1 || *override_k > n) {
      throw config_error("group override " + std::to_string(*override_k) +
                         " outside [1, " + std::to_string(n) + "]");
    }
    return *override_k;
  }
  double rounded = std::round(estimate.density);
  std::uint32_t upper = std::min(k_max, n);
  if (rounded < 1.0) return 1;
  if (rounded > static_cast<double>(upper)) return upper;
  return static_cast<std::uint32_t>(rounded);
}

SimilarityStats similarity_stats(const SimilarityGraph& graph) {
  const std::uint32_t n = graph.num_frames;
  if (n <= 1) return {1.0, 1.0, 1.0};
  SimilarityStats stats{1.0, 0.0, -1.0};
  double sum = 0.0;
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double v = graph.at(i, j);
      stats.min = std::min(stats.min, v);
      stats.max = std::max(stats.max, v);
      sum += v;
    }
  }
  stats.mean = sum / (static_cast<double>(n) * (n - 1));
  return stats;
}

}  // namespace svp
