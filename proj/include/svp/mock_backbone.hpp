#pragma once

#include <cstdint>
#include <vector>

#include "svp/anchor_schedule.hpp"
#include "svp/descriptor_io.hpp"
#include "svp/scene_graph.hpp"
#include "svp/soft_partition.hpp"

namespace svp {

struct SceneParams {
  std::uint32_t num_clusters = 1;
  double within_sim_target = 1.0;  // expected within-cluster cosine, 1/(1+sigma^2*C)
  double cross_sim_target = 0.0;   // cluster directions are orthonormal
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct SyntheticScene {
  DescriptorSet descriptors;
  std::vector<std::uint32_t> true_labels;
  SceneParams params;
};

// Deterministic test fixture: num_clusters orthonormal directions, frames
// assigned to contiguous label blocks, descriptor = direction + N(0, sigma^2)
// per channel. channels must be >= num_clusters.
SyntheticScene synth_scene(std::uint32_t n, std::uint32_t num_clusters,
                           double noise_sigma, std::uint64_t seed,
                           std::uint32_t channels = 16);

inline constexpr std::uint64_t kDefaultTokenGuard = 65536;

struct AttentionRun {
  double elapsed_ms = 0.0;
  std::uint64_t ops = 0;  // m^2 * channels multiply-adds, m = frames * tokens
  double checksum = 0.0;
};

// Dense quadratic stand-in for global attention: materializes every pairwise
// token score over seeded features and reduces them to a checksum. Real
// arithmetic, so both the ops counter and the wall time mean something.
AttentionRun mock_global_attention(std::uint32_t seq_len_frames,
                                   std::uint32_t tokens_per_frame,
                                   std::uint32_t channels, std::uint64_t seed,
                                   std::uint64_t token_guard = kDefaultTokenGuard);

struct BenchResult {
  std::vector<double> per_subscene_ms;
  std::vector<std::uint64_t> per_subscene_ops;
  double total_ms = 0.0;
  std::uint64_t measured_ops = 0;
  int workers = 1;
  double checksum = 0.0;
};

// Runs the mock workload once per subscene, distributing subscenes over the
// requested worker threads. Ops and checksums are invariant in the worker
// count; only the wall times change.
BenchResult run_plan(const ExecutionPlan& plan, std::uint32_t tokens_per_frame,
                     std::uint32_t channels, int workers, std::uint64_t seed,
                     std::uint64_t token_guard = kDefaultTokenGuard);

// Seed stream used for subscene i inside run_plan; exposed so a single
// mock_global_attention call can reproduce a one-subscene run exactly.
std::uint64_t subscene_seed(std::uint64_t seed, std::uint32_t subscene_index);

struct OracleResult {
  Partition partition;
  double loss = 0.0;
  std::uint64_t enumerated = 0;
};

// Exhaustive minimizer of group_loss over hard partitions into exactly k
// nonempty groups with every size <= cap, enumerated as restricted-growth
// strings (ties resolve to the lexicographically smallest string). Refuses
// instances whose partition count exceeds enumeration_limit.
OracleResult brute_force_partition(const SimilarityGraph& s, std::uint32_t k,
                                   const GroupWeights& w, std::uint32_t cap,
                                   std::uint32_t anchor = 0,
                                   std::uint64_t enumeration_limit = 10'000'000);

struct PartitionMetrics {
  std::uint32_t min_group_size = 0;
  std::uint32_t max_group_size = 0;
  double stddev_group_size = 0.0;
  double within_similarity = 0.0;  // mean over same-group pairs
  double cross_similarity = 0.0;   // mean over cross-group pairs
  double purity = 0.0;             // diagnostic only, never a gate
};

PartitionMetrics partition_metrics(const Partition& p,
                                   const std::vector<std::uint32_t>& true_labels,
                                   const SimilarityGraph& s);

}  // namespace svp
