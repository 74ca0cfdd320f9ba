#include "svp/mock_backbone.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "svp/errors.hpp"
#include "svp/rng.hpp"

namespace svp {
namespace {

using clock_type = std::chrono::steady_clock;

double elapsed_ms(clock_type::time_point start) {
  return std::chrono::duration<double, std::milli>(clock_type::now() - start)
      .count();
}

}  // namespace

SyntheticScene synth_scene(std::uint32_t n, std::uint32_t num_clusters,
                           double noise_sigma, std::uint64_t seed,
                           std::uint32_t channels) {
  if (num_clusters < 1 || num_clusters > n) {
    throw config_error("num_clusters " + std::to_string(num_clusters) +
                       " outside [1, " + std::to_string(n) + "]");
  }
  if (channels < num_clusters) {
    throw config_error("need channels >= num_clusters to build orthonormal "
                       "cluster directions");
  }
  if (noise_sigma < 0.0) throw config_error("noise_sigma must be >= 0");

  // Orthonormal cluster directions via Gram-Schmidt on seeded gaussians.
  Rng dir_rng = derive_rng(seed, "simulate/directions");
  std::vector<std::vector<double>> dirs(num_clusters,
                                        std::vector<double>(channels));
  for (std::uint32_t cl = 0; cl < num_clusters; ++cl) {
    for (;;) {
      for (std::uint32_t ch = 0; ch < channels; ++ch) {
        dirs[cl][ch] = dir_rng.next_gaussian();
      }
      for (std::uint32_t prev = 0; prev < cl; ++prev) {
        double dot = 0.0;
        for (std::uint32_t ch = 0; ch < channels; ++ch) {
          dot += dirs[cl][ch] * dirs[prev][ch];
        }
        for (std::uint32_t ch = 0; ch < channels; ++ch) {
          dirs[cl][ch] -= dot * dirs[prev][ch];
        }
      }
      double norm = 0.0;
      for (double v : dirs[cl]) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 1e-9) {
        for (double& v : dirs[cl]) v /= norm;
        break;
      }
    }
  }

  SyntheticScene scene;
  scene.params = {num_clusters,
                  1.0 / (1.0 + noise_sigma * noise_sigma * channels), 0.0,
                  noise_sigma, seed};
  scene.descriptors.num_frames = n;
  scene.descriptors.channels = channels;
  scene.descriptors.descriptors.resize(static_cast<std::size_t>(n) * channels);
  scene.true_labels.resize(n);

  Rng noise_rng = derive_rng(seed, "simulate/noise");
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint32_t label = static_cast<std::uint32_t>(
        static_cast<std::uint64_t>(i) * num_clusters / n);
    scene.true_labels[i] = label;
    float* row = scene.descriptors.descriptors.data() +
                 static_cast<std::size_t>(i) * channels;
    for (std::uint32_t ch = 0; ch < channels; ++ch) {
      row[ch] = static_cast<float>(dirs[label][ch] +
                                   noise_sigma * noise_rng.next_gaussian());
    }
  }
  return scene;
}

AttentionRun mock_global_attention(std::uint32_t seq_len_frames,
                                   std::uint32_t tokens_per_frame,
                                   std::uint32_t channels, std::uint64_t seed,
                                   std::uint64_t token_guard) {
  const std::uint64_t m =
      static_cast<std::uint64_t>(seq_len_frames) * tokens_per_frame;
  if (m < 1 || channels < 1) {
    throw config_error("sequence and channel counts must be >= 1");
  }
  if (m > token_guard) {
    throw infeasible_error(
        "sequence of " + std::to_string(m) + " tokens exceeds the guard of " +
        std::to_string(token_guard) + "; use fewer tokens per frame");
  }

  auto start = clock_type::now();
  std::vector<double> features(m * channels);
  Rng rng = derive_rng(seed, "mock/features");
  for (double& v : features) v = rng.next_uniform(-1.0, 1.0);

  // Every pairwise token score, reduced to an order-fixed checksum.
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::uint64_t i = 0; i < m; ++i) {
    const double* fi = features.data() + i * channels;
    for (std::uint64_t j = 0; j < m; ++j) {
      const double* fj = features.data() + j * channels;
      double dot = 0.0;
      for (std::uint32_t ch = 0; ch < channels; ++ch) dot += fi[ch] * fj[ch];
      sum += dot;
      sum_sq += dot * dot;
    }
  }

  AttentionRun run;
  run.ops = m * m * channels;
  run.checksum = sum + 0.5 * sum_sq;
  run.elapsed_ms = elapsed_ms(start);
  return run;
}

std::uint64_t subscene_seed(std::uint64_t seed, std::uint32_t subscene_index) {
  return derive_rng(seed, "bench/subscene", subscene_index).next_u64();
}

BenchResult run_plan(const ExecutionPlan& plan, std::uint32_t tokens_per_frame,
                     std::uint32_t channels, int workers, std::uint64_t seed,
                     std::uint64_t token_guard) {
  if (workers < 1) throw config_error("workers must be >= 1");
  if (tokens_per_frame < 1 || channels < 1) {
    throw config_error("token and channel counts must be >= 1");
  }
  // Validate everything up front; worker threads must not throw.
  const std::size_t count = plan.subscenes.size();
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t m = static_cast<std::uint64_t>(plan.subscenes[i].size()) *
                      tokens_per_frame;
    if (m == 0) {
      throw config_error("subscene " + std::to_string(i) + " is empty");
    }
    if (m > token_guard) {
      throw infeasible_error("subscene " + std::to_string(i) + " needs " +
                             std::to_string(m) +
                             " tokens, above the guard of " +
                             std::to_string(token_guard) +
                             "; use fewer tokens per frame");
    }
  }

  BenchResult result;
  result.workers = workers;
  result.per_subscene_ms.resize(count);
  result.per_subscene_ops.resize(count);
  std::vector<double> checksums(count);

  auto start = clock_type::now();
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      AttentionRun run = mock_global_attention(
          static_cast<std::uint32_t>(plan.subscenes[i].size()),
          tokens_per_frame, channels, subscene_seed(seed, i), token_guard);
      result.per_subscene_ms[i] = run.elapsed_ms;
      result.per_subscene_ops[i] = run.ops;
      checksums[i] = run.checksum;
    }
  };

  int used = static_cast<int>(std::min<std::size_t>(workers, count));
  used = std::max(used, 1);
  if (used == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(used);
    for (int w = 0; w < used; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  result.total_ms = elapsed_ms(start);

  // Join in subscene order so the digest is independent of scheduling.
  for (std::size_t i = 0; i < count; ++i) {
    result.measured_ops += result.per_subscene_ops[i];
    result.checksum += checksums[i];
  }
  return result;
}

namespace {

// Walks restricted-growth strings over partitions of n frames into exactly
// k nonempty groups with all sizes <= cap, in lexicographic order. visit()
// sees each leaf's assignment vector.
template <typename Visit>
void walk_partitions(std::uint32_t n, std::uint32_t k, std::uint32_t cap,
                     Visit&& visit) {
  std::vector<std::uint32_t> assign(n, 0);
  std::vector<std::uint32_t> sizes(k, 0);
  auto rec = [&](auto&& self, std::uint32_t depth, std::uint32_t used) -> void {
    if (depth == n) {
      if (used == k) visit(assign);
      return;
    }
    std::uint32_t limit = std::min<std::uint32_t>(used + 1, k);
    for (std::uint32_t b = 0; b < limit; ++b) {
      if (sizes[b] >= cap) continue;
      // Prune: remaining frames must still be able to open all k groups.
      std::uint32_t opens = std::max(used, b + 1);
      if (opens + (n - depth - 1) < k) continue;
      assign[depth] = b;
      ++sizes[b];
      self(self, depth + 1, opens);
      --sizes[b];
    }
  };
  rec(rec, 0, 0);
}

}  // namespace

OracleResult brute_force_partition(const SimilarityGraph& s, std::uint32_t k,
                                   const GroupWeights& w, std::uint32_t cap,
                                   std::uint32_t anchor,
                                   std::uint64_t enumeration_limit) {
  const std::uint32_t n = s.num_frames;
  if (k < 1 || k > n) {
    throw infeasible_error("cannot partition " + std::to_string(n) +
                           " frames into " + std::to_string(k) +
                           " nonempty groups");
  }
  if (static_cast<std::uint64_t>(cap) * k < n) {
    throw infeasible_error("cap " + std::to_string(cap) + " with " +
                           std::to_string(k) + " groups cannot hold " +
                           std::to_string(n) + " frames");
  }
  if (anchor >= n) throw config_error("anchor out of range");

  // Counting pass first: refuse oversized instances before evaluating any.
  std::uint64_t total = 0;
  walk_partitions(n, k, cap, [&](const std::vector<std::uint32_t>&) {
    ++total;
    if (total > enumeration_limit) {
      throw infeasible_error(
          "more than " + std::to_string(enumeration_limit) +
          " cap-feasible partitions; instance too large for brute force");
    }
  });

  AssignmentMatrix a;
  a.n = n;
  a.k = k;
  a.a.assign(static_cast<std::size_t>(n) * k, 0.0);

  OracleResult best;
  best.enumerated = total;
  bool first = true;
  std::vector<std::uint32_t> best_assign;
  walk_partitions(n, k, cap, [&](const std::vector<std::uint32_t>& assign) {
    std::fill(a.a.begin(), a.a.end(), 0.0);
    for (std::uint32_t f = 0; f < n; ++f) a.at(f, assign[f]) = 1.0;
    double loss = group_loss(a, s, w);
    // Strict < keeps the lexicographically smallest growth string on ties.
    if (first || loss < best.loss) {
      first = false;
      best.loss = loss;
      best_assign = assign;
    }
  });

  best.partition.n = n;
  best.partition.k = k;
  best.partition.anchor = anchor;
  best.partition.groups.assign(k, {});
  for (std::uint32_t f = 0; f < n; ++f) {
    best.partition.groups[best_assign[f]].push_back(f);
  }
  return best;
}

PartitionMetrics partition_metrics(const Partition& p,
                                   const std::vector<std::uint32_t>& true_labels,
                                   const SimilarityGraph& s) {
  if (true_labels.size() != p.n) {
    throw config_error("label count does not match partition");
  }
  if (s.num_frames != p.n) {
    throw config_error("similarity graph does not match partition");
  }

  PartitionMetrics m;
  m.min_group_size = p.n;
  double mean = static_cast<double>(p.n) / p.k;
  double var = 0.0;
  std::vector<std::uint32_t> group_of(p.n, 0);
  std::uint64_t purity_hits = 0;
  for (std::uint32_t g = 0; g < p.k; ++g) {
    std::uint32_t size = static_cast<std::uint32_t>(p.groups[g].size());
    m.min_group_size = std::min(m.min_group_size, size);
    m.max_group_size = std::max(m.max_group_size, size);
    var += (size - mean) * (size - mean);
    std::vector<std::uint32_t> label_counts;
    for (std::uint32_t f : p.groups[g]) {
      group_of[f] = g;
      std::uint32_t label = true_labels[f];
      if (label >= label_counts.size()) label_counts.resize(label + 1, 0);
      ++label_counts[label];
    }
    if (!label_counts.empty()) {
      purity_hits += *std::max_element(label_counts.begin(),
                                       label_counts.end());
    }
  }
  m.stddev_group_size = std::sqrt(var / p.k);
  m.purity = static_cast<double>(purity_hits) / p.n;

  double within_sum = 0.0, cross_sum = 0.0;
  std::uint64_t within_pairs = 0, cross_pairs = 0;
  for (std::uint32_t i = 0; i < p.n; ++i) {
    for (std::uint32_t j = i + 1; j < p.n; ++j) {
      if (group_of[i] == group_of[j]) {
        within_sum += s.at(i, j);
        ++within_pairs;
      } else {
        cross_sum += s.at(i, j);
        ++cross_pairs;
      }
    }
  }
  m.within_similarity = within_pairs == 0 ? 0.0 : within_sum / within_pairs;
  m.cross_similarity = cross_pairs == 0 ? 0.0 : cross_sum / cross_pairs;
  return m;
}

}  // namespace svp
