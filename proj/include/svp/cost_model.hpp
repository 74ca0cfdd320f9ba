#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "svp/anchor_schedule.hpp"

namespace svp {

// Closed-form arithmetic cost of global attention, in abstract token-pair
// interaction units (the per-pair channel constant cancels in every ratio
// we report). Frame-wise attention is identical on both sides and excluded.
struct CostReport {
  double baseline_ops = 0.0;
  double partitioned_ops = 0.0;
  double overhead_ops = 0.0;
  double speedup = 0.0;
  std::vector<double> per_subscene_ops;
  std::uint32_t tokens_per_frame = 0;
};

// (num_frames * tokens_per_frame)^2
double attention_cost(std::uint64_t num_frames,
                      std::uint64_t tokens_per_frame);

// baseline = (N*T)^2, per-subscene = (len_i*T)^2, overhead = N^2 for the
// frame-level similarity/assignment work, speedup =
// baseline / (partitioned + overhead).
CostReport plan_cost(const ExecutionPlan& plan, std::uint32_t tokens_per_frame);

CostReport plan_cost_from_lengths(std::uint32_t n,
                                  std::uint32_t tokens_per_frame,
                                  const std::vector<std::uint32_t>& lengths);

// Idealized factor with K anchor-free groups of exactly N/K frames and no
// overhead; algebraically equal to K.
double ideal_speedup(std::uint32_t n, std::uint32_t tokens_per_frame,
                     std::uint32_t k);

nlohmann::json cost_report_to_json(const CostReport& report);

}  // namespace svp
