#include "svp/cost_model.hpp"

#include "svp/errors.hpp"

namespace svp {

double attention_cost(std::uint64_t num_frames,
                      std::uint64_t tokens_per_frame) {
  double m = static_cast<double>(num_frames) * tokens_per_frame;
  return m * m;
}

CostReport plan_cost_from_lengths(std::uint32_t n,
                                  std::uint32_t tokens_per_frame,
                                  const std::vector<std::uint32_t>& lengths) {
  if (n < 1 || tokens_per_frame < 1) {
    throw config_error("frame and token counts must be >= 1");
  }
  CostReport report;
  report.tokens_per_frame = tokens_per_frame;
  report.baseline_ops = attention_cost(n, tokens_per_frame);
  report.overhead_ops = static_cast<double>(n) * n;
  report.per_subscene_ops.reserve(lengths.size());
  for (std::uint32_t len : lengths) {
    double ops = attention_cost(len, tokens_per_frame);
    report.per_subscene_ops.push_back(ops);
    report.partitioned_ops += ops;
  }
  report.speedup =
      report.baseline_ops / (report.partitioned_ops + report.overhead_ops);
  return report;
}

CostReport plan_cost(const ExecutionPlan& plan,
                     std::uint32_t tokens_per_frame) {
  std::vector<std::uint32_t> lengths;
  lengths.reserve(plan.subscenes.size());
  for (const auto& seq : plan.subscenes) {
    lengths.push_back(static_cast<std::uint32_t>(seq.size()));
  }
  return plan_cost_from_lengths(plan.n, tokens_per_frame, lengths);
}

double ideal_speedup(std::uint32_t n, std::uint32_t tokens_per_frame,
                     std::uint32_t k) {
  if (k < 1) throw config_error("k must be >= 1");
  double per_group = static_cast<double>(n) / k * tokens_per_frame;
  return attention_cost(n, tokens_per_frame) / (k * per_group * per_group);
}

nlohmann::json cost_report_to_json(const CostReport& report) {
  return {{"baseline_ops", report.baseline_ops},
          {"partitioned_ops", report.partitioned_ops},
          {"overhead_ops", report.overhead_ops},
          {"speedup", report.speedup},
          {"per_subscene_ops", report.per_subscene_ops},
          {"tokens_per_frame", report.tokens_per_frame}};
}

}  // namespace svp
