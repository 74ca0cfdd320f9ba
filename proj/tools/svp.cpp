// svp — subscene partitioning toolkit.
//
// Subcommands: partition, analyze, bench, simulate, oracle. All output goes
// to JSON files (optionally echoed to stdout with --print); logs go to
// stderr. Every random choice derives from --seed, so runs are reproducible
// and independent of --workers.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "svp/anchor_schedule.hpp"
#include "svp/cost_model.hpp"
#include "svp/descriptor_io.hpp"
#include "svp/errors.hpp"
#include "svp/mock_backbone.hpp"
#include "svp/rng.hpp"
#include "svp/scene_graph.hpp"
#include "svp/soft_partition.hpp"

namespace {

using nlohmann::json;

int resolve_workers(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("SVP_WORKERS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw svp::config_error(std::string("invalid SVP_WORKERS value: ") + env);
    }
    return static_cast<int>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

svp::DescriptorSet load_input_descriptors(const std::string& path) {
  switch (svp::detect_file_kind(path)) {
    case svp::DescriptorFileKind::tokens:
      return svp::pool_descriptors(svp::load_tokens(path));
    case svp::DescriptorFileKind::descriptors:
      return svp::load_descriptors(path);
  }
  throw svp::format_error(path + ": unrecognized input format");
}

void write_json_output(const json& j, const std::string& path, bool print) {
  std::ofstream out(path);
  if (!out) throw svp::format_error("cannot open " + path + " for writing");
  out << j.dump() << "\n";
  if (!out) throw svp::format_error("write failed for " + path);
  if (print) std::cout << j.dump(2) << "\n";
}

std::string derived_path(const std::string& out, const std::string& strip_ext,
                         const std::string& suffix) {
  std::string base = out;
  if (base.size() > strip_ext.size() &&
      base.compare(base.size() - strip_ext.size(), strip_ext.size(),
                   strip_ext) == 0) {
    base.resize(base.size() - strip_ext.size());
  }
  return base + suffix;
}

json weights_json(const svp::GroupWeights& w) {
  return {{"coh", w.coh}, {"bal", w.bal}, {"sharp", w.sharp}};
}

json metrics_json(const svp::PartitionMetrics& m) {
  return {{"min_group_size", m.min_group_size},
          {"max_group_size", m.max_group_size},
          {"stddev_group_size", m.stddev_group_size},
          {"within_similarity", m.within_similarity},
          {"cross_similarity", m.cross_similarity},
          {"purity", m.purity}};
}

struct CommonFlags {
  std::string input;
  std::string out;
  double threshold = 0.75;
  std::uint32_t k_max = 8;
  std::uint32_t groups = 0;  // 0 = derive from density
  double lambda_coh = 1.0;
  double lambda_bal = -1.0;  // <0 = default 1/N
  double lambda_sharp = 0.1;
  std::uint32_t iters = 10;
  double step = 0.5;
  std::uint64_t seed = 0;
  std::uint32_t tokens_per_frame = 1000;
  int workers = 0;
  std::uint32_t anchor = 0;
  std::uint32_t cap = 0;  // 0 = default ceil(N/K)+1
  bool print = false;
};

svp::GroupWeights resolve_weights(const CommonFlags& flags, std::uint32_t n) {
  svp::GroupWeights w = svp::default_weights(n);
  w.coh = flags.lambda_coh;
  if (flags.lambda_bal >= 0.0) w.bal = flags.lambda_bal;
  w.sharp = flags.lambda_sharp;
  if (w.coh < 0.0 || w.sharp < 0.0) {
    throw svp::config_error("loss weights must be nonnegative");
  }
  if (w.coh == 0.0 && w.bal == 0.0 && w.sharp == 0.0) {
    throw svp::config_error("at least one loss weight must be positive");
  }
  return w;
}

struct PipelineOutput {
  svp::Partition partition;
  svp::ExecutionPlan plan;
  svp::DensityEstimate density;
  svp::GroupWeights weights;
  std::vector<double> loss_trace;
  std::uint32_t k = 0;
  std::uint32_t cap = 0;
  svp::SimilarityGraph similarity;
};

PipelineOutput run_pipeline(const CommonFlags& flags) {
  int workers = resolve_workers(flags.workers);
  svp::DescriptorSet set = load_input_descriptors(flags.input);
  PipelineOutput out;
  out.similarity = svp::similarity_matrix(set, {.workers = workers});
  out.density = svp::density(out.similarity, flags.threshold);
  std::optional<std::uint32_t> override_k;
  if (flags.groups > 0) override_k = flags.groups;
  out.k = svp::group_count(out.density, flags.k_max, set.num_frames,
                           override_k);
  out.weights = resolve_weights(flags, set.num_frames);

  svp::OptimizeConfig cfg;
  cfg.iterations = flags.iters;
  cfg.step = flags.step;
  cfg.seed = flags.seed;
  svp::OptimizeResult opt =
      svp::optimize(out.similarity, out.k, out.weights, cfg);
  out.loss_trace = opt.loss_trace;

  if (flags.anchor >= set.num_frames) {
    throw svp::config_error("anchor " + std::to_string(flags.anchor) +
                            " outside [0, " +
                            std::to_string(set.num_frames) + ")");
  }
  out.cap = flags.cap > 0 ? flags.cap
                          : svp::default_cap(set.num_frames, out.k);
  out.partition = svp::rebalance(svp::harden(opt.assignment, flags.anchor),
                                 out.similarity, out.cap);
  out.plan = svp::build_plan(out.partition);
  return out;
}

int cmd_partition(const CommonFlags& flags, const std::string& plan_out) {
  PipelineOutput result = run_pipeline(flags);
  json j = {{"version", 1},
            {"n", result.partition.n},
            {"k", result.partition.k},
            {"anchor", result.partition.anchor},
            {"weights", weights_json(result.weights)},
            {"iterations", flags.iters},
            {"seed", flags.seed},
            {"groups", result.partition.groups},
            {"loss_trace", result.loss_trace},
            {"density", result.density.density},
            {"threshold", result.density.threshold}};
  write_json_output(j, flags.out, flags.print);

  std::string plan_path = plan_out.empty()
                              ? derived_path(flags.out, ".json", ".plan.json")
                              : plan_out;
  write_json_output(svp::plan_to_json(result.plan), plan_path, false);
  std::cerr << "partition: n=" << result.partition.n
            << " k=" << result.partition.k
            << " density=" << result.density.density << " -> " << flags.out
            << ", " << plan_path << "\n";
  return 0;
}

int cmd_analyze(const CommonFlags& flags) {
  int workers = resolve_workers(flags.workers);
  svp::DescriptorSet set = load_input_descriptors(flags.input);
  svp::SimilarityGraph graph =
      svp::similarity_matrix(set, {.workers = workers});
  svp::DensityEstimate est = svp::density(graph, flags.threshold);
  std::optional<std::uint32_t> override_k;
  if (flags.groups > 0) override_k = flags.groups;
  std::uint32_t k =
      svp::group_count(est, flags.k_max, set.num_frames, override_k);
  svp::SimilarityStats stats = svp::similarity_stats(graph);
  json j = {{"n", set.num_frames},
            {"threshold", est.threshold},
            {"density", est.density},
            {"k", k},
            {"per_frame_counts", est.per_frame_counts},
            {"similarity_stats",
             {{"min", stats.min}, {"mean", stats.mean}, {"max", stats.max}}}};
  write_json_output(j, flags.out, flags.print);
  std::cerr << "analyze: n=" << set.num_frames << " density=" << est.density
            << " k=" << k << " -> " << flags.out << "\n";
  return 0;
}

int cmd_bench(const CommonFlags& flags, std::uint32_t channels,
              bool model_only, bool canonical, std::uint64_t token_guard) {
  svp::ExecutionPlan plan = svp::load_plan(flags.input);
  std::vector<std::string> violations = svp::validate_plan(plan);
  if (!violations.empty()) {
    throw svp::data_error(flags.input + ": invalid plan: " + violations[0]);
  }
  svp::CostReport report = svp::plan_cost(plan, flags.tokens_per_frame);
  if (model_only) {
    write_json_output(svp::cost_report_to_json(report), flags.out,
                      flags.print);
    std::cerr << "bench: model-only speedup=" << report.speedup << " -> "
              << flags.out << "\n";
    return 0;
  }

  int workers = resolve_workers(flags.workers);
  svp::AttentionRun baseline = svp::mock_global_attention(
      plan.n, flags.tokens_per_frame, channels,
      svp::derive_rng(flags.seed, "bench/baseline").next_u64(), token_guard);
  svp::BenchResult bench = svp::run_plan(plan, flags.tokens_per_frame,
                                         channels, workers, flags.seed,
                                         token_guard);

  // Canonical output strips run-environment metadata (timings and the
  // worker count) so reruns compare byte for byte.
  double total_ms = canonical ? 0.0 : bench.total_ms;
  double baseline_ms = canonical ? 0.0 : baseline.elapsed_ms;
  std::vector<double> per_ms = bench.per_subscene_ms;
  if (canonical) per_ms.assign(per_ms.size(), 0.0);

  json j = {{"plan", svp::plan_to_json(plan)},
            {"cost_report", svp::cost_report_to_json(report)},
            {"bench",
             {{"workers", canonical ? 0 : bench.workers},
              {"total_ms", total_ms},
              {"per_subscene_ms", per_ms},
              {"per_subscene_ops", bench.per_subscene_ops},
              {"measured_ops", bench.measured_ops},
              {"checksum", bench.checksum},
              {"baseline_ms", baseline_ms},
              {"baseline_ops", baseline.ops},
              {"baseline_checksum", baseline.checksum}}}};
  write_json_output(j, flags.out, flags.print);
  std::cerr << "bench: measured ratio="
            << static_cast<double>(baseline.ops) / bench.measured_ops
            << " model speedup=" << report.speedup << " workers=" << workers
            << " -> " << flags.out << "\n";
  return 0;
}

int cmd_simulate(const CommonFlags& flags, std::uint32_t frames,
                 std::uint32_t clusters, double noise_sigma,
                 std::uint32_t channels, const std::string& labels_out) {
  svp::SyntheticScene scene =
      svp::synth_scene(frames, clusters, noise_sigma, flags.seed, channels);
  svp::save_descriptors(scene.descriptors, flags.out);
  std::string labels_path =
      labels_out.empty() ? derived_path(flags.out, ".svgd", ".labels.json")
                         : labels_out;
  json j = {{"version", 1},
            {"n", frames},
            {"num_clusters", clusters},
            {"noise_sigma", noise_sigma},
            {"channels", channels},
            {"seed", flags.seed},
            {"within_sim_target", scene.params.within_sim_target},
            {"cross_sim_target", scene.params.cross_sim_target},
            {"labels", scene.true_labels}};
  write_json_output(j, labels_path, flags.print);
  std::cerr << "simulate: n=" << frames << " clusters=" << clusters
            << " sigma=" << noise_sigma << " -> " << flags.out << ", "
            << labels_path << "\n";
  return 0;
}

int cmd_oracle(const CommonFlags& flags, const std::string& labels_path,
               std::uint64_t enumeration_limit) {
  PipelineOutput result = run_pipeline(flags);
  double optimizer_loss = svp::group_loss(svp::one_hot(result.partition),
                                          result.similarity, result.weights);
  svp::OracleResult oracle = svp::brute_force_partition(
      result.similarity, result.k, result.weights, result.cap, flags.anchor,
      enumeration_limit);

  json j = {{"n", result.partition.n},
            {"k", result.k},
            {"cap", result.cap},
            {"weights", weights_json(result.weights)},
            {"optimizer",
             {{"loss", optimizer_loss},
              {"groups", result.partition.groups},
              {"loss_trace", result.loss_trace}}},
            {"oracle",
             {{"loss", oracle.loss},
              {"groups", oracle.partition.groups},
              {"enumerated", oracle.enumerated}}},
            {"ratio", oracle.loss > 0.0 ? optimizer_loss / oracle.loss : 1.0},
            {"dominance_ok", oracle.loss <= optimizer_loss + 1e-12}};

  if (!labels_path.empty()) {
    std::ifstream in(labels_path);
    if (!in) throw svp::format_error("cannot open " + labels_path);
    json lj;
    try {
      in >> lj;
    } catch (const json::exception& e) {
      throw svp::format_error(labels_path + ": " + e.what());
    }
    std::vector<std::uint32_t> labels =
        lj.at("labels").get<std::vector<std::uint32_t>>();
    j["metrics"] = {
        {"optimizer", metrics_json(svp::partition_metrics(
                          result.partition, labels, result.similarity))},
        {"oracle", metrics_json(svp::partition_metrics(
                       oracle.partition, labels, result.similarity))}};
  }
  write_json_output(j, flags.out, flags.print);
  std::cerr << "oracle: optimizer_loss=" << optimizer_loss
            << " oracle_loss=" << oracle.loss << " ("
            << oracle.enumerated << " partitions) -> " << flags.out << "\n";
  return 0;
}

void add_common_input(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--input", flags.input, "input file")->required();
}

void add_common_output(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--out", flags.out, "output JSON path")->required();
  cmd->add_flag("--print", flags.print, "pretty-print the JSON to stdout");
}

void add_graph_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--threshold", flags.threshold,
                  "similarity threshold for density, in (-1, 1)");
  cmd->add_option("--k-max", flags.k_max, "maximum subscene count");
  cmd->add_option("--groups", flags.groups,
                  "override the density-derived group count");
}

void add_optimizer_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--lambda-coh", flags.lambda_coh, "coherence weight");
  cmd->add_option("--lambda-bal", flags.lambda_bal,
                  "balance weight (default 1/N)");
  cmd->add_option("--lambda-sharp", flags.lambda_sharp, "sharpness weight");
  cmd->add_option("--iters", flags.iters, "gradient descent iterations");
  cmd->add_option("--step", flags.step, "gradient descent step size");
  cmd->add_option("--anchor", flags.anchor, "anchor frame index");
  cmd->add_option("--cap", flags.cap,
                  "per-group size cap (default ceil(N/K)+1)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subscene partitioning toolkit"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string plan_out;
  std::string labels_out;
  std::string labels_in;
  std::uint32_t sim_frames = 0;
  std::uint32_t sim_clusters = 1;
  double sim_sigma = 0.05;
  std::uint32_t channels = 16;
  bool model_only = false;
  bool canonical = false;
  std::uint64_t token_guard = svp::kDefaultTokenGuard;
  std::uint64_t enumeration_limit = 10'000'000;

  CLI::App* partition = app.add_subcommand(
      "partition", "soft-assignment partition plus execution plan");
  add_common_input(partition, flags);
  add_common_output(partition, flags);
  add_graph_flags(partition, flags);
  add_optimizer_flags(partition, flags);
  partition->add_option("--seed", flags.seed, "seed for all randomness");
  partition->add_option("--workers", flags.workers,
                        "worker threads (default: SVP_WORKERS or cores)");
  partition->add_option("--plan-out", plan_out,
                        "execution plan path (default: <out>.plan.json)");

  CLI::App* analyze =
      app.add_subcommand("analyze", "similarity and density report");
  add_common_input(analyze, flags);
  add_common_output(analyze, flags);
  add_graph_flags(analyze, flags);
  analyze->add_option("--workers", flags.workers, "worker threads");

  CLI::App* bench = app.add_subcommand(
      "bench", "cost model plus mock-attention benchmark for a plan");
  add_common_input(bench, flags);
  add_common_output(bench, flags);
  bench->add_option("--tokens-per-frame", flags.tokens_per_frame,
                    "tokens per frame in the cost model and workload");
  bench->add_option("--channels", channels, "mock workload channels");
  bench->add_option("--seed", flags.seed, "seed for workload features");
  bench->add_option("--workers", flags.workers, "worker threads");
  bench->add_flag("--model-only", model_only, "emit the cost report only");
  bench->add_flag("--canonical", canonical,
                  "zero out timing fields for byte comparisons");
  bench->add_option("--token-guard", token_guard,
                    "max tokens per mock attention call");

  CLI::App* simulate =
      app.add_subcommand("simulate", "generate a synthetic descriptor scene");
  add_common_output(simulate, flags);
  simulate->add_option("--frames", sim_frames, "number of frames")
      ->required();
  simulate->add_option("--clusters", sim_clusters, "number of clusters");
  simulate->add_option("--noise-sigma", sim_sigma, "descriptor noise sigma");
  simulate->add_option("--channels", channels, "descriptor channels");
  simulate->add_option("--seed", flags.seed, "scene seed");
  simulate->add_option("--labels-out", labels_out,
                       "labels sidecar path (default: <out>.labels.json)");

  CLI::App* oracle = app.add_subcommand(
      "oracle", "compare the optimizer against the brute-force oracle");
  add_common_input(oracle, flags);
  add_common_output(oracle, flags);
  add_graph_flags(oracle, flags);
  add_optimizer_flags(oracle, flags);
  oracle->add_option("--seed", flags.seed, "seed for all randomness");
  oracle->add_option("--workers", flags.workers, "worker threads");
  oracle->add_option("--labels", labels_in,
                     "labels sidecar for purity metrics");
  oracle->add_option("--enumeration-limit", enumeration_limit,
                     "max cap-feasible partitions to enumerate");

  try {
    app.parse(argc, argv);
    if (partition->parsed()) return cmd_partition(flags, plan_out);
    if (analyze->parsed()) return cmd_analyze(flags);
    if (bench->parsed()) {
      return cmd_bench(flags, channels, model_only, canonical, token_guard);
    }
    if (simulate->parsed()) {
      return cmd_simulate(flags, sim_frames, sim_clusters, sim_sigma, channels,
                          labels_out);
    }
    if (oracle->parsed()) return cmd_oracle(flags, labels_in, enumeration_limit);
    return 2;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const svp::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const svp::format_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const svp::infeasible_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
