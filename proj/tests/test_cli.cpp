#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "svp/descriptor_io.hpp"
#include "test_util.hpp"

namespace {

using nlohmann::json;

std::string cli() { return SVP_CLI_PATH; }

int run(const std::string& args, const std::string& stderr_to = "") {
  std::string cmd = cli() + " " + args;
  if (!stderr_to.empty()) cmd += " 2>" + stderr_to;
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load_json(const std::string& path) { return json::parse(slurp(path)); }

std::string path(const std::string& name) {
  return svp::test::artifact_path(name);
}

}  // namespace

TEST_CASE("CLI pipeline runs end to end") {
  REQUIRE(run("simulate --out " + path("cli_scene.svgd") +
              " --frames 24 --clusters 3 --noise-sigma 0.08 --seed 11") == 0);

  REQUIRE(run("analyze --input " + path("cli_scene.svgd") + " --out " +
              path("cli_analyze.json")) == 0);
  json analyze = load_json(path("cli_analyze.json"));
  CHECK(analyze.at("n") == 24);
  CHECK(analyze.at("threshold") == 0.75);
  CHECK(analyze.at("per_frame_counts").size() == 24);
  CHECK(analyze.at("similarity_stats").contains("min"));
  CHECK(analyze.at("similarity_stats").contains("mean"));
  CHECK(analyze.at("similarity_stats").contains("max"));
  CHECK(analyze.at("density").is_number());
  CHECK(analyze.at("k").is_number_unsigned());

  REQUIRE(run("partition --input " + path("cli_scene.svgd") + " --out " +
              path("cli_part.json") + " --plan-out " + path("cli_plan.json") +
              " --groups 3 --seed 7") == 0);
  json part = load_json(path("cli_part.json"));
  CHECK(part.at("version") == 1);
  CHECK(part.at("n") == 24);
  CHECK(part.at("k") == 3);
  CHECK(part.at("anchor") == 0);
  CHECK(part.at("groups").size() == 3);
  CHECK(part.at("loss_trace").size() == 11);
  CHECK(part.at("weights").at("bal").get<double>() ==
        doctest::Approx(1.0 / 24));
  CHECK(part.at("seed") == 7);
  CHECK(part.at("iterations") == 10);
  CHECK(part.contains("density"));
  CHECK(part.at("threshold") == 0.75);

  json plan = load_json(path("cli_plan.json"));
  CHECK(plan.at("version") == 1);
  CHECK(plan.at("n") == 24);
  CHECK(plan.at("anchor") == 0);
  CHECK(plan.at("subscenes").size() == 3);
  CHECK(plan.at("subscenes")[0].at("frames")[0] == 0);

  REQUIRE(run("bench --input " + path("cli_plan.json") + " --out " +
              path("cli_bench.json") +
              " --tokens-per-frame 8 --channels 4 --canonical") == 0);
  json bench = load_json(path("cli_bench.json"));
  CHECK(bench.contains("plan"));
  CHECK(bench.at("cost_report").contains("speedup"));
  const json& b = bench.at("bench");
  CHECK(b.at("total_ms") == 0.0);
  CHECK(b.at("baseline_ms") == 0.0);
  CHECK(b.at("measured_ops").is_number_unsigned());
  CHECK(b.at("baseline_ops").is_number_unsigned());
  CHECK(b.at("per_subscene_ms").size() == 3);
  CHECK(b.at("workers").is_number());

  REQUIRE(run("bench --input " + path("cli_plan.json") + " --out " +
              path("cli_model.json") + " --model-only") == 0);
  json model = load_json(path("cli_model.json"));
  CHECK(model.contains("baseline_ops"));
  CHECK(model.contains("partitioned_ops"));
  CHECK(model.contains("overhead_ops"));
  CHECK(model.contains("speedup"));
  CHECK(model.contains("per_subscene_ops"));
  CHECK(model.at("tokens_per_frame") == 1000);
}

TEST_CASE("partition output is deterministic and worker independent") {
  REQUIRE(run("simulate --out " + path("det_scene.svgd") +
              " --frames 20 --clusters 2 --noise-sigma 0.1 --seed 5") == 0);
  std::string base = "partition --input " + path("det_scene.svgd") +
                     " --seed 9 --groups 2";
  REQUIRE(run(base + " --out " + path("det1.json") + " --plan-out " +
              path("det_plan1.json") + " --workers 1") == 0);
  REQUIRE(run(base + " --out " + path("det2.json") + " --plan-out " +
              path("det_plan2.json") + " --workers 4") == 0);
  CHECK(slurp(path("det1.json")) == slurp(path("det2.json")));
  CHECK(slurp(path("det_plan1.json")) == slurp(path("det_plan2.json")));
}

TEST_CASE("oracle subcommand reports dominance") {
  REQUIRE(run("simulate --out " + path("or_scene.svgd") +
              " --frames 8 --clusters 2 --noise-sigma 0.1 --seed 2") == 0);
  REQUIRE(run("oracle --input " + path("or_scene.svgd") + " --out " +
              path("or.json") + " --groups 2 --cap 5 --labels " +
              path("or_scene.labels.json")) == 0);
  json oracle = load_json(path("or.json"));
  CHECK(oracle.at("dominance_ok") == true);
  CHECK(oracle.at("oracle").at("loss").get<double>() <=
        oracle.at("optimizer").at("loss").get<double>() + 1e-12);
  // Splits of 8 into two groups capped at 5: {5,3} gives C(8,5) = 56 and
  // {4,4} gives C(8,4)/2 = 35.
  CHECK(oracle.at("oracle").at("enumerated").get<std::uint64_t>() == 91);
  CHECK(oracle.at("metrics").at("oracle").contains("purity"));
}

TEST_CASE("configuration errors exit with code 2") {
  CHECK(run("partition --input " + path("det_scene.svgd") + " --out " +
            path("bad.json") + " --groups 99",
            path("stderr_cfg.txt")) == 2);
  CHECK(run("analyze --input " + path("det_scene.svgd") + " --out " +
            path("bad.json") + " --threshold 1.5",
            path("stderr_cfg2.txt")) == 2);
}

TEST_CASE("format errors exit with code 3 and name the frame") {
  // A descriptor file with an all-zero row.
  svp::DescriptorSet set;
  set.num_frames = 3;
  set.channels = 2;
  set.descriptors = {1.0f, 0.5f, 0.0f, 0.0f, 0.25f, 1.0f};
  svp::save_descriptors(set, path("zero_row.svgd"));
  CHECK(run("partition --input " + path("zero_row.svgd") + " --out " +
            path("bad.json"),
            path("stderr_zero.txt")) == 3);
  std::string message = slurp(path("stderr_zero.txt"));
  CHECK(message.find("frame 1") != std::string::npos);

  std::ofstream garbage(path("garbage.svgd"), std::ios::binary);
  garbage << "not a descriptor file";
  garbage.close();
  CHECK(run("analyze --input " + path("garbage.svgd") + " --out " +
            path("bad.json"),
            path("stderr_magic.txt")) == 3);
}

TEST_CASE("token inputs are pooled before analysis") {
  svp::TokenStack stack;
  stack.num_frames = 3;
  stack.tokens_per_frame = 2;
  stack.channels = 4;
  stack.data.resize(24);
  svp::Rng rng(8);
  for (float& v : stack.data) {
    v = static_cast<float>(rng.next_uniform(0.1, 1.0));
  }
  svp::save_tokens(stack, path("tokens.svgt"));
  REQUIRE(run("analyze --input " + path("tokens.svgt") + " --out " +
              path("tokens_analyze.json")) == 0);
  json analyze = load_json(path("tokens_analyze.json"));
  CHECK(analyze.at("n") == 3);
}

TEST_CASE("SVP_WORKERS is the fallback worker count") {
  std::string cmd = "SVP_WORKERS=3 " + cli() + " bench --input " +
                    path("cli_plan.json") + " --out " +
                    path("env_bench.json") +
                    " --tokens-per-frame 8 --channels 4 2>/dev/null";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  json bench = load_json(path("env_bench.json"));
  CHECK(bench.at("bench").at("workers") == 3);

  std::string bad = "SVP_WORKERS=zero " + cli() + " bench --input " +
                    path("cli_plan.json") + " --out " +
                    path("env_bench2.json") +
                    " --tokens-per-frame 8 --channels 4 2>/dev/null";
  CHECK(WEXITSTATUS(std::system(bad.c_str())) == 2);
}

TEST_CASE("infeasible instances exit with code 4") {
  REQUIRE(run("simulate --out " + path("big_scene.svgd") +
              " --frames 40 --clusters 2 --noise-sigma 0.05 --seed 1") == 0);
  CHECK(run("oracle --input " + path("big_scene.svgd") + " --out " +
            path("bad.json") + " --groups 2 --cap 40",
            path("stderr_inf.txt")) == 4);
}
