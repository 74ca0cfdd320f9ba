#include "svp/anchor_schedule.hpp"

#include <algorithm>
#include <fstream>

#include "svp/errors.hpp"

namespace svp {

ExecutionPlan build_plan(const Partition& p) {
  ExecutionPlan plan;
  plan.n = p.n;
  plan.anchor = p.anchor;
  plan.subscenes.resize(p.k);
  bool anchor_found = false;
  for (std::uint32_t g = 0; g < p.k; ++g) {
    auto& seq = plan.subscenes[g];
    seq.push_back(p.anchor);
    for (std::uint32_t f : p.groups[g]) {
      if (f == p.anchor) {
        plan.owner_of_anchor = g;
        anchor_found = true;
      } else {
        seq.push_back(f);
      }
    }
    std::sort(seq.begin() + 1, seq.end());
  }
  if (!anchor_found) {
    throw config_error("anchor " + std::to_string(p.anchor) +
                       " is not a member of any group");
  }
  return plan;
}

FrameOutputs scatter_outputs(const ExecutionPlan& plan,
                             const std::vector<RecordBlock>& per_subscene) {
  if (per_subscene.size() != plan.subscenes.size()) {
    throw plan_violation_error(
        "expected " + std::to_string(plan.subscenes.size()) +
        " subscene output blocks, got " + std::to_string(per_subscene.size()));
  }
  std::size_t record_size =
      per_subscene.empty() ? 0 : per_subscene[0].record_size;
  for (std::size_t i = 0; i < per_subscene.size(); ++i) {
    if (per_subscene[i].record_size != record_size) {
      throw plan_violation_error("subscene " + std::to_string(i) +
                                 " record width " +
                                 std::to_string(per_subscene[i].record_size) +
                                 " disagrees with " +
                                 std::to_string(record_size));
    }
    if (per_subscene[i].count() != plan.subscenes[i].size()) {
      throw plan_violation_error(
          "subscene " + std::to_string(i) + " produced " +
          std::to_string(per_subscene[i].count()) + " records for " +
          std::to_string(plan.subscenes[i].size()) + " frames");
    }
  }

  FrameOutputs out;
  out.n = plan.n;
  out.record_size = record_size;
  out.data.resize(static_cast<std::size_t>(plan.n) * record_size);
  auto place = [&](std::uint32_t frame, std::span<const std::byte> rec) {
    std::copy(rec.begin(), rec.end(),
              out.data.begin() + static_cast<std::size_t>(frame) * record_size);
  };
  for (std::size_t i = 0; i < plan.subscenes.size(); ++i) {
    const auto& seq = plan.subscenes[i];
    for (std::size_t pos = 0; pos < seq.size(); ++pos) {
      if (seq[pos] == plan.anchor && i != plan.owner_of_anchor) {
        continue;  // coordinate-fixing duplicate, dropped
      }
      place(seq[pos], per_subscene[i].record(pos));
    }
  }
  return out;
}

std::vector<std::string> validate_plan(const ExecutionPlan& plan) {
  std::vector<std::string> violations;
  auto complain = [&](std::string msg) { violations.push_back(std::move(msg)); };

  if (plan.n == 0) complain("plan has zero frames");
  if (plan.anchor >= plan.n) {
    complain("anchor " + std::to_string(plan.anchor) + " out of range");
  }
  if (plan.subscenes.empty()) complain("plan has no subscenes");
  if (plan.owner_of_anchor >= plan.subscenes.size()) {
    complain("owner_of_anchor " + std::to_string(plan.owner_of_anchor) +
             " out of range");
  }

  std::vector<std::uint32_t> seen(plan.n, 0);
  for (std::size_t i = 0; i < plan.subscenes.size(); ++i) {
    const auto& seq = plan.subscenes[i];
    std::string tag = "subscene " + std::to_string(i);
    if (seq.empty()) {
      complain(tag + " is empty");
      continue;
    }
    if (seq.front() != plan.anchor) {
      complain(tag + " missing anchor at position 0");
    }
    std::uint32_t anchor_count = 0;
    for (std::uint32_t f : seq) {
      if (f >= plan.n) {
        complain(tag + " references frame " + std::to_string(f) +
                 " outside [0, " + std::to_string(plan.n) + ")");
        continue;
      }
      if (f == plan.anchor) {
        ++anchor_count;
      } else {
        ++seen[f];
      }
    }
    if (anchor_count != 1) {
      complain(tag + " carries the anchor " + std::to_string(anchor_count) +
               " times, expected exactly once");
    }
  }
  for (std::uint32_t f = 0; f < plan.n; ++f) {
    if (f == plan.anchor) continue;
    if (seen[f] == 0) complain("missing frame " + std::to_string(f));
    if (seen[f] > 1) {
      complain("duplicate frame " + std::to_string(f) + " (appears " +
               std::to_string(seen[f]) + " times)");
    }
  }
  return violations;
}

nlohmann::json plan_to_json(const ExecutionPlan& plan) {
  nlohmann::json subscenes = nlohmann::json::array();
  for (std::size_t i = 0; i < plan.subscenes.size(); ++i) {
    subscenes.push_back(
        {{"id", i}, {"frames", plan.subscenes[i]}});
  }
  return {{"version", 1},
          {"n", plan.n},
          {"anchor", plan.anchor},
          {"owner_of_anchor", plan.owner_of_anchor},
          {"subscenes", subscenes}};
}

ExecutionPlan plan_from_json(const nlohmann::json& j) {
  ExecutionPlan plan;
  try {
    if (j.at("version").get<int>() != 1) {
      throw format_error("unsupported plan version");
    }
    plan.n = j.at("n").get<std::uint32_t>();
    plan.anchor = j.at("anchor").get<std::uint32_t>();
    plan.owner_of_anchor = j.at("owner_of_anchor").get<std::uint32_t>();
    const auto& subscenes = j.at("subscenes");
    plan.subscenes.resize(subscenes.size());
    for (std::size_t i = 0; i < subscenes.size(); ++i) {
      plan.subscenes[i] =
          subscenes[i].at("frames").get<std::vector<std::uint32_t>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("malformed plan JSON: ") + e.what());
  }
  return plan;
}

ExecutionPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw format_error(path + ": " + e.what());
  }
  return plan_from_json(j);
}

void save_plan(const ExecutionPlan& plan, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw format_error("cannot open " + path + " for writing");
  out << plan_to_json(plan).dump() << "\n";
}

}  // namespace svp
