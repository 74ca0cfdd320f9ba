#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "svp/soft_partition.hpp"

namespace svp {

// Anchor-shared execution schedule: every subscene sequence starts with the
// shared anchor frame, each non-anchor frame appears in exactly one
// subscene, and owner_of_anchor names the subscene whose output of the
// anchor is canonical. Subscenes are mutually independent units of work.
struct ExecutionPlan {
  std::uint32_t n = 0;
  std::uint32_t anchor = 0;
  std::uint32_t owner_of_anchor = 0;
  std::vector<std::vector<std::uint32_t>> subscenes;
};

// Opaque fixed-width records, one per sequence position.
struct RecordBlock {
  std::size_t record_size = 0;
  std::vector<std::byte> data;

  std::size_t count() const {
    return record_size == 0 ? 0 : data.size() / record_size;
  }
  std::span<const std::byte> record(std::size_t i) const {
    return {data.data() + i * record_size, record_size};
  }
  void append(std::span<const std::byte> rec) {
    data.insert(data.end(), rec.begin(), rec.end());
  }
};

// One record per original frame, in frame order.
struct FrameOutputs {
  std::uint32_t n = 0;
  std::size_t record_size = 0;
  std::vector<std::byte> data;

  std::span<const std::byte> record(std::uint32_t frame) const {
    return {data.data() + static_cast<std::size_t>(frame) * record_size,
            record_size};
  }
};

// Subscene i = [anchor] ++ sorted(group i members minus anchor).
ExecutionPlan build_plan(const Partition& p);

// Reassembles per-subscene outputs into frame order. The anchor's record is
// taken from owner_of_anchor; the duplicate anchor records other subscenes
// produced for coordinate fixing are dropped. Throws plan_violation_error
// (naming the subscene) on any length or record-width mismatch.
FrameOutputs scatter_outputs(const ExecutionPlan& plan,
                             const std::vector<RecordBlock>& per_subscene);

// Checks every plan invariant and returns all violations found.
std::vector<std::string> validate_plan(const ExecutionPlan& plan);

// Plan JSON, the integration contract for external runners.
nlohmann::json plan_to_json(const ExecutionPlan& plan);
ExecutionPlan plan_from_json(const nlohmann::json& j);
ExecutionPlan load_plan(const std::string& path);
void save_plan(const ExecutionPlan& plan, const std::string& path);

}  // namespace svp
