#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flip/dataplane.hpp"
#include "flip/node_id.hpp"

namespace flip {

/// Every source publishes one scalar per period for `epochs` periods.
/// Values are uniform in [value_min, value_max), publish offsets uniform in
/// [0, max_offset_ms].
struct Workload {
  double period_ms = 100.0;
  std::size_t epochs = 100;
  double value_min = 0.0;
  double value_max = 100.0;
  double max_offset_ms = 3.0;

  double horizon_ms() const noexcept { return period_ms * static_cast<double>(epochs); }
  nlohmann::json to_json() const;
};

struct SourceSample {
  NodeId source;
  std::uint64_t epoch = 0;
  double timestamp_ms = 0.0;
  double value = 0.0;
};

struct WorkloadTrace {
  std::vector<SourceSample> samples;  // by (timestamp, source)
  std::map<NodeId, std::vector<double>> values;  // source -> value per epoch

  double value(const NodeId& source, std::uint64_t epoch) const { return values.at(source).at(epoch); }
};

/// Deterministic for a given (workload, sources, seed). Sources are drawn
/// in sorted order, epoch by epoch.
WorkloadTrace generate_workload(const Workload& workload, std::vector<NodeId> sources, std::uint64_t seed);

/// Injects every sample at its source, addressed to `destination`.
void inject_workload(Fabric& fabric, const WorkloadTrace& trace, const NodeId& destination, const std::string& user);

/// Uniform double in [0, 1) from a 64-bit generator, identical on every platform.
template <typename Engine>
double unit_uniform(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace flip
