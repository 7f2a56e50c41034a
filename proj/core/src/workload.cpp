#include "flip/workload.hpp"

#include <algorithm>
#include <random>
#include <tuple>

#include <nlohmann/json.hpp>

#include "flip/errors.hpp"

namespace flip {

nlohmann::json Workload::to_json() const {
  return {{"period_ms", period_ms},
          {"epochs", epochs},
          {"value_min", value_min},
          {"value_max", value_max},
          {"max_offset_ms", max_offset_ms}};
}

WorkloadTrace generate_workload(const Workload& w, std::vector<NodeId> sources, std::uint64_t seed) {
  if (!(w.period_ms > 0.0)) throw ValidationError("publish period must be positive");
  if (w.max_offset_ms < 0.0 || w.max_offset_ms >= w.period_ms) {
    throw ValidationError("publish offset must lie in [0, period)");
  }
  std::sort(sources.begin(), sources.end());
  sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
  std::mt19937_64 rng(seed);
  WorkloadTrace trace;
  for (const auto& s : sources) trace.values[s].resize(w.epochs);
  trace.samples.reserve(sources.size() * w.epochs);
  for (std::size_t k = 0; k < w.epochs; ++k) {
    for (const auto& s : sources) {
      const double offset = unit_uniform(rng) * w.max_offset_ms;
      const double value = w.value_min + unit_uniform(rng) * (w.value_max - w.value_min);
      trace.values[s][k] = value;
      trace.samples.push_back(SourceSample{s, k, static_cast<double>(k) * w.period_ms + offset, value});
    }
  }
  std::sort(trace.samples.begin(), trace.samples.end(), [](const SourceSample& a, const SourceSample& b) {
    return std::tie(a.timestamp_ms, a.source, a.epoch) < std::tie(b.timestamp_ms, b.source, b.epoch);
  });
  return trace;
}

void inject_workload(Fabric& fabric, const WorkloadTrace& trace, const NodeId& destination, const std::string& user) {
  for (const auto& s : trace.samples) {
    PacketRecord p;
    p.source = s.source;
    p.final_destination = destination;
    p.user = user;
    p.epoch = s.epoch;
    p.timestamp_ms = s.timestamp_ms;
    p.payload = Payload::scalar(s.value);
    fabric.inject(std::move(p), s.source);
  }
}

}  // namespace flip
