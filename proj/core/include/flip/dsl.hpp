#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flip/node_id.hpp"
#include "flip/task_graph.hpp"
#include "flip/topology.hpp"

namespace flip {

inline constexpr std::string_view kDefaultUser = "default";

enum class DataType { Scalar, Vector, Matrix };

std::string_view to_string(DataType type) noexcept;
std::optional<DataType> parse_data_type(std::string_view text) noexcept;

/// One operand as written: a node id, a range "bs1:bs10", an engine
/// reference "sw4[engine]" or a quoted coverage region.
struct SourceTerm {
  enum class Kind { Node, Range, Engine, Region };

  Kind kind = Kind::Node;
  std::string first;  // node id, range start, switch id, or region name
  std::string last;   // range end with the prefix filled in

  static SourceTerm node(std::string id) { return {Kind::Node, std::move(id), {}}; }
  static SourceTerm range(std::string a, std::string b) { return {Kind::Range, std::move(a), std::move(b)}; }
  static SourceTerm engine(std::string sw) { return {Kind::Engine, std::move(sw), {}}; }
  static SourceTerm region(std::string name) { return {Kind::Region, std::move(name), {}}; }

  friend bool operator==(const SourceTerm&, const SourceTerm&) = default;
};

std::string to_string(const SourceTerm& term);

/// Unexpanded expression: an operation over arguments, or a single term.
struct Expr {
  std::optional<OpKind> op;
  SourceTerm term;
  std::vector<Expr> args;

  bool is_operation() const noexcept { return op.has_value(); }
  static Expr leaf(SourceTerm t) { return Expr{std::nullopt, std::move(t), {}}; }
  static Expr operation(OpKind k, std::vector<Expr> a) { return Expr{k, {}, std::move(a)}; }

  friend bool operator==(const Expr&, const Expr&) = default;
};

std::string to_string(const Expr& expr);

struct Requirements {
  std::optional<double> delay_ms;
  std::optional<double> rate_ms;
  std::optional<double> jitter_ms;
  std::optional<std::string> coverage;
  std::optional<DataType> data_type;

  static constexpr double kMaxJitterMs = 25.0;

  bool empty() const noexcept {
    return !delay_ms && !rate_ms && !jitter_ms && !coverage && !data_type;
  }
  friend bool operator==(const Requirements&, const Requirements&) = default;
};

enum class Mode { Automated, Manual };

struct Request {
  Mode mode = Mode::Automated;
  Expr expr;
  SourceTerm destination;
  std::optional<NodeId> switch_id;  // manual only
  Requirements requirements;
  std::string user = std::string(kDefaultUser);

  friend bool operator==(const Request&, const Request&) = default;
};

/// Parses one `datapath_a(...)` or `datapath_m(...)` call.
///
///   datapath_a(max(avg(bs1:bs10),avg("Seoul")),destination<-user,
///              requirement<-{delay=10ms,rate=1s,jitter=5ms},user<-alice)
///   datapath_m({bs201:bs300},switch<-sw4,compute<-min,destination<-sw5[engine])
///
/// `<-` and `←` are both accepted. Whitespace and line breaks are free.
Request parse_request(std::string_view text);

/// Canonical single-line form; parse_request(to_canonical_string(r)) == r.
std::string to_canonical_string(const Request& request);

/// Region name → base stations. Lookup is case-sensitive.
class CoverageMap {
 public:
  void add_region(std::string name, std::vector<NodeId> members);
  const std::vector<NodeId>* find(std::string_view region) const;
  std::vector<std::string> regions() const;
  bool empty() const noexcept { return regions_.empty(); }

  /// {"Seoul": ["bs1", "bs2:bs10"], ...}; entries may be ids or ranges.
  static CoverageMap from_json(const nlohmann::json& document);
  static CoverageMap load_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;

 private:
  std::map<std::string, std::vector<NodeId>, std::less<>> regions_;
};

/// UnknownRegion when the name is not registered.
std::vector<NodeId> translate_coverage(std::string_view region, const CoverageMap& coverage);

/// Resolves ranges, regions and engine references against the topology and
/// builds the finalized task graph.
TaskGraph expand_sources(const Request& request, const Topology& topology, const CoverageMap& coverage);

/// Resolves a destination term to a concrete node (engine refs to the engine id).
NodeId resolve_destination(const SourceTerm& term, const Topology& topology);

/// Reads a request script: one request per line, `#` comments, blank lines
/// ignored. Returns (line number, text) pairs.
std::vector<std::pair<std::size_t, std::string>> split_script(std::string_view text);

}  // namespace flip
