#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>

namespace flip {

/// Name of a node in the network graph ("bs17", "sw3", "e-sw3", "user").
/// Ordering is plain lexicographic on the underlying string.
class NodeId {
 public:
  NodeId() = default;
  explicit NodeId(std::string value) : value_(std::move(value)) {}
  explicit NodeId(std::string_view value) : value_(value) {}
  explicit NodeId(const char* value) : value_(value) {}

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  friend bool operator==(const NodeId&, const NodeId&) = default;
  friend std::strong_ordering operator<=>(const NodeId& a, const NodeId& b) {
    return a.value_.compare(b.value_) <=> 0;
  }

 private:
  std::string value_;
};

/// True when `s` matches [A-Za-z][A-Za-z0-9_-]*.
bool is_valid_node_id(std::string_view s) noexcept;

std::ostream& operator<<(std::ostream& os, const NodeId& id);

}  // namespace flip

template <>
struct std::hash<flip::NodeId> {
  std::size_t operator()(const flip::NodeId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
