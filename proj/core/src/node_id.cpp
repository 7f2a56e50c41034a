#include "flip/node_id.hpp"

#include <cctype>

namespace flip {

bool is_valid_node_id(std::string_view s) noexcept {
  if (s.empty() || !std::isalpha(static_cast<unsigned char>(s.front()))) return false;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (!std::isalnum(u) && c != '_' && c != '-') return false;
  }
  return true;
}

std::ostream& operator<<(std::ostream& os, const NodeId& id) { return os << id.str(); }

}  // namespace flip
