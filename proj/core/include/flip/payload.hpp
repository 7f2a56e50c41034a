#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flip/dsl.hpp"
#include "flip/node_id.hpp"
#include "flip/task_graph.hpp"

namespace flip {

/// Sensor data carried by a packet: a scalar, a non-empty vector, or a
/// rectangular matrix.
class Payload {
 public:
  using Vector = std::vector<double>;
  using Matrix = std::vector<std::vector<double>>;

  Payload() = default;
  static Payload scalar(double value);
  static Payload vector(Vector values);
  static Payload matrix(Matrix rows);

  DataType type() const noexcept;
  double as_scalar() const;
  const Vector& as_vector() const;
  const Matrix& as_matrix() const;

  /// Shape as (rows, cols); scalars are (0, 0) and vectors (0, n).
  std::pair<std::size_t, std::size_t> shape() const noexcept;

  nlohmann::json to_json() const;
  static Payload from_json(const nlohmann::json& j);

  friend bool operator==(const Payload&, const Payload&) = default;

 private:
  std::variant<double, Vector, Matrix> value_{0.0};
};

/// Applies `op` elementwise over `operands` in order. Sub and Mul fold left;
/// Avg is the ordered sum divided by the count. ShapeMismatch on differing
/// types or shapes.
Payload combine(OpKind op, std::span<const Payload> operands);

struct PacketRecord {
  std::uint64_t id = 0;
  NodeId source;
  NodeId final_destination;
  std::string user{kDefaultUser};
  std::uint64_t epoch = 0;
  double timestamp_ms = 0.0;
  Payload payload;
  std::size_t hop_count = 0;
  bool derived = false;  // emitted by an engine

  nlohmann::json to_json() const;
};

}  // namespace flip
