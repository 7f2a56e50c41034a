#include "flip/payload.hpp"

#include <nlohmann/json.hpp>

#include "flip/errors.hpp"

namespace flip {

Payload Payload::scalar(double value) {
  Payload p;
  p.value_ = value;
  return p;
}

Payload Payload::vector(Vector values) {
  if (values.empty()) throw ValidationError("vector payload must be non-empty");
  Payload p;
  p.value_ = std::move(values);
  return p;
}

Payload Payload::matrix(Matrix rows) {
  if (rows.empty() || rows.front().empty()) throw ValidationError("matrix payload must be non-empty");
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) throw ValidationError("matrix payload must be rectangular");
  }
  Payload p;
  p.value_ = std::move(rows);
  return p;
}

DataType Payload::type() const noexcept {
  switch (value_.index()) {
    case 0: return DataType::Scalar;
    case 1: return DataType::Vector;
    default: return DataType::Matrix;
  }
}

double Payload::as_scalar() const {
  if (const auto* v = std::get_if<double>(&value_)) return *v;
  throw ShapeMismatch("payload is not a scalar");
}

const Payload::Vector& Payload::as_vector() const {
  if (const auto* v = std::get_if<Vector>(&value_)) return *v;
  throw ShapeMismatch("payload is not a vector");
}

const Payload::Matrix& Payload::as_matrix() const {
  if (const auto* v = std::get_if<Matrix>(&value_)) return *v;
  throw ShapeMismatch("payload is not a matrix");
}

std::pair<std::size_t, std::size_t> Payload::shape() const noexcept {
  switch (value_.index()) {
    case 0: return {0, 0};
    case 1: return {0, std::get<Vector>(value_).size()};
    default: {
      const auto& m = std::get<Matrix>(value_);
      return {m.size(), m.front().size()};
    }
  }
}

nlohmann::json Payload::to_json() const {
  switch (value_.index()) {
    case 0: return std::get<double>(value_);
    case 1: return std::get<Vector>(value_);
    default: return std::get<Matrix>(value_);
  }
}

Payload Payload::from_json(const nlohmann::json& j) {
  if (j.is_number()) return scalar(j.get<double>());
  if (j.is_array() && !j.empty() && j.front().is_array()) return matrix(j.get<Matrix>());
  if (j.is_array()) return vector(j.get<Vector>());
  throw ParseError("payload must be a number, list or list of lists");
}

namespace {

double fold(OpKind op, const std::vector<double>& xs) {
  double acc = xs.front();
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const double x = xs[i];
    switch (op) {
      case OpKind::Min: acc = x < acc ? x : acc; break;
      case OpKind::Max: acc = x > acc ? x : acc; break;
      case OpKind::Sum:
      case OpKind::Avg: acc += x; break;
      case OpKind::Sub: acc -= x; break;
      case OpKind::Mul: acc *= x; break;
    }
  }
  if (op == OpKind::Avg) acc /= static_cast<double>(xs.size());
  return acc;
}

}  // namespace

Payload combine(OpKind op, std::span<const Payload> operands) {
  if (operands.empty()) throw ArityError(std::string(to_string(op)) + " over no operands");
  const auto type = operands.front().type();
  const auto shape = operands.front().shape();
  for (const auto& p : operands) {
    if (p.type() != type || p.shape() != shape) throw ShapeMismatch("operands differ in type or shape");
  }
  std::vector<double> column(operands.size());
  auto at = [&](auto&& get) {
    for (std::size_t i = 0; i < operands.size(); ++i) column[i] = get(operands[i]);
    return fold(op, column);
  };
  switch (type) {
    case DataType::Scalar:
      return Payload::scalar(at([](const Payload& p) { return p.as_scalar(); }));
    case DataType::Vector: {
      Payload::Vector out(shape.second);
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = at([k](const Payload& p) { return p.as_vector()[k]; });
      return Payload::vector(std::move(out));
    }
    case DataType::Matrix: {
      Payload::Matrix out(shape.first, std::vector<double>(shape.second));
      for (std::size_t r = 0; r < shape.first; ++r) {
        for (std::size_t c = 0; c < shape.second; ++c) {
          out[r][c] = at([r, c](const Payload& p) { return p.as_matrix()[r][c]; });
        }
      }
      return Payload::matrix(std::move(out));
    }
  }
  throw ShapeMismatch("unknown payload type");
}

nlohmann::json PacketRecord::to_json() const {
  return {{"id", id},
          {"source", source.str()},
          {"final_destination", final_destination.str()},
          {"user", user},
          {"epoch", epoch},
          {"timestamp_ms", timestamp_ms},
          {"payload", payload.to_json()},
          {"hop_count", hop_count},
          {"derived", derived}};
}

}  // namespace flip
