#include "flip/dsl.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "flip/errors.hpp"

namespace flip {

std::string_view to_string(DataType type) noexcept {
  switch (type) {
    case DataType::Scalar: return "scalar";
    case DataType::Vector: return "vector";
    case DataType::Matrix: return "matrix";
  }
  return "?";
}

std::optional<DataType> parse_data_type(std::string_view text) noexcept {
  if (text == "scalar") return DataType::Scalar;
  if (text == "vector") return DataType::Vector;
  if (text == "matrix") return DataType::Matrix;
  return std::nullopt;
}

namespace {

enum class Tok { Ident, Number, String, LParen, RParen, LBrace, RBrace, LBracket, RBracket, Comma, Colon, Equals, Arrow, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t line;
  std::size_t column;
};

std::string_view describe(Tok t) {
  switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Number: return "number";
    case Tok::String: return "string";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::Comma: return "','";
    case Tok::Colon: return "':'";
    case Tok::Equals: return "'='";
    case Tok::Arrow: return "'<-'";
    case Tok::End: return "end of input";
  }
  return "?";
}

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0, line = 1, col = 1;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (s[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto is_ident_char = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    Token t{Tok::End, {}, line, col};
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && is_ident_char(s[j])) ++j;
      t.kind = Tok::Ident;
      t.text = std::string(s.substr(i, j - i));
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
      t.kind = Tok::Number;
      t.text = std::string(s.substr(i, j - i));
      advance(j - i);
    } else if (c == '"') {
      std::size_t j = i + 1;
      while (j < s.size() && s[j] != '"' && s[j] != '\n') ++j;
      if (j >= s.size() || s[j] != '"') throw SyntaxError("unterminated string", line, col);
      t.kind = Tok::String;
      t.text = std::string(s.substr(i + 1, j - i - 1));
      advance(j - i + 1);
    } else if (c == '<' && i + 1 < s.size() && s[i + 1] == '-') {
      t.kind = Tok::Arrow;
      advance(2);
    } else if (s.substr(i, 3) == "\xE2\x86\x90") {
      t.kind = Tok::Arrow;
      i += 3;
      ++col;
    } else {
      switch (c) {
        case '(': t.kind = Tok::LParen; break;
        case ')': t.kind = Tok::RParen; break;
        case '{': t.kind = Tok::LBrace; break;
        case '}': t.kind = Tok::RBrace; break;
        case '[': t.kind = Tok::LBracket; break;
        case ']': t.kind = Tok::RBracket; break;
        case ',': t.kind = Tok::Comma; break;
        case ':': t.kind = Tok::Colon; break;
        case '=': t.kind = Tok::Equals; break;
        default:
          throw SyntaxError(std::string("unexpected character '") + c + "'", line, col);
      }
      advance(1);
    }
    out.push_back(std::move(t));
  }
  out.push_back({Tok::End, {}, line, col});
  return out;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

bool is_plain_identifier(std::string_view s) {
  return is_valid_node_id(s);
}

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(tokenize(text)) {}

  Request parse() {
    const Token& head = expect(Tok::Ident);
    Request r;
    if (head.text == "datapath_a") {
      r.mode = Mode::Automated;
    } else if (head.text == "datapath_m") {
      r.mode = Mode::Manual;
    } else {
      fail(head, "expected datapath_a or datapath_m, got '" + head.text + "'");
    }
    mode_ = r.mode;
    expect(Tok::LParen);

    std::vector<Expr> positional;
    std::set<std::string> seen;
    std::optional<OpKind> compute;
    bool have_destination = false;
    const Token* first_positional = nullptr;
    while (true) {
      if (peek().kind == Tok::Ident && peek(1).kind == Tok::Arrow) {
        const Token& key = next();
        next();
        std::string name = key.text == "computation" ? "compute" : key.text;
        if (!seen.insert(name).second) fail(key, "duplicate argument '" + key.text + "'");
        if (name == "destination") {
          r.destination = parse_term(true);
          if (r.destination.kind == SourceTerm::Kind::Range || r.destination.kind == SourceTerm::Kind::Region) {
            fail(key, "destination must be a single node");
          }
          have_destination = true;
        } else if (name == "switch") {
          if (mode_ != Mode::Manual) fail(key, "switch<- is only valid in datapath_m");
          r.switch_id = NodeId(expect(Tok::Ident).text);
        } else if (name == "compute") {
          if (mode_ != Mode::Manual) fail(key, "compute<- is only valid in datapath_m");
          const Token& op = expect(Tok::Ident);
          auto kind = parse_op_kind(op.text);
          if (!kind) throw UnknownOperation("unknown operation '" + op.text + "'");
          compute = kind;
        } else if (name == "requirement") {
          r.requirements = parse_requirements();
        } else if (name == "user") {
          const Token& u = next();
          if (u.kind != Tok::Ident && u.kind != Tok::String) fail(u, "expected user name");
          if (u.text.empty()) fail(u, "user name is empty");
          r.user = u.text;
        } else {
          fail(key, "unknown argument '" + key.text + "'");
        }
      } else {
        if (!first_positional) first_positional = &peek();
        if (!seen.empty()) fail(peek(), "positional operand after keyword arguments");
        for (auto& e : parse_operand()) positional.push_back(std::move(e));
      }
      if (peek().kind == Tok::Comma) {
        next();
        continue;
      }
      expect(Tok::RParen);
      break;
    }
    expect(Tok::End);

    if (!have_destination) fail(toks_.back(), "missing destination<-");
    if (positional.empty()) fail(head, "request has no operands");

    if (r.mode == Mode::Automated) {
      if (positional.size() != 1 || !positional.front().is_operation()) {
        fail(*first_positional, "datapath_a takes exactly one operation expression");
      }
      r.expr = std::move(positional.front());
    } else {
      if (!r.switch_id) fail(head, "datapath_m requires switch<-");
      if (compute) {
        for (const auto& e : positional) {
          if (e.is_operation()) fail(*first_positional, "operands cannot be operations when compute<- is given");
        }
        r.expr = Expr::operation(*compute, std::move(positional));
      } else {
        if (positional.size() != 1 || !positional.front().is_operation()) {
          fail(*first_positional, "datapath_m needs compute<- or a single operation");
        }
        r.expr = std::move(positional.front());
      }
      for (const auto& e : r.expr.args) {
        if (e.is_operation()) fail(*first_positional, "datapath_m does not nest operations");
      }
    }
    check_arity(r.expr);
    return r;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  const Token& expect(Tok kind) {
    const Token& t = peek();
    if (t.kind != kind) {
      fail(t, "expected " + std::string(describe(kind)) + ", got " +
                  (t.text.empty() ? std::string(describe(t.kind)) : "'" + t.text + "'"));
    }
    return next();
  }
  [[noreturn]] void fail(const Token& t, const std::string& message) const {
    throw SyntaxError(message, t.line, t.column);
  }

  static void check_arity(const Expr& e) {
    if (!e.is_operation()) return;
    if (e.args.empty()) throw ArityError(std::string(to_string(*e.op)) + "() needs at least one operand");
    if (*e.op == OpKind::Sub && e.args.size() == 1) {
      const auto& only = e.args.front();
      bool may_expand = !only.is_operation() &&
                        (only.term.kind == SourceTerm::Kind::Range || only.term.kind == SourceTerm::Kind::Region);
      if (!may_expand) throw ArityError("sub() needs at least two operands");
    }
    for (const auto& a : e.args) check_arity(a);
  }

  // Parses one positional operand; `{...}` groups flatten into several.
  std::vector<Expr> parse_operand() {
    const Token& t = peek();
    if (t.kind == Tok::LBrace) {
      next();
      std::vector<Expr> out;
      if (peek().kind == Tok::RBrace) fail(peek(), "empty group");
      while (true) {
        for (auto& e : parse_operand()) out.push_back(std::move(e));
        if (peek().kind == Tok::Comma) {
          next();
          continue;
        }
        expect(Tok::RBrace);
        return out;
      }
    }
    if (t.kind == Tok::Ident && peek(1).kind == Tok::LParen) {
      const Token& name = next();
      next();
      auto op = parse_op_kind(name.text);
      if (!op) throw UnknownOperation("unknown operation '" + name.text + "'");
      std::vector<Expr> args;
      if (peek().kind == Tok::RParen) {
        throw ArityError(name.text + "() needs at least one operand");
      }
      while (true) {
        for (auto& e : parse_operand()) args.push_back(std::move(e));
        if (peek().kind == Tok::Comma) {
          next();
          continue;
        }
        expect(Tok::RParen);
        break;
      }
      std::vector<Expr> one;
      one.push_back(Expr::operation(*op, std::move(args)));
      return one;
    }
    std::vector<Expr> one;
    one.push_back(Expr::leaf(parse_term(false)));
    return one;
  }

  SourceTerm parse_term(bool destination) {
    const Token& t = peek();
    if (t.kind == Tok::String) {
      next();
      if (t.text.empty()) fail(t, "empty region name");
      return SourceTerm::region(t.text);
    }
    const Token& id = expect(Tok::Ident);
    if (peek().kind == Tok::Colon) {
      next();
      const Token& end = next();
      if (end.kind != Tok::Ident && end.kind != Tok::Number) fail(end, "expected range end");
      std::string last = end.text;
      if (end.kind == Tok::Number) {
        std::size_t p = id.text.size();
        while (p > 0 && std::isdigit(static_cast<unsigned char>(id.text[p - 1]))) --p;
        last = id.text.substr(0, p) + last;
      }
      return SourceTerm::range(id.text, last);
    }
    if (peek().kind == Tok::LBracket) {
      next();
      const Token& word = expect(Tok::Ident);
      if (word.text != "engine") fail(word, "expected 'engine'");
      expect(Tok::RBracket);
      if (mode_ != Mode::Manual && !destination) fail(id, "engine operands are only valid in datapath_m");
      return SourceTerm::engine(id.text);
    }
    return SourceTerm::node(id.text);
  }

  double parse_duration() {
    const Token& num = expect(Tok::Number);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(num.text.data(), num.text.data() + num.text.size(), value);
    if (ec != std::errc{} || ptr != num.text.data() + num.text.size()) fail(num, "malformed number '" + num.text + "'");
    if (peek().kind == Tok::Ident && (peek().text == "ms" || peek().text == "s")) {
      if (next().text == "s") value *= 1000.0;
    } else if (peek().kind == Tok::Ident) {
      fail(peek(), "unknown duration unit '" + peek().text + "'");
    }
    return value;
  }

  Requirements parse_requirements() {
    Requirements req;
    expect(Tok::LBrace);
    std::set<std::string> seen;
    if (peek().kind != Tok::RBrace) {
      while (true) {
        const Token& key = expect(Tok::Ident);
        if (!seen.insert(key.text).second) fail(key, "duplicate requirement '" + key.text + "'");
        expect(Tok::Equals);
        const Token& at = peek();
        if (key.text == "delay" || key.text == "rate" || key.text == "jitter") {
          double v = parse_duration();
          if (key.text == "jitter") {
            if (v < 0.0 || v > Requirements::kMaxJitterMs) fail(at, "jitter must lie in [0, 25] ms");
            req.jitter_ms = v;
          } else {
            if (!(v > 0.0)) fail(at, key.text + " must be positive");
            (key.text == "delay" ? req.delay_ms : req.rate_ms) = v;
          }
        } else if (key.text == "coverage") {
          const Token& v = next();
          if (v.kind != Tok::Ident && v.kind != Tok::String) fail(v, "expected region name");
          req.coverage = v.text;
        } else if (key.text == "datatype") {
          const Token& v = expect(Tok::Ident);
          auto dt = parse_data_type(v.text);
          if (!dt) fail(v, "unknown datatype '" + v.text + "'");
          req.data_type = dt;
        } else {
          fail(key, "unknown requirement '" + key.text + "'");
        }
        if (peek().kind == Tok::Comma) {
          next();
          continue;
        }
        break;
      }
    }
    expect(Tok::RBrace);
    return req;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  Mode mode_ = Mode::Automated;
};

std::string quote_if_needed(const std::string& s) {
  return is_plain_identifier(s) ? s : "\"" + s + "\"";
}

}  // namespace

std::string to_string(const SourceTerm& term) {
  switch (term.kind) {
    case SourceTerm::Kind::Node: return term.first;
    case SourceTerm::Kind::Range: return term.first + ":" + term.last;
    case SourceTerm::Kind::Engine: return term.first + "[engine]";
    case SourceTerm::Kind::Region: return "\"" + term.first + "\"";
  }
  return {};
}

std::string to_string(const Expr& expr) {
  if (!expr.is_operation()) return to_string(expr.term);
  std::string out(to_string(*expr.op));
  out += '(';
  for (std::size_t i = 0; i < expr.args.size(); ++i) {
    if (i) out += ',';
    out += to_string(expr.args[i]);
  }
  out += ')';
  return out;
}

Request parse_request(std::string_view text) { return Parser(text).parse(); }

std::string to_canonical_string(const Request& r) {
  std::string out = r.mode == Mode::Automated ? "datapath_a(" : "datapath_m(";
  out += to_string(r.expr);
  if (r.switch_id) out += ",switch<-" + r.switch_id->str();
  out += ",destination<-" + to_string(r.destination);
  const auto& q = r.requirements;
  if (!q.empty()) {
    std::vector<std::string> parts;
    if (q.delay_ms) parts.push_back("delay=" + format_number(*q.delay_ms) + "ms");
    if (q.rate_ms) parts.push_back("rate=" + format_number(*q.rate_ms) + "ms");
    if (q.jitter_ms) parts.push_back("jitter=" + format_number(*q.jitter_ms) + "ms");
    if (q.coverage) parts.push_back("coverage=" + quote_if_needed(*q.coverage));
    if (q.data_type) parts.push_back("datatype=" + std::string(to_string(*q.data_type)));
    out += ",requirement<-{";
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) out += ',';
      out += parts[i];
    }
    out += '}';
  }
  if (r.user != kDefaultUser) out += ",user<-" + quote_if_needed(r.user);
  out += ')';
  return out;
}

void CoverageMap::add_region(std::string name, std::vector<NodeId> members) {
  regions_[std::move(name)] = std::move(members);
}

const std::vector<NodeId>* CoverageMap::find(std::string_view region) const {
  auto it = regions_.find(region);
  return it == regions_.end() ? nullptr : &it->second;
}

std::vector<std::string> CoverageMap::regions() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : regions_) out.push_back(name);
  return out;
}

CoverageMap CoverageMap::from_json(const nlohmann::json& document) {
  if (!document.is_object()) throw ParseError("coverage document must be an object");
  CoverageMap map;
  for (const auto& [name, list] : document.items()) {
    if (!list.is_array()) throw ParseError("coverage region '" + name + "' must be a list");
    std::vector<NodeId> members;
    for (const auto& entry : list) {
      if (!entry.is_string()) throw ParseError("coverage region '" + name + "' has a non-string entry");
      auto s = entry.get<std::string>();
      auto colon = s.find(':');
      if (colon == std::string::npos) {
        members.emplace_back(s);
      } else {
        for (auto& id : expand_id_range(s.substr(0, colon), s.substr(colon + 1))) members.push_back(std::move(id));
      }
    }
    map.add_region(name, std::move(members));
  }
  return map;
}

CoverageMap CoverageMap::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open coverage file '" + path.string() + "'");
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("coverage file '" + path.string() + "': " + e.what());
  }
}

nlohmann::json CoverageMap::to_json() const {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, members] : regions_) {
    auto& list = out[name] = nlohmann::json::array();
    for (const auto& m : members) list.push_back(m.str());
  }
  return out;
}

std::vector<NodeId> translate_coverage(std::string_view region, const CoverageMap& coverage) {
  const auto* members = coverage.find(region);
  if (!members) throw UnknownRegion("unknown coverage region '" + std::string(region) + "'");
  return *members;
}

NodeId resolve_destination(const SourceTerm& term, const Topology& topology) {
  if (term.kind == SourceTerm::Kind::Engine) {
    NodeId sw(term.first);
    if (!topology.contains(sw) || topology.kind(sw) != NodeKind::Switch) {
      throw UnknownNode("'" + term.first + "' is not a switch");
    }
    auto engine = topology.engine_of(sw);
    if (!engine) throw UnknownNode("switch '" + term.first + "' has no engine");
    return *engine;
  }
  if (term.kind != SourceTerm::Kind::Node) throw ValidationError("destination must be a single node");
  NodeId id(term.first);
  if (!topology.contains(id)) throw UnknownNode("unknown destination '" + term.first + "'");
  return id;
}

namespace {

void add_expr(TaskGraph& g, const Expr& e, std::size_t parent, const Request& r, const Topology& t,
              const CoverageMap& cov, const std::set<NodeId>* allowed, std::set<NodeId>& seen) {
  if (e.is_operation()) {
    auto idx = g.add_operation(*e.op, parent);
    for (const auto& a : e.args) add_expr(g, a, idx, r, t, cov, allowed, seen);
    const auto& n = g.node(idx);
    if (n.children.empty()) throw EmptyRange(std::string(to_string(*e.op)) + "() expanded to no sources");
    if (*e.op == OpKind::Sub && n.children.size() < 2) throw ArityError("sub() needs at least two operands");
    return;
  }
  std::vector<NodeId> ids;
  switch (e.term.kind) {
    case SourceTerm::Kind::Node: ids.emplace_back(e.term.first); break;
    case SourceTerm::Kind::Range: ids = expand_id_range(e.term.first, e.term.last); break;
    case SourceTerm::Kind::Region: ids = translate_coverage(e.term.first, cov); break;
    case SourceTerm::Kind::Engine: ids.push_back(resolve_destination(e.term, t)); break;
  }
  for (auto& id : ids) {
    if (!t.contains(id)) throw UnknownNode("unknown source '" + id.str() + "'");
    auto kind = t.kind(id);
    bool ok = kind == NodeKind::BaseStation || (r.mode == Mode::Manual && kind == NodeKind::Engine);
    if (!ok) throw ValidationError("'" + id.str() + "' is a " + std::string(to_string(kind)) + ", not a source");
    if (allowed && kind == NodeKind::BaseStation && !allowed->count(id)) {
      throw ValidationError("'" + id.str() + "' lies outside coverage region '" + *r.requirements.coverage + "'");
    }
    if (!seen.insert(id).second) throw ValidationError("source '" + id.str() + "' appears more than once");
    g.add_source(std::move(id), parent);
  }
}

}  // namespace

TaskGraph expand_sources(const Request& request, const Topology& topology, const CoverageMap& coverage) {
  TaskGraph g(resolve_destination(request.destination, topology));
  std::optional<std::set<NodeId>> allowed;
  if (request.requirements.coverage) {
    auto members = translate_coverage(*request.requirements.coverage, coverage);
    allowed.emplace(members.begin(), members.end());
  }
  std::set<NodeId> seen;
  add_expr(g, request.expr, g.root(), request, topology, coverage, allowed ? &*allowed : nullptr, seen);
  g.finalize();
  return g;
}

std::vector<std::pair<std::size_t, std::string>> split_script(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string>> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string line(text.substr(start, end - start));
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto b = line.find_first_not_of(" \t\r");
    auto e = line.find_last_not_of(" \t\r");
    if (b != std::string::npos) out.emplace_back(line_no, line.substr(b, e - b + 1));
    if (end == text.size()) break;
    start = end + 1;
  }
  return out;
}

}  // namespace flip
