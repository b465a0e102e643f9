#include "npv/pctl.hpp"

#include <algorithm>
#include <cctype>

#include "npv/common.hpp"

namespace npv {

StateFormula StateFormula::top() { return StateFormula{}; }

StateFormula StateFormula::atom(std::string name) {
  StateFormula f;
  f.kind = Kind::prop;
  f.name = std::move(name);
  return f;
}

StateFormula StateFormula::negate(StateFormula f) {
  StateFormula n;
  n.kind = Kind::negation;
  n.children.push_back(std::move(f));
  return n;
}

StateFormula StateFormula::both(StateFormula a, StateFormula b) {
  StateFormula n;
  n.kind = Kind::conjunction;
  n.children.push_back(std::move(a));
  n.children.push_back(std::move(b));
  return n;
}

StateFormula StateFormula::either(StateFormula a, StateFormula b) {
  return negate(both(negate(std::move(a)), negate(std::move(b))));
}

bool StateFormula::holds(const std::vector<std::string>& labels) const {
  switch (kind) {
    case Kind::truth: return true;
    case Kind::prop: return std::binary_search(labels.begin(), labels.end(), name);
    case Kind::negation: return !children[0].holds(labels);
    case Kind::conjunction: return children[0].holds(labels) && children[1].holds(labels);
  }
  return false;
}

void StateFormula::collect_propositions(std::vector<std::string>& out) const {
  if (kind == Kind::prop && std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  for (const auto& c : children) c.collect_propositions(out);
}

std::string StateFormula::to_string() const {
  switch (kind) {
    case Kind::truth: return "true";
    case Kind::prop: return name;
    case Kind::negation:
      if (children[0].kind == Kind::truth) return "false";
      return "!" + (children[0].kind == Kind::conjunction ? "(" + children[0].to_string() + ")" : children[0].to_string());
    case Kind::conjunction: {
      auto side = [](const StateFormula& f) {
        return f.kind == Kind::conjunction ? "(" + f.to_string() + ")" : f.to_string();
      };
      return side(children[0]) + " & " + side(children[1]);
    }
  }
  return "?";
}

PathFormula PathFormula::next(StateFormula phi) {
  PathFormula p;
  p.kind = Kind::next;
  p.right = std::move(phi);
  return p;
}

PathFormula PathFormula::until(StateFormula phi1, StateFormula phi2) {
  PathFormula p;
  p.kind = Kind::until;
  p.left = std::move(phi1);
  p.right = std::move(phi2);
  return p;
}

PathFormula PathFormula::bounded_until(StateFormula phi1, StateFormula phi2, std::size_t k) {
  PathFormula p;
  p.kind = Kind::bounded_until;
  p.left = std::move(phi1);
  p.right = std::move(phi2);
  p.bound = k;
  return p;
}

PathFormula PathFormula::eventually(StateFormula phi) { return until(StateFormula::top(), std::move(phi)); }

PathFormula PathFormula::bounded_eventually(StateFormula phi, std::size_t k) {
  return bounded_until(StateFormula::top(), std::move(phi), k);
}

namespace {

std::string wrap(const StateFormula& f) {
  return f.kind == StateFormula::Kind::conjunction ? "(" + f.to_string() + ")" : f.to_string();
}

}  // namespace

std::string PathFormula::to_string() const {
  switch (kind) {
    case Kind::next: return "X " + wrap(right);
    case Kind::until: return wrap(left) + " U " + wrap(right);
    case Kind::bounded_until: return wrap(left) + " U<=" + std::to_string(bound) + " " + wrap(right);
  }
  return "?";
}

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::ge: return ">=";
    case CompareOp::gt: return ">";
    case CompareOp::le: return "<=";
    case CompareOp::lt: return "<";
  }
  return "?";
}

std::string PctlQuery::to_string() const {
  if (!threshold) return path.to_string();
  return "P" + std::string(npv::to_string(threshold->op)) + format_double(threshold->p) + " [ " + path.to_string() + " ]";
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  PctlQuery query() {
    skip();
    PctlQuery q;
    if (peek_word() == "P") {
      pos_ += 1;
      skip();
      if (accept("=?")) {
      } else {
        Threshold t;
        if (accept(">=")) t.op = CompareOp::ge;
        else if (accept("<=")) t.op = CompareOp::le;
        else if (accept(">")) t.op = CompareOp::gt;
        else if (accept("<")) t.op = CompareOp::lt;
        else fail("expected a comparison after P");
        t.p = number();
        if (!(t.p >= 0.0 && t.p <= 1.0)) fail("probability threshold must lie in [0, 1]");
        q.threshold = t;
      }
      expect("[");
      q.path = path();
      expect("]");
    } else {
      q.path = path();
    }
    end();
    return q;
  }

  PathFormula path_only() {
    auto p = path();
    end();
    return p;
  }

  StateFormula state_only() {
    auto f = disjunction();
    end();
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("formula: " + msg + " at position " + std::to_string(pos_) + " in '" + std::string(s_) + "'");
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(std::string_view tok) {
    skip();
    if (s_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view tok) {
    if (!accept(tok)) fail("expected '" + std::string(tok) + "'");
  }

  void end() {
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
  }

  static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

  std::string_view peek_word() {
    skip();
    std::size_t e = pos_;
    while (e < s_.size() && ident_char(s_[e])) ++e;
    return s_.substr(pos_, e - pos_);
  }

  std::size_t integer() {
    skip();
    std::size_t e = pos_;
    while (e < s_.size() && std::isdigit(static_cast<unsigned char>(s_[e]))) ++e;
    if (e == pos_) fail("expected a step bound");
    const auto text = std::string(s_.substr(pos_, e - pos_));
    if (text.size() > 12) fail("step bound too large");
    pos_ = e;
    return static_cast<std::size_t>(std::stoull(text));
  }

  double number() {
    skip();
    std::size_t e = pos_;
    while (e < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[e])) || s_[e] == '.' || s_[e] == 'e' ||
                             s_[e] == 'E' || s_[e] == '-' || s_[e] == '+'))
      ++e;
    if (e == pos_) fail("expected a number");
    const double v = parse_double(s_.substr(pos_, e - pos_));
    pos_ = e;
    return v;
  }

  std::optional<std::size_t> bound() {
    if (accept("<=")) return integer();
    return std::nullopt;
  }

  PathFormula path() {
    const auto w = peek_word();
    if (w == "X") {
      pos_ += 1;
      return PathFormula::next(disjunction());
    }
    if (w == "F") {
      pos_ += 1;
      const auto k = bound();
      auto phi = disjunction();
      return k ? PathFormula::bounded_eventually(std::move(phi), *k) : PathFormula::eventually(std::move(phi));
    }
    auto left = disjunction();
    if (peek_word() != "U") fail("expected 'U', 'X' or 'F' in a path formula");
    pos_ += 1;
    const auto k = bound();
    auto right = disjunction();
    return k ? PathFormula::bounded_until(std::move(left), std::move(right), *k)
             : PathFormula::until(std::move(left), std::move(right));
  }

  StateFormula disjunction() {
    auto f = conjunction();
    while (accept("|")) f = StateFormula::either(std::move(f), conjunction());
    return f;
  }

  StateFormula conjunction() {
    auto f = unary();
    while (accept("&")) f = StateFormula::both(std::move(f), unary());
    return f;
  }

  StateFormula unary() {
    if (accept("!")) return StateFormula::negate(unary());
    if (accept("(")) {
      auto f = disjunction();
      expect(")");
      return f;
    }
    const auto w = peek_word();
    if (w.empty()) fail("expected a proposition");
    if (w == "P") fail("nested probabilistic operators are not supported");
    if (w == "X" || w == "U" || w == "F") fail("temporal operator '" + std::string(w) + "' inside a state formula");
    if (std::isdigit(static_cast<unsigned char>(w[0]))) fail("expected a proposition");
    pos_ += w.size();
    if (w == "true") return StateFormula::top();
    if (w == "false") return StateFormula::negate(StateFormula::top());
    return StateFormula::atom(std::string(w));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

PctlQuery parse_query(std::string_view text) { return Parser(text).query(); }
PathFormula parse_path(std::string_view text) { return Parser(text).path_only(); }
StateFormula parse_state(std::string_view text) { return Parser(text).state_only(); }

}  // namespace npv
