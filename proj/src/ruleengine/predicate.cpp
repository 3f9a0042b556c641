#include <cctype>
#include <cmath>
#include <sstream>

#include "aml/ruleengine.hpp"

namespace aml::rules {

namespace {

struct Token {
  enum class Kind { Ident, Number, Sym, End };
  Kind kind = Kind::End;
  std::string text;
  std::size_t pos = 0;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.pos = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      t.kind = Token::Kind::Ident;
      t.text = s.substr(i, j - i);
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      std::size_t j = i;
      while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
      t.kind = Token::Kind::Number;
      t.text = s.substr(i, j - i);
      i = j;
    } else if ((c == '>' || c == '<') && i + 1 < s.size() && s[i + 1] == '=') {
      t.kind = Token::Kind::Sym;
      t.text = s.substr(i, 2);
      i += 2;
    } else if (std::string_view("()<>*,.").find(c) != std::string_view::npos) {
      t.kind = Token::Kind::Sym;
      t.text = std::string(1, c);
      ++i;
    } else {
      throw ValidationError("predicate: unexpected character '" + std::string(1, c) +
                            "' at " + std::to_string(i));
    }
    out.push_back(std::move(t));
  }
  out.push_back(Token{Token::Kind::End, "", s.size()});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(tokenize(src)) {}

  Predicate::Node parse() {
    auto n = expr();
    if (peek().kind != Token::Kind::End) fail("trailing input");
    return n;
  }

 private:
  std::vector<Token> toks_;
  std::size_t at_ = 0;

  const Token& peek() const { return toks_[at_]; }
  const Token& next() { return toks_[at_++]; }
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("predicate: " + what + " at " + std::to_string(peek().pos));
  }
  bool accept_sym(std::string_view s) {
    if (peek().kind == Token::Kind::Sym && peek().text == s) {
      ++at_;
      return true;
    }
    return false;
  }
  void expect_sym(std::string_view s) {
    if (!accept_sym(s)) fail("expected '" + std::string(s) + "'");
  }
  bool accept_kw(std::string_view s) {
    if (peek().kind == Token::Kind::Ident && peek().text == s) {
      ++at_;
      return true;
    }
    return false;
  }

  Predicate::Node expr() {
    Predicate::Node n;
    n.kind = Predicate::Node::Kind::Or;
    n.children.push_back(conj());
    while (accept_kw("OR")) n.children.push_back(conj());
    return n.children.size() == 1 ? std::move(n.children.front()) : n;
  }

  Predicate::Node conj() {
    Predicate::Node n;
    n.kind = Predicate::Node::Kind::And;
    n.children.push_back(atom());
    while (accept_kw("AND")) n.children.push_back(atom());
    return n.children.size() == 1 ? std::move(n.children.front()) : n;
  }

  Predicate::Node atom() {
    // a parenthesis opens a sub-expression unless it belongs to sum()/limit()
    if (accept_sym("(")) {
      auto n = expr();
      expect_sym(")");
      return n;
    }
    Predicate::Node n;
    n.kind = Predicate::Node::Kind::Leaf;
    n.leaf.lhs = operand();
    const Token& t = peek();
    if (t.kind != Token::Kind::Sym) fail("expected comparison");
    if (t.text == ">=") n.leaf.op = CmpOp::Ge;
    else if (t.text == ">") n.leaf.op = CmpOp::Gt;
    else if (t.text == "<=") n.leaf.op = CmpOp::Le;
    else if (t.text == "<") n.leaf.op = CmpOp::Lt;
    else fail("expected comparison");
    ++at_;
    n.leaf.rhs = operand();
    check_limits(n.leaf);
    return n;
  }

  void check_limits(const Comparison& c) const {
    auto is_limit = [](const Operand& o) {
      return o.ref && o.ref->kind == Reference::Kind::Limit;
    };
    if (is_limit(c.lhs)) fail("limit() may only appear on the right-hand side");
    if (is_limit(c.rhs)) {
      if (c.op != CmpOp::Ge && c.op != CmpOp::Gt) fail("limit comparisons must use >= or >");
      if (c.rhs.coefficient < 0) fail("limit factor must be non-negative");
    }
  }

  Attribute attribute() {
    const Token& t = next();
    if (t.kind != Token::Kind::Ident) {
      --at_;
      fail("expected attribute");
    }
    auto a = profiler::parse_rule_name(t.text);
    if (!a) {
      --at_;
      fail("unknown attribute '" + t.text + "'");
    }
    return *a;
  }

  Field field() {
    const Token& t = next();
    if (t.kind == Token::Kind::Ident) {
      if (t.text == "total") return Field::Total;
      if (t.text == "max") return Field::Max;
      if (t.text == "window") return Field::Window;
    }
    --at_;
    fail("expected total, max or window");
  }

  Reference reference() {
    Reference r;
    if (accept_kw("age")) {
      r.kind = Reference::Kind::Age;
      return r;
    }
    if (accept_kw("limit")) {
      r.kind = Reference::Kind::Limit;
      expect_sym("(");
      r.attrs.push_back(attribute());
      expect_sym(")");
      return r;
    }
    if (accept_kw("sum")) {
      r.kind = Reference::Kind::Sum;
      expect_sym("(");
      r.attrs.push_back(attribute());
      while (accept_sym(",")) r.attrs.push_back(attribute());
      expect_sym(")");
      expect_sym(".");
      r.field = field();
      return r;
    }
    r.kind = Reference::Kind::Value;
    r.attrs.push_back(attribute());
    expect_sym(".");
    r.field = field();
    return r;
  }

  Operand operand() {
    Operand o;
    do {
      const Token& t = peek();
      if (t.kind == Token::Kind::Number) {
        auto v = parse_double(t.text);
        if (!v) fail("bad number '" + t.text + "'");
        o.coefficient *= *v;
        ++at_;
      } else if (t.kind == Token::Kind::Ident) {
        if (o.ref) fail("at most one attribute reference per operand");
        o.ref = reference();
      } else {
        fail("expected number or attribute");
      }
    } while (accept_sym("*"));
    return o;
  }
};

double field_value(const profiler::AttributeTriple& t, Field f) {
  switch (f) {
    case Field::Total: return t.annual_total;
    case Field::Max: return t.monthly_max;
    case Field::Window: return t.window_value;
  }
  return 0;
}

std::string_view field_name(Field f) {
  switch (f) {
    case Field::Total: return "total";
    case Field::Max: return "max";
    case Field::Window: return "window";
  }
  return "?";
}

std::string_view op_name(CmpOp op) {
  switch (op) {
    case CmpOp::Ge: return ">=";
    case CmpOp::Gt: return ">";
    case CmpOp::Le: return "<=";
    case CmpOp::Lt: return "<";
  }
  return "?";
}

bool compare(double a, CmpOp op, double b) {
  switch (op) {
    case CmpOp::Ge: return a >= b;
    case CmpOp::Gt: return a > b;
    case CmpOp::Le: return a <= b;
    case CmpOp::Lt: return a < b;
  }
  return false;
}

std::string to_string(const Reference& r) {
  std::string s;
  switch (r.kind) {
    case Reference::Kind::Age: return "age";
    case Reference::Kind::Limit:
      return "limit(" + std::string(profiler::rule_name(r.attrs.front())) + ")";
    case Reference::Kind::Sum:
      s = "sum(";
      for (std::size_t i = 0; i < r.attrs.size(); ++i) {
        if (i) s += ',';
        s += profiler::rule_name(r.attrs[i]);
      }
      s += ")";
      break;
    case Reference::Kind::Value: s = profiler::rule_name(r.attrs.front()); break;
  }
  return s + "." + std::string(field_name(r.field));
}

// Shortest decimal form that reads back to the same double.
std::string short_number(double v) {
  for (int prec = 6; prec <= 17; ++prec) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    if (std::stod(os.str()) == v) return os.str();
  }
  return format_double(v);
}

bool eval_node(const Predicate::Node& n, const EvalContext& ctx) {
  switch (n.kind) {
    case Predicate::Node::Kind::And:
      for (const auto& c : n.children)
        if (!eval_node(c, ctx)) return false;
      return true;
    case Predicate::Node::Kind::Or:
      for (const auto& c : n.children)
        if (eval_node(c, ctx)) return true;
      return false;
    case Predicate::Node::Kind::Leaf:
      return compare(evaluate(n.leaf.lhs, ctx), n.leaf.op, evaluate(n.leaf.rhs, ctx));
  }
  return false;
}

void render(const Predicate::Node& n, std::string& out, bool nested) {
  if (n.kind == Predicate::Node::Kind::Leaf) {
    out += to_string(n.leaf.lhs);
    out += ' ';
    out += op_name(n.leaf.op);
    out += ' ';
    out += to_string(n.leaf.rhs);
    return;
  }
  const char* sep = n.kind == Predicate::Node::Kind::And ? " AND " : " OR ";
  if (nested) out += '(';
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    if (i) out += sep;
    render(n.children[i], out, n.children[i].kind != Predicate::Node::Kind::Leaf);
  }
  if (nested) out += ')';
}

void explain_node(const Predicate::Node& n, const EvalContext& ctx, std::vector<std::string>& out) {
  if (n.kind != Predicate::Node::Kind::Leaf) {
    for (const auto& c : n.children) explain_node(c, ctx, out);
    return;
  }
  const double l = evaluate(n.leaf.lhs, ctx);
  const double r = evaluate(n.leaf.rhs, ctx);
  if (!compare(l, n.leaf.op, r)) return;
  out.push_back(to_string(n.leaf.lhs) + "=" + short_number(l) + " " + std::string(op_name(n.leaf.op)) +
                " " + to_string(n.leaf.rhs) + "=" + short_number(r));
}

bool node_uses_limits(const Predicate::Node& n) {
  if (n.kind == Predicate::Node::Kind::Leaf)
    return n.leaf.rhs.ref && n.leaf.rhs.ref->kind == Reference::Kind::Limit;
  for (const auto& c : n.children)
    if (node_uses_limits(c)) return true;
  return false;
}

}  // namespace

std::string to_string(const Operand& o) {
  if (!o.ref) return short_number(o.coefficient);
  if (o.coefficient == 1.0) return to_string(*o.ref);
  return short_number(o.coefficient) + "*" + to_string(*o.ref);
}

double evaluate(const Operand& o, const EvalContext& ctx) {
  if (!o.ref) return o.coefficient;
  const Reference& r = *o.ref;
  double v = 0;
  switch (r.kind) {
    case Reference::Kind::Age: v = ctx.profile.account_age_years; break;
    case Reference::Kind::Limit: v = ctx.limits[r.attrs.front()]; break;
    case Reference::Kind::Value: v = field_value(ctx.profile[r.attrs.front()], r.field); break;
    case Reference::Kind::Sum:
      for (Attribute a : r.attrs) v += field_value(ctx.profile[a], r.field);
      break;
  }
  return o.coefficient * v;
}

Predicate Predicate::parse(std::string_view text) {
  Predicate p;
  p.source_ = std::string(trim(text));
  if (p.source_.empty()) throw ValidationError("predicate: empty");
  p.root_ = Parser(p.source_).parse();
  return p;
}

bool Predicate::evaluate(const EvalContext& ctx) const { return eval_node(root_, ctx); }

std::string Predicate::explain(const EvalContext& ctx) const {
  std::vector<std::string> parts;
  explain_node(root_, ctx, parts);
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) s += "; ";
    s += parts[i];
  }
  return s;
}

std::string Predicate::to_string() const {
  std::string s;
  render(root_, s, false);
  return s;
}

bool Predicate::uses_limits() const { return node_uses_limits(root_); }

}  // namespace aml::rules
