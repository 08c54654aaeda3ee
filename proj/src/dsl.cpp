#include "lagen/dsl.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace lagen {

namespace {

enum class Tok : std::uint8_t { ident, number, punct, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;
  double number = 0;
  bool integral = false;
  int line = 0;
  int column = 0;
};

std::vector<Token> tokenize_line(std::string_view s, int line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (c == '#') break;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.line = line;
    t.column = static_cast<int>(i) + 1;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      t.kind = Tok::ident;
      t.text = std::string(s.substr(i, j - i));
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      bool integral = true;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      if (j < s.size() && s[j] == '.') {
        integral = false;
        ++j;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      }
      if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
          integral = false;
          j = k;
          while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
        }
      }
      t.kind = Tok::number;
      t.text = std::string(s.substr(i, j - i));
      t.integral = integral;
      auto r = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
      if (r.ec != std::errc() || r.ptr != t.text.data() + t.text.size()) {
        throw SyntaxError("malformed number '" + t.text + "'", line, t.column);
      }
      i = j;
    } else if (std::string_view("()<>,=+-*/").find(c) != std::string_view::npos) {
      t.kind = Tok::punct;
      t.text = std::string(1, c);
      ++i;
    } else {
      throw SyntaxError(std::string("unexpected character '") + c + "'", line, t.column);
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::end;
  end.line = line;
  end.column = static_cast<int>(s.size()) + 1;
  out.push_back(end);
  return out;
}

std::optional<DeclKind> decl_kind(const std::string& s) {
  if (s == "Matrix") return DeclKind::matrix;
  if (s == "ColumnVector") return DeclKind::column_vector;
  if (s == "RowVector") return DeclKind::row_vector;
  if (s == "Scalar") return DeclKind::scalar;
  if (s == "IdentityMatrix") return DeclKind::identity;
  return std::nullopt;
}

std::string where(const Token& t) {
  return std::to_string(t.line) + ":" + std::to_string(t.column) + ": ";
}

class Parser {
 public:
  ProblemSpec parse(std::string_view text) {
    int line = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      ++line;
      auto s = text.substr(pos, nl - pos);
      if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
      toks_ = tokenize_line(s, line);
      at_ = 0;
      if (peek().kind != Tok::end) statement();
      pos = nl + 1;
    }
    return std::move(spec_);
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(at_ + ahead, toks_.size() - 1)];
  }
  const Token& next() {
    const Token& t = toks_[at_];
    if (at_ + 1 < toks_.size()) ++at_;
    return t;
  }
  bool accept(const char* p) {
    if (peek().kind == Tok::punct && peek().text == p) {
      next();
      return true;
    }
    return false;
  }
  const Token& expect(const char* p) {
    if (!(peek().kind == Tok::punct && peek().text == p)) {
      fail(std::string("expected '") + p + "'");
    }
    return next();
  }
  const Token& expect_ident(const char* what) {
    if (peek().kind != Tok::ident) fail(std::string("expected ") + what);
    return next();
  }
  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    std::string got = t.kind == Tok::end ? "end of line" : "'" + t.text + "'";
    throw SyntaxError(where(t) + msg + ", got " + got, t.line, t.column);
  }
  void expect_end() {
    if (peek().kind != Tok::end) fail("expected end of statement");
  }

  bool taken(const std::string& name) const {
    return sizes_.count(name) || operands_.count(name);
  }

  void statement() {
    const Token& first = peek();
    if (first.kind != Tok::ident) fail("expected a declaration, size binding or assignment");
    if (auto k = decl_kind(first.text); k && peek(1).kind == Tok::ident) {
      next();
      declaration(*k);
      return;
    }
    if (peek(1).kind == Tok::punct && peek(1).text == "=" && !operands_.count(first.text) &&
        peek(2).kind == Tok::number && peek(3).kind == Tok::end) {
      size_binding();
      return;
    }
    assignment();
  }

  void size_binding() {
    const Token name = next();
    expect("=");
    const Token& v = peek();
    if (v.kind != Tok::number || !v.integral || v.number < 1) {
      fail("expected a positive integer size");
    }
    next();
    expect_end();
    if (taken(name.text)) {
      throw SyntaxError(where(name) + "'" + name.text + "' already defined", name.line,
                        name.column);
    }
    sizes_[name.text] = static_cast<long>(v.number);
    spec_.sizes.emplace_back(name.text, static_cast<long>(v.number));
  }

  std::pair<long, std::string> dimension() {
    const Token& t = peek();
    if (t.kind == Tok::number) {
      if (!t.integral || t.number < 1) fail("expected a positive integer dimension");
      next();
      return {static_cast<long>(t.number), t.text};
    }
    if (t.kind == Tok::ident) {
      auto it = sizes_.find(t.text);
      if (it == sizes_.end()) {
        throw UndeclaredNameError(where(t) + "undeclared size '" + t.text + "'", t.line,
                                  t.column);
      }
      next();
      return {it->second, t.text};
    }
    fail("expected a dimension");
  }

  void declaration(DeclKind kind) {
    const Token name = expect_ident("an operand name");
    if (taken(name.text)) {
      throw SyntaxError(where(name) + "'" + name.text + "' already defined", name.line,
                        name.column);
    }
    Declaration d;
    d.kind = kind;
    long rows = 1, cols = 1;
    if (kind == DeclKind::scalar) {
      if (accept("(")) {
        // tolerate Scalar a() and Scalar a(1, 1)
        if (!accept(")")) {
          auto r = dimension();
          expect(",");
          auto c = dimension();
          expect(")");
          if (r.first != 1 || c.first != 1) {
            throw DimensionError(where(name) + "scalar '" + name.text + "' must be 1x1",
                                 name.line, name.column);
          }
        }
      }
      d.rows_text = d.cols_text = "1";
    } else {
      expect("(");
      auto a = dimension();
      if (kind == DeclKind::column_vector) {
        rows = a.first;
        d.rows_text = a.second;
        d.cols_text = "1";
      } else if (kind == DeclKind::row_vector) {
        cols = a.first;
        d.rows_text = "1";
        d.cols_text = a.second;
      } else {
        expect(",");
        auto b = dimension();
        rows = a.first;
        cols = b.first;
        d.rows_text = a.second;
        d.cols_text = b.second;
      }
      expect(")");
    }
    PropertySet props;
    if (accept("<")) {
      if (!accept(">")) {
        for (;;) {
          const Token& p = expect_ident("a property name");
          auto prop = property_from_dsl(p.text);
          if (!prop) {
            throw UnknownPropertyError(where(p) + "unknown property '" + p.text + "'", p.line,
                                       p.column);
          }
          props.insert(*prop);
          if (accept(">")) break;
          expect(",");
        }
      }
    }
    expect_end();
    if (kind == DeclKind::identity) {
      if (rows != cols) {
        throw DimensionError(where(name) + "identity '" + name.text + "' must be square",
                             name.line, name.column);
      }
      props.insert(Property::identity);
    }
    try {
      props = close_checked(props, rows, cols);
    } catch (const InconsistentProperties& e) {
      throw InconsistentPropertyError(where(name) + "'" + name.text + "': " + e.what(),
                                      name.line, name.column);
    }
    d.operand = Operand(name.text, rows, cols, props);
    operands_[name.text] = d.operand;
    spec_.declarations.push_back(std::move(d));
  }

  void assignment() {
    const Token lhs = next();
    auto it = operands_.find(lhs.text);
    if (it == operands_.end()) {
      throw UndeclaredNameError(where(lhs) + "undeclared operand '" + lhs.text + "'", lhs.line,
                                lhs.column);
    }
    const auto* decl = spec_.find(lhs.text);
    if (decl && decl->kind == DeclKind::identity) {
      throw SyntaxError(where(lhs) + "cannot assign to identity '" + lhs.text + "'", lhs.line,
                        lhs.column);
    }
    for (const auto& a : spec_.assignments) {
      if (a.lhs.name() == lhs.text) {
        throw SyntaxError(where(lhs) + "'" + lhs.text + "' assigned twice", lhs.line,
                          lhs.column);
      }
    }
    expect("=");
    Expr rhs = expression();
    expect_end();
    if (rhs.rows() != it->second.rows() || rhs.cols() != it->second.cols()) {
      throw DimensionError(where(lhs) + "'" + lhs.text + "' is " +
                               std::to_string(it->second.rows()) + "x" +
                               std::to_string(it->second.cols()) + " but the right-hand side is " +
                               std::to_string(rhs.rows()) + "x" + std::to_string(rhs.cols()),
                           lhs.line, lhs.column);
    }
    spec_.assignments.push_back({it->second, rhs});
  }

  template <class F>
  Expr checked(const Token& at, F&& f) {
    try {
      return f();
    } catch (const MalformedExpression& e) {
      throw DimensionError(where(at) + e.what(), at.line, at.column);
    }
  }

  Expr expression() {
    Expr acc = term();
    for (;;) {
      if (peek().kind != Tok::punct) break;
      const Token op = peek();
      if (op.text != "+" && op.text != "-") break;
      next();
      Expr rhs = term();
      if (op.text == "-") rhs = negate(rhs);
      acc = checked(op, [&] { return Expr::plus({acc, rhs}); });
    }
    return acc;
  }

  static Expr negate(const Expr& e) {
    if (e.is(ExprKind::literal)) return Expr::literal(-e.value());
    return Expr::times({Expr::literal(-1), e});
  }

  Expr term() {
    Expr acc = unary();
    for (;;) {
      if (peek().kind != Tok::punct) break;
      const Token op = peek();
      if (op.text == "*") {
        next();
        Expr rhs = unary();
        acc = checked(op, [&] { return Expr::times({acc, rhs}); });
      } else if (op.text == "/") {
        next();
        const Token d = peek();
        Expr rhs = unary();
        if (!rhs.is(ExprKind::literal)) {
          throw SyntaxError(where(d) + "division only by a numeric literal", d.line, d.column);
        }
        if (rhs.value() == 0) {
          throw SyntaxError(where(d) + "division by zero", d.line, d.column);
        }
        if (acc.is(ExprKind::literal)) {
          acc = Expr::literal(acc.value() / rhs.value());
        } else {
          acc = checked(op, [&] { return Expr::times({acc, Expr::literal(1.0 / rhs.value())}); });
        }
      } else {
        break;
      }
    }
    return acc;
  }

  Expr unary() {
    if (accept("-")) return negate(unary());
    if (accept("+")) return unary();
    return primary();
  }

  Expr primary() {
    const Token t = peek();
    if (t.kind == Tok::number) {
      next();
      return Expr::literal(t.number);
    }
    if (accept("(")) {
      Expr e = expression();
      expect(")");
      return e;
    }
    if (t.kind == Tok::ident) {
      next();
      if (t.text == "trans" || t.text == "inv") {
        if (peek().kind == Tok::punct && peek().text == "(") {
          next();
          Expr e = expression();
          expect(")");
          if (t.text == "trans") return Expr::transpose(e);
          return checked(t, [&] { return Expr::inverse(e); });
        }
      }
      auto it = operands_.find(t.text);
      if (it == operands_.end()) {
        throw UndeclaredNameError(where(t) + "undeclared operand '" + t.text + "'", t.line,
                                  t.column);
      }
      return Expr::operand(it->second);
    }
    fail("expected an operand, literal or '('");
  }

  std::vector<Token> toks_;
  std::size_t at_ = 0;
  std::map<std::string, long> sizes_;
  std::map<std::string, Operand> operands_;
  ProblemSpec spec_;
};

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // shortest form that round-trips
  for (int p = 1; p <= 17; ++p) {
    char b[40];
    std::snprintf(b, sizeof b, "%.*g", p, v);
    if (std::strtod(b, nullptr) == v) return b;
  }
  return buf;
}

std::string render(const Expr& e, bool in_product) {
  switch (e.kind()) {
    case ExprKind::literal: {
      auto s = number(e.value());
      return e.value() < 0 ? "(" + s + ")" : s;
    }
    case ExprKind::operand:
      return e.op().name();
    case ExprKind::transpose:
      return "trans(" + render(e.child(), false) + ")";
    case ExprKind::inverse:
      return "inv(" + render(e.child(), false) + ")";
    case ExprKind::times: {
      std::string s;
      for (std::size_t i = 0; i < e.arity(); ++i) {
        if (i) s += "*";
        s += render(e.child(i), true);
      }
      return s;
    }
    case ExprKind::plus: {
      std::string s;
      for (std::size_t i = 0; i < e.arity(); ++i) {
        if (i) s += " + ";
        s += render(e.child(i), false);
      }
      return in_product ? "(" + s + ")" : s;
    }
  }
  return "?";
}

}  // namespace

ProblemSpec parse_problem(std::string_view text) { return Parser().parse(text); }

ProblemSpec parse_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str());
}

std::string dsl_expr(const Expr& e) { return render(e, false); }

std::string print_problem(const ProblemSpec& spec) {
  std::ostringstream os;
  for (const auto& [name, v] : spec.sizes) os << name << " = " << v << '\n';
  for (const auto& d : spec.declarations) {
    os << to_string(d.kind) << ' ' << d.operand.name();
    switch (d.kind) {
      case DeclKind::scalar: break;
      case DeclKind::column_vector: os << '(' << d.rows_text << ')'; break;
      case DeclKind::row_vector: os << '(' << d.cols_text << ')'; break;
      default: os << '(' << d.rows_text << ", " << d.cols_text << ')';
    }
    if (d.kind != DeclKind::identity) {
      os << " <";
      bool first = true;
      const auto implied = close({}, d.operand.rows(), d.operand.cols());
      for (auto p : d.operand.properties().list()) {
        if (implied.has(p)) continue;
        if (!first) os << ", ";
        os << dsl_name(p);
        first = false;
      }
      os << '>';
    }
    os << '\n';
  }
  for (const auto& a : spec.assignments) {
    os << a.lhs.name() << " = " << dsl_expr(a.rhs) << '\n';
  }
  return os.str();
}

ProblemSpec rescale(const ProblemSpec& spec, double factor, long min_dim) {
  auto scale = [&](long v) {
    return std::max(min_dim, static_cast<long>(std::lround(static_cast<double>(v) * factor)));
  };
  auto scale_text = [&](const std::string& t) {
    if (t.empty() || !std::isdigit(static_cast<unsigned char>(t[0])) || t == "1") return t;
    return std::to_string(scale(std::stol(t)));
  };
  ProblemSpec s = spec;
  for (auto& [name, v] : s.sizes) v = scale(v);
  for (auto& d : s.declarations) {
    d.rows_text = scale_text(d.rows_text);
    d.cols_text = scale_text(d.cols_text);
  }
  return parse_problem(print_problem(s));
}

}  // namespace lagen
