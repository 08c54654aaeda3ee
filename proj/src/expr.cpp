#include "lagen/expr.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace lagen {

// ---------------------------------------------------------------------------
// Operand

Operand::Operand(std::string name, long rows, long cols, PropertySet properties,
                 Origin origin) {
  if (rows < 1 || cols < 1) {
    throw MalformedExpression("operand " + name + " has non-positive dimensions");
  }
  d_ = std::make_shared<const Data>(
      Data{std::move(name), rows, cols, close(properties, rows, cols), origin});
}

Operand Operand::identity(long n) {
  return Operand("Id" + std::to_string(n), n, n, {Property::identity});
}

Operand Operand::zero(long rows, long cols) {
  return Operand("Zero" + std::to_string(rows) + "x" + std::to_string(cols), rows,
                 cols, {Property::zero});
}

// ---------------------------------------------------------------------------
// Expr construction

namespace {

std::string literal_repr(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string dims(long r, long c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

std::size_t hash_key(const std::string& k) { return std::hash<std::string>{}(k); }

}  // namespace

Expr Expr::make(Node n) {
  switch (n.kind) {
    case ExprKind::literal:
      n.key = "#" + literal_repr(n.value);
      break;
    case ExprKind::operand:
      n.key = n.op.name();
      break;
    case ExprKind::transpose:
      n.key = "T(" + n.children[0].key() + ")";
      break;
    case ExprKind::inverse:
      n.key = "I(" + n.children[0].key() + ")";
      break;
    case ExprKind::times:
    case ExprKind::plus: {
      std::string k = n.kind == ExprKind::times ? "*(" : "+(";
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) k += ',';
        k += n.children[i].key();
      }
      k += ')';
      n.key = std::move(k);
      break;
    }
  }
  n.size = 1;
  for (const auto& c : n.children) n.size += c.size();
  n.hash = hash_key(n.key);
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::literal(double value) {
  if (!std::isfinite(value)) throw MalformedExpression("non-finite literal");
  Node n;
  n.kind = ExprKind::literal;
  n.rows = n.cols = 1;
  n.value = value == 0.0 ? 0.0 : value;  // no negative zero
  return make(std::move(n));
}

Expr Expr::operand(const Operand& op) {
  Node n;
  n.kind = ExprKind::operand;
  n.rows = op.rows();
  n.cols = op.cols();
  n.op = op;
  return make(std::move(n));
}

Expr Expr::transpose(const Expr& e) {
  Node n;
  n.kind = ExprKind::transpose;
  n.rows = e.cols();
  n.cols = e.rows();
  n.children = {e};
  return make(std::move(n));
}

Expr Expr::inverse(const Expr& e) {
  if (!e.is_square()) {
    throw MalformedExpression("inverse of non-square " + dims(e.rows(), e.cols()) +
                              " expression " + e.str());
  }
  Node n;
  n.kind = ExprKind::inverse;
  n.rows = e.rows();
  n.cols = e.cols();
  n.children = {e};
  return make(std::move(n));
}

Expr Expr::times(std::vector<Expr> children) {
  if (children.empty()) throw MalformedExpression("empty product");
  std::vector<Expr> flat;
  for (auto& c : children) {
    if (c.is(ExprKind::times)) {
      flat.insert(flat.end(), c.children().begin(), c.children().end());
    } else {
      flat.push_back(std::move(c));
    }
  }
  if (flat.size() == 1) return flat.front();
  long rows = 1, cols = 1;
  const Expr* prev = nullptr;
  for (const auto& c : flat) {
    if (c.is_scalar()) continue;
    if (prev && prev->cols() != c.rows()) {
      throw MalformedExpression("non-conformable product: " + prev->str() + " (" +
                                dims(prev->rows(), prev->cols()) + ") times " +
                                c.str() + " (" + dims(c.rows(), c.cols()) + ")");
    }
    if (!prev) rows = c.rows();
    cols = c.cols();
    prev = &c;
  }
  Node n;
  n.kind = ExprKind::times;
  n.rows = rows;
  n.cols = cols;
  n.children = std::move(flat);
  return make(std::move(n));
}

Expr Expr::plus(std::vector<Expr> children) {
  if (children.empty()) throw MalformedExpression("empty sum");
  std::vector<Expr> flat;
  for (auto& c : children) {
    if (c.is(ExprKind::plus)) {
      flat.insert(flat.end(), c.children().begin(), c.children().end());
    } else {
      flat.push_back(std::move(c));
    }
  }
  if (flat.size() == 1) return flat.front();
  for (const auto& c : flat) {
    if (c.rows() != flat.front().rows() || c.cols() != flat.front().cols()) {
      throw MalformedExpression("sum of differently shaped terms: " +
                                flat.front().str() + " (" +
                                dims(flat.front().rows(), flat.front().cols()) +
                                ") and " + c.str() + " (" + dims(c.rows(), c.cols()) +
                                ")");
    }
  }
  Node n;
  n.kind = ExprKind::plus;
  n.rows = flat.front().rows();
  n.cols = flat.front().cols();
  n.children = std::move(flat);
  return make(std::move(n));
}

bool Expr::is_leaf() const {
  const Expr* e = this;
  int depth = 0;
  while (!e->is(ExprKind::operand)) {
    if (!(e->is(ExprKind::transpose) || e->is(ExprKind::inverse)) || ++depth > 2) {
      return false;
    }
    e = &e->child();
  }
  return true;
}

const Operand& Expr::leaf_operand() const {
  const Expr* e = this;
  while (!e->is(ExprKind::operand)) e = &e->child();
  return e->op();
}

bool Expr::leaf_transposed() const {
  const Expr* e = this;
  bool t = false;
  while (!e->is(ExprKind::operand)) {
    if (e->is(ExprKind::transpose)) t = !t;
    e = &e->child();
  }
  return t;
}

bool Expr::leaf_inverted() const {
  const Expr* e = this;
  bool i = false;
  while (!e->is(ExprKind::operand)) {
    if (e->is(ExprKind::inverse)) i = !i;
    e = &e->child();
  }
  return i;
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string format_literal(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void print(const Expr& e, std::ostream& os, bool wrap_sums);

void print_factor(const Expr& e, std::ostream& os) {
  const bool atomic = e.is(ExprKind::operand) || e.is(ExprKind::literal) ||
                      e.is(ExprKind::transpose) || e.is(ExprKind::inverse);
  if (atomic) {
    print(e, os, true);
  } else {
    os << '(';
    print(e, os, false);
    os << ')';
  }
}

void print_postfix(const Expr& inner, std::ostream& os, const char* suffix) {
  if (inner.is(ExprKind::operand)) {
    os << inner.op().name() << suffix;
  } else {
    os << '(';
    print(inner, os, false);
    os << ')' << suffix;
  }
}

void print(const Expr& e, std::ostream& os, bool wrap_sums) {
  switch (e.kind()) {
    case ExprKind::literal:
      os << format_literal(e.value());
      return;
    case ExprKind::operand:
      os << e.op().name();
      return;
    case ExprKind::transpose:
      if (e.child().is(ExprKind::inverse)) {
        print_postfix(e.child().child(), os, "^-T");
      } else {
        print_postfix(e.child(), os, "^T");
      }
      return;
    case ExprKind::inverse:
      if (e.child().is(ExprKind::transpose)) {
        print_postfix(e.child().child(), os, "^-T");
      } else {
        print_postfix(e.child(), os, "^-1");
      }
      return;
    case ExprKind::times: {
      const auto& ch = e.children();
      std::size_t start = 0;
      if (ch[0].is(ExprKind::literal) && ch.size() > 1) {
        if (ch[0].value() == -1.0) {
          os << '-';
          start = 1;
        }
      }
      for (std::size_t i = start; i < ch.size(); ++i) {
        if (i > start) os << ' ';
        print_factor(ch[i], os);
      }
      return;
    }
    case ExprKind::plus: {
      if (wrap_sums) os << '(';
      bool first = true;
      for (const auto& c : e.children()) {
        std::ostringstream term;
        print(c, term, false);
        std::string t = term.str();
        if (!first) {
          if (!t.empty() && t[0] == '-') {
            os << " - " << t.substr(1);
          } else {
            os << " + " << t;
          }
        } else {
          os << t;
        }
        first = false;
      }
      if (wrap_sums) os << ')';
      return;
    }
  }
}

}  // namespace

std::string Expr::str() const {
  if (!n_) return "<null>";
  std::ostringstream os;
  print(*this, os, false);
  return os.str();
}

// ---------------------------------------------------------------------------
// Ordering and utilities

std::strong_ordering compare(const Expr& a, const Expr& b) {
  if (a.kind() != b.kind()) {
    return static_cast<int>(a.kind()) <=> static_cast<int>(b.kind());
  }
  switch (a.kind()) {
    case ExprKind::literal:
      if (a.value() < b.value()) return std::strong_ordering::less;
      if (a.value() > b.value()) return std::strong_ordering::greater;
      return std::strong_ordering::equal;
    case ExprKind::operand:
      if (auto c = a.op().name() <=> b.op().name(); c != 0) return c;
      if (auto c = a.rows() <=> b.rows(); c != 0) return c;
      return a.cols() <=> b.cols();
    default:
      break;
  }
  const auto& ca = a.children();
  const auto& cb = b.children();
  for (std::size_t i = 0; i < ca.size() && i < cb.size(); ++i) {
    if (auto c = compare(ca[i], cb[i]); c != 0) return c;
  }
  return ca.size() <=> cb.size();
}

OrderKey order_key(const Expr& e) { return OrderKey{e}; }

Expr substitute(const Expr& e, const std::map<std::string, Expr>& with) {
  switch (e.kind()) {
    case ExprKind::literal:
      return e;
    case ExprKind::operand: {
      auto it = with.find(e.op().name());
      return it == with.end() ? e : it->second;
    }
    case ExprKind::transpose:
      return Expr::transpose(substitute(e.child(), with));
    case ExprKind::inverse:
      return Expr::inverse(substitute(e.child(), with));
    case ExprKind::times:
    case ExprKind::plus: {
      std::vector<Expr> ch;
      ch.reserve(e.arity());
      bool changed = false;
      for (const auto& c : e.children()) {
        ch.push_back(substitute(c, with));
        changed = changed || !(ch.back() == c);
      }
      if (!changed) return e;
      return e.is(ExprKind::times) ? Expr::times(std::move(ch)) : Expr::plus(std::move(ch));
    }
  }
  return e;
}

void for_each_operand(const Expr& e, const std::function<void(const Operand&)>& fn) {
  if (e.is(ExprKind::operand)) {
    fn(e.op());
    return;
  }
  for (const auto& c : e.children()) for_each_operand(c, fn);
}

bool contains_operand(const Expr& e, const std::string& name) {
  if (e.is(ExprKind::operand)) return e.op().name() == name;
  for (const auto& c : e.children()) {
    if (contains_operand(c, name)) return true;
  }
  return false;
}

namespace {
bool inside_inverse(const Expr& e, const std::string& name, bool under) {
  if (e.is(ExprKind::operand)) return under && e.op().name() == name;
  const bool now = under || e.is(ExprKind::inverse);
  for (const auto& c : e.children()) {
    if (inside_inverse(c, name, now)) return true;
  }
  return false;
}
}  // namespace

bool occurs_inside_inverse(const Expr& e, const std::string& name) {
  return inside_inverse(e, name, false);
}

std::size_t operand_count(const Expr& e) {
  std::size_t n = 0;
  for_each_operand(e, [&](const Operand&) { ++n; });
  return n;
}

Term split_term(const Expr& e) {
  Term t;
  if (!e.is(ExprKind::times)) {
    if (e.is(ExprKind::literal)) {
      t.coefficient = e.value();
    } else {
      t.factors.push_back(e);
    }
    return t;
  }
  bool all_scalar = e.is_scalar();
  for (const auto& c : e.children()) {
    if (c.is(ExprKind::literal)) {
      t.coefficient *= c.value();
    } else if (c.is_scalar() && !all_scalar) {
      t.scalars.push_back(c);
    } else {
      t.factors.push_back(c);
    }
  }
  return t;
}

Expr build_term(const Term& t, long rows, long cols) {
  std::vector<Expr> ch;
  if (t.coefficient != 1.0) ch.push_back(Expr::literal(t.coefficient));
  ch.insert(ch.end(), t.scalars.begin(), t.scalars.end());
  ch.insert(ch.end(), t.factors.begin(), t.factors.end());
  if (ch.empty()) {
    if (rows == 1 && cols == 1) return Expr::literal(1.0);
    return Expr::operand(Operand::identity(rows));
  }
  if (t.factors.empty() && !(rows == 1 && cols == 1)) {
    ch.push_back(Expr::operand(Operand::identity(rows)));
  }
  return Expr::times(std::move(ch));
}

}  // namespace lagen
