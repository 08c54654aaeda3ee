#include "lagen/codegen.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace lagen {

namespace {

using SF = StorageFormat;
using json = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

double stored(SF f, long rows, long cols) {
  switch (f) {
    case SF::full:
      return static_cast<double>(rows) * static_cast<double>(cols);
    case SF::lower_triangular_half:
    case SF::upper_triangular_half: {
      const double n = static_cast<double>(std::min(rows, cols));
      return n * (n + 1) / 2 + (static_cast<double>(std::max(rows, cols)) - n) * n;
    }
    case SF::diagonal_vector:
      return static_cast<double>(std::min(rows, cols));
  }
  return 0;
}

bool canonical(const Operand& o) { return o.has(Property::identity) || o.has(Property::zero); }

// Output formats in LAPACK order; the in-place one overwrites the target.
std::vector<SF> factor_formats(const KernelCall& c) {
  std::vector<SF> out;
  for (const auto& o : c.factorization->outputs(c.target)) out.push_back(o.format);
  return out;
}

SF stricter(SF a, SF b) {
  if (satisfies(a, b)) return a;
  if (satisfies(b, a)) return b;
  return SF::full;
}

}  // namespace

double MemoryPlan::overhead() const {
  double t = 0;
  for (const auto& c : copies) t += c.touches;
  for (const auto& c : conversions) t += c.touches;
  return t;
}

int factorization_overwrite(const KernelCall& c) {
  if (!c.factorization) return -1;
  switch (c.factorization->kind) {
    case FactorizationKind::cholesky: return 0;
    case FactorizationKind::lu: return 2;
    case FactorizationKind::qr: return 1;
    case FactorizationKind::eigendecomposition: return 0;
    case FactorizationKind::svd: return 0;
  }
  return -1;
}

std::map<std::string, StorageFormat> required_formats(const KernelCall& c) {
  std::map<std::string, SF> out;
  auto need = [&](const Operand& o, SF f) {
    if (canonical(o)) return;
    auto it = out.find(o.name());
    if (it == out.end()) {
      out.emplace(o.name(), f);
    } else {
      it->second = stricter(it->second, f);
    }
  };
  if (c.factorization) {
    const auto k = c.factorization->kind;
    const bool half = k == FactorizationKind::cholesky || k == FactorizationKind::eigendecomposition;
    need(c.target, half ? SF::lower_triangular_half : SF::full);
    return out;
  }
  const auto fs = c.kernel->formats(c.sub);
  for (std::size_t v = 0; v < c.sub.bindings.size(); ++v) {
    need(c.sub.bindings[v], v < fs.size() ? fs[v] : SF::full);
  }
  for (const auto& e : c.sub.coefficients) {
    for_each_operand(e, [&](const Operand& o) { need(o, SF::full); });
  }
  return out;
}

MemoryPlan plan_memory(const Program& p) {
  MemoryPlan plan;
  auto fresh = [&] { return plan.buffer_count++; };
  for (const auto& in : p.inputs) {
    if (plan.buffer.count(in.name())) continue;
    plan.buffer[in.name()] = fresh();
    plan.format[in.name()] = natural_format(in);
  }
  std::map<std::string, std::size_t> last_read;
  for (std::size_t i = 0; i < p.calls.size(); ++i) {
    for (const auto& a : p.calls[i].arguments()) last_read[a.name()] = i;
  }
  std::set<std::string> outs;
  for (const auto& [lhs, op] : p.outputs) outs.insert(op.name());
  auto live_after = [&](const std::string& name, std::size_t i) {
    auto it = last_read.find(name);
    return outs.count(name) > 0 || (it != last_read.end() && it->second > i);
  };

  for (std::size_t i = 0; i < p.calls.size(); ++i) {
    const KernelCall& c = p.calls[i];
    Operand victim;
    int res = -1;
    bool shared = false;
    if (c.kernel) {
      const int v = c.kernel->overwrites(c.sub);
      if (v >= 0) {
        victim = c.sub.bindings.at(static_cast<std::size_t>(v));
        res = 0;
        int uses = 0;
        for (const auto& b : c.sub.bindings) uses += b == victim;
        for (const auto& e : c.sub.coefficients) {
          for_each_operand(e, [&](const Operand& o) { uses += o == victim; });
        }
        shared = uses > 1;
      }
    } else {
      res = factorization_overwrite(c);
      if (res >= 0) victim = c.target;
    }
    bool in_place = false;
    if (res >= 0 && victim.valid() && !canonical(victim) && plan.buffer.count(victim.name())) {
      const std::string& r = c.results.at(static_cast<std::size_t>(res)).name();
      if (!live_after(victim.name(), i) && !shared) {
        plan.buffer[r] = plan.buffer[victim.name()];
      } else {
        const int b = fresh();
        plan.copies.push_back({i, victim, plan.buffer[victim.name()], b,
                               stored(plan.format[victim.name()], victim.rows(), victim.cols())});
        plan.buffer[r] = b;
      }
      in_place = true;
    }
    for (std::size_t k = 0; k < c.results.size(); ++k) {
      if (static_cast<int>(k) != res || !in_place) plan.buffer[c.results[k].name()] = fresh();
    }
    if (c.kernel) {
      plan.format[c.results.at(0).name()] = c.kernel->result_format(c.sub);
    } else {
      const auto fs = factor_formats(c);
      for (std::size_t k = 0; k < c.results.size() && k < fs.size(); ++k) {
        plan.format[c.results[k].name()] = fs[k];
      }
    }
    plan.result_buffer.push_back(plan.buffer[c.results.at(0).name()]);
    plan.in_place.push_back(in_place);
  }
  for (const auto& [lhs, op] : p.outputs) {
    if (!plan.buffer.count(op.name())) {
      plan.buffer[op.name()] = fresh();
      plan.format[op.name()] = natural_format(op);
    }
  }
  return plan;
}

namespace {

std::map<std::string, Operand> operand_table(const Program& p) {
  std::map<std::string, Operand> ops;
  auto add = [&](const Operand& o) { ops.emplace(o.name(), o); };
  for (const auto& o : p.inputs) add(o);
  for (const auto& c : p.calls) {
    for (const auto& a : c.arguments()) add(a);
    for (const auto& r : c.results) add(r);
    for (const auto& b : c.sub.bindings) add(b);
    if (c.factorization) add(c.target);
    if (c.value.valid()) for_each_operand(c.value, add);
    for (const auto& e : c.sub.coefficients) for_each_operand(e, add);
  }
  for (const auto& [lhs, op] : p.outputs) {
    add(lhs);
    add(op);
  }
  return ops;
}

std::vector<Step> interleave(const Program& p, const MemoryPlan& plan) {
  std::vector<Step> steps;
  const std::size_t n = p.calls.size();
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t k = 0; k < plan.conversions.size(); ++k) {
      if (plan.conversions[k].before == i) steps.push_back({StepKind::convert, k});
    }
    for (std::size_t k = 0; k < plan.copies.size(); ++k) {
      if (plan.copies[k].before == i) steps.push_back({StepKind::copy, k});
    }
    if (i < n) steps.push_back({StepKind::call, i});
  }
  return steps;
}

}  // namespace

Lowered insert_conversions(const Program& p, MemoryPlan plan) {
  const auto ops = operand_table(p);
  std::map<std::string, SF> cur;
  for (const auto& in : p.inputs) cur[in.name()] = plan.format.at(in.name());
  plan.conversions.clear();
  auto convert = [&](std::size_t before, const std::string& name, SF to) {
    const Operand& o = ops.at(name);
    plan.conversions.push_back(
        {before, o, plan.buffer.at(name), cur.at(name), to, stored(to, o.rows(), o.cols())});
    cur[name] = to;
  };
  for (std::size_t i = 0; i < p.calls.size(); ++i) {
    const KernelCall& c = p.calls[i];
    for (const auto& [name, need] : required_formats(c)) {
      auto it = cur.find(name);
      if (it == cur.end()) throw ListingError("operand " + name + " read before it is computed");
      if (!satisfies(it->second, need)) convert(i, name, need);
    }
    for (const auto& r : c.results) cur[r.name()] = plan.format.at(r.name());
  }
  std::set<std::string> done;
  for (const auto& [lhs, op] : p.outputs) {
    if (canonical(op) || !done.insert(op.name()).second) continue;
    auto it = cur.find(op.name());
    if (it == cur.end()) {
      cur[op.name()] = plan.format.at(op.name());
      it = cur.find(op.name());
    }
    if (it->second != SF::full && !op.is_scalar()) convert(p.calls.size(), op.name(), SF::full);
  }
  Lowered l;
  l.program = p;
  l.steps = interleave(p, plan);
  l.plan = std::move(plan);
  return l;
}

Lowered lower(const Program& p) { return insert_conversions(p, plan_memory(p)); }

// ---------------------------------------------------------------------------
// replay

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix mask(Matrix m, SF f) {
  if (m.size() <= 1) return m;
  for (long j = 0; j < m.cols(); ++j) {
    for (long i = 0; i < m.rows(); ++i) {
      const bool keep = f == SF::full || (f == SF::lower_triangular_half && i >= j) ||
                        (f == SF::upper_triangular_half && i <= j) ||
                        (f == SF::diagonal_vector && i == j);
      if (!keep) m(i, j) = kNaN;
    }
  }
  return m;
}

Matrix unmask(Matrix m, SF f, bool symmetric) {
  if (f == SF::full || m.size() <= 1) return m;
  for (long j = 0; j < m.cols(); ++j) {
    for (long i = 0; i < m.rows(); ++i) {
      if (f == SF::diagonal_vector) {
        if (i != j) m(i, j) = 0;
      } else if (f == SF::lower_triangular_half && i < j) {
        m(i, j) = symmetric ? m(j, i) : 0.0;
      } else if (f == SF::upper_triangular_half && i > j) {
        m(i, j) = symmetric ? m(j, i) : 0.0;
      }
    }
  }
  return m;
}

struct Replay {
  const Lowered& l;
  bool numeric;
  std::map<int, Matrix> data;
  std::map<int, std::string> owner;
  std::map<std::string, SF> cur;
  std::vector<std::string> problems;

  const Matrix& read(const std::string& name, const std::string& where) {
    static const Matrix none;
    const int b = l.plan.buffer.at(name);
    auto o = owner.find(b);
    if (o == owner.end() || o->second != name) {
      problems.push_back(where + ": " + name + " read after its buffer b" + std::to_string(b) +
                         " was overwritten");
      if (numeric) throw InterpreterError(problems.back());
      return none;
    }
    return data[b];
  }

  void write(const Operand& op, Matrix value) {
    const int b = l.plan.buffer.at(op.name());
    const SF f = l.plan.format.at(op.name());
    owner[b] = op.name();
    cur[op.name()] = f;
    if (numeric) data[b] = mask(std::move(value), f);
  }

  void run(const ProblemInstance* inst) {
    const Program& p = l.program;
    for (const auto& in : p.inputs) {
      Matrix v;
      if (numeric) v = evaluate(Expr::operand(in), inst->values);
      write(in, v);
    }
    for (const auto& s : l.steps) {
      switch (s.kind) {
        case StepKind::convert: {
          const auto& c = l.plan.conversions.at(s.index);
          const std::string& name = c.operand.name();
          read(name, "conversion");
          if (cur[name] != c.from) problems.push_back("conversion of " + name + ": wrong source format");
          if (numeric) {
            const int b = l.plan.buffer.at(name);
            data[b] = mask(unmask(data[b], c.from, c.operand.has(Property::symmetric)), c.to);
          }
          cur[name] = c.to;
          break;
        }
        case StepKind::copy: {
          const auto& c = l.plan.copies.at(s.index);
          read(c.operand.name(), "copy");
          if (numeric) data[c.to] = data[c.from];
          owner[c.to] = c.operand.name() + "'";
          break;
        }
        case StepKind::call: {
          const KernelCall& c = p.calls.at(s.index);
          const std::string where = c.str();
          Values env;
          for (const auto& a : c.arguments()) {
            const Matrix& v = read(a.name(), where);
            if (numeric) env[a.name()] = v;
          }
          for (const auto& [name, need] : required_formats(c)) {
            if (!satisfies(cur[name], need)) {
              problems.push_back(where + ": " + name + " stored as " +
                                 std::string(to_string(cur[name])) + ", needs " +
                                 std::string(to_string(need)));
            }
          }
          std::vector<Matrix> res;
          if (numeric) res = run_call(c, env).results;
          for (std::size_t k = 0; k < c.results.size(); ++k) {
            write(c.results[k], numeric ? res.at(k) : Matrix());
          }
          break;
        }
      }
    }
  }
};

}  // namespace

std::vector<std::string> audit(const Lowered& l) {
  Replay r{l, false, {}, {}, {}, {}};
  r.run(nullptr);
  for (const auto& [lhs, op] : l.program.outputs) {
    if (canonical(op)) continue;
    r.read(op.name(), "output " + lhs.name());
    if (!op.is_scalar() && r.cur[op.name()] != SF::full) {
      r.problems.push_back("output " + lhs.name() + " is not in full storage");
    }
  }
  return r.problems;
}

Values execute_lowered(const Lowered& l, const ProblemInstance& inst) {
  Replay r{l, true, {}, {}, {}, {}};
  r.run(&inst);
  Values out;
  for (const auto& [lhs, op] : l.program.outputs) {
    out[lhs.name()] =
        canonical(op) ? evaluate(Expr::operand(op), inst.values) : r.read(op.name(), "output");
  }
  return out;
}

// ---------------------------------------------------------------------------
// emission

namespace {

json expr_json(const Expr& e) {
  json j;
  switch (e.kind()) {
    case ExprKind::literal: j["lit"] = e.value(); break;
    case ExprKind::operand: j["op"] = e.op().name(); break;
    case ExprKind::transpose: j["trans"] = expr_json(e.child()); break;
    case ExprKind::inverse: j["inv"] = expr_json(e.child()); break;
    case ExprKind::times:
    case ExprKind::plus: {
      json a = json::array();
      for (const auto& c : e.children()) a.push_back(expr_json(c));
      j[e.is(ExprKind::times) ? "times" : "plus"] = a;
      break;
    }
  }
  return j;
}

Expr expr_from(const json& j, const std::map<std::string, Operand>& ops) {
  if (j.contains("lit")) return Expr::literal(j.at("lit").get<double>());
  if (j.contains("op")) {
    const auto name = j.at("op").get<std::string>();
    auto it = ops.find(name);
    if (it == ops.end()) throw ListingError("unknown operand " + name);
    return Expr::operand(it->second);
  }
  if (j.contains("trans")) return Expr::transpose(expr_from(j.at("trans"), ops));
  if (j.contains("inv")) return Expr::inverse(expr_from(j.at("inv"), ops));
  const bool times = j.contains("times");
  if (!times && !j.contains("plus")) throw ListingError("malformed expression");
  std::vector<Expr> cs;
  for (const auto& c : j.at(times ? "times" : "plus")) cs.push_back(expr_from(c, ops));
  return times ? Expr::times(std::move(cs)) : Expr::plus(std::move(cs));
}

json operand_json(const Operand& o) {
  json j;
  j["name"] = o.name();
  j["rows"] = o.rows();
  j["cols"] = o.cols();
  json ps = json::array();
  for (auto p : o.properties().list()) ps.push_back(std::string(dsl_name(p)));
  j["properties"] = ps;
  j["origin"] = static_cast<int>(o.origin());
  return j;
}

std::string name_list(const std::vector<Operand>& ops) {
  std::string s;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (i) s += ", ";
    s += ops[i].name();
  }
  return s;
}

std::string text_listing(const Lowered& l) {
  std::ostringstream os;
  for (const auto& c : l.program.calls) {
    os << c.name() << "(" << name_list(c.arguments()) << ") -> " << name_list(c.results)
       << "  # " << fmt(c.flops) << "\n";
  }
  return os.str();
}

std::string at(const MemoryPlan& p, const std::string& name) {
  return name + "@b" + std::to_string(p.buffer.at(name));
}

std::string pseudocode(const Lowered& l) {
  const Program& p = l.program;
  const MemoryPlan& plan = l.plan;
  if (p.calls.empty() && p.outputs.empty()) return "";
  std::ostringstream os;
  for (const auto& in : p.inputs) {
    os << "input " << at(plan, in.name()) << " : " << in.rows() << "x" << in.cols() << " "
       << to_string(plan.format.at(in.name())) << "\n";
  }
  for (const auto& s : l.steps) {
    switch (s.kind) {
      case StepKind::convert: {
        const auto& c = plan.conversions[s.index];
        os << at(plan, c.operand.name()) << " := convert(" << c.operand.name() << ", "
           << to_string(c.from) << " -> " << to_string(c.to) << ")  # " << fmt(c.touches)
           << " touches\n";
        break;
      }
      case StepKind::copy: {
        const auto& c = plan.copies[s.index];
        os << c.operand.name() << "@b" << c.to << " := copy(" << c.operand.name() << "@b"
           << c.from << ")  # " << fmt(c.touches) << " touches\n";
        break;
      }
      case StepKind::call: {
        const KernelCall& c = p.calls[s.index];
        std::string lhs;
        for (const auto& r : c.results) {
          if (!lhs.empty()) lhs += ", ";
          lhs += at(plan, r.name());
        }
        os << lhs << " := " << c.name() << (plan.in_place[s.index] ? "!" : "") << "("
           << name_list(c.arguments()) << ")  # " << c.value.str() << " ; " << fmt(c.flops)
           << " flops\n";
        break;
      }
    }
  }
  for (const auto& [lhs, op] : p.outputs) {
    os << "output " << lhs.name() << " = "
       << (plan.buffer.count(op.name()) ? at(plan, op.name()) : op.name()) << "\n";
  }
  return os.str();
}

std::string listing_json(const Lowered& l) {
  const Program& p = l.program;
  const MemoryPlan& plan = l.plan;
  json j;
  j["format"] = "lagen-listing";
  j["version"] = 1;
  json ops = json::array();
  for (const auto& [name, o] : operand_table(p)) ops.push_back(operand_json(o));
  j["operands"] = ops;
  json ins = json::array();
  for (const auto& o : p.inputs) ins.push_back(o.name());
  j["inputs"] = ins;
  json outs = json::array();
  for (const auto& [lhs, op] : p.outputs) outs.push_back(json::array({lhs.name(), op.name()}));
  j["outputs"] = outs;
  j["total_cost"] = p.total_cost;
  json calls = json::array();
  for (std::size_t i = 0; i < p.calls.size(); ++i) {
    const KernelCall& c = p.calls[i];
    json k;
    if (c.factorization) {
      k["factorization"] = c.factorization->name;
      k["target"] = c.target.name();
    } else {
      k["kernel"] = c.kernel->name;
      json b = json::array(), m = json::array(), co = json::array();
      for (const auto& o : c.sub.bindings) b.push_back(o.name());
      for (auto mod : c.sub.modifiers) m.push_back(static_cast<int>(mod));
      for (const auto& e : c.sub.coefficients) co.push_back(expr_json(e));
      k["bindings"] = b;
      k["modifiers"] = m;
      k["coefficients"] = co;
      k["site"] = {{"path", c.sub.site.path}, {"children", c.sub.site.children}};
    }
    json rs = json::array();
    for (const auto& r : c.results) rs.push_back(r.name());
    k["results"] = rs;
    k["value"] = c.value.valid() ? expr_json(c.value) : json();
    k["flops"] = c.flops;
    json args = json::array(), fmts = json::array();
    for (const auto& a : c.arguments()) {
      args.push_back(plan.buffer.count(a.name()) ? plan.buffer.at(a.name()) : -1);
    }
    for (const auto& [name, f] : required_formats(c)) {
      fmts.push_back(json::array({name, std::string(to_string(f))}));
    }
    k["argument_buffers"] = args;
    k["formats"] = fmts;
    k["result_buffer"] = plan.result_buffer.at(i);
    k["in_place"] = static_cast<bool>(plan.in_place.at(i));
    calls.push_back(k);
  }
  j["calls"] = calls;
  json buf = json::object(), fm = json::object();
  for (const auto& [name, b] : plan.buffer) buf[name] = b;
  for (const auto& [name, f] : plan.format) fm[name] = std::string(to_string(f));
  j["buffers"] = buf;
  j["formats"] = fm;
  j["buffer_count"] = plan.buffer_count;
  json cps = json::array(), cvs = json::array(), steps = json::array();
  for (const auto& c : plan.copies) {
    cps.push_back({{"before", c.before}, {"operand", c.operand.name()}, {"from", c.from},
                   {"to", c.to}, {"touches", c.touches}});
  }
  for (const auto& c : plan.conversions) {
    cvs.push_back({{"before", c.before}, {"operand", c.operand.name()}, {"buffer", c.buffer},
                   {"from", std::string(to_string(c.from))},
                   {"to", std::string(to_string(c.to))}, {"touches", c.touches}});
  }
  static const char* kinds[] = {"call", "copy", "convert"};
  for (const auto& s : l.steps) {
    steps.push_back(json::array({kinds[static_cast<int>(s.kind)], s.index}));
  }
  j["copies"] = cps;
  j["conversions"] = cvs;
  j["steps"] = steps;
  j["overhead"] = plan.overhead();
  return j.dump(2) + "\n";
}

SF format_from(const json& j) {
  auto f = storage_format_from_string(j.get<std::string>());
  if (!f) throw ListingError("unknown storage format " + j.get<std::string>());
  return *f;
}

}  // namespace

std::string emit(const Lowered& l, EmitFormat f) {
  switch (f) {
    case EmitFormat::listing_text: return text_listing(l);
    case EmitFormat::listing_json: return listing_json(l);
    case EmitFormat::pseudocode: return pseudocode(l);
  }
  return "";
}

Lowered parse_listing_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ListingError(std::string("invalid listing: ") + e.what());
  }
  try {
    if (j.value("format", "") != "lagen-listing" || j.value("version", 0) != 1) {
      throw ListingError("not a version 1 listing");
    }
    std::map<std::string, Operand> ops;
    for (const auto& o : j.at("operands")) {
      PropertySet ps;
      for (const auto& p : o.at("properties")) {
        auto prop = property_from_dsl(p.get<std::string>());
        if (!prop) throw ListingError("unknown property " + p.get<std::string>());
        ps.insert(*prop);
      }
      const auto name = o.at("name").get<std::string>();
      ops.emplace(name, Operand(name, o.at("rows").get<long>(), o.at("cols").get<long>(), ps,
                                static_cast<Origin>(o.at("origin").get<int>())));
    }
    auto op = [&](const json& n) {
      auto it = ops.find(n.get<std::string>());
      if (it == ops.end()) throw ListingError("unknown operand " + n.get<std::string>());
      return it->second;
    };
    Lowered l;
    Program& p = l.program;
    for (const auto& n : j.at("inputs")) p.inputs.push_back(op(n));
    for (const auto& o : j.at("outputs")) p.outputs.emplace_back(op(o.at(0)), op(o.at(1)));
    p.total_cost = j.at("total_cost").get<double>();
    MemoryPlan& plan = l.plan;
    for (const auto& k : j.at("calls")) {
      KernelCall c;
      if (k.contains("factorization")) {
        c.factorization = find_factorization(k.at("factorization").get<std::string>());
        if (!c.factorization) throw ListingError("unknown factorization");
        c.target = op(k.at("target"));
      } else {
        c.kernel = find_kernel(k.at("kernel").get<std::string>());
        if (!c.kernel) throw ListingError("unknown kernel " + k.at("kernel").get<std::string>());
        for (const auto& b : k.at("bindings")) c.sub.bindings.push_back(op(b));
        for (const auto& m : k.at("modifiers")) {
          c.sub.modifiers.push_back(static_cast<Modifier>(m.get<int>()));
        }
        for (const auto& e : k.at("coefficients")) c.sub.coefficients.push_back(expr_from(e, ops));
        c.sub.site.path = k.at("site").at("path").get<std::vector<std::size_t>>();
        c.sub.site.children = k.at("site").at("children").get<std::vector<std::size_t>>();
      }
      for (const auto& r : k.at("results")) c.results.push_back(op(r));
      if (!k.at("value").is_null()) c.value = expr_from(k.at("value"), ops);
      c.flops = k.at("flops").get<double>();
      plan.result_buffer.push_back(k.at("result_buffer").get<int>());
      plan.in_place.push_back(k.at("in_place").get<bool>());
      p.calls.push_back(std::move(c));
    }
    for (const auto& [name, b] : j.at("buffers").items()) plan.buffer[name] = b.get<int>();
    for (const auto& [name, f] : j.at("formats").items()) plan.format[name] = format_from(f);
    plan.buffer_count = j.at("buffer_count").get<int>();
    for (const auto& c : j.at("copies")) {
      plan.copies.push_back({c.at("before").get<std::size_t>(), op(c.at("operand")),
                             c.at("from").get<int>(), c.at("to").get<int>(),
                             c.at("touches").get<double>()});
    }
    for (const auto& c : j.at("conversions")) {
      plan.conversions.push_back({c.at("before").get<std::size_t>(), op(c.at("operand")),
                                  c.at("buffer").get<int>(), format_from(c.at("from")),
                                  format_from(c.at("to")), c.at("touches").get<double>()});
    }
    for (const auto& s : j.at("steps")) {
      const auto kind = s.at(0).get<std::string>();
      const StepKind k = kind == "call"   ? StepKind::call
                         : kind == "copy" ? StepKind::copy
                         : kind == "convert"
                             ? StepKind::convert
                             : throw ListingError("unknown step " + kind);
      l.steps.push_back({k, s.at(1).get<std::size_t>()});
    }
    return l;
  } catch (const json::exception& e) {
    throw ListingError(std::string("malformed listing: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// derivation report

std::string derivation_report(const DerivationGraph& g, const Path& path) {
  std::ostringstream os;
  int at_node = 0;
  double total = 0;
  std::size_t step = 0;
  auto node = [&](int v) -> const Node& {
    if (v < 0 || static_cast<std::size_t>(v) >= g.nodes.size()) {
      throw std::invalid_argument("dangling path: node " + std::to_string(v));
    }
    return g.nodes[static_cast<std::size_t>(v)];
  };
  os << "state " << step << " (node " << at_node << "): " << node(0).state.str() << "\n";
  for (int e : path.edges) {
    if (e < 0 || static_cast<std::size_t>(e) >= g.edges.size()) {
      throw std::invalid_argument("dangling path: edge " + std::to_string(e));
    }
    const Edge& ed = g.edges[static_cast<std::size_t>(e)];
    if (ed.from != at_node) {
      throw std::invalid_argument("dangling path: edge " + std::to_string(e) +
                                  " does not leave node " + std::to_string(at_node));
    }
    os << "  " << ed.label << "\n";
    for (const auto& c : ed.calls) {
      total += c.flops;
      os << "    " << c.str();
      if (c.value.valid()) os << "    [" << c.results.at(0).name() << " = " << c.value.str() << "]";
      os << "    " << fmt(c.flops) << " flops, cumulative " << fmt(total) << "\n";
    }
    at_node = ed.to;
    ++step;
    os << "state " << step << " (node " << at_node << "): " << node(at_node).state.str() << "\n";
  }
  if (!node(at_node).terminal) throw std::invalid_argument("dangling path: ends at a non-terminal");
  os << "total cost: " << fmt(total) << "\n";
  return os.str();
}

}  // namespace lagen
