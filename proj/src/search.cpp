#include "lagen/search.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <queue>
#include <sstream>

#include "lagen/infer.hpp"

namespace lagen {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool plain(const Expr& e) { return e.is(ExprKind::operand); }

double total(const std::vector<KernelCall>& calls) {
  double c = 0;
  for (const auto& k : calls) c += k.flops;
  return c;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

bool mentions(const Expr& e, const std::set<std::string>& names) {
  if (names.empty()) return false;
  bool hit = false;
  for_each_operand(e, [&](const Operand& o) { hit = hit || names.count(o.name()) > 0; });
  return hit;
}

bool only_factors(const std::vector<Operand>& args) {
  if (args.empty()) return false;
  return std::all_of(args.begin(), args.end(), [](const Operand& o) { return o.is_factor(); });
}

}  // namespace

// ---------------------------------------------------------------------------
// IntermediateTable

IntermediateTable::IntermediateTable(std::set<std::string> reserved) : used_(std::move(reserved)) {}

std::string IntermediateTable::fresh(const std::string& prefix) {
  int& c = counters_[prefix];
  std::string n;
  do {
    n = prefix + std::to_string(++c);
  } while (used_.count(n));
  used_.insert(n);
  return n;
}

std::optional<Operand> IntermediateTable::find(const Expr& full) const {
  auto it = by_value_.find(full.key());
  if (it == by_value_.end()) return std::nullopt;
  return entries_[it->second].op;
}

Operand IntermediateTable::intermediate_for(const Expr& full) {
  if (auto f = find(full)) return *f;
  PropertySet props;
  try {
    props = infer(full);
  } catch (const InconsistentProperties&) {
  }
  Operand op(fresh("T"), full.rows(), full.cols(), props, Origin::intermediate);
  by_value_.emplace(full.key(), entries_.size());
  by_name_.emplace(op.name(), entries_.size());
  entries_.push_back({op, full});
  return op;
}

const Expr* IntermediateTable::value_of(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : &entries_[it->second].value;
}

Expr IntermediateTable::full_value(const Expr& e) const {
  std::map<std::string, Expr> with;
  for_each_operand(e, [&](const Operand& o) {
    if (const Expr* v = value_of(o.name())) with.emplace(o.name(), *v);
  });
  return normalize(with.empty() ? e : substitute(e, with));
}

std::vector<Operand> IntermediateTable::factors_for(const Factorization& f, const Operand& target) {
  const std::string key = f.name + "|" + full_value(Expr::operand(target)).key();
  if (auto it = factors_.find(key); it != factors_.end()) return it->second;
  std::vector<std::string> names;
  for (const auto& o : f.outputs(target)) names.push_back(fresh(o.role));
  auto ops = factor_operands(f, target, names);
  factors_.emplace(key, ops);
  return ops;
}

// ---------------------------------------------------------------------------
// State

bool State::terminal() const {
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (!done(i)) return false;
  }
  return true;
}

std::string State::key() const {
  std::string k;
  for (const auto& a : assignments) {
    k += a.rhs.key();
    k += ';';
  }
  return k;
}

std::string State::str() const {
  std::string s;
  for (const auto& a : assignments) {
    if (!s.empty()) s += "; ";
    s += a.lhs.name() + " := " + a.rhs.str();
  }
  return s;
}

// ---------------------------------------------------------------------------
// PriorityStack

void PriorityStack::push(int priority, int value) {
  stacks_[priority].push_back(value);
  ++size_;
}

std::pair<int, int> PriorityStack::pop() {
  if (size_ == 0) throw std::logic_error("pop from empty priority stack");
  auto it = stacks_.begin();
  const int v = it->second.back();
  const int p = it->first;
  it->second.pop_back();
  if (it->second.empty()) stacks_.erase(it);
  --size_;
  return {p, v};
}

// ---------------------------------------------------------------------------
// Search

Search::Search(const ProblemSpec& problem, SearchOptions options) : opt_(options) {
  std::set<std::string> reserved;
  for (const auto& d : problem.declarations) reserved.insert(d.operand.name());
  State root;
  for (const auto& a : problem.assignments) {
    reserved.insert(a.lhs.name());
    for_each_operand(a.rhs, [&](const Operand& o) { reserved.insert(o.name()); });
    root.assignments.push_back({a.lhs, normalize(a.rhs)});
  }
  g_.table = IntermediateTable(std::move(reserved));
  init(std::move(root));
}

Search::Search(State root, std::set<std::string> reserved, SearchOptions options)
    : opt_(options) {
  for (auto& a : root.assignments) {
    reserved.insert(a.lhs.name());
    for_each_operand(a.rhs, [&](const Operand& o) { reserved.insert(o.name()); });
    a.rhs = normalize(a.rhs);
  }
  g_.table = IntermediateTable(std::move(reserved));
  init(std::move(root));
}

void Search::init(State root) {
  start_ = std::chrono::steady_clock::now();
  settle(root);
  Node n;
  n.id = 0;
  n.key = root.key();
  n.state = std::move(root);
  n.terminal = n.state.terminal();
  g_.nodes.push_back(std::move(n));
  by_key_.emplace(g_.nodes[0].key, 0);
  if (g_.nodes[0].terminal) {
    g_.terminals.push_back(0);
    g_.best_cost = 0;
    g_.no_solution = false;
    g_.first_solution_seconds = 0;
  } else {
    stack_.push(0, 0);
  }
}

void Search::settle(State& s) const {
  for (std::size_t i = 0; i < s.assignments.size(); ++i) {
    if (!s.done(i)) continue;
    const std::string& name = s.assignments[i].lhs.name();
    const Expr with = s.assignments[i].rhs;
    if (with.op().name() == name) continue;
    for (std::size_t j = i + 1; j < s.assignments.size(); ++j) {
      auto& rhs = s.assignments[j].rhs;
      if (contains_operand(rhs, name)) rhs = normalize(substitute(rhs, {{name, with}}));
    }
  }
}

std::set<std::string> Search::blocked(const State& s, std::size_t i) const {
  std::set<std::string> out;
  for (std::size_t k = 0; k < i; ++k) {
    if (!s.done(k)) out.insert(s.assignments[k].lhs.name());
  }
  return out;
}

bool Search::out_of_budget() const {
  const double t =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  if (t >= opt_.time_limit) return true;
  return opt_.max_iterations && g_.iterations >= opt_.max_iterations;
}

void Search::run() {
  start_ = std::chrono::steady_clock::now();
  bool drained = true;
  while (!stack_.empty()) {
    if (out_of_budget()) {
      drained = false;
      break;
    }
    step();
  }
  g_.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  if (drained && g_.no_solution) {
    throw UnsolvableProblem("no sequence of kernels computes " + g_.nodes[0].state.str());
  }
}

bool Search::step() {
  if (stack_.empty() || out_of_budget()) return false;
  auto [p, v] = stack_.pop();
  ++g_.iterations;
  const auto idx = static_cast<std::size_t>(v);
  if (opt_.pruning && g_.nodes[idx].cost > g_.best_cost) {
    g_.nodes[idx].pruned = true;
    return true;
  }
  if (!next_successor(v)) {
    g_.nodes[idx].exhausted = true;
    return true;
  }
  stack_.push(p + 1, v);
  return true;
}

std::optional<int> Search::next_successor(int v) {
  auto& pend = pending_[v];
  while (pend.next >= pend.items.size() && pend.stage < 2) extend(v);
  auto& p = pending_[v];
  if (p.next < p.items.size()) {
    Candidate c = p.items[p.next++];
    const int u = connect(v, c.next, std::move(c.calls), c.cost, std::move(c.label));
    ++g_.nodes[static_cast<std::size_t>(v)].successor_count;
    return u;
  }
  if (v == 0 && g_.nodes[0].successor_count == 0) {
    throw UnsolvableProblem("no kernel or rewrite applies to " + g_.nodes[0].state.str());
  }
  return std::nullopt;
}

const std::vector<Candidate>& Search::candidates(int v) {
  while (pending_[v].stage < 2) extend(v);
  return pending_[v].items;
}

int Search::connect(int from, const State& next, std::vector<KernelCall> calls, double cost,
                    std::string label) {
  const double c = g_.nodes[static_cast<std::size_t>(from)].cost + cost;
  std::string key = next.key();
  Edge e;
  e.id = static_cast<int>(g_.edges.size());
  e.from = from;
  e.calls = std::move(calls);
  e.cost = cost;
  e.label = std::move(label);

  if (opt_.merging) {
    if (auto it = by_key_.find(key); it != by_key_.end()) {
      const int u = it->second;
      e.to = u;
      g_.nodes[static_cast<std::size_t>(from)].out.push_back(e.id);
      g_.nodes[static_cast<std::size_t>(u)].in.push_back(e.id);
      g_.edges.push_back(std::move(e));
      if (c < g_.nodes[static_cast<std::size_t>(u)].cost) {
        g_.nodes[static_cast<std::size_t>(u)].cost = c;
        touched(u);
        relax(u);
      }
      return u;
    }
  }

  Node n;
  n.id = static_cast<int>(g_.nodes.size());
  n.state = next;
  n.key = key;
  n.cost = c;
  n.terminal = next.terminal();
  e.to = n.id;
  n.in.push_back(e.id);
  g_.nodes[static_cast<std::size_t>(from)].out.push_back(e.id);
  g_.edges.push_back(std::move(e));
  by_key_.emplace(std::move(key), n.id);
  const int u = n.id;
  const bool term = n.terminal;
  g_.nodes.push_back(std::move(n));
  if (term) {
    g_.terminals.push_back(u);
    if (c < g_.best_cost) g_.best_cost = c;
    if (g_.no_solution) {
      g_.first_solution_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    g_.no_solution = false;
  } else {
    stack_.push(0, u);
  }
  return u;
}

void Search::touched(int v) {
  Node& n = g_.nodes[static_cast<std::size_t>(v)];
  if (n.terminal) {
    if (n.cost < g_.best_cost) g_.best_cost = n.cost;
    return;
  }
  if (n.pruned && n.cost <= g_.best_cost) {
    n.pruned = false;
    stack_.push(0, v);
  }
}

void Search::relax(int from) {
  std::deque<int> work{from};
  while (!work.empty()) {
    const int x = work.front();
    work.pop_front();
    const double cx = g_.nodes[static_cast<std::size_t>(x)].cost;
    for (int eid : g_.nodes[static_cast<std::size_t>(x)].out) {
      const Edge& e = g_.edges[static_cast<std::size_t>(eid)];
      Node& y = g_.nodes[static_cast<std::size_t>(e.to)];
      if (cx + e.cost < y.cost) {
        y.cost = cx + e.cost;
        touched(e.to);
        work.push_back(e.to);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// successor generation

Operand Search::name_value(const Expr& value) {
  return g_.table.intermediate_for(g_.table.full_value(value));
}

namespace {

KernelCall call_of(const ChainStep& s) {
  KernelCall k;
  k.kernel = s.kernel;
  k.sub = s.sub;
  k.results = {s.result};
  k.value = s.value;
  k.flops = s.cost;
  return k;
}

struct Whole {
  const Kernel* kernel = nullptr;
  Substitution sub;
  double cost = kInf;
};

Whole best_single(const Expr& e) {
  Whole b;
  for (const auto& k : builtin_kernels()) {
    if (k.pattern.shape != Pattern::Shape::product || k.pattern.leaf_count() != 1) continue;
    for (auto& s : match(k, e)) {
      if (!s.site.path.empty() || !s.site.children.empty()) continue;
      const double c = cost(k, s);
      if (c < b.cost) b = Whole{&k, std::move(s), c};
    }
  }
  return b;
}

}  // namespace

Operand Search::finish(Expr r, std::vector<KernelCall>& calls) {
  for (int round = 0; round < 4; ++round) {
    if (plain(r)) return r.op();
    Whole w = best_single(r);
    if (w.kernel) {
      KernelCall k;
      k.kernel = w.kernel;
      k.sub = w.sub;
      k.value = normalize(r);
      k.results = {name_value(k.value)};
      k.flops = w.cost;
      calls.push_back(k);
      return k.results[0];
    }
    Term t = split_term(r);
    if (t.factors.size() != 1 || plain(t.factors[0]) || t.factors[0] == r) break;
    const Operand m = finish(t.factors[0], calls);
    t.factors = {Expr::operand(m)};
    r = build_term(t, r.rows(), r.cols());
  }
  throw std::invalid_argument("no kernel computes " + r.str());
}

Expr Search::leafify(const Expr& f, std::vector<KernelCall>& calls) {
  if (f.is_leaf()) return f;
  if (f.is(ExprKind::inverse)) {
    return normalize(Expr::inverse(Expr::operand(construct(f.child(), calls))));
  }
  if (f.is(ExprKind::transpose)) {
    return normalize(Expr::transpose(Expr::operand(construct(f.child(), calls))));
  }
  return Expr::operand(construct(f, calls));
}

Expr Search::reduce_term(const Expr& term, std::vector<KernelCall>& calls) {
  Term t = split_term(term);
  std::vector<ChainElement> elems;
  for (const auto& s : t.scalars) elems.push_back(ChainElement::from(leafify(s, calls)));
  for (const auto& f : t.factors) elems.push_back(ChainElement::from(leafify(f, calls)));
  if (elems.empty()) throw std::invalid_argument("term without operands: " + term.str());
  Expr leaf = elems[0].expr;
  if (elems.size() > 1) {
    auto cr = matrix_chain(elems, [this](const Expr& v) { return name_value(v); });
    for (const auto& s : cr.steps) calls.push_back(call_of(s));
    leaf = cr.result;
  }
  Term out;
  out.coefficient = t.coefficient;
  out.factors = {leaf};
  return build_term(out, term.rows(), term.cols());
}

Operand Search::construct(const Expr& e, std::vector<KernelCall>& calls) {
  if (plain(e)) return e.op();
  std::vector<Expr> terms = e.is(ExprKind::plus) ? e.children() : std::vector<Expr>{e};
  std::vector<Expr> reduced;
  for (const auto& t : terms) reduced.push_back(reduce_term(t, calls));
  if (reduced.size() == 1) return finish(reduced[0], calls);
  for (auto& r : reduced) {
    Term t = split_term(r);
    if (t.factors.size() == 1 && t.factors[0].is_leaf() && t.factors[0].leaf_inverted()) {
      t.factors = {Expr::operand(finish(t.factors[0], calls))};
      r = build_term(t, r.rows(), r.cols());
    }
  }
  auto cr = greedy_sum(reduced, [this](const Expr& v) { return name_value(v); });
  for (const auto& s : cr.steps) calls.push_back(call_of(s));
  return cr.result.op();
}

Candidate Search::complete(const State& s, std::size_t assignment) {
  Candidate c;
  c.next = s;
  const Operand r = construct(s.assignments[assignment].rhs, c.calls);
  c.next.assignments[assignment].rhs = Expr::operand(r);
  settle(c.next);
  c.cost = total(c.calls);
  c.label = "complete";
  c.category = 1;
  return c;
}

std::vector<Candidate> Search::constructive(const State& s) {
  std::vector<Candidate> out, chains;
  for (std::size_t j = 0; j < s.assignments.size(); ++j) {
    if (s.done(j)) continue;
    const auto blk = blocked(s, j);
    const Expr& rhs = s.assignments[j].rhs;
    if (!mentions(rhs, blk)) {
      try {
        out.push_back(complete(s, j));
      } catch (const std::exception&) {
      }
    }
    if (!rhs.is(ExprKind::plus)) continue;
    for (std::size_t t = 0; t < rhs.arity(); ++t) {
      const Expr& term = rhs.child(t);
      if (!term.is(ExprKind::times) || mentions(term, blk)) continue;
      const bool leaves = std::all_of(term.children().begin(), term.children().end(),
                                      [](const Expr& c) {
                                        return c.is_leaf() || c.is(ExprKind::literal);
                                      });
      if (!leaves) continue;
      try {
        Candidate c;
        const Expr r = reduce_term(term, c.calls);
        if (c.calls.empty()) continue;
        std::vector<Expr> kids = rhs.children();
        kids[t] = r;
        c.next = s;
        c.next.assignments[j].rhs = normalize(Expr::plus(std::move(kids)));
        settle(c.next);
        c.cost = total(c.calls);
        c.label = "chain";
        c.category = 1;
        chains.push_back(std::move(c));
      } catch (const std::exception&) {
      }
    }
  }
  std::stable_sort(chains.begin(), chains.end(),
                   [](const Candidate& a, const Candidate& b) { return a.cost < b.cost; });
  for (auto& c : chains) out.push_back(std::move(c));
  return out;
}

std::optional<Candidate> Search::apply_kernel(const State& s, std::size_t assignment,
                                              const Expr& representation, const KernelMatch& m) {
  KernelCall call;
  call.kernel = m.kernel;
  call.sub = m.sub;
  const auto args = call.arguments();
  const auto blk = blocked(s, assignment);
  for (const auto& a : args) {
    if (blk.count(a.name())) return std::nullopt;
  }
  if (only_factors(args)) return std::nullopt;
  const Expr local = normalize(m.sub.instantiate(m.kernel->pattern));
  const Expr full = g_.table.full_value(local);
  if (plain(full)) return std::nullopt;
  const Operand t = g_.table.intermediate_for(full);
  call.results = {t};
  call.value = local;
  call.flops = cost(*m.kernel, m.sub);
  Candidate c;
  c.next = s;
  c.next.assignments[assignment].rhs =
      normalize(replace_site(representation, m.sub.site, Expr::operand(t)));
  settle(c.next);
  c.cost = call.flops;
  c.label = m.kernel->name;
  c.calls = {std::move(call)};
  c.category = 2;
  return c;
}

std::vector<Candidate> Search::matches(const State& s, bool pos_only, bool skip_pos) {
  struct Raw {
    std::size_t assignment;
    Expr rep;
    KernelMatch m;
    double cost;
    std::size_t order;
  };
  std::vector<Raw> raw;
  for (std::size_t j = 0; j < s.assignments.size(); ++j) {
    if (s.done(j)) continue;
    const Expr& rhs = s.assignments[j].rhs;
    const Expr pos = product_of_sums(rhs);
    std::vector<Expr> reps;
    if (pos_only) {
      reps.push_back(pos);
    } else {
      for (auto& r : representations(rhs)) {
        if (skip_pos && r == pos) continue;
        reps.push_back(r);
      }
    }
    for (const auto& r : reps) {
      for (auto& km : match_all(builtin_kernels(), r)) {
        const double c = cost(*km.kernel, km.sub);
        raw.push_back({j, r, std::move(km), c, raw.size()});
      }
    }
  }
  std::stable_sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.assignment != b.assignment) return a.assignment < b.assignment;
    return a.m.sub.site < b.m.sub.site;
  });
  std::vector<Candidate> out;
  std::set<std::string> seen;
  for (const auto& r : raw) {
    if (out.size() >= opt_.successor_cap) break;
    auto c = apply_kernel(s, r.assignment, r.rep, r.m);
    if (!c || !seen.insert(c->next.key()).second) continue;
    c->category = pos_only ? 2 : 3;
    out.push_back(std::move(*c));
  }
  return out;
}

std::vector<Candidate> Search::cse_and_rules(const State& s) {
  std::vector<Candidate> out;
  for (std::size_t j = 0; j < s.assignments.size(); ++j) {
    if (s.done(j)) continue;
    const auto blk = blocked(s, j);
    const Expr& rhs = s.assignments[j].rhs;
    auto groups = common_subexpressions(rhs);
    if (groups.size() > 3) groups.resize(3);
    for (const auto& g : groups) {
      if (mentions(g.expr, blk)) continue;
      std::vector<Operand> ops;
      for_each_operand(g.expr, [&](const Operand& o) { ops.push_back(o); });
      if (only_factors(ops)) continue;
      try {
        Candidate c;
        const Operand t = construct(g.expr, c.calls);
        c.next = s;
        c.next.assignments[j].rhs = replace_occurrences(rhs, g, t);
        settle(c.next);
        c.cost = total(c.calls);
        c.label = "cse";
        c.category = 4;
        out.push_back(std::move(c));
      } catch (const std::exception&) {
      }
    }
    if (mentions(rhs, blk)) continue;
    for (const auto& rw : special_rules(rhs)) {
      try {
        Candidate c;
        std::map<std::string, Expr> with;
        for (const auto& a : rw.assignments) {
          with.emplace(a.lhs.name(), Expr::operand(construct(normalize(a.rhs), c.calls)));
        }
        c.next = s;
        c.next.assignments[j].rhs = normalize(substitute(rw.after, with));
        settle(c.next);
        c.cost = total(c.calls);
        c.label = "rule";
        c.category = 4;
        out.push_back(std::move(c));
      } catch (const std::exception&) {
      }
    }
  }
  return out;
}

std::vector<Candidate> Search::factorizations(const State& s) {
  std::vector<Operand> targets;
  for (std::size_t j = 0; j < s.assignments.size(); ++j) {
    if (s.done(j)) continue;
    const auto blk = blocked(s, j);
    const Expr& rhs = s.assignments[j].rhs;
    for_each_operand(rhs, [&](const Operand& o) {
      if (o.is_factor() || o.is_scalar() || blk.count(o.name())) return;
      if (o.has(Property::identity) || o.has(Property::zero)) return;
      if (!occurs_inside_inverse(rhs, o.name())) return;
      if (std::none_of(targets.begin(), targets.end(),
                       [&](const Operand& x) { return x == o; })) {
        targets.push_back(o);
      }
    });
  }
  std::vector<Candidate> out;
  for (const auto& target : targets) {
    for (const auto* f : factorizations_for(target)) {
      const auto ops = g_.table.factors_for(*f, target);
      const Expr product = f->product(ops);
      Candidate c;
      c.next = s;
      for (std::size_t i = 0; i < s.assignments.size(); ++i) {
        auto& rhs = c.next.assignments[i].rhs;
        if (s.done(i) || !contains_operand(rhs, target.name())) continue;
        rhs = normalize(substitute(rhs, {{target.name(), product}}));
      }
      settle(c.next);
      KernelCall call;
      call.factorization = f;
      call.target = target;
      call.results = ops;
      call.value = product;
      call.flops = cost(*f, f->dims(target));
      c.cost = call.flops;
      c.calls = {std::move(call)};
      c.label = f->name;
      c.category = 5;
      out.push_back(std::move(c));
    }
  }
  return out;
}

void Search::extend(int v) {
  const State s = g_.nodes[static_cast<std::size_t>(v)].state;
  const std::string self = g_.nodes[static_cast<std::size_t>(v)].key;
  auto& p = pending_[v];
  std::set<std::string> seen{self};
  for (const auto& c : p.items) seen.insert(c.next.key());
  auto add = [&](Candidate& c) {
    if (p.items.size() >= opt_.successor_cap) return;
    if (!seen.insert(c.next.key()).second) return;
    p.items.push_back(std::move(c));
  };
  if (p.stage == 0) {
    p.stage = 1;
    for (auto& c : constructive(s)) add(c);
    return;
  }
  p.stage = 2;
  std::vector<Candidate> b = matches(s, true, false);
  for (auto& c : matches(s, false, true)) b.push_back(std::move(c));
  auto cs = cse_and_rules(s);
  auto fs = factorizations(s);
  std::vector<Candidate> c;
  for (std::size_t i = 0; i < std::max(cs.size(), fs.size()); ++i) {
    if (i < cs.size()) c.push_back(std::move(cs[i]));
    if (i < fs.size()) c.push_back(std::move(fs[i]));
  }
  constexpr std::size_t kLead = 4;
  std::size_t bi = 0;
  for (; bi < std::min(kLead, b.size()); ++bi) add(b[bi]);
  for (std::size_t ci = 0; ci < c.size() || bi < b.size();) {
    if (ci < c.size()) add(c[ci++]);
    if (bi < b.size()) add(b[bi++]);
  }
}

// ---------------------------------------------------------------------------
// output

std::string DerivationGraph::dot() const {
  std::ostringstream os;
  os << "digraph derivation {\n";
  os << "  node [shape=box];\n";
  for (const auto& n : nodes) {
    os << "  n" << n.id << " [label=\"" << fmt(n.cost) << "\"";
    if (n.terminal) os << ", peripheries=2";
    os << "];\n";
  }
  for (const auto& e : edges) {
    std::string ks;
    for (const auto& c : e.calls) {
      if (!ks.empty()) ks += ", ";
      ks += c.name();
    }
    os << "  n" << e.from << " -> n" << e.to << " [label=\"" << ks << " " << fmt(e.cost)
       << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

DerivationGraph generate(const ProblemSpec& problem, const SearchOptions& options) {
  Search s(problem, options);
  s.run();
  return std::move(s.graph());
}

std::vector<Path> k_best_paths(const DerivationGraph& g, std::size_t k) {
  // Weights are (cost, kernel calls), compared lexicographically.
  using W = std::pair<double, std::size_t>;
  const std::size_t n = g.nodes.size();
  const W none{kInf, 0};
  std::vector<W> h(n, none);
  auto plus = [](const W& a, const Edge& e) { return W{a.first + e.cost, a.second + e.calls.size()}; };
  using QE = std::pair<W, int>;
  std::priority_queue<QE, std::vector<QE>, std::greater<>> pq;
  for (int t : g.terminals) {
    h[static_cast<std::size_t>(t)] = {0, 0};
    pq.push({{0, 0}, t});
  }
  while (!pq.empty()) {
    auto [d, x] = pq.top();
    pq.pop();
    if (d > h[static_cast<std::size_t>(x)]) continue;
    for (int eid : g.nodes[static_cast<std::size_t>(x)].in) {
      const Edge& e = g.edges[static_cast<std::size_t>(eid)];
      const W nd = plus(d, e);
      if (nd < h[static_cast<std::size_t>(e.from)]) {
        h[static_cast<std::size_t>(e.from)] = nd;
        pq.push({nd, e.from});
      }
    }
  }

  struct Partial {
    W f;
    W g;
    std::vector<int> edges;
    int node;
  };
  auto worse = [](const Partial& a, const Partial& b) {
    if (a.f != b.f) return a.f > b.f;
    return a.edges > b.edges;
  };
  std::priority_queue<Partial, std::vector<Partial>, decltype(worse)> open(worse);
  std::vector<Path> out;
  if (n == 0 || h[0].first == kInf || k == 0) return out;
  open.push({h[0], {0, 0}, {}, 0});
  std::size_t pops = 0;
  while (!open.empty() && out.size() < k && pops < 1000000) {
    Partial p = open.top();
    open.pop();
    ++pops;
    const Node& node = g.nodes[static_cast<std::size_t>(p.node)];
    if (node.terminal) {
      out.push_back(Path{p.edges, p.g.first});
      continue;
    }
    for (int eid : node.out) {
      const Edge& e = g.edges[static_cast<std::size_t>(eid)];
      const W& he = h[static_cast<std::size_t>(e.to)];
      if (he.first == kInf) continue;
      bool cycle = e.to == 0;
      for (int pe : p.edges) cycle = cycle || g.edges[static_cast<std::size_t>(pe)].to == e.to;
      if (cycle) continue;
      const W ng = plus(p.g, e);
      Partial q{{ng.first + he.first, ng.second + he.second}, ng, p.edges, e.to};
      q.edges.push_back(eid);
      open.push(std::move(q));
    }
  }
  return out;
}

Program program_for(const DerivationGraph& g, const Path& p) {
  Program prog;
  int last = 0;
  std::set<std::string> produced;
  double cost = p.cost;
  for (int eid : p.edges) {
    const Edge& e = g.edges[static_cast<std::size_t>(eid)];
    for (const auto& c : e.calls) {
      // a later assignment may recompute an intermediate an earlier edge made
      bool again = true;
      for (const auto& r : c.results) again = again && produced.count(r.name());
      if (again) {
        cost -= c.flops;
        continue;
      }
      for (const auto& r : c.results) produced.insert(r.name());
      prog.calls.push_back(c);
    }
    last = e.to;
  }
  for (const auto& a : g.nodes[static_cast<std::size_t>(last)].state.assignments) {
    prog.outputs.emplace_back(a.lhs, a.rhs.op());
  }
  prog.total_cost = cost;
  collect_inputs(prog);
  return prog;
}

std::vector<Program> k_best(const DerivationGraph& g, std::size_t k) {
  std::vector<Program> out;
  for (const auto& p : k_best_paths(g, k)) out.push_back(program_for(g, p));
  return out;
}

}  // namespace lagen
