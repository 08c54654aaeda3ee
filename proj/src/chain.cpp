#include "lagen/chain.hpp"

#include <limits>
#include <unordered_map>

#include "lagen/infer.hpp"

namespace lagen {

ChainElement ChainElement::from(const Expr& leaf) {
  if (!leaf.is_leaf()) throw std::invalid_argument("chain element is not a leaf: " + leaf.str());
  ChainElement c;
  c.expr = leaf;
  c.transposed = leaf.leaf_transposed();
  c.inverted = leaf.leaf_inverted();
  c.properties = leaf.leaf_operand().properties();
  c.rows = leaf.rows();
  c.cols = leaf.cols();
  return c;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::vector<const Kernel*>& kernels_with_leaves(std::size_t n) {
  static const auto table = [] {
    std::vector<std::vector<const Kernel*>> t(3);
    for (const auto& k : builtin_kernels()) {
      if (k.pattern.shape != Pattern::Shape::product) continue;
      const auto l = k.pattern.leaf_count();
      if (l < t.size()) t[l].push_back(&k);
    }
    return t;
  }();
  return table[n];
}

struct Best {
  const Kernel* kernel = nullptr;
  Substitution sub;
  double cost = kInf;
};

// Cheapest kernel whose match covers all of `e`.
Best best_whole(const Expr& e, std::size_t leaves) {
  Best b;
  for (const auto* k : kernels_with_leaves(leaves)) {
    for (auto& s : match(*k, e)) {
      if (!s.site.path.empty() || !s.site.children.empty()) continue;
      const double c = cost(*k, s);
      if (c < b.cost) b = Best{k, std::move(s), c};
    }
  }
  return b;
}

Operand provisional(const Expr& value, const std::string& name) {
  return Operand(name, value.rows(), value.cols(), infer(value), Origin::intermediate);
}

struct Variant {
  Expr leaf;
  const Kernel* pre = nullptr;
  double cost = 0;
};

std::vector<Variant> variants(const Expr& leaf, const char* tag) {
  std::vector<Variant> v{{leaf, nullptr, 0}};
  if (modifier_of(leaf) == Modifier::none) return v;
  Best m = best_whole(leaf, 1);
  if (!m.kernel) return v;
  auto value = normalize(leaf);
  v.push_back({Expr::operand(provisional(value, tag + value.key())), m.kernel, m.cost});
  return v;
}

Namer default_namer() {
  auto counter = std::make_shared<int>(0);
  return [counter](const Expr& value) {
    return Operand("C" + std::to_string(++*counter), value.rows(), value.cols(), infer(value),
                   Origin::intermediate);
  };
}

}  // namespace

namespace {

bool is_scalar(const Expr& e) { return e.rows() == 1 && e.cols() == 1; }

// scalar times matrix is one coefficient-absorbing leaf
std::size_t product_leaves(const Expr& l, const Expr& r) {
  return is_scalar(l) != is_scalar(r) ? 1 : 2;
}

}  // namespace

MergePlan plan_merge(const Expr& left, const Expr& right) {
  thread_local std::unordered_map<std::string, MergePlan> cache;
  const std::string key = left.key() + "|" + std::to_string(infer(left).bits()) + "|" +
                          right.key() + "|" + std::to_string(infer(right).bits()) + "|" +
                          std::to_string(left.rows()) + "x" + std::to_string(left.cols()) +
                          "," + std::to_string(right.cols());
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  MergePlan best;
  best.cost = kInf;
  for (const auto& lv : variants(left, "~l")) {
    for (const auto& rv : variants(right, "~r")) {
      Best m = best_whole(Expr::times({lv.leaf, rv.leaf}), product_leaves(lv.leaf, rv.leaf));
      if (!m.kernel) continue;
      const double c = lv.cost + rv.cost + m.cost;
      if (c < best.cost) best = MergePlan{c, true, lv.pre, rv.pre, m.kernel};
    }
  }
  if (cache.size() > 100000) cache.clear();
  cache.emplace(key, best);
  return best;
}

namespace {

void check_chain(const std::vector<ChainElement>& elems) {
  const ChainElement* prev = nullptr;
  for (std::size_t i = 0; i < elems.size(); ++i) {
    if (elems[i].inverted && elems[i].rows != elems[i].cols) {
      throw std::invalid_argument("inverted chain element is not square: " +
                                  elems[i].expr.str());
    }
    if (elems[i].rows == 1 && elems[i].cols == 1) continue;  // scalars commute
    if (prev && prev->cols != elems[i].rows) {
      throw MalformedExpression("non-conformable chain at element " + std::to_string(i));
    }
    prev = &elems[i];
  }
}

struct Dp {
  const std::vector<ChainElement>& e;
  std::size_t n;
  std::vector<std::vector<double>> cost;
  std::vector<std::vector<std::size_t>> split;
  std::vector<std::vector<Expr>> leaf;  // provisional operand for interval

  explicit Dp(const std::vector<ChainElement>& elems)
      : e(elems), n(elems.size()), cost(n, std::vector<double>(n, kInf)),
        split(n, std::vector<std::size_t>(n, 0)), leaf(n, std::vector<Expr>(n)) {
    for (std::size_t i = 0; i < n; ++i) {
      cost[i][i] = 0;
      leaf[i][i] = e[i].expr;
    }
  }

  Expr value(std::size_t i, std::size_t j) const {
    std::vector<Expr> f;
    for (std::size_t k = i; k <= j; ++k) f.push_back(e[k].expr);
    return normalize(Expr::times(std::move(f)));
  }

  Expr interval_leaf(std::size_t i, std::size_t j) {
    if (!leaf[i][j].valid()) {
      leaf[i][j] = Expr::operand(
          provisional(value(i, j), "(" + std::to_string(i) + ".." + std::to_string(j) + ")"));
    }
    return leaf[i][j];
  }

  double merge(std::size_t i, std::size_t k, std::size_t j) {
    auto p = plan_merge(interval_leaf(i, k), interval_leaf(k + 1, j));
    return p.feasible ? p.cost : kInf;
  }

  void run() {
    for (std::size_t len = 2; len <= n; ++len) {
      for (std::size_t i = 0; i + len <= n; ++i) {
        const std::size_t j = i + len - 1;
        for (std::size_t k = i; k < j; ++k) {
          const double c = cost[i][k] + cost[k + 1][j] + merge(i, k, j);
          if (c < cost[i][j]) {
            cost[i][j] = c;
            split[i][j] = k;
          }
        }
      }
    }
  }
};

struct Realizer {
  const std::vector<ChainElement>& e;
  const Dp& dp;
  const Namer& namer;
  ChainResult out;

  // Applies the cheapest whole-site kernel to `site` and names the result.
  Expr apply(const Expr& site, std::size_t leaves, const Kernel* want, const Expr& value) {
    Best b;
    for (auto& s : match(*want, site)) {
      if (!s.site.path.empty() || !s.site.children.empty()) continue;
      const double c = cost(*want, s);
      if (c < b.cost) b = Best{want, std::move(s), c};
    }
    if (!b.kernel) b = best_whole(site, leaves);
    if (!b.kernel) throw std::logic_error("chain: no kernel for " + site.str());
    Operand r = namer(value);
    out.steps.push_back(ChainStep{b.kernel, b.sub, value, r, b.cost});
    out.cost += b.cost;
    return Expr::operand(r);
  }

  std::pair<Expr, std::string> go(std::size_t i, std::size_t j) {
    if (i == j) return {e[i].expr, e[i].expr.str()};
    const std::size_t k = dp.split[i][j];
    auto [l, ls] = go(i, k);
    auto [r, rs] = go(k + 1, j);
    auto plan = plan_merge(l, r);
    if (!plan.feasible) throw std::logic_error("chain: infeasible merge");
    if (plan.left_pre) l = apply(l, 1, plan.left_pre, normalize(l));
    if (plan.right_pre) r = apply(r, 1, plan.right_pre, normalize(r));
    auto v = dp.value(i, j);
    return {apply(Expr::times({l, r}), product_leaves(l, r), plan.product, v), "(" + ls + " " + rs + ")"};
  }
};

}  // namespace

ChainResult matrix_chain(const std::vector<ChainElement>& elems, const Namer& namer) {
  if (elems.empty()) throw std::invalid_argument("empty chain");
  check_chain(elems);
  ChainResult out;
  if (elems.size() == 1) {
    out.result = elems[0].expr;
    out.parenthesization = elems[0].expr.str();
    return out;
  }
  Dp dp(elems);
  dp.run();
  if (dp.cost[0][elems.size() - 1] == kInf) {
    throw std::logic_error("chain: no kernel sequence computes the product");
  }
  Namer fallback = namer ? Namer{} : default_namer();
  Realizer r{elems, dp, namer ? namer : fallback, {}};
  auto [res, paren] = r.go(0, elems.size() - 1);
  r.out.result = res;
  r.out.parenthesization = paren;
  return r.out;
}

double chain_cost_exhaustive(const std::vector<ChainElement>& elems) {
  check_chain(elems);
  Dp dp(elems);  // only for provisional interval operands and merge costs
  std::function<double(std::size_t, std::size_t)> best = [&](std::size_t i, std::size_t j) {
    if (i == j) return 0.0;
    double b = kInf;
    // every parenthesization: enumerate the top split, recurse without memo
    for (std::size_t k = i; k < j; ++k) {
      b = std::min(b, best(i, k) + best(k + 1, j) + dp.merge(i, k, j));
    }
    return b;
  };
  return best(0, elems.size() - 1);
}

ChainResult greedy_sum(const std::vector<Expr>& terms, const Namer& namer) {
  if (terms.empty()) throw std::invalid_argument("empty sum");
  for (const auto& t : terms) {
    if (t.rows() != terms[0].rows() || t.cols() != terms[0].cols()) {
      throw MalformedExpression("greedy_sum: terms of different shapes");
    }
  }
  ChainResult out;
  Namer fallback = namer ? Namer{} : default_namer();
  const Namer& name = namer ? namer : fallback;
  const Kernel* add = find_kernel("add");
  struct Item {
    Expr expr;
    Expr value;
  };
  std::vector<Item> items;
  for (const auto& t : terms) items.push_back({t, normalize(t)});
  std::string paren;
  while (items.size() > 1) {
    double bc = kInf;
    std::size_t ba = 0, bb = 0;
    Best bm;
    for (std::size_t a = 0; a < items.size(); ++a) {
      for (std::size_t b = a + 1; b < items.size(); ++b) {
        Best m;
        for (auto& s : match(*add, Expr::plus({items[a].expr, items[b].expr}))) {
          if (!s.site.path.empty() || !s.site.children.empty()) continue;
          const double c = cost(*add, s);
          if (c < m.cost) m = Best{add, std::move(s), c};
        }
        if (!m.kernel) continue;
        bool better = m.cost < bc;
        if (m.cost == bc) {
          auto ka = order_key(items[a].expr), kb = order_key(items[b].expr);
          auto oa = order_key(items[ba].expr), ob = order_key(items[bb].expr);
          better = ka < oa || (ka == oa && kb < ob);
        }
        if (better) {
          bc = m.cost;
          ba = a;
          bb = b;
          bm = std::move(m);
        }
      }
    }
    if (!bm.kernel) throw std::invalid_argument("greedy_sum: terms are not addable leaves");
    auto value = normalize(Expr::plus({items[ba].value, items[bb].value}));
    Operand r = name(value);
    out.steps.push_back(ChainStep{bm.kernel, bm.sub, value, r, bm.cost});
    out.cost += bm.cost;
    items.erase(items.begin() + static_cast<long>(bb));
    items[ba] = Item{Expr::operand(r), value};
  }
  out.result = items[0].expr;
  return out;
}

}  // namespace lagen
