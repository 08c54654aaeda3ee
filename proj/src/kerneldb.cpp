#include "lagen/kerneldb.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lagen {

std::string_view to_string(StorageFormat f) {
  switch (f) {
    case StorageFormat::full:
      return "full";
    case StorageFormat::lower_triangular_half:
      return "lower_half";
    case StorageFormat::upper_triangular_half:
      return "upper_half";
    case StorageFormat::diagonal_vector:
      return "diag_vector";
  }
  return "?";
}

std::optional<StorageFormat> storage_format_from_string(std::string_view s) {
  for (auto f : {StorageFormat::full, StorageFormat::lower_triangular_half,
                 StorageFormat::upper_triangular_half, StorageFormat::diagonal_vector}) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

bool satisfies(StorageFormat have, StorageFormat need) {
  return have == need || (have == StorageFormat::full &&
                          (need == StorageFormat::lower_triangular_half ||
                           need == StorageFormat::upper_triangular_half));
}

std::string_view to_string(CountMode m) {
  switch (m) {
    case CountMode::exact:
      return "exact";
    case CountMode::leading_order:
      return "leading_order";
    case CountMode::uncounted:
      return "uncounted";
  }
  return "?";
}

std::string_view to_string(FactorizationKind k) {
  switch (k) {
    case FactorizationKind::cholesky:
      return "cholesky";
    case FactorizationKind::lu:
      return "lu";
    case FactorizationKind::qr:
      return "qr";
    case FactorizationKind::eigendecomposition:
      return "eigendecomposition";
    case FactorizationKind::svd:
      return "svd";
  }
  return "?";
}

Structure structure_of(const Operand& op, Modifier m) {
  if (op.is_scalar() || !op.is_square()) return Structure::full;
  if (op.has(Property::diagonal)) return Structure::diagonal;
  const bool t = is_transposed(m);
  if (op.has(Property::lower_triangular)) return t ? Structure::upper : Structure::lower;
  if (op.has(Property::upper_triangular)) return t ? Structure::lower : Structure::upper;
  return Structure::full;
}

double nonzeros(Structure s, long rows, long cols) {
  const double r = static_cast<double>(rows), c = static_cast<double>(cols);
  switch (s) {
    case Structure::diagonal:
      return r;
    case Structure::lower:
    case Structure::upper:
      return r * (r + 1) / 2;
    case Structure::full:
      return r * c;
  }
  return r * c;
}

StorageFormat natural_format(const Operand& op) {
  if (!op.is_scalar() && op.is_square() && op.has(Property::diagonal)) {
    return StorageFormat::diagonal_vector;
  }
  return StorageFormat::full;
}

bool nontrivial_coefficient(const Expr& c) {
  return !(c.is(ExprKind::literal) && c.value() == 1.0);
}

double cost(const Kernel& k, const Dims& dims) {
  for (const auto& d : k.cost.dims) {
    if (!dims.count(d)) {
      throw BindingError("kernel " + k.name + ": missing dimension '" + d + "'");
    }
  }
  return k.cost.eval(dims);
}

double cost(const Kernel& k, const Substitution& s) { return cost(k, k.dims(s)); }

double cost(const Factorization& f, const Dims& dims) {
  for (const auto& d : f.cost.dims) {
    if (!dims.count(d)) {
      throw BindingError("factorization " + f.name + ": missing dimension '" + d + "'");
    }
  }
  return f.cost.eval(dims);
}

namespace {

using P = Property;
using SF = StorageFormat;

// --- shape helpers ----------------------------------------------------------

const Operand& op(const Substitution& s, int var) {
  return s.bindings[static_cast<std::size_t>(var)];
}
Modifier mod(const Substitution& s, int leaf) {
  return s.modifiers[static_cast<std::size_t>(leaf)];
}
long rows(const Substitution& s, int var, int leaf) {
  const auto& o = op(s, var);
  return is_transposed(mod(s, leaf)) ? o.cols() : o.rows();
}
long cols(const Substitution& s, int var, int leaf) {
  const auto& o = op(s, var);
  return is_transposed(mod(s, leaf)) ? o.rows() : o.cols();
}
// Leaf i binds variable i in every kernel except syrk.
long r(const Substitution& s, int i) { return rows(s, i, i); }
long c(const Substitution& s, int i) { return cols(s, i, i); }

bool is_mat(long rr, long cc) { return rr > 1 && cc > 1; }
bool is_col(long rr, long cc) { return cc == 1 && rr > 1; }
bool is_row(long rr, long cc) { return rr == 1 && cc > 1; }
bool mat(const Substitution& s, int i) { return is_mat(r(s, i), c(s, i)); }
bool col(const Substitution& s, int i) { return is_col(r(s, i), c(s, i)); }
bool row(const Substitution& s, int i) { return is_row(r(s, i), c(s, i)); }
bool scalar(const Substitution& s, int i) { return op(s, i).is_scalar(); }

bool square_tri(const Operand& o) {
  return !o.is_scalar() && o.is_square() && o.properties().is_triangular();
}
bool square_diag(const Operand& o) {
  return !o.is_scalar() && o.is_square() && o.has(P::diagonal);
}

double flag(const Substitution& s, std::size_t term) {
  return term < s.coefficients.size() && nontrivial_coefficient(s.coefficients[term]) ? 1.0
                                                                                      : 0.0;
}

SF half_of(const Operand& o) {
  if (o.has(P::diagonal)) return SF::diagonal_vector;
  return o.has(P::lower_triangular) ? SF::lower_triangular_half : SF::upper_triangular_half;
}

double D(long v) { return static_cast<double>(v); }

// --- pattern builders ---------------------------------------------------------

PatternLeaf leaf(int var, ModifierMask m) { return PatternLeaf{var, m}; }

Pattern product(bool coefficient, std::vector<PatternLeaf> leaves,
                std::vector<std::string> vars) {
  Pattern p;
  p.shape = Pattern::Shape::product;
  p.terms.push_back(ProductPattern{coefficient, std::move(leaves)});
  p.variables = std::move(vars);
  return p;
}

Pattern sum(std::vector<ProductPattern> terms, std::vector<std::string> vars) {
  Pattern p;
  p.shape = Pattern::Shape::sum;
  p.terms = std::move(terms);
  p.variables = std::move(vars);
  return p;
}

CostFormula formula(std::string text, std::vector<std::string> dims,
                    std::function<double(const Dims&)> eval) {
  return CostFormula{std::move(text), std::move(dims), std::move(eval)};
}

auto all_full(std::size_t n) {
  return [n](const Substitution&) { return std::vector<SF>(n, SF::full); };
}
auto result_full() {
  return [](const Substitution&) { return SF::full; };
}
auto no_overwrite() {
  return [](const Substitution&) { return -1; };
}
auto overwrite(int v) {
  return [v](const Substitution&) { return v; };
}

// --- catalogue --------------------------------------------------------------------

void add_gemm(std::vector<Kernel>& ks) {
  {
    Kernel k;
    k.name = "gemm";
    k.family = "gemm";
    k.pattern = sum({ProductPattern{true, {leaf(0, kPlainOrT), leaf(1, kPlainOrT)}},
                     ProductPattern{true, {leaf(2, kPlain)}}},
                    {"X", "Y", "Z"});
    k.constraint_text = "op(X), op(Y), Z matrices";
    k.constraint = [](const Substitution& s) { return mat(s, 0) && mat(s, 1) && mat(s, 2); };
    k.dims = [](const Substitution& s) {
      return Dims{{"m", D(r(s, 0))}, {"k", D(c(s, 0))},  {"n", D(c(s, 1))},
                  {"alpha", flag(s, 0)}, {"beta", flag(s, 1)}};
    };
    k.cost = formula("2mnk + 2mn[alpha] + mn[beta]", {"m", "n", "k", "alpha", "beta"},
                     [](const Dims& d) {
                       const double m = d.at("m"), n = d.at("n"), kk = d.at("k");
                       return 2 * m * n * kk + 2 * m * n * d.at("alpha") + m * n * d.at("beta");
                     });
    k.overwrites = overwrite(2);
    k.formats = all_full(3);
    k.result_format = result_full();
    ks.push_back(std::move(k));
  }
  {
    Kernel k;
    k.name = "gemm_nz";
    k.family = "gemm";
    k.pattern = product(true, {leaf(0, kPlainOrT), leaf(1, kPlainOrT)}, {"X", "Y"});
    k.constraint_text = "op(X), op(Y) matrices";
    k.constraint = [](const Substitution& s) { return mat(s, 0) && mat(s, 1); };
    k.dims = [](const Substitution& s) {
      return Dims{{"m", D(r(s, 0))}, {"k", D(c(s, 0))}, {"n", D(c(s, 1))},
                  {"alpha", flag(s, 0)}};
    };
    k.cost = formula("2mnk + mn[alpha]", {"m", "n", "k", "alpha"}, [](const Dims& d) {
      const double m = d.at("m"), n = d.at("n");
      return 2 * m * n * d.at("k") + m * n * d.at("alpha");
    });
    k.overwrites = no_overwrite();
    k.formats = all_full(2);
    k.result_format = result_full();
    ks.push_back(std::move(k));
  }
}

void add_gemv(std::vector<Kernel>& ks) {
  // Matrix times column vector, and row vector times matrix.
  for (bool left : {false, true}) {
    const std::string base = left ? "gevm" : "gemv";
    auto ok = [left](const Substitution& s) {
      return left ? row(s, 0) && mat(s, 1) : mat(s, 0) && col(s, 1);
    };
    // m x n is the matrix operand.
    auto mdims = [left](const Substitution& s, Dims d) {
      const int mi = left ? 1 : 0;
      d["m"] = D(r(s, mi));
      d["n"] = D(c(s, mi));
      return d;
    };
    const std::string out = left ? "n" : "m";
    {
      Kernel k;
      k.name = base;
      k.family = "gemv";
      k.pattern = sum({ProductPattern{true, {leaf(0, kPlainOrT), leaf(1, kPlainOrT)}},
                       ProductPattern{true, {leaf(2, kPlainOrT)}}},
                      {"X", "Y", "Z"});
      k.constraint_text = left ? "op(X) row vector, op(Y) matrix, op(Z) row vector"
                               : "op(X) matrix, op(Y) column vector, op(Z) column vector";
      k.constraint = [ok, left](const Substitution& s) {
        if (!ok(s)) return false;
        return left ? row(s, 2) : col(s, 2);
      };
      k.dims = [mdims](const Substitution& s) {
        return mdims(s, Dims{{"alpha", flag(s, 0)}, {"beta", flag(s, 1)}});
      };
      k.cost = formula("2mn + 2" + out + "[alpha] + " + out + "[beta]",
                       {"m", "n", "alpha", "beta"}, [left](const Dims& d) {
                         const double m = d.at("m"), n = d.at("n");
                         const double o = left ? n : m;
                         return 2 * m * n + 2 * o * d.at("alpha") + o * d.at("beta");
                       });
      k.overwrites = [](const Substitution& s) {
        return mod(s, 2) == Modifier::none ? 2 : -1;
      };
      k.formats = all_full(3);
      k.result_format = result_full();
      ks.push_back(std::move(k));
    }
    {
      Kernel k;
      k.name = base + "_nz";
      k.family = "gemv";
      k.pattern = product(true, {leaf(0, kPlainOrT), leaf(1, kPlainOrT)}, {"X", "Y"});
      k.constraint_text = left ? "op(X) row vector, op(Y) matrix"
                               : "op(X) matrix, op(Y) column vector";
      k.constraint = ok;
      k.dims = [mdims](const Substitution& s) { return mdims(s, Dims{{"alpha", flag(s, 0)}}); };
      k.cost = formula("2mn + " + out + "[alpha]", {"m", "n", "alpha"}, [left](const Dims& d) {
        const double m = d.at("m"), n = d.at("n");
        return 2 * m * n + (left ? n : m) * d.at("alpha");
      });
      k.overwrites = no_overwrite();
      k.formats = all_full(2);
      k.result_format = result_full();
      ks.push_back(std::move(k));
    }
  }
}

void add_vector_products(std::vector<Kernel>& ks) {
  {
    Kernel k;
    k.name = "ger";
    k.family = "ger";
    k.pattern = sum({ProductPattern{true, {leaf(0, kPlainOrT), leaf(1, kPlainOrT)}},
                     ProductPattern{true, {leaf(2, kPlain)}}},
                    {"X", "Y", "Z"});
    k.constraint_text = "op(X) column vector, op(Y) row vector, Z matrix";
    k.constraint = [](const Substitution& s) { return col(s, 0) && row(s, 1) && mat(s, 2); };
    k.dims = [](const Substitution& s) {
      return Dims{{"m", D(r(s, 0))}, {"n", D(c(s, 1))}, {"alpha", flag(s, 0)},
                  {"beta", flag(s, 1)}};
    };
    k.cost = formula("2mn + mn[alpha] + mn[beta]", {"m", "n", "alpha", "beta"},
                     [](const Dims& d) {
                       const double mn = d.at("m") * d.at("n");
                       return 2 * mn + mn * d.at("alpha") + mn * d.at("beta");
                     });
    k.overwrites = overwrite(2);
    k.formats = all_full(3);
    k.result_format = result_full();
    ks.push_back(std::move(k));
  }
  {
    Kernel k;
    k.name = "outer";
    k.family = "ger";
    k.pattern = product(true, {leaf(0, kPlainOrT), leaf(1, kPlainOrT)}, {"X", "Y"});
    k.constraint_text = "op(X) column vector, op(Y) row vector";
    k.constraint = [](const Substitution& s) { return col(s, 0) && row(s, 1); };
    k.dims = [](const Substitution& s) {
      return Dims{{"m", D(r(s, 0))}, {"n", D(c(s, 1))}, {"alpha", flag(s, 0)}};
    };
    k.cost = formula("mn + mn[alpha]", {"m", "n", "alpha"}, [](const Dims& d) {
      const double mn = d.at("m") * d.at("n");
      return mn + mn * d.at("alpha");
    });
    k.overwrites = no_overwrite();
    k.formats = all_full(2);
    k.result_format = result_full();
    ks.push_back(std::move(k));
  }
  {
    Kernel k;
    k.name = "dot";
    k.family = "dot";
    k.pattern = product(true, {leaf(0, kPlainOrT), leaf(1, kPlainOrT)}, {"X", "Y"});
    k.constraint_text = "op(X) row vector, op(Y) column vector";
    k.constraint = [](const Substitution& s) { return row(s, 0) && col(s, 1); };
    k.dims = [](const Substitution& s) {
      return Dims{{"n", D(c(s, 0))}, {"alpha", flag(s, 0)}};
    };
    k.cost = formula("2n + [alpha]", {"n", "alpha"},
                     [](const Dims& d) { return 2 * d.at("n") + d.at("alpha"); });
    k.overwrites = no_overwrite();
    k.formats = all_full(2);
    k.result_format = result_full();
    ks.push_back(std::move(k));
  }
  {
    Kernel k;
    k.name = "scalar_product";
    k.family = "mul";
    k.pattern = product(true, {leaf(0, kPlain | kInverted), leaf(1, kPlain)}, {"X", "Y"});
    k.constraint_text = "X, Y scalars";
    k.constraint = [](const Substitution& s) { return scalar(s, 0) && scalar(s, 1); };
    k.dims = [](const Substitution& s) { return Dims{{"alpha", flag(s, 0)}}; };
    k.cost = formula("1 + [alpha]", {"alpha"}, [](const Dims& d) { return 1 + d.at("alpha"); });
    k.overwrites = no_overwrite();
    k.formats = all_full(2);
    k.result_format = result_full();
    ks.push_back(std::move(k));
  }
}

void add_syrk(std::vector<Kernel>& ks) {
  // X^T X (first) and X X^T.
  for (bool gram : {true, false}) {
    const ModifierMask first = gram ? kTransposed : kPlain;
    const ModifierMask second = gram ? kPlain : kTransposed;
    auto dims_of = [gram](const Substitution& s, Dims d) {
      const auto& x = op(s, 0);
      d["n"] = D(gram ? x.cols() : x.rows());
      d["k"] = D(gram ? x.rows() : x.cols());
      return d;
    };
    const std::string suffix = gram ? "_t" : "_n";
    {
      Kernel k;
      k.name = "syrk" + suffix;
      k.family = "syrk";
      k.pattern = sum({ProductPattern{true, {leaf(0, first), leaf(0, second)}},
                       ProductPattern{true, {leaf(1, kPlain)}}},
                      {"X", "Z"});
      k.constraint_text = "X matrix, Z symmetric";
      k.constraint = [](const Substitution& s) {
        const auto& x = op(s, 0);
        const auto& z = op(s, 1);
        return is_mat(x.rows(), x.cols()) && !z.is_scalar() && z.has(P::symmetric) &&
               !z.has(P::diagonal);
      };
      k.dims = [dims_of](const Substitution& s) {
        return dims_of(s, Dims{{"alpha", flag(s, 0)}, {"beta", flag(s, 1)}});
      };
      k.cost = formula("n(n+1)k + n(n+1)[alpha] + n(n+1)/2[beta]",
                       {"n", "k", "alpha", "beta"}, [](const Dims& d) {
                         const double n = d.at("n"), h = n * (n + 1);
                         return h * d.at("k") + h * d.at("alpha") + h / 2 * d.at("beta");
                       });
      k.overwrites = overwrite(1);
      k.formats = [](const Substitution&) {
        return std::vector<SF>{SF::full, SF::lower_triangular_half};
      };
      k.result_format = [](const Substitution&) { return SF::lower_triangular_half; };
      ks.push_back(std::move(k));
    }
    {
      Kernel k;
      k.name = "syrk" + suffix + "_nz";
      k.family = "syrk";
      k.pattern = product(true, {leaf(0, first), leaf(0, second)}, {"X"});
      k.constraint_text = "X matrix";
      k.constraint = [](const Substitution& s) {
        const auto& x = op(s, 0);
        return is_mat(x.rows(), x.cols());
      };
      k.dims = [dims_of](const Substitution& s) {
        return dims_of(s, Dims{{"alpha", flag(s, 0)}});
      };
      k.cost = formula("n(n+1)k + n(n+1)/2[alpha]", {"n", "k", "alpha"}, [](const Dims& d) {
        const double n = d.at("n"), h = n * (n + 1);
        return h * d.at("k") + h / 2 * d.at("alpha");
      });
      k.overwrites = no_overwrite();
      k.formats = all_full(1);
      k.result_format = [](const Substitution&) { return SF::lower_triangular_half; };
      ks.push_back(std::move(k));
    }
  }
}

void add_triangular(std::vector<Kernel>& ks) {
  // trmm / trsm, left and right; trmv / trsv.
  for (bool solve : {false, true}) {
    const ModifierMask tm = solve ? kAnyInverse : kPlainOrT;
    const std::string fam = solve ? "trsm" : "trmm";
    for (bool left : {true, false}) {
      Kernel k;
      k.name = fam + (left ? "_left" : "_right");
      k.family = fam;
      const int t = left ? 0 : 1;  // position of the triangular operand
      const int b = 1 - t;
      std::vector<std::string> vars = left ? std::vector<std::string>{"L", "B"}
                                           : std::vector<std::string>{"B", "L"};
      k.pattern = product(true, {leaf(0, left ? tm : kPlain), leaf(1, left ? kPlain : tm)},
                          vars);
      k.constraint_text = left ? (solve ? "L triangular non-singular, B matrix"
                                        : "L triangular, B matrix")
                               : (solve ? "B matrix, L triangular non-singular"
                                        : "B matrix, L triangular");
      k.constraint = [t, b](const Substitution& s) {
        return square_tri(op(s, t)) && mat(s, b);
      };
      k.dims = [b](const Substitution& s) {
        return Dims{{"m", D(r(s, b))}, {"n", D(c(s, b))}, {"alpha", flag(s, 0)}};
      };
      if (solve) {
        k.cost = left ? formula("m^2 n + mn[alpha]", {"m", "n", "alpha"},
                                [](const Dims& d) {
                                  const double m = d.at("m"), n = d.at("n");
                                  return m * m * n + m * n * d.at("alpha");
                                })
                      : formula("m n^2 + mn[alpha]", {"m", "n", "alpha"}, [](const Dims& d) {
                          const double m = d.at("m"), n = d.at("n");
                          return m * n * n + m * n * d.at("alpha");
                        });
      } else {
        k.cost = left ? formula("m(m+1)n + mn[alpha]", {"m", "n", "alpha"},
                                [](const Dims& d) {
                                  const double m = d.at("m"), n = d.at("n");
                                  return m * (m + 1) * n + m * n * d.at("alpha");
                                })
                      : formula("mn(n+1) + mn[alpha]", {"m", "n", "alpha"}, [](const Dims& d) {
                          const double m = d.at("m"), n = d.at("n");
                          return m * n * (n + 1) + m * n * d.at("alpha");
                        });
      }
      k.overwrites = overwrite(b);
      k.formats = [t](const Substitution& s) {
        std::vector<SF> f(2, SF::full);
        f[static_cast<std::size_t>(t)] = half_of(op(s, t));
        return f;
      };
      k.result_format = result_full();
      ks.push_back(std::move(k));
    }
    Kernel k;
    k.name = solve ? "trsv" : "trmv";
    k.family = k.name;
    k.pattern = product(true, {leaf(0, tm), leaf(1, kPlain)}, {"L", "x"});
    k.constraint_text = solve ? "L triangular non-singular, x column vector"
                              : "L triangular, x column vector";
    k.constraint = [](const Substitution& s) { return square_tri(op(s, 0)) && col(s, 1); };
    k.dims = [](const Substitution& s) {
      return Dims{{"n", D(r(s, 1))}, {"alpha", flag(s, 0)}};
    };
    k.cost = solve ? formula("n^2 + n[alpha]", {"n", "alpha"},
                             [](const Dims& d) {
                               const double n = d.at("n");
                               return n * n + n * d.at("alpha");
                             })
                   : formula("n(n+1) + n[alpha]", {"n", "alpha"}, [](const Dims& d) {
                       const double n = d.at("n");
                       return n * (n + 1) + n * d.at("alpha");
                     });
    k.overwrites = overwrite(1);
    k.formats = [](const Substitution& s) {
      return std::vector<SF>{half_of(op(s, 0)), SF::full};
    };
    k.result_format = result_full();
    ks.push_back(std::move(k));
  }
}

void add_diagonal(std::vector<Kernel>& ks) {
  // diag(d) B, B diag(d), with d or its reciprocal.
  for (bool left : {true, false}) {
    Kernel k;
    k.name = left ? "diag_left" : "diag_right";
    k.family = "diagscale";
    const int d = left ? 0 : 1;
    const int b = 1 - d;
    std::vector<std::string> vars = left ? std::vector<std::string>{"D", "B"}
                                         : std::vector<std::string>{"B", "D"};
    const ModifierMask dm = kPlain | kInverted;
    k.pattern =
        product(true, {leaf(0, left ? dm : kPlain), leaf(1, left ? kPlain : dm)}, vars);
    k.constraint_text = left ? "D diagonal, B matrix or column vector"
                             : "B matrix or row vector, D diagonal";
    k.constraint = [d, b, left](const Substitution& s) {
      if (!square_diag(op(s, d))) return false;
      return mat(s, b) || (left ? col(s, b) : row(s, b));
    };
    k.dims = [b](const Substitution& s) {
      const auto& o = op(s, b);
      return Dims{{"nnz", nonzeros(structure_of(o), o.rows(), o.cols())},
                  {"alpha", flag(s, 0)}};
    };
    k.cost = formula("nnz(B) + nnz(B)[alpha]", {"nnz", "alpha"}, [](const Dims& dd) {
      return dd.at("nnz") * (1 + dd.at("alpha"));
    });
    k.overwrites = overwrite(b);
    k.formats = [d, b](const Substitution& s) {
      std::vector<SF> f(2);
      f[static_cast<std::size_t>(d)] = SF::diagonal_vector;
      f[static_cast<std::size_t>(b)] = natural_format(op(s, b));
      return f;
    };
    k.result_format = [b](const Substitution& s) { return natural_format(op(s, b)); };
    ks.push_back(std::move(k));
  }
}

Structure join(Structure a, Structure b) {
  if (a == b) return a;
  if (a == Structure::diagonal) return b;
  if (b == Structure::diagonal) return a;
  return Structure::full;
}

Structure meet(Structure a, Structure b) {
  if (a == b) return a;
  if (a == Structure::full) return b;
  if (b == Structure::full) return a;
  return Structure::diagonal;
}

void add_elementwise(std::vector<Kernel>& ks) {
  {
    Kernel k;
    k.name = "add";
    k.family = "axpy";
    k.pattern = sum({ProductPattern{true, {leaf(0, kPlainOrT)}},
                     ProductPattern{true, {leaf(1, kPlainOrT)}}},
                    {"X", "Y"});
    k.constraint_text = "op(X), op(Y) same shape";
    k.constraint = [](const Substitution& s) {
      return r(s, 0) == r(s, 1) && c(s, 0) == c(s, 1);
    };
    k.dims = [](const Substitution& s) {
      const auto sx = structure_of(op(s, 0), mod(s, 0));
      const auto sy = structure_of(op(s, 1), mod(s, 1));
      const long rr = r(s, 0), cc = c(s, 0);
      return Dims{{"nnz_xy", nonzeros(meet(sx, sy), rr, cc)},
                  {"nnz_x", nonzeros(sx, rr, cc)},
                  {"nnz_y", nonzeros(sy, rr, cc)},
                  {"alpha", flag(s, 0)},
                  {"beta", flag(s, 1)}};
    };
    k.cost = formula("nnz(X&Y) + nnz(X)[alpha] + nnz(Y)[beta]",
                     {"nnz_xy", "nnz_x", "nnz_y", "alpha", "beta"}, [](const Dims& d) {
                       return d.at("nnz_xy") + d.at("nnz_x") * d.at("alpha") +
                              d.at("nnz_y") * d.at("beta");
                     });
    k.overwrites = [](const Substitution& s) {
      const auto sx = structure_of(op(s, 0), mod(s, 0));
      const auto sy = structure_of(op(s, 1), mod(s, 1));
      const auto u = join(sx, sy);
      if (mod(s, 1) == Modifier::none && sy == u) return 1;
      if (mod(s, 0) == Modifier::none && sx == u) return 0;
      return -1;
    };
    k.formats = [](const Substitution& s) {
      std::vector<SF> f(2, SF::full);
      if (square_diag(op(s, 0)) && square_diag(op(s, 1))) f.assign(2, SF::diagonal_vector);
      return f;
    };
    k.result_format = [](const Substitution& s) {
      return square_diag(op(s, 0)) && square_diag(op(s, 1)) ? SF::diagonal_vector : SF::full;
    };
    ks.push_back(std::move(k));
  }
  {
    Kernel k;
    k.name = "scal";
    k.family = "scal";
    k.pattern = product(true, {leaf(0, kPlain)}, {"X"});
    k.constraint_text = "coefficient not 1";
    k.constraint = [](const Substitution& s) { return flag(s, 0) > 0; };
    k.dims = [](const Substitution& s) {
      const auto& o = op(s, 0);
      return Dims{{"nnz", nonzeros(structure_of(o), o.rows(), o.cols())}};
    };
    k.cost = formula("nnz(X)", {"nnz"}, [](const Dims& d) { return d.at("nnz"); });
    k.overwrites = overwrite(0);
    k.formats = [](const Substitution& s) {
      return std::vector<SF>{natural_format(op(s, 0))};
    };
    k.result_format = [](const Substitution& s) { return natural_format(op(s, 0)); };
    ks.push_back(std::move(k));
  }
}

void add_unary(std::vector<Kernel>& ks) {
  {
    Kernel k;
    k.name = "transpose";
    k.family = "transpose";
    k.pattern = product(false, {leaf(0, kTransposed)}, {"X"});
    k.constraint_text = "-";
    k.constraint = [](const Substitution&) { return true; };
    k.dims = [](const Substitution& s) {
      return Dims{{"m", D(op(s, 0).rows())}, {"n", D(op(s, 0).cols())}};
    };
    k.cost = formula("mn", {"m", "n"}, [](const Dims& d) { return d.at("m") * d.at("n"); });
    k.overwrites = no_overwrite();
    k.formats = all_full(1);
    k.result_format = result_full();
    k.count_mode = CountMode::uncounted;
    ks.push_back(std::move(k));
  }
  {
    Kernel k;
    k.name = "inv_diag";
    k.family = "invdiag";
    k.pattern = product(false, {leaf(0, kAnyInverse)}, {"X"});
    k.constraint_text = "X diagonal or scalar";
    k.constraint = [](const Substitution& s) {
      return square_diag(op(s, 0)) || scalar(s, 0);
    };
    k.dims = [](const Substitution& s) { return Dims{{"n", D(op(s, 0).rows())}}; };
    k.cost = formula("n", {"n"}, [](const Dims& d) { return d.at("n"); });
    k.overwrites = no_overwrite();
    k.formats = [](const Substitution& s) {
      return std::vector<SF>{natural_format(op(s, 0))};
    };
    k.result_format = [](const Substitution& s) { return natural_format(op(s, 0)); };
    ks.push_back(std::move(k));
  }
  {
    Kernel k;
    k.name = "inv_tri";
    k.family = "trtri";
    k.pattern = product(false, {leaf(0, kAnyInverse)}, {"X"});
    k.constraint_text = "X triangular, not diagonal";
    k.constraint = [](const Substitution& s) {
      return square_tri(op(s, 0)) && !op(s, 0).has(P::diagonal);
    };
    k.dims = [](const Substitution& s) { return Dims{{"n", D(op(s, 0).rows())}}; };
    k.cost = formula("n^3/3", {"n"}, [](const Dims& d) {
      const double n = d.at("n");
      return n * n * n / 3;
    });
    k.overwrites = no_overwrite();
    k.formats = [](const Substitution& s) { return std::vector<SF>{half_of(op(s, 0))}; };
    k.result_format = [](const Substitution& s) {
      const auto st = structure_of(op(s, 0), mod(s, 0));
      return st == Structure::lower ? SF::lower_triangular_half : SF::upper_triangular_half;
    };
    k.count_mode = CountMode::leading_order;
    ks.push_back(std::move(k));
  }
  {
    Kernel k;
    k.name = "inv";
    k.family = "getri";
    k.pattern = product(false, {leaf(0, kAnyInverse)}, {"X"});
    k.constraint_text = "X not triangular, not diagonal";
    k.constraint = [](const Substitution& s) {
      const auto& o = op(s, 0);
      return !o.is_scalar() && !o.properties().is_triangular();
    };
    k.dims = [](const Substitution& s) { return Dims{{"n", D(op(s, 0).rows())}}; };
    k.cost = formula("2n^3", {"n"}, [](const Dims& d) {
      const double n = d.at("n");
      return 2 * n * n * n;
    });
    k.overwrites = no_overwrite();
    k.formats = all_full(1);
    k.result_format = result_full();
    k.count_mode = CountMode::leading_order;
    ks.push_back(std::move(k));
  }
  for (bool left : {true, false}) {
    Kernel k;
    k.name = left ? "permute_left" : "permute_right";
    k.family = "lapmt";
    const int p = left ? 0 : 1;
    const int b = 1 - p;
    std::vector<std::string> vars = left ? std::vector<std::string>{"P", "B"}
                                         : std::vector<std::string>{"B", "P"};
    k.pattern = product(false, {leaf(0, left ? kPlainOrT : kPlain),
                                leaf(1, left ? kPlain : kPlainOrT)},
                        vars);
    k.constraint_text = left ? "P permutation" : "P permutation";
    k.constraint = [p, b](const Substitution& s) {
      const auto& o = op(s, p);
      return !o.is_scalar() && o.has(P::permutation) && !o.has(P::identity) &&
             !scalar(s, b);
    };
    k.dims = [b](const Substitution& s) {
      return Dims{{"m", D(r(s, b))}, {"n", D(c(s, b))}};
    };
    k.cost = formula("mn", {"m", "n"}, [](const Dims& d) { return d.at("m") * d.at("n"); });
    k.overwrites = no_overwrite();
    k.formats = all_full(2);
    k.result_format = result_full();
    k.count_mode = CountMode::uncounted;
    ks.push_back(std::move(k));
  }
}

std::vector<Kernel> build_kernels() {
  std::vector<Kernel> ks;
  add_gemm(ks);
  add_gemv(ks);
  add_vector_products(ks);
  add_syrk(ks);
  add_triangular(ks);
  add_diagonal(ks);
  add_elementwise(ks);
  add_unary(ks);
  return ks;
}

// --- factorizations ----------------------------------------------------------------

bool structured(const Operand& a) {
  return a.properties().is_triangular() || a.has(P::diagonal) ||
         a.has(P::orthogonal) || a.has(P::orthogonal_rows) || a.has(P::orthogonal_columns);
}

std::vector<Factorization> build_factorizations() {
  std::vector<Factorization> fs;
  auto cubic = [](std::string text, double c) {
    return formula(std::move(text), {"n"}, [c](const Dims& d) {
      const double n = d.at("n");
      return c * n * n * n;
    });
  };
  fs.push_back(Factorization{FactorizationKind::cholesky, "cholesky", cubic("n^3/3", 1.0 / 3),
                             CountMode::leading_order, "L L^T"});
  fs.push_back(Factorization{FactorizationKind::lu, "lu", cubic("2n^3/3", 2.0 / 3),
                             CountMode::leading_order, "P^T L U"});
  fs.push_back(Factorization{FactorizationKind::qr, "qr",
                             formula("2mn^2 - 2n^3/3", {"m", "n"},
                                     [](const Dims& d) {
                                       const double m = d.at("m"), n = d.at("n");
                                       return 2 * m * n * n - 2 * n * n * n / 3;
                                     }),
                             CountMode::leading_order, "Q R"});
  fs.push_back(Factorization{FactorizationKind::eigendecomposition, "eigendecomposition",
                             cubic("9n^3", 9.0), CountMode::uncounted, "Z W Z^T"});
  fs.push_back(Factorization{FactorizationKind::svd, "svd",
                             formula("14mn^2", {"m", "n"},
                                     [](const Dims& d) {
                                       return 14 * d.at("m") * d.at("n") * d.at("n");
                                     }),
                             CountMode::uncounted, "U S V^T"});
  return fs;
}

}  // namespace

bool Factorization::applicable(const Operand& a) const {
  if (a.is_factor() || a.is_scalar() || a.is_vector() || structured(a)) return false;
  if (a.has(P::permutation) || a.has(P::zero) || a.has(P::identity)) return false;
  const bool square = a.is_square();
  switch (kind) {
    case FactorizationKind::cholesky:
      return a.has(P::spd);
    case FactorizationKind::lu:
      return square && a.has(P::non_singular) && !a.has(P::spd);
    case FactorizationKind::qr:
      return a.has(P::full_rank) && a.rows() >= a.cols() && !a.has(P::symmetric);
    case FactorizationKind::eigendecomposition:
      return a.has(P::symmetric) && a.has(P::non_singular);
    case FactorizationKind::svd:
      return a.has(P::full_rank) && a.rows() >= a.cols() && !a.has(P::symmetric);
  }
  return false;
}

std::vector<FactorOutput> Factorization::outputs(const Operand& a) const {
  const long m = a.rows(), n = a.cols();
  const bool square = m == n;
  switch (kind) {
    case FactorizationKind::cholesky:
      return {{"L", n, n, {P::lower_triangular, P::non_singular}, SF::lower_triangular_half}};
    case FactorizationKind::lu:
      return {{"P", n, n, {P::permutation}, SF::full},
              {"L", n, n, {P::lower_triangular, P::unit_diagonal, P::non_singular},
               SF::lower_triangular_half},
              {"U", n, n, {P::upper_triangular, P::non_singular}, SF::upper_triangular_half}};
    case FactorizationKind::qr:
      return {{"Q", m, n,
               square ? PropertySet{P::orthogonal} : PropertySet{P::orthogonal_columns},
               SF::full},
              {"R", n, n, {P::upper_triangular, P::non_singular}, SF::upper_triangular_half}};
    case FactorizationKind::eigendecomposition: {
      PropertySet w{P::diagonal, P::non_singular};
      if (a.has(P::spd)) w.insert(P::spd);
      return {{"Z", n, n, {P::orthogonal}, SF::full}, {"W", n, n, w, SF::diagonal_vector}};
    }
    case FactorizationKind::svd:
      return {{"U", m, n,
               square ? PropertySet{P::orthogonal} : PropertySet{P::orthogonal_columns},
               SF::full},
              {"S", n, n, {P::diagonal, P::spd}, SF::diagonal_vector},
              {"V", n, n, {P::orthogonal}, SF::full}};
  }
  return {};
}

Expr Factorization::product(const std::vector<Operand>& f) const {
  auto e = [&](std::size_t i) { return Expr::operand(f.at(i)); };
  auto t = [&](std::size_t i) { return Expr::transpose(e(i)); };
  switch (kind) {
    case FactorizationKind::cholesky:
      return Expr::times({e(0), t(0)});
    case FactorizationKind::lu:
      return Expr::times({t(0), e(1), e(2)});
    case FactorizationKind::qr:
      return Expr::times({e(0), e(1)});
    case FactorizationKind::eigendecomposition:
      return Expr::times({e(0), e(1), t(0)});
    case FactorizationKind::svd:
      return Expr::times({e(0), e(1), t(2)});
  }
  return {};
}

Dims Factorization::dims(const Operand& a) const {
  return Dims{{"m", D(a.rows())}, {"n", D(a.cols())}};
}

const std::vector<Kernel>& builtin_kernels() {
  static const std::vector<Kernel> ks = build_kernels();
  return ks;
}

const Kernel* find_kernel(std::string_view name) {
  for (const auto& k : builtin_kernels()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

const std::vector<Factorization>& builtin_factorizations() {
  static const std::vector<Factorization> fs = build_factorizations();
  return fs;
}

const Factorization* find_factorization(std::string_view name) {
  for (const auto& f : builtin_factorizations()) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::vector<const Factorization*> factorizations_for(const Operand& op) {
  std::vector<const Factorization*> out;
  for (const auto& f : builtin_factorizations()) {
    if (f.applicable(op)) out.push_back(&f);
  }
  return out;
}

std::string kernel_table() {
  std::ostringstream os;
  auto row = [&](const std::string& a, const std::string& b, const std::string& c,
                 const std::string& d) {
    os << a;
    os << std::string(a.size() < 16 ? 16 - a.size() : 1, ' ') << b;
    os << std::string(b.size() < 36 ? 36 - b.size() : 1, ' ') << c;
    os << std::string(c.size() < 56 ? 56 - c.size() : 1, ' ') << d << '\n';
  };
  row("name", "pattern", "constraints", "flops");
  for (const auto& k : builtin_kernels()) {
    row(k.name, k.pattern.str(), k.constraint_text, k.cost.text);
  }
  os << '\n';
  row("factorization", "result", "applies to", "flops");
  const char* applies[] = {"spd", "square non-singular, not spd",
                           "full rank, rows >= cols, not symmetric",
                           "symmetric non-singular", "full rank, rows >= cols, not symmetric"};
  for (const auto& f : builtin_factorizations()) {
    row(f.name, f.product_text, applies[static_cast<int>(f.kind)], f.cost.text);
  }
  return os.str();
}

}  // namespace lagen
