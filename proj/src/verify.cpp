#include "lagen/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace lagen {

namespace {

using P = Property;

double uni(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

double away_from_zero(std::mt19937_64& rng) {
  const double s = uni(rng, 0, 1) < 0.5 ? -1.0 : 1.0;
  return s * uni(rng, 0.5, 1.5);
}

Matrix uniform(std::mt19937_64& rng, long r, long c) {
  Matrix m(r, c);
  for (long j = 0; j < c; ++j) {
    for (long i = 0; i < r; ++i) m(i, j) = uni(rng, -1, 1);
  }
  return m;
}

Matrix thin_q(std::mt19937_64& rng, long r, long c) {
  Eigen::HouseholderQR<Matrix> qr(uniform(rng, r, c));
  return qr.householderQ() * Matrix::Identity(r, c);
}

Matrix triangular(std::mt19937_64& rng, long r, long c, bool lower, bool unit, bool nonsingular) {
  Matrix m = Matrix::Zero(r, c);
  const double scale = 1.0 / static_cast<double>(std::max(r, c));
  for (long j = 0; j < c; ++j) {
    for (long i = 0; i < r; ++i) {
      if (i == j) {
        m(i, j) = unit ? 1.0 : (nonsingular ? away_from_zero(rng) + (m(i, j) < 0 ? -0.5 : 0.5)
                                            : uni(rng, -1, 1));
      } else if ((lower && i > j) || (!lower && i < j)) {
        m(i, j) = uni(rng, -1, 1) * (unit ? 0.5 * scale : scale);
      }
    }
  }
  return m;
}

Matrix construct(const Operand& op, std::mt19937_64& rng) {
  const long r = op.rows(), c = op.cols();
  const PropertySet& p = op.properties();
  const bool square = r == c;
  const bool nonsing = p.has(P::non_singular) || p.has(P::spd);
  if (p.has(P::zero)) return Matrix::Zero(r, c);
  if (p.has(P::identity)) return Matrix::Identity(r, c);
  if (r == 1 && c == 1) {
    Matrix m(1, 1);
    m(0, 0) = p.has(P::positive) || p.has(P::spd) ? uni(rng, 0.5, 1.5) : away_from_zero(rng);
    return m;
  }
  if (p.has(P::permutation)) {
    std::vector<long> perm(static_cast<std::size_t>(r));
    std::iota(perm.begin(), perm.end(), 0L);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix m = Matrix::Zero(r, c);
    for (long i = 0; i < r; ++i) m(i, perm[static_cast<std::size_t>(i)]) = 1;
    return m;
  }
  if (p.has(P::orthogonal) || p.has(P::orthogonal_columns) || p.has(P::orthogonal_rows)) {
    if (p.has(P::orthogonal_rows) && r < c) return thin_q(rng, c, r).transpose();
    return thin_q(rng, r, c);
  }
  const bool lower = p.has(P::lower_triangular), upper = p.has(P::upper_triangular);
  if (square && (p.has(P::diagonal) || ((lower || upper) && p.has(P::symmetric)))) {
    Matrix m = Matrix::Zero(r, c);
    for (long i = 0; i < r; ++i) {
      if (p.has(P::unit_diagonal)) {
        m(i, i) = 1;
      } else if (p.has(P::spd) || p.has(P::spsd)) {
        m(i, i) = uni(rng, 0.5, 1.5);
      } else {
        m(i, i) = nonsing ? away_from_zero(rng) : uni(rng, -1, 1);
      }
    }
    return m;
  }
  if (lower || upper) return triangular(rng, r, c, lower, p.has(P::unit_diagonal), nonsing);
  if (p.has(P::spd)) {
    Matrix g = uniform(rng, r, r);
    return g * g.transpose() + static_cast<double>(r) * Matrix::Identity(r, r);
  }
  if (p.has(P::spsd)) {
    Matrix g = uniform(rng, r, r / 2 + 1);
    return g * g.transpose();
  }
  if (p.has(P::symmetric)) {
    Matrix g = uniform(rng, r, r);
    Matrix s = (g + g.transpose()) / 2;
    if (nonsing) s += static_cast<double>(r) / 4 * Matrix::Identity(r, r);
    return s;
  }
  Matrix m = uniform(rng, r, c);
  if (square && nonsing) m += static_cast<double>(r) / 4 * Matrix::Identity(r, r);
  return m;
}

long rank_of(const Matrix& m) {
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(1e-10);
  return qr.rank();
}

}  // namespace

bool check_properties(const Matrix& m, const PropertySet& p, double tol) {
  const long r = m.rows(), c = m.cols();
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  auto tiny = [&](double v) { return std::abs(v) <= tol * scale; };
  for (long j = 0; j < c; ++j) {
    for (long i = 0; i < r; ++i) {
      if (p.has(P::zero) && !tiny(m(i, j))) return false;
      if ((p.has(P::diagonal) || p.has(P::identity)) && i != j && !tiny(m(i, j))) return false;
      if (p.has(P::lower_triangular) && i < j && !tiny(m(i, j))) return false;
      if (p.has(P::upper_triangular) && i > j && !tiny(m(i, j))) return false;
      if (p.has(P::unit_diagonal) && i == j && std::abs(m(i, j) - 1) > tol) return false;
      if (p.has(P::identity) && i == j && std::abs(m(i, j) - 1) > tol) return false;
      if (p.has(P::permutation) && !tiny(m(i, j)) && std::abs(m(i, j) - 1) > tol) return false;
    }
  }
  if (p.has(P::positive) && !(r == 1 && c == 1 && m(0, 0) > 0)) return false;
  const bool sym = p.has(P::symmetric) || p.has(P::spd) || p.has(P::spsd);
  if (sym) {
    if (r != c || (m - m.transpose()).cwiseAbs().maxCoeff() > tol * scale) return false;
  }
  if (p.has(P::spd) || p.has(P::spsd)) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    if (p.has(P::spd) && lo <= 0) return false;
    if (lo < -tol * scale) return false;
  }
  if (p.has(P::orthogonal) || p.has(P::orthogonal_columns)) {
    if ((m.transpose() * m - Matrix::Identity(c, c)).cwiseAbs().maxCoeff() > tol) return false;
  }
  if (p.has(P::orthogonal) || p.has(P::orthogonal_rows)) {
    if ((m * m.transpose() - Matrix::Identity(r, r)).cwiseAbs().maxCoeff() > tol) return false;
  }
  if (p.has(P::permutation)) {
    if (r != c) return false;
    for (long i = 0; i < r; ++i) {
      if (std::abs(m.row(i).sum() - 1) > tol || std::abs(m.col(i).sum() - 1) > tol) return false;
    }
  }
  if (p.has(P::full_rank) && rank_of(m) != std::min(r, c)) return false;
  if (p.has(P::non_singular) && (r != c || rank_of(m) != r)) return false;
  return true;
}

Matrix random_value(const Operand& op, std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    Matrix m = construct(op, rng);
    if (check_properties(m, op.properties())) return m;
  }
  throw InstantiationError("cannot instantiate " + op.name() + " with properties " +
                           op.properties().str());
}

ProblemInstance instantiate(const std::vector<Operand>& operands, std::uint64_t seed) {
  ProblemInstance inst;
  inst.seed = seed;
  std::mt19937_64 rng(seed);
  for (const auto& op : operands) {
    if (inst.values.count(op.name())) continue;
    inst.values.emplace(op.name(), random_value(op, rng));
  }
  return inst;
}

ProblemInstance instantiate(const ProblemSpec& problem, std::uint64_t seed) {
  return instantiate(problem.inputs(), seed);
}

// ---------------------------------------------------------------------------
// reference evaluation

Matrix evaluate(const Expr& e, const Values& env, double* condition) {
  switch (e.kind()) {
    case ExprKind::literal:
      return Matrix::Constant(1, 1, e.value());
    case ExprKind::operand: {
      const Operand& o = e.op();
      if (o.has(P::identity)) return Matrix::Identity(o.rows(), o.cols());
      if (o.has(P::zero)) return Matrix::Zero(o.rows(), o.cols());
      auto it = env.find(o.name());
      if (it == env.end()) throw InterpreterError("no value for " + o.name());
      if (it->second.rows() != o.rows() || it->second.cols() != o.cols()) {
        throw InterpreterError("value of " + o.name() + " has the wrong shape");
      }
      return it->second;
    }
    case ExprKind::transpose:
      return evaluate(e.child(), env, condition).transpose();
    case ExprKind::inverse: {
      Matrix m = evaluate(e.child(), env, condition);
      if (m.rows() != m.cols()) throw InterpreterError("inverse of non-square " + e.str());
      const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
      Eigen::PartialPivLU<Matrix> lu(m);
      const auto& u = lu.matrixLU();
      for (long i = 0; i < u.rows(); ++i) {
        if (std::abs(u(i, i)) < 1e-12 * scale) {
          throw SingularityError("numerically singular: " + e.child().str());
        }
      }
      if (condition) *condition = std::max(*condition, 1.0 / lu.rcond());
      return lu.inverse();
    }
    case ExprKind::times: {
      Matrix acc = evaluate(e.child(0), env, condition);
      for (std::size_t i = 1; i < e.arity(); ++i) {
        Matrix b = evaluate(e.child(i), env, condition);
        if (acc.rows() == 1 && acc.cols() == 1 && !(b.rows() == 1 && b.cols() == 1)) {
          acc = acc(0, 0) * b;
        } else if (b.rows() == 1 && b.cols() == 1) {
          acc *= b(0, 0);
        } else {
          if (acc.cols() != b.rows()) throw InterpreterError("non-conformable " + e.str());
          acc = acc * b;
        }
      }
      return acc;
    }
    case ExprKind::plus: {
      Matrix acc = evaluate(e.child(0), env, condition);
      for (std::size_t i = 1; i < e.arity(); ++i) acc += evaluate(e.child(i), env, condition);
      return acc;
    }
  }
  throw InterpreterError("unknown expression kind");
}

Values reference(const ProblemSpec& problem, const ProblemInstance& inst, double* condition) {
  Values env = inst.values, out;
  for (const auto& a : problem.assignments) {
    Matrix v = evaluate(a.rhs, env, condition);
    env[a.lhs.name()] = v;
    out[a.lhs.name()] = std::move(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// counting interpreter

namespace {

bool in_structure(Structure s, long i, long j) {
  switch (s) {
    case Structure::full: return true;
    case Structure::lower: return i >= j;
    case Structure::upper: return i <= j;
    case Structure::diagonal: return i == j;
  }
  return true;
}

struct Bound {
  const KernelCall& call;
  const Values& env;
  std::vector<std::size_t> var;
  std::vector<Modifier> mod;

  Bound(const KernelCall& c, const Values& e) : call(c), env(e) {
    for (const auto& t : c.kernel->pattern.terms) {
      for (const auto& l : t.leaves) var.push_back(static_cast<std::size_t>(l.var));
    }
    mod = c.sub.modifiers;
    if (mod.size() != var.size()) throw InterpreterError(c.str() + ": malformed binding");
  }

  const Operand& op(std::size_t leaf) const { return call.sub.bindings.at(var.at(leaf)); }

  Matrix value(std::size_t leaf) const {
    return evaluate(Expr::operand(op(leaf)), env);
  }

  // Value with a transpose modifier applied; inverses are left to the kernel.
  Matrix opv(std::size_t leaf) const {
    Matrix m = value(leaf);
    if (is_transposed(mod[leaf])) m.transposeInPlace();
    return m;
  }

  Structure structure(std::size_t leaf) const { return structure_of(op(leaf), mod[leaf]); }

  double coef(std::size_t t) const {
    if (t >= call.sub.coefficients.size()) return 1.0;
    return evaluate(call.sub.coefficients[t], env)(0, 0);
  }
  bool nontrivial(std::size_t t) const {
    return t < call.sub.coefficients.size() && nontrivial_coefficient(call.sub.coefficients[t]);
  }
};

void need(bool ok, const KernelCall& c, const std::string& what) {
  if (!ok) throw InterpreterError(c.str() + ": " + what);
}

// C = a X Y (+ b Z)
Matrix general_product(const Bound& b, double& n) {
  const Matrix x = b.opv(0), y = b.opv(1);
  need(x.cols() == y.rows(), b.call, "inner dimensions differ");
  const bool has_z = b.call.kernel->pattern.shape == Pattern::Shape::sum;
  Matrix z;
  if (has_z) {
    z = b.opv(2);
    need(z.rows() == x.rows() && z.cols() == y.cols(), b.call, "addend has the wrong shape");
  }
  const double a = b.coef(0), be = has_z ? b.coef(1) : 1.0;
  const bool an = b.nontrivial(0), bn = has_z && b.nontrivial(1);
  const long m = x.rows(), k = x.cols(), nn = y.cols();
  Matrix c(m, nn);
  for (long j = 0; j < nn; ++j) {
    for (long i = 0; i < m; ++i) {
      double s = 0;
      if (!an && has_z) {
        s = bn ? be * z(i, j) : z(i, j);
        n += bn;
      }
      for (long p = 0; p < k; ++p) s += x(i, p) * y(p, j);
      n += 2.0 * static_cast<double>(k);
      if (an) {
        if (has_z) {
          s = a * s + (bn ? be * z(i, j) : z(i, j));
          n += 2 + bn;
        } else {
          s *= a;
          n += 1;
        }
      }
      c(i, j) = s;
    }
  }
  return c;
}

// C = a x y (+ b Z), rank one
Matrix outer_product(const Bound& b, double& n) {
  const Matrix x = b.opv(0), y = b.opv(1);
  need(x.cols() == 1 && y.rows() == 1, b.call, "outer product of non-vectors");
  const bool has_z = b.call.kernel->pattern.shape == Pattern::Shape::sum;
  Matrix z;
  if (has_z) z = b.opv(2);
  const double a = b.coef(0), be = has_z ? b.coef(1) : 1.0;
  const bool an = b.nontrivial(0), bn = has_z && b.nontrivial(1);
  Matrix c(x.rows(), y.cols());
  for (long j = 0; j < y.cols(); ++j) {
    for (long i = 0; i < x.rows(); ++i) {
      double t = x(i, 0) * y(0, j);
      n += 1;
      if (an) {
        t *= a;
        n += 1;
      }
      if (has_z) {
        t += bn ? be * z(i, j) : z(i, j);
        n += 1 + bn;
      }
      c(i, j) = t;
    }
  }
  return c;
}

Matrix syrk(const Bound& b, double& n) {
  Matrix x = b.value(0);
  const bool gram = is_transposed(b.mod[0]);
  const Matrix a = gram ? Matrix(x.transpose()) : x;  // n x k, result a a^T
  const bool has_z = b.call.kernel->pattern.shape == Pattern::Shape::sum;
  Matrix z;
  if (has_z) z = b.value(2);
  const double al = b.coef(0), be = has_z ? b.coef(1) : 1.0;
  const bool an = b.nontrivial(0), bn = has_z && b.nontrivial(1);
  const long m = a.rows(), k = a.cols();
  Matrix c = Matrix::Zero(m, m);
  for (long j = 0; j < m; ++j) {
    for (long i = j; i < m; ++i) {
      double s = 0;
      if (!an && has_z) {
        s = bn ? be * z(i, j) : z(i, j);
        n += bn;
      }
      for (long p = 0; p < k; ++p) s += a(i, p) * a(j, p);
      n += 2.0 * static_cast<double>(k);
      if (an) {
        if (has_z) {
          s = al * s + (bn ? be * z(i, j) : z(i, j));
          n += 2 + bn;
        } else {
          s *= al;
          n += 1;
        }
      }
      c(i, j) = s;
      c(j, i) = s;
    }
  }
  return c;
}

// op(T) B or op(T)^-1 B for a triangular T given with its effective structure.
Matrix tri_left(const Matrix& t, bool lower, bool solve, const Matrix& bm, double& n) {
  const long m = t.rows();
  Matrix out(m, bm.cols());
  for (long j = 0; j < bm.cols(); ++j) {
    if (solve) {
      Eigen::VectorXd x(m);
      for (long q = 0; q < m; ++q) {
        const long i = lower ? q : m - 1 - q;
        double s = bm(i, j);
        if (lower) {
          for (long p = 0; p < i; ++p) s -= t(i, p) * x(p);
        } else {
          for (long p = i + 1; p < m; ++p) s -= t(i, p) * x(p);
        }
        x(i) = s / t(i, i);
        n += 2.0 * static_cast<double>(q) + 1;
      }
      out.col(j) = x;
    } else {
      for (long i = 0; i < m; ++i) {
        double s = 0;
        const long lo = lower ? 0 : i, hi = lower ? i : m - 1;
        for (long p = lo; p <= hi; ++p) s += t(i, p) * bm(p, j);
        n += 2.0 * static_cast<double>(hi - lo + 1);
        out(i, j) = s;
      }
    }
  }
  return out;
}

Matrix triangular_kernel(const Bound& b, double& n) {
  const std::string& name = b.call.kernel->name;
  const bool right = name.ends_with("_right");
  const std::size_t ti = right ? 1 : 0, bi = right ? 0 : 1;
  const Matrix t = b.opv(ti);
  const Structure st = b.structure(ti);
  const bool solve = is_inverted(b.mod[ti]);
  const bool lower = st != Structure::upper;
  Matrix bm = b.opv(bi);
  Matrix out;
  if (right) {
    need(bm.cols() == t.rows(), b.call, "non-conformable triangular product");
    Matrix tt = t.transpose();
    out = tri_left(tt, !lower, solve, Matrix(bm.transpose()), n).transpose();
  } else {
    need(bm.rows() == t.rows(), b.call, "non-conformable triangular product");
    out = tri_left(t, lower, solve, bm, n);
  }
  if (b.nontrivial(0)) {
    out *= b.coef(0);
    n += static_cast<double>(out.size());
  }
  return out;
}

Matrix diag_scale(const Bound& b, double& n) {
  const bool left = b.call.kernel->name == "diag_left";
  const std::size_t di = left ? 0 : 1, bi = left ? 1 : 0;
  const Matrix d = b.value(di);
  const bool inv = is_inverted(b.mod[di]);
  const Matrix bm = b.opv(bi);
  const Structure sb = b.structure(bi);
  const double a = b.coef(0);
  const bool an = b.nontrivial(0);
  Matrix out = Matrix::Zero(bm.rows(), bm.cols());
  for (long j = 0; j < bm.cols(); ++j) {
    for (long i = 0; i < bm.rows(); ++i) {
      if (!in_structure(sb, i, j)) continue;
      const double dv = left ? d(i, i) : d(j, j);
      double v = inv ? bm(i, j) / dv : bm(i, j) * dv;
      n += 1;
      if (an) {
        v *= a;
        n += 1;
      }
      out(i, j) = v;
    }
  }
  return out;
}

Matrix add_kernel(const Bound& b, double& n) {
  const Matrix x = b.opv(0), y = b.opv(1);
  need(x.rows() == y.rows() && x.cols() == y.cols(), b.call, "summands differ in shape");
  const Structure sx = b.structure(0), sy = b.structure(1);
  const double a = b.coef(0), be = b.coef(1);
  const bool an = b.nontrivial(0), bn = b.nontrivial(1);
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (long j = 0; j < x.cols(); ++j) {
    for (long i = 0; i < x.rows(); ++i) {
      const bool ix = in_structure(sx, i, j), iy = in_structure(sy, i, j);
      double v = 0;
      if (ix) {
        v = an ? a * x(i, j) : x(i, j);
        n += an;
      }
      if (iy) {
        const double w = bn ? be * y(i, j) : y(i, j);
        n += bn;
        if (ix) {
          v += w;
          n += 1;
        } else {
          v = w;
        }
      }
      out(i, j) = v;
    }
  }
  return out;
}

Matrix scal(const Bound& b, double& n) {
  const Matrix x = b.value(0);
  const Structure s = b.structure(0);
  const double a = b.coef(0);
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (long j = 0; j < x.cols(); ++j) {
    for (long i = 0; i < x.rows(); ++i) {
      if (!in_structure(s, i, j)) continue;
      out(i, j) = a * x(i, j);
      n += 1;
    }
  }
  return out;
}

Matrix scalar_product(const Bound& b, double& n) {
  const double x = b.value(0)(0, 0), y = b.value(1)(0, 0);
  double v = is_inverted(b.mod[0]) ? y / x : x * y;
  n += 1;
  if (b.nontrivial(0)) {
    v *= b.coef(0);
    n += 1;
  }
  return Matrix::Constant(1, 1, v);
}

Matrix inverse_diagonal(const Bound& b, double& n) {
  const Matrix d = b.value(0);
  Matrix out = Matrix::Zero(d.rows(), d.cols());
  for (long i = 0; i < d.rows(); ++i) {
    if (d(i, i) == 0) throw SingularityError(b.call.str() + ": zero on the diagonal");
    out(i, i) = 1.0 / d(i, i);
    n += 1;
  }
  return out;
}

Matrix inverse_triangular(const Bound& b, double& n) {
  const Matrix t = b.opv(0);
  const bool lower = b.structure(0) != Structure::upper;
  const long m = t.rows();
  Matrix out = Matrix::Zero(m, m);
  for (long j = 0; j < m; ++j) {
    // solve T x = e_j over the rows where x can be nonzero
    if (lower) {
      for (long i = j; i < m; ++i) {
        double s = i == j ? 1.0 : 0.0;
        for (long p = j; p < i; ++p) s -= t(i, p) * out(p, j);
        out(i, j) = s / t(i, i);
        n += 2.0 * static_cast<double>(i - j) + 1;
      }
    } else {
      for (long i = j; i >= 0; --i) {
        double s = i == j ? 1.0 : 0.0;
        for (long p = i + 1; p <= j; ++p) s -= t(i, p) * out(p, j);
        out(i, j) = s / t(i, i);
        n += 2.0 * static_cast<double>(j - i) + 1;
      }
    }
  }
  return out;
}

struct Lu {
  Matrix l, u;
  std::vector<long> perm;  // row i of PA is row perm[i] of A
};

Lu lu_decompose(const Matrix& a0, double& n, const std::string& who) {
  const long m = a0.rows();
  Matrix a = a0;
  std::vector<long> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0L);
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  for (long k = 0; k < m; ++k) {
    long piv = k;
    for (long i = k + 1; i < m; ++i) {
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    }
    if (std::abs(a(piv, k)) < 1e-12 * scale) throw SingularityError(who + ": singular pivot");
    if (piv != k) {
      a.row(k).swap(a.row(piv));
      std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(piv)]);
    }
    for (long i = k + 1; i < m; ++i) {
      const double l = a(i, k) / a(k, k);
      a(i, k) = l;
      n += 1;
      for (long j = k + 1; j < m; ++j) a(i, j) -= l * a(k, j);
      n += 2.0 * static_cast<double>(m - k - 1);
    }
  }
  Lu out;
  out.l = Matrix::Identity(m, m);
  out.u = Matrix::Zero(m, m);
  for (long j = 0; j < m; ++j) {
    for (long i = 0; i < m; ++i) {
      if (i > j) {
        out.l(i, j) = a(i, j);
      } else {
        out.u(i, j) = a(i, j);
      }
    }
  }
  out.perm = std::move(perm);
  return out;
}

Matrix inverse_general(const Bound& b, double& n) {
  const Matrix a = b.opv(0);
  need(a.rows() == a.cols(), b.call, "inverse of a non-square matrix");
  const long m = a.rows();
  Lu f = lu_decompose(a, n, b.call.str());
  // A^-1 = U^-1 L^-1 P; column c of P has its one in row q where perm[q] = c
  Matrix out(m, m);
  for (long c = 0; c < m; ++c) {
    long q = 0;
    while (f.perm[static_cast<std::size_t>(q)] != c) ++q;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    y(q) = 1;
    for (long i = q + 1; i < m; ++i) {
      double s = 0;
      for (long p = q; p < i; ++p) s -= f.l(i, p) * y(p);
      y(i) = s;
      n += 2.0 * static_cast<double>(i - q);
    }
    for (long i = m - 1; i >= 0; --i) {
      double s = y(i);
      for (long p = i + 1; p < m; ++p) s -= f.u(i, p) * y(p);
      y(i) = s / f.u(i, i);
      n += 2.0 * static_cast<double>(m - 1 - i) + 1;
    }
    out.col(c) = y;
  }
  return out;
}

Matrix permute(const Bound& b) { return b.opv(0) * b.opv(1); }

std::vector<Matrix> factorize(const KernelCall& c, const Values& env, double& n) {
  const Matrix a = evaluate(Expr::operand(c.target), env);
  const long m = a.rows(), k = a.cols();
  switch (c.factorization->kind) {
    case FactorizationKind::cholesky: {
      Matrix l = Matrix::Zero(m, m);
      for (long j = 0; j < m; ++j) {
        double s = a(j, j);
        for (long p = 0; p < j; ++p) s -= l(j, p) * l(j, p);
        n += 2.0 * static_cast<double>(j) + 1;
        if (s <= 0) throw SingularityError(c.str() + ": matrix is not positive definite");
        l(j, j) = std::sqrt(s);
        for (long i = j + 1; i < m; ++i) {
          double t = a(i, j);
          for (long p = 0; p < j; ++p) t -= l(i, p) * l(j, p);
          l(i, j) = t / l(j, j);
          n += 2.0 * static_cast<double>(j) + 1;
        }
      }
      return {l};
    }
    case FactorizationKind::lu: {
      Lu f = lu_decompose(a, n, c.str());
      Matrix p = Matrix::Zero(m, m);
      for (long i = 0; i < m; ++i) p(i, f.perm[static_cast<std::size_t>(i)]) = 1;
      return {p, f.l, f.u};
    }
    case FactorizationKind::qr: {
      Matrix r = a;
      std::vector<Eigen::VectorXd> vs;
      std::vector<double> betas;
      for (long j = 0; j < k; ++j) {
        const long len = m - j;
        Eigen::VectorXd v = r.col(j).tail(len);
        double norm = 0;
        for (long i = 0; i < len; ++i) norm += v(i) * v(i);
        n += 2.0 * static_cast<double>(len);
        norm = std::sqrt(norm);
        const double alpha = v(0) >= 0 ? -norm : norm;
        v(0) -= alpha;
        const double vv = v.squaredNorm();
        const double beta = vv > 0 ? 2.0 / vv : 0.0;
        r(j, j) = alpha;
        for (long i = j + 1; i < m; ++i) r(i, j) = 0;
        for (long col = j + 1; col < k; ++col) {
          double w = 0;
          for (long i = 0; i < len; ++i) w += v(i) * r(j + i, col);
          w *= beta;
          for (long i = 0; i < len; ++i) r(j + i, col) -= w * v(i);
          n += 4.0 * static_cast<double>(len);
        }
        vs.push_back(std::move(v));
        betas.push_back(beta);
      }
      Matrix q = Matrix::Identity(m, k);
      for (long j = k - 1; j >= 0; --j) {
        const auto& v = vs[static_cast<std::size_t>(j)];
        const long len = m - j;
        for (long col = 0; col < k; ++col) {
          const double w = betas[static_cast<std::size_t>(j)] * v.dot(q.col(col).tail(len));
          q.col(col).tail(len) -= w * v;
        }
      }
      return {q, r.topRows(k).triangularView<Eigen::Upper>()};
    }
    case FactorizationKind::eigendecomposition: {
      Eigen::SelfAdjointEigenSolver<Matrix> es(a);
      return {es.eigenvectors(), Matrix(es.eigenvalues().asDiagonal())};
    }
    case FactorizationKind::svd: {
      Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
      return {svd.matrixU(), Matrix(svd.singularValues().asDiagonal()), svd.matrixV()};
    }
  }
  throw InterpreterError("unknown factorization");
}

}  // namespace

CallResult run_call(const KernelCall& call, const Values& env) {
  CallResult r;
  if (call.is_factorization()) {
    r.results = factorize(call, env, r.counted);
    if (call.factorization->count_mode == CountMode::uncounted) r.counted = 0;
    for (std::size_t i = 0; i < r.results.size() && i < call.results.size(); ++i) {
      need(r.results[i].rows() == call.results[i].rows() &&
               r.results[i].cols() == call.results[i].cols(),
           call, "factor has the wrong shape");
    }
    return r;
  }
  if (!call.kernel) throw InterpreterError("call without kernel");
  Bound b(call, env);
  const std::string& fam = call.kernel->family;
  const std::string& name = call.kernel->name;
  double& n = r.counted;
  Matrix out;
  if (fam == "gemm" || fam == "gemv" || fam == "dot") {
    out = general_product(b, n);
  } else if (fam == "ger") {
    out = outer_product(b, n);
  } else if (fam == "mul") {
    out = scalar_product(b, n);
  } else if (fam == "syrk") {
    out = syrk(b, n);
  } else if (fam == "trmm" || fam == "trsm" || fam == "trmv" || fam == "trsv") {
    out = triangular_kernel(b, n);
  } else if (fam == "diagscale") {
    out = diag_scale(b, n);
  } else if (fam == "axpy") {
    out = add_kernel(b, n);
  } else if (fam == "scal") {
    out = scal(b, n);
  } else if (fam == "transpose") {
    out = b.opv(0);
  } else if (fam == "invdiag") {
    out = inverse_diagonal(b, n);
  } else if (fam == "trtri") {
    out = inverse_triangular(b, n);
  } else if (fam == "getri") {
    out = inverse_general(b, n);
  } else if (fam == "lapmt") {
    out = permute(b);
  } else {
    throw InterpreterError("no interpretation for kernel " + name);
  }
  if (call.kernel->count_mode == CountMode::uncounted) n = 0;
  if (!call.results.empty()) {
    need(out.rows() == call.results[0].rows() && out.cols() == call.results[0].cols(), call,
         "result has the wrong shape");
  }
  r.results.push_back(std::move(out));
  return r;
}

Execution execute(const Program& p, const ProblemInstance& inst) {
  Execution ex;
  ex.values = inst.values;
  for (const auto& c : p.calls) {
    CallResult r = run_call(c, ex.values);
    for (std::size_t i = 0; i < r.results.size() && i < c.results.size(); ++i) {
      ex.values[c.results[i].name()] = std::move(r.results[i]);
    }
    ex.counted.push_back(r.counted);
  }
  return ex;
}

Values outputs(const Program& p, const Execution& ex) {
  Values out;
  for (const auto& [lhs, op] : p.outputs) out[lhs.name()] = evaluate(Expr::operand(op), ex.values);
  return out;
}

bool counts_agree(const KernelCall& call, double counted) {
  const CountMode mode =
      call.is_factorization() ? call.factorization->count_mode : call.kernel->count_mode;
  const double claimed = call.flops;
  switch (mode) {
    case CountMode::uncounted:
      return true;
    case CountMode::exact:
      return std::abs(counted - claimed) <= 1e-9 * std::max(1.0, claimed);
    case CountMode::leading_order: {
      long dim = 0;
      for (const auto& a : call.arguments()) dim = std::max({dim, a.rows(), a.cols()});
      if (dim < 200) return true;
      return std::abs(counted - claimed) <= 0.05 * claimed;
    }
  }
  return false;
}

std::string_view to_string(VerifyStatus s) {
  switch (s) {
    case VerifyStatus::pass: return "pass";
    case VerifyStatus::fail: return "fail";
    case VerifyStatus::ill_conditioned_skip: return "ill_conditioned_skip";
  }
  return "?";
}

std::string VerificationReport::str() const {
  std::ostringstream os;
  os << "status: " << to_string(status) << "\n";
  os << "seed: " << seed << "\n";
  os << "max_relative_error: " << max_relative_error << "\n";
  os << "condition_estimate: " << condition_estimate << "\n";
  os << "flops_claimed: " << flops_claimed << "\n";
  os << "flops_counted: " << flops_counted << "\n";
  os << "counts_agree: " << (counts_agree ? "yes" : "no") << "\n";
  if (!message.empty()) os << "message: " << message << "\n";
  return os.str();
}

std::string VerificationReport::json() const {
  nlohmann::ordered_json j;
  j["status"] = std::string(to_string(status));
  j["seed"] = seed;
  j["max_relative_error"] = max_relative_error;
  j["condition_estimate"] = condition_estimate;
  j["flops_claimed"] = flops_claimed;
  j["flops_counted"] = flops_counted;
  j["counts_agree"] = counts_agree;
  j["message"] = message;
  return j.dump();
}

VerificationReport verify(const Program& p, const ProblemSpec& problem, std::uint64_t seed,
                          double tol) {
  VerificationReport rep;
  rep.seed = seed;
  for (const auto& c : p.calls) rep.flops_claimed += c.flops;
  try {
    const ProblemInstance inst = instantiate(problem, seed);
    double cond = 1;
    const Values ref = reference(problem, inst, &cond);
    rep.condition_estimate = cond;
    if (cond > kConditionCutoff) {
      rep.status = VerifyStatus::ill_conditioned_skip;
      rep.message = "condition estimate above cutoff";
      return rep;
    }
    const Execution ex = execute(p, inst);
    const Values got = outputs(p, ex);
    for (std::size_t i = 0; i < p.calls.size(); ++i) {
      rep.flops_counted += ex.counted[i];
      if (!counts_agree(p.calls[i], ex.counted[i])) {
        rep.counts_agree = false;
        if (rep.message.empty()) {
          rep.message = "operation count of " + p.calls[i].str() + " is " +
                        std::to_string(ex.counted[i]) + ", claimed " +
                        std::to_string(p.calls[i].flops);
        }
      }
    }
    for (const auto& [name, want] : ref) {
      auto it = got.find(name);
      if (it == got.end()) throw InterpreterError("program does not compute " + name);
      if (it->second.rows() != want.rows() || it->second.cols() != want.cols()) {
        throw InterpreterError("output " + name + " has the wrong shape");
      }
      const double scale = std::max(want.cwiseAbs().maxCoeff(), 1e-300);
      const double err = (it->second - want).cwiseAbs().maxCoeff() / scale;
      if (!(err <= rep.max_relative_error)) rep.max_relative_error = err;
    }
    const bool ok = rep.max_relative_error <= tol && rep.counts_agree;
    rep.status = ok ? VerifyStatus::pass : VerifyStatus::fail;
    if (rep.max_relative_error > tol && rep.message.empty()) rep.message = "error above tolerance";
  } catch (const SingularityError& e) {
    rep.status = VerifyStatus::ill_conditioned_skip;
    rep.message = e.what();
  } catch (const std::exception& e) {
    rep.status = VerifyStatus::fail;
    rep.message = e.what();
  }
  return rep;
}

// ---------------------------------------------------------------------------
// random problems

namespace {

struct Generator {
  const RandomProblemConfig& cfg;
  std::mt19937_64 rng;
  ProblemSpec spec;
  int remaining = 0;
  std::size_t next_name = 0;

  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  bool coin(double p) { return uni(rng, 0, 1) < p; }

  long dim() {
    const long steps = std::max(0L, (cfg.max_dim - cfg.min_dim) / cfg.step);
    return cfg.min_dim + cfg.step * pick(0, static_cast<int>(steps));
  }

  std::string name() {
    static const char* names[] = {"A", "B", "C", "D", "E", "F", "G", "H", "K", "L",
                                  "M", "N", "P", "Q", "R", "S", "U", "V", "W", "Y"};
    return names[next_name++ % 20];
  }

  Expr declare(long r, long c, PropertySet p) {
    Operand o(name(), r, c, close(p, r, c));
    spec.declarations.push_back({DeclKind::matrix, o, std::to_string(r), std::to_string(c)});
    --remaining;
    return Expr::operand(o);
  }

  PropertySet square_property(bool invertible) {
    static const Property choices[] = {P::diagonal, P::lower_triangular, P::upper_triangular,
                                       P::symmetric, P::spd};
    PropertySet p;
    if (coin(cfg.property_probability)) p.insert(choices[pick(0, 4)]);
    if (invertible) {
      if (p.has(P::spd)) return p;
      if (p.empty()) p.insert(P::full_rank);
      p.insert(P::non_singular);
    }
    return p;
  }

  Expr leaf(long r, long c) {
    const bool t = coin(0.25);
    const long rr = t ? c : r, cc = t ? r : c;
    PropertySet p = rr == cc ? square_property(false) : PropertySet{};
    if (rr != cc && coin(0.5)) p.insert(P::full_rank);
    Expr e = declare(rr, cc, p);
    return t ? Expr::transpose(e) : e;
  }

  Expr inverse(long n) {
    Expr e = declare(n, n, square_property(true));
    if (coin(0.25)) e = Expr::transpose(e);
    return Expr::inverse(e);
  }

  Expr sum(long r, long c) { return Expr::plus({leaf(r, c), leaf(r, c)}); }

  // X X^T or X M X^T with X one or two matrices
  Expr gram(long n) {
    const bool two = remaining >= 3 && coin(0.5);
    const bool with_m = remaining >= (two ? 3 : 2) && coin(0.5);
    const long k = dim();
    Expr x;
    if (two) {
      const long inner = dim();
      Expr a = declare(n, inner, {});
      Expr b = declare(inner, k, {});
      x = Expr::times({a, b});
    } else {
      x = declare(n, k, {});
    }
    std::vector<Expr> f{x};
    if (with_m) f.push_back(declare(k, k, coin(0.5) ? PropertySet{P::spd} : PropertySet{P::symmetric}));
    f.push_back(Expr::transpose(x));
    return Expr::times(std::move(f));
  }
};

}  // namespace

ProblemSpec random_problem(const RandomProblemConfig& cfg, std::uint64_t seed) {
  Generator g{cfg, std::mt19937_64(seed), {}, 0, 0};
  g.remaining = g.pick(cfg.min_operands, cfg.max_operands);
  const bool cse = g.coin(cfg.cse_probability);
  const int cse_slot = cse ? g.pick(0, 2) : -1;
  std::vector<Expr> factors;
  long rows = g.dim(), cur = rows;
  while (g.remaining > 0) {
    if (cse && factors.size() == static_cast<std::size_t>(cse_slot)) {
      factors.push_back(g.gram(cur));
      continue;
    }
    const double u = uni(g.rng, 0, 1);
    if (u < 0.2) {
      factors.push_back(g.inverse(cur));
      continue;
    }
    const long next = g.coin(0.5) ? cur : g.dim();
    if (u < 0.5 && g.remaining >= 2) {
      factors.push_back(g.sum(cur, next));
    } else {
      factors.push_back(g.leaf(cur, next));
    }
    cur = next;
  }
  Expr rhs = factors.size() == 1 ? factors[0] : Expr::times(std::move(factors));
  Operand x("X", rhs.rows(), rhs.cols());
  g.spec.declarations.push_back(
      {DeclKind::matrix, x, std::to_string(rhs.rows()), std::to_string(rhs.cols())});
  g.spec.assignments.push_back({x, rhs});
  return g.spec;
}

}  // namespace lagen
