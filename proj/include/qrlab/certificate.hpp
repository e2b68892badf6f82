#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qrlab/common.hpp"

namespace qrlab {

using Rational = boost::multiprecision::cpp_rational;

// ------------------------------------------------------------ exact polynomials
//
// Dense univariate polynomials over the rationals: just enough arithmetic for
// identity checking and Sturm sequences.  c[i] is the coefficient of x^i.

namespace exact {

struct Poly {
  std::vector<Rational> c;

  Poly() = default;
  explicit Poly(std::vector<Rational> coeffs) : c(std::move(coeffs)) { trim(); }
  static Poly constant(const Rational& r) { return Poly({r}); }

  void trim() {
    while (!c.empty() && c.back() == 0) c.pop_back();
  }
  int degree() const { return static_cast<int>(c.size()) - 1; }  // -1 for zero poly
  bool is_zero() const { return c.empty(); }

  Rational eval(const Rational& x) const {
    Rational acc = 0;
    for (int i = degree(); i >= 0; --i) acc = acc * x + c[i];
    return acc;
  }
};

inline Poly operator+(const Poly& a, const Poly& b) {
  std::vector<Rational> c(std::max(a.c.size(), b.c.size()), Rational(0));
  for (size_t i = 0; i < a.c.size(); ++i) c[i] += a.c[i];
  for (size_t i = 0; i < b.c.size(); ++i) c[i] += b.c[i];
  return Poly(std::move(c));
}

inline Poly operator-(const Poly& a, const Poly& b) {
  std::vector<Rational> c(std::max(a.c.size(), b.c.size()), Rational(0));
  for (size_t i = 0; i < a.c.size(); ++i) c[i] += a.c[i];
  for (size_t i = 0; i < b.c.size(); ++i) c[i] -= b.c[i];
  return Poly(std::move(c));
}

inline Poly operator*(const Poly& a, const Poly& b) {
  if (a.is_zero() || b.is_zero()) return Poly();
  std::vector<Rational> c(a.c.size() + b.c.size() - 1, Rational(0));
  for (size_t i = 0; i < a.c.size(); ++i)
    for (size_t j = 0; j < b.c.size(); ++j) c[i + j] += a.c[i] * b.c[j];
  return Poly(std::move(c));
}

inline Poly operator*(const Rational& s, const Poly& a) {
  std::vector<Rational> c = a.c;
  for (auto& x : c) x *= s;
  return Poly(std::move(c));
}

inline Poly derivative(const Poly& a) {
  if (a.degree() < 1) return Poly();
  std::vector<Rational> c(a.c.size() - 1);
  for (size_t i = 1; i < a.c.size(); ++i) c[i - 1] = Rational(i) * a.c[i];
  return Poly(std::move(c));
}

// remainder of a modulo b (b nonzero)
inline Poly rem(Poly a, const Poly& b) {
  while (!a.is_zero() && a.degree() >= b.degree()) {
    Rational q = a.c.back() / b.c.back();
    int shift = a.degree() - b.degree();
    for (int i = 0; i <= b.degree(); ++i) a.c[i + shift] -= q * b.c[i];
    a.trim();
  }
  return a;
}

// ----------------------------------------------------------------- Sturm chains
//
// Standard Sturm sequence p, p', -rem(...), ...; the number of real roots in
// the half-open interval (a, b] is V(a) - V(b) where V counts sign changes.

inline std::vector<Poly> sturm_sequence(const Poly& p) {
  std::vector<Poly> seq{p, derivative(p)};
  while (!seq.back().is_zero() && seq.back().degree() >= 0) {
    Poly r = rem(seq[seq.size() - 2], seq.back());
    if (r.is_zero()) break;
    seq.push_back(Rational(-1) * r);
  }
  return seq;
}

inline int sign_changes(const std::vector<Poly>& seq, const Rational& x) {
  int changes = 0, prev = 0;
  for (const Poly& p : seq) {
    Rational v = p.eval(x);
    int s = v > 0 ? 1 : (v < 0 ? -1 : 0);
    if (s != 0) {
      if (prev != 0 && s != prev) ++changes;
      prev = s;
    }
  }
  return changes;
}

inline int roots_in(const std::vector<Poly>& seq, const Rational& a, const Rational& b) {
  return sign_changes(seq, a) - sign_changes(seq, b);
}

// all real roots isolated by bisection into disjoint intervals (lo, hi]
inline std::vector<std::pair<Rational, Rational>> isolate_real_roots(const Poly& p) {
  std::vector<std::pair<Rational, Rational>> out;
  if (p.degree() < 1) return out;
  auto seq = sturm_sequence(p);

  // Cauchy bound: all roots lie in [-M, M]
  Rational m = 0;
  for (int i = 0; i < p.degree(); ++i) {
    Rational a = abs(p.c[i]) / abs(p.c.back());
    if (a > m) m = a;
  }
  Rational M = 1 + m;

  std::vector<std::pair<Rational, Rational>> stack{{-M, M}};
  while (!stack.empty()) {
    auto [lo, hi] = stack.back();
    stack.pop_back();
    int k = roots_in(seq, lo, hi);
    if (k == 0) continue;
    if (k == 1) {
      out.emplace_back(lo, hi);
      continue;
    }
    Rational mid = (lo + hi) / 2;
    // a root exactly at the midpoint stays in the left half-open interval
    stack.emplace_back(mid, hi);
    stack.emplace_back(lo, mid);
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

inline std::string to_string(const Rational& r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

}  // namespace exact

// -------------------------------------------------- coefficient certificate
//
// Exact-rational verification of the coefficient inequalities behind the
// weighted-identity rigidity argument:
//   (i)  I(a) - C(a)^2 = I(1) - C(1)^2 + (1-a) E(a) / (4 n^2 (n-2)^2) as a
//        polynomial identity in a,
//   (ii) the cubic E is nonnegative on [0,1], certified by Sturm root
//        isolation,
//   (iii) for each grid point a, an explicit rational weight A with
//        A^2 <= P1 := (1-a)(n-1)a1/n   and   (|C|-A)^2 <= P2 := 2a(n-1)B.
// The witness A = |C| P1 / (P1 + P2) satisfies both bounds whenever
// C^2 <= P1 + P2 = I, which (i) + (ii) guarantee, so every certificate line
// is a closed rational computation.

struct CertificateEntry {
  Rational alpha;
  Rational A;        // exhibited weight
  Rational margin1;  // P1 - A^2        (>= 0 when feasible)
  Rational margin2;  // P2 - (|C|-A)^2  (>= 0 when feasible)
  bool feasible = false;
};

struct CertificateReport {
  int n = 0;
  bool identity_ok = false;
  bool e_nonneg = false;
  bool all_feasible = false;
  Rational e_at_0, e_at_1;
  Rational gap_at_1;  // I(1) - C(1)^2 = (n-1)/(n-2)^2
  std::vector<std::pair<Rational, Rational>> e_root_intervals;
  std::vector<CertificateEntry> entries;

  bool certified() const { return identity_ok && e_nonneg && all_feasible; }
  std::string text() const;
};

namespace detail_exact {

struct CoefficientPolys {
  Rational alpha1, alpha2;
  exact::Poly B, C, I, E;  // coefficient families and the strict-gap cubic, in a
};

inline CoefficientPolys coefficient_polys(int n) {
  using exact::Poly;
  const Rational N(n);
  CoefficientPolys p;
  p.alpha1 = 4 * (N - 1) / ((N - 2) * (N - 2));
  p.alpha2 = (N * N - 4) / (4 * (N - 1) * N);

  Poly a_poly({Rational(0), Rational(1)});
  Poly one = Poly::constant(1);
  p.B = (2 * N / ((N - 2) * (N - 2))) *
            (Poly::constant(Rational(1) / N) +
             (p.alpha2 * (N - 1) / N) * (Poly::constant(2) - a_poly)) -
        Poly::constant(p.alpha1 / (2 * N));
  p.C = Poly::constant((N - 1) / (N - 2)) -
        (Rational(2) / (N - 2)) *
            ((one - a_poly) * (one + (p.alpha2 * (N - 1)) * (Poly::constant(2) - a_poly)));
  p.I = (p.alpha1 * (N - 1) / N) * (one - a_poly) + (2 * (N - 1)) * (a_poly * p.B);

  Rational e3 = (N * N - 4) * (N * N - 4);
  Rational e2 = -(N - 2) * (N + 2) * (5 * N * N + 8 * N - 20);
  Rational e1 = 8 * (N * N + N - 4) * (N * N + 2 * N - 4);
  Rational e0 = 4 * (N - 2) * (N - 2) * (3 * N - 4);
  p.E = Poly(std::vector<Rational>{e0, e1, e2, e3});
  return p;
}

}  // namespace detail_exact

// exact counterpart of the floating-point coefficient bookkeeping; defined on
// the closed interval [0,1] so endpoint values are reachable
struct ExactCoefficients {
  Rational alpha1, alpha2, B, C, I;
};

inline ExactCoefficients exact_obata_coefficients(int n, const Rational& alpha) {
  if (n < 5) throw PreconditionError("coefficients defined for n >= 5");
  if (alpha < 0 || alpha > 1) throw PreconditionError("alpha must lie in [0,1]");
  auto p = detail_exact::coefficient_polys(n);
  return {p.alpha1, p.alpha2, p.B.eval(alpha), p.C.eval(alpha), p.I.eval(alpha)};
}

inline CertificateReport coefficient_certificate(int n, const std::vector<Rational>& grid) {
  if (n < 5) throw PreconditionError("certificate defined for n >= 5");
  for (const Rational& a : grid)
    if (!(a > 0) || a > 1) throw PreconditionError("grid points must lie in (0,1]");

  using exact::Poly;
  const Rational N(n);
  auto polys = detail_exact::coefficient_polys(n);
  const Rational alpha1 = polys.alpha1;
  Poly a_poly({Rational(0), Rational(1)});
  Poly one = Poly::constant(1);
  const Poly& B = polys.B;
  const Poly& C = polys.C;
  const Poly& I = polys.I;
  const Poly& E = polys.E;

  CertificateReport rep;
  rep.n = n;
  rep.gap_at_1 = (N - 1) / ((N - 2) * (N - 2));

  // (i) polynomial identity
  Poly lhs = I - C * C;
  Poly rhs = Poly::constant(rep.gap_at_1) +
             (Rational(1) / (4 * N * N * (N - 2) * (N - 2))) * ((one - a_poly) * E);
  rep.identity_ok = (lhs - rhs).is_zero();

  // (ii) Sturm certificate: no roots of E in (0,1] and E(0) > 0
  rep.e_at_0 = E.eval(0);
  rep.e_at_1 = E.eval(1);
  auto seq = exact::sturm_sequence(E);
  rep.e_nonneg = rep.e_at_0 > 0 && exact::roots_in(seq, Rational(0), Rational(1)) == 0;
  rep.e_root_intervals = exact::isolate_real_roots(E);

  // (iii) explicit weights on the grid
  rep.all_feasible = true;
  for (const Rational& a : grid) {
    CertificateEntry ent;
    ent.alpha = a;
    Rational Ca = C.eval(a);
    Rational absC = Ca < 0 ? Rational(-Ca) : Ca;
    Rational P1 = (1 - a) * (N - 1) * alpha1 / N;
    Rational P2 = 2 * a * (N - 1) * B.eval(a);
    if (P1 >= 0 && P2 >= 0 && P1 + P2 > 0) {
      ent.A = absC * P1 / (P1 + P2);
      ent.margin1 = P1 - ent.A * ent.A;
      Rational gap = absC - ent.A;
      ent.margin2 = P2 - gap * gap;
      ent.feasible = ent.margin1 >= 0 && ent.margin2 >= 0;
    }
    rep.all_feasible = rep.all_feasible && ent.feasible;
    rep.entries.push_back(std::move(ent));
  }
  return rep;
}

// uniform grid k/points, k = 1..points (the right-closed unit interval)
inline std::vector<Rational> unit_grid(int points) {
  if (points < 1) throw PreconditionError("grid needs at least one point");
  std::vector<Rational> g;
  g.reserve(points);
  for (int k = 1; k <= points; ++k) g.emplace_back(Rational(k) / points);
  return g;
}

inline std::string CertificateReport::text() const {
  std::ostringstream os;
  os << "[n = " << n << "]\n";
  os << "  identity  I(a) - C(a)^2 == (n-1)/(n-2)^2 + (1-a) E(a) / (4 n^2 (n-2)^2) : "
     << (identity_ok ? "verified" : "FAILED") << "\n";
  os << "  E(0) = " << exact::to_string(e_at_0) << ", E(1) = " << exact::to_string(e_at_1)
     << "\n";
  os << "  real roots of E isolated in:";
  if (e_root_intervals.empty()) os << " (none)";
  for (const auto& [lo, hi] : e_root_intervals)
    os << " (" << exact::to_string(lo) << ", " << exact::to_string(hi) << "]";
  os << "\n";
  os << "  E >= 0 on [0,1] : " << (e_nonneg ? "certified" : "FAILED") << "\n";
  int feasible = 0;
  for (const auto& e : entries) feasible += e.feasible ? 1 : 0;
  os << "  weight window : " << feasible << "/" << entries.size() << " grid points feasible\n";
  if (!entries.empty()) {
    std::vector<size_t> idx{0, entries.size() / 2, entries.size() - 1};
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    for (size_t i : idx) {
      const CertificateEntry& e = entries[i];
      os << "    a = " << exact::to_string(e.alpha) << " : A = " << exact::to_string(e.A)
         << ", margins " << exact::to_string(e.margin1) << " ; " << exact::to_string(e.margin2)
         << "\n";
    }
  }
  return os.str();
}

}  // namespace qrlab
