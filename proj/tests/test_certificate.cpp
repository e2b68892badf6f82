// Exact-rational certificate for the weighted-identity coefficient inequalities:
// polynomial identity, Sturm positivity of the strict-gap cubic, and explicit
// weight windows on a grid.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>

#include "qrlab/certificate.hpp"
#include "qrlab/rigidity.hpp"

using namespace qrlab;
using Catch::Approx;

TEST_CASE("exact coefficient endpoints") {
  // n = 5 spot values
  auto c1 = exact_obata_coefficients(5, 1);
  CHECK(c1.C == Rational(4, 3));
  CHECK(c1.I == Rational(20, 9));
  CHECK(c1.C * c1.C == Rational(16, 9));
  CHECK(c1.C * c1.C < c1.I);
  CHECK(c1.I == 2 * Rational(4) * c1.B);  // I(1) = 2(n-1) B(1)

  auto c0 = exact_obata_coefficients(5, 0);
  CHECK(c0.C == Rational(-11, 15));
  CHECK(c0.I == Rational(64, 45));

  // closed forms across dimensions
  for (int n = 5; n <= 12; ++n) {
    Rational N(n);
    auto e1 = exact_obata_coefficients(n, 1);
    auto e0 = exact_obata_coefficients(n, 0);
    CHECK(e1.C == (N - 1) / (N - 2));
    CHECK(e1.I == N * (N - 1) / ((N - 2) * (N - 2)));
    CHECK(e0.C == (-3 * N + 4) / (N * (N - 2)));
    CHECK(e0.I == 4 * (N - 1) * (N - 1) / (N * (N - 2) * (N - 2)));
    CHECK(e0.alpha1 == 4 * (N - 1) / ((N - 2) * (N - 2)));
    CHECK(e0.alpha2 == (N * N - 4) / (4 * (N - 1) * N));

    // C increasing and B decreasing across the interval (sampled)
    Rational prevC = e0.C, prevB = e0.B;
    for (int k = 1; k <= 10; ++k) {
      auto ek = exact_obata_coefficients(n, Rational(k, 10));
      CHECK(ek.C >= prevC);
      CHECK(ek.B <= prevB);
      CHECK(ek.C * ek.C < ek.I);
      prevC = ek.C;
      prevB = ek.B;
    }
  }

  CHECK_THROWS_AS(exact_obata_coefficients(4, Rational(1, 2)), PreconditionError);
  CHECK_THROWS_AS(exact_obata_coefficients(5, Rational(-1, 2)), PreconditionError);
  CHECK_THROWS_AS(exact_obata_coefficients(5, Rational(3, 2)), PreconditionError);
}

TEST_CASE("floating-point bookkeeping matches the exact coefficients") {
  for (int n = 5; n <= 12; ++n) {
    for (int k = 1; k <= 10; ++k) {
      double a = k / 10.0;
      auto fl = obata_coefficients(n, a);
      auto ex = exact_obata_coefficients(n, Rational(k, 10));
      CHECK(fl.B == Approx(ex.B.convert_to<double>()).epsilon(1e-13));
      CHECK(fl.C == Approx(ex.C.convert_to<double>()).epsilon(1e-13));
      CHECK(fl.I == Approx(ex.I.convert_to<double>()).epsilon(1e-13));
      CHECK(fl.alpha1 == Approx(ex.alpha1.convert_to<double>()).epsilon(1e-14));
      CHECK(fl.alpha2 == Approx(ex.alpha2.convert_to<double>()).epsilon(1e-14));
    }
  }
}

TEST_CASE("sturm machinery isolates known roots") {
  using exact::Poly;
  // (x^2 - 2)(x + 3) = x^3 + 3x^2 - 2x - 6, roots -3, -sqrt(2), sqrt(2)
  Poly p(std::vector<Rational>{-6, -2, 3, 1});
  auto seq = exact::sturm_sequence(p);
  CHECK(exact::roots_in(seq, Rational(-4), Rational(4)) == 3);
  CHECK(exact::roots_in(seq, Rational(0), Rational(2)) == 1);
  CHECK(exact::roots_in(seq, Rational(2), Rational(4)) == 0);
  CHECK(exact::roots_in(seq, Rational(-3), Rational(0)) == 1);  // (-3, 0] misses -3 itself

  auto iv = exact::isolate_real_roots(p);
  REQUIRE(iv.size() == 3);
  for (size_t i = 0; i + 1 < iv.size(); ++i) CHECK(iv[i].second <= iv[i + 1].first);
  // each interval brackets its root
  CHECK(iv[0].first < -3);
  CHECK(iv[0].second >= -3);
  CHECK(iv[1].second >= Rational(-3, 2));
  CHECK(iv[2].first <= Rational(3, 2));

  // a polynomial with no real roots
  Poly q(std::vector<Rational>{1, 0, 1});  // x^2 + 1
  CHECK(exact::isolate_real_roots(q).empty());
}

TEST_CASE("certificate holds for every dimension in range") {
  auto grid = unit_grid(101);
  REQUIRE(grid.size() == 101);
  CHECK(grid.front() == Rational(1, 101));
  CHECK(grid.back() == 1);

  auto t0 = std::chrono::steady_clock::now();
  for (int n = 5; n <= 50; ++n) {
    Rational N(n);
    auto rep = coefficient_certificate(n, grid);
    INFO("n = " << n);
    CHECK(rep.identity_ok);
    CHECK(rep.e_nonneg);
    CHECK(rep.all_feasible);
    CHECK(rep.certified());
    CHECK(rep.gap_at_1 == (N - 1) / ((N - 2) * (N - 2)));
    CHECK(rep.e_at_0 == 4 * (N - 2) * (N - 2) * (3 * N - 4));
    CHECK(rep.e_at_1 > 0);
    REQUIRE(rep.entries.size() == grid.size());
    for (const auto& ent : rep.entries) {
      CHECK(ent.feasible);
      CHECK(ent.margin1 >= 0);
      CHECK(ent.margin2 >= 0);
      CHECK(ent.A >= 0);
    }
    // isolation intervals are sorted and disjoint
    for (size_t i = 0; i + 1 < rep.e_root_intervals.size(); ++i)
      CHECK(rep.e_root_intervals[i].second <= rep.e_root_intervals[i + 1].first);
  }
  auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(dt < 10.0);

  CHECK_THROWS_AS(coefficient_certificate(4, grid), PreconditionError);
  CHECK_THROWS_AS(coefficient_certificate(5, std::vector<Rational>{Rational(0)}),
                  PreconditionError);
  CHECK_THROWS_AS(coefficient_certificate(5, std::vector<Rational>{Rational(3, 2)}),
                  PreconditionError);
  CHECK_THROWS_AS(unit_grid(0), PreconditionError);
}

TEST_CASE("certificate report renders one readable block") {
  auto rep = coefficient_certificate(5, unit_grid(101));
  std::string txt = rep.text();
  CHECK(txt.find("[n = 5]") != std::string::npos);
  CHECK(txt.find("verified") != std::string::npos);
  CHECK(txt.find("certified") != std::string::npos);
  CHECK(txt.find("101/101 grid points feasible") != std::string::npos);
  CHECK(txt.find("FAILED") == std::string::npos);
  CHECK(txt.find("E(0) = 396") != std::string::npos);  // 4*9*11 at n = 5
}
