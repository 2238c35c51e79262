#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <limits>

#include "qstab/errors.hpp"
#include "qstab/numerics.hpp"

using namespace qstab;
using numerics::CMatrix;
using numerics::Complex;

namespace {
constexpr Complex kI{0.0, 1.0};
}

TEST_CASE("max_abs scans every entry") {
  CMatrix a(2, 2);
  a << Complex{1, 0}, Complex{0, -3}, Complex{2, 2}, Complex{0, 0};
  CHECK(numerics::max_abs(a) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("hermitian test is relative to the matrix scale") {
  CMatrix a(2, 2);
  a << 2.0, kI, -kI, 2.0;
  CHECK(numerics::is_hermitian(a));

  CMatrix bad = a;
  bad(0, 1) += 1e-10;
  CHECK_FALSE(numerics::is_hermitian(bad));

  // Same absolute perturbation on a matrix 1e12 times larger stays within
  // the relative tolerance.
  CMatrix big = 1e12 * a;
  big(0, 1) += 1.0;
  CHECK(numerics::is_hermitian(big));
}

TEST_CASE("hermitian_part averages the matrix with its adjoint") {
  CMatrix a(2, 2);
  a << Complex{1, 1}, Complex{2, 0}, Complex{0, 0}, Complex{3, -2};
  const CMatrix h = numerics::hermitian_part(a);
  CHECK(numerics::is_hermitian(h));
  CHECK(h(0, 0).real() == doctest::Approx(1.0));
  CHECK(h(0, 0).imag() == doctest::Approx(0.0));
  CHECK(h(0, 1).real() == doctest::Approx(1.0));
  CHECK(h(1, 0).real() == doctest::Approx(1.0));
  CHECK(h(1, 1).real() == doctest::Approx(3.0));
}

TEST_CASE("eig_hermitian returns the ascending real spectrum") {
  CMatrix a(2, 2);
  a << 2.0, kI, -kI, 2.0;
  const auto eigs = numerics::eig_hermitian(a);
  REQUIRE(eigs.size() == 2);
  CHECK(eigs[0] == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(eigs[1] == doctest::Approx(3.0).epsilon(1e-13));
}

TEST_CASE("eig_hermitian rejects non-hermitian input") {
  CMatrix a(2, 2);
  a << 1.0, 2.0, 3.0, 4.0;
  CHECK_THROWS_AS(numerics::eig_hermitian(a), ShapeError);
}

TEST_CASE("eig_general finds complex eigenvalues") {
  CMatrix a(2, 2);
  a << 0.0, 1.0, -1.0, 0.0;
  auto eigs = numerics::eig_general(a);
  REQUIRE(eigs.size() == 2);
  std::sort(eigs.begin(), eigs.end(),
            [](Complex x, Complex y) { return x.imag() < y.imag(); });
  CHECK(std::abs(eigs[0] - Complex{0, -1}) < 1e-12);
  CHECK(std::abs(eigs[1] - Complex{0, 1}) < 1e-12);
}

TEST_CASE("eig_general names the offending matrix on shape errors") {
  CMatrix a(2, 3);
  a.setZero();
  try {
    numerics::eig_general(a, "drift");
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("drift") != std::string::npos);
  }
}

TEST_CASE("eig_general rejects non-finite entries") {
  CMatrix a(2, 2);
  a.setZero();
  a(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(numerics::eig_general(a), NumericalError);
}

TEST_CASE("solve_linear produces small residuals") {
  CMatrix a(2, 2);
  a << 3.0, Complex{0, 1}, Complex{0, -1}, 2.0;
  CMatrix b(2, 1);
  b << 1.0, Complex{0, 2};
  const CMatrix x = numerics::solve_linear(a, b);
  CHECK(numerics::max_abs(a * x - b) < 1e-13);
}

TEST_CASE("solve_linear rejects singular systems with the condition estimate") {
  CMatrix a(2, 2);
  a << 1.0, 1.0, 1.0, 1.0;
  CMatrix b(2, 1);
  b << 1.0, 0.0;
  CHECK_THROWS_AS(numerics::solve_linear(a, b), SingularityError);
}

TEST_CASE("solve_linear checks dimensions") {
  CMatrix a(2, 2);
  a.setIdentity();
  CMatrix b(3, 1);
  b.setZero();
  CHECK_THROWS_AS(numerics::solve_linear(a, b), DimensionError);
}

TEST_CASE("is_negative_definite uses a strict threshold") {
  CMatrix a(2, 2);
  a << -1.0, 0.0, 0.0, -2.0;
  const auto res = numerics::is_negative_definite(a);
  CHECK(res.negative_definite);
  CHECK(res.max_eigenvalue == doctest::Approx(-1.0).epsilon(1e-13));

  CMatrix indef(2, 2);
  indef << -1.0, 0.0, 0.0, 0.5;
  const auto res2 = numerics::is_negative_definite(indef);
  CHECK_FALSE(res2.negative_definite);
  CHECK(res2.max_eigenvalue == doctest::Approx(0.5).epsilon(1e-13));

  // With an explicit tolerance, an eigenvalue at -1e-9 is not strictly
  // below -1e-6.
  CMatrix near(1, 1);
  near << -1e-9;
  CHECK_FALSE(numerics::is_negative_definite(near, 1e-6).negative_definite);
  CHECK(numerics::is_negative_definite(near, 1e-12).negative_definite);
}

TEST_CASE("default tolerances are the documented values") {
  const auto& tol = numerics::default_tolerances();
  CHECK(tol.hermitian_rel == doctest::Approx(1e-12));
  CHECK(tol.cond_limit == doctest::Approx(1e12));
}
