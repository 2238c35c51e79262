#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <string>

#include "qstab/errors.hpp"
#include "qstab/model.hpp"

using namespace qstab;
using model::CMatrix;
using model::Complex;
using model::DoubledMatrix;
using model::PlantModel;

namespace {

constexpr Complex kI{0.0, 1.0};

CMatrix random_matrix(std::mt19937& rng, int rows, int cols) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = Complex{u(rng), u(rng)};
  return m;
}

PlantModel random_plant(std::mt19937& rng, int n, int m) {
  CMatrix m1 = random_matrix(rng, n, n);
  m1 = (m1 + m1.adjoint().eval()) / 2.0;
  CMatrix m2 = random_matrix(rng, n, n);
  m2 = (m2 + m2.transpose().eval()) / 2.0;
  return model::build_plant(m1, m2, random_matrix(rng, m, n),
                            random_matrix(rng, m, n), random_matrix(rng, 1, n),
                            random_matrix(rng, 1, n));
}

}  // namespace

TEST_CASE("doubled matrix assembles the conjugate block pattern") {
  DoubledMatrix d;
  std::mt19937 rng(11);
  d.b1 = random_matrix(rng, 2, 2);
  d.b2 = random_matrix(rng, 2, 2);
  const CMatrix full = d.assemble();
  REQUIRE(full.rows() == 4);
  REQUIRE(full.cols() == 4);
  CHECK(numerics::max_abs(full.topLeftCorner(2, 2) - d.b1) == 0.0);
  CHECK(numerics::max_abs(full.topRightCorner(2, 2) - d.b2) == 0.0);
  CHECK(numerics::max_abs(full.bottomLeftCorner(2, 2) - d.b2.conjugate()) ==
        0.0);
  CHECK(numerics::max_abs(full.bottomRightCorner(2, 2) - d.b1.conjugate()) ==
        0.0);
}

TEST_CASE("hermitian_form holds exactly when b1 is hermitian and b2 symmetric") {
  std::mt19937 rng(3);
  DoubledMatrix d;
  CMatrix m1 = random_matrix(rng, 2, 2);
  d.b1 = (m1 + m1.adjoint().eval()) / 2.0;
  CMatrix m2 = random_matrix(rng, 2, 2);
  d.b2 = (m2 + m2.transpose().eval()) / 2.0;
  CHECK(d.hermitian_form());
  CHECK(numerics::is_hermitian(d.assemble()));

  DoubledMatrix bad = d;
  bad.b2(0, 1) += 0.1;
  CHECK_FALSE(bad.hermitian_form());
}

TEST_CASE("zero and scaled_identity factories") {
  const DoubledMatrix z = DoubledMatrix::zero(3);
  CHECK(numerics::max_abs(z.assemble()) == 0.0);
  const DoubledMatrix p = DoubledMatrix::scaled_identity(2, 0.7);
  CHECK(numerics::max_abs(p.assemble() -
                          0.7 * CMatrix::Identity(4, 4)) < 1e-15);
  CHECK(p.hermitian_form());
}

TEST_CASE("J and Sigma satisfy the defining algebra") {
  for (int n : {1, 2, 3}) {
    const CMatrix j = model::J_matrix(n);
    const CMatrix s = model::Sigma_matrix(n);
    const CMatrix id = CMatrix::Identity(2 * n, 2 * n);
    CHECK(numerics::max_abs(j * j - id) == 0.0);
    CHECK(numerics::max_abs(s * s - id) == 0.0);
    CHECK(numerics::max_abs(s * j * s + j) == 0.0);
    const auto [j2, s2] = model::constants_J_Sigma(n);
    CHECK(numerics::max_abs(j - j2) == 0.0);
    CHECK(numerics::max_abs(s - s2) == 0.0);
  }
}

TEST_CASE("build_plant validates block shapes and symmetry by name") {
  std::mt19937 rng(5);
  const CMatrix ok1 = CMatrix::Identity(2, 2);
  const CMatrix ok2 = CMatrix::Zero(2, 2);
  const CMatrix n1 = random_matrix(rng, 1, 2);
  const CMatrix e1 = random_matrix(rng, 1, 2);

  CMatrix skew = ok1;
  skew(0, 1) = kI;  // not hermitian
  try {
    model::build_plant(skew, ok2, n1, n1, e1, e1);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("M1") != std::string::npos);
  }

  CMatrix asym = ok2;
  asym(0, 1) = 1.0;  // not symmetric
  try {
    model::build_plant(ok1, asym, n1, n1, e1, e1);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("M2") != std::string::npos);
  }

  const CMatrix wrong = random_matrix(rng, 1, 3);
  CHECK_THROWS_AS(model::build_plant(ok1, ok2, wrong, n1, e1, e1),
                  DimensionError);
  CHECK_THROWS_AS(model::build_plant(ok1, ok2, n1, n1, wrong, e1),
                  DimensionError);
}

TEST_CASE("kerr plant realization matches the closed forms") {
  const PlantModel plant = model::kerr_plant(2.0);
  CHECK(plant.n == 1);
  CHECK(plant.m == 1);
  CHECK(std::abs(plant.N1(0, 0) - std::sqrt(2.0)) < 1e-15);
  CHECK(std::abs(plant.N2(0, 0)) == 0.0);
  CHECK(std::abs(plant.E1(0, 0)) == 0.0);
  CHECK(std::abs(plant.E2(0, 0) - 1.0) == 0.0);

  const auto ss = model::build_realization(plant);
  CHECK(numerics::max_abs(ss.F + CMatrix::Identity(2, 2)) < 1e-15);
  CHECK(std::abs(ss.B(0) - Complex{-1.0, 0.0}) < 1e-15);
  CHECK(std::abs(ss.B(1)) < 1e-15);
  CHECK(std::abs(ss.C(0, 0) - 2.0 * kI) < 1e-15);
  CHECK(std::abs(ss.C(0, 1)) < 1e-15);
}

TEST_CASE("kerr transfer function values at frozen points") {
  // G(s) = -2i / (s + 1) for kappa = 2.
  const auto ss = model::build_realization(model::kerr_plant(2.0));
  CHECK(std::abs(model::eval_G(ss, {0.0, 0.0}) - Complex{0.0, -2.0}) < 1e-14);
  CHECK(std::abs(model::eval_G(ss, {0.0, 1.0}) - Complex{-1.0, -1.0}) < 1e-14);
  CHECK(std::abs(model::eval_G(ss, {0.0, 2.0}) - Complex{-0.8, -0.4}) < 1e-14);
  CHECK(std::abs(model::eval_G(ss, {1.0, 0.0}) - Complex{0.0, -1.0}) < 1e-14);
}

TEST_CASE("drift matrix satisfies the damping identity") {
  // J F + (J F)† = -Ntilde† J_ch Ntilde holds for any plant.
  std::mt19937 rng(17);
  for (int trial = 0; trial < 4; ++trial) {
    const int n = 1 + trial % 2;
    const PlantModel plant = random_plant(rng, n, 2);
    const CMatrix f = model::build_F(plant);
    const CMatrix j = model::J_matrix(n);
    const CMatrix nd = plant.N_doubled();
    CMatrix jch = CMatrix::Identity(2 * plant.m, 2 * plant.m);
    jch.bottomRightCorner(plant.m, plant.m) *= -1.0;
    const CMatrix lhs = j * f + (j * f).adjoint();
    const CMatrix rhs = -(nd.adjoint() * jch * nd);
    CHECK(numerics::max_abs(lhs - rhs) < 1e-12);
  }
}

TEST_CASE("realization input and output vectors derive from the z row") {
  std::mt19937 rng(23);
  const PlantModel plant = random_plant(rng, 2, 1);
  const auto ss = model::build_realization(plant);
  const CMatrix j = model::J_matrix(plant.n);
  const CMatrix sig = model::Sigma_matrix(plant.n);
  const CMatrix et = plant.E_tilde();
  CHECK(numerics::max_abs(ss.B - sig * j * et.transpose()) < 1e-14);
  CHECK(numerics::max_abs(ss.C - 2.0 * kI * et.conjugate() * sig) < 1e-14);
  CHECK(numerics::max_abs(ss.F - model::build_F(plant)) == 0.0);
}

TEST_CASE("perturbation bounds validate their ranges") {
  model::PerturbationBounds b;
  b.gamma = 0.5;
  CHECK_NOTHROW(b.validate());
  b.gamma = 0.0;
  CHECK_THROWS_AS(b.validate(), ValidationError);
  b.gamma = 1.0;
  b.beta = -1.0;
  CHECK_THROWS_AS(b.validate(), ValidationError);
  b.beta = 1.0;
  b.delta2 = -0.1;
  CHECK_THROWS_AS(b.validate(), ValidationError);
}

TEST_CASE("kerr_plant rejects nonpositive decay") {
  CHECK_THROWS_AS(model::kerr_plant(0.0), ValidationError);
  CHECK_THROWS_AS(model::kerr_plant(-1.0), ValidationError);
}
