#include "doctest.h"

#include <cmath>

#include "oracle.hpp"
#include "stratreg/estimator.hpp"

using namespace stratreg;

TEST_CASE("closed form on the one-point space") {
  auto c = oracle::closed_form_1d(1, 1, 1);
  CHECK(c.ell == doctest::Approx(1.0));
  CHECK(c.cost == doctest::Approx(1.0));

  c = oracle::closed_form_1d(4, 2, 1);
  CHECK(c.ell == doctest::Approx(0.31498).epsilon(1e-4));
  CHECK(c.cost == doctest::Approx(0.79370).epsilon(1e-4));

  for (double n : {1.0, 7.0, 1000.0}) CHECK(oracle::closed_form_1d(n, 1, 2).cost == doctest::Approx(std::pow(0.5, 2.0 / 3)));
  for (double n : {1.0, 7.0, 1000.0}) CHECK(oracle::closed_form_1d(n, 1, 1).cost == doctest::Approx(1.0));
}

TEST_CASE("grid oracle") {
  Vector one(1);
  one << 1.0;
  const auto unit = build_attribute_space({one}, {1.0});
  const auto g = oracle::grid_minimize_potential(unit, PlayerPopulation::identical(ProvisionCost::linear(1.0), 1),
                                                 Scalarization::trace());
  CHECK(g.profile.lambda(0, 0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(g.value == doctest::Approx(2.0).epsilon(1e-6));

  const auto space = polynomial_design_space(2, integer_grid(0, 1));
  const auto two = PlayerPopulation::build({{ProvisionCost::linear(1.0), 1}, {ProvisionCost::linear(2.0), 1}});
  CHECK_THROWS_AS(oracle::grid_minimize_potential(space, two, Scalarization::trace()), Error);
}

TEST_CASE("finite differences") {
  Matrix lam(2, 2);
  lam << 0.5, 1.0, 2.0, 3.0;
  const Matrix g = oracle::fd_gradient([](const Matrix& l) { return l.sum(); }, lam);
  CHECK((g.array() - 1.0).abs().maxCoeff() < 1e-8);
  CHECK_THROWS_AS(oracle::fd_gradient([](const Matrix&) { return kInfinity; }, lam), Error);
}

TEST_CASE("simplex grid design") {
  Vector a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  const auto e12 = build_attribute_space({a, b}, {0.5, 0.5});
  const auto s = oracle::simplex_grid_design(e12, Scalarization::trace());
  CHECK(s.nu[0] == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(s.value == doctest::Approx(4.0).epsilon(1e-6));
}
