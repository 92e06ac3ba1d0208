#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "oracle.hpp"
#include "stratreg/estimator.hpp"
#include "stratreg/solver.hpp"

using namespace stratreg;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

AttributeSpace unit() { return build_attribute_space({vec({1.0})}, {1.0}); }
AttributeSpace e12() { return build_attribute_space({vec({1, 0}), vec({0, 1})}, {0.5, 0.5}); }

}  // namespace

TEST_CASE("options validation") {
  SolverOptions o;
  CHECK_NOTHROW(o.validate());
  o.tol = 0.0;
  CHECK_THROWS_AS(o.validate(), Error);
  o = {};
  o.shrink = 1.0;
  CHECK_THROWS_AS(o.validate(), Error);
  o = {};
  o.l_max = -1.0;
  CHECK_THROWS_AS(minimize_potential(unit(), PlayerPopulation::identical(ProvisionCost::linear(1.0), 1),
                                     Scalarization::trace(), o),
                  Error);
}

TEST_CASE("equilibria on small instances") {
  const auto F = Scalarization::trace();
  auto r = minimize_potential(unit(), PlayerPopulation::identical(ProvisionCost::linear(1.0), 1), F);
  REQUIRE(r.converged);
  CHECK(r.profile.lambda(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.potential_value == doctest::Approx(2.0));
  CHECK(r.estimation_cost == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.kkt_residual <= 1e-8);

  r = minimize_potential(unit(), PlayerPopulation::identical(ProvisionCost::monomial(2.0), 4), F);
  REQUIRE(r.converged);
  CHECK(r.profile.lambda(0, 0) == doctest::Approx(0.31498).epsilon(1e-4));
  CHECK(r.estimation_cost == doctest::Approx(0.79370).epsilon(1e-4));

  for (double a : {1.0, 4.0}) {
    r = minimize_potential(e12(), PlayerPopulation::identical(ProvisionCost::linear(a), 3), F);
    REQUIRE(r.converged);
    const double b = 0.5 * 3 * (r.profile.lambda(0, 0) + r.profile.lambda(0, 1));
    CHECK(b == doctest::Approx(2.0 / std::sqrt(a)).epsilon(1e-6));
    CHECK(r.estimation_cost == doctest::Approx(2.0 * std::sqrt(a)).epsilon(1e-6));
    CHECK(r.profile.lambda(0, 0) == doctest::Approx(r.profile.lambda(0, 1)).epsilon(1e-6));
  }
}

TEST_CASE("social optimum") {
  const auto F = Scalarization::trace();
  const auto one = PlayerPopulation::identical(ProvisionCost::monomial(2.0), 1);
  const auto eq = minimize_potential(e12(), one, F);
  const auto so = minimize_social_cost(e12(), one, F);
  CHECK(eq.potential_value == doctest::Approx(so.potential_value));

  auto r = minimize_social_cost(unit(), PlayerPopulation::identical(ProvisionCost::monomial(2.0), 4), F);
  REQUIRE(r.converged);
  CHECK(r.profile.lambda(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(r.potential_value == doctest::Approx(3.0));

  r = minimize_social_cost(unit(), PlayerPopulation::identical(ProvisionCost::linear(1.0), 2), F);
  REQUIRE(r.converged);
  CHECK(2.0 * r.profile.lambda(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-6));
  CHECK(r.potential_value == doctest::Approx(2.0 * std::sqrt(2.0)));
}

TEST_CASE("solver agrees with the brute-force grid oracle") {
  const auto F = Scalarization::trace();
  const auto lin = PlayerPopulation::identical(ProvisionCost::linear(1.0), 1);
  const auto g1 = oracle::grid_minimize_potential(unit(), lin, F);
  CHECK(g1.profile.lambda(0, 0) == doctest::Approx(1.0).epsilon(2e-3));

  const auto p2 = PlayerPopulation::identical(ProvisionCost::monomial(2.0), 4);
  const auto g2 = oracle::grid_minimize_potential(unit(), p2, F);
  const auto cf = oracle::closed_form_1d(4, 2, 1);
  CHECK(gls_cost(unit(), p2, g2.profile, F) == doctest::Approx(cf.cost).epsilon(1e-4));

  const auto g3 = oracle::grid_minimize_potential(e12(), lin, F);
  CHECK(std::abs(g3.profile.lambda(0, 0) - g3.profile.lambda(0, 1)) <= 2e-3);
  const auto s3 = minimize_potential(e12(), lin, F);
  CHECK(s3.potential_value <= g3.value + 1e-9);
  CHECK(s3.estimation_cost == doctest::Approx(gls_cost(e12(), lin, g3.profile, F)).epsilon(1e-4));

  const auto mixed = PlayerPopulation::build({{ProvisionCost::monomial(2.0), 2}, {ProvisionCost::cosh_minus_one(), 1}});
  const auto three = build_attribute_space({vec({1.0})}, {1.0});
  const auto gm = oracle::grid_minimize_potential(three, mixed, F);
  const auto sm = minimize_potential(three, mixed, F);
  CHECK(sm.potential_value <= gm.value + 1e-9);
  CHECK(sm.potential_value == doctest::Approx(gm.value).epsilon(1e-4));
}

TEST_CASE("KKT residual") {
  const auto F = Scalarization::trace();
  const auto pop = PlayerPopulation::identical(ProvisionCost::monomial(2.0), 4);
  const auto cf = oracle::closed_form_1d(4, 2, 1);
  CHECK(kkt_residual(unit(), pop, PrecisionProfile::constant(1, 1, cf.ell), F) <= 1e-10);
  CHECK(kkt_residual(unit(), pop, PrecisionProfile::constant(1, 1, 2 * cf.ell), F) > 0.0);
  CHECK(kkt_residual(Matrix::Constant(1, 2, 0.3), Matrix::Zero(1, 2)) == 0.0);
  CHECK(kkt_residual(Matrix::Zero(1, 1), Matrix::Constant(1, 1, 2.0)) == 0.0);
  CHECK(kkt_residual(Matrix::Zero(1, 1), Matrix::Constant(1, 1, -2.0)) == 2.0);
}

TEST_CASE("potential trace is nonincreasing") {
  const auto space = polynomial_design_space(4, integer_grid(-10, 10));
  SolverOptions o;
  o.record_trace = true;
  for (double p : {1.0, 1.2, 3.0}) {
    const auto r = minimize_potential(space, PlayerPopulation::identical(ProvisionCost::monomial(p), 5),
                                      Scalarization::trace(), o);
    CAPTURE(p);
    CHECK(r.converged);
    REQUIRE(r.trace.size() >= 2);
    for (std::size_t k = 1; k < r.trace.size(); ++k)
      CHECK(r.trace[k] <= r.trace[k - 1] + 1e-14 * std::abs(r.trace[k - 1]));
  }
}

TEST_CASE("near-linear costs converge") {
  const auto space = polynomial_design_space(4, integer_grid(-10, 10));
  const auto r = minimize_potential(space, PlayerPopulation::identical(ProvisionCost::monomial(1.01), 10),
                                    Scalarization::trace());
  CHECK(r.converged);
  CHECK(r.kkt_residual <= 1e-8);
}

TEST_CASE("linear games: estimation cost does not depend on the start") {
  const auto space = polynomial_design_space(3, integer_grid(-3, 3));
  const auto pop = PlayerPopulation::build({{ProvisionCost::linear(1.0), 2}, {ProvisionCost::linear(2.0), 3}});
  std::vector<double> costs;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SolverOptions o;
    o.random_init = true;
    o.seed = seed;
    const auto r = minimize_potential(space, pop, Scalarization::trace(), o);
    REQUIRE(r.converged);
    costs.push_back(r.estimation_cost);
  }
  for (double c : costs) CHECK(c == doctest::Approx(costs.front()).epsilon(1e-6));
}

TEST_CASE("complete information equilibrium") {
  const auto pop = PlayerPopulation::identical(ProvisionCost::monomial(2.0), 4);
  Matrix counts(1, 2);
  counts << 2, 2;
  const auto ci = minimize_complete_info_potential(e12(), pop, counts, Scalarization::trace());
  const auto un = minimize_potential(e12(), pop, Scalarization::trace());
  REQUIRE(ci.converged);
  CHECK(ci.estimation_cost == doctest::Approx(un.estimation_cost).epsilon(1e-6));

  const auto space3 = build_attribute_space({vec({1, 0}), vec({0, 1}), vec({1, 1})}, {0.3, 0.3, 0.4});
  Matrix c3(1, 3);
  c3 << 2, 2, 0;
  const auto r = minimize_complete_info_potential(space3, pop, c3, Scalarization::trace());
  CHECK(r.converged);
  CHECK(r.profile.lambda(0, 2) == 0.0);
  c3 << 2, 1, 0;
  CHECK_THROWS_AS(minimize_complete_info_potential(space3, pop, c3, Scalarization::trace()), Error);
}

TEST_CASE("OLS equilibrium on the one-point space") {
  const auto pop = PlayerPopulation::build({{ProvisionCost::monomial(3.0), 9}, {ProvisionCost::linear(100.0), 1}});
  const auto kernel = ols_kernel(unit(), 10, OlsExact{});
  const auto r = minimize_ols_potential(unit(), pop, Scalarization::trace(), kernel);
  REQUIRE(r.converged);
  CHECK(r.estimation_cost == doctest::Approx(0.09 * std::pow(3.0, 0.25) * std::sqrt(10.0) + 1).epsilon(1e-6));
  CHECK_THROWS_AS(minimize_ols_potential(unit(), pop, Scalarization::trace(), ols_kernel(unit(), 3, OlsExact{})),
                  Error);
}

TEST_CASE("simplex projection") {
  const Vector p = project_to_simplex(vec({0.2, 0.3, 0.5}));
  CHECK(p.isApprox(vec({0.2, 0.3, 0.5})));
  const Vector q = project_to_simplex(vec({2.0, 0.0, -1.0}));
  CHECK(q.isApprox(vec({1.0, 0.0, 0.0})));
  const Vector r = project_to_simplex(vec({0.5, 0.5, 0.5, -3}));
  CHECK(r.sum() == doctest::Approx(1.0));
  CHECK(r[3] == 0.0);
  CHECK(r[0] == doctest::Approx(1.0 / 3));
}

TEST_CASE("optimal design") {
  const auto F = Scalarization::trace();
  auto d = solve_optimal_design(e12(), F);
  REQUIRE(d.converged);
  CHECK(d.design.nu[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(d.criterion == doctest::Approx(4.0));

  d = solve_optimal_design(unit(), F);
  CHECK(d.design.nu[0] == doctest::Approx(1.0));
  CHECK(d.criterion == doctest::Approx(1.0));

  const auto p4 = polynomial_design_space(4, integer_grid(-10, 10));
  d = solve_optimal_design(p4, F);
  REQUIRE(d.converged);
  CHECK(d.design.nu[10] < 1e-8);
  const auto fw = frank_wolfe_design(p4, F);
  CHECK(fw.criterion == doctest::Approx(d.criterion).epsilon(1e-6));

  const auto p3 = polynomial_design_space(3, integer_grid(-10, 10));
  d = solve_optimal_design(p3, F);
  REQUIRE(d.converged);
  const auto max_at = std::max_element(d.design.nu.data(), d.design.nu.data() + d.design.nu.size()) - d.design.nu.data();
  CHECK(max_at == 10);

  const auto tri = build_attribute_space({vec({1, 0}), vec({0, 1}), vec({1, 1})}, {0.2, 0.3, 0.5});
  d = solve_optimal_design(tri, F);
  const auto brute = oracle::simplex_grid_design(tri, F);
  CHECK(d.criterion <= brute.value + 1e-9);
  CHECK(d.criterion == doctest::Approx(brute.value).epsilon(1e-4));
}

TEST_CASE("optimal design is invariant to permuting the attribute list") {
  std::vector<Vector> pts;
  std::vector<double> mu;
  for (int x = -4; x <= 4; ++x) {
    pts.push_back(vec({1.0, double(x), double(x * x)}));
    mu.push_back(1.0 / 9);
  }
  const auto a = build_attribute_space(pts, mu);
  std::vector<Vector> rev(pts.rbegin(), pts.rend());
  std::swap(rev[0], rev[4]);
  const auto b = build_attribute_space(rev, mu);
  for (const auto& F : {Scalarization::trace(), Scalarization::squared_frobenius()}) {
    const auto da = solve_optimal_design(a, F);
    const auto db = solve_optimal_design(b, F);
    CHECK(da.criterion == doctest::Approx(db.criterion).epsilon(1e-8));
  }
}
