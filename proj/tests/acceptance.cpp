// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "stratreg/analysis.hpp"
#include "stratreg/cli/commands.hpp"
#include "stratreg/estimator.hpp"
#include "stratreg/solver.hpp"

using namespace stratreg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

AttributeSpace unit() { return build_attribute_space({vec({1.0})}, {1.0}); }
AttributeSpace e12() { return build_attribute_space({vec({1, 0}), vec({0, 1})}, {0.5, 0.5}); }

std::vector<int> sweep_grid() {
  std::vector<int> n;
  for (int k = 0; k <= 8; ++k) n.push_back(3 << k);
  return n;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// 1 ---------------------------------------------------------------------------
Outcome closed_form() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int failed = 0;
  for (int n : {1, 4, 16, 64})
    for (double p : {1.0, 1.5, 2.0, 3.0})
      for (double q : {1.0, 2.0, 3.0}) {
        const auto r = minimize_potential(unit(), PlayerPopulation::identical(ProvisionCost::monomial(p), n),
                                          Scalarization::pow_trace(q));
        const double e = rel(r.estimation_cost, oracle::closed_form_1d(n, p, q).cost);
        worst = std::max(worst, e);
        if (!r.converged || e > 1e-5) ++failed;
      }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {failed == 0 && secs < 5.0, fmt("48 instances, max rel err %.2e, %d off, %.2f s", worst, failed, secs)};
}

// 2 ---------------------------------------------------------------------------
Outcome scaling() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto space = polynomial_design_space(4, integer_grid(-10, 10));
  const auto F = Scalarization::trace();
  double cost_err = 0.0, prof_err = 0.0;
  bool ok = true;
  for (double p : {1.0, 1.2, 2.0}) {
    const auto single = minimize_potential(space, PlayerPopulation::identical(ProvisionCost::monomial(p), 1), F);
    ok = ok && single.converged;
    for (int n : {2, 4, 8, 16}) {
      const auto r = minimize_potential(space, PlayerPopulation::identical(ProvisionCost::monomial(p), n), F);
      const auto pred = scaling_prediction(n, p, 1.0, single.profile, single.estimation_cost);
      const double ce = rel(r.estimation_cost, pred.predicted_cost);
      const double pe = (r.profile.lambda - pred.profile.lambda).cwiseAbs().maxCoeff();
      cost_err = std::max(cost_err, ce);
      prof_err = std::max(prof_err, pe);
      ok = ok && r.converged && ce <= 1e-4 && pe <= 1e-4;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {ok && secs < 60.0,
          fmt("max cost rel err %.2e, max profile err %.2e, %.2f s", cost_err, prof_err, secs)};
}

// 3 ---------------------------------------------------------------------------
Outcome design_equivalence() {
  const auto F = Scalarization::trace();
  bool ok = true;
  std::string detail;
  for (int d : {3, 4}) {
    const auto space = polynomial_design_space(d, integer_grid(-10, 10));
    const auto star = solve_optimal_design(space, F);
    const auto pop = PlayerPopulation::build({{ProvisionCost::linear(1.0), 5}, {ProvisionCost::linear(2.0), 5}});
    const auto eq = minimize_potential(space, pop, F);
    const auto gap = design_equivalence_gap(space, F, equilibrium_design_measure(space, pop, eq.profile), star.design);
    const bool pass = star.converged && eq.converged && std::abs(gap.criterion_gap) <= 1e-6 * (1.0 + star.criterion);
    ok = ok && pass;
    detail += fmt("d=%d linear gap %.2e; ", d, gap.criterion_gap);
  }
  const auto space = polynomial_design_space(4, integer_grid(-10, 10));
  const auto star = solve_optimal_design(space, F);
  const auto cubic = PlayerPopulation::identical(ProvisionCost::monomial(3.0), 10);
  const auto eq = minimize_potential(space, cubic, F);
  const auto nu = equilibrium_design_measure(space, cubic, eq.profile);
  const auto gap = design_equivalence_gap(space, F, nu, star.design);
  const double at0 = nu.normalized().nu[10];
  ok = ok && eq.converged && gap.criterion_gap > 1e-3 && at0 > 0.0 && star.design.nu[10] < 1e-8;
  detail += fmt("p=3 gap %.3g, nu_eq(0) %.3g, nu*(0) %.1e", gap.criterion_gap, at0, star.design.nu[10]);
  return {ok, detail};
}

// 4 ---------------------------------------------------------------------------
Outcome sandwich() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (auto [pmin, pmax] : {std::pair{1.0, 4.0}, std::pair{2.0, 3.0}}) {
    std::vector<std::pair<double, double>> pts;
    bool converged = true;
    for (int n : sweep_grid()) {
      const auto pop = PlayerPopulation::build(
          {{ProvisionCost::monomial(pmin), 2 * n / 3}, {ProvisionCost::monomial(pmax), n / 3}});
      const auto r = minimize_potential(unit(), pop, Scalarization::trace());
      converged = converged && r.converged;
      pts.emplace_back(n, r.estimation_cost);
    }
    const auto b = asymptotic_bounds(pmin, pmax, 1.0);
    const bool inside = rate_sandwich(pts, b).all_inside;
    const double slope = rate_fit(pts).slope;
    const double reference = -(pmax - 1.0) / (pmax + 1.0);
    const bool pass = converged && inside && std::abs(slope - reference) <= 0.05;
    ok = ok && pass;
    detail += fmt("(%g,%g): inside=%d slope %.4f vs %.4f; ", pmin, pmax, inside, slope, reference);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {ok && secs < 300.0, detail + fmt("%.2f s", secs)};
}

// 5 ---------------------------------------------------------------------------
Outcome linear_inconsistency() {
  std::vector<std::pair<double, double>> pts;
  bool converged = true;
  for (int n : sweep_grid()) {
    const auto r = minimize_potential(unit(), PlayerPopulation::identical(ProvisionCost::linear(1.0), n),
                                      Scalarization::trace());
    converged = converged && r.converged;
    pts.emplace_back(n, r.estimation_cost);
  }
  const double slope = rate_fit(pts).slope;
  return {converged && std::abs(slope) <= 0.01, fmt("slope %.2e over n = 3..768", slope)};
}

// 6 ---------------------------------------------------------------------------
Outcome price_of_anarchy() {
  bool bounded = true, tight = true;
  std::string detail;
  for (auto [p, q] : {std::pair{1.0, 1.0}, std::pair{2.0, 1.0}, std::pair{1.0, 2.0}}) {
    double ratio = 0.0;
    for (int n : {1, 4, 16, 64, 256}) {
      const auto r = poa_report(unit(), PlayerPopulation::identical(ProvisionCost::monomial(p), n),
                                Scalarization::pow_trace(q));
      bounded = bounded && r.poa <= r.bound * (1.0 + 1e-6);
      ratio = r.poa / r.bound;
    }
    tight = tight && ratio >= 0.8;
    detail += fmt("(p,q)=(%g,%g) PoA/bound at 256 = %.4f; ", p, q, ratio);
  }
  return {bounded && tight, detail + fmt("all within bound=%d", bounded)};
}

// 7 ---------------------------------------------------------------------------
Outcome ols_counterexample() {
  const double p = 3.0;
  bool ok = true;
  std::string detail;
  for (int n : {9, 99, 999}) {
    const double nn = n;
    const auto pop = PlayerPopulation::build(
        {{ProvisionCost::monomial(p), n}, {ProvisionCost::linear((nn + 1) * (nn + 1)), 1}});
    const auto kernel = ols_kernel(unit(), n + 1, OlsExact{});
    const auto r = minimize_ols_potential(unit(), pop, Scalarization::trace(), kernel);
    const double truth =
        nn * std::pow(p, 1.0 / (p + 1)) * std::pow(nn + 1, 2.0 / (p + 1) - 2.0) + 1.0;
    const double e = rel(r.estimation_cost, truth);
    ok = ok && r.converged && r.estimation_cost >= 1.0 && e <= 0.02;
    detail += fmt("n=%d C_ols %.6f (rel err %.1e); ", n, r.estimation_cost, e);
  }
  return {ok, detail};
}

// 8 ---------------------------------------------------------------------------
Outcome gradients() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto pick = [&](int k) { return static_cast<int>(unif(rng) * k) % k; };

  auto random_cost = [&](int kind) {
    switch (kind) {
      case 0: return ProvisionCost::linear(0.5 + 2.0 * unif(rng));
      case 1: return ProvisionCost::monomial(1.0 + 3.0 * unif(rng));
      case 2: return ProvisionCost::polynomial({0.5 + unif(rng), 0.5 + unif(rng)}, {1.0 + unif(rng), 2.0 + 2.0 * unif(rng)});
      case 3: return ProvisionCost::cosh_minus_one();
      default: {
        const double a = 1.0 + unif(rng);
        return ProvisionCost::custom("a*l^2+l", [a](double l) { return a * l * l + l; },
                                     [a](double l) { return 2.0 * a * l + 1.0; }, 1.0, 2.0);
      }
    }
  };

  double worst = 0.0;
  int failed = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const int d = 1 + pick(3);
    const int m = d + 1 + pick(3);
    std::vector<Vector> pts;
    std::vector<double> mu;
    for (int i = 0; i < m; ++i) {
      Vector x(d);
      for (int k = 0; k < d; ++k) x[k] = gauss(rng);
      pts.push_back(x);
      mu.push_back(0.2 + unif(rng));
    }
    const double total = std::accumulate(mu.begin(), mu.end(), 0.0);
    for (double& v : mu) v /= total;
    const auto space = build_attribute_space(pts, mu);

    std::vector<CostType> types;
    const int t = 1 + pick(3);
    for (int k = 0; k < t; ++k) types.push_back({random_cost((inst + k) % 5), 1 + pick(4)});
    const auto pop = PlayerPopulation::build(types);

    std::vector<Vector> z{Vector::Ones(d), pts.front()};
    std::vector<Scalarization> fs{Scalarization::trace(), Scalarization::pow_trace(1.0 + 2.0 * unif(rng)),
                                  Scalarization::squared_frobenius(), Scalarization::average_mse(z, {0.3, 0.7}),
                                  Scalarization::point_mse(z)};
    const auto& F = fs[static_cast<std::size_t>(inst % 5)];

    Matrix lam(static_cast<Eigen::Index>(t), m);
    for (Eigen::Index i = 0; i < lam.size(); ++i) lam.data()[i] = 0.3 + 1.5 * unif(rng);
    const Matrix g = potential_gradient(space, pop, {lam}, F);
    const Matrix fd = oracle::fd_gradient([&](const Matrix& l) { return potential(space, pop, {l}, F); }, lam);
    const double err = (g - fd).cwiseAbs().maxCoeff() / std::max(1.0, fd.cwiseAbs().maxCoeff());
    worst = std::max(worst, err);
    if (err > 1e-6) ++failed;
  }
  return {failed == 0, fmt("50 instances, max rel err %.2e, %d off", worst, failed)};
}

// 9 ---------------------------------------------------------------------------
Outcome monte_carlo() {
  bool ok = true;
  std::string detail;
  const auto one = PlayerPopulation::identical(ProvisionCost::linear(1.0), 1);
  auto s = simulate_gls(unit(), one, PrecisionProfile{Matrix::Constant(1, 1, 4.0)}, {vec({1.0})}, 100000, 7);
  double worst = s.cov_z.cwiseAbs().maxCoeff();
  ok = ok && worst <= 3.0;
  detail += fmt("X={1}: var %.5f vs %.5f, |z| %.2f; ", s.empirical_cov(0, 0), s.mean_draw_cov(0, 0), worst);

  const auto twenty = PlayerPopulation::identical(ProvisionCost::linear(1.0), 20);
  Matrix lam(1, 2);
  lam << 1.5, 0.5;
  s = simulate_gls(e12(), twenty, {lam}, {vec({1.0, -2.0})}, 100000, 8);
  worst = s.cov_z.cwiseAbs().maxCoeff();
  ok = ok && worst <= 3.0;
  detail += fmt("{e1,e2}: max |z| %.2f", worst);
  return {ok, detail};
}

// 10 --------------------------------------------------------------------------
Outcome equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = equivalence_check(e12(), PlayerPopulation::identical(ProvisionCost::monomial(2.0), 400),
                                     Scalarization::trace(), 0.25, 50, 12345);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {rep.pass_rate == 1.0 && secs < 120.0,
          fmt("pass rate %.3f over %zu trials, floor %.4f, D_n %.4f, %.2f s", rep.pass_rate, rep.trials.size(),
              rep.probability_floor, rep.d_n, secs)};
}

// 11 --------------------------------------------------------------------------
Outcome uniqueness() {
  struct Game {
    AttributeSpace space;
    PlayerPopulation pop;
    Scalarization F;
  };
  const std::vector<Game> games{
      {polynomial_design_space(3, integer_grid(-5, 5)),
       PlayerPopulation::build({{ProvisionCost::linear(1.0), 3}, {ProvisionCost::linear(2.5), 4}}),
       Scalarization::trace()},
      {polynomial_design_space(4, integer_grid(-10, 10)), PlayerPopulation::identical(ProvisionCost::linear(1.0), 10),
       Scalarization::trace()},
      {polynomial_design_space(2, integer_grid(-3, 3)), PlayerPopulation::identical(ProvisionCost::linear(3.0), 6),
       Scalarization::squared_frobenius()}};
  double worst = 0.0;
  bool ok = true;
  for (const auto& g : games) {
    std::vector<double> costs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      SolverOptions o;
      o.random_init = true;
      o.seed = seed;
      const auto r = minimize_potential(g.space, g.pop, g.F, o);
      ok = ok && r.converged;
      costs.push_back(r.estimation_cost);
    }
    for (double c : costs) worst = std::max(worst, rel(c, costs.front()));
  }
  return {ok && worst <= 1e-6, fmt("3 games x 5 starts, max rel spread %.2e", worst)};
}

// 12 --------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const std::string text = "[sweep]\nfamily = identical\np = 1 1.5 2 3\nq = 1 2\n";
  const fs::path base = fs::temp_directory_path() / "stratreg_acceptance";
  fs::remove_all(base);
  std::vector<fs::path> dirs;
  for (int run = 0; run < 3; ++run) {
    cli::RunContext ctx;
    ctx.config = cli::parse_config(text);
    ctx.seed = 99;
    ctx.jobs = run == 2 ? 1 : 4;
    ctx.out = base / std::to_string(run);
    ctx.config_hash = cli::config_hash(text, ctx.seed, false);
    if (cli::cmd_sweep(ctx) != 0) return {false, "sweep did not converge"};
    dirs.push_back(ctx.out);
  }
  bool same = true;
  for (const char* f : {"sweep.csv", "rates.csv"})
    for (std::size_t k = 1; k < dirs.size(); ++k) same = same && slurp(dirs[0] / f) == slurp(dirs[k] / f);
  const auto bytes = slurp(dirs[0] / "sweep.csv").size();
  fs::remove_all(base);
  return {same, fmt("3 runs (jobs 4, 4, 1), sweep.csv %zu bytes, identical=%d", bytes, same)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"closed-form agreement on X={1}", closed_form},
      {"scaling law on the degree-4 polynomial space", scaling},
      {"equilibrium vs optimal design", design_equivalence},
      {"rate sandwich, heterogeneous populations", sandwich},
      {"inconsistency with linear costs", linear_inconsistency},
      {"price of anarchy bound and tightness", price_of_anarchy},
      {"OLS counterexample", ols_counterexample},
      {"potential gradients vs finite differences", gradients},
      {"Monte Carlo covariance", monte_carlo},
      {"complete-information equivalence", equivalence},
      {"estimation cost independent of the start", uniqueness},
      {"sweep determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
