#include "stratreg/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace stratreg {

DesignMeasure equilibrium_design_measure(const AttributeSpace& space, const PlayerPopulation& pop,
                                         const PrecisionProfile& profile) {
  profile.validate(pop.types(), space.size());
  Vector nu = Vector::Zero(static_cast<Eigen::Index>(space.size()));
  for (std::size_t x = 0; x < space.size(); ++x) {
    double total = 0.0;
    for (std::size_t t = 0; t < pop.types(); ++t)
      total += pop.type(t).count * profile.lambda(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(x));
    nu[static_cast<Eigen::Index>(x)] = space.mu(x) * total;
  }
  return {nu};
}

DesignGap design_equivalence_gap(const AttributeSpace& space, const Scalarization& F, const DesignMeasure& nu,
                                 const DesignMeasure& nu_star) {
  const DesignMeasure a = nu.normalized();
  const DesignMeasure b = nu_star.normalized();
  DesignGap gap;
  gap.total_variation = 0.5 * (a.nu - b.nu).cwiseAbs().sum();
  gap.criterion_gap = design_criterion(space, F, a.nu) - design_criterion(space, F, b.nu);
  return gap;
}

ScalingPrediction scaling_prediction(int n, double p, double q, const PrecisionProfile& single, double single_cost) {
  if (n < 1) throw Error(ErrorCode::InvalidPopulation, "n must be at least 1");
  ScalingPrediction out;
  out.profile.lambda = std::pow(n, -(1.0 + q) / (p + q)) * single.lambda;
  out.predicted_cost = std::pow(n, -q * (p - 1.0) / (p + q)) * single_cost;
  return out;
}

ScalingPrediction scaling_prediction(const AttributeSpace& space, const PlayerPopulation& pop,
                                     const Scalarization& F, const SolverOptions& opts) {
  const auto p = pop.type(0).cost.monomial_exponent();
  if (!p) throw Error(ErrorCode::NonMonomial, "scaling prediction needs identical monomial costs");
  for (const auto& t : pop.all())
    if (t.cost.monomial_exponent() != p)
      throw Error(ErrorCode::NonMonomial, "scaling prediction needs identical monomial costs");

  const PlayerPopulation one = PlayerPopulation::identical(pop.type(0).cost, 1);
  SolverOptions o = opts;
  o.init.reset();
  const EquilibriumResult base = minimize_potential(space, one, F, o);
  if (!base.converged) throw Error(ErrorCode::NotConverged, "single-player equilibrium did not converge");

  ScalingPrediction out = scaling_prediction(pop.total(), *p, F.q(), base.profile, base.estimation_cost);
  out.profile.lambda = out.profile.lambda.replicate(static_cast<Eigen::Index>(pop.types()), 1).eval();
  return out;
}

AsymptoticBounds asymptotic_bounds(double p_min, double p_max, double q) {
  if (!(p_min >= 1.0) || !(p_max >= p_min) || !(q >= 1.0) || std::isnan(p_max))
    throw Error(ErrorCode::BadExponents, "need 1 <= p_min <= p_max and q >= 1");
  AsymptoticBounds b;
  b.upper_exponent = q * (p_min - 1.0) / (p_min + q);
  b.finite_p_max = std::isfinite(p_max);
  if (b.finite_p_max)
    b.alpha = q * (p_max - p_min) * (q + 1.0) / (p_max * (q + p_min));
  else
    b.alpha = q * (q + 1.0) / (q + p_min);
  b.lower_exponent = b.upper_exponent + b.alpha;
  return b;
}

double degradation_ratio(double n, double p, double q) { return std::pow(n, q * (q + 1.0) / (p + q)); }

PoaReport poa_report(const AttributeSpace& space, const PlayerPopulation& pop, const Scalarization& F,
                     const SolverOptions& opts) {
  const EquilibriumResult eq = minimize_potential(space, pop, F, opts);
  if (!eq.converged) throw Error(ErrorCode::NotConverged, "equilibrium solve did not converge");
  const EquilibriumResult opt = minimize_social_cost(space, pop, F, opts);
  if (!opt.converged) throw Error(ErrorCode::NotConverged, "social optimum solve did not converge");

  PoaReport r;
  r.equilibrium_social_cost = social_cost(space, pop, eq.profile, F);
  r.optimal_social_cost = opt.potential_value;
  r.poa = r.equilibrium_social_cost / r.optimal_social_cost;
  r.bound = std::pow(static_cast<double>(pop.total()), F.q() / (pop.p_min() + F.q()));
  r.within_bound = r.poa <= r.bound * (1.0 + 1e-6);
  return r;
}

RateFit rate_fit(std::vector<std::pair<double, double>> points) {
  if (points.size() < 3) throw Error(ErrorCode::TooFewPoints, "rate fit needs at least 3 points");
  double sx = 0.0, sy = 0.0;
  for (const auto& [n, v] : points) {
    if (!(n > 0.0) || !(v > 0.0)) throw Error(ErrorCode::NonPositiveValue, "rate fit needs positive n and values");
    sx += std::log(n);
    sy += std::log(v);
  }
  const double k = static_cast<double>(points.size());
  const double mx = sx / k, my = sy / k;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [n, v] : points) {
    const double dx = std::log(n) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(v) - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::TooFewPoints, "rate fit needs at least two distinct n");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  for (const auto& [n, v] : points)
    fit.residual = std::max(fit.residual, std::abs(std::log(v) - fit.intercept - fit.slope * std::log(n)));
  fit.points = std::move(points);
  return fit;
}

SandwichCheck rate_sandwich(const std::vector<std::pair<double, double>>& points, const AsymptoticBounds& bounds,
                            double slack) {
  if (points.empty()) throw Error(ErrorCode::TooFewPoints, "sandwich check needs points");
  SandwichCheck c;
  const double ln0 = std::log(points.front().first);
  const double lv0 = std::log(points.front().second);
  c.log_d = lv0 + bounds.lower_exponent * ln0;
  c.log_D = lv0 + bounds.upper_exponent * ln0;
  for (const auto& [n, v] : points) {
    const double ln = std::log(n), lv = std::log(v);
    const bool ok = lv >= c.log_d - bounds.lower_exponent * ln - slack && lv <= c.log_D - bounds.upper_exponent * ln + slack;
    c.inside.push_back(ok);
    c.all_inside = c.all_inside && ok;
  }
  return c;
}

EquivalenceReport equivalence_check(const AttributeSpace& space, const PlayerPopulation& pop,
                                    const Scalarization& F, double epsilon, int trials, std::uint64_t seed,
                                    const SolverOptions& opts) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw Error(ErrorCode::Config, "epsilon must lie in (0, 1/2)");
  if (trials < 1) throw Error(ErrorCode::Config, "trials must be at least 1");
  const double p_max = pop.p_max();
  if (!std::isfinite(p_max))
    throw Error(ErrorCode::BoundFactorUndefined, "equivalence bounds need a finite p_max");

  EquivalenceReport rep;
  double tail = 0.0;
  for (std::size_t t = 0; t < pop.types(); ++t) {
    const double nt = pop.type(t).count;
    const double delta = std::pow(nt, epsilon - 0.5);
    for (std::size_t x = 0; x < space.size(); ++x) {
      const double mu = space.mu(x);
      if (!(mu - delta > 0.0))
        throw Error(ErrorCode::BoundFactorUndefined,
                    "mu(x) - n_t^(eps-1/2) <= 0; more agents or a smaller epsilon are needed");
      rep.r_plus = std::max(rep.r_plus, (mu + delta) / mu);
      rep.r_minus = std::max(rep.r_minus, mu / (mu - delta));
    }
    tail += 2.0 * std::exp(-2.0 * std::pow(nt, 2.0 * epsilon));
  }
  const double q = F.q();
  rep.d_n = std::max(rep.r_plus, std::pow(rep.r_minus, q));
  rep.d_n_prime = std::max(rep.r_minus, std::pow(rep.r_plus, q));
  rep.probability_floor = std::max(0.0, 1.0 - static_cast<double>(space.size()) * tail);
  rep.allowance = 3.0 * std::sqrt(rep.probability_floor * (1.0 - rep.probability_floor) / trials);

  const EquilibriumResult star = minimize_potential(space, pop, F, opts);
  if (!star.converged) throw Error(ErrorCode::NotConverged, "uncertainty-model equilibrium did not converge");
  rep.phi_star = star.potential_value;
  const double lower_factor = std::pow(rep.r_plus, p_max - 1.0);
  const double upper_factor = std::pow(rep.r_minus, p_max - 1.0);
  rep.sandwich_low = rep.phi_star / lower_factor;
  rep.sandwich_high = upper_factor * rep.phi_star;

  // Solver tolerance leaves a relative error far below this margin.
  constexpr double kSlack = 1e-7;
  auto le = [](double a, double b) { return a <= b * (1.0 + kSlack) + kSlack * 1e-3; };

  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(space.mu().begin(), space.mu().end());
  int passes = 0;
  for (int k = 0; k < trials; ++k) {
    EquivalenceTrial tr;
    tr.counts = Matrix::Zero(static_cast<Eigen::Index>(pop.types()), static_cast<Eigen::Index>(space.size()));
    for (std::size_t t = 0; t < pop.types(); ++t)
      for (int i = 0; i < pop.type(t).count; ++i) tr.counts(static_cast<Eigen::Index>(t), pick(rng)) += 1.0;

    tr.concentrated = true;
    for (std::size_t t = 0; t < pop.types(); ++t) {
      const double nt = pop.type(t).count;
      const double delta = std::pow(nt, epsilon - 0.5);
      for (std::size_t x = 0; x < space.size(); ++x)
        if (std::abs(tr.counts(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(x)) / nt - space.mu(x)) > delta)
          tr.concentrated = false;
    }

    const EquilibriumResult ci = minimize_complete_info_potential(space, pop, tr.counts, F, opts);
    if (!ci.converged) throw Error(ErrorCode::NotConverged, "complete-information equilibrium did not converge");
    tr.phi_ci_star = ci.potential_value;
    tr.phi_ci_at_star = complete_info_potential(space, pop, tr.counts, star.profile, F);
    tr.phi_at_ci_star = potential(space, pop, ci.profile, F);

    tr.sandwich = le(rep.sandwich_low, tr.phi_ci_star) && le(tr.phi_ci_star, rep.sandwich_high);
    tr.exchange_ci = le(tr.phi_ci_at_star, rep.d_n * lower_factor * tr.phi_ci_star);
    tr.exchange = le(tr.phi_at_ci_star, rep.d_n_prime * upper_factor * rep.phi_star);
    if (tr.pass()) ++passes;
    rep.trials.push_back(std::move(tr));
  }
  rep.pass_rate = static_cast<double>(passes) / trials;
  rep.passed = rep.pass_rate >= rep.probability_floor - rep.allowance;
  return rep;
}

}  // namespace stratreg
