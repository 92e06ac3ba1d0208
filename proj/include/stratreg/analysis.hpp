#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "stratreg/model.hpp"
#include "stratreg/solver.hpp"

namespace stratreg {

/// ν(x) = μ(x)·Σ_t n_t λ_t(x); unnormalized, total mass b = ν.mass().
DesignMeasure equilibrium_design_measure(const AttributeSpace& space, const PlayerPopulation& pop,
                                         const PrecisionProfile& profile);

struct DesignGap {
  double total_variation = 0.0;  // ½ Σ |ν/b − ν*|
  double criterion_gap = 0.0;    // criterion(ν/b) − criterion(ν*)
};

/// Throws ZeroMass when either measure has no mass.
DesignGap design_equivalence_gap(const AttributeSpace& space, const Scalarization& F, const DesignMeasure& nu,
                                 const DesignMeasure& nu_star);

struct ScalingPrediction {
  PrecisionProfile profile;
  double predicted_cost = 0.0;
};

/// Per-player profile n^{−(1+q)/(p+q)}·λ° and cost n^{−q(p−1)/(p+q)}·C(λ°).
ScalingPrediction scaling_prediction(int n, double p, double q, const PrecisionProfile& single, double single_cost);

/// Same, with λ° the single-player equilibrium of the given instance. All types
/// must share one monomial cost ℓ^p (throws NonMonomial otherwise).
ScalingPrediction scaling_prediction(const AttributeSpace& space, const PlayerPopulation& pop,
                                     const Scalarization& F, const SolverOptions& opts = {});

struct AsymptoticBounds {
  double upper_exponent = 0.0;  // q(p_min−1)/(p_min+q)
  double alpha = 0.0;           // q(p_max−p_min)(q+1)/(p_max(q+p_min))
  double lower_exponent = 0.0;  // upper + α
  bool finite_p_max = true;     // α is its p_max → ∞ limit otherwise
};

/// Throws BadExponents unless 1 ≤ p_min ≤ p_max and q ≥ 1.
AsymptoticBounds asymptotic_bounds(double p_min, double p_max, double q);

/// n^{q(q+1)/(p+q)}.
double degradation_ratio(double n, double p, double q);

struct PoaReport {
  double poa = 1.0;
  double bound = 1.0;  // n^{q/(p_min+q)}
  double equilibrium_social_cost = 0.0;
  double optimal_social_cost = 0.0;
  bool within_bound = true;  // poa ≤ bound·(1 + 1e-6)
};

/// Throws NotConverged when either solve fails.
PoaReport poa_report(const AttributeSpace& space, const PlayerPopulation& pop, const Scalarization& F,
                     const SolverOptions& opts = {});

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // max |log value − fit|
  std::vector<std::pair<double, double>> points;
};

/// Least squares of log value on log n. Throws TooFewPoints, NonPositiveValue.
RateFit rate_fit(std::vector<std::pair<double, double>> points);

struct SandwichCheck {
  double log_d = 0.0;  // calibrated at the smallest n
  double log_D = 0.0;
  std::vector<bool> inside;
  bool all_inside = true;
};

/// log d − lower·log n ≤ log v ≤ log D − upper·log n with d, D fixed at the first point.
/// slack is in log units and absorbs the solver tolerance.
SandwichCheck rate_sandwich(const std::vector<std::pair<double, double>>& points, const AsymptoticBounds& bounds,
                            double slack = 1e-6);

struct EquivalenceTrial {
  Matrix counts;
  bool concentrated = false;  // every |n_t^x/n_t − μ(x)| ≤ n_t^{ε−1/2}
  double phi_ci_star = 0.0;   // φ_ci(λ_ci*, X)
  double phi_ci_at_star = 0.0;  // φ_ci(λ*, X)
  double phi_at_ci_star = 0.0;  // φ(λ_ci*)
  bool sandwich = false;
  bool exchange_ci = false;  // φ_ci(λ*, X) ≤ D_n·r₊^{p_max−1}·φ_ci*
  bool exchange = false;     // φ(λ_ci*) ≤ D_n′·r₋^{p_max−1}·φ*
  bool pass() const { return sandwich && exchange_ci && exchange; }
};

struct EquivalenceReport {
  double phi_star = 0.0;
  double r_plus = 1.0;   // max (μ+δ)/μ
  double r_minus = 1.0;  // max μ/(μ−δ)
  double d_n = 1.0;
  double d_n_prime = 1.0;
  double sandwich_low = 0.0;   // φ*/r₊^{p_max−1}
  double sandwich_high = 0.0;  // r₋^{p_max−1}·φ*
  double probability_floor = 0.0;
  double allowance = 0.0;
  double pass_rate = 0.0;
  bool passed = false;
  std::vector<EquivalenceTrial> trials;
};

/// Throws BoundFactorUndefined when μ(x) ≤ n_t^{ε−1/2} for some x, t or p_max is infinite.
EquivalenceReport equivalence_check(const AttributeSpace& space, const PlayerPopulation& pop,
                                    const Scalarization& F, double epsilon, int trials, std::uint64_t seed,
                                    const SolverOptions& opts = {});

}  // namespace stratreg
