#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "stratreg/estimator.hpp"
#include "stratreg/model.hpp"

namespace stratreg {

struct SolverOptions {
  double tol = 1e-8;
  int max_iters = 200000;
  double armijo_c = 1e-4;
  double shrink = 0.5;
  double initial_step = 1.0;
  double min_step = 1e-12;
  double max_step = 1e6;
  double l_max = 1e6;
  /// Starting profile; defaults to 1/n everywhere (or a random draw, see below).
  std::optional<Matrix> init;
  /// Draw the starting profile uniformly in [0.1/n, 2/n] from `seed`.
  bool random_init = false;
  std::uint64_t seed = 0;
  /// Record the objective at every accepted iterate.
  bool record_trace = false;

  /// Throws Config on out-of-range settings.
  void validate() const;
};

struct EquilibriumResult {
  PrecisionProfile profile;
  double potential_value = kInfinity;  // objective that was minimized
  double estimation_cost = kInfinity;
  double kkt_residual = kInfinity;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

/// Nash equilibrium as the minimizer of the potential. A result that ran out
/// of iterations is returned with converged = false.
EquilibriumResult minimize_potential(const AttributeSpace& space, const PlayerPopulation& pop,
                                     const Scalarization& F, const SolverOptions& opts = {});

/// Social optimum (estimation term weighted by n).
EquilibriumResult minimize_social_cost(const AttributeSpace& space, const PlayerPopulation& pop,
                                       const Scalarization& F, const SolverOptions& opts = {});

/// Equilibrium of the complete-information game for realized counts n_t^x.
/// Entries with n_t^x = 0 are not decision variables and are reported as 0.
EquilibriumResult minimize_complete_info_potential(const AttributeSpace& space, const PlayerPopulation& pop,
                                                   const Matrix& counts, const Scalarization& F,
                                                   const SolverOptions& opts = {});

/// Equilibrium of the OLS game (common cost = OLS estimation cost). Solved in
/// log-precision on [1e-12, l_max]; kkt_residual is the projected gradient
/// norm in those coordinates and estimation_cost is the OLS cost.
EquilibriumResult minimize_ols_potential(const AttributeSpace& space, const PlayerPopulation& pop,
                                         const Scalarization& F, const OlsKernel& kernel,
                                         const SolverOptions& opts = {});

/// max over coordinates of max(−g, min(λ, |λ·g|)), g the potential gradient.
/// Throws SingularInformation.
double kkt_residual(const AttributeSpace& space, const PlayerPopulation& pop, const PrecisionProfile& profile,
                    const Scalarization& F);

/// Same residual for an arbitrary gradient.
double kkt_residual(const Matrix& lambda, const Matrix& gradient);

struct DesignResult {
  DesignMeasure design;
  double criterion = kInfinity;
  double duality_gap = kInfinity;  // gᵀν − min_x g_x
  int iterations = 0;
  bool converged = false;
};

/// F((Σ_x ν(x) x xᵀ)⁻¹) and optionally its gradient in ν; +∞ when singular.
double design_criterion(const AttributeSpace& space, const Scalarization& F, const Vector& nu,
                        Vector* grad = nullptr);

/// Optimal design by projected gradient on the simplex, certified by the
/// Frank–Wolfe duality gap ≤ tol·(1 + |criterion|).
DesignResult solve_optimal_design(const AttributeSpace& space, const Scalarization& F,
                                  const SolverOptions& opts = {});

/// Away-step Frank–Wolfe, kept as an independent cross-check.
DesignResult frank_wolfe_design(const AttributeSpace& space, const Scalarization& F,
                                const SolverOptions& opts = {});

/// Euclidean projection onto the probability simplex (Michelot).
Vector project_to_simplex(const Vector& v);

}  // namespace stratreg
