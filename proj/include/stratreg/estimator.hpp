#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "stratreg/model.hpp"

namespace stratreg {

struct InformationMatrix {
  Matrix M;
  bool invertible = false;

  static InformationMatrix from(Matrix m);
};

struct ModelParameters {
  Vector beta;
};

// Weight W_t(x) of coordinate λ_t(x) in the potential: n_t·μ(x) under attribute
// uncertainty, n_t^x (realized counts) under complete information.
Matrix uncertainty_weights(const AttributeSpace& space, const PlayerPopulation& pop);

/// Σ_x x xᵀ Σ_t W_t(x) λ_t(x).
Matrix weighted_information(const AttributeSpace& space, const Matrix& weights, const Matrix& lambda);

/// Σ_t Σ_x W_t(x) c_t(λ_t(x)) + κ·F(M⁻¹); +∞ when M is singular. When grad is
/// given it receives the gradient (left untouched on +∞). estimation receives F(M⁻¹).
double weighted_objective(const AttributeSpace& space, const PlayerPopulation& pop, const Matrix& weights,
                          const Matrix& lambda, const Scalarization& F, double kappa, Matrix* grad = nullptr,
                          double* estimation = nullptr);

InformationMatrix info_matrix(const AttributeSpace& space, const PlayerPopulation& pop,
                              const PrecisionProfile& profile);

/// F(M⁻¹), or +∞ when M is singular.
double gls_cost(const AttributeSpace& space, const PlayerPopulation& pop, const PrecisionProfile& profile,
                const Scalarization& F);

/// ∂C/∂λ_t(x). Throws SingularInformation.
Matrix gls_cost_gradient(const AttributeSpace& space, const PlayerPopulation& pop,
                         const PrecisionProfile& profile, const Scalarization& F);

double potential(const AttributeSpace& space, const PlayerPopulation& pop, const PrecisionProfile& profile,
                 const Scalarization& F);

/// Gradient of the potential. Throws SingularInformation.
Matrix potential_gradient(const AttributeSpace& space, const PlayerPopulation& pop,
                          const PrecisionProfile& profile, const Scalarization& F);

double social_cost(const AttributeSpace& space, const PlayerPopulation& pop, const PrecisionProfile& profile,
                   const Scalarization& F);

// --- OLS ------------------------------------------------------------------

struct OlsExact {};
struct OlsMonteCarlo {
  int samples = 100000;
  std::uint64_t seed = 1;
};
using OlsMode = std::variant<OlsExact, OlsMonteCarlo>;

/// K_x = E[1{x_i = x} A⁻¹ x xᵀ A⁻¹] for a single agent, A = Σ_j x_j x_jᵀ. The
/// expectation does not involve the precisions, so it is computed once per (space, n).
struct OlsKernel {
  int agents = 0;
  std::vector<Matrix> K;
  double singular_mass = 0.0;
};

/// Throws ExactTooLarge (m^n > 1e6) or SingularDrawMass.
OlsKernel ols_kernel(const AttributeSpace& space, int agents, const OlsMode& mode);

struct OlsCost {
  double value = 0.0;
  double standard_error = 0.0;  // 0 in exact mode
  double singular_mass = 0.0;
};

/// Throws ZeroPrecision, ExactTooLarge, SingularDrawMass.
OlsCost ols_cost(const AttributeSpace& space, const PlayerPopulation& pop, const PrecisionProfile& profile,
                 const Scalarization& F, const OlsMode& mode);

/// F(Σ_x (Σ_t n_t/λ_t(x)) K_x) with an optional gradient in λ.
double ols_cost_from_kernel(const OlsKernel& kernel, const PlayerPopulation& pop, const Matrix& lambda,
                            const Scalarization& F, Matrix* grad = nullptr);

// --- joint distributions and complete information --------------------------

/// profile: n×m, one row per agent.
InformationMatrix joint_info_matrix(const AttributeSpace& space, const JointDistribution& joint,
                                    const Matrix& profile);

/// counts: T×m integer matrix n_t^x. Throws CountMismatch.
double complete_info_potential(const AttributeSpace& space, const PlayerPopulation& pop, const Matrix& counts,
                               const PrecisionProfile& profile, const Scalarization& F);

// --- simulation -------------------------------------------------------------

struct SimulationResult {
  Matrix empirical_cov;   // sample covariance of β̂ around its sample mean
  Matrix mean_draw_cov;   // mean of (Σ λ x xᵀ)⁻¹ over draws
  Vector mean_beta;
  Vector bias_z;          // (mean β̂ − β)/se
  Matrix cov_z;           // mean of (β̂−β)(β̂−β)ᵀ − V_draw over its standard error
  int trials = 0;
  int degenerate_draws = 0;
};

/// Throws TooManyDegenerateDraws when resampled draws exceed 1% of trials.
SimulationResult simulate_gls(const AttributeSpace& space, const PlayerPopulation& pop,
                              const PrecisionProfile& profile, const ModelParameters& beta, int trials,
                              std::uint64_t seed);

}  // namespace stratreg
