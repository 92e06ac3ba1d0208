#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stratreg/error.hpp"

namespace stratreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Smallest eigenvalue a matrix must exceed to count as positive definite.
inline constexpr double kEigenFloor = 1e-10;

double smallest_eigenvalue(const Matrix& symmetric);

/// Finite set of attribute vectors with a full-support distribution.
class AttributeSpace {
 public:
  std::size_t size() const { return points_.size(); }
  int dim() const { return dim_; }

  const Vector& point(std::size_t i) const { return points_[i]; }
  double mu(std::size_t i) const { return mu_[i]; }
  const std::vector<Vector>& points() const { return points_; }
  const std::vector<double>& mu() const { return mu_; }

  /// x xᵀ for point i, precomputed.
  const Matrix& outer(std::size_t i) const { return outer_[i]; }

  /// Σ_x μ(x) x xᵀ.
  const Matrix& second_moment() const { return second_moment_; }

  /// Abscissae of a polynomial design space, if it was built as one.
  const std::optional<std::vector<double>>& abscissae() const { return abscissae_; }

 private:
  friend AttributeSpace build_attribute_space(std::vector<Vector>, std::vector<double>);
  friend AttributeSpace polynomial_design_space(int, std::span<const double>,
                                                std::optional<std::vector<double>>);

  int dim_ = 0;
  std::vector<Vector> points_;
  std::vector<double> mu_;
  std::vector<Matrix> outer_;
  Matrix second_moment_;
  std::optional<std::vector<double>> abscissae_;
};

/// Validates points and probabilities. Throws ZeroProbability,
/// DegenerateMoment, DuplicatePoint or DimensionMismatch.
AttributeSpace build_attribute_space(std::vector<Vector> points, std::vector<double> mu);

/// Vandermonde rows [1, x, ..., x^{degree-1}] over the grid. Uniform μ unless
/// weights are given (they are normalized).
AttributeSpace polynomial_design_space(int degree, std::span<const double> grid,
                                       std::optional<std::vector<double>> weights = std::nullopt);

/// Integer range lo..hi inclusive.
std::vector<double> integer_grid(int lo, int hi);

class ProvisionCost {
 public:
  enum class Kind { Linear, Monomial, Polynomial, CoshMinusOne, Custom };

  // Finite exponent used when grid-validating cosh(ℓ) − 1, whose true upper
  // homogeneity degree is unbounded. Valid on the validation grid below.
  static constexpr double kCoshValidationPMax = 12.0;

  static ProvisionCost linear(double a);
  static ProvisionCost monomial(double p);
  /// Σ coeffs[k]·ℓ^degrees[k]; coefficients positive, degrees ≥ 1.
  static ProvisionCost polynomial(std::vector<double> coeffs, std::vector<double> degrees);
  static ProvisionCost cosh_minus_one();
  /// User cost with an analytic derivative. Grid-validated on construction.
  static ProvisionCost custom(std::string name, std::function<double(double)> value,
                              std::function<double(double)> derivative, double p_min,
                              double p_max);

  double value(double ell) const;
  double derivative(double ell) const;

  Kind kind() const { return kind_; }
  double p_min() const { return p_min_; }
  /// May be +∞ (cosh).
  double p_max() const { return p_max_; }
  /// Exponent used by the homogeneity grid check.
  double validation_p_max() const;

  /// Exponent p when the cost is exactly ℓ^p.
  std::optional<double> monomial_exponent() const;
  /// Slope a when the cost is exactly a·ℓ.
  std::optional<double> linear_slope() const;

  std::string describe() const;

 private:
  Kind kind_ = Kind::Linear;
  std::vector<double> coeffs_;
  std::vector<double> degrees_;
  std::function<double(double)> value_fn_;
  std::function<double(double)> derivative_fn_;
  std::string name_;
  double p_min_ = 1.0;
  double p_max_ = 1.0;
};

struct CostCheck {
  bool zero_at_origin = true;
  bool nonnegative = true;
  bool nondecreasing = true;
  bool convex = true;
  bool homogeneity = true;
  bool ok() const { return zero_at_origin && nonnegative && nondecreasing && convex && homogeneity; }
};

/// Grid spot-check of c(0)=0, monotonicity, convexity and
/// a^{p_min}c(ℓ) ≤ c(aℓ) ≤ a^{p_max}c(ℓ) for ℓ ∈ [1e-3, 4], a ∈ {1.1, 1.5, 2, 3, 5}.
CostCheck check_provision_cost(const ProvisionCost& cost);

/// Matrix-to-scalar criterion F, homogeneous of degree q, with analytic gradient.
class Scalarization {
 public:
  enum class Kind { Trace, PowTrace, SquaredFrobenius, AverageMse, PointMse };

  static Scalarization trace();
  static Scalarization pow_trace(double q);
  static Scalarization squared_frobenius();
  /// Σ_k ρ_k z_kᵀ V z_k with ρ a probability vector over the points.
  static Scalarization average_mse(std::vector<Vector> points, std::vector<double> weights);
  /// Σ_k z_kᵀ V z_k.
  static Scalarization point_mse(std::vector<Vector> points);

  double value(const Matrix& v) const;
  /// ∂F/∂V (symmetric).
  Matrix gradient(const Matrix& v) const;

  Kind kind() const { return kind_; }
  double q() const { return q_; }
  std::string describe() const;

 private:
  Kind kind_ = Kind::Trace;
  double q_ = 1.0;
  Matrix weight_;  // Σ ρ z zᵀ for the MSE criteria
};

struct CostType {
  ProvisionCost cost;
  int count = 1;
};

class PlayerPopulation {
 public:
  static PlayerPopulation build(std::vector<CostType> types);
  static PlayerPopulation identical(ProvisionCost cost, int n);

  std::size_t types() const { return types_.size(); }
  const CostType& type(std::size_t t) const { return types_[t]; }
  const std::vector<CostType>& all() const { return types_; }
  int total() const { return total_; }

  double p_min() const;
  double p_max() const;

 private:
  std::vector<CostType> types_;
  int total_ = 0;
};

/// Common precision λ_t(x) per cost type t (rows) and attribute index x (columns).
struct PrecisionProfile {
  Matrix lambda;

  static PrecisionProfile constant(std::size_t types, std::size_t points, double value) {
    return {Matrix::Constant(static_cast<Eigen::Index>(types), static_cast<Eigen::Index>(points), value)};
  }
  /// Throws InvalidProfile on negative/non-finite entries or shape mismatch.
  void validate(std::size_t types, std::size_t points, double cap = kInfinity) const;
};

/// Measure on the attribute set; normalized designs have mass 1.
struct DesignMeasure {
  Vector nu;

  double mass() const { return nu.sum(); }
  /// Throws ZeroMass when the mass is not positive.
  DesignMeasure normalized() const;
};

struct JointAtom {
  std::vector<int> assignment;  // attribute index per agent
  double probability = 0.0;
};

/// Joint law of all agents' attributes.
class JointDistribution {
 public:
  enum class MomentCheck { Require, Skip };

  /// Validates probabilities and, unless skipped, positive definiteness of
  /// E[Σ_i x_i x_iᵀ]. Skipping admits degenerate laws (trivial equilibria).
  static JointDistribution build(const AttributeSpace& space, int n, std::vector<JointAtom> support,
                                 MomentCheck check = MomentCheck::Require);
  /// μⁿ, enumerated (m^n atoms; small instances only).
  static JointDistribution product(const AttributeSpace& space, int n);

  int agents() const { return n_; }
  const std::vector<JointAtom>& support() const { return support_; }

 private:
  int n_ = 0;
  std::vector<JointAtom> support_;
};

}  // namespace stratreg
