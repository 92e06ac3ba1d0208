#include "stratreg/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stratreg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroProbability: return "ZeroProbability";
    case ErrorCode::DegenerateMoment: return "DegenerateMoment";
    case ErrorCode::DuplicatePoint: return "DuplicatePoint";
    case ErrorCode::InvalidCost: return "InvalidCost";
    case ErrorCode::InvalidScalarization: return "InvalidScalarization";
    case ErrorCode::InvalidPopulation: return "InvalidPopulation";
    case ErrorCode::InvalidProfile: return "InvalidProfile";
    case ErrorCode::SingularInformation: return "SingularInformation";
    case ErrorCode::ZeroPrecision: return "ZeroPrecision";
    case ErrorCode::ExactTooLarge: return "ExactTooLarge";
    case ErrorCode::SingularDrawMass: return "SingularDrawMass";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::TooManyDegenerateDraws: return "TooManyDegenerateDraws";
    case ErrorCode::TooManyVariables: return "TooManyVariables";
    case ErrorCode::InfiniteValue: return "InfiniteValue";
    case ErrorCode::ZeroMass: return "ZeroMass";
    case ErrorCode::NonMonomial: return "NonMonomial";
    case ErrorCode::BadExponents: return "BadExponents";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::BoundFactorUndefined: return "BoundFactorUndefined";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

double smallest_eigenvalue(const Matrix& symmetric) {
  if (symmetric.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------------------
// AttributeSpace

namespace {

void finish_space(std::vector<Vector>& points, std::vector<double>& mu, int& dim,
                  std::vector<Matrix>& outer, Matrix& moment) {
  if (points.empty()) throw Error(ErrorCode::DimensionMismatch, "attribute space needs at least one point");
  if (points.size() != mu.size())
    throw Error(ErrorCode::DimensionMismatch, "points and mu have different lengths");
  dim = static_cast<int>(points.front().size());
  if (dim < 1) throw Error(ErrorCode::DimensionMismatch, "attribute dimension must be at least 1");

  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != dim) throw Error(ErrorCode::DimensionMismatch, "points differ in dimension");
    if (!points[i].allFinite()) throw Error(ErrorCode::DimensionMismatch, "non-finite attribute vector");
    if (!(mu[i] > 0.0) || !std::isfinite(mu[i]))
      throw Error(ErrorCode::ZeroProbability, "mu[" + std::to_string(i) + "] is not strictly positive");
    total += mu[i];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw Error(ErrorCode::ZeroProbability, "probabilities do not sum to 1");

  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j)
      if (points[i] == points[j])
        throw Error(ErrorCode::DuplicatePoint,
                    "points " + std::to_string(i) + " and " + std::to_string(j) + " coincide");

  outer.clear();
  moment = Matrix::Zero(dim, dim);
  for (std::size_t i = 0; i < points.size(); ++i) {
    outer.push_back(points[i] * points[i].transpose());
    moment += mu[i] * outer.back();
  }
  if (smallest_eigenvalue(moment) <= kEigenFloor)
    throw Error(ErrorCode::DegenerateMoment, "E[x xᵀ] is not positive definite");
}

}  // namespace

AttributeSpace build_attribute_space(std::vector<Vector> points, std::vector<double> mu) {
  AttributeSpace space;
  space.points_ = std::move(points);
  space.mu_ = std::move(mu);
  finish_space(space.points_, space.mu_, space.dim_, space.outer_, space.second_moment_);
  return space;
}

AttributeSpace polynomial_design_space(int degree, std::span<const double> grid,
                                       std::optional<std::vector<double>> weights) {
  if (degree < 1) throw Error(ErrorCode::DimensionMismatch, "polynomial degree must be at least 1");
  if (grid.empty()) throw Error(ErrorCode::DimensionMismatch, "empty abscissa grid");

  std::vector<double> mu;
  if (weights) {
    if (weights->size() != grid.size())
      throw Error(ErrorCode::DimensionMismatch, "weights and grid have different lengths");
    double total = 0.0;
    for (double w : *weights) {
      if (!(w > 0.0)) throw Error(ErrorCode::ZeroProbability, "grid weight is not strictly positive");
      total += w;
    }
    for (double w : *weights) mu.push_back(w / total);
  } else {
    mu.assign(grid.size(), 1.0 / static_cast<double>(grid.size()));
  }
  // Exact renormalization so the sum check is not defeated by rounding.
  double total = 0.0;
  for (double w : mu) total += w;
  if (std::abs(total - 1.0) > 1e-13) for (double& w : mu) w /= total;

  std::vector<Vector> points;
  for (double x : grid) {
    Vector row(degree);
    double power = 1.0;
    for (int k = 0; k < degree; ++k) {
      row[k] = power;
      power *= x;
    }
    points.push_back(std::move(row));
  }

  AttributeSpace space;
  space.points_ = std::move(points);
  space.mu_ = std::move(mu);
  space.abscissae_ = std::vector<double>(grid.begin(), grid.end());
  finish_space(space.points_, space.mu_, space.dim_, space.outer_, space.second_moment_);
  return space;
}

std::vector<double> integer_grid(int lo, int hi) {
  std::vector<double> grid;
  for (int x = lo; x <= hi; ++x) grid.push_back(x);
  return grid;
}

// ---------------------------------------------------------------------------
// ProvisionCost

ProvisionCost ProvisionCost::linear(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) throw Error(ErrorCode::InvalidCost, "linear slope must be positive");
  ProvisionCost c;
  c.kind_ = Kind::Linear;
  c.coeffs_ = {a};
  c.degrees_ = {1.0};
  c.p_min_ = c.p_max_ = 1.0;
  return c;
}

ProvisionCost ProvisionCost::monomial(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw Error(ErrorCode::InvalidCost, "monomial exponent must be >= 1");
  ProvisionCost c;
  c.kind_ = Kind::Monomial;
  c.coeffs_ = {1.0};
  c.degrees_ = {p};
  c.p_min_ = c.p_max_ = p;
  return c;
}

ProvisionCost ProvisionCost::polynomial(std::vector<double> coeffs, std::vector<double> degrees) {
  if (coeffs.empty() || coeffs.size() != degrees.size())
    throw Error(ErrorCode::InvalidCost, "polynomial needs matching non-empty coefficient and degree lists");
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    if (!(coeffs[k] > 0.0)) throw Error(ErrorCode::InvalidCost, "polynomial coefficients must be positive");
    if (!(degrees[k] >= 1.0)) throw Error(ErrorCode::InvalidCost, "polynomial degrees must be >= 1");
  }
  ProvisionCost c;
  c.kind_ = Kind::Polynomial;
  c.p_min_ = *std::min_element(degrees.begin(), degrees.end());
  c.p_max_ = *std::max_element(degrees.begin(), degrees.end());
  c.coeffs_ = std::move(coeffs);
  c.degrees_ = std::move(degrees);
  return c;
}

ProvisionCost ProvisionCost::cosh_minus_one() {
  ProvisionCost c;
  c.kind_ = Kind::CoshMinusOne;
  c.p_min_ = 2.0;
  c.p_max_ = kInfinity;
  return c;
}

ProvisionCost ProvisionCost::custom(std::string name, std::function<double(double)> value,
                                    std::function<double(double)> derivative, double p_min,
                                    double p_max) {
  if (!value || !derivative) throw Error(ErrorCode::InvalidCost, "custom cost needs value and derivative");
  if (!(p_min >= 1.0) || !(p_max >= p_min))
    throw Error(ErrorCode::InvalidCost, "custom cost needs 1 <= p_min <= p_max");
  ProvisionCost c;
  c.kind_ = Kind::Custom;
  c.name_ = std::move(name);
  c.value_fn_ = std::move(value);
  c.derivative_fn_ = std::move(derivative);
  c.p_min_ = p_min;
  c.p_max_ = p_max;
  if (!check_provision_cost(c).ok())
    throw Error(ErrorCode::InvalidCost, "custom cost '" + c.name_ + "' fails the grid checks");
  return c;
}

double ProvisionCost::value(double ell) const {
  switch (kind_) {
    case Kind::CoshMinusOne: {
      // cosh(ℓ) − 1 = 2 sinh²(ℓ/2), accurate near 0.
      const double s = std::sinh(0.5 * ell);
      return 2.0 * s * s;
    }
    case Kind::Custom: return value_fn_(ell);
    default: {
      double total = 0.0;
      for (std::size_t k = 0; k < coeffs_.size(); ++k) total += coeffs_[k] * std::pow(ell, degrees_[k]);
      return total;
    }
  }
}

double ProvisionCost::derivative(double ell) const {
  switch (kind_) {
    case Kind::CoshMinusOne: return std::sinh(ell);
    case Kind::Custom: return derivative_fn_(ell);
    default: {
      double total = 0.0;
      for (std::size_t k = 0; k < coeffs_.size(); ++k) {
        if (degrees_[k] == 1.0)
          total += coeffs_[k];
        else
          total += coeffs_[k] * degrees_[k] * std::pow(ell, degrees_[k] - 1.0);
      }
      return total;
    }
  }
}

double ProvisionCost::validation_p_max() const {
  return kind_ == Kind::CoshMinusOne ? kCoshValidationPMax : p_max_;
}

std::optional<double> ProvisionCost::monomial_exponent() const {
  if ((kind_ == Kind::Monomial || kind_ == Kind::Linear || kind_ == Kind::Polynomial) &&
      coeffs_.size() == 1 && coeffs_[0] == 1.0)
    return degrees_[0];
  return std::nullopt;
}

std::optional<double> ProvisionCost::linear_slope() const {
  if ((kind_ == Kind::Monomial || kind_ == Kind::Linear || kind_ == Kind::Polynomial) &&
      coeffs_.size() == 1 && degrees_[0] == 1.0)
    return coeffs_[0];
  return std::nullopt;
}

std::string ProvisionCost::describe() const {
  std::ostringstream out;
  switch (kind_) {
    case Kind::Linear: out << "linear(" << coeffs_[0] << ")"; break;
    case Kind::Monomial: out << "monomial(" << degrees_[0] << ")"; break;
    case Kind::Polynomial:
      out << "polynomial(";
      for (std::size_t k = 0; k < coeffs_.size(); ++k) out << (k ? "+" : "") << coeffs_[k] << "*l^" << degrees_[k];
      out << ")";
      break;
    case Kind::CoshMinusOne: out << "cosh_minus_one"; break;
    case Kind::Custom: out << "custom(" << name_ << ")"; break;
  }
  return out.str();
}

CostCheck check_provision_cost(const ProvisionCost& cost) {
  CostCheck check;
  check.zero_at_origin = std::abs(cost.value(0.0)) <= 1e-14;

  std::vector<double> grid;
  for (int k = 0; k <= 64; ++k) grid.push_back(4.0 * k / 64.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = cost.value(grid[i]);
    if (!(v >= 0.0)) check.nonnegative = false;
    if (i > 0 && v < cost.value(grid[i - 1]) - 1e-12) check.nondecreasing = false;
    if (i > 0 && i + 1 < grid.size()) {
      const double second = cost.value(grid[i + 1]) - 2.0 * v + cost.value(grid[i - 1]);
      if (second < -1e-10) check.convex = false;
    }
  }

  const double p_hi = cost.validation_p_max();
  const double factors[] = {1.1, 1.5, 2.0, 3.0, 5.0};
  for (int k = 0; k <= 24; ++k) {
    const double ell = 1e-3 * std::pow(4000.0, k / 24.0);
    const double base = cost.value(ell);
    for (double a : factors) {
      const double scaled = cost.value(a * ell);
      const double lower = std::pow(a, cost.p_min()) * base;
      if (scaled < lower * (1.0 - 1e-9)) check.homogeneity = false;
      if (std::isfinite(p_hi)) {
        const double upper = std::pow(a, p_hi) * base;
        if (scaled > upper * (1.0 + 1e-9)) check.homogeneity = false;
      }
    }
  }
  return check;
}

// ---------------------------------------------------------------------------
// Scalarization

Scalarization Scalarization::trace() { return Scalarization{}; }

Scalarization Scalarization::pow_trace(double q) {
  if (!(q >= 1.0) || !std::isfinite(q)) throw Error(ErrorCode::InvalidScalarization, "pow_trace needs q >= 1");
  Scalarization s;
  s.kind_ = Kind::PowTrace;
  s.q_ = q;
  return s;
}

Scalarization Scalarization::squared_frobenius() {
  Scalarization s;
  s.kind_ = Kind::SquaredFrobenius;
  s.q_ = 2.0;
  return s;
}

Scalarization Scalarization::average_mse(std::vector<Vector> points, std::vector<double> weights) {
  if (points.empty() || points.size() != weights.size())
    throw Error(ErrorCode::InvalidScalarization, "average_mse needs matching points and weights");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error(ErrorCode::InvalidScalarization, "average_mse weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidScalarization, "average_mse weights must sum to 1");
  Scalarization s;
  s.kind_ = Kind::AverageMse;
  const auto d = points.front().size();
  s.weight_ = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (points[k].size() != d) throw Error(ErrorCode::InvalidScalarization, "mse points differ in dimension");
    s.weight_ += weights[k] * points[k] * points[k].transpose();
  }
  return s;
}

Scalarization Scalarization::point_mse(std::vector<Vector> points) {
  if (points.empty()) throw Error(ErrorCode::InvalidScalarization, "point_mse needs at least one point");
  Scalarization s;
  s.kind_ = Kind::PointMse;
  const auto d = points.front().size();
  s.weight_ = Matrix::Zero(d, d);
  for (const auto& z : points) {
    if (z.size() != d) throw Error(ErrorCode::InvalidScalarization, "mse points differ in dimension");
    s.weight_ += z * z.transpose();
  }
  return s;
}

double Scalarization::value(const Matrix& v) const {
  switch (kind_) {
    case Kind::Trace: return v.trace();
    case Kind::PowTrace: return q_ == 1.0 ? v.trace() : std::pow(v.trace(), q_);
    case Kind::SquaredFrobenius: return v.squaredNorm();
    case Kind::AverageMse:
    case Kind::PointMse:
      if (weight_.rows() != v.rows()) throw Error(ErrorCode::DimensionMismatch, "mse criterion dimension");
      return (weight_.cwiseProduct(v)).sum();
  }
  return 0.0;
}

Matrix Scalarization::gradient(const Matrix& v) const {
  const auto d = v.rows();
  switch (kind_) {
    case Kind::Trace: return Matrix::Identity(d, d);
    case Kind::PowTrace:
      return (q_ == 1.0 ? 1.0 : q_ * std::pow(v.trace(), q_ - 1.0)) * Matrix::Identity(d, d);
    case Kind::SquaredFrobenius: return 2.0 * v;
    case Kind::AverageMse:
    case Kind::PointMse: return weight_;
  }
  return Matrix::Zero(d, d);
}

std::string Scalarization::describe() const {
  switch (kind_) {
    case Kind::Trace: return "trace";
    case Kind::PowTrace: {
      std::ostringstream out;
      out << "pow_trace(" << q_ << ")";
      return out.str();
    }
    case Kind::SquaredFrobenius: return "squared_frobenius";
    case Kind::AverageMse: return "average_mse";
    case Kind::PointMse: return "point_mse";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// PlayerPopulation, profiles, measures

PlayerPopulation PlayerPopulation::build(std::vector<CostType> types) {
  if (types.empty()) throw Error(ErrorCode::InvalidPopulation, "population needs at least one cost type");
  PlayerPopulation pop;
  for (const auto& t : types) {
    if (t.count < 1) throw Error(ErrorCode::InvalidPopulation, "type multiplicities must be >= 1");
    pop.total_ += t.count;
  }
  pop.types_ = std::move(types);
  return pop;
}

PlayerPopulation PlayerPopulation::identical(ProvisionCost cost, int n) {
  return build({CostType{std::move(cost), n}});
}

double PlayerPopulation::p_min() const {
  double p = kInfinity;
  for (const auto& t : types_) p = std::min(p, t.cost.p_min());
  return p;
}

double PlayerPopulation::p_max() const {
  double p = 0.0;
  for (const auto& t : types_) p = std::max(p, t.cost.p_max());
  return p;
}

void PrecisionProfile::validate(std::size_t types, std::size_t points, double cap) const {
  if (static_cast<std::size_t>(lambda.rows()) != types || static_cast<std::size_t>(lambda.cols()) != points)
    throw Error(ErrorCode::InvalidProfile, "profile shape does not match population x attribute space");
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double v = lambda.data()[i];
    if (!std::isfinite(v) || v < 0.0 || v > cap)
      throw Error(ErrorCode::InvalidProfile, "precision entries must be finite, nonnegative and below the cap");
  }
}

DesignMeasure DesignMeasure::normalized() const {
  const double b = mass();
  if (!(b > 0.0)) throw Error(ErrorCode::ZeroMass, "measure has no mass to normalize");
  return {nu / b};
}

JointDistribution JointDistribution::build(const AttributeSpace& space, int n, std::vector<JointAtom> support,
                                           MomentCheck check) {
  if (n < 1) throw Error(ErrorCode::InvalidPopulation, "joint distribution needs n >= 1");
  if (support.empty()) throw Error(ErrorCode::ZeroProbability, "empty joint support");
  double total = 0.0;
  Matrix moment = Matrix::Zero(space.dim(), space.dim());
  for (const auto& atom : support) {
    if (static_cast<int>(atom.assignment.size()) != n)
      throw Error(ErrorCode::DimensionMismatch, "joint assignment length differs from n");
    if (!(atom.probability > 0.0)) throw Error(ErrorCode::ZeroProbability, "joint atom probability must be positive");
    for (int idx : atom.assignment)
      if (idx < 0 || static_cast<std::size_t>(idx) >= space.size())
        throw Error(ErrorCode::DimensionMismatch, "joint assignment index out of range");
    total += atom.probability;
    for (int idx : atom.assignment) moment += atom.probability * space.outer(static_cast<std::size_t>(idx));
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorCode::ZeroProbability, "joint probabilities do not sum to 1");
  if (check == MomentCheck::Require && smallest_eigenvalue(moment) <= kEigenFloor)
    throw Error(ErrorCode::DegenerateMoment, "E[Σ x_i x_iᵀ] is not positive definite");
  JointDistribution joint;
  joint.n_ = n;
  joint.support_ = std::move(support);
  return joint;
}

JointDistribution JointDistribution::product(const AttributeSpace& space, int n) {
  const auto m = space.size();
  if (std::pow(static_cast<double>(m), n) > 1e6)
    throw Error(ErrorCode::ExactTooLarge, "product joint distribution has more than 1e6 atoms");
  std::vector<JointAtom> support;
  std::vector<int> digits(static_cast<std::size_t>(n), 0);
  while (true) {
    double prob = 1.0;
    for (int d : digits) prob *= space.mu(static_cast<std::size_t>(d));
    support.push_back({digits, prob});
    int k = 0;
    while (k < n && ++digits[static_cast<std::size_t>(k)] == static_cast<int>(m)) digits[static_cast<std::size_t>(k++)] = 0;
    if (k == n) break;
  }
  // Rounding in the products can leave the total a few ulps away from 1.
  double total = 0.0;
  for (const auto& a : support) total += a.probability;
  for (auto& a : support) a.probability /= total;
  return build(space, n, std::move(support));
}

}  // namespace stratreg
