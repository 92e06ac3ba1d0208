#include "stratreg/estimator.hpp"

#include <cmath>
#include <random>

namespace stratreg {

namespace {

bool invert(const Matrix& m, Matrix& v) {
  if (smallest_eigenvalue(m) <= kEigenFloor) return false;
  v = m.ldlt().solve(Matrix::Identity(m.rows(), m.cols()));
  v = 0.5 * (v + v.transpose());
  return true;
}

void check_shape(const AttributeSpace& space, const PlayerPopulation& pop, const Matrix& lambda) {
  if (static_cast<std::size_t>(lambda.rows()) != pop.types() ||
      static_cast<std::size_t>(lambda.cols()) != space.size())
    throw Error(ErrorCode::DimensionMismatch, "profile shape does not match population x attribute space");
}

// Quadratic forms xᵀ V G V x for every attribute point.
Vector sensitivities(const AttributeSpace& space, const Matrix& v, const Scalarization& F) {
  const Matrix vgv = v * F.gradient(v) * v;
  Vector s(static_cast<Eigen::Index>(space.size()));
  for (std::size_t x = 0; x < space.size(); ++x)
    s[static_cast<Eigen::Index>(x)] = space.point(x).dot(vgv * space.point(x));
  return s;
}

double log_multinomial(int n, const std::vector<int>& counts, const std::vector<double>& mu) {
  double r = std::lgamma(n + 1.0);
  for (std::size_t x = 0; x < counts.size(); ++x) {
    r -= std::lgamma(counts[x] + 1.0);
    if (counts[x] > 0) r += counts[x] * std::log(mu[x]);
  }
  return r;
}

// Calls visit(counts) for every composition of n into m nonnegative parts.
template <class Visit>
void for_each_composition(int n, std::size_t m, Visit&& visit) {
  std::vector<int> counts(m, 0);
  auto rec = [&](auto&& self, std::size_t x, int left) -> void {
    if (x + 1 == m) {
      counts[x] = left;
      visit(counts);
      return;
    }
    for (int k = left; k >= 0; --k) {
      counts[x] = k;
      self(self, x + 1, left - k);
    }
  };
  rec(rec, 0, n);
}

void check_exact_size(std::size_t m, int n) {
  if (n * std::log(static_cast<double>(m)) > std::log(1e6) + 1e-12)
    throw Error(ErrorCode::ExactTooLarge, "m^n exceeds 1e6; use Monte Carlo mode");
}

constexpr double kSingularMassLimit = 1e-9;

std::vector<int> draw_counts(std::mt19937_64& rng, std::discrete_distribution<int>& pick, int n, std::size_t m) {
  std::vector<int> counts(m, 0);
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(pick(rng))];
  return counts;
}

Matrix count_matrix(const AttributeSpace& space, const std::vector<int>& counts) {
  Matrix a = Matrix::Zero(space.dim(), space.dim());
  for (std::size_t x = 0; x < counts.size(); ++x)
    if (counts[x] > 0) a += counts[x] * space.outer(x);
  return a;
}

Vector inverse_precision_sums(const PlayerPopulation& pop, const Matrix& lambda) {
  Vector s = Vector::Zero(lambda.cols());
  for (Eigen::Index t = 0; t < lambda.rows(); ++t)
    for (Eigen::Index x = 0; x < lambda.cols(); ++x) {
      if (!(lambda(t, x) > 0.0))
        throw Error(ErrorCode::ZeroPrecision, "OLS cost needs strictly positive precisions");
      s[x] += pop.type(static_cast<std::size_t>(t)).count / lambda(t, x);
    }
  return s;
}

}  // namespace

InformationMatrix InformationMatrix::from(Matrix m) {
  InformationMatrix info;
  info.invertible = smallest_eigenvalue(m) > kEigenFloor;
  info.M = std::move(m);
  return info;
}

Matrix uncertainty_weights(const AttributeSpace& space, const PlayerPopulation& pop) {
  Matrix w(static_cast<Eigen::Index>(pop.types()), static_cast<Eigen::Index>(space.size()));
  for (std::size_t t = 0; t < pop.types(); ++t)
    for (std::size_t x = 0; x < space.size(); ++x)
      w(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(x)) = pop.type(t).count * space.mu(x);
  return w;
}

Matrix weighted_information(const AttributeSpace& space, const Matrix& weights, const Matrix& lambda) {
  Matrix m = Matrix::Zero(space.dim(), space.dim());
  for (Eigen::Index x = 0; x < lambda.cols(); ++x) {
    double mass = 0.0;
    for (Eigen::Index t = 0; t < lambda.rows(); ++t) mass += weights(t, x) * lambda(t, x);
    if (mass != 0.0) m += mass * space.outer(static_cast<std::size_t>(x));
  }
  return m;
}

double weighted_objective(const AttributeSpace& space, const PlayerPopulation& pop, const Matrix& weights,
                          const Matrix& lambda, const Scalarization& F, double kappa, Matrix* grad,
                          double* estimation) {
  check_shape(space, pop, lambda);
  Matrix v;
  if (!invert(weighted_information(space, weights, lambda), v)) {
    if (estimation) *estimation = kInfinity;
    return kInfinity;
  }
  const double est = F.value(v);
  if (estimation) *estimation = est;

  double provision = 0.0;
  for (Eigen::Index t = 0; t < lambda.rows(); ++t) {
    const auto& cost = pop.type(static_cast<std::size_t>(t)).cost;
    for (Eigen::Index x = 0; x < lambda.cols(); ++x)
      if (weights(t, x) != 0.0) provision += weights(t, x) * cost.value(lambda(t, x));
  }

  if (grad) {
    const Vector s = sensitivities(space, v, F);
    grad->resize(lambda.rows(), lambda.cols());
    for (Eigen::Index t = 0; t < lambda.rows(); ++t) {
      const auto& cost = pop.type(static_cast<std::size_t>(t)).cost;
      for (Eigen::Index x = 0; x < lambda.cols(); ++x)
        (*grad)(t, x) = weights(t, x) == 0.0 ? 0.0 : weights(t, x) * (cost.derivative(lambda(t, x)) - kappa * s[x]);
    }
  }
  return provision + kappa * est;
}

InformationMatrix info_matrix(const AttributeSpace& space, const PlayerPopulation& pop,
                              const PrecisionProfile& profile) {
  check_shape(space, pop, profile.lambda);
  return InformationMatrix::from(weighted_information(space, uncertainty_weights(space, pop), profile.lambda));
}

double gls_cost(const AttributeSpace& space, const PlayerPopulation& pop, const PrecisionProfile& profile,
                const Scalarization& F) {
  const InformationMatrix info = info_matrix(space, pop, profile);
  Matrix v;
  if (!invert(info.M, v)) return kInfinity;
  return F.value(v);
}

Matrix gls_cost_gradient(const AttributeSpace& space, const PlayerPopulation& pop,
                         const PrecisionProfile& profile, const Scalarization& F) {
  const Matrix w = uncertainty_weights(space, pop);
  check_shape(space, pop, profile.lambda);
  Matrix v;
  if (!invert(weighted_information(space, w, profile.lambda), v))
    throw Error(ErrorCode::SingularInformation, "information matrix is singular");
  const Vector s = sensitivities(space, v, F);
  Matrix g(w.rows(), w.cols());
  for (Eigen::Index t = 0; t < w.rows(); ++t)
    for (Eigen::Index x = 0; x < w.cols(); ++x) g(t, x) = -w(t, x) * s[x];
  return g;
}

double potential(const AttributeSpace& space, const PlayerPopulation& pop, const PrecisionProfile& profile,
                 const Scalarization& F) {
  return weighted_objective(space, pop, uncertainty_weights(space, pop), profile.lambda, F, 1.0);
}

Matrix potential_gradient(const AttributeSpace& space, const PlayerPopulation& pop,
                          const PrecisionProfile& profile, const Scalarization& F) {
  Matrix g;
  const double v = weighted_objective(space, pop, uncertainty_weights(space, pop), profile.lambda, F, 1.0, &g);
  if (!std::isfinite(v)) throw Error(ErrorCode::SingularInformation, "information matrix is singular");
  return g;
}

double social_cost(const AttributeSpace& space, const PlayerPopulation& pop, const PrecisionProfile& profile,
                   const Scalarization& F) {
  return weighted_objective(space, pop, uncertainty_weights(space, pop), profile.lambda, F,
                            static_cast<double>(pop.total()));
}

// ---------------------------------------------------------------------------
// OLS

OlsKernel ols_kernel(const AttributeSpace& space, int agents, const OlsMode& mode) {
  if (agents < 1) throw Error(ErrorCode::InvalidPopulation, "OLS kernel needs at least one agent");
  const std::size_t m = space.size();
  const int d = space.dim();
  OlsKernel kernel;
  kernel.agents = agents;
  kernel.K.assign(m, Matrix::Zero(d, d));

  auto accumulate = [&](const std::vector<int>& counts, double weight) {
    Matrix ainv;
    if (!invert(count_matrix(space, counts), ainv)) {
      kernel.singular_mass += weight;
      return;
    }
    for (std::size_t x = 0; x < m; ++x)
      if (counts[x] > 0)
        kernel.K[x] += weight * (static_cast<double>(counts[x]) / agents) * (ainv * space.outer(x) * ainv);
  };

  if (std::holds_alternative<OlsExact>(mode)) {
    check_exact_size(m, agents);
    for_each_composition(agents, m, [&](const std::vector<int>& counts) {
      accumulate(counts, std::exp(log_multinomial(agents, counts, space.mu())));
    });
  } else {
    const auto& mc = std::get<OlsMonteCarlo>(mode);
    if (mc.samples < 1) throw Error(ErrorCode::InvalidPopulation, "Monte Carlo mode needs samples >= 1");
    std::mt19937_64 rng(mc.seed);
    std::discrete_distribution<int> pick(space.mu().begin(), space.mu().end());
    for (int k = 0; k < mc.samples; ++k) accumulate(draw_counts(rng, pick, agents, m), 1.0 / mc.samples);
  }
  if (kernel.singular_mass >= kSingularMassLimit)
    throw Error(ErrorCode::SingularDrawMass, "singular attribute draws carry probability " +
                                                 std::to_string(kernel.singular_mass));
  return kernel;
}

double ols_cost_from_kernel(const OlsKernel& kernel, const PlayerPopulation& pop, const Matrix& lambda,
                            const Scalarization& F, Matrix* grad) {
  const Vector s = inverse_precision_sums(pop, lambda);
  const Eigen::Index d = kernel.K.front().rows();
  Matrix total = Matrix::Zero(d, d);
  for (std::size_t x = 0; x < kernel.K.size(); ++x) total += s[static_cast<Eigen::Index>(x)] * kernel.K[x];
  if (grad) {
    const Matrix g = F.gradient(total);
    grad->resize(lambda.rows(), lambda.cols());
    for (Eigen::Index x = 0; x < lambda.cols(); ++x) {
      const double inner = g.cwiseProduct(kernel.K[static_cast<std::size_t>(x)]).sum();
      for (Eigen::Index t = 0; t < lambda.rows(); ++t)
        (*grad)(t, x) = -pop.type(static_cast<std::size_t>(t)).count / (lambda(t, x) * lambda(t, x)) * inner;
    }
  }
  return F.value(total);
}

OlsCost ols_cost(const AttributeSpace& space, const PlayerPopulation& pop, const PrecisionProfile& profile,
                 const Scalarization& F, const OlsMode& mode) {
  check_shape(space, pop, profile.lambda);
  const Vector s = inverse_precision_sums(pop, profile.lambda);
  const int n = pop.total();

  if (std::holds_alternative<OlsExact>(mode)) {
    const OlsKernel kernel = ols_kernel(space, n, mode);
    return {ols_cost_from_kernel(kernel, pop, profile.lambda, F), 0.0, kernel.singular_mass};
  }

  // Monte Carlo: mean of the per-draw matrices, then a delta-method standard
  // error from a second pass over the same draws.
  const auto& mc = std::get<OlsMonteCarlo>(mode);
  if (mc.samples < 1) throw Error(ErrorCode::InvalidPopulation, "Monte Carlo mode needs samples >= 1");
  const std::size_t m = space.size();
  std::discrete_distribution<int> pick(space.mu().begin(), space.mu().end());
  auto draw_matrix = [&](std::mt19937_64& rng, Matrix& out) {
    const std::vector<int> counts = draw_counts(rng, pick, n, m);
    Matrix ainv;
    if (!invert(count_matrix(space, counts), ainv)) return false;
    Matrix middle = Matrix::Zero(space.dim(), space.dim());
    for (std::size_t x = 0; x < m; ++x)
      if (counts[x] > 0) middle += (s[static_cast<Eigen::Index>(x)] * counts[x] / n) * space.outer(x);
    out = ainv * middle * ainv;
    return true;
  };

  std::mt19937_64 rng(mc.seed);
  Matrix mean = Matrix::Zero(space.dim(), space.dim());
  int singular = 0;
  Matrix draw;
  for (int k = 0; k < mc.samples; ++k) {
    if (draw_matrix(rng, draw))
      mean += draw;
    else
      ++singular;
  }
  const double singular_mass = static_cast<double>(singular) / mc.samples;
  if (singular_mass >= kSingularMassLimit)
    throw Error(ErrorCode::SingularDrawMass,
                "singular attribute draws carry probability " + std::to_string(singular_mass));
  mean /= mc.samples;

  const Matrix g = F.gradient(mean);
  const double center = g.cwiseProduct(mean).sum();
  std::mt19937_64 again(mc.seed);
  double ss = 0.0;
  for (int k = 0; k < mc.samples; ++k) {
    draw_matrix(again, draw);
    const double h = g.cwiseProduct(draw).sum() - center;
    ss += h * h;
  }
  const double se = mc.samples > 1 ? std::sqrt(ss / (mc.samples - 1) / mc.samples) : 0.0;
  return {F.value(mean), se, singular_mass};
}

// ---------------------------------------------------------------------------
// Joint distributions and complete information

InformationMatrix joint_info_matrix(const AttributeSpace& space, const JointDistribution& joint,
                                    const Matrix& profile) {
  if (profile.rows() != joint.agents() || static_cast<std::size_t>(profile.cols()) != space.size())
    throw Error(ErrorCode::DimensionMismatch, "joint profile must be n x m");
  Matrix m = Matrix::Zero(space.dim(), space.dim());
  for (const auto& atom : joint.support())
    for (std::size_t i = 0; i < atom.assignment.size(); ++i) {
      const auto x = static_cast<std::size_t>(atom.assignment[i]);
      m += atom.probability * profile(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(x)) * space.outer(x);
    }
  return InformationMatrix::from(std::move(m));
}

double complete_info_potential(const AttributeSpace& space, const PlayerPopulation& pop, const Matrix& counts,
                               const PrecisionProfile& profile, const Scalarization& F) {
  check_shape(space, pop, profile.lambda);
  if (counts.rows() != profile.lambda.rows() || counts.cols() != profile.lambda.cols())
    throw Error(ErrorCode::CountMismatch, "count matrix shape does not match the profile");
  for (Eigen::Index t = 0; t < counts.rows(); ++t) {
    double row = 0.0;
    for (Eigen::Index x = 0; x < counts.cols(); ++x) {
      const double c = counts(t, x);
      if (c < 0.0 || c != std::floor(c)) throw Error(ErrorCode::CountMismatch, "counts must be nonnegative integers");
      row += c;
    }
    if (row != pop.type(static_cast<std::size_t>(t)).count)
      throw Error(ErrorCode::CountMismatch, "counts of type " + std::to_string(t) + " do not sum to n_t");
  }
  return weighted_objective(space, pop, counts, profile.lambda, F, 1.0);
}

// ---------------------------------------------------------------------------
// Simulation

SimulationResult simulate_gls(const AttributeSpace& space, const PlayerPopulation& pop,
                              const PrecisionProfile& profile, const ModelParameters& beta, int trials,
                              std::uint64_t seed) {
  check_shape(space, pop, profile.lambda);
  profile.validate(pop.types(), space.size());
  if (trials < 1) throw Error(ErrorCode::InvalidPopulation, "simulation needs trials >= 1");
  const int d = space.dim();
  if (beta.beta.size() != d) throw Error(ErrorCode::DimensionMismatch, "beta has the wrong dimension");

  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(space.mu().begin(), space.mu().end());
  std::normal_distribution<double> noise(0.0, 1.0);

  SimulationResult out;
  out.trials = trials;
  Vector sum_beta = Vector::Zero(d);
  Matrix sum_outer = Matrix::Zero(d, d);
  Matrix sum_v = Matrix::Zero(d, d);
  Matrix sum_dev = Matrix::Zero(d, d);
  Matrix sum_dev_sq = Matrix::Zero(d, d);
  Matrix a(d, d);
  Vector b(d);
  Matrix v;

  for (int k = 0; k < trials; ++k) {
    while (true) {
      a.setZero();
      b.setZero();
      for (std::size_t t = 0; t < pop.types(); ++t)
        for (int i = 0; i < pop.type(t).count; ++i) {
          const auto x = static_cast<std::size_t>(pick(rng));
          const double lam = profile.lambda(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(x));
          const double eps = noise(rng);
          if (lam == 0.0) continue;
          const double y = beta.beta.dot(space.point(x)) + eps / std::sqrt(lam);
          a += lam * space.outer(x);
          b += lam * y * space.point(x);
        }
      if (invert(a, v)) break;
      if (++out.degenerate_draws > 0.01 * trials)
        throw Error(ErrorCode::TooManyDegenerateDraws, "more than 1% of draws had a singular information matrix");
    }
    const Vector hat = v * b;
    const Vector err = hat - beta.beta;
    const Matrix dev = err * err.transpose() - v;
    sum_beta += hat;
    sum_outer += hat * hat.transpose();
    sum_v += v;
    sum_dev += dev;
    sum_dev_sq += dev.cwiseProduct(dev);
  }

  const double n = trials;
  out.mean_beta = sum_beta / n;
  out.mean_draw_cov = sum_v / n;
  out.empirical_cov = trials > 1 ? Matrix((sum_outer - n * out.mean_beta * out.mean_beta.transpose()) / (n - 1))
                                 : Matrix(Matrix::Zero(d, d));

  auto z = [&](double mean, double var) {
    const double se = std::sqrt(std::max(var, 0.0) / n);
    if (se > 0.0) return mean / se;
    return mean == 0.0 ? 0.0 : std::copysign(kInfinity, mean);
  };
  out.bias_z.resize(d);
  for (int j = 0; j < d; ++j) {
    const double var = trials > 1 ? out.empirical_cov(j, j) : 0.0;
    out.bias_z[j] = z(out.mean_beta[j] - beta.beta[j], var);
  }
  out.cov_z.resize(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double mean = sum_dev(i, j) / n;
      const double var = trials > 1 ? (sum_dev_sq(i, j) - n * mean * mean) / (n - 1) : 0.0;
      out.cov_z(i, j) = z(mean, var);
    }
  return out;
}

}  // namespace stratreg
