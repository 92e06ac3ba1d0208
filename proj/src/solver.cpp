#include "stratreg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>

namespace stratreg {

void SolverOptions::validate() const {
  if (!(tol > 0.0)) throw Error(ErrorCode::Config, "tol must be positive");
  if (max_iters < 1) throw Error(ErrorCode::Config, "max_iters must be at least 1");
  if (!(shrink > 0.0 && shrink < 1.0)) throw Error(ErrorCode::Config, "shrink must lie in (0, 1)");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw Error(ErrorCode::Config, "armijo_c must lie in (0, 1)");
  if (!(l_max > 0.0)) throw Error(ErrorCode::Config, "l_max must be positive");
  if (!(min_step > 0.0 && max_step >= min_step)) throw Error(ErrorCode::Config, "bad step clipping range");
  if (!(initial_step > 0.0)) throw Error(ErrorCode::Config, "initial_step must be positive");
}

namespace {

using Eval = std::function<double(const Vector&, Vector*)>;
using Project = std::function<Vector(const Vector&)>;
using Residual = std::function<double(const Vector&, const Vector&, double)>;

struct SpgOutcome {
  Vector x;
  double f = kInfinity;
  Vector g;
  double residual = kInfinity;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

// Spectral projected gradient: Barzilai–Borwein step in the metric diag(scale)⁻¹,
// monotone Armijo backtracking along d = P(x − α·scale∘g) − x. A trial point
// whose gradient still points along d is also accepted when f did not rise by
// more than rounding: for convex f this certifies descent once the Armijo
// decrease is smaller than the noise in f.
//
// With stall_window > 0 the loop also gives up once the residual has not
// halved for that many iterations, so a caller can switch methods early.
SpgOutcome spg(const Eval& eval, const Project& project, const Residual& residual, Vector x, const Vector& scale,
               const SolverOptions& opts, int stall_window = 0) {
  SpgOutcome out;
  x = project(x);
  Vector g;
  double f = eval(x, &g);
  if (!std::isfinite(f)) throw Error(ErrorCode::SingularInformation, "starting point has infinite objective");
  if (opts.record_trace) out.trace.push_back(f);

  double alpha = opts.initial_step;
  Vector xn, gn;
  double best = kInfinity;
  int best_it = 0;
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    const double r = residual(x, g, f);
    if (r <= opts.tol) {
      out.converged = true;
      out.residual = r;
      break;
    }
    if (r < 0.5 * best) {
      best = r;
      best_it = it;
    } else if (stall_window > 0 && it - best_it >= stall_window) {
      break;
    }
    const Vector d = project(x - alpha * scale.cwiseProduct(g)) - x;
    const double gd = g.dot(d);
    if (!(gd < 0.0)) {
      // No descent direction at this step length; retry with a shorter one.
      if (alpha <= opts.min_step) break;
      alpha = std::max(opts.min_step, alpha * opts.shrink);
      continue;
    }
    // Objective noise floor: a few ulps of |f|.
    const double rounding = 16.0 * std::numeric_limits<double>::epsilon() * std::abs(f);
    double t = 1.0;
    bool accepted = false;
    double fn = kInfinity;
    for (int ls = 0; ls < 80; ++ls) {
      xn = x + t * d;
      fn = eval(xn, &gn);
      if (std::isfinite(fn) && (fn <= f + opts.armijo_c * t * gd || (gn.dot(d) <= 0.0 && fn <= f + rounding))) {
        accepted = true;
        break;
      }
      t *= opts.shrink;
    }
    if (!accepted) break;

    const Vector s = xn - x;
    const Vector y = gn - g;
    const double sy = s.dot(y);
    // Without positive measured curvature, reuse the step that was just accepted.
    if (sy > 0.0)
      alpha = std::clamp(s.cwiseQuotient(scale).dot(s) / sy, opts.min_step, opts.max_step);
    else
      alpha = std::clamp(t < 1.0 ? alpha * t : 2.0 * alpha, opts.min_step, opts.max_step);
    x.swap(xn);
    g.swap(gn);
    f = fn;
    if (opts.record_trace) out.trace.push_back(f);
  }
  out.iterations = it;
  out.residual = out.converged ? out.residual : residual(x, g, f);
  out.converged = out.residual <= opts.tol;
  out.x = std::move(x);
  out.g = std::move(g);
  out.f = f;
  return out;
}

Vector flatten(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

Matrix unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

Matrix starting_profile(const PlayerPopulation& pop, std::size_t points, const SolverOptions& opts) {
  const auto rows = static_cast<Eigen::Index>(pop.types());
  const auto cols = static_cast<Eigen::Index>(points);
  if (opts.init) {
    if (opts.init->rows() != rows || opts.init->cols() != cols)
      throw Error(ErrorCode::InvalidProfile, "initial profile has the wrong shape");
    return *opts.init;
  }
  const double base = 1.0 / pop.total();
  if (!opts.random_init) return Matrix::Constant(rows, cols, base);
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  Matrix m(rows, cols);
  for (Eigen::Index x = 0; x < cols; ++x)
    for (Eigen::Index t = 0; t < rows; ++t) m(t, x) = base * u(rng);
  return m;
}

constexpr int kStallWindow = 2000;

double residual_nonneg(const Vector& x, const Vector& g, const Vector& upper) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (upper[i] == 0.0) continue;  // fixed coordinate
    if (x[i] >= upper[i]) {
      r = std::max(r, g[i]);
      continue;
    }
    r = std::max({r, -g[i], std::min(x[i], std::abs(x[i] * g[i]))});
  }
  return r;
}

// argmin over z in [0, upper] of c(z) + (z − y)²/(2·alpha). The optimality
// condition c'(z) + (z − y)/alpha = 0 is monotone in z; the root is bracketed
// geometrically first because it can sit many decades below y.
double cost_prox(const ProvisionCost& cost, double y, double alpha, double upper) {
  auto h = [&](double z) { return cost.derivative(z) + (z - y) / alpha; };
  if (y <= 0.0 || h(0.0) >= 0.0) return 0.0;
  if (h(upper) <= 0.0) return upper;
  double hi = std::min(y, upper);
  double lo = hi;
  while (h(lo) > 0.0) {
    lo *= 1e-8;
    if (lo < 1e-300) return 0.0;
  }
  for (int k = 0; k < 300 && hi - lo > 1e-16 * hi; ++k) {
    const double mid = hi > 4.0 * lo ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    (h(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

// Proximal gradient on the same potential: the estimation term takes a
// Barzilai–Borwein gradient step and the separable provision cost is handled
// exactly by cost_prox. Used when the clamped projected gradient stalls, which
// happens for costs whose derivative rises steeply away from zero (ℓ^p with
// p slightly above 1): the linear model of the cost then rejects every step
// that moves such a coordinate off the bound.
SpgOutcome proximal_phase(const AttributeSpace& space, const PlayerPopulation& pop, const Matrix& weights,
                          const Scalarization& F, double kappa, Vector x, const Vector& upper,
                          const SolverOptions& opts, int budget) {
  const auto rows = weights.rows();
  const auto cols = weights.cols();
  const Eigen::Index size = weights.size();
  auto cost_of = [&](Eigen::Index i) -> const ProvisionCost& {
    return pop.type(static_cast<std::size_t>(i % rows)).cost;
  };
  // Full objective, full gradient and the gradient of the estimation term.
  auto eval = [&](const Vector& v, Vector& g, Vector& ge) {
    Matrix gm;
    const double f = weighted_objective(space, pop, weights, unflatten(v, rows, cols), F, kappa, &gm);
    if (!std::isfinite(f)) return f;
    g = flatten(gm);
    ge = g;
    for (Eigen::Index i = 0; i < size; ++i)
      if (upper[i] > 0.0) ge[i] -= weights.data()[i] * cost_of(i).derivative(v[i]);
    return f;
  };

  SpgOutcome out;
  Vector g, ge, gn, gen, xn(size);
  double f = eval(x, g, ge);
  if (!std::isfinite(f)) throw Error(ErrorCode::SingularInformation, "starting point has infinite objective");
  if (opts.record_trace) out.trace.push_back(f);
  double alpha = opts.initial_step;
  int it = 0;
  for (; it < budget; ++it) {
    const double r = residual_nonneg(x, g, upper);
    if (r <= opts.tol) {
      out.converged = true;
      break;
    }
    const double rounding = 16.0 * std::numeric_limits<double>::epsilon() * std::abs(f);
    bool accepted = false;
    double fn = kInfinity;
    for (int ls = 0; ls < 80; ++ls) {
      for (Eigen::Index i = 0; i < size; ++i) {
        const double w = weights.data()[i];
        xn[i] = upper[i] > 0.0 ? cost_prox(cost_of(i), x[i] - alpha * ge[i] / w, alpha, upper[i]) : 0.0;
      }
      const Vector s = xn - x;
      const double moved = s.cwiseProduct(s).dot(flatten(weights));
      if (moved == 0.0) break;
      fn = eval(xn, gn, gen);
      if (std::isfinite(fn) && (fn <= f - opts.armijo_c / (2.0 * alpha) * moved || (fn <= f + rounding && gn.dot(s) <= 0.0))) {
        accepted = true;
        break;
      }
      alpha = std::max(opts.min_step, alpha * opts.shrink);
    }
    if (!accepted) break;
    const Vector s = xn - x;
    const double sy = s.dot(gen - ge);
    if (sy > 0.0) alpha = std::clamp(s.cwiseProduct(s).dot(flatten(weights)) / sy, opts.min_step, opts.max_step);
    x = xn;
    g = gn;
    ge = gen;
    f = fn;
    if (opts.record_trace) out.trace.push_back(f);
  }
  out.iterations = it;
  out.residual = residual_nonneg(x, g, upper);
  out.converged = out.residual <= opts.tol;
  out.x = std::move(x);
  out.g = std::move(g);
  out.f = f;
  return out;
}

// Shared driver for every game whose objective is weighted_objective.
EquilibriumResult solve_weighted(const AttributeSpace& space, const PlayerPopulation& pop, const Matrix& weights,
                                 const Scalarization& F, double kappa, const SolverOptions& opts) {
  opts.validate();
  const auto rows = weights.rows();
  const auto cols = weights.cols();
  Vector upper(weights.size());
  Vector scale(weights.size());
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    const double w = weights.data()[i];
    upper[i] = w > 0.0 ? opts.l_max : 0.0;
    scale[i] = w > 0.0 ? 1.0 / w : 1.0;
  }

  Eval eval = [&](const Vector& v, Vector* grad) {
    const Matrix lambda = unflatten(v, rows, cols);
    Matrix g;
    const double f = weighted_objective(space, pop, weights, lambda, F, kappa, grad ? &g : nullptr);
    if (grad && std::isfinite(f)) *grad = flatten(g);
    return f;
  };
  Project project = [&](const Vector& v) { return v.cwiseMax(0.0).cwiseMin(upper); };
  Residual residual = [&](const Vector& v, const Vector& g, double) { return residual_nonneg(v, g, upper); };

  SpgOutcome sol =
      spg(eval, project, residual, flatten(starting_profile(pop, space.size(), opts)), scale, opts, kStallWindow);
  if (!sol.converged && sol.iterations < opts.max_iters) {
    SpgOutcome prox =
        proximal_phase(space, pop, weights, F, kappa, sol.x, upper, opts, opts.max_iters - sol.iterations);
    prox.iterations += sol.iterations;
    prox.trace.insert(prox.trace.begin(), sol.trace.begin(), sol.trace.end() - (sol.trace.empty() ? 0 : 1));
    sol = std::move(prox);
  }

  EquilibriumResult res;
  res.profile.lambda = unflatten(sol.x, rows, cols);
  res.potential_value = sol.f;
  weighted_objective(space, pop, weights, res.profile.lambda, F, kappa, nullptr, &res.estimation_cost);
  res.kkt_residual = sol.residual;
  res.iterations = sol.iterations;
  res.converged = sol.converged;
  res.trace = sol.trace;
  return res;
}

}  // namespace

EquilibriumResult minimize_potential(const AttributeSpace& space, const PlayerPopulation& pop,
                                     const Scalarization& F, const SolverOptions& opts) {
  return solve_weighted(space, pop, uncertainty_weights(space, pop), F, 1.0, opts);
}

EquilibriumResult minimize_social_cost(const AttributeSpace& space, const PlayerPopulation& pop,
                                       const Scalarization& F, const SolverOptions& opts) {
  return solve_weighted(space, pop, uncertainty_weights(space, pop), F, static_cast<double>(pop.total()), opts);
}

EquilibriumResult minimize_complete_info_potential(const AttributeSpace& space, const PlayerPopulation& pop,
                                                   const Matrix& counts, const Scalarization& F,
                                                   const SolverOptions& opts) {
  if (static_cast<std::size_t>(counts.rows()) != pop.types() ||
      static_cast<std::size_t>(counts.cols()) != space.size())
    throw Error(ErrorCode::CountMismatch, "count matrix shape does not match population x attribute space");
  for (Eigen::Index t = 0; t < counts.rows(); ++t)
    if (counts.row(t).sum() != pop.type(static_cast<std::size_t>(t)).count || counts.row(t).minCoeff() < 0.0)
      throw Error(ErrorCode::CountMismatch, "counts of type " + std::to_string(t) + " do not sum to n_t");
  SolverOptions o = opts;
  if (!o.init) {
    Matrix start = starting_profile(pop, space.size(), opts);
    for (Eigen::Index i = 0; i < start.size(); ++i)
      if (counts.data()[i] == 0.0) start.data()[i] = 0.0;
    o.init = start;
  }
  return solve_weighted(space, pop, counts, F, 1.0, o);
}

EquilibriumResult minimize_ols_potential(const AttributeSpace& space, const PlayerPopulation& pop,
                                         const Scalarization& F, const OlsKernel& kernel,
                                         const SolverOptions& opts) {
  opts.validate();
  if (kernel.agents != pop.total() || kernel.K.size() != space.size())
    throw Error(ErrorCode::DimensionMismatch, "OLS kernel does not match the instance");
  const Matrix weights = uncertainty_weights(space, pop);
  const auto rows = weights.rows();
  const auto cols = weights.cols();
  const double lo = std::log(1e-12);
  const double hi = std::log(opts.l_max);

  auto objective = [&](const Matrix& lambda, Matrix* grad) {
    Matrix g;
    const double est = ols_cost_from_kernel(kernel, pop, lambda, F, grad ? &g : nullptr);
    double provision = 0.0;
    for (Eigen::Index t = 0; t < rows; ++t) {
      const auto& cost = pop.type(static_cast<std::size_t>(t)).cost;
      for (Eigen::Index x = 0; x < cols; ++x) {
        provision += weights(t, x) * cost.value(lambda(t, x));
        if (grad) g(t, x) += weights(t, x) * cost.derivative(lambda(t, x));
      }
    }
    if (grad) *grad = g;
    return provision + est;
  };

  Eval eval = [&](const Vector& u, Vector* grad) {
    const Vector lam = u.array().exp();
    Matrix g;
    const double f = objective(unflatten(lam, rows, cols), grad ? &g : nullptr);
    if (grad) *grad = flatten(g).cwiseProduct(lam);
    return f;
  };
  Project project = [&](const Vector& v) { return v.cwiseMax(lo).cwiseMin(hi); };
  Residual residual = [&](const Vector& u, const Vector& g, double) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      if (u[i] <= lo)
        r = std::max(r, -g[i]);
      else if (u[i] >= hi)
        r = std::max(r, g[i]);
      else
        r = std::max(r, std::abs(g[i]));
    }
    return r;
  };

  Matrix start = starting_profile(pop, space.size(), opts);
  if (start.minCoeff() <= 0.0) throw Error(ErrorCode::ZeroPrecision, "OLS game needs a positive starting profile");
  const Vector u0 = flatten(start).array().log();
  const SpgOutcome sol = spg(eval, project, residual, u0, Vector::Ones(u0.size()), opts);

  EquilibriumResult res;
  res.profile.lambda = unflatten(sol.x.array().exp(), rows, cols);
  res.potential_value = sol.f;
  res.estimation_cost = ols_cost_from_kernel(kernel, pop, res.profile.lambda, F);
  res.kkt_residual = sol.residual;
  res.iterations = sol.iterations;
  res.converged = sol.converged;
  res.trace = sol.trace;
  return res;
}

double kkt_residual(const Matrix& lambda, const Matrix& gradient) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double l = lambda.data()[i];
    const double g = gradient.data()[i];
    r = std::max({r, -g, std::min(l, std::abs(l * g))});
  }
  return r;
}

double kkt_residual(const AttributeSpace& space, const PlayerPopulation& pop, const PrecisionProfile& profile,
                    const Scalarization& F) {
  return kkt_residual(profile.lambda, potential_gradient(space, pop, profile, F));
}

// ---------------------------------------------------------------------------
// Optimal design

Vector project_to_simplex(const Vector& v) {
  const Eigen::Index m = v.size();
  std::vector<char> active(static_cast<std::size_t>(m), 1);
  Eigen::Index count = m;
  double tau = 0.0;
  while (true) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
      if (active[static_cast<std::size_t>(i)]) sum += v[i];
    tau = (sum - 1.0) / static_cast<double>(count);
    bool removed = false;
    for (Eigen::Index i = 0; i < m; ++i)
      if (active[static_cast<std::size_t>(i)] && v[i] - tau <= 0.0) {
        active[static_cast<std::size_t>(i)] = 0;
        --count;
        removed = true;
      }
    if (!removed || count == 0) break;
  }
  Vector out(m);
  for (Eigen::Index i = 0; i < m; ++i) out[i] = active[static_cast<std::size_t>(i)] ? v[i] - tau : 0.0;
  return out;
}

double design_criterion(const AttributeSpace& space, const Scalarization& F, const Vector& nu, Vector* grad) {
  if (static_cast<std::size_t>(nu.size()) != space.size())
    throw Error(ErrorCode::DimensionMismatch, "design has the wrong length");
  Matrix m = Matrix::Zero(space.dim(), space.dim());
  for (std::size_t x = 0; x < space.size(); ++x)
    if (nu[static_cast<Eigen::Index>(x)] != 0.0) m += nu[static_cast<Eigen::Index>(x)] * space.outer(x);
  if (smallest_eigenvalue(m) <= kEigenFloor) return kInfinity;
  Matrix v = m.ldlt().solve(Matrix::Identity(space.dim(), space.dim()));
  v = 0.5 * (v + v.transpose());
  if (grad) {
    const Matrix vgv = v * F.gradient(v) * v;
    grad->resize(nu.size());
    for (std::size_t x = 0; x < space.size(); ++x)
      (*grad)[static_cast<Eigen::Index>(x)] = -space.point(x).dot(vgv * space.point(x));
  }
  return F.value(v);
}

namespace {

double fw_gap(const Vector& nu, const Vector& g) { return g.dot(nu) - g.minCoeff(); }

}  // namespace

DesignResult solve_optimal_design(const AttributeSpace& space, const Scalarization& F, const SolverOptions& opts) {
  opts.validate();
  const auto m = static_cast<Eigen::Index>(space.size());
  // The gradient is shifted by a constant so it averages to 0 under ν. Moves
  // on the simplex sum to 0, so directional derivatives are unchanged while
  // cancellation in gᵀd drops by the size of the common offset.
  Eval eval = [&](const Vector& nu, Vector* grad) {
    const double f = design_criterion(space, F, nu, grad);
    if (grad && std::isfinite(f)) grad->array() -= grad->dot(nu);
    return f;
  };
  Project project = [](const Vector& v) { return project_to_simplex(v); };
  Residual residual = [&](const Vector& nu, const Vector& g, double f) {
    return fw_gap(nu, g) / (1.0 + std::abs(f));
  };
  const SpgOutcome sol = spg(eval, project, residual, Vector::Constant(m, 1.0 / m), Vector::Ones(m), opts);

  DesignResult res;
  res.design.nu = sol.x;
  res.criterion = sol.f;
  res.duality_gap = fw_gap(sol.x, sol.g);
  res.iterations = sol.iterations;
  res.converged = sol.converged;
  return res;
}

DesignResult frank_wolfe_design(const AttributeSpace& space, const Scalarization& F, const SolverOptions& opts) {
  opts.validate();
  const auto m = static_cast<Eigen::Index>(space.size());
  Vector nu = Vector::Constant(m, 1.0 / m);
  Vector g;
  double f = design_criterion(space, F, nu, &g);

  DesignResult res;
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    if (fw_gap(nu, g) <= opts.tol * (1.0 + std::abs(f))) {
      res.converged = true;
      break;
    }
    Eigen::Index s = 0;
    g.minCoeff(&s);
    // Away vertex: the worst coordinate still carrying mass.
    Eigen::Index a = -1;
    for (Eigen::Index i = 0; i < m; ++i)
      if (nu[i] > 0.0 && (a < 0 || g[i] > g[a])) a = i;

    Vector d = -nu;
    d[s] += 1.0;
    double gamma_max = 1.0;
    const double fw_dir = g.dot(d);
    Vector away = nu;
    away[a] -= 1.0;  // direction ν − e_a
    if (g.dot(away) < fw_dir && nu[a] < 1.0) {
      d = away;
      gamma_max = nu[a] / (1.0 - nu[a]);
    }

    // Bisection on the directional derivative (the criterion is convex in γ).
    Vector trial, gt;
    double lo = 0.0, hi = gamma_max;
    trial = nu + hi * d;
    double fhi = design_criterion(space, F, trial, &gt);
    if (std::isfinite(fhi) && gt.dot(d) <= 0.0) {
      lo = hi;
    } else {
      for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (lo + hi);
        trial = nu + mid * d;
        const double fm = design_criterion(space, F, trial, &gt);
        if (std::isfinite(fm) && gt.dot(d) < 0.0)
          lo = mid;
        else
          hi = mid;
      }
    }
    nu += lo * d;
    nu = nu.cwiseMax(0.0);
    nu /= nu.sum();
    f = design_criterion(space, F, nu, &g);
  }
  res.design.nu = nu;
  res.criterion = f;
  res.duality_gap = fw_gap(nu, g);
  res.iterations = it;
  return res;
}

}  // namespace stratreg
