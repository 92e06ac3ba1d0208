#include "oracle.hpp"

#include <cmath>
#include <vector>

namespace stratreg::oracle {

namespace {

// Direct evaluation of the potential, written independently of the library.
double direct_potential(const AttributeSpace& space, const PlayerPopulation& pop, const Scalarization& F,
                        const Matrix& lambda) {
  const int d = space.dim();
  Matrix m = Matrix::Zero(d, d);
  double provision = 0.0;
  for (std::size_t t = 0; t < pop.types(); ++t)
    for (std::size_t x = 0; x < space.size(); ++x) {
      const double l = lambda(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(x));
      const double w = pop.type(t).count * space.mu(x);
      provision += w * pop.type(t).cost.value(l);
      m += w * l * space.point(x) * space.point(x).transpose();
    }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  if (eig.eigenvalues().minCoeff() <= 1e-10) return kInfinity;
  const Matrix v = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  return provision + F.value(v);
}

template <class Fn>
void for_each_grid_point(int vars, const std::vector<double>& lo, const std::vector<double>& hi, double pitch,
                         Fn&& fn) {
  std::vector<int> steps(vars);
  for (int i = 0; i < vars; ++i) steps[i] = static_cast<int>(std::floor((hi[i] - lo[i]) / pitch + 1e-9));
  std::vector<int> k(vars, 0);
  std::vector<double> point(vars);
  while (true) {
    for (int i = 0; i < vars; ++i) point[i] = lo[i] + k[i] * pitch;
    fn(point);
    int i = 0;
    while (i < vars && ++k[i] > steps[i]) k[i++] = 0;
    if (i == vars) break;
  }
}

}  // namespace

GridMinimum grid_minimize_potential(const AttributeSpace& space, const PlayerPopulation& pop,
                                    const Scalarization& F, const GridSpec& grid) {
  const auto rows = static_cast<Eigen::Index>(pop.types());
  const auto cols = static_cast<Eigen::Index>(space.size());
  const int vars = static_cast<int>(rows * cols);
  if (vars > 3) throw Error(ErrorCode::TooManyVariables, "grid oracle handles at most 3 variables");

  Matrix lambda(rows, cols);
  GridMinimum best;
  best.value = kInfinity;
  auto visit = [&](const std::vector<double>& point) {
    for (int i = 0; i < vars; ++i) lambda.data()[i] = point[i];
    const double v = direct_potential(space, pop, F, lambda);
    if (v < best.value) {
      best.value = v;
      best.profile.lambda = lambda;
    }
  };

  for_each_grid_point(vars, std::vector<double>(vars, grid.lo), std::vector<double>(vars, grid.hi),
                      grid.coarse_pitch, visit);
  std::vector<double> lo(vars), hi(vars);
  for (int i = 0; i < vars; ++i) {
    const double c = best.profile.lambda.data()[i];
    lo[i] = std::max(grid.lo, c - grid.coarse_pitch);
    hi[i] = std::min(grid.hi, c + grid.coarse_pitch);
  }
  for_each_grid_point(vars, lo, hi, grid.pitch, visit);
  return best;
}

ClosedForm1d closed_form_1d(double n, double p, double q) {
  ClosedForm1d c;
  c.ell = std::pow(q / p, 1.0 / (p + q)) * std::pow(n, -(q + 1.0) / (p + q));
  c.cost = std::pow(p / q, q / (p + q)) * std::pow(n, -q * (p - 1.0) / (p + q));
  return c;
}

Matrix fd_gradient(const std::function<double(const Matrix&)>& fn, const Matrix& lambda, double h) {
  Matrix g(lambda.rows(), lambda.cols());
  Matrix probe = lambda;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double step = h > 0.0 ? h : 1e-5 * (1.0 + std::abs(lambda.data()[i]));
    probe.data()[i] = lambda.data()[i] + step;
    const double up = fn(probe);
    probe.data()[i] = lambda.data()[i] - step;
    const double down = fn(probe);
    probe.data()[i] = lambda.data()[i];
    if (!std::isfinite(up) || !std::isfinite(down))
      throw Error(ErrorCode::InfiniteValue, "function is not finite near the probe point");
    g.data()[i] = (up - down) / (2.0 * step);
  }
  return g;
}

SimplexMinimum simplex_grid_design(const AttributeSpace& space, const Scalarization& F, int divisions) {
  const auto m = static_cast<Eigen::Index>(space.size());
  if (m > 3) throw Error(ErrorCode::TooManyVariables, "simplex grid oracle handles at most 3 points");
  auto criterion = [&](const Vector& nu) {
    Matrix info = Matrix::Zero(space.dim(), space.dim());
    for (Eigen::Index x = 0; x < m; ++x) info += nu[x] * space.point(static_cast<std::size_t>(x)) *
                                              space.point(static_cast<std::size_t>(x)).transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(info);
    if (eig.eigenvalues().minCoeff() <= 1e-12) return kInfinity;
    return F.value(eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                   eig.eigenvectors().transpose());
  };

  SimplexMinimum best;
  best.value = kInfinity;
  auto scan = [&](const Vector& center, double width, int steps) {
    const double h = width / steps;
    Vector nu(m);
    if (m == 1) {
      nu[0] = 1.0;
      best = {nu, criterion(nu)};
      return;
    }
    for (int i = -steps; i <= steps; ++i) {
      const double a = center[0] + i * h;
      if (a < 0.0 || a > 1.0) continue;
      if (m == 2) {
        nu << a, 1.0 - a;
        const double v = criterion(nu);
        if (v < best.value) best = {nu, v};
        continue;
      }
      for (int j = -steps; j <= steps; ++j) {
        const double b = center[1] + j * h;
        if (b < 0.0 || a + b > 1.0) continue;
        nu << a, b, 1.0 - a - b;
        const double v = criterion(nu);
        if (v < best.value) best = {nu, v};
      }
    }
  };
  Vector center = Vector::Constant(m, 0.5);
  scan(center, 0.5, divisions / 2);
  scan(best.nu, 2.0 / divisions, 100);
  return best;
}

}  // namespace stratreg::oracle
