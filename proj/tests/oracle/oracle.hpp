#pragma once

#include <functional>

#include "stratreg/model.hpp"

// Independent reference computations for the test suite. Nothing here is
// linked into the library or the command-line tool.
namespace stratreg::oracle {

struct GridSpec {
  double lo = 0.0;
  double hi = 4.0;
  double coarse_pitch = 0.02;
  double pitch = 1e-3;  // refinement pitch, searched within ±coarse_pitch of the coarse winner
};

struct GridMinimum {
  PrecisionProfile profile;
  double value = 0.0;
};

/// Exhaustive search of the potential over a box grid, then one refinement
/// pass. Throws TooManyVariables beyond 3 decision variables.
GridMinimum grid_minimize_potential(const AttributeSpace& space, const PlayerPopulation& pop,
                                    const Scalarization& F, const GridSpec& grid = {});

struct ClosedForm1d {
  double ell = 0.0;   // per-player precision
  double cost = 0.0;  // estimation cost
};

/// X = {1}, c = ℓ^p, F = (tr V)^q.
ClosedForm1d closed_form_1d(double n, double p, double q);

/// Central differences; h defaults to 1e-5·(1 + |λ|). Throws InfiniteValue.
Matrix fd_gradient(const std::function<double(const Matrix&)>& fn, const Matrix& lambda, double h = 0.0);

struct SimplexMinimum {
  Vector nu;
  double value = 0.0;
};

/// Brute-force simplex grid for at most 3 points, refined once around the winner.
SimplexMinimum simplex_grid_design(const AttributeSpace& space, const Scalarization& F, int divisions = 400);

}  // namespace stratreg::oracle
