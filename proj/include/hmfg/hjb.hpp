#pragma once

#include "hmfg/operators.hpp"
#include "hmfg/torus_grid.hpp"

#include <vector>

namespace hmfg {

// Numerical Hamiltonian for |grad u|^2 / 2. Both are monotone and consistent.
// Engquist-Osher is C^1, so the recorded drift depends continuously on u; the
// Godunov flux picks one side at spreading points and can switch between them.
enum class NumericalHamiltonian { kEngquistOsher, kGodunov };

struct HJBOptions {
  double cfl = 0.9;         // target for dt * transport_rate / h
  int max_substeps = 1024;
  NumericalHamiltonian hamiltonian = NumericalHamiltonian::kEngquistOsher;
};

struct HJBSolution {
  TimeField u;
  TimeVectorField alpha;    // centered gradient of u
  TimeVectorField drift;    // net upwind velocity of u (the upwinded control)
  double nu = 0;
  // substep_drift[k] holds the split upwind velocities (see split_velocity) at
  // every substep of t_{k+1} -> t_k, in the order applied (first entry at t_{k+1}).
  std::vector<std::vector<Eigen::MatrixXd>> substep_drift;
  int max_substeps_used = 1;
};

// Backward solve of  -u_t - nu Lap u - |grad u|^2 / 2 = F,  u(T) = 0.
HJBSolution solve_backward(const TimeField& F, double nu, double T, double dt, const HJBOptions& opt = {});

TimeVectorField optimal_control(const TimeField& u);

// min over frames, nodes, axes of (u(x+h) - 2u(x) + u(x-h)) / h^2.
double semiconvexity_bound(const TimeField& u);

}  // namespace hmfg
