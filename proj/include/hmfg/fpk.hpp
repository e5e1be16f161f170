#pragma once

#include "hmfg/hjb.hpp"
#include "hmfg/torus_grid.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace hmfg {

struct FpkOptions {
  double cfl = 0.9;
  int max_substeps = 1024;
};

struct DensityPath {
  TimeField m;
  double mass_drift = 0;  // max over frames of |integral m - 1|
  int max_substeps_used = 1;
};

// Forward solve of  m_t - nu Lap m + div(m b) = 0  with the drift b sampled at
// the end of each step, donor-cell advection after an implicit diffusion solve.
DensityPath solve_forward(const Field& m0, const TimeVectorField& drift, double nu, double T, double dt,
                          const FpkOptions& opt = {});

// Same equation driven by the recorded sub-steps of an HJB solve; each step is
// the exact transpose of the corresponding linearized HJB step.
DensityPath solve_forward(const Field& m0, const HJBSolution& dual, double T, double dt);

// Validates a probability density on the grid; throws std::invalid_argument otherwise.
void check_density(const Field& m0, double tol = 1e-10);

struct ParticleOptions {
  int record_every = 0;  // record every k-th time node (0: first and last only)
  int jobs = 1;
};

struct ParticleEnsemble {
  TorusGrid grid;
  std::vector<double> t;                    // recorded times
  std::vector<Eigen::MatrixXd> positions;   // N x dim per recorded time, in [-0.5, 0.5)
  int N = 0;
  uint64_t seed = 0;
};

// Euler-Maruyama for dX = b(t, X) dt + sqrt(2 nu) dB on the torus. Each particle
// draws from its own stream derived from (seed, id), so results do not depend on jobs.
ParticleEnsemble simulate_particles(const Field& m0, const TimeVectorField& drift, double nu, int N, double T,
                                    double dt, uint64_t seed, const ParticleOptions& opt = {});

// Histogram of particle positions on the grid cells, as a density.
Field particle_histogram(const ParticleEnsemble& ens, double t);

// L1 distance between the grid density and the particle histogram at time t.
double density_particle_distance(const DensityPath& path, const ParticleEnsemble& ens, double t);

// Bilinear periodic interpolation of node values at a point.
double interpolate(const TorusGrid& g, const Eigen::VectorXd& f, double x, double y = 0);

void write_particles_csv(std::ostream& os, const ParticleEnsemble& ens);

}  // namespace hmfg
