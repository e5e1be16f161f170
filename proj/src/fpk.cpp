#include "hmfg/fpk.hpp"

#include "hmfg/operators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

namespace hmfg {

namespace {

// (I + delta L_b^T) applied to m, L_b the upwind advection generator.
Eigen::VectorXd advect(const TorusGrid& g, const Eigen::MatrixXd& b, const Eigen::VectorXd& m, double delta) {
  return m - delta * transport_divergence(g, b, m);
}

double mass_defect(const TimeField& m) {
  double d = 0;
  for (Index k = 0; k < m.frame_count(); ++k) d = std::max(d, std::abs(integrate(m.grid, m.frames.col(k)) - 1.0));
  return d;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double wrap_coord(double x) {
  x = x + 0.5;
  x -= std::floor(x);
  if (x >= 1.0) x = 0.0;
  return x - 0.5;
}

}  // namespace

void check_density(const Field& m0, double tol) {
  if (m0.values.minCoeff() < 0) throw std::invalid_argument("initial density has negative values");
  const double mass = integrate(m0);
  if (std::abs(mass - 1.0) > tol) throw std::invalid_argument("initial density does not have unit mass");
}

DensityPath solve_forward(const Field& m0, const TimeVectorField& drift, double nu, double T, double dt,
                          const FpkOptions& opt) {
  require_same_grid(m0.grid, drift.grid);
  check_density(m0);
  if (nu < 0) throw std::invalid_argument("nu must be nonnegative");
  const TorusGrid& g = m0.grid;
  const int N = step_count(T, dt);
  DensityPath out;
  out.m = TimeField(g, uniform_times(T, N));
  out.m.frames.col(0) = m0.values;
  std::map<int, DiffusionSolve> solvers;
  Eigen::VectorXd m = m0.values;
  for (int k = 0; k < N; ++k) {
    const Eigen::MatrixXd b = sample(drift, out.m.t[size_t(k) + 1]);
    const int s = std::max(1, static_cast<int>(std::ceil(dt * transport_rate(g, b) / opt.cfl)));
    if (s > opt.max_substeps) throw std::runtime_error("FPK: CFL condition not met after maximal sub-step refinement");
    auto it = solvers.find(s);
    if (it == solvers.end()) it = solvers.emplace(s, DiffusionSolve(g, nu * dt / s)).first;
    for (int j = 0; j < s; ++j) m = advect(g, b, it->second(m), dt / s);
    out.max_substeps_used = std::max(out.max_substeps_used, s);
    out.m.frames.col(k + 1) = m;
  }
  out.mass_drift = mass_defect(out.m);
  return out;
}

DensityPath solve_forward(const Field& m0, const HJBSolution& dual, double T, double dt) {
  require_same_grid(m0.grid, dual.u.grid);
  check_density(m0);
  const TorusGrid& g = m0.grid;
  const int N = step_count(T, dt);
  if (size_t(N) != dual.substep_drift.size()) throw std::invalid_argument("HJB solution has a different time grid");
  DensityPath out;
  out.m = TimeField(g, uniform_times(T, N));
  out.m.frames.col(0) = m0.values;
  std::map<int, DiffusionSolve> solvers;
  Eigen::VectorXd m = m0.values;
  for (int k = 0; k < N; ++k) {
    const auto& subs = dual.substep_drift[size_t(k)];
    const int s = static_cast<int>(subs.size());
    auto it = solvers.find(s);
    if (it == solvers.end()) it = solvers.emplace(s, DiffusionSolve(g, dual.nu * dt / s)).first;
    for (int j = s - 1; j >= 0; --j) m = advect(g, subs[size_t(j)], it->second(m), dt / s);
    out.max_substeps_used = std::max(out.max_substeps_used, s);
    out.m.frames.col(k + 1) = m;
  }
  out.mass_drift = mass_defect(out.m);
  return out;
}

double interpolate(const TorusGrid& g, const Eigen::VectorXd& f, double x, double y) {
  const int n = g.n();
  const double sx = (x + 0.5) * n;
  const double fx = std::floor(sx);
  const double wx = sx - fx;
  const int i0 = g.wrap(static_cast<int>(fx));
  const int i1 = g.wrap(i0 + 1);
  if (g.dim() == 1) return (1 - wx) * f[i0] + wx * f[i1];
  const double sy = (y + 0.5) * n;
  const double fy = std::floor(sy);
  const double wy = sy - fy;
  const int j0 = g.wrap(static_cast<int>(fy));
  const int j1 = g.wrap(j0 + 1);
  return (1 - wx) * (1 - wy) * f[g.linear(i0, j0)] + wx * (1 - wy) * f[g.linear(i1, j0)] +
         (1 - wx) * wy * f[g.linear(i0, j1)] + wx * wy * f[g.linear(i1, j1)];
}

ParticleEnsemble simulate_particles(const Field& m0, const TimeVectorField& drift, double nu, int N, double T,
                                    double dt, uint64_t seed, const ParticleOptions& opt) {
  require_same_grid(m0.grid, drift.grid);
  check_density(m0, 1e-8);
  if (N < 1) throw std::invalid_argument("particle count must be positive");
  const TorusGrid& g = m0.grid;
  const int d = g.dim();
  const int steps = step_count(T, dt);
  const std::vector<double> t = uniform_times(T, steps);
  std::vector<int> rec;
  for (int k = 0; k <= steps; ++k)
    if (k == 0 || k == steps || (opt.record_every > 0 && k % opt.record_every == 0)) rec.push_back(k);

  ParticleEnsemble ens;
  ens.grid = g;
  ens.N = N;
  ens.seed = seed;
  for (int k : rec) ens.t.push_back(t[size_t(k)]);
  ens.positions.assign(rec.size(), Eigen::MatrixXd::Zero(N, d));

  // Drift frames at the solver nodes, one column per axis.
  std::vector<std::array<Eigen::VectorXd, 2>> b(size_t(steps) + 1);
  for (int k = 0; k <= steps; ++k) {
    const Eigen::MatrixXd bk = sample(drift, t[size_t(k)]);
    for (int a = 0; a < d; ++a) b[size_t(k)][size_t(a)] = bk.col(a);
  }

  // Cumulative cell masses for inverse-CDF sampling in 1D; max density for rejection in 2D.
  std::vector<double> cdf(size_t(g.size()));
  double acc = 0;
  for (Index k = 0; k < g.size(); ++k) cdf[size_t(k)] = (acc += m0[k]);
  const double mmax = m0.values.maxCoeff();
  const double h = g.h();
  const double noise = std::sqrt(2 * nu * dt);

  auto run = [&](int begin, int end) {
    for (int p = begin; p < end; ++p) {
      std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<uint64_t>(p))));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      std::normal_distribution<double> gauss(0.0, 1.0);
      double x[2] = {0, 0};
      if (d == 1) {
        const double u = unif(rng) * acc;
        size_t cell = size_t(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        cell = std::min(cell, cdf.size() - 1);
        x[0] = wrap_coord(g.coord(static_cast<int>(cell)) + (unif(rng) - 0.5) * h);
      } else {
        for (;;) {
          const double px = unif(rng) - 0.5, py = unif(rng) - 0.5;
          const int i = g.wrap(static_cast<int>(std::lround((px + 0.5) * g.n())));
          const int j = g.wrap(static_cast<int>(std::lround((py + 0.5) * g.n())));
          if (unif(rng) * mmax <= m0[g.linear(i, j)]) {
            x[0] = px;
            x[1] = py;
            break;
          }
        }
      }
      size_t r = 0;
      for (int k = 0; k <= steps; ++k) {
        if (r < rec.size() && rec[r] == k) {
          for (int a = 0; a < d; ++a) ens.positions[r](p, a) = x[a];
          ++r;
        }
        if (k == steps) break;
        double v[2];
        for (int a = 0; a < d; ++a) v[a] = interpolate(g, b[size_t(k)][size_t(a)], x[0], x[1]);
        for (int a = 0; a < d; ++a) {
          const double xi = nu > 0 ? gauss(rng) : 0.0;
          x[a] = wrap_coord(x[a] + v[a] * dt + noise * xi);
        }
      }
    }
  };

  const int jobs = std::max(1, std::min(opt.jobs, N));
  if (jobs == 1) {
    run(0, N);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) pool.emplace_back(run, int(int64_t(N) * w / jobs), int(int64_t(N) * (w + 1) / jobs));
    for (auto& th : pool) th.join();
  }
  return ens;
}

Field particle_histogram(const ParticleEnsemble& ens, double t) {
  const TorusGrid& g = ens.grid;
  size_t r = ens.t.size();
  for (size_t i = 0; i < ens.t.size(); ++i)
    if (std::abs(ens.t[i] - t) <= 1e-12 * std::max(1.0, std::abs(t))) r = i;
  if (r == ens.t.size()) throw std::invalid_argument("time is not a recorded particle time");
  Eigen::VectorXd hist = Eigen::VectorXd::Zero(g.size());
  const Eigen::MatrixXd& X = ens.positions[r];
  for (Index p = 0; p < X.rows(); ++p) {
    const int i = g.wrap(static_cast<int>(std::lround((X(p, 0) + 0.5) * g.n())));
    const int j = g.dim() == 2 ? g.wrap(static_cast<int>(std::lround((X(p, 1) + 0.5) * g.n()))) : 0;
    hist[g.linear(i, j)] += 1.0;
  }
  hist /= double(ens.N) * g.cell();
  return Field(g, hist);
}

double density_particle_distance(const DensityPath& path, const ParticleEnsemble& ens, double t) {
  require_same_grid(path.m.grid, ens.grid);
  Index k = -1;
  for (Index i = 0; i < path.m.frame_count(); ++i)
    if (std::abs(path.m.t[size_t(i)] - t) <= 1e-12 * std::max(1.0, std::abs(t))) k = i;
  if (k < 0) throw std::invalid_argument("time is not a node of the density path");
  const Field hist = particle_histogram(ens, t);
  return ens.grid.cell() * (path.m.frames.col(k) - hist.values).cwiseAbs().sum();
}

void write_particles_csv(std::ostream& os, const ParticleEnsemble& ens) {
  os << std::setprecision(17) << (ens.grid.dim() == 1 ? "t,id,x\n" : "t,id,x,y\n");
  for (size_t r = 0; r < ens.t.size(); ++r)
    for (Index p = 0; p < ens.positions[r].rows(); ++p) {
      os << ens.t[r] << ',' << p << ',' << ens.positions[r](p, 0);
      if (ens.grid.dim() == 2) os << ',' << ens.positions[r](p, 1);
      os << '\n';
    }
}

}  // namespace hmfg
