#include "hmfg/hjb.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace hmfg {

namespace {

Eigen::MatrixXd slopes(const TorusGrid& g, const Eigen::VectorXd& u, NumericalHamiltonian H) {
  return H == NumericalHamiltonian::kGodunov ? split_velocity(g, godunov_slopes(g, u)) : osher_slopes(g, u);
}

}  // namespace

HJBSolution solve_backward(const TimeField& F, double nu, double T, double dt, const HJBOptions& opt) {
  if (nu < 0) throw std::invalid_argument("nu must be nonnegative");
  const TorusGrid& g = F.grid;
  const int N = step_count(T, dt);
  HJBSolution sol;
  sol.nu = nu;
  sol.u = TimeField(g, uniform_times(T, N));
  sol.drift = TimeVectorField(g, sol.u.t);
  sol.substep_drift.resize(size_t(N));

  std::map<int, DiffusionSolve> solvers;
  auto solver_for = [&](int s) -> const DiffusionSolve& {
    auto it = solvers.find(s);
    if (it == solvers.end()) it = solvers.emplace(s, DiffusionSolve(g, nu * dt / s)).first;
    return it->second;
  };

  Eigen::VectorXd u = Eigen::VectorXd::Zero(g.size());
  sol.u.frames.col(N) = u;
  sol.drift.frames[size_t(N)] = net_velocity(g, slopes(g, u, opt.hamiltonian));
  int s = 1;
  for (int k = N - 1; k >= 0; --k) {
    const double t_hi = sol.u.t[size_t(k) + 1];
    s = std::max(1, static_cast<int>(std::ceil(dt * transport_rate(g, slopes(g, u, opt.hamiltonian)) / opt.cfl)));
    for (;;) {
      if (s > opt.max_substeps)
        throw std::runtime_error("HJB: CFL condition not met after maximal sub-step refinement");
      const double delta = dt / s;
      const DiffusionSolve& solve = solver_for(s);
      std::vector<Eigen::MatrixXd> drifts;
      Eigen::VectorXd v = u;
      bool ok = true;
      for (int j = 0; j < s; ++j) {
        Eigen::MatrixXd b = slopes(g, v, opt.hamiltonian);
        if (delta * transport_rate(g, b) > 1.0) {
          ok = false;
          break;
        }
        Eigen::VectorXd H = 0.5 * b.rowwise().squaredNorm();
        const double t_dst = j + 1 == s ? sol.u.t[size_t(k)] : t_hi - (j + 1) * delta;
        v = solve(v + delta * (H + sample(F, t_dst)));
        drifts.push_back(std::move(b));
      }
      if (!ok) {
        s *= 2;
        continue;
      }
      u = std::move(v);
      sol.substep_drift[size_t(k)] = std::move(drifts);
      break;
    }
    sol.max_substeps_used = std::max(sol.max_substeps_used, s);
    sol.u.frames.col(k) = u;
    sol.drift.frames[size_t(k)] = net_velocity(g, slopes(g, u, opt.hamiltonian));
  }
  sol.alpha = optimal_control(sol.u);
  return sol;
}

TimeVectorField optimal_control(const TimeField& u) {
  TimeVectorField out(u.grid, u.t);
  for (Index k = 0; k < u.frame_count(); ++k)
    for (int a = 0; a < u.grid.dim(); ++a)
      out.frames[size_t(k)].col(a) = centered_diff(u.grid, Eigen::VectorXd(u.frames.col(k)), a);
  return out;
}

double semiconvexity_bound(const TimeField& u) {
  const TorusGrid& g = u.grid;
  const double ih2 = 1.0 / (g.h() * g.h());
  double lo = INFINITY;
  for (Index k = 0; k < u.frame_count(); ++k) {
    const Eigen::VectorXd f = u.frames.col(k);
    for (int a = 0; a < g.dim(); ++a)
      lo = std::min(lo, ((shift(g, f, a, 1) - 2 * f + shift(g, f, a, -1)) * ih2).minCoeff());
  }
  return lo;
}

}  // namespace hmfg
