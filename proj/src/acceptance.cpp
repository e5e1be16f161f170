#include "hmfg/acceptance.hpp"

#include "hmfg/ergodic.hpp"
#include "hmfg/longtime.hpp"
#include "hmfg/mfg.hpp"
#include "hmfg/operators.hpp"
#include "hmfg/spectral.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hmfg {

Scale parse_scale(const std::string& s) {
  if (s == "quick") return Scale::kQuick;
  if (s == "full") return Scale::kFull;
  throw std::invalid_argument("scale must be quick or full, got '" + s + "'");
}

const char* to_string(Scale s) { return s == Scale::kQuick ? "quick" : "full"; }

std::string format_line(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.pass ? "PASS" : "FAIL") << " [" << r.id << "] " << r.title;
  char buf[64];
  for (const auto& [k, v] : r.metrics) {
    std::snprintf(buf, sizeof buf, "%.4g", v);
    os << "  " << k << '=' << buf;
  }
  std::snprintf(buf, sizeof buf, "  (%.1f s", r.seconds);
  os << buf;
  if (r.budget_seconds > 0) {
    std::snprintf(buf, sizeof buf, " / %.0f s", r.budget_seconds);
    os << buf;
  }
  os << ')';
  if (!r.note.empty()) os << "  " << r.note;
  return os.str();
}

namespace {

constexpr double kTau = 2 * std::numbers::pi;

std::vector<double> time_nodes(const MFGProblem& p) { return uniform_times(p.T, step_count(p.T, p.dt)); }

TimeField combine(const TimeField& a, double s, const TimeField& h) { return TimeField(a.grid, a.t, a.frames + s * h.frames); }
TimeField difference(const TimeField& a, const TimeField& b) { return TimeField(a.grid, a.t, a.frames - b.frames); }

MFGProblem cosine_problem(int n, double delta, double eps, double T, double dt) {
  const TorusGrid g(1, n);
  const Habitat hab = make_habitat(CosineProfile(1, {{1.0, 0, 0}, {delta, 1, 0}}), g, 1.0);
  return make_problem(hab, 0.1, eps, T, dt, make_kernel(g, {KernelKind::kBump, 0.1}));
}

// Backward linearized HJB sweep through recorded substeps: the transpose of the dual FPK.
Eigen::VectorXd backward_linear(const HJBSolution& s, const Eigen::VectorXd& wT, double dt) {
  const TorusGrid& g = s.u.grid;
  Eigen::VectorXd w = wT;
  for (int k = int(s.substep_drift.size()) - 1; k >= 0; --k) {
    const auto& subs = s.substep_drift[size_t(k)];
    const double d = dt / double(subs.size());
    const DiffusionSolve A(g, s.nu * d);
    for (const auto& b : subs) w = A(w + d * upwind_advection(g, b, w));
  }
  return w;
}

// Least-squares slope of log e against log s, no round-off filtering.
double log_slope(const std::vector<double>& s, const std::vector<double>& e) {
  double mx = 0, my = 0, sxx = 0, sxy = 0;
  const double n = double(s.size());
  for (size_t i = 0; i < s.size(); ++i) mx += std::log(s[i]) / n, my += std::log(e[i]) / n;
  for (size_t i = 0; i < s.size(); ++i) {
    sxx += std::pow(std::log(s[i]) - mx, 2);
    sxy += (std::log(s[i]) - mx) * (std::log(e[i]) - my);
  }
  return sxy / sxx;
}

struct Ctx {
  Scale scale;
  int jobs;
  bool full() const { return scale == Scale::kFull; }
};

// 1. lambda_1(mu, K - theta_bar_K) = 0.
void eigen_identity(const Ctx&, CriterionResult& r) {
  r.title = "eigenvalue identity lambda1(mu, K - theta_bar) = 0";
  r.budget_seconds = 5;
  const TorusGrid g(1, 512);
  const Field K = CosineProfile::parse("1+0.5cos", 1).sample(g);
  const SteadyState s = steady_state(1.0, K);
  const double lam = principal_eigenpair(1.0, Field(g, K.values - s.theta_bar.values)).lambda1;
  r.metrics = {{"|lambda1|", std::abs(lam)}, {"tol", 5e-6}};
  r.pass = !s.trivial && std::abs(lam) <= 5e-6;
}

// 2. Explicit 1D ergodic solutions.
void explicit_1d(const Ctx&, CriterionResult& r) {
  r.title = "explicit 1D ergodic solutions";
  r.budget_seconds = 30;
  const TorusGrid g(1, 1024);
  const double h = g.h();
  const Habitat hab = make_habitat(CosineProfile::parse("1+0.5cos", 1), g, 1.0);

  const ExplicitOneD a = construct_explicit_1d(hab, 0.7);
  double err_a = std::abs(a.solution.lambda_bar - 0.3);
  for (Index i = 0; i < g.size(); ++i) {
    err_a = std::max(err_a, std::abs(a.solution.theta_bar[i] - 0.3));
    err_a = std::max(err_a, std::abs(a.solution.m_bar[i] - (1 + 5.0 / 7.0 * std::cos(kTau * g.coord(int(i))))));
    err_a = std::max(err_a, std::abs(a.solution.u_bar[i]));
  }
  const ExplicitOneD b = construct_explicit_1d(hab, 1.2);
  const ExplicitOneD c = construct_explicit_1d(hab, 0.2);
  const ErgodicResiduals& rc = c.solution.residuals;
  bool support = c.regime == Regime1D::kInterior;
  for (Index i = 0; i < g.size(); ++i) {
    const double x = std::abs(g.coord(int(i)));
    if (x < c.y - h && !(c.solution.m_bar[i] > 0)) support = false;
    if (x > c.y + h && c.solution.m_bar[i] != 0.0) support = false;
  }
  const bool extinct = b.regime == Regime1D::kExtinct && b.solution.theta_bar.values.cwiseAbs().maxCoeff() == 0.0;
  r.metrics = {{"a_err", err_a},
               {"b_extinct", extinct ? 1.0 : 0.0},
               {"c_y", c.y},
               {"c_residual", rc.worst_line()},
               {"c_mass", rc.mass_defect},
               {"c_support_defect", rc.support_defect},
               {"10h", 10 * h}};
  r.pass = a.regime == Regime1D::kConstant && err_a <= 1e-10 && extinct && rc.worst_line() <= 1e-6 &&
           rc.mass_defect <= 1e-10 && rc.mean_u <= 1e-10 && rc.min_m >= 0 && support && rc.support_defect <= 10 * h;
}

// 3. Monotonicity over random smooth pairs.
void monotonicity(const Ctx& c, CriterionResult& r) {
  r.title = "monotonicity over random smooth density pairs";
  r.budget_seconds = 300;
  const MFGProblem p = cosine_problem(128, 0.5, 0.05, 2.0, 0.01);
  const auto t = time_nodes(p);
  const int pairs = c.full() ? 20 : 5;
  double max_lhs = -INFINITY, min_scaled = INFINITY, min_ratio = INFINITY;
  for (int k = 0; k < pairs; ++k) {
    const MonotonicityReport m = monotonicity_gap(smooth_density_path(p.grid(), t, 1000 + 2 * k),
                                                  smooth_density_path(p.grid(), t, 1001 + 2 * k), p);
    max_lhs = std::max(max_lhs, m.lhs);
    min_scaled = std::min(min_scaled, m.degenerate ? -INFINITY : m.scaled_ratio);
    min_ratio = std::min(min_ratio, m.ratio);
  }
  r.metrics = {{"pairs", double(pairs)}, {"max_lhs", max_lhs}, {"min_scaled_ratio", min_scaled}, {"min_ratio", min_ratio}};
  r.note = "scaled_ratio = -eps*lhs/rhs";
  r.pass = max_lhs <= 1e-10 && min_scaled >= 0.4;
}

// 4. Gateaux derivatives and the adjoint pairing.
void gateaux(const Ctx&, CriterionResult& r) {
  r.title = "Gateaux derivatives and adjoint";
  r.budget_seconds = 120;
  const MFGProblem p = cosine_problem(64, 0.5, 0.3, 1.0, 0.01);
  const auto t = time_nodes(p);
  const TimeField m = smooth_density_path(p.grid(), t, 3);
  const TimeField m1 = smooth_density_path(p.grid(), t, 4);
  const TimeField h = difference(smooth_density_path(p.grid(), t, 5), m);
  const SensitivityBundle b = sensitivity(m, h, m1, p);
  std::vector<double> steps, e1, e2;
  for (double s : {1e-2, 5e-3, 2.5e-3}) {
    const Eigen::MatrixXd th = fish_response(combine(m, s, h), p).frames;
    const Eigen::MatrixXd r1 = th - b.theta.frames - s * p.eps * b.theta_dot.frames;
    const Eigen::MatrixXd r2 = r1 - 0.5 * s * s * p.eps * p.eps * b.theta_ddot.frames;
    steps.push_back(s);
    e1.push_back(r1.cwiseAbs().maxCoeff());
    e2.push_back(r2.cwiseAbs().maxCoeff());
  }
  const double s1 = log_slope(steps, e1), s2 = log_slope(steps, e2);

  const SensitivityBundle a = sensitivity(m, difference(m1, m), m1, cosine_problem(64, 0.5, 0.2, 1.0, 0.01));
  const double adj = std::abs(a.tangent_pairing - a.adjoint_pairing) / std::max(1.0, std::abs(a.tangent_pairing));
  r.metrics = {{"slope1", s1}, {"slope2", s2}, {"e2_min", e2.back()}, {"adjoint_gap", adj}};
  r.pass = std::abs(s1 - 2) <= 0.2 && std::abs(s2 - 3) <= 0.3 && adj <= 1e-8;
}

// 5. Eigenvalue diagnostics.
void eigen_diagnostics(const Ctx&, CriterionResult& r) {
  r.title = "eigenvalue diagnostics lambda_0, gradient bound, lambda_eps";
  const TorusGrid g(1, 128);
  const LambdaZero l0 = lambda_zero(make_habitat(CosineProfile::parse("1+0.3cos", 1), g, 1.0));
  std::vector<double> dev;
  double min_l = INFINITY;
  for (double eps : {0.05, 0.025}) {
    const MFGProblem p = cosine_problem(128, 0.3, eps, 1.0, 0.01);
    const auto t = time_nodes(p);
    const LambdaEpsSeries s = lambda_eps_positivity(p, smooth_density_path(p.grid(), t, 51),
                                                    smooth_density_path(p.grid(), t, 52), {0.0, 0.25, 0.5, 0.75, 1.0});
    dev.push_back(s.sup_deviation);
    min_l = std::min(min_l, s.min);
  }
  const double ratio = dev[0] / dev[1];
  r.metrics = {{"lambda0", l0.lambda0}, {"max_grad_term", l0.max_gradient_term}, {"dev_ratio", ratio}, {"min_lambda_eps", min_l}};
  r.pass = l0.lambda0 > 0 && l0.max_gradient_term <= 1.0 / 6 + 1e-3 && std::abs(ratio - 2) <= 0.4;
}

// 6. Long-time rates.
void long_time(const Ctx& c, CriterionResult& r) {
  r.title = "long-time rates";
  r.budget_seconds = c.jobs >= 4 ? 600 : 1800;
  const TorusGrid g(1, 128);
  const Habitat hab = make_habitat(CosineProfile::parse("1+0.3cos", 1), g, 1.0);
  MFGProblem p = make_problem(hab, 0.1, 0.05, 1.0, 0.02, make_kernel(g, {KernelKind::kBump, 0.1}));
  p.fixed_point.tol = 1e-8;
  StudyOptions opt;
  opt.jobs = c.jobs;
  const RateTable t = convergence_study(p, {2.5, 5, 10, 20, 40}, opt);
  r.metrics = {{"theta_slope", t.theta_fit.slope}, {"u_slope", t.u_fit.slope}, {"gaps", double(t.gaps.size())}};
  r.pass = t.gaps.empty() && std::abs(t.theta_fit.slope + 1) <= 0.25 && t.u_fit.slope <= -0.35;
}

// 7. Conservation, positivity, comparison, shift covariance, duality.
void properties(const Ctx& c, CriterionResult& r) {
  r.title = "conservation and positivity property suite";
  const int runs = c.full() ? 50 : 10;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double mass = 0, min_theta = INFINITY, min_m = INFINITY, cmp = INFINITY, shift = 0, dual = 0;
  for (int k = 0; k < runs; ++k) {
    const TorusGrid g(1, 64);
    const double a1 = 0.8 * U(rng), a2 = 0.3 * U(rng);
    const Habitat hab = make_habitat(CosineProfile(1, {{1.0, 0, 0}, {a1, 1, 0}, {a2, 2, 0}}), g, 0.05 + U(rng));
    MFGProblem p = make_problem(hab, 0.2 * U(rng), 0.2 * U(rng), 1.0, 0.02, make_kernel(g, {KernelKind::kBump, 0.1}));
    const auto t = time_nodes(p);
    const BestResponse br = best_response(smooth_density_path(g, t, 500 + k, 0.8), p);
    for (Index j = 0; j < br.m.m.frame_count(); ++j)
      mass = std::max(mass, std::abs(integrate(g, br.m.m.frames.col(j)) - 1));
    min_theta = std::min(min_theta, br.theta.frames.minCoeff());
    min_m = std::min(min_m, br.m.m.frames.minCoeff());

    if (k < 10) {
      // comparison and shift covariance on the reward of this run
      TimeField F = periodic_convolve(br.theta, p.rho);
      TimeField F2 = F;
      for (Index i = 0; i < g.size(); ++i) F2.frames.row(i).array() += 0.3 * std::exp(-30 * std::pow(g.coord(int(i)), 2));
      const HJBSolution u1 = solve_backward(F, p.nu, p.T, p.dt);
      const HJBSolution u2 = solve_backward(F2, p.nu, p.T, p.dt);
      cmp = std::min(cmp, (u2.u.frames - u1.u.frames).minCoeff());
      TimeField F3 = F;
      F3.frames.array() += 0.4;
      const HJBSolution u3 = solve_backward(F3, p.nu, p.T, p.dt);
      for (Index j = 0; j < u1.u.frame_count(); ++j)
        shift = std::max(shift, ((u3.u.col(j) - u1.u.col(j)).array() - 0.4 * (p.T - u1.u.t[size_t(j)])).abs().maxCoeff());
      // duality of the forward step with the linearized backward step
      const Field m0 = Field(g, br.m.m.col(0));
      const DensityPath fwd = solve_forward(m0, u1, p.T, p.dt);
      Eigen::VectorXd wT(g.size());
      for (Index i = 0; i < g.size(); ++i) wT[i] = std::exp(std::sin(kTau * g.coord(int(i)) + k));
      const double lhs = fwd.m.col(fwd.m.frame_count() - 1).dot(wT);
      const double rhs = m0.values.dot(backward_linear(u1, wT, p.dt));
      dual = std::max(dual, std::abs(lhs - rhs) / std::abs(lhs));
    }
  }
  r.metrics = {{"runs", double(runs)}, {"mass", mass},  {"min_theta", min_theta}, {"min_m", min_m},
               {"comparison", cmp},    {"shift", shift}, {"duality", dual}};
  r.pass = mass <= 1e-12 && min_theta >= 0 && min_m >= 0 && cmp >= -1e-13 && shift <= 1e-10 && dual <= 1e-10;
}

// 8. Uniqueness corroboration.
void uniqueness(const Ctx& c, CriterionResult& r) {
  r.title = "uniqueness: initializations and damping";
  MFGProblem p = cosine_problem(128, 0.5, 0.05, 2.0, 0.01);
  const auto t = time_nodes(p);
  p.fixed_point.damping = 0.5;
  const EquilibriumSolution ref = solve_equilibrium(p);
  double spread_init = 0, spread_w = 0;
  bool converged = ref.converged;
  const int inits = c.full() ? 5 : 2;
  for (int s = 1; s <= inits; ++s) {
    const TimeField init = smooth_density_path(p.grid(), t, uint64_t(s), 0.6);
    const EquilibriumSolution e = solve_equilibrium(p, &init);
    converged = converged && e.converged;
    spread_init = std::max(spread_init, sup_l1_distance(e.m.m, ref.m.m));
  }
  for (double w : {0.3, 1.0}) {
    p.fixed_point.damping = w;
    const EquilibriumSolution e = solve_equilibrium(p);
    converged = converged && e.converged;
    spread_w = std::max(spread_w, sup_l1_distance(e.m.m, ref.m.m));
  }
  r.metrics = {{"init_spread", spread_init}, {"damping_spread", spread_w}, {"tol", 5e-6}};
  r.pass = converged && spread_init <= 5e-6 && spread_w <= 5e-6;
}

// 9. FPK against particles.
void particles(const Ctx& c, CriterionResult& r) {
  r.title = "FPK vs particles";
  MFGProblem p = cosine_problem(128, 0.5, 0.05, 1.0, 0.01);
  const EquilibriumSolution eq = solve_equilibrium(p);
  const DensityPath& path = eq.m;
  ParticleOptions po;
  po.jobs = c.jobs;
  const ParticleEnsemble big = simulate_particles(p.m0, eq.hjb.drift, p.nu, 100000, p.T, p.dt, 7, po);
  const double d = density_particle_distance(path, big, p.T);

  const int seeds = c.full() ? 8 : 2;
  std::vector<double> Ns, ds;
  for (int N : {1000, 10000, 100000}) {
    double mean = 0;
    for (int s = 0; s < seeds; ++s)
      mean += density_particle_distance(path, simulate_particles(p.m0, eq.hjb.drift, p.nu, N, p.T, p.dt, 100 + s, po), p.T) / seeds;
    Ns.push_back(N);
    ds.push_back(mean);
  }
  const double slope = fit_log_slope(Ns, ds).slope;
  r.metrics = {{"distance_1e5", d}, {"mc_slope", slope}};
  r.pass = eq.converged && d <= 0.05 && std::abs(slope + 0.5) <= 0.1;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(Scale scale, int jobs,
                                            const std::function<void(const CriterionResult&)>& on_result,
                                            const std::vector<int>& only) {
  using Fn = void (*)(const Ctx&, CriterionResult&);
  const Fn table[] = {eigen_identity, explicit_1d, monotonicity, gateaux, eigen_diagnostics,
                      long_time,      properties,  uniqueness,   particles};
  const Ctx ctx{scale, std::max(1, jobs)};
  std::vector<CriterionResult> out;
  for (int id = 1; id <= 9; ++id) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    CriterionResult r;
    r.id = id;
    const auto start = std::chrono::steady_clock::now();
    try {
      table[id - 1](ctx, r);
    } catch (const std::exception& e) {
      r.pass = false;
      r.note = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!ctx.full()) r.budget_seconds = 0;
    if (r.budget_seconds > 0 && r.seconds > r.budget_seconds) {
      r.pass = false;
      r.note += (r.note.empty() ? "" : "; ") + std::string("over the runtime limit");
    }
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace hmfg
