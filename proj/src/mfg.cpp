#include "hmfg/mfg.hpp"

#include "hmfg/spectral.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace hmfg {

namespace {

std::vector<double> trapezoid_weights(const std::vector<double>& t) {
  std::vector<double> w(t.size(), 0.0);
  for (size_t k = 0; k + 1 < t.size(); ++k) {
    const double d = t[k + 1] - t[k];
    w[k] += 0.5 * d;
    w[k + 1] += 0.5 * d;
  }
  return w;
}

// sum_n w_n h^d <A_n, B_n>
double pairing(const TorusGrid& g, const std::vector<double>& t, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const std::vector<double> w = trapezoid_weights(t);
  double s = 0;
  for (size_t n = 0; n < t.size(); ++n) s += w[n] * A.col(Index(n)).dot(B.col(Index(n)));
  return g.cell() * s;
}

void check_path_mass(const TimeField& m) {
  for (Index k = 0; k < m.frame_count(); ++k)
    if (std::abs(integrate(m.grid, m.frames.col(k)) - 1.0) > 1e-8)
      throw std::invalid_argument("density path frame without unit mass");
}

Eigen::MatrixXd frames_at(const TimeField& f, const std::vector<double>& t) {
  Eigen::MatrixXd out(f.grid.size(), Index(t.size()));
  for (size_t k = 0; k < t.size(); ++k) out.col(Index(k)) = sample(f, t[k]);
  return out;
}

}  // namespace

MFGProblem make_problem(const Habitat& hab, double nu, double eps, double T, double dt, const Kernel& rho) {
  MFGProblem p;
  p.habitat = hab;
  p.nu = nu;
  p.eps = eps;
  p.T = T;
  p.dt = dt;
  p.rho = rho;
  const SteadyState ss = steady_state(hab.mu, hab.K);
  p.theta0 = ss.theta_bar;
  p.m0 = Field::constant(hab.K.grid, 1.0);
  return p;
}

void validate(const MFGProblem& p) {
  const TorusGrid& g = p.grid();
  require_same_grid(g, p.rho.grid);
  require_same_grid(g, p.theta0.grid);
  require_same_grid(g, p.m0.grid);
  if (!(p.habitat.mu > 0)) throw std::invalid_argument("mu must be positive");
  if (!(p.nu >= 0)) throw std::invalid_argument("nu must be nonnegative");
  if (!(p.eps >= 0)) throw std::invalid_argument("eps must be nonnegative");
  step_count(p.T, p.dt);
  if (p.theta0.values.minCoeff() < 0) throw std::invalid_argument("theta0 must be nonnegative");
  check_density(p.m0);
  const auto& f = p.fixed_point;
  if (!(f.damping > 0 && f.damping <= 1)) throw std::invalid_argument("damping must lie in (0, 1]");
  if (!(f.tol > 0)) throw std::invalid_argument("tol must be positive");
  if (f.max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
}

double sup_l1_distance(const TimeField& a, const TimeField& b) {
  require_same_grid(a.grid, b.grid);
  if (a.frame_count() != b.frame_count()) throw std::invalid_argument("time grids differ");
  double d = 0;
  for (Index k = 0; k < a.frame_count(); ++k)
    d = std::max(d, a.grid.cell() * (a.frames.col(k) - b.frames.col(k)).cwiseAbs().sum());
  return d;
}

TimeField fish_response(const TimeField& m_path, const MFGProblem& prob) {
  return evolve(prob.theta0, prob.habitat, prob.eps, m_path, prob.rho, prob.T, prob.dt);
}

BestResponse best_response(const TimeField& m_path, const MFGProblem& prob) {
  check_path_mass(m_path);
  BestResponse br;
  br.theta = fish_response(m_path, prob);
  br.hjb = solve_backward(periodic_convolve(br.theta, prob.rho), prob.nu, prob.T, prob.dt, prob.hjb);
  br.m = solve_forward(prob.m0, br.hjb, prob.T, prob.dt);
  return br;
}

EquilibriumSolution solve_equilibrium(const MFGProblem& prob, const TimeField* initial) {
  validate(prob);
  const std::vector<double> t = uniform_times(prob.T, step_count(prob.T, prob.dt));
  TimeField m = initial ? TimeField(prob.grid(), t) : TimeField::constant_in_time(prob.m0, t);
  if (initial) m.frames = frames_at(*initial, t);
  const auto& fp = prob.fixed_point;
  EquilibriumSolution sol;
  for (int k = 0; k < fp.max_iter; ++k) {
    BestResponse br = best_response(m, prob);
    const double r = sup_l1_distance(br.m.m, m);
    sol.residual_history.push_back(r);
    sol.iterations = k + 1;
    sol.residual = r;
    if (r <= fp.tol) {
      sol.converged = true;
      sol.theta = std::move(br.theta);
      sol.u = br.hjb.u;
      sol.hjb = std::move(br.hjb);
      sol.m.m = m;
      sol.m.mass_drift = br.m.mass_drift;
      for (Index j = 0; j < m.frame_count(); ++j)
        sol.m.mass_drift = std::max(sol.m.mass_drift, std::abs(integrate(m.grid, m.frames.col(j)) - 1.0));
      return sol;
    }
    const double w = fp.averaging == Averaging::kPicard ? fp.damping : 1.0 / (k + 2);
    m.frames = (1 - w) * m.frames + w * br.m.m.frames;
    if (k + 1 == fp.max_iter) {
      sol.theta = std::move(br.theta);
      sol.u = br.hjb.u;
      sol.hjb = std::move(br.hjb);
      sol.m = std::move(br.m);
    }
  }
  return sol;
}

TimeField smooth_density_path(const TorusGrid& g, const std::vector<double>& t, uint64_t seed, double amplitude,
                              int modes) {
  if (!(amplitude >= 0 && amplitude < 1)) throw std::invalid_argument("amplitude must lie in [0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<int> wave(1, 3);
  constexpr double tau = 2 * std::numbers::pi;
  struct Mode { double a, phase, omega, chi; int kx, ky; };
  std::vector<Mode> ms;
  double total = 0;
  for (int j = 0; j < modes; ++j) {
    Mode md{U(rng), tau * U(rng), tau * 2.0 * U(rng), tau * U(rng), wave(rng), g.dim() == 2 ? wave(rng) - 1 : 0};
    total += md.a;
    ms.push_back(md);
  }
  const double T = t.empty() ? 1.0 : std::max(t.back(), 1e-12);
  TimeField out(g, t);
  for (size_t s = 0; s < t.size(); ++s)
    for (Index k = 0; k < g.size(); ++k) {
      const auto p = g.point(k);
      double v = 1;
      for (const auto& md : ms)
        v += amplitude * md.a / total * std::cos(tau * (md.kx * p[0] + md.ky * p[1]) + md.phase) *
             std::cos(md.omega * t[s] / T + md.chi);
      out.frames(k, Index(s)) = v;
    }
  return out;
}

SensitivityBundle sensitivity(const TimeField& m_path, const TimeField& h_path, const TimeField& m1_path,
                              const MFGProblem& prob, const std::vector<double>& sample_times) {
  const TorusGrid& g = prob.grid();
  const int N = step_count(prob.T, prob.dt);
  const double dt = prob.dt, eps = prob.eps, cell = g.cell();
  const std::vector<double> t = uniform_times(prob.T, N);
  const Eigen::MatrixXd C = harvest_frames(m_path, prob.rho, t);
  const Eigen::MatrixXd H = harvest_frames(h_path, prob.rho, t);
  const Eigen::MatrixXd G = harvest_frames(m1_path, prob.rho, t) - C;
  const double bound = reaction_rate_bound(prob.habitat.K, prob.theta0, eps, C.lpNorm<Eigen::Infinity>());
  if (dt * bound >= 1) throw DtTooLarge(dt, 0.5 / bound);
  const LogisticStepper st(prob.habitat.K, prob.habitat.mu, eps, dt);
  const DiffusionSolve& Ainv = st.implicit();

  SensitivityBundle b;
  b.theta = TimeField(g, t);
  b.theta_dot = TimeField(g, t);
  b.theta_ddot = TimeField(g, t);
  b.p = TimeField(g, t);
  b.psi = TimeField(g, t);
  b.V_eps = TimeField(g, t);
  Eigen::MatrixXd mid(g.size(), N), P(g.size(), N), Q(g.size(), N);

  Eigen::VectorXd th = prob.theta0.values;
  Eigen::VectorXd td = Eigen::VectorXd::Zero(g.size()), tdd = td;
  b.theta.frames.col(0) = th;
  for (int n = 0; n < N; ++n) {
    const Eigen::VectorXd h0 = H.col(n), h1 = H.col(n + 1);
    const Eigen::VectorXd s1 = st.stage(th, C.col(n));
    const Eigen::ArrayXd p1 = 1.0 + dt * st.potential(th, C.col(n)).array();
    const Eigen::ArrayXd q1 = 1.0 + dt * st.potential(s1, C.col(n + 1)).array();
    const Eigen::VectorXd e1 = Ainv((p1 * td.array() - dt * th.array() * h0.array()).matrix());
    const Eigen::VectorXd ee1 =
        Ainv((p1 * tdd.array() + dt * (-2 * td.array().square() - 2 * td.array() * h0.array())).matrix());
    const Eigen::VectorXd e2 = Ainv((q1 * e1.array() - dt * s1.array() * h1.array()).matrix());
    const Eigen::VectorXd ee2 =
        Ainv((q1 * ee1.array() + dt * (-2 * e1.array().square() - 2 * e1.array() * h1.array())).matrix());
    mid.col(n) = s1;
    P.col(n) = p1.matrix();
    Q.col(n) = q1.matrix();
    th = 0.5 * (th + st.stage(s1, C.col(n + 1)));
    td = 0.5 * (td + e2);
    tdd = 0.5 * (tdd + ee2);
    b.theta.frames.col(n + 1) = th;
    b.theta_dot.frames.col(n + 1) = td;
    b.theta_ddot.frames.col(n + 1) = tdd;
  }

  const std::vector<double> w = trapezoid_weights(t);
  b.tangent_pairing = pairing(g, t, G, b.theta_dot.frames);

  // Reverse sweep through the tangent recursion.
  Eigen::VectorXd lam = cell * w[size_t(N)] * G.col(N);
  double adj = 0;
  for (int n = N - 1; n >= 0; --n) {
    const Eigen::VectorXd zeta = Ainv(0.5 * lam);
    const Eigen::VectorXd eta = Ainv((Q.col(n).array() * zeta.array()).matrix());
    adj -= dt * (eta.dot((b.theta.frames.col(n).array() * H.col(n).array()).matrix()) +
                 zeta.dot((mid.col(n).array() * H.col(n + 1).array()).matrix()));
    lam = 0.5 * lam + (P.col(n).array() * eta.array()).matrix() + cell * w[size_t(n)] * G.col(n);
    b.p.frames.col(n) = lam / cell - 0.5 * dt * G.col(n);
  }
  b.adjoint_pairing = adj;
  b.continuum_adjoint_pairing =
      -pairing(g, t, b.p.frames, (H.array() * b.theta.frames.array()).matrix());

  b.psi_available = b.theta.frames.minCoeff() > 0;
  for (int n = 0; n <= N; ++n) {
    b.V_eps.frames.col(n) = st.potential(b.theta.frames.col(n), C.col(n));
    if (b.psi_available)
      b.psi.frames.col(n) = ((1.0 - eps * b.p.frames.col(n).array()) / b.theta.frames.col(n).array()).matrix();
  }
  if (b.psi_available && b.psi.frames.minCoeff() <= 0) b.psi_available = false;

  if (b.psi_available)
    for (double s : sample_times) {
      const Index k = std::clamp<Index>(Index(std::lround(s / dt)), 0, N);
      b.sample_times.push_back(t[size_t(k)]);
      b.lambda_eps.push_back(lambda_eps_at(b, prob, k));
    }
  return b;
}

double lambda_eps_at(const SensitivityBundle& b, const MFGProblem& prob, Index k) {
  if (!b.psi_available) throw std::runtime_error("psi unavailable: theta is not positive");
  const TorusGrid& g = prob.grid();
  const Index N = b.psi.frame_count() - 1;
  const double dt = prob.dt;
  const Eigen::MatrixXd& psi = b.psi.frames;
  Eigen::VectorXd dpsi;
  if (N < 2)
    dpsi = (psi.col(N) - psi.col(0)) / dt;
  else if (k == 0)
    dpsi = (-3 * psi.col(0) + 4 * psi.col(1) - psi.col(2)) / (2 * dt);
  else if (k == N)
    dpsi = (3 * psi.col(N) - 4 * psi.col(N - 1) + psi.col(N - 2)) / (2 * dt);
  else
    dpsi = (psi.col(k + 1) - psi.col(k - 1)) / (2 * dt);
  const Eigen::VectorXd pk = psi.col(k);
  const double mu = prob.habitat.mu;
  const Eigen::VectorXd q = 0.5 * (dpsi + mu * laplacian(g, pk) +
                                   2 * (b.V_eps.frames.col(k).array() * pk.array()).matrix() -
                                   2 * prob.eps * b.p.frames.col(k));
  return weighted_principal_eigenvalue(mu, Field(g, pk), Field(g, q));
}

double coupling_functional(const TimeField& m_path, const TimeField& m1_path, const MFGProblem& prob) {
  const std::vector<double> t = uniform_times(prob.T, step_count(prob.T, prob.dt));
  const TimeField th = fish_response(m_path, prob);
  const TimeField th1 = fish_response(m1_path, prob);
  const Eigen::MatrixXd dm = frames_at(m1_path, t) - frames_at(m_path, t);
  const TimeField rdiff = periodic_convolve(TimeField{th.grid, t, th1.frames - th.frames}, prob.rho);
  return pairing(prob.grid(), t, rdiff.frames, dm);
}

double second_variation(const TimeField& m_path, const TimeField& h_path, const TimeField& m1_path,
                        const MFGProblem& prob) {
  const SensitivityBundle b = sensitivity(m_path, h_path, m1_path, prob);
  const std::vector<double>& t = b.theta.t;
  const Eigen::MatrixXd back = harvest_frames(m_path, prob.rho, t) - harvest_frames(m1_path, prob.rho, t);
  const Eigen::MatrixXd rh = harvest_frames(h_path, prob.rho, t);
  const TorusGrid& g = prob.grid();
  return prob.eps * prob.eps * pairing(g, t, b.theta_ddot.frames, back) +
         2 * prob.eps * pairing(g, t, b.theta_dot.frames, rh);
}

MonotonicityReport monotonicity_gap(const TimeField& m1_path, const TimeField& m2_path, const MFGProblem& prob) {
  check_path_mass(m1_path);
  check_path_mass(m2_path);
  const std::vector<double> t = uniform_times(prob.T, step_count(prob.T, prob.dt));
  const TimeField th1 = fish_response(m1_path, prob);
  const TimeField th2 = fish_response(m2_path, prob);
  const TorusGrid& g = prob.grid();
  const Eigen::MatrixXd dth = th1.frames - th2.frames;
  const Eigen::MatrixXd dm = frames_at(m1_path, t) - frames_at(m2_path, t);
  const TimeField rdth = periodic_convolve(TimeField{g, t, dth}, prob.rho);
  MonotonicityReport r;
  r.lhs = pairing(g, t, rdth.frames, dm);
  r.rhs = pairing(g, t, dth, dth);
  if (r.rhs > 0 && prob.eps > 0) {
    r.ratio = -r.lhs / (prob.eps * r.rhs);
    r.scaled_ratio = -prob.eps * r.lhs / r.rhs;
  } else if (dm.cwiseAbs().maxCoeff() > 0) {
    r.degenerate = true;
  }
  return r;
}

LambdaZero lambda_zero(const Habitat& hab) {
  const SteadyState ss = steady_state(hab.mu, hab.K);
  if (ss.trivial) throw std::runtime_error("lambda_0 needs a non-trivial steady state");
  const TorusGrid& g = hab.K.grid;
  const Eigen::ArrayXd th = ss.theta_bar.values.array();
  Eigen::ArrayXd grad2 = Eigen::ArrayXd::Zero(g.size());
  for (int a = 0; a < g.dim(); ++a) grad2 += centered_diff(g, ss.theta_bar.values, a).array().square();
  const Eigen::ArrayXd gterm = hab.mu * grad2 / (4 * th.cube());
  const Eigen::ArrayXd phi0 = 1.5 * (hab.K.values.array() - th) / th + 3.0 * gterm;
  LambdaZero out;
  out.theta_bar = ss.theta_bar;
  out.phi0 = Field(g, phi0.matrix());
  out.gradient_term = Field(g, gterm.matrix());
  out.max_gradient_term = gterm.maxCoeff();
  const Field w(g, (1.0 / th).matrix());
  out.lambda0 = weighted_principal_eigenvalue(hab.mu, w, Field(g, (phi0 + gterm - 1.0).matrix()));
  out.phi0_eigenvalue = weighted_principal_eigenvalue(hab.mu, w, out.phi0);
  return out;
}

LambdaEpsSeries lambda_eps_positivity(const MFGProblem& prob, const TimeField& m_path, const TimeField& m1_path,
                                      const std::vector<double>& sample_times) {
  const std::vector<double> t = uniform_times(prob.T, step_count(prob.T, prob.dt));
  TimeField h(prob.grid(), t);
  h.frames = frames_at(m_path, t) - frames_at(m1_path, t);
  const SensitivityBundle b = sensitivity(m_path, h, m1_path, prob, sample_times);
  if (!b.psi_available) throw std::runtime_error("lambda_eps unavailable: theta is not positive");
  LambdaEpsSeries s;
  s.t = b.sample_times;
  s.lambda = b.lambda_eps;
  s.lambda0 = lambda_zero(prob.habitat).lambda0;
  s.min = INFINITY;
  for (double l : s.lambda) {
    s.min = std::min(s.min, l);
    s.sup_deviation = std::max(s.sup_deviation, std::abs(l - s.lambda0));
  }
  return s;
}

}  // namespace hmfg
