#include "hmfg/logistic.hpp"

#include "hmfg/spectral.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <sstream>

namespace hmfg {

Habitat make_habitat(const Field& K, double mu) {
  if (!(mu > 0)) throw std::invalid_argument("mu must be positive");
  return Habitat{K, mu, integrate(K), std::nullopt};
}

Habitat make_habitat(const CosineProfile& K, const TorusGrid& g, double mu) {
  Habitat h = make_habitat(K.sample(g), mu);
  h.profile = K;
  return h;
}

const char* to_string(Persistence p) {
  switch (p) {
    case Persistence::kPersistent: return "persistent";
    case Persistence::kMarginal: return "marginal";
    case Persistence::kExtinct: return "extinct";
  }
  return "?";
}

namespace {

Eigen::VectorXd steady_residual(const TorusGrid& g, double mu, const Eigen::VectorXd& K, const Eigen::VectorXd& th) {
  return -mu * laplacian(g, th) - (th.array() * (K - th).array()).matrix();
}

// Damped Newton; returns true when the residual meets the target with a positive iterate.
bool newton(const TorusGrid& g, double mu, const Eigen::VectorXd& K, Eigen::VectorXd& th, int max_iter, int& iters,
            double target) {
  const SparseMatrix L = laplacian_matrix(g);
  Eigen::VectorXd r = steady_residual(g, mu, K, th);
  double rn = r.lpNorm<Eigen::Infinity>();
  for (iters = 0; iters < max_iter; ++iters) {
    if (rn <= target * 1e-3) break;
    SparseMatrix J = -mu * L;
    for (Index k = 0; k < g.size(); ++k) J.coeffRef(k, k) -= K[k] - 2 * th[k];
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success) return false;
    const Eigen::VectorXd d = lu.solve(r);
    double step = 1;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      const Eigen::VectorXd trial = th - step * d;
      const Eigen::VectorXd tr = steady_residual(g, mu, K, trial);
      const double tn = tr.lpNorm<Eigen::Infinity>();
      if (tn < rn || tn <= target * 1e-3) {
        th = trial;
        r = tr;
        const double moved = step * d.lpNorm<Eigen::Infinity>();
        const bool stalled = moved <= 1e-15 * std::max(1.0, th.lpNorm<Eigen::Infinity>());
        rn = tn;
        accepted = true;
        if (stalled) iters = max_iter;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return rn <= target && th.minCoeff() > 0;
}

}  // namespace

SteadyState steady_state(double mu, const Field& Ktilde, const SteadyOptions& opt) {
  if (!(mu > 0)) throw std::invalid_argument("mu must be positive");
  const TorusGrid& g = Ktilde.grid;
  SteadyState out;
  const double lam = principal_eigenpair(mu, Ktilde).lambda1;
  if (std::abs(lam) < 1e-8 || lam > 0) {
    out.theta_bar = Field(g);
    out.trivial = true;
    out.lambda1_check = lam;
    out.status = lam > 0 && std::abs(lam) >= 1e-8 ? Persistence::kExtinct : Persistence::kMarginal;
    out.residual = 0;
    return out;
  }

  const Eigen::VectorXd& K = Ktilde.values;
  const double kmax = std::max(K.lpNorm<Eigen::Infinity>(), 1e-300);
  const double target = 1e-9 * kmax;
  const double floor = 1e-3 * std::max(K.maxCoeff(), 1e-12);
  Eigen::VectorXd th = K.cwiseMax(floor);
  int iters = 0;
  bool ok = newton(g, mu, K, th, opt.max_newton, iters, target);
  out.newton_iterations = iters;

  if (!ok) {
    // Fallback: march the parabolic problem with implicit diffusion, then polish.
    out.used_fallback = true;
    th = K.cwiseMax(floor);
    const double bound = K.lpNorm<Eigen::Infinity>() + 2 * std::max(th.maxCoeff(), K.maxCoeff());
    const double dt = std::min(0.5 / bound, 0.05);
    LogisticStepper stepper(Ktilde, mu, 0.0, dt);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(g.size());
    const int steps = static_cast<int>(std::ceil(opt.march_horizon / dt));
    for (int s = 0; s < steps; ++s) {
      Eigen::VectorXd next = stepper.step(th, zero, zero);
      const double change = (next - th).lpNorm<Eigen::Infinity>();
      th = std::move(next);
      if (change < 1e-10 * dt * kmax) break;
    }
    int polish = 0;
    ok = newton(g, mu, K, th, opt.max_newton, polish, target);
    out.newton_iterations += polish;
    if (!ok) throw std::runtime_error("steady state: Newton and time-marching fallback both failed");
  }

  out.theta_bar = Field(g, th);
  out.trivial = false;
  out.status = Persistence::kPersistent;
  out.residual = steady_residual(g, mu, K, th).lpNorm<Eigen::Infinity>();
  out.lambda1_check = principal_eigenpair(mu, Field(g, K - th)).lambda1;
  return out;
}

DtTooLarge::DtTooLarge(double dt, double suggested)
    : std::invalid_argument([&] {
        std::ostringstream os;
        os << "dt = " << dt << " violates the positivity bound of the reaction step; try dt <= " << suggested;
        return os.str();
      }()),
      suggested_(suggested) {}

LogisticStepper::LogisticStepper(const Field& K, double mu, double eps, double dt)
    : grid_(K.grid), K_(K.values), eps_(eps), dt_(dt), implicit_(K.grid, dt * mu) {
  if (!(mu > 0)) throw std::invalid_argument("mu must be positive");
  if (eps < 0) throw std::invalid_argument("eps must be nonnegative");
}

Eigen::VectorXd LogisticStepper::stage(const Eigen::VectorXd& theta, const Eigen::VectorXd& c) const {
  Eigen::VectorXd rhs = theta.array() * (1.0 + dt_ * (K_.array() - theta.array() - eps_ * c.array()));
  return implicit_(rhs);
}

Eigen::VectorXd LogisticStepper::step(const Eigen::VectorXd& theta, const Eigen::VectorXd& c0,
                                      const Eigen::VectorXd& c1, Eigen::VectorXd* mid) const {
  Eigen::VectorXd s1 = stage(theta, c0);
  Eigen::VectorXd s2 = stage(s1, c1);
  if (mid) *mid = s1;
  return 0.5 * (theta + s2);
}

Eigen::VectorXd LogisticStepper::potential(const Eigen::VectorXd& theta, const Eigen::VectorXd& c) const {
  return K_ - 2.0 * theta - eps_ * c;
}

double reaction_rate_bound(const Field& K, const Field& theta0, double eps, double max_harvest) {
  const double M = std::max(theta0.values.lpNorm<Eigen::Infinity>(), std::max(K.values.maxCoeff(), 0.0));
  return K.values.lpNorm<Eigen::Infinity>() + 2 * M + eps * max_harvest;
}

Eigen::MatrixXd harvest_frames(const TimeField& m_path, const Kernel& rho, const std::vector<double>& t) {
  require_same_grid(m_path.grid, rho.grid);
  if (m_path.frame_count() == 0) throw std::invalid_argument("empty density path");
  // Convolution commutes with linear interpolation in time, so convolve frames once.
  TimeField c = periodic_convolve(m_path, rho);
  Eigen::MatrixXd out(m_path.grid.size(), Index(t.size()));
  for (size_t k = 0; k < t.size(); ++k) out.col(Index(k)) = sample(c, t[k]);
  return out;
}

TimeField evolve(const Field& theta0, const Habitat& hab, double eps, const TimeField& m_path, const Kernel& rho,
                 double T, double dt) {
  require_same_grid(theta0.grid, hab.K.grid);
  if (theta0.values.minCoeff() < 0) throw std::invalid_argument("theta0 must be nonnegative");
  if (m_path.frame_count() > 1 && (m_path.t.front() > 1e-12 || m_path.t.back() < T * (1 - 1e-12)))
    throw std::invalid_argument("density path does not span [0, T]");
  const int N = step_count(T, dt);
  TimeField out(theta0.grid, uniform_times(T, N));
  const Eigen::MatrixXd C = eps > 0 ? harvest_frames(m_path, rho, out.t)
                                    : Eigen::MatrixXd::Zero(theta0.grid.size(), N + 1);
  const double bound = reaction_rate_bound(hab.K, theta0, eps, C.size() ? C.lpNorm<Eigen::Infinity>() : 0.0);
  if (dt * bound >= 1) throw DtTooLarge(dt, 0.5 / bound);
  LogisticStepper stepper(hab.K, hab.mu, eps, dt);
  out.frames.col(0) = theta0.values;
  Eigen::VectorXd th = theta0.values;
  for (int k = 0; k < N; ++k) {
    th = stepper.step(th, C.col(k), C.col(k + 1));
    out.frames.col(k + 1) = th;
  }
  return out;
}

TimeField evolve(const Field& theta0, const Habitat& hab, double T, double dt) {
  TimeField none(theta0.grid, {0.0});
  return evolve(theta0, hab, 0.0, none, make_kernel(theta0.grid, {}), T, dt);
}

RateFit stability_rate(const TimeField& path, const Field& theta_bar) {
  require_same_grid(path.grid, theta_bar.grid);
  RateFit fit;
  std::vector<double> e(size_t(path.frame_count()));
  for (Index k = 0; k < path.frame_count(); ++k)
    e[size_t(k)] = (path.frames.col(k) - theta_bar.values).lpNorm<Eigen::Infinity>();
  if (e.empty()) {
    fit.degenerate = true;
    return fit;
  }
  fit.short_path = !(e.back() < 1e-3 * e.front());
  std::vector<double> xs, ys;
  double prev = INFINITY;
  for (size_t k = 0; k < e.size(); ++k) {
    if (e[k] < 1e-10 || e[k] > 1e-1) continue;
    if (e[k] > prev * (1 + 1e-3)) fit.non_monotone = true;
    prev = e[k];
    xs.push_back(path.t[k]);
    ys.push_back(std::log(e[k]));
  }
  fit.points = static_cast<int>(xs.size());
  if (xs.size() < 3) {
    fit.degenerate = true;
    return fit;
  }
  const double n = double(xs.size());
  double sx = 0, sy = 0;
  for (size_t i = 0; i < xs.size(); ++i) sx += xs[i], sy += ys[i];
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0) {
    fit.degenerate = true;
    return fit;
  }
  const double slope = sxy / sxx;
  fit.rate = -slope;
  fit.quality = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

double perturbation_gap(double eps, const TimeField& m_path, const Habitat& hab, const Kernel& rho, double T,
                        double dt) {
  const SteadyState ss = steady_state(hab.mu, hab.K);
  const TimeField th = evolve(ss.theta_bar, hab, eps, m_path, rho, T, dt);
  double gap = 0;
  for (Index k = 0; k < th.frame_count(); ++k)
    gap = std::max(gap, (th.frames.col(k) - ss.theta_bar.values).lpNorm<Eigen::Infinity>());
  return gap;
}

}  // namespace hmfg
